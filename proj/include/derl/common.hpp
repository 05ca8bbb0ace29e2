#pragma once

#include <stdexcept>
#include <string>

namespace derl {

/// Bad user-supplied configuration (malformed JSON, out-of-range parameter,
/// schema mismatch). Maps to CLI exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// A numeric invariant failed at runtime (non-PSD matrix where one is required,
/// invalid transition row, discretization constraint violation). Exit code 4.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

inline double clamp(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}

}  // namespace derl
