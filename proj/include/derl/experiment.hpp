#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "derl/io.hpp"
#include "derl/mdp.hpp"

namespace derl {

enum class ExperimentKind { DetDerl, RewardFree, ArbDerl, LowerBoundScaling, LemmaFuzz };

struct InstanceSource {
    enum class Kind { Hard, HardFamily, File, RandomSmall };
    Kind kind = Kind::Hard;
    HardInstanceSpec hard;                       // Hard / HardFamily (family ignores h#/i#)
    std::string path;                            // File
    int d = 2, H = 2, states = 2, actions = 2;   // RandomSmall
    std::uint64_t gen_seed = 0;
};

struct AlgorithmParams {
    int N = 1000;
    double epsilon = 0.1;
    double delta = 0.1;
    double beta = 0.0;        // <= 0: theory default
    double beta_prime = 0.1;
    int c_K = 2;
    int i_max = 4;
    double eps0 = 0.0;        // <= 0: 1 / (2 d (N+1))
    double nu_min = 0.0;      // <= 0: measured via reachability_coefficient
    long fuzz_trials = 100000;
    long structured_trials = 1000;
};

struct ExperimentConfig {
    int schema_version = 1;
    ExperimentKind kind = ExperimentKind::DetDerl;
    InstanceSource source;
    AlgorithmParams params;
    std::vector<std::uint64_t> seeds;
    std::vector<int> d_grid, h_grid;  // LowerBoundScaling only
    std::string out_dir;              // empty: no artifacts written
    int workers = 0;
};

ExperimentConfig config_from_json(const json& j);

struct SeedRow {
    std::uint64_t seed = 0;
    int instance_index = 0;  // family member / grid point
    int k_used = 0;
    double suboptimality = 0.0;
    bool success = false;
    bool budget_exhausted = false;
    double seconds = 0.0;
};

struct ExperimentReport {
    std::vector<SeedRow> rows;
    double success_rate = 0.0;
    double mean_k = 0.0;
    bool budget_exhausted_any = false;
    bool invariant_violation = false;
    json aggregate;  // kind-specific extras (slopes, fuzz tallies, ...)

    int exit_code() const {
        if (invariant_violation) return 4;
        if (budget_exhausted_any) return 3;
        return 0;
    }
};

/// Dispatches on config.kind, runs every seed (and grid point), writes CSV
/// logs plus report.json under out_dir when set.
ExperimentReport run_experiment(const ExperimentConfig& config);

struct ScalingCell {
    int d = 0, H = 0;
    double mean_k_det = 0.0;
    int k_arb = 0;  // deployments used by the arbitrary-policy algorithm
    int det_budget_exhausted = 0;
};

struct ScalingReport {
    std::vector<ScalingCell> cells;
    bool has_fit = false;  // needs >= 2 distinct d*H values
    double slope = 0.0, intercept = 0.0, r_squared = 0.0;
    bool arb_constant_in_d = false;
    std::vector<SeedRow> rows;
};

/// Mean deterministic-algorithm deployment count over hard-instance families
/// for each (d, H), regressed against d*H; the arbitrary-policy algorithm is
/// run once per grid point as the constant-in-d control.
ScalingReport lower_bound_scaling(const std::vector<int>& d_grid, const std::vector<int>& h_grid,
                                  double epsilon, int N, const std::vector<std::uint64_t>& seeds,
                                  const AlgorithmParams& params, int workers = 0);

}  // namespace derl
