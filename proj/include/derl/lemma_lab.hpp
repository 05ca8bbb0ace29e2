#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <set>
#include <vector>

#include "derl/mdp.hpp"

namespace derl {

/// K batches of N feature vectors each (||phi|| <= 1).
struct BatchSequence {
    std::vector<std::vector<Eigen::VectorXd>> batches;
};

/// Compressed batch: distinct directions with multiplicities, equivalent to
/// repeating each direction `count` times. Used by the fuzzers to build
/// large adversarial batches cheaply.
struct WeightedBatch {
    std::vector<std::pair<Eigen::VectorXd, long>> atoms;
    long size() const {
        long n = 0;
        for (const auto& [v, c] : atoms) n += c;
        return n;
    }
};

/// Indices k (1-based) with Tr(A_{before k}^{-1} Phi_k) >= N * eps, where
/// A accumulates I + all previous batches' Grams and Phi_k is batch k's Gram.
/// All batches must share one size N.
std::set<int> violation_set(const BatchSequence& seq, double eps);
std::set<int> violation_set_weighted(const std::vector<WeightedBatch>& seq, double eps);

struct BridgeCheck {
    double lhs = 0.0;  // Tr(A^{-1} Phi)
    double rhs = 0.0;  // ratio * log(ratio), ratio = det(A+Phi)/det(A)
    bool holds = false;
};

/// Trace-determinant bridge: requires A symmetric with A >= I and Phi PSD.
BridgeCheck trace_det_bridge_check(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Phi);

struct PerturbationCheck {
    double quad_gap = 0.0, quad_bound = 0.0;        // |phi'(A+ - A)phi| <= d eps
    double inv_quad_gap = 0.0, inv_quad_bound = 0.0;  // |phi'(A+^-1 - A^-1)phi| <= d eps/(1-d eps)
    double norm_gap = 0.0, norm_bound = 0.0;        // | ||phi||_{A+^-1} - ||phi||_{A^-1} |
    bool a_plus_pd = false;
    bool holds = false;
};

/// Entrywise perturbation stability: requires A symmetric with A >= I,
/// max|Delta_ij| < 1/d, ||phi|| <= 1. eps is taken as max|Delta_ij|.
PerturbationCheck matrix_perturbation_check(const Eigen::MatrixXd& A,
                                            const Eigen::MatrixXd& Delta,
                                            const Eigen::VectorXd& phi);

struct FuzzReport {
    long trials = 0;
    long violations = 0;
    double max_ratio = 0.0;  // max lhs/bound observed (<= 1 when clean)
    bool clean() const { return violations == 0; }
};

/// Randomized adversarial checks; each returns the trial/violation tally.
FuzzReport fuzz_trace_det_bridge(long trials, std::uint64_t seed);
FuzzReport fuzz_matrix_perturbation(long trials, std::uint64_t seed);
/// Unbatched elliptical potential: sum_t Tr(X_t M_{t-1}^{-1}) over PSD X_t
/// with Tr(X_t) <= 1, M_t = M_{t-1} + X_t, M_0 = lambda I, against
/// (1 + 1/lambda) d log(1 + T/d).
FuzzReport fuzz_elliptical_potential(long trials, std::uint64_t seed);

struct BatchedPotentialParams {
    int c_K = 2;
    int d = 2;
    int H = 2;
    double eps = 0.5;
};

/// Smallest N satisfying the sufficient conditions
///   N eps >= d log(1 + K N / d)  and  (N eps / (d log(1+KN/d)))^{c_K} >= 2 K N / d
/// for K = c_K d H + 1, under which the violation set cannot exceed c_K * d.
long batched_potential_min_n(const BatchedPotentialParams& p);

/// Structured sequences (repeated directions, low-rank bursts, random mixes)
/// at the size from batched_potential_min_n; a violation means
/// |violation_set| > c_K * d for some sequence.
FuzzReport fuzz_batched_potential(long trials, std::uint64_t seed,
                                  const BatchedPotentialParams& p);

}  // namespace derl
