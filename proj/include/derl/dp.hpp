#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "derl/mdp.hpp"

namespace derl {

/// Exact value of a policy on the first h_trunc layers (h_trunc in [1, H]),
/// by backward induction; a mixture's value is the arithmetic mean of its
/// members' values. Sums run layer-major, state-minor, so results are
/// bit-reproducible.
double evaluate_policy_exact(const LinearMdpInstance& m, const Policy& p,
                             const RewardSpec& reward, int h_trunc);
double evaluate_table_exact(const LinearMdpInstance& m, const PolicyTable& t,
                            const RewardSpec& reward, int h_trunc);

struct OptimalResult {
    double value;   // init-weighted optimal value of the truncated instance
    Policy policy;  // greedy deterministic policy (ties -> lowest action index);
                    // layers beyond h_trunc are filled with action 0
    std::vector<std::vector<double>> v;  // v[h][s] optimal values, h < h_trunc
};

/// Backward induction for the optimal value and a greedy optimal policy on
/// the first h_trunc layers.
OptimalResult optimal_value_exact(const LinearMdpInstance& m, const RewardSpec& reward,
                                  int h_trunc);

/// State-occupancy probabilities occ[h][s] under a policy table.
std::vector<std::vector<double>> state_occupancy(const LinearMdpInstance& m,
                                                 const PolicyTable& t);

/// Exact E_pi[phi phi^T] at layer h (0-based). Mixtures average member
/// covariances, matching episode-level mixing.
Eigen::MatrixXd expected_covariance(const LinearMdpInstance& m, const Policy& p, int h);
Eigen::MatrixXd expected_covariance_table(const LinearMdpInstance& m, const PolicyTable& t,
                                          int h);

/// max_pi E_pi[ sum_{h < h_max} sqrt(phi_h' Sigma_h^{-1} phi_h) ], computed
/// by exact DP (the maximum is attained by a deterministic policy). Each
/// Sigma must be symmetric with smallest eigenvalue >= 1 - 1e-9.
double uncertainty_diagnostic(const LinearMdpInstance& m,
                              const std::vector<Eigen::MatrixXd>& sigmas, int h_max);

/// All deterministic policies of m (product over (layer,state) action counts).
/// Throws config_error if the count exceeds cap.
std::vector<DeterministicPolicy> enumerate_deterministic_policies(const LinearMdpInstance& m,
                                                                  long cap = 10000);

/// True when two deterministic policies induce the same trajectory
/// distribution: they agree on every state either can reach.
bool path_equivalent(const LinearMdpInstance& m, const DeterministicPolicy& a,
                     const DeterministicPolicy& b);

}  // namespace derl
