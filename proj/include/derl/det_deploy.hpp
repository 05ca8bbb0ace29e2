#pragma once

#include <cstdint>
#include <limits>

#include "derl/lsvi.hpp"
#include "derl/mdp.hpp"

namespace derl {

struct DeploymentRecord {
    int k = 0;    // 1-based deployment index
    int h_k = 0;  // frontier: number of layers backed up this deployment (1-based count)
    double delta_k = 0.0;
    // True when this deployment's Delta test passed and the frontier moved past
    // layer h_k; on the last layer that move is the terminating return.
    bool frontier_advanced = false;
    long num_trajectories = 0;
    double wall_seconds = 0.0;
    double v1_backup = 0.0;  // init-weighted optimistic V_1 of this deployment's value fit
    // Exact-DP diagnostics of the deployed greedy prefix on the first h_k
    // layers; NaN when oracle logging is off.
    double j_pi_trunc = std::numeric_limits<double>::quiet_NaN();
    double j_opt_trunc = std::numeric_limits<double>::quiet_NaN();
    DeterministicPolicy greedy;  // greedy table (tail beyond h_k is action 0)
};

struct DeploymentLog {
    enum class Terminal { ReturnedPolicy, BudgetExhausted };
    std::vector<DeploymentRecord> records;
    Terminal terminal = Terminal::BudgetExhausted;
    int deployments_used() const { return static_cast<int>(records.size()); }
};

struct DetDeployResult {
    Policy policy;  // greedy policy over all layers at termination (or best effort
                    // from the last deployment when the budget ran out)
    DeploymentLog log;
    LayeredDataset data;
    std::vector<CovarianceAccumulator> accumulators;
};

/// Frontier-advancing deployment loop with a fixed per-deployment batch size.
/// Each deployment k backs up an optimistic Q over the first h_k layers from
/// all previously collected data, deploys its greedy prefix completed by
/// per-step uniform actions, and measures
///   Delta_k = (2 beta / N) sum_n sum_{h < h_k} sqrt(phi_{h,n}' Lambda_h^{-1} phi_{h,n})
/// with the pre-deployment Lambda. The frontier advances when
/// Delta_k < epsilon h_k / (2H); advancing past the last layer returns the
/// greedy policy. Budget: c_K * d * H + 1 deployments, else BudgetExhausted.
///
/// beta <= 0 selects theoretical_beta(d, H, epsilon, delta). log_exact fills
/// the exact-DP diagnostic columns.
DetDeployResult run_deterministic_derl(const LinearMdpInstance& m, const RewardSpec& reward,
                                       double epsilon, double delta, int c_K, int N,
                                       double beta, std::uint64_t seed,
                                       bool log_exact = true, int workers = 0);

struct RewardFreeResult {
    DeploymentLog log;
    LayeredDataset data;
    std::vector<CovarianceAccumulator> accumulators;
};

/// Reward-ignoring variant: the backup target uses the scaled bonus u/H as
/// an intrinsic reward (layer rewards are never read), and the frontier
/// advances when Delta_k < epsilon h_k / ((4H+2) H). The returned dataset
/// holds every layer's transitions from every deployment.
RewardFreeResult run_reward_free_exploration(const LinearMdpInstance& m, double epsilon,
                                             double delta, int c_K, int N, double beta,
                                             std::uint64_t seed, bool log_exact = false,
                                             int workers = 0);

struct PlanResult {
    Policy policy;
    double v1 = 0.0;  // init-weighted optimistic value estimate
};

/// Single offline backup over the first h_tilde layers of a fixed dataset,
/// with bonus and value both capped at h_tilde. Throws config_error when a
/// needed layer has no samples.
PlanResult plan_from_dataset(const LinearMdpInstance& m, const LayeredDataset& data,
                             const RewardSpec& reward, int h_tilde, double beta);

}  // namespace derl
