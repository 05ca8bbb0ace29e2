#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "derl/lsvi.hpp"
#include "derl/mdp.hpp"

namespace derl {

/// Entrywise ceiling onto the grid {k * eps0}: eps0 * ceil(x / eps0). Values
/// already on the grid (within 1e-9 grid units) are left unchanged.
Eigen::VectorXd discretize_vector(const Eigen::VectorXd& v, double eps0);
Eigen::MatrixXd discretize_matrix(const Eigen::MatrixXd& m, double eps0);

/// Discretized linear value function underlying a deployable greedy policy:
/// per layer, Q̄(s,a) = clamp(w̄.phi + sqrt(phi' Z̄ phi), 0, 1), with w̄ on the
/// grid eps0/(2d) and Z̄ on the grid eps0^2/(4d). The top layer uses only Z̄.
struct DiscretizedQ {
    std::vector<Eigen::VectorXd> w_bar;  // layers 0..top_layer (top entry zero)
    std::vector<Eigen::MatrixXd> z_bar;
    double eps0 = 0.0;
    int top_layer = 0;  // 0-based

    double q(const LinearMdpInstance& m, int h, int s, int a) const;
    int greedy_action(const LinearMdpInstance& m, int h, int s) const;
    DeterministicPolicy greedy_policy(const LinearMdpInstance& m) const;
};

struct SolveOptQResult {
    double v1 = 0.0;                // undiscretized optimistic value at the initial state
    DeterministicPolicy policy;     // greedy w.r.t. the discretized chain
    DiscretizedQ qbar;
};

/// Optimistic planning toward the exploration reward
/// R(s,a) = sqrt(phi' (2I + sigma_R)^{-1} phi) at layer `top` with zero
/// reward below, run as two chains: an undiscretized one whose V_1 is
/// returned, and a discretized one (grid eps0) whose greedy policy is
/// returned. Requires sigma_R >= -I/2 and eps0 <= 1/(2 d (N+1)) for the
/// largest layer dataset size N.
SolveOptQResult solve_opt_q(const LinearMdpInstance& m, int top, const LayeredDataset& data,
                            const std::vector<CovarianceAccumulator>& accumulators,
                            double beta_prime, const Eigen::MatrixXd& sigma_R, double eps0);

/// Plain policy-evaluation estimate of E_pi[phi phi^T] at layer `top` from
/// logged data: entry (i,j) evaluates the reward (1 + phi_i phi_j)/2 at the
/// top layer under pi via clipped-to-[0,1] least-squares backups (no bonus),
/// then maps back through 2*V - 1. Entries land in [-1, 1]; the result is
/// symmetric. Requires non-empty datasets for every layer below `top`.
Eigen::MatrixXd estimate_cov_matrix(const LinearMdpInstance& m, int top,
                                    const LayeredDataset& data,
                                    const std::vector<CovarianceAccumulator>& accumulators,
                                    const DeterministicPolicy& pi);

struct CoverMember {
    DeterministicPolicy policy;
    DiscretizedQ qbar;
};

/// Per-layer exploration cover: the distinct greedy policies accumulated
/// before the optimistic coverage value dropped below 3 nu_min^2 / 8.
struct PolicyCover {
    std::vector<CoverMember> members;
    Eigen::MatrixXd sigma_tilde;                  // 2I + sum of estimated covariances
    std::vector<Eigen::MatrixXd> increments;      // the estimated covariances, in order
    std::vector<double> opt_values;               // solve_opt_q values per iteration
    int iterations = 0;
    bool broke = false;               // coverage threshold reached before i_max
    bool singleton_fallback = false;  // no member accumulated; deployed the initial policy
};

struct ArbDeployResult {
    LayeredDataset data;  // layer h holds exactly N tuples from deployment h+1
    std::vector<CovarianceAccumulator> accumulators;
    std::vector<PolicyCover> covers;  // one per layer
    int deployments = 0;              // always H
};

/// Layer-by-layer exploration with one deployment per layer (K = H): at each
/// layer, alternate covariance estimation and optimistic coverage planning
/// until the residual direction value drops below 3 nu_min^2 / 8 (or i_max),
/// then deploy the uniform mixture over the accumulated cover for N episodes
/// and keep only that layer's transitions. Requires a point-mass initial
/// state. eps0 <= 0 selects 1/(2 d (N+1)).
ArbDeployResult run_arbitrary_derl(const LinearMdpInstance& m, int i_max, double eps0,
                                   double beta_prime, double nu_min, int N,
                                   std::uint64_t seed, int workers = 0);

enum class ReachMethod { BruteForce, SvdLowerBound };

struct ReachabilityReport {
    std::vector<double> nu;  // per layer
    double nu_min = 0.0;
    ReachMethod method = ReachMethod::BruteForce;  // method actually used
};

/// Layer-wise reachability nu_h = min_{||theta||=1} max_pi sqrt(E_pi (phi.theta)^2).
/// BruteForce enumerates deterministic policies, dedupes their layer
/// covariances and minimizes over the unit sphere (4096 directions for
/// d <= 3, 32768 for d = 4, plus local refinement; always an upper bound on
/// nu_h). For d > 4 it automatically degrades to SvdLowerBound:
/// max over deterministic policies of sqrt(sigma_min(E_pi phi phi^T)), which
/// never exceeds nu_h.
ReachabilityReport reachability_coefficient(const LinearMdpInstance& m,
                                            ReachMethod method = ReachMethod::BruteForce,
                                            long policy_cap = 10000);

}  // namespace derl
