#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "derl/common.hpp"

namespace derl {

/// One episode step. Layers are 0-based throughout the library; `s_next` is
/// -1 on the final layer, where no successor state exists.
struct TrajectoryStep {
    int h;
    int s;
    int a;
    double r;
    int s_next;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
};

/// One logged transition sample, grouped per layer in a LayeredDataset.
struct LayerSample {
    int s;
    int a;
    int s_next;  // -1 on the final layer
    double r;
};
using LayerDataset = std::vector<LayerSample>;
using LayeredDataset = std::vector<LayerDataset>;  // indexed by layer

/// Markov deterministic policy: actions[h][s] is the chosen action index.
/// Tables always cover every (layer, state) of their instance.
struct DeterministicPolicy {
    std::vector<std::vector<int>> actions;

    bool operator==(const DeterministicPolicy& o) const { return actions == o.actions; }
};

/// Either a single deterministic policy or a uniform mixture of them.
/// A mixture member is drawn once per episode, not per step.
struct Policy {
    std::vector<DeterministicPolicy> members;

    bool is_deterministic() const { return members.size() == 1; }

    static Policy deterministic(DeterministicPolicy p) {
        Policy out;
        out.members.push_back(std::move(p));
        return out;
    }
    static Policy mixture(std::vector<DeterministicPolicy> ms) {
        if (ms.empty()) throw config_error("Policy: mixture must be non-empty");
        Policy out;
        out.members = std::move(ms);
        return out;
    }
};

/// Finite layered MDP with linear structure: transitions P_h(s'|s,a) = <mu_h(s'), phi(s,a)>
/// and rewards r_h(s,a) = <phi(s,a), theta_h>. States live in per-layer sets;
/// the action set may vary per state (phi is ragged in the action index).
///
/// Fill the public fields, then call finalize(), which validates
///   ||phi|| <= 1, ||theta_h|| <= sqrt(d), ||mu_h||_F <= sqrt(d),
///   every transition row is a probability distribution (1e-9 tolerance),
///   every reward lies in [0,1] (1e-9 tolerance),
/// and precomputes reward/transition tables used by sampling and DP.
class LinearMdpInstance {
  public:
    int d = 0;                          // feature dimension
    int H = 0;                          // number of layers
    int num_actions = 0;                // global action-set size (max per state)
    std::vector<int> states_per_layer;  // size H
    // phi[h][s][a], each an Eigen vector of length d
    std::vector<std::vector<std::vector<Eigen::VectorXd>>> phi;
    std::vector<Eigen::MatrixXd> mu;     // size H-1; mu[h] is S_{h+1} x d
    std::vector<Eigen::VectorXd> theta;  // size H
    std::vector<double> init;            // distribution over layer-0 states

    void finalize();
    bool finalized() const { return finalized_; }

    int num_states(int h) const { return states_per_layer[h]; }
    int actions_at(int h, int s) const { return static_cast<int>(phi[h][s].size()); }
    const Eigen::VectorXd& features(int h, int s, int a) const { return phi[h][s][a]; }
    double reward(int h, int s, int a) const { return cache_[h][s][a].r; }
    const std::vector<double>& transition(int h, int s, int a) const {
        return cache_[h][s][a].p;
    }
    const std::vector<double>& transition_cdf(int h, int s, int a) const {
        return cache_[h][s][a].cdf;
    }
    long pair_count(int h) const;

    /// Index of the initial state when init is a point mass, else -1.
    int init_state() const;

  private:
    struct PairCache {
        double r = 0.0;
        std::vector<double> p;    // distribution over next-layer states
        std::vector<double> cdf;  // inclusive prefix sums of p
    };
    std::vector<std::vector<std::vector<PairCache>>> cache_;
    bool finalized_ = false;
};

/// Reward used by evaluation, planning and the deployment loops: either the
/// instance's own theta sequence or a per-layer override. Override rewards
/// must stay in [0,1] and respect the theta norm bound, checked by
/// validate_for().
struct RewardSpec {
    std::vector<Eigen::VectorXd> theta_override;  // empty => native

    bool is_native() const { return theta_override.empty(); }

    double operator()(const LinearMdpInstance& m, int h, int s, int a) const {
        if (is_native()) return m.reward(h, s, a);
        return m.features(h, s, a).dot(theta_override[h]);
    }

    void validate_for(const LinearMdpInstance& m) const;

    static RewardSpec native() { return RewardSpec{}; }
    static RewardSpec from_theta(std::vector<Eigen::VectorXd> t) {
        RewardSpec r;
        r.theta_override = std::move(t);
        return r;
    }
};

/// Least-squares fit of per-layer theta vectors reproducing a tabular reward
/// r[h][s][a] exactly (residual <= 1e-9 required); throws config_error if the
/// table is not linearly representable or leaves [0,1].
RewardSpec reward_from_table(const LinearMdpInstance& m,
                             const std::vector<std::vector<std::vector<double>>>& table);

/// Per-(layer,state) action distributions; the common lowering used by the
/// exact-DP routines. probs[h][s][a].
struct PolicyTable {
    std::vector<std::vector<std::vector<double>>> probs;

    static PolicyTable from_deterministic(const LinearMdpInstance& m,
                                          const DeterministicPolicy& p);
    static PolicyTable uniform(const LinearMdpInstance& m);
    /// Deterministic actions for layers < prefix_len, per-step uniform after.
    static PolicyTable prefix_with_uniform_tail(const LinearMdpInstance& m,
                                                const DeterministicPolicy& p, int prefix_len);
};

/// Verifies a policy covers every (layer, state) of m with in-range actions.
void validate_policy(const LinearMdpInstance& m, const Policy& p);

}  // namespace derl
