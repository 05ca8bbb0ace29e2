#pragma once

#include <vector>

#include "derl/mdp.hpp"

namespace derl {

/// Parameters of one needle-in-a-haystack instance. Indices are 1-based to
/// match the construction's usual presentation: template layers 1..H carry
/// d+2 states each (two absorbing, one core with d arms, d-1 single-action
/// normal states); a start state s0 with d arms is prepended, so the built
/// instance has H+1 layers and feature dimension 2d+1. Exactly one normal
/// state, arm i_sharp at layer h_sharp, has its absorbing split bumped from
/// (1/2, 1/2) to (1/2 - eps, 1/2 + eps).
struct HardInstanceSpec {
    int d = 0;                // arms per core state (>= 2)
    int H = 0;                // template horizon (>= 2); built horizon is H+1
    int h_sharp = 1;          // bumped layer, in [1, H-1]
    int i_sharp = 2;          // bumped arm, in [1, d], distinct from core[h_sharp]
    std::vector<int> core;    // core arm per template layer, each in [1, d]
    double epsilon = 0.0;     // bump size, in [0, 0.5)

    void validate() const;
};

/// Built dimensions: feature dim 2d+1, horizon H+1, layer sizes {1, d+2, ...}.
LinearMdpInstance build_hard_mdp(const HardInstanceSpec& spec);

/// The family used by the experiment battery: one bump-free member first
/// (epsilon = 0), then every (h_sharp, i_sharp) with the core pinned to arm 1,
/// h_sharp ascending then i_sharp ascending: 1 + (d-1)(H-1) members.
std::vector<HardInstanceSpec> enumerate_family(int d, int H, double epsilon);

/// State indices of the built instance, for tests and tooling.
namespace hard_layout {
constexpr int kU1 = 0;  // absorbing, pays 0.5 until the final layer, then 0
constexpr int kU2 = 1;  // absorbing, pays 0.5 until the final layer, then 1
inline int state_of_arm(int arm_1based) { return 1 + arm_1based; }
}  // namespace hard_layout

/// Rebuild any layered instance as one with stationary dynamics on the
/// product state space (original state, layer): feature dimension d*H, the
/// same transition and reward matrices at every layer, values preserved
/// exactly. Policies lift via expand_policy.
LinearMdpInstance stationary_expand(const LinearMdpInstance& m);

/// Lift a policy of m to stationary_expand(m): block (b, s) uses the
/// original layer-b action.
Policy expand_policy(const LinearMdpInstance& m, const Policy& p);

}  // namespace derl
