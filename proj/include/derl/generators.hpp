#pragma once

#include <cstdint>

#include "derl/mdp.hpp"

namespace derl {

/// One layer, one state, d arms with phi = e_a and zero reward. The expected
/// feature covariance of a policy is diagonal, which makes closed-form
/// reachability values available for tests.
LinearMdpInstance make_bandit(int d);

/// H layers, one state and one action per layer, d = 1, constant reward r.
LinearMdpInstance make_single_chain(int H, double r = 0.0);

/// Random "anchor" linear MDP: phi(s,a) lies in the d-simplex and mu's
/// columns are d anchor distributions over next states, so every mixture
/// P = mu phi is automatically a valid distribution. theta entries are
/// uniform in [0,1]. Features are genuinely low-dimensional (not one-hot).
LinearMdpInstance make_anchor_random(int d, int H, int states, int actions,
                                     std::uint64_t seed);

/// Random tabular MDP in one-hot linear form: d = states * actions per layer,
/// phi(s,a) = e_{(s,a)}, transition rows Dirichlet, rewards uniform in [0,1].
LinearMdpInstance make_tabular_random(int H, int states, int actions, std::uint64_t seed);

}  // namespace derl
