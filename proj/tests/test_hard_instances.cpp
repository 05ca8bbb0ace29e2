#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"

#include "derl/arb_deploy.hpp"
#include "derl/dp.hpp"
#include "derl/hard_instance.hpp"
#include "derl/sampling.hpp"

using namespace derl;

namespace {

HardInstanceSpec bumped(int d, int H, double eps, int h_sharp = 1, int i_sharp = 2) {
    HardInstanceSpec s;
    s.d = d;
    s.H = H;
    s.core.assign(H, 1);
    s.h_sharp = h_sharp;
    s.i_sharp = i_sharp;
    s.epsilon = eps;
    return s;
}

struct Sweep {
    double v_max = 0.0;
    int n_max = 0;  // tables attaining the max
    double second = 0.0;
    std::vector<DeterministicPolicy> best;
    std::size_t total = 0;
};

Sweep sweep_all_policies(const LinearMdpInstance& m) {
    Sweep out;
    auto all = enumerate_deterministic_policies(m);
    out.total = all.size();
    std::vector<double> vals;
    for (const auto& p : all)
        vals.push_back(evaluate_policy_exact(m, Policy::deterministic(p), RewardSpec::native(),
                                             m.H));
    out.v_max = *std::max_element(vals.begin(), vals.end());
    out.second = -1.0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (vals[i] >= out.v_max - 1e-9) {
            ++out.n_max;
            out.best.push_back(all[i]);
        } else {
            out.second = std::max(out.second, vals[i]);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("built shape: dimensions, layers, state layout") {
    auto m = build_hard_mdp(bumped(3, 4, 0.1));
    CHECK(m.d == 7);   // 2d + 1
    CHECK(m.H == 5);   // template horizon + start layer
    CHECK(m.num_states(0) == 1);
    for (int h = 1; h < m.H; ++h) CHECK(m.num_states(h) == 5);  // u1, u2, d arm states
    CHECK(m.actions_at(0, 0) == 3);
    CHECK(m.actions_at(1, hard_layout::kU1) == 1);
    CHECK(m.actions_at(1, hard_layout::kU2) == 1);
    CHECK(m.actions_at(1, hard_layout::state_of_arm(1)) == 3);  // core arm state
    CHECK(m.actions_at(1, hard_layout::state_of_arm(2)) == 1);
    // Features are unit coordinates.
    for (int a = 0; a < 3; ++a) {
        CHECK(m.features(0, 0, a).norm() == doctest::Approx(1.0));
        CHECK(m.features(0, 0, a).maxCoeff() == doctest::Approx(1.0));
    }
}

TEST_CASE("transition structure and the single bump") {
    double eps = 0.15;
    auto m = build_hard_mdp(bumped(3, 3, eps, 2, 3));

    // Start arms route deterministically to their arm state.
    for (int j = 1; j <= 3; ++j) {
        auto p = m.transition(0, 0, j - 1);
        CHECK(p[hard_layout::state_of_arm(j)] == doctest::Approx(1.0));
    }
    // Absorbing pairs stay put.
    for (int h = 1; h < m.H - 1; ++h) {
        CHECK(m.transition(h, hard_layout::kU1, 0)[hard_layout::kU1] == doctest::Approx(1.0));
        CHECK(m.transition(h, hard_layout::kU2, 0)[hard_layout::kU2] == doctest::Approx(1.0));
    }
    // Core arms keep the walk alive.
    for (int arm = 1; arm <= 3; ++arm) {
        auto p = m.transition(1, hard_layout::state_of_arm(1), arm - 1);
        CHECK(p[hard_layout::state_of_arm(arm)] == doctest::Approx(1.0));
    }
    // Normal states flip to the absorbing pair; only (h=2, arm 3) is bumped.
    for (int h = 1; h < m.H - 1; ++h)
        for (int arm = 2; arm <= 3; ++arm) {
            auto p = m.transition(h, hard_layout::state_of_arm(arm), 0);
            double up = (h == 2 && arm == 3) ? 0.5 + eps : 0.5;
            CHECK(p[hard_layout::kU2] == doctest::Approx(up).epsilon(1e-12));
            CHECK(p[hard_layout::kU1] == doctest::Approx(1.0 - up).epsilon(1e-12));
        }

    // Rewards: 1/2 everywhere except the final-layer absorbing pair.
    CHECK(m.reward(1, hard_layout::state_of_arm(1), 0) == doctest::Approx(0.5));
    CHECK(m.reward(m.H - 1, hard_layout::kU1, 0) == doctest::Approx(0.0));
    CHECK(m.reward(m.H - 1, hard_layout::kU2, 0) == doctest::Approx(1.0));
    CHECK(m.reward(m.H - 1, hard_layout::state_of_arm(2), 0) == doctest::Approx(0.5));
}

TEST_CASE("spec validation rejects malformed parameters") {
    CHECK_THROWS_AS(build_hard_mdp(bumped(1, 3, 0.1)), config_error);
    CHECK_THROWS_AS(build_hard_mdp(bumped(2, 3, 0.5)), config_error);
    CHECK_THROWS_AS(build_hard_mdp(bumped(2, 3, 0.1, 3, 2)), config_error);  // h_sharp > H-1
    CHECK_THROWS_AS(build_hard_mdp(bumped(2, 3, 0.1, 1, 1)), config_error);  // bump on core
    auto s = bumped(2, 3, 0.1);
    s.core = {1, 1};  // wrong length
    CHECK_THROWS_AS(build_hard_mdp(s), config_error);
}

TEST_CASE("exhaustive policy sweep: one optimal policy, gap exactly epsilon") {
    const double eps = 0.1;

    for (auto [d, H] : {std::pair{2, 2}, {2, 3}, {3, 2}}) {
        // Every bumped family member behaves the same way.
        auto family = enumerate_family(d, H, eps);
        for (std::size_t f = 1; f < family.size(); ++f) {
            auto m = build_hard_mdp(family[f]);
            auto sweep = sweep_all_policies(m);
            CHECK(sweep.total == std::pow(d, H + 1));
            double base = (H + 1) / 2.0;
            CHECK(sweep.v_max == doctest::Approx(base + eps).epsilon(1e-12));
            CHECK(sweep.second == doctest::Approx(base).epsilon(1e-12));
            // All maximisers share one behavior.
            for (std::size_t i = 1; i < sweep.best.size(); ++i)
                CHECK(path_equivalent(m, sweep.best[0], sweep.best[i]));
        }
    }
}

TEST_CASE("bump-free member: every policy has the same value") {
    auto m = build_hard_mdp(enumerate_family(2, 3, 0.1).front());
    auto sweep = sweep_all_policies(m);
    CHECK(sweep.n_max == static_cast<int>(sweep.total));
    CHECK(sweep.v_max == doctest::Approx(2.0).epsilon(1e-12));  // (H+1)/2
}

TEST_CASE("the optimal policy reaches the bumped arm state") {
    auto spec = bumped(3, 3, 0.2, 2, 3);
    auto m = build_hard_mdp(spec);
    auto opt = optimal_value_exact(m, RewardSpec::native(), m.H);
    CHECK(opt.value == doctest::Approx(2.2).epsilon(1e-12));
    const auto& acts = opt.policy.members[0].actions;
    CHECK(acts[0][0] == 0);                                  // core arm 1 from the start
    CHECK(acts[1][hard_layout::state_of_arm(1)] == 2);       // deviate to arm 3 at h_sharp
    auto occ = state_occupancy(m, PolicyTable::from_deterministic(m, opt.policy.members[0]));
    CHECK(occ[2][hard_layout::state_of_arm(3)] == doctest::Approx(1.0));
}

TEST_CASE("family enumeration covers every bump position once") {
    auto fam = enumerate_family(3, 4, 0.1);
    CHECK(fam.size() == 1 + 2 * 3);
    CHECK(fam[0].epsilon == 0.0);
    std::set<std::pair<int, int>> seen;
    for (std::size_t i = 1; i < fam.size(); ++i) {
        CHECK(fam[i].epsilon == 0.1);
        CHECK(fam[i].i_sharp != 1);
        seen.insert({fam[i].h_sharp, fam[i].i_sharp});
    }
    CHECK(seen.size() == fam.size() - 1);
}

TEST_CASE("sampled optimal return matches the closed-form value") {
    auto m = build_hard_mdp(bumped(2, 2, 0.1));
    auto opt = optimal_value_exact(m, RewardSpec::native(), m.H);
    const int N = 40000;
    auto batch = sample_batch(m, opt.policy, N, 5, 0, 1);
    double mean = 0.0;
    for (const auto& tr : batch)
        for (const auto& st : tr.steps) mean += st.r;
    mean /= N;
    double band = m.H * std::sqrt(std::log(2.0 / 1e-6) / (2.0 * N));
    CHECK(std::abs(mean - 1.6) <= band);
}

TEST_CASE("reachability of hard instances is zero") {
    auto m = build_hard_mdp(bumped(2, 2, 0.1));
    auto rep = reachability_coefficient(m, ReachMethod::SvdLowerBound);
    CHECK(rep.nu_min <= 1e-9);
    auto bf = reachability_coefficient(m, ReachMethod::BruteForce);
    CHECK(bf.nu_min <= 1e-6);
}

TEST_CASE("stationary expansion preserves values exactly") {
    auto m = build_hard_mdp(bumped(2, 2, 0.1));
    auto big = stationary_expand(m);
    CHECK(big.d == m.d * m.H);
    CHECK(big.H == m.H);
    // Identical transition and reward matrices at every layer.
    for (int h = 1; h + 1 < big.H; ++h) {
        REQUIRE(big.num_states(h) == big.num_states(1));
        for (int s = 0; s < big.num_states(h); ++s)
            for (int a = 0; a < big.actions_at(h, s); ++a) {
                CHECK(big.reward(h, s, a) == doctest::Approx(big.reward(1, s, a)).epsilon(1e-12));
                auto p = big.transition(h, s, a);
                auto q = big.transition(1, s, a);
                for (std::size_t i = 0; i < p.size(); ++i)
                    CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
            }
    }

    CHECK(optimal_value_exact(big, RewardSpec::native(), big.H).value ==
          doctest::Approx(1.6).epsilon(1e-12));

    auto opt = optimal_value_exact(m, RewardSpec::native(), m.H);
    auto lifted = expand_policy(m, opt.policy);
    CHECK(evaluate_policy_exact(big, lifted, RewardSpec::native(), big.H) ==
          doctest::Approx(1.6).epsilon(1e-12));

    // A suboptimal policy keeps its value too.
    DeterministicPolicy dev = opt.policy.members[0];
    dev.actions[0][0] = 1 - dev.actions[0][0];
    CHECK(evaluate_policy_exact(big, expand_policy(m, Policy::deterministic(dev)),
                                RewardSpec::native(), big.H) ==
          doctest::Approx(evaluate_policy_exact(m, Policy::deterministic(dev),
                                                RewardSpec::native(), m.H))
              .epsilon(1e-12));
}
