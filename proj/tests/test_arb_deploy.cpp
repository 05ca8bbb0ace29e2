#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "doctest.h"

#include "derl/arb_deploy.hpp"
#include "derl/dp.hpp"
#include "derl/generators.hpp"
#include "derl/hard_instance.hpp"
#include "derl/rng.hpp"
#include "derl/sampling.hpp"

using namespace derl;

namespace {

struct Logged {
    LayeredDataset data;
    std::vector<CovarianceAccumulator> accs;
};

Logged log_uniform(const LinearMdpInstance& m, int n, std::uint64_t seed) {
    Logged out;
    out.data.resize(m.H);
    for (int h = 0; h < m.H; ++h) out.accs.emplace_back(m.d);
    ActionChooser uni = [&m](int h, int s, Rng& rng) { return rng.uniform_int(m.actions_at(h, s)); };
    auto batch = sample_batch_with(m, uni, n, seed, 0, 1);
    for (const auto& tr : batch)
        for (const auto& st : tr.steps) {
            out.data[st.h].push_back({st.s, st.a, st.s_next, st.r});
            out.accs[st.h].absorb(m.features(st.h, st.s, st.a));
        }
    return out;
}

DeterministicPolicy random_policy(const LinearMdpInstance& m, Rng& rng) {
    DeterministicPolicy p;
    p.actions.resize(m.H);
    for (int h = 0; h < m.H; ++h) {
        p.actions[h].resize(m.num_states(h));
        for (int s = 0; s < m.num_states(h); ++s)
            p.actions[h][s] = rng.uniform_int(m.actions_at(h, s));
    }
    return p;
}

}  // namespace

TEST_CASE("discretization ceils onto the grid and respects grid points") {
    Eigen::VectorXd v(3);
    v << 0.3, -0.3, 0.5;
    auto g = discretize_vector(v, 0.25);
    CHECK(g[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(g[2] == doctest::Approx(0.5).epsilon(1e-12));  // already on the grid

    Eigen::MatrixXd mm(2, 2);
    mm << 0.1, 0.0, -0.01, 1.0;
    auto gm = discretize_matrix(mm, 0.5);
    CHECK(gm(0, 0) == doctest::Approx(0.5));
    CHECK(gm(0, 1) == doctest::Approx(0.0));
    CHECK(gm(1, 0) == doctest::Approx(0.0));
    CHECK(gm(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("optimistic coverage value has a closed form at the bottom layer") {
    auto m = make_single_chain(2, 0.0);
    LayeredDataset data(m.H);
    std::vector<CovarianceAccumulator> accs;
    for (int h = 0; h < m.H; ++h) accs.emplace_back(m.d);

    // top = 0: V_1 = sqrt(phi' (2I + sigma_R)^-1 phi) directly, no backup.
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
    auto a = solve_opt_q(m, 0, data, accs, 0.1, zero, 0.25);
    CHECK(a.v1 == doctest::Approx(0.70710678118654746).epsilon(1e-12));

    Eigen::MatrixXd three = Eigen::MatrixXd::Constant(1, 1, 3.0);
    auto b = solve_opt_q(m, 0, data, accs, 0.1, three, 0.25);
    CHECK(b.v1 == doctest::Approx(0.44721359549995793).epsilon(1e-12));

    CHECK(a.policy.actions[0][0] == 0);
    CHECK(a.qbar.top_layer == 0);
}

TEST_CASE("coverage planning rejects bad preconditions") {
    auto m = make_single_chain(2, 0.0);
    LayeredDataset data(m.H);
    std::vector<CovarianceAccumulator> accs;
    for (int h = 0; h < m.H; ++h) accs.emplace_back(m.d);

    Eigen::MatrixXd low = Eigen::MatrixXd::Constant(1, 1, -0.6);  // below -1/2
    CHECK_THROWS_AS(solve_opt_q(m, 0, data, accs, 0.1, low, 0.25), numeric_error);

    Eigen::MatrixXd ok = Eigen::MatrixXd::Constant(1, 1, -0.4);
    CHECK_NOTHROW(solve_opt_q(m, 0, data, accs, 0.1, ok, 0.25));

    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
    CHECK_THROWS_AS(solve_opt_q(m, 0, data, accs, 0.1, zero, 0.75), config_error);
    CHECK_THROWS_AS(solve_opt_q(m, 0, data, accs, 0.1, zero, 0.0), config_error);
}

TEST_CASE("discretized and undiscretized chains stay close") {
    auto m = make_anchor_random(2, 2, 3, 2, 3);
    auto logged = log_uniform(m, 4000, 8);
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(2, 2);
    double eps0 = 1.0 / (2.0 * m.d * (4000 + 1));
    auto res = solve_opt_q(m, 1, logged.data, logged.accs, 0.1, sigma, eps0);
    // The discretized greedy policy's top-layer coverage under the same
    // matrix is within the discretization slack of the optimistic value.
    auto cov = expected_covariance(m, Policy::deterministic(res.policy), 1);
    Eigen::MatrixXd core = (2.0 * Eigen::MatrixXd::Identity(2, 2) + sigma).inverse();
    double reached = std::sqrt((core * cov).trace());
    CHECK(res.v1 >= reached - 0.1);
    CHECK(res.v1 <= 1.0 + 1e-9);
}

TEST_CASE("covariance estimation is exact at the bottom layer") {
    auto m = make_bandit(3);
    LayeredDataset data(1);
    std::vector<CovarianceAccumulator> accs;
    accs.emplace_back(m.d);
    for (int arm = 0; arm < 3; ++arm) {
        DeterministicPolicy pi;
        pi.actions = {{arm}};
        auto est = estimate_cov_matrix(m, 0, data, accs, pi);
        Eigen::MatrixXd want = Eigen::MatrixXd::Zero(3, 3);
        want(arm, arm) = 1.0;
        CHECK((est - want).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("covariance estimation tracks the occupancy oracle given data") {
    auto m = make_anchor_random(3, 3, 3, 2, 29);
    auto logged = log_uniform(m, 10000, 17);
    Rng rng(71);
    for (int trial = 0; trial < 5; ++trial) {
        auto pi = random_policy(m, rng);
        for (int top = 0; top < m.H; ++top) {
            auto est = estimate_cov_matrix(m, top, logged.data, logged.accs, pi);
            auto want = expected_covariance(m, Policy::deterministic(pi), top);
            CHECK((est - want).cwiseAbs().maxCoeff() < 0.05);
        }
    }
}

TEST_CASE("covariance estimation needs data below the target layer") {
    auto m = make_anchor_random(2, 3, 3, 2, 5);
    LayeredDataset data(m.H);  // all empty
    std::vector<CovarianceAccumulator> accs;
    for (int h = 0; h < m.H; ++h) accs.emplace_back(m.d);
    DeterministicPolicy pi;
    pi.actions.assign(m.H, std::vector<int>(3, 0));
    CHECK_THROWS_AS(estimate_cov_matrix(m, 2, data, accs, pi), config_error);
}

TEST_CASE("deployment count is always the horizon") {
    for (auto seed : {1ULL, 2ULL, 3ULL}) {
        auto anchor = make_anchor_random(2, 2, 3, 2, 13);
        auto res = run_arbitrary_derl(anchor, 3, 0.0, 0.1, 0.3, 400, seed, 1);
        CHECK(res.deployments == anchor.H);
        CHECK(res.covers.size() == static_cast<std::size_t>(anchor.H));
    }
    auto chain = make_single_chain(3, 0.1);
    auto res = run_arbitrary_derl(chain, 4, 0.0, 0.1, 1.0, 500, 9, 1);
    CHECK(res.deployments == 3);

    auto hard = build_hard_mdp(enumerate_family(2, 2, 0.1)[1]);
    auto hres = run_arbitrary_derl(hard, 3, 0.0, 0.1, 0.3, 1500, 4, 1);
    CHECK(hres.deployments == hard.H);
}

TEST_CASE("per-layer datasets hold exactly one deployment of samples") {
    auto m = make_anchor_random(2, 3, 3, 2, 37);
    const int N = 600;
    auto res = run_arbitrary_derl(m, 3, 0.0, 0.1, 0.3, N, 5, 1);
    REQUIRE(res.data.size() == static_cast<std::size_t>(m.H));
    for (int h = 0; h < m.H; ++h) {
        CHECK(res.data[h].size() == static_cast<std::size_t>(N));
        for (const auto& s : res.data[h]) {
            CHECK(s.s >= 0);
            CHECK(s.s < m.num_states(h));
        }
    }
}

TEST_CASE("cover bookkeeping: sigma accumulates its increments, members dedupe") {
    auto m = make_anchor_random(2, 2, 3, 2, 23);
    auto res = run_arbitrary_derl(m, 4, 0.0, 0.1, 0.2, 800, 3, 1);
    for (const auto& cover : res.covers) {
        Eigen::MatrixXd acc = 2.0 * Eigen::MatrixXd::Identity(m.d, m.d);
        for (const auto& inc : cover.increments) acc += inc;
        CHECK((acc - cover.sigma_tilde).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(cover.iterations == static_cast<int>(cover.increments.size()));

        std::set<std::vector<std::vector<int>>> distinct;
        for (const auto& mem : cover.members) distinct.insert(mem.policy.actions);
        CHECK(distinct.size() == cover.members.size());
        CHECK(cover.members.size() <= static_cast<std::size_t>(4));
        if (!cover.singleton_fallback) CHECK(cover.members.size() >= 1);
        for (const auto& mem : cover.members)
            CHECK_NOTHROW(validate_policy(m, Policy::deterministic(mem.policy)));
    }
}

TEST_CASE("single-action chain: one cover member, coverage decays as predicted") {
    // With exact estimates the coverage value recorded after increment i is
    // (2 + i)^(-1/2), i starting at 1; it first crosses 3 nu^2 / 8 = 3/8 at
    // i = 6 (value 1/sqrt(8)).
    auto m = make_single_chain(2, 0.0);
    auto res = run_arbitrary_derl(m, 10, 0.0, 0.1, 1.0, 2000, 1, 1);
    for (const auto& cover : res.covers) {
        CHECK(cover.members.size() == 1);
        CHECK(cover.broke);
        CHECK(cover.iterations == 6);
        for (std::size_t i = 0; i < cover.opt_values.size(); ++i) {
            double want = 1.0 / std::sqrt(3.0 + static_cast<double>(i));
            CHECK(cover.opt_values[i] == doctest::Approx(want).epsilon(0.05));
        }
        if (!cover.opt_values.empty())
            CHECK(cover.opt_values.back() <= 3.0 / 8.0 + 0.05);
    }
}

TEST_CASE("arbitrary-policy runs are seed-reproducible") {
    auto m = make_anchor_random(2, 2, 3, 2, 43);
    auto a = run_arbitrary_derl(m, 3, 0.0, 0.1, 0.3, 500, 6, 1);
    auto b = run_arbitrary_derl(m, 3, 0.0, 0.1, 0.3, 500, 6, 1);
    REQUIRE(a.covers.size() == b.covers.size());
    for (std::size_t h = 0; h < a.covers.size(); ++h) {
        CHECK((a.covers[h].sigma_tilde - b.covers[h].sigma_tilde).norm() == 0.0);
        CHECK(a.covers[h].members.size() == b.covers[h].members.size());
    }
    for (std::size_t h = 0; h < a.data.size(); ++h) {
        REQUIRE(a.data[h].size() == b.data[h].size());
        for (std::size_t i = 0; i < a.data[h].size(); ++i) {
            CHECK(a.data[h][i].s == b.data[h][i].s);
            CHECK(a.data[h][i].a == b.data[h][i].a);
            CHECK(a.data[h][i].s_next == b.data[h][i].s_next);
        }
    }
}

TEST_CASE("exploration data covers enough to plan near-optimally") {
    auto m = make_anchor_random(2, 3, 3, 2, 59);
    auto res = run_arbitrary_derl(m, 4, 0.0, 0.1, 0.2, 4000, 2, 1);

    // Merge all layers into one dataset usable by the planner.
    std::vector<CovarianceAccumulator> accs;
    for (int h = 0; h < m.H; ++h) {
        accs.emplace_back(m.d);
        for (const auto& s : res.data[h]) accs.back().absorb(m.features(h, s.s, s.a));
    }
    (void)accs;

    // The per-layer mixtures must reach every state the optimum needs.
    auto opt = optimal_value_exact(m, RewardSpec::native(), m.H);
    auto occ = state_occupancy(m, PolicyTable::from_deterministic(m, opt.policy.members[0]));
    for (int h = 0; h < m.H; ++h) {
        std::set<int> seen;
        for (const auto& s : res.data[h]) seen.insert(s.s);
        for (int s = 0; s < m.num_states(h); ++s)
            if (occ[h][s] > 0.05) CHECK(seen.count(s) == 1);
    }
}

TEST_CASE("reachability: bandit closed form and method dominance") {
    for (int d : {2, 3}) {
        auto bandit = make_bandit(d);
        auto bf = reachability_coefficient(bandit, ReachMethod::BruteForce);
        CHECK(bf.nu_min == doctest::Approx(1.0 / std::sqrt(d)).epsilon(0.02));
        CHECK(bf.nu.size() == 1);
    }

    auto chain = make_single_chain(3, 0.0);
    auto rep = reachability_coefficient(chain, ReachMethod::BruteForce);
    CHECK(rep.nu_min == doctest::Approx(1.0).epsilon(1e-9));

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto m = make_anchor_random(2, 2, 3, 2, seed);
        auto bf = reachability_coefficient(m, ReachMethod::BruteForce);
        auto svd = reachability_coefficient(m, ReachMethod::SvdLowerBound);
        CHECK(bf.nu_min >= svd.nu_min - 1e-9);
    }
}

TEST_CASE("arbitrary-policy runs need a point-mass start") {
    auto m = make_anchor_random(2, 2, 3, 2, 61);
    LinearMdpInstance spread = m;
    spread.init.assign(m.num_states(0), 1.0 / m.num_states(0));
    spread.finalize();
    CHECK_THROWS_AS(run_arbitrary_derl(spread, 3, 0.0, 0.1, 0.3, 200, 1, 1), config_error);
}
