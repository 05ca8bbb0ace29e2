#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "doctest.h"

#include "derl/lemma_lab.hpp"
#include "derl/rng.hpp"

using namespace derl;

namespace {

Eigen::VectorXd unit(int d, int i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    v[i] = 1.0;
    return v;
}

BatchSequence repeat_batches(int d, const std::vector<std::pair<int, int>>& spec, int n) {
    // spec: (coordinate, batch count) pairs; each batch is n copies.
    BatchSequence seq;
    for (auto [coord, count] : spec)
        for (int b = 0; b < count; ++b)
            seq.batches.push_back(std::vector<Eigen::VectorXd>(n, unit(d, coord)));
    return seq;
}

}  // namespace

TEST_CASE("trace-determinant bridge on the rank-one example") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd Phi = unit(2, 0) * unit(2, 0).transpose();
    auto chk = trace_det_bridge_check(A, Phi);
    CHECK(chk.lhs == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(chk.rhs == doctest::Approx(1.3862943611198906).epsilon(1e-12));  // 2 ln 2
    CHECK(chk.holds);

    // Zero Phi: both sides vanish, still holds.
    auto z = trace_det_bridge_check(A, Eigen::MatrixXd::Zero(2, 2));
    CHECK(z.lhs == doctest::Approx(0.0));
    CHECK(z.holds);

    CHECK_THROWS_AS(trace_det_bridge_check(0.5 * A, Phi), config_error);
    Eigen::MatrixXd indef = Eigen::MatrixXd::Identity(2, 2);
    indef(1, 1) = -0.2;
    CHECK_THROWS_AS(trace_det_bridge_check(A, indef), config_error);
}

TEST_CASE("bridge tightens but survives under large accumulations") {
    // A grows as batches land; the inequality must hold at every prefix.
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
    Rng rng(2);
    for (int step = 0; step < 40; ++step) {
        Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero(3, 3);
        for (int i = 0; i < 5; ++i) {
            Eigen::VectorXd v(3);
            for (int j = 0; j < 3; ++j) v[j] = rng.uniform() - 0.5;
            v /= std::max(1.0, v.norm());
            Phi += v * v.transpose();
        }
        auto chk = trace_det_bridge_check(A, Phi);
        CHECK(chk.holds);
        A += Phi;
    }
}

TEST_CASE("matrix perturbation bounds on the worked example") {
    // A = 2I, Delta = 0.1 * ones, phi = e1 (d = 2, eps = 0.1).
    Eigen::MatrixXd A = 2.0 * Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd Delta = Eigen::MatrixXd::Constant(2, 2, 0.1);
    auto chk = matrix_perturbation_check(A, Delta, unit(2, 0));
    CHECK(chk.a_plus_pd);
    CHECK(chk.quad_gap == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(chk.quad_bound == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(chk.inv_quad_gap == doctest::Approx(0.022727272727272763).epsilon(1e-9));
    CHECK(chk.inv_quad_bound == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(chk.norm_gap == doctest::Approx(0.016257501478790126).epsilon(1e-9));
    CHECK(chk.norm_bound == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(chk.holds);

    CHECK_THROWS_AS(
        matrix_perturbation_check(A, Eigen::MatrixXd::Constant(2, 2, 0.6), unit(2, 0)),
        config_error);  // entrywise error >= 1/d
    CHECK_THROWS_AS(matrix_perturbation_check(0.9 * Eigen::MatrixXd::Identity(2, 2), Delta,
                                              unit(2, 0)),
                    config_error);  // A below the identity
}

TEST_CASE("violation set flags exactly the oversized batches") {
    const int n = 10;
    const double eps = 0.5;

    // One direction, repeated: only the first batch is large.
    auto seq1 = repeat_batches(2, {{0, 3}}, n);
    CHECK(violation_set(seq1, eps) == std::set<int>{1});

    // A fresh direction violates again when it first appears.
    auto seq2 = repeat_batches(2, {{0, 2}, {1, 1}}, n);
    CHECK(violation_set(seq2, eps) == std::set<int>{1, 3});

    CHECK_THROWS_AS(violation_set(seq1, 0.0), config_error);
    CHECK_THROWS_AS(violation_set(seq1, 1.0), config_error);

    BatchSequence ragged = seq1;
    ragged.batches[1].pop_back();
    CHECK_THROWS_AS(violation_set(ragged, eps), config_error);
}

TEST_CASE("weighted and expanded sequences agree") {
    const int n = 12;
    auto plain = repeat_batches(3, {{0, 2}, {2, 1}, {0, 1}}, n);
    std::vector<WeightedBatch> packed;
    for (const auto& batch : plain.batches) {
        WeightedBatch wb;
        wb.atoms.push_back({batch.front(), static_cast<long>(batch.size())});
        packed.push_back(wb);
    }
    for (double eps : {0.3, 0.6, 0.9})
        CHECK(violation_set(plain, eps) == violation_set_weighted(packed, eps));

    // Split atoms, same multiset.
    std::vector<WeightedBatch> split = packed;
    split[0].atoms.clear();
    split[0].atoms.push_back({unit(3, 0), 5});
    split[0].atoms.push_back({unit(3, 0), 7});
    CHECK(violation_set_weighted(split, 0.5) == violation_set_weighted(packed, 0.5));
}

TEST_CASE("batched potential: the budget bound holds at the certified size") {
    BatchedPotentialParams p;  // c_K = 2, d = 2, H = 2, eps = 0.5
    long n = batched_potential_min_n(p);
    CHECK(n == 18481);  // independent linear scan over the two conditions

    // It is a minimum: the conditions hold at n and fail just below.
    auto ok = [&](long nn) {
        double K = p.c_K * p.d * p.H + 1;
        double load = p.d * std::log(1.0 + K * nn / p.d);
        return nn * p.eps >= load &&
               p.c_K * std::log(nn * p.eps / load) >= std::log(2.0 * K * nn / p.d);
    };
    CHECK(ok(n));
    CHECK_FALSE(ok(n - 1));

    // Worst single-direction dump at that size stays within the budget.
    auto seq = repeat_batches(p.d, {{0, p.c_K * p.d * p.H + 1}}, static_cast<int>(n));
    CHECK(static_cast<int>(violation_set(seq, p.eps).size()) <= p.c_K * p.d);
}

TEST_CASE("fuzzers come back clean at unit scale") {
    auto bridge = fuzz_trace_det_bridge(2000, 101);
    CHECK(bridge.trials == 2000);
    CHECK(bridge.clean());
    CHECK(bridge.max_ratio <= 1.0);
    CHECK(bridge.max_ratio > 0.5);  // the bound is near tight somewhere

    auto perturb = fuzz_matrix_perturbation(2000, 103);
    CHECK(perturb.clean());
    CHECK(perturb.max_ratio <= 1.0);

    auto ell = fuzz_elliptical_potential(500, 107);
    CHECK(ell.clean());

    BatchedPotentialParams p;
    auto batched = fuzz_batched_potential(50, 109, p);
    CHECK(batched.clean());
}

TEST_CASE("fuzz reports are seed-stable") {
    auto a = fuzz_trace_det_bridge(500, 5);
    auto b = fuzz_trace_det_bridge(500, 5);
    CHECK(a.max_ratio == b.max_ratio);
    auto c = fuzz_trace_det_bridge(500, 6);
    CHECK(a.max_ratio != c.max_ratio);
}
