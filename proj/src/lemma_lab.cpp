#include "derl/lemma_lab.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "derl/common.hpp"
#include "derl/rng.hpp"

namespace derl {
namespace {

double logdet_spd(const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw numeric_error("logdet: matrix not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Eigen::VectorXd random_unit(int d, Rng& rng) {
    Eigen::VectorXd v(d);
    double n2 = 0.0;
    do {
        for (int i = 0; i < d; ++i) v[i] = rng.normal();
        n2 = v.squaredNorm();
    } while (n2 < 1e-12);
    return v / std::sqrt(n2);
}

// Random PSD matrix with trace exactly `trace`.
Eigen::MatrixXd random_psd(int d, double trace, Rng& rng) {
    Eigen::MatrixXd b(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) b(i, j) = rng.normal();
    Eigen::MatrixXd x = b * b.transpose();
    double tr = x.trace();
    if (tr < 1e-12) return Eigen::MatrixXd::Identity(d, d) * (trace / d);
    return x * (trace / tr);
}

void require_equal_sizes(const std::vector<long>& sizes) {
    if (sizes.empty()) throw config_error("violation_set: empty batch sequence");
    for (long n : sizes) {
        if (n <= 0) throw config_error("violation_set: empty batch");
        if (n != sizes.front()) throw config_error("violation_set: batches must share one size");
    }
}

}  // namespace

std::set<int> violation_set(const BatchSequence& seq, double eps) {
    std::vector<WeightedBatch> w;
    w.reserve(seq.batches.size());
    for (const auto& batch : seq.batches) {
        WeightedBatch wb;
        for (const auto& v : batch) wb.atoms.emplace_back(v, 1);
        w.push_back(std::move(wb));
    }
    return violation_set_weighted(w, eps);
}

std::set<int> violation_set_weighted(const std::vector<WeightedBatch>& seq, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw config_error("violation_set: eps must lie in (0, 1)");
    std::vector<long> sizes;
    for (const auto& b : seq) sizes.push_back(b.size());
    require_equal_sizes(sizes);
    const int d = static_cast<int>(seq.front().atoms.front().first.size());
    const long n = sizes.front();

    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d);
    std::set<int> out;
    int k = 0;
    for (const auto& batch : seq) {
        ++k;
        Eigen::MatrixXd inv = a.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
        double tr = 0.0;
        for (const auto& [v, c] : batch.atoms) {
            if (v.size() != d) throw config_error("violation_set: inconsistent dimension");
            if (v.squaredNorm() > 1.0 + 1e-9) throw config_error("violation_set: feature norm exceeds 1");
            tr += static_cast<double>(c) * v.dot(inv * v);
        }
        if (tr >= static_cast<double>(n) * eps) out.insert(k);
        for (const auto& [v, c] : batch.atoms) a.noalias() += static_cast<double>(c) * v * v.transpose();
    }
    return out;
}

BridgeCheck trace_det_bridge_check(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Phi) {
    if (A.rows() != A.cols() || Phi.rows() != Phi.cols() || A.rows() != Phi.rows())
        throw config_error("bridge check: dimension mismatch");
    if (min_eigenvalue(0.5 * (A + A.transpose())) < 1.0 - 1e-9)
        throw config_error("bridge check: A must dominate the identity");
    if (min_eigenvalue(0.5 * (Phi + Phi.transpose())) < -1e-9)
        throw config_error("bridge check: Phi must be positive semi-definite");

    BridgeCheck out;
    Eigen::MatrixXd inv = A.ldlt().solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
    out.lhs = (inv * Phi).trace();
    double log_ratio = logdet_spd(A + Phi) - logdet_spd(A);
    double ratio = std::exp(log_ratio);
    out.rhs = ratio * log_ratio;
    out.holds = out.lhs <= out.rhs + 1e-9 * (1.0 + std::abs(out.rhs));
    return out;
}

PerturbationCheck matrix_perturbation_check(const Eigen::MatrixXd& A,
                                            const Eigen::MatrixXd& Delta,
                                            const Eigen::VectorXd& phi) {
    const int d = static_cast<int>(A.rows());
    if (A.cols() != d || Delta.rows() != d || Delta.cols() != d || phi.size() != d)
        throw config_error("perturbation check: dimension mismatch");
    if (min_eigenvalue(0.5 * (A + A.transpose())) < 1.0 - 1e-9)
        throw config_error("perturbation check: A must dominate the identity");
    double eps = Delta.cwiseAbs().maxCoeff();
    if (eps * d >= 1.0) throw config_error("perturbation check: entrywise error must stay below 1/d");
    if (phi.norm() > 1.0 + 1e-9) throw config_error("perturbation check: feature norm exceeds 1");

    PerturbationCheck out;
    Eigen::MatrixXd a_plus = A + Delta;
    out.a_plus_pd = min_eigenvalue(0.5 * (a_plus + a_plus.transpose())) > 0.0;

    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd inv = A.ldlt().solve(id);
    Eigen::MatrixXd inv_plus = a_plus.ldlt().solve(id);

    out.quad_gap = std::abs(phi.dot(Delta * phi));
    out.quad_bound = d * eps;
    out.inv_quad_gap = std::abs(phi.dot((inv_plus - inv) * phi));
    out.inv_quad_bound = d * eps / (1.0 - d * eps);
    double norm_plus = std::sqrt(std::max(0.0, phi.dot(inv_plus * phi)));
    double norm_base = std::sqrt(std::max(0.0, phi.dot(inv * phi)));
    out.norm_gap = std::abs(norm_plus - norm_base);
    out.norm_bound = std::sqrt(out.inv_quad_bound);

    double tol = 1e-9;
    out.holds = out.a_plus_pd && out.quad_gap <= out.quad_bound + tol &&
                out.inv_quad_gap <= out.inv_quad_bound + tol &&
                out.norm_gap <= out.norm_bound + tol;
    return out;
}

FuzzReport fuzz_trace_det_bridge(long trials, std::uint64_t seed) {
    FuzzReport rep;
    for (long t = 0; t < trials; ++t) {
        Rng rng = Rng::substream(seed, 0x6b72, static_cast<std::uint64_t>(t));
        const int dims[] = {2, 4, 8};
        int d = dims[rng.uniform_int(3)];

        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d);
        int warm = static_cast<int>(rng.uniform_int(51));
        for (int i = 0; i < warm; ++i) {
            Eigen::VectorXd v = random_unit(d, rng) * rng.uniform();
            a.noalias() += v * v.transpose();
        }
        int batch = 1 + static_cast<int>(rng.uniform_int(30));
        Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < batch; ++i) {
            Eigen::VectorXd v = random_unit(d, rng);
            if (rng.uniform() < 0.5) v *= rng.uniform();
            phi.noalias() += v * v.transpose();
        }

        BridgeCheck bc = trace_det_bridge_check(a, phi);
        // The proof also leans on det(M) <= (Tr(M)/d)^d for PSD M.
        bool amgm_ok = true;
        for (const Eigen::MatrixXd& m : {a, Eigen::MatrixXd(a + phi)}) {
            double ld = logdet_spd(m);
            double bound = d * std::log(m.trace() / d);
            if (ld > bound + 1e-9 * (1.0 + std::abs(bound))) amgm_ok = false;
        }

        ++rep.trials;
        if (!bc.holds || !amgm_ok) ++rep.violations;
        if (bc.rhs > 1e-12) rep.max_ratio = std::max(rep.max_ratio, bc.lhs / bc.rhs);
    }
    return rep;
}

FuzzReport fuzz_matrix_perturbation(long trials, std::uint64_t seed) {
    FuzzReport rep;
    for (long t = 0; t < trials; ++t) {
        Rng rng = Rng::substream(seed, 0x9e72, static_cast<std::uint64_t>(t));
        const int dims[] = {2, 4, 8};
        int d = dims[rng.uniform_int(3)];

        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d);
        int warm = static_cast<int>(rng.uniform_int(40));
        for (int i = 0; i < warm; ++i) {
            Eigen::VectorXd v = random_unit(d, rng);
            a.noalias() += v * v.transpose();
        }

        double eps = rng.uniform() * 0.999 / d;
        Eigen::MatrixXd delta(d, d);
        for (int i = 0; i < d; ++i) {
            delta(i, i) = (2.0 * rng.uniform() - 1.0) * eps;
            for (int j = i + 1; j < d; ++j) {
                double e = (2.0 * rng.uniform() - 1.0) * eps;
                delta(i, j) = e;
                delta(j, i) = e;
            }
        }
        // Push some mass to the exact corners now and then; the bound is
        // tightest when every entry sits at +-eps.
        if (rng.uniform() < 0.25) {
            Eigen::VectorXd sgn(d);
            for (int i = 0; i < d; ++i) sgn[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
            delta = eps * sgn * sgn.transpose();
        }

        Eigen::VectorXd phi = random_unit(d, rng);
        if (rng.uniform() < 0.5) phi *= rng.uniform();

        PerturbationCheck pc = matrix_perturbation_check(a, delta, phi);
        ++rep.trials;
        if (!pc.holds) ++rep.violations;
        if (pc.inv_quad_bound > 1e-12)
            rep.max_ratio = std::max(rep.max_ratio, pc.inv_quad_gap / pc.inv_quad_bound);
    }
    return rep;
}

FuzzReport fuzz_elliptical_potential(long trials, std::uint64_t seed) {
    FuzzReport rep;
    for (long t = 0; t < trials; ++t) {
        Rng rng = Rng::substream(seed, 0xe11f, static_cast<std::uint64_t>(t));
        const int dims[] = {2, 3, 4};
        int d = dims[rng.uniform_int(3)];
        const double lambdas[] = {0.5, 1.0, 2.0};
        double lambda = lambdas[rng.uniform_int(3)];
        int steps = 1 + static_cast<int>(rng.uniform_int(60));

        Eigen::MatrixXd m = lambda * Eigen::MatrixXd::Identity(d, d);
        double total = 0.0;
        for (int i = 0; i < steps; ++i) {
            Eigen::MatrixXd x;
            switch (rng.uniform_int(3)) {
                case 0: {
                    Eigen::VectorXd v = random_unit(d, rng);
                    x = v * v.transpose();
                    break;
                }
                case 1:
                    x = random_psd(d, 1.0, rng);
                    break;
                default:
                    x = random_psd(d, rng.uniform(), rng);
                    break;
            }
            Eigen::MatrixXd inv = m.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
            total += (inv * x).trace();
            m += x;
        }
        double bound = (1.0 + 1.0 / lambda) * d * std::log(1.0 + static_cast<double>(steps) / d);

        ++rep.trials;
        if (total > bound + 1e-9 * (1.0 + bound)) ++rep.violations;
        if (bound > 1e-12) rep.max_ratio = std::max(rep.max_ratio, total / bound);
    }
    return rep;
}

long batched_potential_min_n(const BatchedPotentialParams& p) {
    if (p.c_K < 2 || p.d < 1 || p.H < 1 || p.eps <= 0.0)
        throw config_error("batched potential: need c_K >= 2, d >= 1, H >= 1, eps > 0");
    const long k = static_cast<long>(p.c_K) * p.d * p.H + 1;
    auto ok = [&](long n) {
        double nn = static_cast<double>(n);
        double load = p.d * std::log(1.0 + k * nn / p.d);
        if (nn * p.eps < load) return false;
        return p.c_K * std::log(nn * p.eps / load) >= std::log(2.0 * k * nn / p.d);
    };
    long hi = 1;
    while (!ok(hi)) {
        hi *= 2;
        if (hi > (1L << 40)) throw numeric_error("batched potential: no feasible batch size found");
    }
    long lo = hi / 2;
    while (lo + 1 < hi) {
        long mid = lo + (hi - lo) / 2;
        (ok(mid) ? hi : lo) = mid;
    }
    return hi;
}

FuzzReport fuzz_batched_potential(long trials, std::uint64_t seed,
                                  const BatchedPotentialParams& p) {
    const long n = batched_potential_min_n(p);
    const int k = p.c_K * p.d * p.H + 1;
    const int d = p.d;

    FuzzReport rep;
    for (long t = 0; t < trials; ++t) {
        Rng rng = Rng::substream(seed, 0xba7c, static_cast<std::uint64_t>(t));
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d);
        std::vector<WeightedBatch> seq;
        seq.reserve(k);
        int recipe = static_cast<int>(rng.uniform_int(5));
        for (int i = 0; i < k; ++i) {
            WeightedBatch wb;
            int mode = recipe == 4 ? static_cast<int>(rng.uniform_int(4)) : recipe;
            switch (mode) {
                case 0: {
                    // Greedy: dump the whole batch on the direction A sees least.
                    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
                    wb.atoms.emplace_back(es.eigenvectors().col(0), n);
                    break;
                }
                case 1:
                    wb.atoms.emplace_back(random_unit(d, rng), n);
                    break;
                case 2: {
                    int parts = 1 + static_cast<int>(rng.uniform_int(4));
                    long left = n;
                    for (int j = 0; j < parts; ++j) {
                        long c = j + 1 == parts ? left : n / parts;
                        left -= c;
                        if (c > 0) wb.atoms.emplace_back(random_unit(d, rng), c);
                    }
                    break;
                }
                default: {
                    // Borderline: size the spike so the batch lands near N*eps.
                    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
                    Eigen::VectorXd u = es.eigenvectors().col(0);
                    double g = 1.0 / es.eigenvalues()[0];
                    double want = n * p.eps * (0.85 + 0.3 * rng.uniform()) / g;
                    long c = std::clamp(static_cast<long>(want) + 1, 1L, n);
                    wb.atoms.emplace_back(u, c);
                    if (c < n) wb.atoms.emplace_back(random_unit(d, rng), n - c);
                    break;
                }
            }
            for (const auto& [v, c] : wb.atoms) a.noalias() += static_cast<double>(c) * v * v.transpose();
            seq.push_back(std::move(wb));
        }

        auto bad = violation_set_weighted(seq, p.eps);
        ++rep.trials;
        if (static_cast<long>(bad.size()) > static_cast<long>(p.c_K) * d) ++rep.violations;
        rep.max_ratio = std::max(
            rep.max_ratio, static_cast<double>(bad.size()) / (static_cast<double>(p.c_K) * d));
    }
    return rep;
}

}  // namespace derl
