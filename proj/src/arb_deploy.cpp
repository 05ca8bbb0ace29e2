#include "derl/arb_deploy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "derl/dp.hpp"
#include "derl/sampling.hpp"

namespace derl {

namespace {

double grid_round(double x, double eps0) {
    double q = x / eps0;
    double f = std::floor(q);
    if (q - f < 1e-9) return eps0 * f;  // already on the grid
    return eps0 * std::ceil(q);
}

void check_symmetric(const Eigen::MatrixXd& m, const char* what) {
    if (m.rows() != m.cols() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw numeric_error(std::string(what) + ": matrix must be symmetric");
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    return es.eigenvalues().maxCoeff();
}

}  // namespace

Eigen::VectorXd discretize_vector(const Eigen::VectorXd& v, double eps0) {
    if (eps0 <= 0.0) throw config_error("discretize: grid step must be positive");
    Eigen::VectorXd out(v.size());
    for (int i = 0; i < v.size(); ++i) out[i] = grid_round(v[i], eps0);
    return out;
}

Eigen::MatrixXd discretize_matrix(const Eigen::MatrixXd& m, double eps0) {
    if (eps0 <= 0.0) throw config_error("discretize: grid step must be positive");
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) out(i, j) = grid_round(m(i, j), eps0);
    return out;
}

double DiscretizedQ::q(const LinearMdpInstance& m, int h, int s, int a) const {
    const Eigen::VectorXd& f = m.features(h, s, a);
    double linear = (h == top_layer) ? 0.0 : w_bar[h].dot(f);
    double u = std::sqrt(std::max(0.0, f.dot(z_bar[h] * f)));
    return clamp(linear + u, 0.0, 1.0);
}

int DiscretizedQ::greedy_action(const LinearMdpInstance& m, int h, int s) const {
    double best = -1.0;
    int best_a = 0;
    for (int a = 0; a < m.actions_at(h, s); ++a) {
        double qa = q(m, h, s, a);
        if (qa > best) {
            best = qa;
            best_a = a;
        }
    }
    return best_a;
}

DeterministicPolicy DiscretizedQ::greedy_policy(const LinearMdpInstance& m) const {
    DeterministicPolicy p;
    p.actions.resize(m.H);
    for (int h = 0; h < m.H; ++h) {
        p.actions[h].assign(m.num_states(h), 0);
        if (h <= top_layer)
            for (int s = 0; s < m.num_states(h); ++s) p.actions[h][s] = greedy_action(m, h, s);
    }
    return p;
}

SolveOptQResult solve_opt_q(const LinearMdpInstance& m, int top, const LayeredDataset& data,
                            const std::vector<CovarianceAccumulator>& accumulators,
                            double beta_prime, const Eigen::MatrixXd& sigma_R, double eps0) {
    if (!m.finalized()) throw config_error("solve_opt_q: instance not finalized");
    if (top < 0 || top >= m.H) throw config_error("solve_opt_q: layer out of range");
    if (m.init_state() < 0)
        throw config_error("solve_opt_q: requires a point-mass initial state");
    if (beta_prime <= 0.0) throw config_error("solve_opt_q: beta_prime must be positive");
    check_symmetric(sigma_R, "solve_opt_q: sigma_R");
    if (min_eigenvalue(sigma_R) < -0.5 - 1e-9)
        throw numeric_error("solve_opt_q: sigma_R must dominate -I/2");
    if (static_cast<int>(data.size()) < top || static_cast<int>(accumulators.size()) < top)
        throw config_error("solve_opt_q: need a dataset and accumulator per layer below top");
    long n_max = 0;
    for (int h = 0; h < top; ++h)
        n_max = std::max(n_max, static_cast<long>(data[h].size()));
    if (eps0 <= 0.0 || eps0 > 1.0 / (2.0 * m.d * (n_max + 1)) + 1e-15)
        throw config_error("solve_opt_q: eps0 must lie in (0, 1/(2d(N+1))]");

    const double z_grid = eps0 * eps0 / (4.0 * m.d);
    const double w_grid = eps0 / (2.0 * m.d);

    SolveOptQResult out;
    out.qbar.eps0 = eps0;
    out.qbar.top_layer = top;
    out.qbar.w_bar.assign(top + 1, Eigen::VectorXd::Zero(m.d));
    out.qbar.z_bar.assign(top + 1, Eigen::MatrixXd());

    // Top layer: exploration reward from the coverage matrix.
    Eigen::MatrixXd cov = 2.0 * Eigen::MatrixXd::Identity(m.d, m.d) + sigma_R;
    Eigen::MatrixXd cov_inv = cov.llt().solve(Eigen::MatrixXd::Identity(m.d, m.d));
    out.qbar.z_bar[top] = discretize_matrix(cov_inv, z_grid);
    if (min_eigenvalue(out.qbar.z_bar[top]) < -1e-9)
        throw numeric_error("solve_opt_q: discretized top-layer matrix lost PSD");
    if (max_eigenvalue(out.qbar.z_bar[top]) > 1.0 + 1e-9)
        throw numeric_error("solve_opt_q: discretized top-layer matrix exceeds identity");

    std::vector<double> v(m.num_states(top), 0.0);       // undiscretized chain
    for (int s = 0; s < m.num_states(top); ++s) {
        double best = 0.0;
        for (int a = 0; a < m.actions_at(top, s); ++a) {
            const Eigen::VectorXd& f = m.features(top, s, a);
            best = std::max(best, clamp(std::sqrt(std::max(0.0, f.dot(cov_inv * f))), 0.0, 1.0));
        }
        v[s] = best;
    }

    for (int h = top - 1; h >= 0; --h) {
        const CovarianceAccumulator& acc = accumulators[h];
        if (acc.count() != static_cast<long>(data[h].size()))
            throw numeric_error("solve_opt_q: accumulator out of sync with dataset");
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m.d);
        for (const LayerSample& smp : data[h])
            if (smp.s_next >= 0 && v[smp.s_next] != 0.0)
                b.noalias() += m.features(h, smp.s, smp.a) * v[smp.s_next];
        Eigen::VectorXd w = acc.solve(b);
        out.qbar.w_bar[h] = discretize_vector(w, w_grid);
        out.qbar.z_bar[h] =
            discretize_matrix(beta_prime * beta_prime * acc.inverse(), z_grid);
        if (min_eigenvalue(out.qbar.z_bar[h]) < -1e-9)
            throw numeric_error("solve_opt_q: discretized bonus matrix lost PSD");

        std::vector<double> v_here(m.num_states(h), 0.0);
        for (int s = 0; s < m.num_states(h); ++s) {
            double best = 0.0;
            for (int a = 0; a < m.actions_at(h, s); ++a) {
                const Eigen::VectorXd& f = m.features(h, s, a);
                double u = beta_prime * std::sqrt(acc.quad_inv(f));
                best = std::max(best, clamp(w.dot(f) + u, 0.0, 1.0));
            }
            v_here[s] = best;
        }
        v = std::move(v_here);
    }

    out.v1 = v[m.init_state()];
    out.policy = out.qbar.greedy_policy(m);
    return out;
}

Eigen::MatrixXd estimate_cov_matrix(const LinearMdpInstance& m, int top,
                                    const LayeredDataset& data,
                                    const std::vector<CovarianceAccumulator>& accumulators,
                                    const DeterministicPolicy& pi) {
    if (!m.finalized()) throw config_error("estimate_cov_matrix: instance not finalized");
    if (top < 0 || top >= m.H) throw config_error("estimate_cov_matrix: layer out of range");
    if (m.init_state() < 0)
        throw config_error("estimate_cov_matrix: requires a point-mass initial state");
    if (static_cast<int>(data.size()) < top || static_cast<int>(accumulators.size()) < top)
        throw config_error("estimate_cov_matrix: need a dataset per layer below top");
    for (int h = 0; h < top; ++h)
        if (data[h].empty())
            throw config_error("estimate_cov_matrix: empty dataset below the target layer");

    const int s1 = m.init_state();
    Eigen::MatrixXd est(m.d, m.d);
    for (int i = 0; i < m.d; ++i)
        for (int j = i; j < m.d; ++j) {
            // Top-layer reward (1 + phi_i phi_j)/2 evaluated under pi.
            std::vector<double> v(m.num_states(top), 0.0);
            for (int s = 0; s < m.num_states(top); ++s) {
                const Eigen::VectorXd& f = m.features(top, s, pi.actions[top][s]);
                v[s] = 0.5 * (1.0 + f[i] * f[j]);
            }
            for (int h = top - 1; h >= 0; --h) {
                const CovarianceAccumulator& acc = accumulators[h];
                Eigen::VectorXd b = Eigen::VectorXd::Zero(m.d);
                for (const LayerSample& smp : data[h])
                    if (smp.s_next >= 0 && v[smp.s_next] != 0.0)
                        b.noalias() += m.features(h, smp.s, smp.a) * v[smp.s_next];
                Eigen::VectorXd w = acc.solve(b);
                std::vector<double> v_here(m.num_states(h), 0.0);
                for (int s = 0; s < m.num_states(h); ++s)
                    v_here[s] =
                        clamp(w.dot(m.features(h, s, pi.actions[h][s])), 0.0, 1.0);
                v = std::move(v_here);
            }
            double lambda_tilde = v[s1];
            est(i, j) = est(j, i) = 2.0 * lambda_tilde - 1.0;
        }
    return est;
}

ArbDeployResult run_arbitrary_derl(const LinearMdpInstance& m, int i_max, double eps0,
                                   double beta_prime, double nu_min, int N,
                                   std::uint64_t seed, int workers) {
    if (!m.finalized()) throw config_error("arb deploy: instance not finalized");
    if (m.init_state() < 0) throw config_error("arb deploy: requires a point-mass initial state");
    if (i_max < 1) throw config_error("arb deploy: i_max must be positive");
    if (N < 1) throw config_error("arb deploy: N must be positive");
    if (nu_min <= 0.0) throw config_error("arb deploy: nu_min must be positive");
    if (beta_prime <= 0.0) throw config_error("arb deploy: beta_prime must be positive");
    if (eps0 <= 0.0) eps0 = 1.0 / (2.0 * m.d * (static_cast<double>(N) + 1.0));

    const double break_level = 3.0 * nu_min * nu_min / 8.0;

    ArbDeployResult out;
    out.data.assign(m.H, {});
    out.accumulators.assign(m.H, CovarianceAccumulator(m.d));
    out.covers.resize(m.H);

    // The initializer is a free choice; start from the lowest action everywhere
    // and carry each layer's final optimistic iterate into the next layer, so
    // the evaluated policy keeps to directions the deployed data has seen.
    DeterministicPolicy pi_cur;
    pi_cur.actions.resize(m.H);
    for (int hh = 0; hh < m.H; ++hh) pi_cur.actions[hh].assign(m.num_states(hh), 0);

    for (int h = 0; h < m.H; ++h) {
        PolicyCover& cover = out.covers[h];
        cover.sigma_tilde = 2.0 * Eigen::MatrixXd::Identity(m.d, m.d);

        for (int i = 1; i <= i_max; ++i) {
            cover.iterations = i;
            Eigen::MatrixXd est = estimate_cov_matrix(m, h, out.data, out.accumulators, pi_cur);
            cover.sigma_tilde += est;
            cover.increments.push_back(est);
            SolveOptQResult sol = solve_opt_q(
                m, h, out.data, out.accumulators, beta_prime,
                cover.sigma_tilde - 2.0 * Eigen::MatrixXd::Identity(m.d, m.d), eps0);
            cover.opt_values.push_back(sol.v1);
            if (sol.v1 <= break_level) {
                cover.broke = true;
                break;
            }
            bool known = false;
            for (const CoverMember& cm : cover.members)
                if (cm.policy == sol.policy) {
                    known = true;
                    break;
                }
            if (!known) cover.members.push_back({sol.policy, sol.qbar});
            pi_cur = sol.policy;
        }

        std::vector<DeterministicPolicy> mix;
        if (cover.members.empty()) {
            cover.singleton_fallback = true;
            mix.push_back(pi_cur);
        } else {
            for (const CoverMember& cm : cover.members) mix.push_back(cm.policy);
        }
        Policy deploy = Policy::mixture(std::move(mix));

        std::vector<Trajectory> batch =
            sample_batch(m, deploy, N, seed, static_cast<std::uint64_t>(h + 1), workers,
                         h + 1);
        for (const Trajectory& traj : batch) {
            const TrajectoryStep& st = traj.steps[h];
            out.data[h].push_back({st.s, st.a, st.s_next, st.r});
            out.accumulators[h].absorb(m.features(st.h, st.s, st.a));
        }
        ++out.deployments;
    }
    return out;
}

ReachabilityReport reachability_coefficient(const LinearMdpInstance& m, ReachMethod method,
                                            long policy_cap) {
    if (!m.finalized()) throw config_error("reachability: instance not finalized");
    if (method == ReachMethod::BruteForce && m.d > 4) method = ReachMethod::SvdLowerBound;

    std::vector<DeterministicPolicy> policies = enumerate_deterministic_policies(m, policy_cap);

    ReachabilityReport report;
    report.method = method;
    report.nu.resize(m.H);

    for (int h = 0; h < m.H; ++h) {
        // Deduplicate the per-policy feature covariances at this layer.
        std::vector<Eigen::MatrixXd> covs;
        for (const DeterministicPolicy& p : policies) {
            Eigen::MatrixXd c =
                expected_covariance_table(m, PolicyTable::from_deterministic(m, p), h);
            bool seen = false;
            for (const Eigen::MatrixXd& prev : covs)
                if ((prev - c).cwiseAbs().maxCoeff() < 1e-12) {
                    seen = true;
                    break;
                }
            if (!seen) covs.push_back(std::move(c));
        }

        if (method == ReachMethod::SvdLowerBound) {
            double best = 0.0;
            for (const Eigen::MatrixXd& c : covs) best = std::max(best, min_eigenvalue(c));
            report.nu[h] = std::sqrt(std::max(0.0, best));
            continue;
        }

        auto worst_dir = [&covs](const Eigen::VectorXd& theta) {
            double best = 0.0;
            for (const Eigen::MatrixXd& c : covs) best = std::max(best, theta.dot(c * theta));
            return best;
        };

        const int n_dirs = m.d <= 3 ? 4096 : 32768;
        Rng rng = Rng::substream(0x5eed, static_cast<std::uint64_t>(h));
        std::vector<Eigen::VectorXd> starts;
        for (int i = 0; i < m.d; ++i) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(m.d);
            e[i] = 1.0;
            starts.push_back(e);
        }
        starts.push_back(Eigen::VectorXd::Constant(m.d, 1.0 / std::sqrt(double(m.d))));
        std::vector<std::pair<double, Eigen::VectorXd>> ranked;
        for (const Eigen::VectorXd& e : starts) ranked.push_back({worst_dir(e), e});
        for (int i = 0; i < n_dirs; ++i) {
            Eigen::VectorXd theta(m.d);
            for (int j = 0; j < m.d; ++j) theta[j] = rng.normal();
            double norm = theta.norm();
            if (norm < 1e-12) continue;
            theta /= norm;
            ranked.push_back({worst_dir(theta), theta});
        }
        std::sort(ranked.begin(), ranked.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (ranked.size() > 8) ranked.resize(8);

        double best_val = ranked.front().first;
        for (auto& [val, theta] : ranked) {
            double step = 0.25;
            double cur = val;
            while (step > 1e-5) {
                bool improved = false;
                for (int j = 0; j < m.d; ++j)
                    for (double sgn : {1.0, -1.0}) {
                        Eigen::VectorXd cand = theta;
                        cand[j] += sgn * step;
                        double norm = cand.norm();
                        if (norm < 1e-12) continue;
                        cand /= norm;
                        double v = worst_dir(cand);
                        if (v < cur - 1e-15) {
                            cur = v;
                            theta = cand;
                            improved = true;
                        }
                    }
                if (!improved) step *= 0.5;
            }
            best_val = std::min(best_val, cur);
        }
        report.nu[h] = std::sqrt(std::max(0.0, best_val));
    }

    report.nu_min = *std::min_element(report.nu.begin(), report.nu.end());
    return report;
}

}  // namespace derl
