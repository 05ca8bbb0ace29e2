#include "derl/dp.hpp"

#include <cmath>

namespace derl {

namespace {

void check_trunc(const LinearMdpInstance& m, int h_trunc) {
    if (!m.finalized()) throw config_error("dp: instance not finalized");
    if (h_trunc < 1 || h_trunc > m.H) throw config_error("dp: h_trunc out of range");
}

}  // namespace

double evaluate_table_exact(const LinearMdpInstance& m, const PolicyTable& t,
                            const RewardSpec& reward, int h_trunc) {
    check_trunc(m, h_trunc);
    std::vector<double> v_next(m.num_states(h_trunc - 1), 0.0);
    for (int h = h_trunc - 1; h >= 0; --h) {
        std::vector<double> v(m.num_states(h), 0.0);
        for (int s = 0; s < m.num_states(h); ++s) {
            double val = 0.0;
            for (int a = 0; a < m.actions_at(h, s); ++a) {
                double pa = t.probs[h][s][a];
                if (pa == 0.0) continue;
                double q = reward(m, h, s, a);
                if (h + 1 < h_trunc) {
                    const std::vector<double>& row = m.transition(h, s, a);
                    for (std::size_t sn = 0; sn < row.size(); ++sn)
                        q += row[sn] * v_next[sn];
                }
                val += pa * q;
            }
            v[s] = val;
        }
        v_next = std::move(v);
    }
    double j = 0.0;
    for (std::size_t s = 0; s < m.init.size(); ++s) j += m.init[s] * v_next[s];
    return j;
}

double evaluate_policy_exact(const LinearMdpInstance& m, const Policy& p,
                             const RewardSpec& reward, int h_trunc) {
    validate_policy(m, p);
    double sum = 0.0;
    for (const DeterministicPolicy& dp : p.members)
        sum += evaluate_table_exact(m, PolicyTable::from_deterministic(m, dp), reward, h_trunc);
    return sum / static_cast<double>(p.members.size());
}

OptimalResult optimal_value_exact(const LinearMdpInstance& m, const RewardSpec& reward,
                                  int h_trunc) {
    check_trunc(m, h_trunc);
    OptimalResult out;
    DeterministicPolicy greedy;
    greedy.actions.resize(m.H);
    for (int h = 0; h < m.H; ++h) greedy.actions[h].assign(m.num_states(h), 0);

    out.v.assign(h_trunc, {});
    std::vector<double> v_next(m.num_states(h_trunc - 1), 0.0);
    for (int h = h_trunc - 1; h >= 0; --h) {
        std::vector<double> v(m.num_states(h), 0.0);
        for (int s = 0; s < m.num_states(h); ++s) {
            double best = -1.0;
            int best_a = 0;
            for (int a = 0; a < m.actions_at(h, s); ++a) {
                double q = reward(m, h, s, a);
                if (h + 1 < h_trunc) {
                    const std::vector<double>& row = m.transition(h, s, a);
                    for (std::size_t sn = 0; sn < row.size(); ++sn)
                        q += row[sn] * v_next[sn];
                }
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            v[s] = best;
            greedy.actions[h][s] = best_a;
        }
        out.v[h] = v;
        v_next = std::move(v);
    }
    double j = 0.0;
    for (std::size_t s = 0; s < m.init.size(); ++s) j += m.init[s] * out.v[0][s];
    out.value = j;
    out.policy = Policy::deterministic(std::move(greedy));
    return out;
}

std::vector<std::vector<double>> state_occupancy(const LinearMdpInstance& m,
                                                 const PolicyTable& t) {
    std::vector<std::vector<double>> occ(m.H);
    occ[0].assign(m.init.begin(), m.init.end());
    for (int h = 0; h + 1 < m.H; ++h) {
        occ[h + 1].assign(m.num_states(h + 1), 0.0);
        for (int s = 0; s < m.num_states(h); ++s) {
            if (occ[h][s] == 0.0) continue;
            for (int a = 0; a < m.actions_at(h, s); ++a) {
                double w = occ[h][s] * t.probs[h][s][a];
                if (w == 0.0) continue;
                const std::vector<double>& row = m.transition(h, s, a);
                for (std::size_t sn = 0; sn < row.size(); ++sn) occ[h + 1][sn] += w * row[sn];
            }
        }
    }
    return occ;
}

Eigen::MatrixXd expected_covariance_table(const LinearMdpInstance& m, const PolicyTable& t,
                                          int h) {
    if (!m.finalized()) throw config_error("dp: instance not finalized");
    if (h < 0 || h >= m.H) throw config_error("dp: layer out of range");
    std::vector<std::vector<double>> occ = state_occupancy(m, t);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m.d, m.d);
    for (int s = 0; s < m.num_states(h); ++s) {
        if (occ[h][s] == 0.0) continue;
        for (int a = 0; a < m.actions_at(h, s); ++a) {
            double w = occ[h][s] * t.probs[h][s][a];
            if (w == 0.0) continue;
            const Eigen::VectorXd& f = m.features(h, s, a);
            cov.noalias() += w * (f * f.transpose());
        }
    }
    return cov;
}

Eigen::MatrixXd expected_covariance(const LinearMdpInstance& m, const Policy& p, int h) {
    validate_policy(m, p);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m.d, m.d);
    for (const DeterministicPolicy& dp : p.members)
        cov += expected_covariance_table(m, PolicyTable::from_deterministic(m, dp), h);
    return cov / static_cast<double>(p.members.size());
}

double uncertainty_diagnostic(const LinearMdpInstance& m,
                              const std::vector<Eigen::MatrixXd>& sigmas, int h_max) {
    check_trunc(m, h_max);
    if (static_cast<int>(sigmas.size()) < h_max)
        throw config_error("uncertainty_diagnostic: one matrix per layer < h_max required");
    std::vector<Eigen::MatrixXd> inv(h_max);
    for (int h = 0; h < h_max; ++h) {
        const Eigen::MatrixXd& sig = sigmas[h];
        if (sig.rows() != m.d || sig.cols() != m.d)
            throw numeric_error("uncertainty_diagnostic: matrix dimension mismatch");
        if ((sig - sig.transpose()).cwiseAbs().maxCoeff() > 1e-9)
            throw numeric_error("uncertainty_diagnostic: matrix not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sig);
        if (es.eigenvalues().minCoeff() < 1.0 - 1e-9)
            throw numeric_error("uncertainty_diagnostic: matrix must dominate the identity");
        inv[h] = sig.llt().solve(Eigen::MatrixXd::Identity(m.d, m.d));
    }
    std::vector<double> v_next(m.num_states(h_max - 1), 0.0);
    for (int h = h_max - 1; h >= 0; --h) {
        std::vector<double> v(m.num_states(h), 0.0);
        for (int s = 0; s < m.num_states(h); ++s) {
            double best = -1.0;
            for (int a = 0; a < m.actions_at(h, s); ++a) {
                const Eigen::VectorXd& f = m.features(h, s, a);
                double q = std::sqrt(std::max(0.0, f.dot(inv[h] * f)));
                if (h + 1 < h_max) {
                    const std::vector<double>& row = m.transition(h, s, a);
                    for (std::size_t sn = 0; sn < row.size(); ++sn)
                        q += row[sn] * v_next[sn];
                }
                best = std::max(best, q);
            }
            v[s] = best;
        }
        v_next = std::move(v);
    }
    double j = 0.0;
    for (std::size_t s = 0; s < m.init.size(); ++s) j += m.init[s] * v_next[s];
    return j;
}

std::vector<DeterministicPolicy> enumerate_deterministic_policies(const LinearMdpInstance& m,
                                                                  long cap) {
    if (!m.finalized()) throw config_error("dp: instance not finalized");
    long total = 1;
    for (int h = 0; h < m.H; ++h)
        for (int s = 0; s < m.num_states(h); ++s) {
            total *= m.actions_at(h, s);
            if (total > cap)
                throw config_error("enumerate_deterministic_policies: count exceeds cap");
        }
    std::vector<DeterministicPolicy> out;
    out.reserve(total);
    DeterministicPolicy cur;
    cur.actions.resize(m.H);
    for (int h = 0; h < m.H; ++h) cur.actions[h].assign(m.num_states(h), 0);
    while (true) {
        out.push_back(cur);
        // odometer increment over (layer, state) slots
        int h = 0, s = 0;
        bool carried = true;
        while (carried) {
            if (h == m.H) break;
            int& a = cur.actions[h][s];
            if (a + 1 < m.actions_at(h, s)) {
                ++a;
                carried = false;
            } else {
                a = 0;
                if (++s == m.num_states(h)) {
                    s = 0;
                    ++h;
                }
            }
        }
        if (carried) break;
    }
    return out;
}

bool path_equivalent(const LinearMdpInstance& m, const DeterministicPolicy& a,
                     const DeterministicPolicy& b) {
    auto reaches = [&m](const DeterministicPolicy& p) {
        std::vector<std::vector<double>> occ =
            state_occupancy(m, PolicyTable::from_deterministic(m, p));
        return occ;
    };
    std::vector<std::vector<double>> occ_a = reaches(a), occ_b = reaches(b);
    for (int h = 0; h < m.H; ++h)
        for (int s = 0; s < m.num_states(h); ++s)
            if ((occ_a[h][s] > 1e-12 || occ_b[h][s] > 1e-12) &&
                a.actions[h][s] != b.actions[h][s])
                return false;
    return true;
}

}  // namespace derl
