#include "derl/lsvi.hpp"

#include <cmath>

namespace derl {

CovarianceAccumulator::CovarianceAccumulator(int d, double lambda) : d_(d), lambda_(lambda) {
    if (d < 1) throw config_error("accumulator: dimension must be positive");
    if (lambda <= 0.0) throw config_error("accumulator: lambda must be positive");
    gram_ = Eigen::MatrixXd::Identity(d, d) * lambda;
    inverse_ = Eigen::MatrixXd::Identity(d, d) / lambda;
    logdet_ = d * std::log(lambda);
}

void CovarianceAccumulator::absorb(const Eigen::VectorXd& phi) {
    if (phi.size() != d_) throw numeric_error("accumulator: feature dimension mismatch");
    if (phi.norm() > 1.0 + 1e-9) throw numeric_error("accumulator: ||phi|| exceeds 1");
    gram_.noalias() += phi * phi.transpose();
    Eigen::VectorXd u = inverse_ * phi;
    double denom = 1.0 + phi.dot(u);
    inverse_.noalias() -= (u * u.transpose()) / denom;
    logdet_ += std::log(denom);
    ++count_;
    if (++since_reinvert_ >= kReinvertEvery) reinvert();
}

void CovarianceAccumulator::merge(const CovarianceAccumulator& other) {
    if (other.d_ != d_ || other.lambda_ != lambda_)
        throw numeric_error("accumulator: merge shape/lambda mismatch");
    gram_ += other.gram_ - Eigen::MatrixXd::Identity(d_, d_) * lambda_;
    count_ += other.count_;
    reinvert();
}

void CovarianceAccumulator::reinvert() {
    Eigen::LLT<Eigen::MatrixXd> llt(gram_);
    if (llt.info() != Eigen::Success)
        throw numeric_error("accumulator: Gram matrix lost positive definiteness");
    inverse_ = llt.solve(Eigen::MatrixXd::Identity(d_, d_));
    logdet_ = 0.0;
    for (int i = 0; i < d_; ++i) logdet_ += 2.0 * std::log(llt.matrixL()(i, i));
    since_reinvert_ = 0;
}

double CovarianceAccumulator::quad_inv(const Eigen::VectorXd& phi) const {
    return std::max(0.0, phi.dot(inverse_ * phi));
}

double bonus_value(const CovarianceAccumulator& acc, const Eigen::VectorXd& phi, double beta,
                   double cap) {
    return std::min(beta * std::sqrt(acc.quad_inv(phi)), cap);
}

Eigen::VectorXd ridge_fit(const CovarianceAccumulator& acc,
                          const std::vector<RegressionSample>& samples) {
    if (acc.count() != static_cast<long>(samples.size()))
        throw numeric_error("ridge_fit: accumulator count does not match sample count");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(acc.dim());
    for (const RegressionSample& s : samples) b.noalias() += s.phi * s.target;
    return acc.solve(b);
}

double LinearQ::q(const LinearMdpInstance& m, int h, int s, int a) const {
    if (h >= h_top) return 0.0;
    const Eigen::VectorXd& f = m.features(h, s, a);
    double u = std::sqrt(std::max(0.0, f.dot(Z[h] * f)));
    u = std::min(u, bonus_cap);
    return clamp(w[h].dot(f) + reward(h, s, a) + u, 0.0, ceiling);
}

double LinearQ::v(const LinearMdpInstance& m, int h, int s) const {
    if (h >= h_top) return 0.0;
    double best = 0.0;
    for (int a = 0; a < m.actions_at(h, s); ++a) best = std::max(best, q(m, h, s, a));
    return best;
}

int LinearQ::greedy_action(const LinearMdpInstance& m, int h, int s) const {
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

std::pair<LinearQ, DeterministicPolicy> lsvi_backup(
    const LinearMdpInstance& m, const LayeredDataset& data,
    const std::vector<CovarianceAccumulator>& accumulators,
    const std::function<double(int, int, int)>& reward, int h_top, double beta,
    double ceiling, double bonus_cap) {
    if (!m.finalized()) throw config_error("lsvi_backup: instance not finalized");
    if (h_top < 1 || h_top > m.H) throw config_error("lsvi_backup: h_top out of range");
    if (static_cast<int>(data.size()) < h_top ||
        static_cast<int>(accumulators.size()) < h_top)
        throw config_error("lsvi_backup: need a dataset and accumulator per layer < h_top");

    LinearQ q;
    q.bonus_cap = bonus_cap;
    q.ceiling = ceiling;
    q.h_top = h_top;
    q.reward = reward;
    q.w.assign(h_top, Eigen::VectorXd());
    q.Z.assign(h_top, Eigen::MatrixXd());

    std::vector<double> v_next;  // optimistic V at layer h+1
    for (int h = h_top - 1; h >= 0; --h) {
        const CovarianceAccumulator& acc = accumulators[h];
        if (acc.count() != static_cast<long>(data[h].size()))
            throw numeric_error("lsvi_backup: accumulator out of sync with dataset");
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m.d);
        if (h + 1 < h_top) {
            for (const LayerSample& smp : data[h]) {
                double target = (smp.s_next >= 0) ? v_next[smp.s_next] : 0.0;
                if (target != 0.0) b.noalias() += m.features(h, smp.s, smp.a) * target;
            }
        }
        q.w[h] = acc.solve(b);
        q.Z[h] = beta * beta * acc.inverse();

        std::vector<double> v(m.num_states(h), 0.0);
        for (int s = 0; s < m.num_states(h); ++s) v[s] = q.v(m, h, s);
        v_next = std::move(v);
    }

    DeterministicPolicy greedy;
    greedy.actions.resize(m.H);
    for (int h = 0; h < m.H; ++h) {
        greedy.actions[h].assign(m.num_states(h), 0);
        if (h < h_top)
            for (int s = 0; s < m.num_states(h); ++s)
                greedy.actions[h][s] = q.greedy_action(m, h, s);
    }
    return {std::move(q), std::move(greedy)};
}

double theoretical_beta(int d, int H, double epsilon, double delta, double c_beta) {
    return c_beta * d * H * std::sqrt(std::log(d * H / (delta * epsilon)));
}

}  // namespace derl
