#include "derl/mdp.hpp"

#include <cmath>
#include <sstream>

namespace derl {

namespace {

constexpr double kNormTol = 1e-9;
constexpr double kProbTol = 1e-9;
constexpr double kNegTol = 1e-12;

std::string at(int h, int s, int a) {
    std::ostringstream os;
    os << " at (h=" << h << ", s=" << s << ", a=" << a << ")";
    return os.str();
}

}  // namespace

void LinearMdpInstance::finalize() {
    if (d < 1 || H < 1) throw config_error("instance: d and H must be positive");
    if (static_cast<int>(states_per_layer.size()) != H)
        throw config_error("instance: states_per_layer must have H entries");
    for (int h = 0; h < H; ++h)
        if (states_per_layer[h] < 1)
            throw config_error("instance: every layer needs at least one state");
    if (static_cast<int>(phi.size()) != H) throw config_error("instance: phi must have H layers");
    if (static_cast<int>(theta.size()) != H)
        throw config_error("instance: theta must have H layers");
    if (static_cast<int>(mu.size()) != H - 1)
        throw config_error("instance: mu must have H-1 layers");
    if (static_cast<int>(init.size()) != states_per_layer[0])
        throw config_error("instance: init must cover layer-0 states");

    double init_sum = 0.0;
    for (double p : init) {
        if (p < -kNegTol) throw config_error("instance: negative init probability");
        init_sum += p;
    }
    if (std::abs(init_sum - 1.0) > kProbTol)
        throw config_error("instance: init distribution must sum to 1");

    const double sqrt_d = std::sqrt(static_cast<double>(d));
    int max_actions = 0;
    cache_.assign(H, {});
    for (int h = 0; h < H; ++h) {
        if (static_cast<int>(phi[h].size()) != states_per_layer[h])
            throw config_error("instance: phi layer size mismatch");
        if (theta[h].size() != d) throw config_error("instance: theta dimension mismatch");
        if (theta[h].norm() > sqrt_d + kNormTol)
            throw config_error("instance: ||theta|| exceeds sqrt(d)");
        if (h + 1 < H) {
            if (mu[h].rows() != states_per_layer[h + 1] || mu[h].cols() != d)
                throw config_error("instance: mu shape mismatch");
            if (mu[h].norm() > sqrt_d + kNormTol)
                throw config_error("instance: ||mu||_F exceeds sqrt(d)");
        }
        cache_[h].resize(states_per_layer[h]);
        for (int s = 0; s < states_per_layer[h]; ++s) {
            const int na = static_cast<int>(phi[h][s].size());
            if (na < 1) throw config_error("instance: state with no actions" + at(h, s, 0));
            max_actions = std::max(max_actions, na);
            cache_[h][s].resize(na);
            for (int a = 0; a < na; ++a) {
                const Eigen::VectorXd& f = phi[h][s][a];
                if (f.size() != d) throw config_error("instance: phi dimension" + at(h, s, a));
                if (f.norm() > 1.0 + kNormTol)
                    throw config_error("instance: ||phi|| exceeds 1" + at(h, s, a));
                PairCache& pc = cache_[h][s][a];
                double r = f.dot(theta[h]);
                if (r < -kProbTol || r > 1.0 + kProbTol)
                    throw config_error("instance: reward outside [0,1]" + at(h, s, a));
                pc.r = clamp(r, 0.0, 1.0);
                if (h + 1 < H) {
                    Eigen::VectorXd row = mu[h] * f;
                    double sum = 0.0;
                    pc.p.resize(row.size());
                    for (int i = 0; i < row.size(); ++i) {
                        if (row[i] < -kNegTol)
                            throw config_error("instance: negative transition probability" +
                                               at(h, s, a));
                        pc.p[i] = std::max(row[i], 0.0);
                        sum += pc.p[i];
                    }
                    if (std::abs(sum - 1.0) > kProbTol)
                        throw config_error("instance: transition row does not sum to 1" +
                                           at(h, s, a));
                    pc.cdf.resize(pc.p.size());
                    double acc = 0.0;
                    for (std::size_t i = 0; i < pc.p.size(); ++i) {
                        pc.p[i] /= sum;
                        acc += pc.p[i];
                        pc.cdf[i] = acc;
                    }
                }
            }
        }
    }
    if (num_actions == 0) num_actions = max_actions;
    if (max_actions > num_actions)
        throw config_error("instance: a state exceeds the declared action-set size");
    finalized_ = true;
}

long LinearMdpInstance::pair_count(int h) const {
    long n = 0;
    for (int s = 0; s < states_per_layer[h]; ++s) n += actions_at(h, s);
    return n;
}

int LinearMdpInstance::init_state() const {
    for (std::size_t s = 0; s < init.size(); ++s)
        if (init[s] > 1.0 - 1e-12) return static_cast<int>(s);
    return -1;
}

void RewardSpec::validate_for(const LinearMdpInstance& m) const {
    if (is_native()) return;
    if (static_cast<int>(theta_override.size()) != m.H)
        throw config_error("reward: override must have one theta per layer");
    const double sqrt_d = std::sqrt(static_cast<double>(m.d));
    for (int h = 0; h < m.H; ++h) {
        if (theta_override[h].size() != m.d)
            throw config_error("reward: override theta dimension mismatch");
        if (theta_override[h].norm() > sqrt_d + 1e-9)
            throw config_error("reward: override ||theta|| exceeds sqrt(d)");
        for (int s = 0; s < m.num_states(h); ++s)
            for (int a = 0; a < m.actions_at(h, s); ++a) {
                double r = m.features(h, s, a).dot(theta_override[h]);
                if (r < -1e-9 || r > 1.0 + 1e-9)
                    throw config_error("reward: override leaves [0,1]");
            }
    }
}

RewardSpec reward_from_table(const LinearMdpInstance& m,
                             const std::vector<std::vector<std::vector<double>>>& table) {
    if (static_cast<int>(table.size()) != m.H)
        throw config_error("reward table: needs one layer per instance layer");
    std::vector<Eigen::VectorXd> thetas(m.H);
    for (int h = 0; h < m.H; ++h) {
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m.d, m.d);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m.d);
        if (static_cast<int>(table[h].size()) != m.num_states(h))
            throw config_error("reward table: state count mismatch");
        for (int s = 0; s < m.num_states(h); ++s) {
            if (static_cast<int>(table[h][s].size()) != m.actions_at(h, s))
                throw config_error("reward table: action count mismatch");
            for (int a = 0; a < m.actions_at(h, s); ++a) {
                const Eigen::VectorXd& f = m.features(h, s, a);
                gram.noalias() += f * f.transpose();
                rhs.noalias() += f * table[h][s][a];
            }
        }
        Eigen::VectorXd t = gram.ldlt().solve(rhs);
        for (int s = 0; s < m.num_states(h); ++s)
            for (int a = 0; a < m.actions_at(h, s); ++a)
                if (std::abs(m.features(h, s, a).dot(t) - table[h][s][a]) > 1e-9)
                    throw config_error("reward table: not linearly representable");
        thetas[h] = std::move(t);
    }
    RewardSpec spec = RewardSpec::from_theta(std::move(thetas));
    spec.validate_for(m);
    return spec;
}

PolicyTable PolicyTable::from_deterministic(const LinearMdpInstance& m,
                                            const DeterministicPolicy& p) {
    PolicyTable t;
    t.probs.resize(m.H);
    for (int h = 0; h < m.H; ++h) {
        t.probs[h].resize(m.num_states(h));
        for (int s = 0; s < m.num_states(h); ++s) {
            t.probs[h][s].assign(m.actions_at(h, s), 0.0);
            int a = p.actions[h][s];
            if (a < 0 || a >= m.actions_at(h, s))
                throw config_error("policy: action out of range");
            t.probs[h][s][a] = 1.0;
        }
    }
    return t;
}

PolicyTable PolicyTable::uniform(const LinearMdpInstance& m) {
    PolicyTable t;
    t.probs.resize(m.H);
    for (int h = 0; h < m.H; ++h) {
        t.probs[h].resize(m.num_states(h));
        for (int s = 0; s < m.num_states(h); ++s) {
            int na = m.actions_at(h, s);
            t.probs[h][s].assign(na, 1.0 / na);
        }
    }
    return t;
}

PolicyTable PolicyTable::prefix_with_uniform_tail(const LinearMdpInstance& m,
                                                  const DeterministicPolicy& p,
                                                  int prefix_len) {
    PolicyTable t = PolicyTable::uniform(m);
    for (int h = 0; h < prefix_len && h < m.H; ++h)
        for (int s = 0; s < m.num_states(h); ++s) {
            t.probs[h][s].assign(m.actions_at(h, s), 0.0);
            int a = p.actions[h][s];
            if (a < 0 || a >= m.actions_at(h, s))
                throw config_error("policy: action out of range");
            t.probs[h][s][a] = 1.0;
        }
    return t;
}

void validate_policy(const LinearMdpInstance& m, const Policy& p) {
    if (p.members.empty()) throw config_error("policy: empty mixture");
    for (const DeterministicPolicy& dp : p.members) {
        if (static_cast<int>(dp.actions.size()) != m.H)
            throw config_error("policy: must cover every layer");
        for (int h = 0; h < m.H; ++h) {
            if (static_cast<int>(dp.actions[h].size()) != m.num_states(h))
                throw config_error("policy: must cover every state");
            for (int s = 0; s < m.num_states(h); ++s)
                if (dp.actions[h][s] < 0 || dp.actions[h][s] >= m.actions_at(h, s))
                    throw config_error("policy: action out of range");
        }
    }
}

}  // namespace derl
