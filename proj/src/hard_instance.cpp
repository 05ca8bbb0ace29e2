#include "derl/hard_instance.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace derl {

void HardInstanceSpec::validate() const {
    if (d < 2) throw config_error("hard instance: d must be at least 2");
    if (H < 2) throw config_error("hard instance: template horizon must be at least 2");
    if (h_sharp < 1 || h_sharp > H - 1)
        throw config_error("hard instance: h_sharp must lie in [1, H-1]");
    if (i_sharp < 1 || i_sharp > d) throw config_error("hard instance: i_sharp out of range");
    if (static_cast<int>(core.size()) != H)
        throw config_error("hard instance: core needs one arm per template layer");
    for (int c : core)
        if (c < 1 || c > d) throw config_error("hard instance: core arm out of range");
    if (core[h_sharp - 1] == i_sharp)
        throw config_error("hard instance: bumped arm must differ from the core arm");
    if (epsilon < 0.0 || epsilon >= 0.5)
        throw config_error("hard instance: epsilon must lie in [0, 0.5)");
}

namespace {

// Per-layer feature coordinates (dimension 2d+1):
//   0       : the u1 absorbing pair
//   1       : the u2 absorbing pair
//   2..d    : normal-state pairs, arms ascending with the core arm skipped
//   d+1..2d : core arms 1..d (also used by s0's arms at layer 0)
int core_coord(int d, int arm) { return d + arm; }

int normal_coord(int d, int core_arm, int arm) {
    int rank = 0;
    for (int j = 1; j < arm; ++j)
        if (j != core_arm) ++rank;
    (void)d;
    return 2 + rank;
}

Eigen::VectorXd unit(int dim, int coord) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    v[coord] = 1.0;
    return v;
}

}  // namespace

LinearMdpInstance build_hard_mdp(const HardInstanceSpec& spec) {
    spec.validate();
    const int d = spec.d;
    const int dim = 2 * d + 1;
    const int T = spec.H;  // template horizon; built layers 0..T

    LinearMdpInstance m;
    m.d = dim;
    m.H = T + 1;
    m.num_actions = d;
    m.states_per_layer.assign(T + 1, d + 2);
    m.states_per_layer[0] = 1;
    m.phi.resize(T + 1);
    m.theta.resize(T + 1);
    m.mu.resize(T);

    // Layer 0: the start state's arm j leads to next-layer state s^j.
    m.phi[0].resize(1);
    for (int j = 1; j <= d; ++j) m.phi[0][0].push_back(unit(dim, core_coord(d, j)));

    for (int t = 1; t <= T; ++t) {
        const int core_arm = spec.core[t - 1];
        m.phi[t].resize(d + 2);
        m.phi[t][hard_layout::kU1].push_back(unit(dim, 0));
        m.phi[t][hard_layout::kU2].push_back(unit(dim, 1));
        for (int j = 1; j <= d; ++j) {
            int s = hard_layout::state_of_arm(j);
            if (j == core_arm) {
                for (int arm = 1; arm <= d; ++arm)
                    m.phi[t][s].push_back(unit(dim, core_coord(d, arm)));
            } else {
                m.phi[t][s].push_back(unit(dim, normal_coord(d, core_arm, j)));
            }
        }
    }

    // Rewards: every pair pays 1/2, except the absorbing pairs at the final
    // layer, which pay 0 (u1) and 1 (u2).
    for (int t = 0; t <= T; ++t) {
        Eigen::VectorXd th = Eigen::VectorXd::Constant(dim, 0.5);
        if (t == T) {
            th[0] = 0.0;
            th[1] = 1.0;
        }
        m.theta[t] = th;
    }

    // Transitions. mu[t] maps layer t to layer t+1.
    m.mu[0] = Eigen::MatrixXd::Zero(d + 2, dim);
    for (int j = 1; j <= d; ++j)
        m.mu[0](hard_layout::state_of_arm(j), core_coord(d, j)) = 1.0;
    for (int t = 1; t < T; ++t) {
        const int core_arm = spec.core[t - 1];
        Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(d + 2, dim);
        mu(hard_layout::kU1, 0) = 1.0;
        mu(hard_layout::kU2, 1) = 1.0;
        for (int arm = 1; arm <= d; ++arm)
            mu(hard_layout::state_of_arm(arm), core_coord(d, arm)) = 1.0;
        for (int j = 1; j <= d; ++j) {
            if (j == core_arm) continue;
            double up = 0.5, down = 0.5;
            if (t == spec.h_sharp && j == spec.i_sharp) {
                up = 0.5 + spec.epsilon;
                down = 0.5 - spec.epsilon;
            }
            int c = normal_coord(d, core_arm, j);
            mu(hard_layout::kU1, c) = down;
            mu(hard_layout::kU2, c) = up;
        }
        m.mu[t] = mu;
    }

    m.init.assign(1, 1.0);
    m.finalize();
    return m;
}

std::vector<HardInstanceSpec> enumerate_family(int d, int H, double epsilon) {
    if (d < 2 || H < 2) throw config_error("hard family: need d >= 2 and H >= 2");
    std::vector<HardInstanceSpec> out;
    HardInstanceSpec base;
    base.d = d;
    base.H = H;
    base.core.assign(H, 1);
    base.h_sharp = 1;
    base.i_sharp = 2;
    base.epsilon = 0.0;
    out.push_back(base);  // the bump-free member
    for (int h = 1; h <= H - 1; ++h)
        for (int i = 1; i <= d; ++i) {
            if (i == 1) continue;  // core arm
            HardInstanceSpec s = base;
            s.h_sharp = h;
            s.i_sharp = i;
            s.epsilon = epsilon;
            out.push_back(s);
        }
    return out;
}

LinearMdpInstance stationary_expand(const LinearMdpInstance& m) {
    if (!m.finalized()) throw config_error("stationary_expand: instance not finalized");
    const int H = m.H;
    const int d = m.d;
    const int dim = d * H;

    // Block offsets of the product state space (original layer b, state s).
    std::vector<int> offset(H + 1, 0);
    for (int b = 0; b < H; ++b) offset[b + 1] = offset[b] + m.num_states(b);
    const int S = offset[H];

    // Total transition mass out of final-layer pairs must be the constant 1
    // as a linear functional of phi; recover that functional by least squares.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    for (int s = 0; s < m.num_states(H - 1); ++s)
        for (int a = 0; a < m.actions_at(H - 1, s); ++a) {
            const Eigen::VectorXd& f = m.features(H - 1, s, a);
            gram.noalias() += f * f.transpose();
            rhs.noalias() += f;
        }
    Eigen::VectorXd ones_functional = gram.ldlt().solve(rhs);
    for (int s = 0; s < m.num_states(H - 1); ++s)
        for (int a = 0; a < m.actions_at(H - 1, s); ++a)
            if (std::abs(m.features(H - 1, s, a).dot(ones_functional) - 1.0) > 1e-9)
                throw numeric_error(
                    "stationary_expand: final-layer features cannot route anywhere "
                    "(constant functional not representable)");

    LinearMdpInstance out;
    out.d = dim;
    out.H = H;
    out.num_actions = m.num_actions;
    out.states_per_layer.assign(H, S);
    out.phi.resize(H);
    out.theta.resize(H);
    out.mu.resize(H - 1);

    // One shared layer: block-embedded features, concatenated thetas, and a
    // block-shift transition matrix. Block H-1 pairs are unreachable before
    // the final layer; they route to product state (0, 0) with total mass 1.
    std::vector<std::vector<Eigen::VectorXd>> layer_phi(S);
    for (int b = 0; b < H; ++b)
        for (int s = 0; s < m.num_states(b); ++s)
            for (int a = 0; a < m.actions_at(b, s); ++a) {
                Eigen::VectorXd f = Eigen::VectorXd::Zero(dim);
                f.segment(b * d, d) = m.features(b, s, a);
                layer_phi[offset[b] + s].push_back(f);
            }
    Eigen::VectorXd theta_all(dim);
    for (int b = 0; b < H; ++b) theta_all.segment(b * d, d) = m.theta[b];
    Eigen::MatrixXd mu_all = Eigen::MatrixXd::Zero(S, dim);
    for (int b = 0; b + 1 < H; ++b)
        mu_all.block(offset[b + 1], b * d, m.num_states(b + 1), d) = m.mu[b];
    mu_all.block(0, (H - 1) * d, 1, d) = ones_functional.transpose();

    for (int t = 0; t < H; ++t) {
        out.phi[t] = layer_phi;
        out.theta[t] = theta_all;
        if (t + 1 < H) out.mu[t] = mu_all;
    }
    out.init.assign(S, 0.0);
    for (int s = 0; s < m.num_states(0); ++s) out.init[s] = m.init[s];
    out.finalize();
    return out;
}

Policy expand_policy(const LinearMdpInstance& m, const Policy& p) {
    validate_policy(m, p);
    std::vector<int> offset(m.H + 1, 0);
    for (int b = 0; b < m.H; ++b) offset[b + 1] = offset[b] + m.num_states(b);
    const int S = offset[m.H];
    Policy out;
    for (const DeterministicPolicy& dp : p.members) {
        DeterministicPolicy lifted;
        lifted.actions.assign(m.H, std::vector<int>(S, 0));
        for (int t = 0; t < m.H; ++t)
            for (int b = 0; b < m.H; ++b)
                for (int s = 0; s < m.num_states(b); ++s)
                    lifted.actions[t][offset[b] + s] = dp.actions[b][s];
        out.members.push_back(std::move(lifted));
    }
    return out;
}

}  // namespace derl
