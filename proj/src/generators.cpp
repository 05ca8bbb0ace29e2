#include "derl/generators.hpp"

#include <cmath>

#include "derl/rng.hpp"

namespace derl {

namespace {

// Dirichlet(1,...,1) via normalized exponentials.
Eigen::VectorXd dirichlet(int n, Rng& rng) {
    Eigen::VectorXd v(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        v[i] = -std::log(u);
        sum += v[i];
    }
    return v / sum;
}

}  // namespace

LinearMdpInstance make_bandit(int d) {
    LinearMdpInstance m;
    m.d = d;
    m.H = 1;
    m.num_actions = d;
    m.states_per_layer = {1};
    m.phi.resize(1);
    m.phi[0].resize(1);
    for (int a = 0; a < d; ++a) {
        Eigen::VectorXd f = Eigen::VectorXd::Zero(d);
        f[a] = 1.0;
        m.phi[0][0].push_back(f);
    }
    m.theta = {Eigen::VectorXd::Zero(d)};
    m.init = {1.0};
    m.finalize();
    return m;
}

LinearMdpInstance make_single_chain(int H, double r) {
    LinearMdpInstance m;
    m.d = 1;
    m.H = H;
    m.num_actions = 1;
    m.states_per_layer.assign(H, 1);
    m.phi.resize(H);
    m.theta.resize(H);
    m.mu.resize(H - 1);
    for (int h = 0; h < H; ++h) {
        m.phi[h].resize(1);
        m.phi[h][0].push_back(Eigen::VectorXd::Ones(1));
        m.theta[h] = Eigen::VectorXd::Constant(1, r);
        if (h + 1 < H) m.mu[h] = Eigen::MatrixXd::Ones(1, 1);
    }
    m.init = {1.0};
    m.finalize();
    return m;
}

LinearMdpInstance make_anchor_random(int d, int H, int states, int actions,
                                     std::uint64_t seed) {
    Rng rng = Rng::substream(seed, 0x616e6368);
    LinearMdpInstance m;
    m.d = d;
    m.H = H;
    m.num_actions = actions;
    m.states_per_layer.assign(H, states);
    m.phi.resize(H);
    m.theta.resize(H);
    m.mu.resize(H - 1);
    for (int h = 0; h < H; ++h) {
        m.phi[h].resize(states);
        for (int s = 0; s < states; ++s)
            for (int a = 0; a < actions; ++a) m.phi[h][s].push_back(dirichlet(d, rng));
        Eigen::VectorXd t(d);
        for (int i = 0; i < d; ++i) t[i] = rng.uniform();
        m.theta[h] = t;
        if (h + 1 < H) {
            Eigen::MatrixXd anchors(states, d);  // column j: distribution over next states
            for (int j = 0; j < d; ++j) anchors.col(j) = dirichlet(states, rng);
            m.mu[h] = anchors;
        }
    }
    m.init.assign(states, 0.0);
    m.init[0] = 1.0;
    m.finalize();
    return m;
}

LinearMdpInstance make_tabular_random(int H, int states, int actions, std::uint64_t seed) {
    Rng rng = Rng::substream(seed, 0x74616275);
    const int d = states * actions;
    LinearMdpInstance m;
    m.d = d;
    m.H = H;
    m.num_actions = actions;
    m.states_per_layer.assign(H, states);
    m.phi.resize(H);
    m.theta.resize(H);
    m.mu.resize(H - 1);
    for (int h = 0; h < H; ++h) {
        m.phi[h].resize(states);
        for (int s = 0; s < states; ++s)
            for (int a = 0; a < actions; ++a) {
                Eigen::VectorXd f = Eigen::VectorXd::Zero(d);
                f[s * actions + a] = 1.0;
                m.phi[h][s].push_back(f);
            }
        Eigen::VectorXd t(d);
        for (int i = 0; i < d; ++i) t[i] = rng.uniform();
        m.theta[h] = t;
        if (h + 1 < H) {
            Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(states, d);
            for (int s = 0; s < states; ++s)
                for (int a = 0; a < actions; ++a) mu.col(s * actions + a) = dirichlet(states, rng);
            m.mu[h] = mu;
        }
    }
    m.init.assign(states, 0.0);
    m.init[0] = 1.0;
    m.finalize();
    return m;
}

}  // namespace derl
