#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "derl/mdp.hpp"

namespace derl {

/// Regularized Gram matrix lambda*I + sum phi phi^T with an incrementally
/// maintained inverse (rank-1 Sherman-Morrison updates) and log-determinant.
/// The inverse is recomputed densely every kReinvertEvery absorbs to stop
/// floating-point drift; merge() recomputes immediately.
class CovarianceAccumulator {
  public:
    explicit CovarianceAccumulator(int d, double lambda = 1.0);

    /// Add one feature vector (requires ||phi|| <= 1 + 1e-9).
    void absorb(const Eigen::VectorXd& phi);

    /// Fold another accumulator's data into this one (same d and lambda).
    void merge(const CovarianceAccumulator& other);

    /// phi' * inverse * phi (clamped below at 0).
    double quad_inv(const Eigen::VectorXd& phi) const;

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return inverse_ * b; }

    const Eigen::MatrixXd& gram() const { return gram_; }
    const Eigen::MatrixXd& inverse() const { return inverse_; }
    double logdet() const { return logdet_; }
    long count() const { return count_; }
    double lambda() const { return lambda_; }
    int dim() const { return d_; }

    static constexpr int kReinvertEvery = 4096;

  private:
    void reinvert();

    int d_;
    double lambda_;
    Eigen::MatrixXd gram_;
    Eigen::MatrixXd inverse_;
    double logdet_;
    long count_ = 0;
    int since_reinvert_ = 0;
};

/// Exploration bonus min(beta * sqrt(phi' Lambda^{-1} phi), cap).
double bonus_value(const CovarianceAccumulator& acc, const Eigen::VectorXd& phi, double beta,
                   double cap);

struct RegressionSample {
    Eigen::VectorXd phi;
    double target;
};

/// Ridge solution Lambda^{-1} sum(phi_i * y_i); the accumulator must hold
/// exactly the samples' features (checked by count).
Eigen::VectorXd ridge_fit(const CovarianceAccumulator& acc,
                          const std::vector<RegressionSample>& samples);

/// Optimistic state-action value produced by lsvi_backup:
///   Q_h(s,a) = clamp(w_h.phi + reward(h,s,a) + min(sqrt(phi' Z_h phi), bonus_cap),
///              0, ceiling)
/// where Z_h = beta^2 Lambda_h^{-1}. Layers h >= h_top value to zero.
struct LinearQ {
    std::vector<Eigen::VectorXd> w;  // per layer < h_top
    std::vector<Eigen::MatrixXd> Z;
    double bonus_cap = 0.0;
    double ceiling = 0.0;
    int h_top = 0;
    std::function<double(int, int, int)> reward;  // (h, s, a)

    double q(const LinearMdpInstance& m, int h, int s, int a) const;
    double v(const LinearMdpInstance& m, int h, int s) const;
    int greedy_action(const LinearMdpInstance& m, int h, int s) const;
};

/// Backward least-squares value iteration over the first h_top layers:
/// regression targets are the next layer's optimistic V (zero at h_top),
/// fitted against each layer's dataset through its accumulator. Returns the
/// value function and its greedy policy (ties to the lowest action index;
/// layers >= h_top filled with action 0).
std::pair<LinearQ, DeterministicPolicy> lsvi_backup(
    const LinearMdpInstance& m, const LayeredDataset& data,
    const std::vector<CovarianceAccumulator>& accumulators,
    const std::function<double(int, int, int)>& reward, int h_top, double beta,
    double ceiling, double bonus_cap);

/// beta = c_beta * d * H * sqrt(log(d * H / (delta * epsilon))).
double theoretical_beta(int d, int H, double epsilon, double delta, double c_beta = 0.5);

}  // namespace derl
