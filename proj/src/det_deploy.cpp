#include "derl/det_deploy.hpp"

#include <chrono>
#include <cmath>

#include "derl/dp.hpp"
#include "derl/sampling.hpp"

namespace derl {

namespace {

struct LoopConfig {
    bool reward_free = false;
    double epsilon = 0.0;
    int c_K = 0;
    int N = 0;
    double beta = 0.0;
    std::uint64_t seed = 0;
    bool log_exact = false;
    int workers = 0;
};

// Shared frontier loop for the reward-aware and reward-free variants; they
// differ only in the backup reward and the advance threshold.
DetDeployResult run_frontier_loop(const LinearMdpInstance& m, const RewardSpec& reward,
                                  const LoopConfig& cfg) {
    if (!m.finalized()) throw config_error("deploy: instance not finalized");
    if (cfg.N < 1) throw config_error("deploy: N must be positive");
    if (cfg.c_K < 1) throw config_error("deploy: c_K must be positive");
    if (cfg.epsilon <= 0.0) throw config_error("deploy: epsilon must be positive");
    if (cfg.beta <= 0.0) throw config_error("deploy: beta must be positive");
    reward.validate_for(m);

    const int H = m.H;
    const long budget = static_cast<long>(cfg.c_K) * m.d * H + 1;
    const double advance_denom =
        cfg.reward_free ? (4.0 * H + 2.0) * H : 2.0 * H;

    DetDeployResult out;
    out.data.assign(H, {});
    out.accumulators.assign(H, CovarianceAccumulator(m.d));

    int h_k = 1;
    for (long k = 1; k <= budget; ++k) {
        auto t0 = std::chrono::steady_clock::now();

        // Optimistic backup over the first h_k layers from deployments 1..k-1.
        std::function<double(int, int, int)> backup_reward;
        if (cfg.reward_free) {
            const auto& accs = out.accumulators;
            double beta = cfg.beta;
            backup_reward = [&m, &accs, beta, H](int h, int s, int a) {
                return bonus_value(accs[h], m.features(h, s, a), beta,
                                   static_cast<double>(H)) / H;
            };
        } else {
            backup_reward = [&m, &reward](int h, int s, int a) { return reward(m, h, s, a); };
        }
        auto [q, greedy] = lsvi_backup(m, out.data, out.accumulators, backup_reward, h_k,
                                       cfg.beta, static_cast<double>(H),
                                       static_cast<double>(H));

        double v1 = 0.0;
        for (int s = 0; s < m.num_states(0); ++s) v1 += m.init[s] * q.v(m, 0, s);

        // Deploy the greedy prefix with a per-step uniform completion.
        ActionChooser chooser = [&greedy, h_k, &m](int h, int s, Rng& rng) {
            if (h < h_k) return greedy.actions[h][s];
            return rng.uniform_int(m.actions_at(h, s));
        };
        std::vector<Trajectory> batch = sample_batch_with(
            m, chooser, cfg.N, cfg.seed, static_cast<std::uint64_t>(k), cfg.workers);

        // Realized uncertainty against the pre-deployment accumulators.
        double delta_sum = 0.0;
        for (const Trajectory& traj : batch)
            for (const TrajectoryStep& st : traj.steps) {
                if (st.h >= h_k) break;
                delta_sum += std::sqrt(
                    out.accumulators[st.h].quad_inv(m.features(st.h, st.s, st.a)));
            }
        const double delta_k = 2.0 * cfg.beta * delta_sum / cfg.N;

        // Only now does the new batch join the shared dataset.
        for (const Trajectory& traj : batch)
            for (const TrajectoryStep& st : traj.steps) {
                out.data[st.h].push_back({st.s, st.a, st.s_next, st.r});
                out.accumulators[st.h].absorb(m.features(st.h, st.s, st.a));
            }

        const double threshold = cfg.epsilon * h_k / advance_denom;
        const bool small = delta_k < threshold;
        const bool done = small && h_k == H;

        DeploymentRecord rec;
        rec.k = static_cast<int>(k);
        rec.h_k = h_k;
        rec.delta_k = delta_k;
        rec.frontier_advanced = small;
        rec.num_trajectories = cfg.N;
        rec.v1_backup = v1;
        rec.greedy = greedy;
        if (cfg.log_exact) {
            Policy prefix = Policy::deterministic(greedy);
            rec.j_pi_trunc = evaluate_policy_exact(m, prefix, reward, h_k);
            rec.j_opt_trunc = optimal_value_exact(m, reward, h_k).value;
        }
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.log.records.push_back(std::move(rec));

        if (done) {
            out.policy = Policy::deterministic(greedy);
            out.log.terminal = DeploymentLog::Terminal::ReturnedPolicy;
            return out;
        }
        if (small) ++h_k;
        if (k == budget) out.policy = Policy::deterministic(greedy);
    }
    out.log.terminal = DeploymentLog::Terminal::BudgetExhausted;
    return out;
}

}  // namespace

DetDeployResult run_deterministic_derl(const LinearMdpInstance& m, const RewardSpec& reward,
                                       double epsilon, double delta, int c_K, int N,
                                       double beta, std::uint64_t seed, bool log_exact,
                                       int workers) {
    LoopConfig cfg;
    cfg.reward_free = false;
    cfg.epsilon = epsilon;
    cfg.c_K = c_K;
    cfg.N = N;
    cfg.beta = beta > 0.0 ? beta : theoretical_beta(m.d, m.H, epsilon, delta);
    cfg.seed = seed;
    cfg.log_exact = log_exact;
    cfg.workers = workers;
    return run_frontier_loop(m, reward, cfg);
}

RewardFreeResult run_reward_free_exploration(const LinearMdpInstance& m, double epsilon,
                                             double delta, int c_K, int N, double beta,
                                             std::uint64_t seed, bool log_exact,
                                             int workers) {
    LoopConfig cfg;
    cfg.reward_free = true;
    cfg.epsilon = epsilon;
    cfg.c_K = c_K;
    cfg.N = N;
    cfg.beta = beta > 0.0 ? beta : theoretical_beta(m.d, m.H, epsilon, delta);
    cfg.seed = seed;
    cfg.log_exact = log_exact;
    cfg.workers = workers;
    DetDeployResult full = run_frontier_loop(m, RewardSpec::native(), cfg);
    RewardFreeResult out;
    out.log = std::move(full.log);
    out.data = std::move(full.data);
    out.accumulators = std::move(full.accumulators);
    return out;
}

PlanResult plan_from_dataset(const LinearMdpInstance& m, const LayeredDataset& data,
                             const RewardSpec& reward, int h_tilde, double beta) {
    if (!m.finalized()) throw config_error("plan: instance not finalized");
    if (h_tilde < 1 || h_tilde > m.H) throw config_error("plan: h_tilde out of range");
    if (beta <= 0.0) throw config_error("plan: beta must be positive");
    reward.validate_for(m);
    if (static_cast<int>(data.size()) < h_tilde)
        throw config_error("plan: dataset must cover every layer < h_tilde");

    std::vector<CovarianceAccumulator> accs;
    accs.reserve(h_tilde);
    for (int h = 0; h < h_tilde; ++h) {
        if (data[h].empty()) throw config_error("plan: empty dataset at a needed layer");
        CovarianceAccumulator acc(m.d);
        for (const LayerSample& smp : data[h]) acc.absorb(m.features(h, smp.s, smp.a));
        accs.push_back(std::move(acc));
    }
    auto backup_reward = [&m, &reward](int h, int s, int a) { return reward(m, h, s, a); };
    auto [q, greedy] = lsvi_backup(m, data, accs, backup_reward, h_tilde, beta,
                                   static_cast<double>(h_tilde),
                                   static_cast<double>(h_tilde));
    PlanResult out;
    double v1 = 0.0;
    for (int s = 0; s < m.num_states(0); ++s) v1 += m.init[s] * q.v(m, 0, s);
    out.v1 = v1;
    out.policy = Policy::deterministic(std::move(greedy));
    return out;
}

}  // namespace derl
