#include "derl/sampling.hpp"

#include "derl/parallel.hpp"

namespace derl {

namespace {

int draw_next_state(const LinearMdpInstance& m, int h, int s, int a, Rng& rng) {
    return rng.categorical(m.transition_cdf(h, s, a));
}

int draw_init_state(const LinearMdpInstance& m, Rng& rng) {
    int fixed = m.init_state();
    if (fixed >= 0) return fixed;
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t s = 0; s + 1 < m.init.size(); ++s) {
        acc += m.init[s];
        if (u < acc) return static_cast<int>(s);
    }
    return static_cast<int>(m.init.size()) - 1;
}

}  // namespace

Trajectory sample_episode_with(const LinearMdpInstance& m, const ActionChooser& choose,
                               Rng& rng, int h_stop) {
    if (!m.finalized()) throw config_error("sampling: instance not finalized");
    if (h_stop < 0) h_stop = m.H;
    if (h_stop < 1 || h_stop > m.H) throw config_error("sampling: h_stop out of range");
    Trajectory traj;
    traj.steps.reserve(h_stop);
    int s = draw_init_state(m, rng);
    for (int h = 0; h < h_stop; ++h) {
        int a = choose(h, s, rng);
        if (a < 0 || a >= m.actions_at(h, s))
            throw config_error("sampling: chooser returned out-of-range action");
        double r = m.reward(h, s, a);
        int s_next = (h + 1 < m.H) ? draw_next_state(m, h, s, a, rng) : -1;
        traj.steps.push_back({h, s, a, r, s_next});
        if (s_next < 0) break;
        s = s_next;
    }
    return traj;
}

Trajectory sample_episode(const LinearMdpInstance& m, const Policy& p, Rng& rng) {
    const DeterministicPolicy& member =
        p.is_deterministic() ? p.members[0]
                             : p.members[rng.uniform_int(static_cast<int>(p.members.size()))];
    return sample_episode_with(
        m, [&member](int h, int s, Rng&) { return member.actions[h][s]; }, rng, m.H);
}

std::vector<Trajectory> sample_batch(const LinearMdpInstance& m, const Policy& p, int N,
                                     std::uint64_t seed, std::uint64_t deployment, int workers,
                                     int h_stop) {
    validate_policy(m, p);
    if (h_stop < 0) h_stop = m.H;
    std::vector<Trajectory> out(N);
    parallel_for(
        N,
        [&](int n) {
            Rng rng = Rng::substream(seed, deployment, static_cast<std::uint64_t>(n));
            const DeterministicPolicy& member =
                p.is_deterministic()
                    ? p.members[0]
                    : p.members[rng.uniform_int(static_cast<int>(p.members.size()))];
            out[n] = sample_episode_with(
                m, [&member](int h, int s, Rng&) { return member.actions[h][s]; }, rng,
                h_stop);
        },
        workers);
    return out;
}

std::vector<Trajectory> sample_batch_with(const LinearMdpInstance& m,
                                          const ActionChooser& choose, int N,
                                          std::uint64_t seed, std::uint64_t deployment,
                                          int workers, int h_stop) {
    if (h_stop < 0) h_stop = m.H;
    std::vector<Trajectory> out(N);
    parallel_for(
        N,
        [&](int n) {
            Rng rng = Rng::substream(seed, deployment, static_cast<std::uint64_t>(n));
            out[n] = sample_episode_with(m, choose, rng, h_stop);
        },
        workers);
    return out;
}

}  // namespace derl
