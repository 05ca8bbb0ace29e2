#pragma once

#include <cstdint>
#include <functional>

#include "derl/mdp.hpp"
#include "derl/rng.hpp"

namespace derl {

/// Action chooser consulted once per visited state; may use the episode's rng
/// (e.g. for a uniform tail beyond a deterministic prefix).
using ActionChooser = std::function<int(int h, int s, Rng& rng)>;

/// Sample one episode of at most h_stop layers (h_stop <= H). The trajectory
/// records (h, s, a, r, s_next) per step; s_next is -1 when layer H-1 ends
/// the episode.
Trajectory sample_episode_with(const LinearMdpInstance& m, const ActionChooser& choose,
                               Rng& rng, int h_stop);

/// Episode under a Policy; a mixture member is drawn once up front.
Trajectory sample_episode(const LinearMdpInstance& m, const Policy& p, Rng& rng);

/// N trajectories under per-trajectory sub-streams substream(seed, deployment, n).
/// Results are indexed by n, so parallel workers cannot perturb them.
std::vector<Trajectory> sample_batch(const LinearMdpInstance& m, const Policy& p, int N,
                                     std::uint64_t seed, std::uint64_t deployment,
                                     int workers = 0, int h_stop = -1);

/// As sample_batch, but with an arbitrary chooser (shared across episodes;
/// must be a pure function of (h, s, rng) so it is safe to call concurrently).
std::vector<Trajectory> sample_batch_with(const LinearMdpInstance& m,
                                          const ActionChooser& choose, int N,
                                          std::uint64_t seed, std::uint64_t deployment,
                                          int workers = 0, int h_stop = -1);

}  // namespace derl
