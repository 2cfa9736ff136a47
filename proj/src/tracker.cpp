#include "lentil/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lentil {

void associate(std::vector<Track>& tracks, const std::vector<FrameObservation>& obs,
               double frame_t, const LineConfig& cfg, std::uint64_t& next_track_id) {
  const double gate = cfg.lane_pitch / 2.0;

  struct Pair {
    double dist;
    std::size_t track;
    std::size_t obs;
  };
  std::vector<Pair> pairs;
  std::vector<std::size_t> active;
  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    if (tracks[ti].state != TrackState::Active) continue;
    active.push_back(ti);
    double pred_along = tracks[ti].predicted_along(frame_t, cfg.belt_speed);
    double pred_cross = tracks[ti].last().cross_mm;
    for (std::size_t oi = 0; oi < obs.size(); ++oi) {
      double d = std::hypot(obs[oi].along_mm - pred_along, obs[oi].cross_mm - pred_cross);
      if (d < gate) pairs.push_back({d, ti, oi});
    }
  }
  // Older track (smaller id) wins a distance tie.
  std::sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (tracks[a.track].id != tracks[b.track].id) return tracks[a.track].id < tracks[b.track].id;
    return a.obs < b.obs;
  });

  std::vector<bool> track_used(tracks.size(), false);
  std::vector<bool> obs_used(obs.size(), false);
  for (const Pair& p : pairs) {
    if (track_used[p.track] || obs_used[p.obs]) continue;
    track_used[p.track] = true;
    obs_used[p.obs] = true;
    Track& tr = tracks[p.track];
    tr.history.push_back({frame_t, obs[p.obs].along_mm, obs[p.obs].cross_mm,
                          obs[p.obs].class_probs});
    tr.missed_frames = 0;
  }

  for (std::size_t ti : active) {
    if (track_used[ti]) continue;
    Track& tr = tracks[ti];
    if (tr.predicted_along(frame_t, cfg.belt_speed) <= cfg.fov_along) {
      if (++tr.missed_frames > 3) tr.state = TrackState::Expired;
    }
    // Past the FOV the track just waits for the caller to finalize it.
  }

  for (std::size_t oi = 0; oi < obs.size(); ++oi) {
    if (obs_used[oi]) continue;
    Track tr;
    tr.id = next_track_id++;
    tr.history.push_back({frame_t, obs[oi].along_mm, obs[oi].cross_mm, obs[oi].class_probs});
    tracks.push_back(std::move(tr));
  }
}

GrainClass decide_class(const Track& track) {
  if (track.history.empty()) {
    throw std::logic_error("decide_class: track has no observations");
  }
  std::array<int, kClassCount> votes{};
  std::array<int, kClassCount> last_seen{};
  last_seen.fill(-1);
  for (std::size_t i = 0; i < track.history.size(); ++i) {
    const auto& probs = track.history[i].class_probs;
    int arg = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    ++votes[arg];
    last_seen[arg] = static_cast<int>(i);
  }
  int best = 0;
  for (int c = 1; c < kClassCount; ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && last_seen[c] > last_seen[best])) {
      best = c;
    }
  }
  return class_from_index(best);
}

}  // namespace lentil
