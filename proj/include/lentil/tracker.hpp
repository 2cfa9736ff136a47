#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "lentil/config.hpp"
#include "lentil/geometry.hpp"
#include "lentil/grain_class.hpp"

namespace lentil {

struct TrackObservation {
  double t = 0.0;
  double along_mm = 0.0;
  double cross_mm = 0.0;
  std::array<double, kClassCount> class_probs{};
};

enum class TrackState { Active, Finalized, Expired };

// Cross-frame identity of one grain. Position is predicted forward at the
// configured belt speed (the controller commands the speed, so there is
// nothing to estimate).
struct Track {
  std::uint64_t id = 0;
  std::vector<TrackObservation> history;
  TrackState state = TrackState::Active;
  std::optional<GrainClass> decided_class;
  int missed_frames = 0;

  const TrackObservation& last() const { return history.back(); }
  double predicted_along(double t, double belt_speed) const {
    return last().along_mm + belt_speed * (t - last().t);
  }
};

// A frame observation already mapped to belt coordinates.
struct FrameObservation {
  double along_mm = 0.0;
  double cross_mm = 0.0;
  std::array<double, kClassCount> class_probs{};
};

// Greedy nearest-match association with gate radius lane_pitch/2; ties go to
// the older track. Unmatched observations spawn new tracks; active tracks
// left unmatched for more than 3 consecutive frames while still inside the
// FOV expire.
void associate(std::vector<Track>& tracks, const std::vector<FrameObservation>& obs,
               double frame_t, const LineConfig& cfg, std::uint64_t& next_track_id);

// Majority vote over the per-frame argmax classes; a tie goes to the class
// seen most recently. Throws on an empty history.
GrainClass decide_class(const Track& track);

}  // namespace lentil
