#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lentil/command.hpp"
#include "lentil/config.hpp"
#include "lentil/geometry.hpp"
#include "lentil/tracker.hpp"

namespace lentil {

struct EjectionPlan {
  enum class Kind { Keep, Fire, Late } kind = Kind::Keep;
  EjectionCommand cmd;  // meaningful for Fire and Late
};

// Decides whether and when to fire for a finalized track. Good grains are
// kept. Otherwise the nozzle is the nearest lane center and
//   fire_at = t_ref + (firing_line + nozzle_offset - along(t_ref)) / belt_speed
//             - valve_switch,
// with t_ref the last observation, so the active window opens exactly when
// the grain reaches the impact point. A fire_at already in the past is
// reported as Late; the caller counts it and drops the command.
EjectionPlan plan_ejection(const Track& track, const LineConfig& cfg, double now);

// Pending commands ordered by fire time. Two commands on the same nozzle
// whose active windows overlap are merged into one whose pulse spans both.
class CommandQueue {
 public:
  void push(const EjectionCommand& cmd);
  // All commands with fire_at <= now, in nondecreasing fire_at order.
  std::vector<EjectionCommand> pop_due(double now);
  std::optional<double> next_fire_time() const;
  std::size_t size() const { return size_; }

 private:
  // nozzle -> (fire_at -> window end on the fire_at axis, i.e. fire + pulse)
  std::map<int, std::map<double, double>> per_nozzle_;
  std::size_t size_ = 0;
};

// Writes one "fire_at_s,nozzle,pulse_ms" line per command, for replaying a
// run against recorded hardware traffic.
class FileCommandSink final : public CommandSink {
 public:
  explicit FileCommandSink(const std::string& path);
  void fire(const EjectionCommand& cmd) override;

 private:
  std::ofstream out_;
};

// The control core: consumes frames, maintains tracks, decides classes once a
// grain leaves the FOV and queues valve commands. A frame producer and a
// command consumer may call in from different threads; all entry points
// serialize on one mutex and none of them blocks on I/O.
class SortController {
 public:
  SortController(const LineConfig& cfg, const Calibration& cal);

  struct FrameResult {
    std::vector<EjectionCommand> planned;  // queued this frame (pre-merge)
    std::vector<EjectionCommand> late;     // dropped: fire time already passed
  };

  // `now` is the controller clock at processing time (frame timestamp plus
  // detection latency).
  FrameResult on_frame(const std::vector<Detection>& detections, double frame_t,
                       double now);

  std::vector<EjectionCommand> pop_due(double now);
  std::optional<double> next_fire_time() const;

  int late_count() const;
  const std::vector<Track>& tracks() const { return tracks_; }

 private:
  LineConfig cfg_;
  Calibration cal_;
  mutable std::mutex mu_;
  std::vector<Track> tracks_;
  CommandQueue queue_;
  std::uint64_t next_track_id_ = 0;
  int late_count_ = 0;
};

}  // namespace lentil
