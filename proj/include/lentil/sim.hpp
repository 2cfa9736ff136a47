#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include "lentil/classifier.hpp"
#include "lentil/command.hpp"
#include "lentil/config.hpp"
#include "lentil/geometry.hpp"
#include "lentil/grain_class.hpp"
#include "lentil/rng.hpp"

namespace lentil {

struct Grain {
  std::uint64_t id = 0;
  GrainClass true_class = GrainClass::Good;
  int lane = 0;
  double cross_mm = 0.0;      // absolute cross-belt position
  double spawn_time_s = 0.0;
  double spawn_along_mm = 0.0;
  double mass_g = 0.0;
};

// One camera frame. truth_ids pairs each detection with the grain that
// produced it; it exists for validation and tests only and must never feed
// the control path.
struct Frame {
  double timestamp = 0.0;
  std::vector<Detection> detections;
  std::vector<std::uint64_t> truth_ids;
};

struct BinRecord {
  std::uint64_t grain_id = 0;
  GrainClass true_class = GrainClass::Good;
  bool ejected = false;  // false -> accept stream, true -> eject bin of `lane`
  int lane = 0;
  double exit_time_s = 0.0;
};

enum class EventType : int {
  FeedGrain = 0,
  FrameCapture = 1,
  ValveFire = 2,
  GrainAtNozzle = 3,
  GrainBinned = 4,
};

struct LogEvent {
  double t = 0.0;
  std::string type;
  std::int64_t grain_id = -1;
  int lane = -1;
  std::string detail;

  std::string to_line() const;  // "time_s,event_type,grain_id,lane,detail"
};

// Recorded times are snapped to a 1 ns grid so that a formatted log line
// parses back to the exact double it was written from.
double quantize_time(double t);

// Round-robin lane assignment with uniform cross jitter and exponential
// inter-arrival times; class order is shuffled by the seed. Throws when the
// mixture mass exceeds the hopper capacity.
std::vector<Grain> spawn_schedule(const LineConfig& cfg, const Mixture& mixture, Rng& rng);

// Deterministic discrete-event simulation of the line. Events at equal
// timestamps are ordered FeedGrain, FrameCapture, ValveFire, GrainAtNozzle,
// GrainBinned, then by insertion sequence, so a (config, grains, seed) triple
// fixes the event log byte for byte.
class Simulation {
 public:
  Simulation(const LineConfig& cfg, std::vector<Grain> grains,
             std::shared_ptr<const Classifier> classifier, std::uint64_t seed);

  // Invoked at every frame capture, after the frame is logged.
  void set_frame_callback(std::function<void(const Frame&)> cb) { frame_cb_ = std::move(cb); }
  // Polled at each scheduled valve event; returns commands due at that time.
  void set_valve_poll(std::function<std::vector<EjectionCommand>(double)> poll) {
    valve_poll_ = std::move(poll);
  }
  void set_command_sink(CommandSink* sink) { sink_ = sink; }

  // Schedules a poll of the command source at time t (>= now).
  void schedule_valve_event(double t);

  // Schedules one concrete valve actuation; the active window opens at
  // fire_at + valve_switch. Throws for a past fire time or a bad nozzle.
  void fire_valve(const EjectionCommand& cmd);

  void log_late_command(double now, const EjectionCommand& cmd);

  // Sensor model: every grain inside the FOV yields one detection whose box
  // center is the calibrated projection of its belt position plus gaussian
  // pixel noise; boxes are shrunk symmetrically at image edges so the center
  // stays on the grain. Missed detections are omitted.
  Frame render_frame_at(double t, Rng& rng) const;

  // Processes all events up to `until` (inclusive) and returns the log
  // records emitted. Throws if `until` is in the past.
  std::vector<LogEvent> advance(double until);

  // Runs until every grain is binned.
  void run_to_completion();

  double now() const { return now_; }
  double grain_along_mm(const Grain& g, double t) const {
    return g.spawn_along_mm + cfg_.belt_speed * (t - g.spawn_time_s);
  }
  // Belt distance from spawn to the nozzle impact point.
  double ejection_plane_mm() const { return cfg_.firing_line_mm + cfg_.nozzle_offset_mm; }

  const LineConfig& config() const { return cfg_; }
  const Calibration& calibration() const { return cal_; }
  const std::vector<Grain>& grains() const { return grains_; }
  const std::vector<BinRecord>& bin_records() const { return bins_; }
  const std::vector<LogEvent>& event_log() const { return log_; }
  bool all_binned() const { return bins_.size() == grains_.size(); }

 private:
  struct PendingEvent {
    double t;
    EventType type;
    std::uint64_t seq;
    std::int64_t grain_idx;   // FeedGrain / GrainAtNozzle / GrainBinned
    EjectionCommand cmd;      // ValveFire with nozzle >= 0: direct actuation
  };
  struct EventAfter {
    bool operator()(const PendingEvent& a, const PendingEvent& b) const {
      if (a.t != b.t) return a.t > b.t;
      if (a.type != b.type) return static_cast<int>(a.type) > static_cast<int>(b.type);
      return a.seq > b.seq;
    }
  };

  void push_event(PendingEvent ev);
  void process(const PendingEvent& ev);
  void append_log(double t, const char* type, std::int64_t grain_id, int lane,
                  std::string detail);

  LineConfig cfg_;
  Calibration cal_;
  std::vector<Grain> grains_;
  std::shared_ptr<const Classifier> classifier_;

  struct GrainState {
    bool fed = false;
    bool binned = false;
    bool ejected = false;
    ClassifierOutcome outcome;
  };
  std::vector<GrainState> state_;

  Rng sensor_rng_;
  Rng classify_rng_;

  std::priority_queue<PendingEvent, std::vector<PendingEvent>, EventAfter> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t next_frame_ = 0;
  double now_ = 0.0;

  std::vector<std::vector<std::pair<double, double>>> windows_;  // per nozzle
  std::vector<BinRecord> bins_;
  std::vector<LogEvent> log_;

  std::function<void(const Frame&)> frame_cb_;
  std::function<std::vector<EjectionCommand>(double)> valve_poll_;
  CommandSink* sink_ = nullptr;
};

}  // namespace lentil
