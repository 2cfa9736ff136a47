#include "lentil/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace lentil {

namespace {
// Stock suppression threshold for the detection stage.
constexpr double kNmsIouThreshold = 0.5;
}

EjectionPlan plan_ejection(const Track& track, const LineConfig& cfg, double now) {
  if (track.history.empty()) {
    throw std::logic_error("plan_ejection: track has no observations");
  }
  GrainClass decided = track.decided_class ? *track.decided_class : decide_class(track);
  if (decided == GrainClass::Good) {
    return {EjectionPlan::Kind::Keep, {}};
  }

  double cross = track.last().cross_mm;
  int nozzle = 0;
  double best = std::abs(cross - cfg.lane_center_mm(0));
  for (int i = 1; i < cfg.lane_count; ++i) {
    double d = std::abs(cross - cfg.lane_center_mm(i));
    if (d < best) {
      best = d;
      nozzle = i;
    }
  }

  double t_ref = track.last().t;
  double along_ref = track.last().along_mm;
  double fire_at = t_ref +
                   (cfg.firing_line_mm + cfg.nozzle_offset_mm - along_ref) / cfg.belt_speed -
                   cfg.valve_switch_s();

  EjectionCommand cmd{nozzle, fire_at, cfg.pulse_ms};
  if (fire_at < now) {
    return {EjectionPlan::Kind::Late, cmd};
  }
  return {EjectionPlan::Kind::Fire, cmd};
}

void CommandQueue::push(const EjectionCommand& cmd) {
  if (cmd.nozzle < 0) {
    throw std::invalid_argument("CommandQueue: negative nozzle index");
  }
  auto& lane = per_nozzle_[cmd.nozzle];
  double fire = cmd.fire_at_s;
  double end = cmd.fire_at_s + cmd.pulse_ms / 1000.0;

  // Absorb every queued command on this nozzle whose window overlaps ours.
  // The valve-switch latency shifts all windows equally, so overlap can be
  // tested on the fire_at axis directly.
  auto it = lane.lower_bound(fire);
  if (it != lane.begin()) {
    auto prev = std::prev(it);
    if (prev->second >= fire) it = prev;
  }
  while (it != lane.end() && it->first <= end) {
    fire = std::min(fire, it->first);
    end = std::max(end, it->second);
    it = lane.erase(it);
    --size_;
  }
  lane.emplace(fire, end);
  ++size_;
}

std::vector<EjectionCommand> CommandQueue::pop_due(double now) {
  std::vector<EjectionCommand> due;
  for (auto& [nozzle, lane] : per_nozzle_) {
    auto it = lane.begin();
    while (it != lane.end() && it->first <= now) {
      due.push_back({nozzle, it->first, (it->second - it->first) * 1000.0});
      it = lane.erase(it);
      --size_;
    }
  }
  std::sort(due.begin(), due.end(), [](const EjectionCommand& a, const EjectionCommand& b) {
    if (a.fire_at_s != b.fire_at_s) return a.fire_at_s < b.fire_at_s;
    return a.nozzle < b.nozzle;
  });
  return due;
}

std::optional<double> CommandQueue::next_fire_time() const {
  std::optional<double> next;
  for (const auto& [nozzle, lane] : per_nozzle_) {
    if (!lane.empty() && (!next || lane.begin()->first < *next)) {
      next = lane.begin()->first;
    }
  }
  return next;
}

FileCommandSink::FileCommandSink(const std::string& path) : out_(path) {
  if (!out_) {
    throw std::runtime_error("cannot open command sink file: " + path);
  }
}

void FileCommandSink::fire(const EjectionCommand& cmd) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.9f,%d,%.3f\n", cmd.fire_at_s, cmd.nozzle, cmd.pulse_ms);
  out_ << buf;
}

SortController::SortController(const LineConfig& cfg, const Calibration& cal)
    : cfg_(cfg), cal_(cal) {}

SortController::FrameResult SortController::on_frame(const std::vector<Detection>& detections,
                                                     double frame_t, double now) {
  std::lock_guard<std::mutex> lock(mu_);

  std::vector<Detection> kept = nms(detections, kNmsIouThreshold);
  std::vector<FrameObservation> obs;
  obs.reserve(kept.size());
  for (const Detection& d : kept) {
    BeltPoint bp = px_to_belt({d.bbox.center_x(), d.bbox.center_y()}, cal_);
    obs.push_back({bp.along_mm, bp.cross_mm, d.class_probs});
  }

  associate(tracks_, obs, frame_t, cfg_, next_track_id_);

  FrameResult result;
  for (Track& tr : tracks_) {
    if (tr.state != TrackState::Active) continue;
    if (tr.predicted_along(frame_t, cfg_.belt_speed) < cfg_.fov_along) continue;
    // The grain has left the camera view: decide once, plan once.
    tr.decided_class = decide_class(tr);
    tr.state = TrackState::Finalized;
    EjectionPlan plan = plan_ejection(tr, cfg_, now);
    switch (plan.kind) {
      case EjectionPlan::Kind::Keep:
        break;
      case EjectionPlan::Kind::Fire:
        queue_.push(plan.cmd);
        result.planned.push_back(plan.cmd);
        break;
      case EjectionPlan::Kind::Late:
        ++late_count_;
        result.late.push_back(plan.cmd);
        break;
    }
  }
  return result;
}

std::vector<EjectionCommand> SortController::pop_due(double now) {
  std::lock_guard<std::mutex> lock(mu_);
  return queue_.pop_due(now);
}

std::optional<double> SortController::next_fire_time() const {
  std::lock_guard<std::mutex> lock(mu_);
  return queue_.next_fire_time();
}

int SortController::late_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return late_count_;
}

}  // namespace lentil
