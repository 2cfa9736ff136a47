#include "lentil/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace lentil {

namespace {
// Nominal lentil footprint on the belt; only the rendered box size uses it.
constexpr double kGrainSizeMm = 5.0;
// Tolerance for window-containment checks; covers pixel round-trip noise in
// the scheduler's arithmetic, seven orders below the pulse width.
constexpr double kTimeEps = 1e-9;
}  // namespace

double quantize_time(double t) { return std::round(t * 1e9) / 1e9; }

std::string LogEvent::to_line() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", t);
  return std::string(buf) + "," + type + "," + std::to_string(grain_id) + "," +
         std::to_string(lane) + "," + detail;
}

std::vector<Grain> spawn_schedule(const LineConfig& cfg, const Mixture& mixture, Rng& rng) {
  int total = mixture_total(mixture);
  double total_mass = total * cfg.mean_grain_mass_g;
  if (total_mass > cfg.hopper_capacity_g) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "mixture mass %.1f g exceeds the %.0f g hopper capacity",
                  total_mass, cfg.hopper_capacity_g);
    throw ConfigError(buf);
  }

  std::vector<GrainClass> classes;
  classes.reserve(total);
  for (int c = 0; c < kClassCount; ++c) {
    for (int n = 0; n < mixture[c]; ++n) classes.push_back(class_from_index(c));
  }
  rng.shuffle(classes);

  std::vector<Grain> grains;
  grains.reserve(total);
  double t = 0.0;
  for (int i = 0; i < total; ++i) {
    Grain g;
    g.id = static_cast<std::uint64_t>(i);
    g.true_class = classes[i];
    g.lane = i % cfg.lane_count;
    g.cross_mm = cfg.lane_center_mm(g.lane) +
                 rng.uniform(-cfg.lane_pitch / 4.0, cfg.lane_pitch / 4.0);
    t += rng.exponential(cfg.feed_rate_grains_per_s);
    g.spawn_time_s = t;
    g.spawn_along_mm = 0.0;
    g.mass_g = cfg.mean_grain_mass_g;
    grains.push_back(g);
  }
  return grains;
}

Simulation::Simulation(const LineConfig& cfg, std::vector<Grain> grains,
                       std::shared_ptr<const Classifier> classifier, std::uint64_t seed)
    : cfg_(cfg),
      cal_(make_calibration(cfg)),
      grains_(std::move(grains)),
      classifier_(std::move(classifier)),
      sensor_rng_(seed, 1),
      classify_rng_(seed, 2) {
  validate_or_throw(cfg_);
  if (!classifier_) throw std::invalid_argument("Simulation: null classifier");
  state_.resize(grains_.size());
  windows_.resize(cfg_.lane_count);
  for (std::size_t i = 0; i < grains_.size(); ++i) {
    const Grain& g = grains_[i];
    if (g.lane < 0 || g.lane >= cfg_.lane_count) {
      throw std::invalid_argument("Simulation: grain lane out of range");
    }
    push_event({g.spawn_time_s, EventType::FeedGrain, seq_++,
                static_cast<std::int64_t>(i), {}});
  }
  // The camera runs from t = 0 regardless of feed activity.
  push_event({0.0, EventType::FrameCapture, seq_++, -1, {}});
}

void Simulation::push_event(PendingEvent ev) {
  if (ev.t < now_ - 1e-12) {
    throw std::logic_error("Simulation: event scheduled in the past");
  }
  queue_.push(std::move(ev));
}

void Simulation::append_log(double t, const char* type, std::int64_t grain_id, int lane,
                            std::string detail) {
  log_.push_back({quantize_time(t), type, grain_id, lane, std::move(detail)});
}

void Simulation::schedule_valve_event(double t) {
  push_event({t, EventType::ValveFire, seq_++, -1, {-1, t, 0.0}});
}

void Simulation::fire_valve(const EjectionCommand& cmd) {
  if (cmd.nozzle < 0 || cmd.nozzle >= cfg_.lane_count) {
    throw std::invalid_argument("fire_valve: nozzle index out of range");
  }
  if (cmd.fire_at_s < now_ - 1e-12) {
    throw std::invalid_argument("fire_valve: fire time is in the past");
  }
  push_event({cmd.fire_at_s, EventType::ValveFire, seq_++, -1, cmd});
}

void Simulation::log_late_command(double now, const EjectionCommand& cmd) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "fire_at=%.9f", quantize_time(cmd.fire_at_s));
  append_log(now, "late_cmd", -1, cmd.nozzle, buf);
}

Frame Simulation::render_frame_at(double t, Rng& rng) const {
  Frame f;
  f.timestamp = t;
  const double half_w_px = (kGrainSizeMm / 2.0) / cal_.mm_per_px_cross;
  const double half_h_px = (kGrainSizeMm / 2.0) / cal_.mm_per_px_along;
  for (std::size_t i = 0; i < grains_.size(); ++i) {
    const Grain& g = grains_[i];
    const GrainState& st = state_[i];
    if (!st.fed || st.binned) continue;
    double along = grain_along_mm(g, t);
    if (along < 0.0 || along > cfg_.fov_along) continue;

    bool missed = rng.uniform() < cfg_.miss_prob;
    double nx = rng.gaussian(cfg_.pixel_noise_px);
    double ny = rng.gaussian(cfg_.pixel_noise_px);
    if (missed) continue;

    PxPoint c = belt_to_px({along, g.cross_mm}, cal_);
    c.x += nx;
    c.y += ny;
    if (c.x < 0.0 || c.x > cal_.image_width || c.y < 0.0 || c.y > cal_.image_height) {
      continue;  // noise pushed the center off the sensor
    }
    double hw = std::min({half_w_px, c.x, cal_.image_width - c.x});
    double hh = std::min({half_h_px, c.y, cal_.image_height - c.y});

    Logits z;
    for (int k = 0; k < kClassCount; ++k) {
      z[k] = std::log(std::max(st.outcome.class_probs[k], 1e-12));
    }
    Detection det;
    det.bbox = BBox::from_center(c.x, c.y, 2.0 * hw, 2.0 * hh);
    det.objectness = 1.0 - cfg_.miss_prob;
    det.class_probs = softmax(z);
    f.detections.push_back(det);
    f.truth_ids.push_back(g.id);
  }
  return f;
}

void Simulation::process(const PendingEvent& ev) {
  switch (ev.type) {
    case EventType::FeedGrain: {
      const Grain& g = grains_[ev.grain_idx];
      GrainState& st = state_[ev.grain_idx];
      st.fed = true;
      st.outcome = classifier_->classify(g.true_class, classify_rng_);
      append_log(ev.t, "feed", g.id, g.lane, class_name(g.true_class));
      double arrival = g.spawn_time_s + (ejection_plane_mm() - g.spawn_along_mm) / cfg_.belt_speed;
      push_event({arrival, EventType::GrainAtNozzle, seq_++, ev.grain_idx, {}});
      break;
    }
    case EventType::FrameCapture: {
      Frame f = render_frame_at(ev.t, sensor_rng_);
      append_log(ev.t, "frame", -1, -1, std::to_string(f.detections.size()));
      if (frame_cb_) frame_cb_(f);
      ++next_frame_;
      push_event({next_frame_ / cfg_.camera_fps, EventType::FrameCapture, seq_++, -1, {}});
      break;
    }
    case EventType::ValveFire: {
      std::vector<EjectionCommand> cmds;
      if (ev.cmd.nozzle >= 0) {
        cmds.push_back(ev.cmd);
      } else if (valve_poll_) {
        cmds = valve_poll_(ev.t);
      }
      for (const EjectionCommand& cmd : cmds) {
        if (cmd.nozzle < 0 || cmd.nozzle >= cfg_.lane_count) {
          throw std::invalid_argument("valve command names an invalid nozzle");
        }
        double start = cmd.fire_at_s + cfg_.valve_switch_s();
        windows_[cmd.nozzle].emplace_back(start, start + cmd.pulse_ms / 1000.0);
        char buf[48];
        std::snprintf(buf, sizeof(buf), "pulse_ms=%.3f", cmd.pulse_ms);
        append_log(ev.t, "valve_fire", -1, cmd.nozzle, buf);
        if (sink_) sink_->fire(cmd);
      }
      break;
    }
    case EventType::GrainAtNozzle: {
      const Grain& g = grains_[ev.grain_idx];
      GrainState& st = state_[ev.grain_idx];
      bool hit = false;
      for (const auto& w : windows_[g.lane]) {
        if (ev.t >= w.first - kTimeEps && ev.t <= w.second + kTimeEps) {
          hit = true;
          break;
        }
      }
      st.ejected = hit;
      append_log(ev.t, "at_nozzle", g.id, g.lane, hit ? "eject" : "pass");
      push_event({ev.t, EventType::GrainBinned, seq_++, ev.grain_idx, {}});
      break;
    }
    case EventType::GrainBinned: {
      const Grain& g = grains_[ev.grain_idx];
      GrainState& st = state_[ev.grain_idx];
      st.binned = true;
      bins_.push_back({g.id, g.true_class, st.ejected, g.lane, quantize_time(ev.t)});
      append_log(ev.t, "binned", g.id, g.lane, st.ejected ? "eject" : "accept");
      break;
    }
  }
}

std::vector<LogEvent> Simulation::advance(double until) {
  if (until < now_ - 1e-12) {
    throw std::logic_error("Simulation::advance: target time is in the past");
  }
  std::size_t log_start = log_.size();
  while (!queue_.empty() && queue_.top().t <= until) {
    PendingEvent ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    process(ev);
  }
  now_ = std::max(now_, until);
  return {log_.begin() + log_start, log_.end()};
}

void Simulation::run_to_completion() {
  while (!all_binned()) {
    if (queue_.empty()) {
      throw std::logic_error("Simulation: event queue drained with grains still on the belt");
    }
    PendingEvent ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    process(ev);
  }
}

}  // namespace lentil
