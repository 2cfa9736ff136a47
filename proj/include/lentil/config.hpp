#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lentil/classifier.hpp"
#include "lentil/geometry.hpp"
#include "lentil/grain_class.hpp"

namespace lentil {

// A bad config, scenario or path is the operator's problem; the CLI maps this
// to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every physical and timing constant of the line. Field names double as the
// keys of the config/scenario file format.
struct LineConfig {
  double belt_speed = 59.0;              // mm/s
  double belt_length = 400.0;            // mm
  int lane_count = 5;
  double lane_pitch = 20.0;              // mm
  double positioning_width = 100.0;      // mm
  double camera_fps = 40.0;
  double fov_along = 100.0;              // mm of belt visible to the camera
  double camera_height = 96.0;           // mm, informational
  double firing_line_mm = 120.0;         // FOV origin -> nozzle impact point
  double nozzle_offset_mm = default_nozzle_offset_mm();  // trigger/nozzle misalignment
  double valve_switch_ms = 1.0;
  double pulse_ms = 4.0;
  double mean_grain_mass_g = 0.055;
  double feed_rate_grains_per_s = 100.0 / 41.25;
  double detection_latency_ms = 0.0;
  double pixel_noise_px = 0.0;
  double miss_prob = 0.0;                // per-frame missed-detection probability
  double hopper_capacity_g = 300.0;

  // Nozzles are tilted 20 degrees off vertical; at the default camera height
  // that displaces the impact point ~34.94 mm downstream of the trigger line.
  static double default_nozzle_offset_mm();

  double frame_interval_s() const { return 1.0 / camera_fps; }
  double valve_switch_s() const { return valve_switch_ms / 1000.0; }
  double pulse_s() const { return pulse_ms / 1000.0; }
  double detection_latency_s() const { return detection_latency_ms / 1000.0; }
  double lane_center_mm(int lane) const { return lane_pitch * (lane + 0.5); }

  // Empty when the config is usable; otherwise one message per violation.
  std::vector<std::string> violations() const;
};

// Throws ConfigError listing every violation.
void validate_or_throw(const LineConfig& cfg);

Calibration make_calibration(const LineConfig& cfg);

// key = value file with '#' comments; keys must match LineConfig field names,
// unknown keys are an error.
LineConfig load_line_config(const std::string& path);

// Applies "key = value" to a config. Returns false for an unknown key.
bool set_config_field(LineConfig& cfg, const std::string& key, const std::string& value);

// Canonical serialization (also the config-file format); feeds the report digest.
std::string serialize_config(const LineConfig& cfg);

struct ClassifierChoice {
  enum class Kind { Oracle, Confusion } kind = Kind::Confusion;
  std::string matrix_path;  // empty -> built-in calibrated fixture
};

// A scenario bundles a mixture, a seed, a classifier choice and any number of
// LineConfig overrides.
struct Scenario {
  Mixture mixture = standard_mixture();
  std::uint64_t seed = 0;
  ClassifierChoice classifier;
  std::vector<std::pair<std::string, std::string>> config_overrides;

  void apply_overrides(LineConfig& cfg) const;
  std::shared_ptr<const Classifier> make_classifier() const;
};

Scenario load_scenario(const std::string& path);

}  // namespace lentil
