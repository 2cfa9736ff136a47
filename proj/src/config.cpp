#include "lentil/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace lentil {

double LineConfig::default_nozzle_offset_mm() {
  return 96.0 * std::tan(20.0 * std::numbers::pi / 180.0);
}

std::vector<std::string> LineConfig::violations() const {
  std::vector<std::string> v;
  auto positive = [&](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      v.push_back(std::string(name) + " must be positive");
    }
  };
  auto nonneg = [&](double x, const char* name) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      v.push_back(std::string(name) + " must be nonnegative");
    }
  };
  positive(belt_speed, "belt_speed");
  positive(belt_length, "belt_length");
  if (lane_count <= 0) v.push_back("lane_count must be positive");
  positive(lane_pitch, "lane_pitch");
  positive(positioning_width, "positioning_width");
  positive(camera_fps, "camera_fps");
  positive(fov_along, "fov_along");
  positive(camera_height, "camera_height");
  positive(firing_line_mm, "firing_line_mm");
  nonneg(nozzle_offset_mm, "nozzle_offset_mm");
  positive(valve_switch_ms, "valve_switch_ms");
  positive(pulse_ms, "pulse_ms");
  positive(mean_grain_mass_g, "mean_grain_mass_g");
  positive(feed_rate_grains_per_s, "feed_rate_grains_per_s");
  nonneg(detection_latency_ms, "detection_latency_ms");
  nonneg(pixel_noise_px, "pixel_noise_px");
  positive(hopper_capacity_g, "hopper_capacity_g");
  if (!(miss_prob >= 0.0 && miss_prob < 1.0)) {
    v.push_back("miss_prob must lie in [0, 1)");
  }
  if (lane_count > 0 && std::abs(lane_count * lane_pitch - positioning_width) > 1e-9) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "lane_count*lane_pitch must equal positioning_width (%d*%g != %g)",
                  lane_count, lane_pitch, positioning_width);
    v.push_back(buf);
  }
  if (!(firing_line_mm > fov_along)) {
    v.push_back("firing_line_mm must exceed fov_along (the nozzles sit past the camera)");
  }
  return v;
}

void validate_or_throw(const LineConfig& cfg) {
  auto v = cfg.violations();
  if (v.empty()) return;
  std::string msg = "invalid line config:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw ConfigError(msg);
}

Calibration make_calibration(const LineConfig& cfg) {
  Calibration cal;
  cal.mm_per_px_along = cfg.fov_along / cal.image_height;
  cal.mm_per_px_cross = cfg.positioning_width / cal.image_width;
  cal.origin_px = {0.0, 0.0};
  return cal;
}

namespace {

// "snake_case_key = value"; '#' starts a comment. Returns false for blank lines.
bool parse_kv_line(const std::string& raw, std::string& key, std::string& value,
                   const std::string& path, int line_no) {
  std::string line = raw;
  auto hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  auto trim = [](std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    s = (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
  };
  trim(line);
  if (line.empty()) return false;
  auto eq = line.find('=');
  if (eq == std::string::npos) {
    throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
  }
  key = line.substr(0, eq);
  value = line.substr(eq + 1);
  trim(key);
  trim(value);
  if (key.empty() || value.empty()) {
    throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
  }
  return true;
}

double parse_double(const std::string& value, const std::string& key) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("value for '" + key + "' is not a number: " + value);
  }
  if (pos != value.size()) {
    throw ConfigError("value for '" + key + "' is not a number: " + value);
  }
  return v;
}

}  // namespace

bool set_config_field(LineConfig& cfg, const std::string& key, const std::string& value) {
  auto d = [&] { return parse_double(value, key); };
  if (key == "belt_speed") cfg.belt_speed = d();
  else if (key == "belt_length") cfg.belt_length = d();
  else if (key == "lane_count") cfg.lane_count = static_cast<int>(d());
  else if (key == "lane_pitch") cfg.lane_pitch = d();
  else if (key == "positioning_width") cfg.positioning_width = d();
  else if (key == "camera_fps") cfg.camera_fps = d();
  else if (key == "fov_along") cfg.fov_along = d();
  else if (key == "camera_height") cfg.camera_height = d();
  else if (key == "firing_line_mm") cfg.firing_line_mm = d();
  else if (key == "nozzle_offset_mm") cfg.nozzle_offset_mm = d();
  else if (key == "valve_switch_ms") cfg.valve_switch_ms = d();
  else if (key == "pulse_ms") cfg.pulse_ms = d();
  else if (key == "mean_grain_mass_g") cfg.mean_grain_mass_g = d();
  else if (key == "feed_rate_grains_per_s") cfg.feed_rate_grains_per_s = d();
  else if (key == "detection_latency_ms") cfg.detection_latency_ms = d();
  else if (key == "pixel_noise_px") cfg.pixel_noise_px = d();
  else if (key == "miss_prob") cfg.miss_prob = d();
  else if (key == "hopper_capacity_g") cfg.hopper_capacity_g = d();
  else return false;
  return true;
}

std::string serialize_config(const LineConfig& cfg) {
  std::ostringstream out;
  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    out << key << " = " << buf << "\n";
  };
  put("belt_speed", cfg.belt_speed);
  put("belt_length", cfg.belt_length);
  out << "lane_count = " << cfg.lane_count << "\n";
  put("lane_pitch", cfg.lane_pitch);
  put("positioning_width", cfg.positioning_width);
  put("camera_fps", cfg.camera_fps);
  put("fov_along", cfg.fov_along);
  put("camera_height", cfg.camera_height);
  put("firing_line_mm", cfg.firing_line_mm);
  put("nozzle_offset_mm", cfg.nozzle_offset_mm);
  put("valve_switch_ms", cfg.valve_switch_ms);
  put("pulse_ms", cfg.pulse_ms);
  put("mean_grain_mass_g", cfg.mean_grain_mass_g);
  put("feed_rate_grains_per_s", cfg.feed_rate_grains_per_s);
  put("detection_latency_ms", cfg.detection_latency_ms);
  put("pixel_noise_px", cfg.pixel_noise_px);
  put("miss_prob", cfg.miss_prob);
  put("hopper_capacity_g", cfg.hopper_capacity_g);
  return out.str();
}

LineConfig load_line_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config file not found: " + path);
  }
  LineConfig cfg;
  std::string line, key, value;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!parse_kv_line(line, key, value, path, line_no)) continue;
    if (!set_config_field(cfg, key, value)) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown config key '" +
                        key + "'");
    }
  }
  return cfg;
}

void Scenario::apply_overrides(LineConfig& cfg) const {
  for (const auto& [key, value] : config_overrides) {
    if (!set_config_field(cfg, key, value)) {
      throw ConfigError("scenario override names unknown config key '" + key + "'");
    }
  }
}

std::shared_ptr<const Classifier> Scenario::make_classifier() const {
  if (classifier.kind == ClassifierChoice::Kind::Oracle) {
    return std::make_shared<OracleClassifier>();
  }
  if (classifier.matrix_path.empty()) {
    return std::make_shared<ConfusionClassifier>(calibrate_fixture());
  }
  try {
    return std::make_shared<ConfusionClassifier>(load_confusion_matrix(classifier.matrix_path));
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("scenario file not found: " + path);
  }
  Scenario sc;
  std::string line, key, value;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!parse_kv_line(line, key, value, path, line_no)) continue;
    auto here = [&] { return path + ":" + std::to_string(line_no); };
    if (key == "mixture") {
      std::istringstream ss(value);
      Mixture m{};
      int got = 0, c;
      while (ss >> c) {
        if (got < kClassCount) m[got] = c;
        ++got;
      }
      if (got != kClassCount || !ss.eof()) {
        throw ConfigError(here() + ": mixture needs 6 integer counts "
                          "(Good Yellow Broken Peeled Dotted Reject)");
      }
      for (int n : m) {
        if (n < 0) throw ConfigError(here() + ": mixture counts must be nonnegative");
      }
      sc.mixture = m;
    } else if (key == "seed") {
      try {
        sc.seed = std::stoull(value);
      } catch (const std::exception&) {
        throw ConfigError(here() + ": seed must be a nonnegative integer");
      }
    } else if (key == "classifier") {
      if (value == "oracle") {
        sc.classifier.kind = ClassifierChoice::Kind::Oracle;
      } else if (value == "confusion") {
        sc.classifier.kind = ClassifierChoice::Kind::Confusion;
      } else {
        throw ConfigError(here() + ": classifier must be 'oracle' or 'confusion'");
      }
    } else if (key == "confusion_matrix") {
      sc.classifier.matrix_path = value;
    } else {
      // anything else must be a LineConfig override; validate the key now
      LineConfig probe;
      if (!set_config_field(probe, key, value)) {
        throw ConfigError(here() + ": unknown scenario key '" + key + "'");
      }
      sc.config_overrides.emplace_back(key, value);
    }
  }
  return sc;
}

}  // namespace lentil
