#include "lentil/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <stdexcept>

#include "lentil/scheduler.hpp"

namespace lentil {

std::uint64_t config_digest(const LineConfig& cfg, const Mixture& mixture,
                            const std::string& classifier_desc) {
  std::string blob = serialize_config(cfg);
  for (int c : mixture) blob += std::to_string(c) + ",";
  blob += classifier_desc;
  // FNV-1a 64
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : blob) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

double throughput(const RunReport& report) {
  if (report.bins.empty()) return 0.0;
  double elapsed_min = (report.last_bin_s - report.first_feed_s) / 60.0;
  if (!(elapsed_min > 0.0)) return 0.0;
  return report.total_mass_g / elapsed_min;
}

std::string RunReport::serialize() const {
  std::ostringstream out;
  char buf[96];
  out << "seed: " << seed << "\n";
  std::snprintf(buf, sizeof(buf), "config_digest: %016llx",
                static_cast<unsigned long long>(config_digest));
  out << buf << "\n";
  std::snprintf(buf, sizeof(buf), "separation_accuracy: %.6f", separation_accuracy);
  out << buf << "\n";
  std::snprintf(buf, sizeof(buf), "throughput_g_per_min: %.6f", throughput_g_per_min);
  out << buf << "\n";
  out << "late_commands: " << late_command_count << "\n";
  std::snprintf(buf, sizeof(buf), "first_feed_s: %.9f", first_feed_s);
  out << buf << "\n";
  std::snprintf(buf, sizeof(buf), "last_bin_s: %.9f", last_bin_s);
  out << buf << "\n";
  out << "routing:\n";
  for (int c = 0; c < kClassCount; ++c) {
    out << "  " << class_name(class_from_index(c)) << " accept=" << routing[c][0]
        << " eject=" << routing[c][1] << "\n";
  }
  out << "bins:\n";
  for (const BinRecord& b : bins) {
    std::snprintf(buf, sizeof(buf), "  %llu,%s,%s,%d,%.9f",
                  static_cast<unsigned long long>(b.grain_id), class_name(b.true_class),
                  b.ejected ? "eject" : "accept", b.lane, b.exit_time_s);
    out << buf << "\n";
  }
  return out.str();
}

std::string RunReport::csv_row() const {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%llu,%.6f,%.6f,%d",
                static_cast<unsigned long long>(seed), separation_accuracy,
                throughput_g_per_min, late_command_count);
  return buf;
}

RunReport run_once(const LineConfig& cfg, const Mixture& mixture,
                   const std::shared_ptr<const Classifier>& classifier, std::uint64_t seed,
                   const LineConfig* controller_cfg, const std::string& classifier_desc,
                   CommandSink* sink) {
  validate_or_throw(cfg);
  if (mixture_total(mixture) == 0) {
    throw ConfigError("mixture is empty: nothing to feed");
  }
  LineConfig ctl_cfg = controller_cfg ? *controller_cfg : cfg;
  validate_or_throw(ctl_cfg);

  Rng spawn_rng(seed, 0);
  std::vector<Grain> grains = spawn_schedule(cfg, mixture, spawn_rng);

  Simulation sim(cfg, std::move(grains), classifier, seed);
  sim.set_command_sink(sink);
  SortController ctl(ctl_cfg, make_calibration(ctl_cfg));

  sim.set_frame_callback([&](const Frame& f) {
    double ctl_now = f.timestamp + cfg.detection_latency_s();
    SortController::FrameResult res = ctl.on_frame(f.detections, f.timestamp, ctl_now);
    for (const EjectionCommand& cmd : res.late) {
      sim.log_late_command(f.timestamp, cmd);
    }
    for (const EjectionCommand& cmd : res.planned) {
      sim.schedule_valve_event(cmd.fire_at_s);
    }
  });
  sim.set_valve_poll([&](double t) { return ctl.pop_due(t); });

  sim.run_to_completion();

  RunReport rep;
  rep.config_digest = config_digest(cfg, mixture, classifier_desc);
  rep.seed = seed;
  rep.bins = sim.bin_records();
  rep.late_command_count = ctl.late_count();
  rep.event_log = sim.event_log();

  int correct = 0;
  for (const BinRecord& b : rep.bins) {
    bool good = b.true_class == GrainClass::Good;
    if (good != b.ejected) ++correct;  // Good kept or defect ejected
    rep.routing[class_index(b.true_class)][b.ejected ? 1 : 0] += 1;
  }
  rep.separation_accuracy = rep.bins.empty() ? 0.0 : double(correct) / rep.bins.size();
  rep.total_mass_g = rep.bins.size() * cfg.mean_grain_mass_g;
  double first_feed = 0.0, last_bin = 0.0;
  if (!sim.grains().empty()) {
    first_feed = sim.grains().front().spawn_time_s;
    for (const Grain& g : sim.grains()) first_feed = std::min(first_feed, g.spawn_time_s);
    for (const BinRecord& b : rep.bins) last_bin = std::max(last_bin, b.exit_time_s);
  }
  rep.first_feed_s = quantize_time(first_feed);
  rep.last_bin_s = last_bin;
  rep.throughput_g_per_min = throughput(rep);
  return rep;
}

std::vector<RunReport> run_many(const LineConfig& cfg, const Mixture& mixture,
                                const std::shared_ptr<const Classifier>& classifier,
                                const std::vector<std::uint64_t>& seeds, int jobs,
                                const LineConfig* controller_cfg,
                                const std::string& classifier_desc) {
  std::vector<RunReport> reports(seeds.size());
  if (jobs <= 1) {
    // Serial reference path; the parallel path below must match it byte for byte.
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      reports[i] = run_once(cfg, mixture, classifier, seeds[i], controller_cfg,
                            classifier_desc);
    }
    return reports;
  }

  std::exception_ptr first_error = nullptr;
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (long long i = 0; i < static_cast<long long>(seeds.size()); ++i) {
    try {
      reports[i] = run_once(cfg, mixture, classifier, seeds[i], controller_cfg,
                            classifier_desc);
    } catch (...) {
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return reports;
}

ExperimentSummary run_experiment(const LineConfig& cfg, const Mixture& mixture,
                                       const std::shared_ptr<const Classifier>& classifier,
                                       int n_runs, std::uint64_t base_seed, int jobs,
                                       const LineConfig* controller_cfg,
                                       const std::string& classifier_desc) {
  if (n_runs < 1) throw ConfigError("experiment needs at least one run");
  std::vector<std::uint64_t> seeds(n_runs);
  for (int i = 0; i < n_runs; ++i) seeds[i] = base_seed + i;

  ExperimentSummary s;
  s.runs = run_many(cfg, mixture, classifier, seeds, jobs, controller_cfg, classifier_desc);

  double sum = 0.0, sum_tp = 0.0;
  for (const RunReport& r : s.runs) {
    sum += r.separation_accuracy;
    sum_tp += r.throughput_g_per_min;
    s.total_late_commands += r.late_command_count;
  }
  s.mean_accuracy = sum / n_runs;
  s.mean_throughput = sum_tp / n_runs;
  if (n_runs > 1) {
    double ss = 0.0;
    for (const RunReport& r : s.runs) {
      double d = r.separation_accuracy - s.mean_accuracy;
      ss += d * d;
    }
    s.std_accuracy = std::sqrt(ss / (n_runs - 1));
  }
  return s;
}

std::string SweepReport::serialize_csv() const {
  std::ostringstream out;
  out << "parameter,value,mean_accuracy,std_accuracy,mean_throughput\n";
  char buf[160];
  for (const Row& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f\n", parameter.c_str(), r.value,
                  r.mean_accuracy, r.std_accuracy, r.mean_throughput);
    out << buf;
  }
  return out.str();
}

SweepReport sweep(const LineConfig& cfg, const std::string& parameter,
                  const std::vector<double>& values, int runs_per_value,
                  const Mixture& mixture,
                  const std::shared_ptr<const Classifier>& classifier,
                  std::uint64_t base_seed, int jobs, const std::string& classifier_desc) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] > values[i - 1])) {
      throw ConfigError("sweep values must be strictly increasing");
    }
  }
  bool known = false;
  for (const char* p : kSweepableParameters) {
    if (parameter == p) known = true;
  }
  if (!known) {
    throw ConfigError("unknown sweep parameter '" + parameter +
                      "' (expected belt_speed, pulse_ms, nozzle_offset_mm or "
                      "detection_latency_ms)");
  }

  SweepReport rep;
  rep.parameter = parameter;
  for (double v : values) {
    LineConfig plant = cfg;
    LineConfig belief = cfg;
    if (parameter == "belt_speed") {
      plant.belt_speed = belief.belt_speed = v;
    } else if (parameter == "pulse_ms") {
      plant.pulse_ms = belief.pulse_ms = v;
    } else if (parameter == "detection_latency_ms") {
      plant.detection_latency_ms = belief.detection_latency_ms = v;
    } else {  // nozzle_offset_mm: miscalibrate the controller, not the plant
      belief.nozzle_offset_mm = v;
    }
    ExperimentSummary s = run_experiment(plant, mixture, classifier, runs_per_value,
                                               base_seed, jobs, &belief, classifier_desc);
    rep.rows.push_back({v, s.mean_accuracy, s.std_accuracy, s.mean_throughput});
  }
  return rep;
}

}  // namespace lentil
