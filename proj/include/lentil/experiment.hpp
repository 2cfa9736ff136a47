#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lentil/classifier.hpp"
#include "lentil/config.hpp"
#include "lentil/sim.hpp"

namespace lentil {

// Outcome of one full simulation from feed to bins.
struct RunReport {
  std::uint64_t config_digest = 0;
  std::uint64_t seed = 0;
  std::vector<BinRecord> bins;
  double separation_accuracy = 0.0;
  double throughput_g_per_min = 0.0;
  int late_command_count = 0;
  // [class][0] grains routed to accept, [class][1] grains ejected
  std::array<std::array<int, 2>, kClassCount> routing{};
  double total_mass_g = 0.0;
  double first_feed_s = 0.0;
  double last_bin_s = 0.0;
  std::vector<LogEvent> event_log;

  // Canonical text form (everything except the event log); byte-stable for a
  // given (config, mixture, classifier, seed).
  std::string serialize() const;
  std::string csv_row() const;  // seed,separation_accuracy,throughput_g_per_min,late_commands
};

inline constexpr const char* kSummaryCsvHeader =
    "seed,separation_accuracy,throughput_g_per_min,late_commands";

std::uint64_t config_digest(const LineConfig& cfg, const Mixture& mixture,
                            const std::string& classifier_desc);

// Grams per minute from first feed to last bin; 0 for an empty run.
double throughput(const RunReport& report);

// One simulation run. controller_cfg, when given, is the config the control
// core believes in (used to model trigger-line miscalibration); the plant
// always follows cfg. An optional sink receives every fired command. Throws
// ConfigError for an invalid config or an empty mixture.
RunReport run_once(const LineConfig& cfg, const Mixture& mixture,
                   const std::shared_ptr<const Classifier>& classifier, std::uint64_t seed,
                   const LineConfig* controller_cfg = nullptr,
                   const std::string& classifier_desc = "", CommandSink* sink = nullptr);

// Independent runs for seeds[0..n); jobs > 1 executes them OpenMP-parallel,
// jobs <= 1 runs the serial reference path. Reports come back in seed order
// either way, byte-identical between the two paths.
std::vector<RunReport> run_many(const LineConfig& cfg, const Mixture& mixture,
                                const std::shared_ptr<const Classifier>& classifier,
                                const std::vector<std::uint64_t>& seeds, int jobs = 1,
                                const LineConfig* controller_cfg = nullptr,
                                const std::string& classifier_desc = "");

struct ExperimentSummary {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation over runs
  double mean_throughput = 0.0;
  int total_late_commands = 0;
  std::vector<RunReport> runs;
};

// The controlled separation experiment: n_runs seeded runs of the mixture.
ExperimentSummary run_experiment(const LineConfig& cfg, const Mixture& mixture,
                                       const std::shared_ptr<const Classifier>& classifier,
                                       int n_runs = 10, std::uint64_t base_seed = 0,
                                       int jobs = 1,
                                       const LineConfig* controller_cfg = nullptr,
                                       const std::string& classifier_desc = "");

struct SweepReport {
  std::string parameter;
  struct Row {
    double value = 0.0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double mean_throughput = 0.0;
  };
  std::vector<Row> rows;

  std::string serialize_csv() const;
};

inline constexpr std::array<const char*, 4> kSweepableParameters = {
    "belt_speed", "pulse_ms", "nozzle_offset_mm", "detection_latency_ms"};

// Grid of run_experiment over strictly increasing values of one
// parameter. Sweeping nozzle_offset_mm varies only the controller's belief
// while the plant keeps the base offset, which models the trigger-line /
// ejection-point misalignment; the other parameters change the line itself.
SweepReport sweep(const LineConfig& cfg, const std::string& parameter,
                  const std::vector<double>& values, int runs_per_value,
                  const Mixture& mixture,
                  const std::shared_ptr<const Classifier>& classifier,
                  std::uint64_t base_seed = 0, int jobs = 1,
                  const std::string& classifier_desc = "");

}  // namespace lentil
