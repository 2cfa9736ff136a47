#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lentil/experiment.hpp"
#include "lentil/scheduler.hpp"

namespace fs = std::filesystem;
using namespace lentil;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string scenario_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  bool quiet = false;
};

LineConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return LineConfig{};
  return load_line_config(path);
}

std::string classifier_desc(const ClassifierChoice& c) {
  if (c.kind == ClassifierChoice::Kind::Oracle) return "oracle";
  return c.matrix_path.empty() ? "confusion:builtin" : "confusion:" + c.matrix_path;
}

fs::path prepare_out_dir(const std::string& out_dir) {
  fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("cannot create output directory: " + out_dir);
  }
  return dir;
}

std::ofstream open_out_file(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write output file: " + p.string());
  return out;
}

void write_event_log(const fs::path& p, std::uint64_t seed, std::uint64_t digest,
                     const std::vector<LogEvent>& log) {
  auto out = open_out_file(p);
  char buf[64];
  out << "# lentilsort event log v1\n";
  out << "# seed=" << seed << "\n";
  std::snprintf(buf, sizeof(buf), "# config_digest=%016llx",
                static_cast<unsigned long long>(digest));
  out << buf << "\n";
  for (const LogEvent& ev : log) out << ev.to_line() << "\n";
}

void write_summary_csv(const fs::path& p, const std::vector<const RunReport*>& reports) {
  auto out = open_out_file(p);
  out << kSummaryCsvHeader << "\n";
  for (const RunReport* r : reports) out << r->csv_row() << "\n";
}

int cmd_simulate(const CommonFlags& f) {
  LineConfig cfg = load_config_or_default(f.config_path);
  Scenario sc = f.scenario_path.empty() ? Scenario{} : load_scenario(f.scenario_path);
  sc.apply_overrides(cfg);
  validate_or_throw(cfg);
  if (f.seed_given) sc.seed = f.seed;
  auto cls = sc.make_classifier();

  if (f.out_dir.empty()) throw ConfigError("simulate requires --out DIR");
  fs::path dir = prepare_out_dir(f.out_dir);

  FileCommandSink sink((dir / "commands.csv").string());
  RunReport rep = run_once(cfg, sc.mixture, cls, sc.seed, nullptr,
                           classifier_desc(sc.classifier), &sink);

  write_summary_csv(dir / "summary.csv", {&rep});
  write_event_log(dir / "events.log", rep.seed, rep.config_digest, rep.event_log);
  open_out_file(dir / "report.txt") << rep.serialize();

  if (!f.quiet) {
    std::printf("separation_accuracy: %.3f\n", rep.separation_accuracy);
    std::printf("throughput_g_per_min: %.3f\n", rep.throughput_g_per_min);
    std::printf("late_commands: %d\n", rep.late_command_count);
  }
  return 0;
}

int cmd_experiment(const CommonFlags& f, int runs, bool per_run_logs) {
  LineConfig cfg = load_config_or_default(f.config_path);
  Scenario sc = f.scenario_path.empty() ? Scenario{} : load_scenario(f.scenario_path);
  sc.apply_overrides(cfg);
  validate_or_throw(cfg);
  if (f.seed_given) sc.seed = f.seed;
  auto cls = sc.make_classifier();

  ExperimentSummary s = run_experiment(cfg, sc.mixture, cls, runs, sc.seed, f.jobs,
                                             nullptr, classifier_desc(sc.classifier));

  std::printf("separation_accuracy: %.3f ± %.3f\n", s.mean_accuracy, s.std_accuracy);
  if (!f.quiet) {
    std::printf("throughput_g_per_min: %.3f\n", s.mean_throughput);
    std::printf("late_commands: %d\n", s.total_late_commands);
  }

  if (!f.out_dir.empty()) {
    fs::path dir = prepare_out_dir(f.out_dir);
    std::vector<const RunReport*> ptrs;
    for (const RunReport& r : s.runs) ptrs.push_back(&r);
    write_summary_csv(dir / "summary.csv", ptrs);
    if (per_run_logs) {
      for (const RunReport& r : s.runs) {
        write_event_log(dir / ("events_seed" + std::to_string(r.seed) + ".log"), r.seed,
                        r.config_digest, r.event_log);
      }
    }
  }
  return 0;
}

int cmd_sweep(const CommonFlags& f, const std::string& param, const std::string& values_csv,
              int runs) {
  LineConfig cfg = load_config_or_default(f.config_path);
  Scenario sc = f.scenario_path.empty() ? Scenario{} : load_scenario(f.scenario_path);
  sc.apply_overrides(cfg);
  validate_or_throw(cfg);
  if (f.seed_given) sc.seed = f.seed;
  auto cls = sc.make_classifier();

  std::vector<double> values;
  std::stringstream ss(values_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      values.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad --values entry: " + tok);
    }
  }

  SweepReport rep = sweep(cfg, param, values, runs, sc.mixture, cls, sc.seed, f.jobs,
                          classifier_desc(sc.classifier));
  std::fputs(rep.serialize_csv().c_str(), stdout);

  if (!f.out_dir.empty()) {
    fs::path dir = prepare_out_dir(f.out_dir);
    open_out_file(dir / "sweep.csv") << rep.serialize_csv();
  }
  return 0;
}

int cmd_validate_config(const std::string& config_path) {
  LineConfig cfg = load_line_config(config_path);
  auto v = cfg.violations();
  if (v.empty()) {
    std::printf("ok: %s\n", config_path.c_str());
    return 0;
  }
  for (const auto& msg : v) std::fprintf(stderr, "violation: %s\n", msg.c_str());
  return 2;
}

struct ReplayError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rebuilds the run metrics from an event log alone (plus the line config for
// grain mass); simulate -> replay must reproduce summary.csv byte for byte.
int cmd_replay(const CommonFlags& f, const std::string& log_path) {
  LineConfig cfg = load_config_or_default(f.config_path);
  std::ifstream in(log_path);
  if (!in) throw ConfigError("event log not found: " + log_path);

  std::optional<std::uint64_t> seed;
  RunReport rep;
  std::map<std::uint64_t, GrainClass> fed;
  bool first_feed_seen = false;
  std::string line;
  int line_no = 0;

  auto fail = [&](const std::string& why) {
    throw ReplayError(log_path + ":" + std::to_string(line_no) + ": " + why);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) fail("empty line");
    if (line[0] == '#') {
      auto pos = line.find("seed=");
      if (pos != std::string::npos) seed = std::stoull(line.substr(pos + 5));
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) fields.push_back(tok);
    if (fields.size() != 5) fail("malformed record (expected 5 fields)");

    double t;
    std::int64_t grain_id;
    int lane;
    try {
      std::size_t p0, p1, p2;
      t = std::stod(fields[0], &p0);
      grain_id = std::stoll(fields[2], &p1);
      lane = std::stoi(fields[3], &p2);
      if (p0 != fields[0].size() || p1 != fields[2].size() || p2 != fields[3].size()) {
        fail("malformed numeric field");
      }
    } catch (const ReplayError&) {
      throw;
    } catch (const std::exception&) {
      fail("malformed numeric field");
      return 3;  // unreachable
    }

    const std::string& type = fields[1];
    const std::string& detail = fields[4];
    if (type == "feed") {
      auto cls = class_from_name(detail);
      if (!cls) fail("unknown grain class '" + detail + "'");
      if (!fed.emplace(grain_id, *cls).second) fail("grain fed twice");
      if (!first_feed_seen || t < rep.first_feed_s) rep.first_feed_s = t;
      first_feed_seen = true;
    } else if (type == "binned") {
      auto it = fed.find(grain_id);
      if (it == fed.end()) fail("binned grain was never fed");
      bool ejected;
      if (detail == "eject") ejected = true;
      else if (detail == "accept") ejected = false;
      else fail("bad routing '" + detail + "'");
      rep.bins.push_back({static_cast<std::uint64_t>(grain_id), it->second, ejected, lane, t});
      rep.last_bin_s = std::max(rep.last_bin_s, t);
    } else if (type == "late_cmd") {
      ++rep.late_command_count;
    } else if (type == "frame" || type == "valve_fire" || type == "at_nozzle") {
      // carried for audit; not needed to rebuild the report
    } else {
      fail("unknown event type '" + type + "'");
    }
  }
  if (!seed) throw ReplayError(log_path + ": missing '# seed=' header");
  if (rep.bins.size() != fed.size()) {
    throw ReplayError(log_path + ":" + std::to_string(line_no) + ": log ends with " +
                      std::to_string(fed.size() - rep.bins.size()) + " grains unbinned");
  }

  rep.seed = *seed;
  int correct = 0;
  for (const BinRecord& b : rep.bins) {
    bool good = b.true_class == GrainClass::Good;
    if (good != b.ejected) ++correct;
    rep.routing[class_index(b.true_class)][b.ejected ? 1 : 0] += 1;
  }
  rep.separation_accuracy = rep.bins.empty() ? 0.0 : double(correct) / rep.bins.size();
  rep.total_mass_g = rep.bins.size() * cfg.mean_grain_mass_g;
  rep.throughput_g_per_min = throughput(rep);

  std::printf("%s\n", kSummaryCsvHeader);
  std::printf("%s\n", rep.csv_row().c_str());
  if (!f.out_dir.empty()) {
    fs::path dir = prepare_out_dir(f.out_dir);
    write_summary_csv(dir / "summary.csv", {&rep});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lentilsort: simulator and control core for a vision-guided "
               "pneumatic lentil sorting line"};
  app.require_subcommand(1);

  CommonFlags f;
  int runs = 10;
  bool per_run_logs = false;
  std::string param, values_csv, log_path;

  auto add_common = [&](CLI::App* cmd, bool with_scenario = true) {
    cmd->add_option("--config", f.config_path, "line config file (key = value)");
    if (with_scenario) {
      cmd->add_option("--scenario", f.scenario_path,
                      "scenario file: mixture, seed, classifier, config overrides");
    }
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--seed", f.seed, "base seed (overrides the scenario)")
        ->each([&](const std::string&) { f.seed_given = true; });
    cmd->add_option("--jobs", f.jobs, "parallel runs (OpenMP)");
    cmd->add_flag("--quiet", f.quiet, "suppress auxiliary output");
  };

  CLI::App* c_sim = app.add_subcommand("simulate", "run one scenario and write its report");
  add_common(c_sim);

  CLI::App* c_exp = app.add_subcommand(
      "experiment", "run the controlled separation experiment (10 seeded runs)");
  add_common(c_exp);
  c_exp->add_option("--runs", runs, "number of runs");
  c_exp->add_flag("--logs", per_run_logs, "also write per-run event logs");

  CLI::App* c_sweep = app.add_subcommand("sweep", "grid a parameter over repeated experiments");
  add_common(c_sweep);
  c_sweep->add_option("--param", param, "belt_speed | pulse_ms | nozzle_offset_mm | "
                                        "detection_latency_ms")->required();
  c_sweep->add_option("--values", values_csv, "comma-separated values")->required();
  c_sweep->add_option("--runs", runs, "runs per value");

  CLI::App* c_val = app.add_subcommand("validate-config", "check a line config file");
  std::string val_config;
  c_val->add_option("--config", val_config, "line config file")->required();

  CLI::App* c_replay = app.add_subcommand("replay", "recompute a report from an event log");
  add_common(c_replay, /*with_scenario=*/false);
  c_replay->add_option("--log", log_path, "events.log from a simulate run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(c_sim)) return cmd_simulate(f);
    if (app.got_subcommand(c_exp)) return cmd_experiment(f, runs, per_run_logs);
    if (app.got_subcommand(c_sweep)) return cmd_sweep(f, param, values_csv, runs);
    if (app.got_subcommand(c_val)) return cmd_validate_config(val_config);
    if (app.got_subcommand(c_replay)) return cmd_replay(f, log_path);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
