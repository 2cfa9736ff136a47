// Benchmarks the OpenMP-parallel experiment runner against the serial
// reference path, and measures command-queue push/pop scaling.

#include <chrono>
#include <cstdio>
#include <memory>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lentil/experiment.hpp"
#include "lentil/scheduler.hpp"

using namespace lentil;
using clock_t_ = std::chrono::steady_clock;

namespace {

double seconds_since(clock_t_::time_point t0) {
  return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

void bench_runs(int n_runs) {
  LineConfig cfg;
  auto cls = std::make_shared<ConfusionClassifier>(calibrate_fixture());
  std::vector<std::uint64_t> seeds(n_runs);
  for (int i = 0; i < n_runs; ++i) seeds[i] = i;

  auto t0 = clock_t_::now();
  auto serial = run_many(cfg, standard_mixture(), cls, seeds, 1);
  double t_serial = seconds_since(t0);

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  t0 = clock_t_::now();
  auto parallel = run_many(cfg, standard_mixture(), cls, seeds, threads);
  double t_parallel = seconds_since(t0);

  bool identical = serial.size() == parallel.size();
  for (std::size_t i = 0; identical && i < serial.size(); ++i) {
    identical = serial[i].serialize() == parallel[i].serialize();
  }

  std::printf("experiment runner, %d runs of the 100-grain mixture\n", n_runs);
  std::printf("  serial reference : %8.3f s  (%.1f ms/run)\n", t_serial,
              1000.0 * t_serial / n_runs);
  std::printf("  openmp x%-2d       : %8.3f s  (speedup %.2fx)\n", threads, t_parallel,
              t_serial / t_parallel);
  std::printf("  outputs identical: %s\n", identical ? "yes" : "NO — BUG");
}

void bench_queue() {
  std::printf("command queue push + pop_due scaling\n");
  double prev_time = 0.0;
  long prev_n = 0;
  for (long n : {10000L, 100000L, 1000000L}) {
    Rng rng(9);
    std::vector<EjectionCommand> cmds(n);
    for (auto& c : cmds) {
      // sparse fire times so merging stays rare and the heap does the work
      c = {static_cast<int>(rng.below(5)), rng.uniform(0.0, n * 10.0), 4.0};
    }
    auto t0 = clock_t_::now();
    CommandQueue q;
    for (const auto& c : cmds) q.push(c);
    std::size_t drained = q.pop_due(n * 10.0 + 1.0).size();
    double dt = seconds_since(t0);
    std::printf("  n=%8ld : %8.3f ms  (%6.1f ns/op, drained %zu)", n, dt * 1e3,
                dt * 1e9 / (2.0 * n), drained);
    if (prev_n) {
      // O(n log n): growth stays near the size ratio (x10); quadratic would be x100
      double ratio = dt / prev_time;
      std::printf("  growth x%.1f for x%.0f size", ratio, double(n) / prev_n);
    }
    std::printf("\n");
    prev_time = dt;
    prev_n = n;
  }
}

}  // namespace

int main(int argc, char** argv) {
  int runs = argc > 1 ? std::atoi(argv[1]) : 40;
  bench_runs(runs);
  bench_queue();
  return 0;
}
