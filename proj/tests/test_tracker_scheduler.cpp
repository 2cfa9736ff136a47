#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>
#include <set>

#include "lentil/experiment.hpp"
#include "lentil/scheduler.hpp"
#include "lentil/sim.hpp"
#include "lentil/tracker.hpp"

using namespace lentil;

namespace {

std::array<double, kClassCount> one_hot(GrainClass c) {
  std::array<double, kClassCount> p{};
  p[class_index(c)] = 1.0;
  return p;
}

Track make_track(std::initializer_list<GrainClass> votes, double t0 = 0.0,
                 double along0 = 50.0, double cross = 50.0) {
  Track tr;
  tr.id = 0;
  double t = t0, along = along0;
  for (GrainClass c : votes) {
    tr.history.push_back({t, along, cross, one_hot(c)});
    t += 0.025;
    along += 59.0 * 0.025;
  }
  return tr;
}

}  // namespace

TEST_CASE("associate") {
  LineConfig cfg;
  std::uint64_t next_id = 0;

  SUBCASE("a lone observation spawns a track") {
    std::vector<Track> tracks;
    associate(tracks, {{10.0, 30.0, one_hot(GrainClass::Good)}}, 0.0, cfg, next_id);
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].id == 0);
    CHECK(tracks[0].history.size() == 1);
  }

  SUBCASE("constant-velocity prediction matches the next frame") {
    std::vector<Track> tracks;
    associate(tracks, {{50.0, 30.0, one_hot(GrainClass::Good)}}, 0.0, cfg, next_id);
    // 25 ms later the grain moved 59 * 0.025 = 1.475 mm
    associate(tracks, {{51.475, 30.0, one_hot(GrainClass::Good)}}, 0.025, cfg, next_id);
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].history.size() == 2);
  }

  SUBCASE("two lanes at the same along position never merge") {
    std::vector<Track> tracks;
    associate(tracks,
              {{50.0, 30.0, one_hot(GrainClass::Good)}, {50.0, 50.0, one_hot(GrainClass::Good)}},
              0.0, cfg, next_id);
    associate(tracks,
              {{51.475, 30.0, one_hot(GrainClass::Good)}, {51.475, 50.0, one_hot(GrainClass::Good)}},
              0.025, cfg, next_id);
    REQUIRE(tracks.size() == 2);
    CHECK(tracks[0].history.size() == 2);
    CHECK(tracks[1].history.size() == 2);
    CHECK(tracks[0].history[1].cross_mm == 30.0);
    CHECK(tracks[1].history[1].cross_mm == 50.0);
  }

  SUBCASE("observations outside the gate start a new track") {
    std::vector<Track> tracks;
    associate(tracks, {{50.0, 30.0, one_hot(GrainClass::Good)}}, 0.0, cfg, next_id);
    associate(tracks, {{75.0, 30.0, one_hot(GrainClass::Good)}}, 0.025, cfg, next_id);
    CHECK(tracks.size() == 2);
  }

  SUBCASE("a distance tie goes to the older track") {
    std::vector<Track> tracks;
    // 12 mm apart in cross: distinct tracks, yet both within the gate of an
    // observation placed midway between them
    associate(tracks,
              {{40.0, 24.0, one_hot(GrainClass::Good)}, {40.0, 36.0, one_hot(GrainClass::Good)}},
              0.0, cfg, next_id);
    REQUIRE(tracks.size() == 2);
    associate(tracks, {{41.475, 30.0, one_hot(GrainClass::Good)}}, 0.025, cfg, next_id);
    REQUIRE(tracks.size() == 2);
    CHECK(tracks[0].history.size() == 2);
    CHECK(tracks[1].history.size() == 1);
  }

  SUBCASE("unmatched tracks inside the FOV expire after more than 3 misses") {
    std::vector<Track> tracks;
    associate(tracks, {{50.0, 30.0, one_hot(GrainClass::Good)}}, 0.0, cfg, next_id);
    for (int k = 1; k <= 3; ++k) {
      associate(tracks, {}, 0.025 * k, cfg, next_id);
      CHECK(tracks[0].state == TrackState::Active);
    }
    associate(tracks, {}, 0.100, cfg, next_id);
    CHECK(tracks[0].state == TrackState::Expired);
  }

  SUBCASE("tracks past the FOV wait for finalization instead of expiring") {
    std::vector<Track> tracks;
    associate(tracks, {{99.5, 30.0, one_hot(GrainClass::Good)}}, 0.0, cfg, next_id);
    for (int k = 1; k <= 6; ++k) associate(tracks, {}, 0.025 * k, cfg, next_id);
    CHECK(tracks[0].state == TrackState::Active);
  }
}

TEST_CASE("decide_class") {
  CHECK(decide_class(make_track({GrainClass::Good, GrainClass::Good, GrainClass::Good})) ==
        GrainClass::Good);
  CHECK(decide_class(make_track({GrainClass::Dotted, GrainClass::Peeled, GrainClass::Dotted})) ==
        GrainClass::Dotted);
  // tie: the most recent argmax wins
  CHECK(decide_class(make_track({GrainClass::Peeled, GrainClass::Dotted})) == GrainClass::Dotted);
  CHECK(decide_class(make_track({GrainClass::Dotted, GrainClass::Peeled})) == GrainClass::Peeled);

  SUBCASE("permutation-invariant under a strict majority") {
    std::vector<GrainClass> votes{GrainClass::Broken, GrainClass::Broken, GrainClass::Broken,
                                  GrainClass::Peeled, GrainClass::Good};
    Rng rng(8);
    for (int i = 0; i < 30; ++i) {
      rng.shuffle(votes);
      Track tr = make_track({});
      double t = 0.0;
      for (GrainClass c : votes) {
        tr.history.push_back({t, 50.0, 50.0, one_hot(c)});
        t += 0.025;
      }
      CHECK(decide_class(tr) == GrainClass::Broken);
    }
  }

  SUBCASE("empty history is an error") {
    Track tr;
    CHECK_THROWS_AS(decide_class(tr), std::logic_error);
  }
}

TEST_CASE("plan_ejection") {
  LineConfig cfg;

  SUBCASE("good grains are kept") {
    Track tr = make_track({GrainClass::Good, GrainClass::Good});
    CHECK(plan_ejection(tr, cfg, 0.0).kind == EjectionPlan::Kind::Keep);
  }

  SUBCASE("textbook timing arithmetic") {
    LineConfig c2 = cfg;
    c2.firing_line_mm = 120.0;
    c2.nozzle_offset_mm = 0.0;
    Track tr;
    tr.history.push_back({0.0, 20.0, 50.0, one_hot(GrainClass::Broken)});
    auto plan = plan_ejection(tr, c2, 0.0);
    REQUIRE(plan.kind == EjectionPlan::Kind::Fire);
    CHECK(plan.cmd.fire_at_s == doctest::Approx(100.0 / 59.0 - 0.001).epsilon(1e-12));
    CHECK(plan.cmd.pulse_ms == c2.pulse_ms);
  }

  SUBCASE("nozzle is the nearest lane center") {
    Track tr;
    tr.history.push_back({0.0, 20.0, 47.0, one_hot(GrainClass::Broken)});
    auto plan = plan_ejection(tr, cfg, 0.0);
    REQUIRE(plan.kind == EjectionPlan::Kind::Fire);
    CHECK(plan.cmd.nozzle == 2);  // centers at 10,30,50,70,90
  }

  SUBCASE("a fire time already in the past is reported late") {
    Track tr;
    tr.history.push_back({0.0, 20.0, 47.0, one_hot(GrainClass::Broken)});
    auto plan = plan_ejection(tr, cfg, 100.0);
    CHECK(plan.kind == EjectionPlan::Kind::Late);
  }

  SUBCASE("matches the closed form on random tracks") {
    Rng rng(21);
    for (int i = 0; i < 1000; ++i) {
      LineConfig c2 = cfg;
      c2.belt_speed = rng.uniform(20.0, 300.0);
      c2.firing_line_mm = rng.uniform(105.0, 200.0);
      c2.nozzle_offset_mm = rng.uniform(0.0, 50.0);
      Track tr;
      double t_ref = rng.uniform(0.0, 60.0);
      double along = rng.uniform(0.0, 100.0);
      tr.history.push_back({t_ref, along, rng.uniform(1.0, 99.0),
                            one_hot(GrainClass::Reject)});
      auto plan = plan_ejection(tr, c2, 0.0);
      REQUIRE(plan.kind == EjectionPlan::Kind::Fire);
      double expect = t_ref +
                      (c2.firing_line_mm + c2.nozzle_offset_mm - along) / c2.belt_speed -
                      c2.valve_switch_ms / 1000.0;
      CHECK(std::abs(plan.cmd.fire_at_s - expect) < 1e-6);
    }
  }
}

TEST_CASE("command queue") {
  SUBCASE("pop returns only due commands, ordered") {
    CommandQueue q;
    q.push({0, 1.0, 4.0});
    q.push({1, 0.5, 4.0});
    auto due = q.pop_due(0.7);
    REQUIRE(due.size() == 1);
    CHECK(due[0].fire_at_s == 0.5);
    CHECK(due[0].nozzle == 1);
    due = q.pop_due(2.0);
    REQUIRE(due.size() == 1);
    CHECK(due[0].fire_at_s == 1.0);
    CHECK(q.size() == 0);
  }

  SUBCASE("overlapping windows on one nozzle merge into a spanning pulse") {
    CommandQueue q;
    q.push({3, 1.0, 4.0});
    q.push({3, 1.002, 4.0});
    CHECK(q.size() == 1);
    auto due = q.pop_due(10.0);
    REQUIRE(due.size() == 1);
    CHECK(due[0].fire_at_s == 1.0);
    CHECK(due[0].pulse_ms == doctest::Approx(6.0).epsilon(1e-9));
  }

  SUBCASE("same window on different nozzles stays separate") {
    CommandQueue q;
    q.push({0, 1.0, 4.0});
    q.push({1, 1.0, 4.0});
    CHECK(q.size() == 2);
  }

  SUBCASE("disjoint windows on one nozzle stay separate") {
    CommandQueue q;
    q.push({2, 1.0, 4.0});
    q.push({2, 1.010, 4.0});
    CHECK(q.size() == 2);
  }

  SUBCASE("pop order is nondecreasing over many random pushes") {
    CommandQueue q;
    Rng rng(31);
    for (int i = 0; i < 1000; ++i) {
      q.push({static_cast<int>(rng.below(5)), rng.uniform(0.0, 100.0), rng.uniform(0.5, 3.0)});
    }
    auto due = q.pop_due(1e9);
    REQUIRE(!due.empty());
    for (std::size_t i = 1; i < due.size(); ++i) {
      CHECK(due[i].fire_at_s >= due[i - 1].fire_at_s);
    }
    CHECK(q.size() == 0);
  }
}

TEST_CASE("controller end to end on synthetic frames") {
  LineConfig cfg;
  Calibration cal = make_calibration(cfg);
  SortController ctl(cfg, cal);

  auto detection_at = [&](double along, double cross, GrainClass c) {
    Detection d;
    PxPoint px = belt_to_px({along, cross}, cal);
    d.bbox = BBox::from_center(px.x, px.y, 50.0, 50.0);
    d.objectness = 1.0;
    d.class_probs = one_hot(c);
    return d;
  };

  SUBCASE("a defect grain crossing the FOV produces exactly one command") {
    double along = 90.0;
    double t = 0.0;
    int commands = 0;
    EjectionCommand cmd{};
    for (int k = 0; k < 12; ++k) {
      std::vector<Detection> dets;
      if (along <= cfg.fov_along) dets.push_back(detection_at(along, 68.0, GrainClass::Dotted));
      auto res = ctl.on_frame(dets, t, t);
      commands += res.planned.size();
      if (!res.planned.empty()) cmd = res.planned[0];
      t += cfg.frame_interval_s();
      along += cfg.belt_speed * cfg.frame_interval_s();
    }
    CHECK(commands == 1);
    CHECK(cmd.nozzle == 3);  // cross 68 -> lane center 70
    CHECK(ctl.late_count() == 0);
    // one finalized track with the decided class
    REQUIRE(ctl.tracks().size() == 1);
    CHECK(ctl.tracks()[0].state == TrackState::Finalized);
    CHECK(ctl.tracks()[0].decided_class == GrainClass::Dotted);
  }

  SUBCASE("a good grain crossing the FOV is kept") {
    double along = 90.0;
    double t = 0.0;
    int commands = 0;
    for (int k = 0; k < 12; ++k) {
      std::vector<Detection> dets;
      if (along <= cfg.fov_along) dets.push_back(detection_at(along, 68.0, GrainClass::Good));
      commands += ctl.on_frame(dets, t, t).planned.size();
      t += cfg.frame_interval_s();
      along += cfg.belt_speed * cfg.frame_interval_s();
    }
    CHECK(commands == 0);
  }

  SUBCASE("duplicate detections are suppressed before tracking") {
    // two boxes for the same grain, IoU above 0.5: NMS must keep one track
    std::vector<Detection> dets{detection_at(50.0, 68.0, GrainClass::Good),
                                detection_at(50.2, 68.0, GrainClass::Good)};
    dets[1].objectness = 0.7;
    ctl.on_frame(dets, 0.0, 0.0);
    CHECK(ctl.tracks().size() == 1);
  }
}

TEST_CASE("tracker never fragments or merges grains under an ideal sensor") {
  // Random scenarios, zero noise: every grain maps to exactly one track and
  // every track to exactly one grain.
  Rng scenario_rng(77);
  for (int round = 0; round < 10; ++round) {
    LineConfig cfg;
    cfg.belt_speed = scenario_rng.uniform(30.0, 120.0);
    cfg.feed_rate_grains_per_s = scenario_rng.uniform(1.0, 4.0);
    Mixture mix{};
    for (int c = 0; c < kClassCount; ++c) mix[c] = static_cast<int>(scenario_rng.below(8));
    if (mixture_total(mix) == 0) mix[0] = 5;

    std::uint64_t seed = scenario_rng.below(1 << 20);
    Rng spawn_rng(seed, 0);
    auto grains = spawn_schedule(cfg, mix, spawn_rng);
    Simulation sim(cfg, grains, std::make_shared<OracleClassifier>(), seed);
    SortController ctl(cfg, make_calibration(cfg));
    sim.set_frame_callback([&](const Frame& f) {
      ctl.on_frame(f.detections, f.timestamp, f.timestamp);
    });
    sim.set_valve_poll([&](double t) { return ctl.pop_due(t); });
    sim.run_to_completion();

    // Identify the grain behind each observation from exact kinematics.
    std::map<std::uint64_t, std::set<std::uint64_t>> grain_to_tracks;
    for (const Track& tr : ctl.tracks()) {
      std::set<std::uint64_t> sources;
      for (const TrackObservation& obs : tr.history) {
        for (const Grain& g : grains) {
          double along = g.spawn_along_mm + cfg.belt_speed * (obs.t - g.spawn_time_s);
          if (std::abs(along - obs.along_mm) < 1e-6 &&
              std::abs(g.cross_mm - obs.cross_mm) < 1e-6) {
            sources.insert(g.id);
            grain_to_tracks[g.id].insert(tr.id);
          }
        }
      }
      CHECK(sources.size() == 1);  // no merge
      // cross drift bound from the type contract
      double c0 = tr.history.front().cross_mm;
      for (const TrackObservation& obs : tr.history) {
        CHECK(std::abs(obs.cross_mm - c0) <= cfg.lane_pitch / 2.0);
      }
    }
    for (const Grain& g : grains) {
      CHECK(grain_to_tracks[g.id].size() == 1);  // no fragmentation
    }
  }
}

TEST_CASE("file command sink format") {
  std::string path = "/tmp/lentil_sink_test.csv";
  {
    FileCommandSink sink(path);
    sink.fire({2, 1.6939, 4.0});
    sink.fire({0, 2.5, 6.0});
  }
  std::ifstream in(path);
  std::string l1, l2;
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(l1 == "1.693900000,2,4.000");
  CHECK(l2 == "2.500000000,0,6.000");
}
