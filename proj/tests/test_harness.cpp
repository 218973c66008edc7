#include <doctest.h>

#include <atomic>
#include <sstream>

#include "zedbs/config.hpp"
#include "zedbs/correlator.hpp"
#include "zedbs/error.hpp"
#include "zedbs/harness.hpp"

using namespace zedbs;
using nlohmann::json;

TEST_SUITE("harness") {
  TEST_CASE("false-alarm rate at p = 0.5") {
    const ExperimentConfig c = make_config(json{{"preset", "regular-grid"}},
                                           {"experiment.trials=4000", "experiment.sweep=[0.5]",
                                            "channel.mode=exact_magnitude"});
    const ExperimentReport r = run_pfa_calibration(c);
    REQUIRE(r.points.size() == 1);
    CHECK(r.points[0].empirical >= 0.47);
    CHECK(r.points[0].empirical <= 0.53);
    CHECK(r.points[0].r_star == doctest::Approx(0.0).epsilon(1e-12).scale(1e-12));
  }

  TEST_CASE("noiseless H0 never raises an alarm") {
    const ExperimentConfig c = make_config(json::object(), {"experiment.trials=50",
                                                            "channel.noise_var=0",
                                                            "experiment.sweep=[0.1, 0.01]"});
    const ExperimentReport r = run_pfa_calibration(c);
    for (const auto& p : r.points) CHECK(p.hits == 0);
  }

  TEST_CASE("results do not depend on the worker count") {
    for (auto* run : {&run_pfa_calibration, &run_detection_curve, &run_estimator_bias}) {
      std::vector<std::string> ov{"experiment.trials=60", "channel.mode=aligned"};
      ExperimentConfig c = make_config(json{{"preset", "regular-grid"}}, ov);
      c.threads = 1;
      const std::string one = experiment_to_json(run(c)).dump();
      c.threads = 3;
      const ExperimentReport three = run(c);
      CHECK(experiment_to_json(three).dump() == one);
      CHECK(experiment_metadata(three)["threads"] == 3);
    }
    ExperimentConfig c = make_config(json::object(), {"experiment.trials=6"});
    c.threads = 1;
    const std::string one = experiment_to_json(run_peak_to_lobe(c)).dump();
    c.threads = 2;
    CHECK(experiment_to_json(run_peak_to_lobe(c)).dump() == one);
  }

  TEST_CASE("noiseless estimator is exact on both masks") {
    const ExperimentConfig c = make_config(json{{"preset", "regular-grid"}},
                                           {"experiment.trials=20", "channel.mode=aligned",
                                            "channel.noise_var=0"});
    const ExperimentReport r = run_estimator_bias(c);
    REQUIRE(r.points.size() == 2);
    for (const auto& p : r.points) {
      CHECK(p.empirical == doctest::Approx(p.eta_sq).epsilon(1e-9));
      CHECK(p.extra["stderr"].get<double>() <= 1e-12);
    }
    CHECK(r.points[0].extra["epsilon"].get<double>() == 0.0);
  }

  TEST_CASE("thinned mask keeps proportional quadrant counts") {
    const ExperimentConfig c = make_config(json{{"preset", "regular-grid"}});
    const RsMap full = build_rs_map(c.grid, c.duration()).first_subcarriers(1);
    const RsMap thin = thin_reflective_chips(full, c.chips, c.t0);
    const double ws = c.t0;
    std::vector<double> t;
    for (const auto& e : thin.entries())
      if (e.t >= ws && e.t < ws + c.chips.t_bit()) t.push_back(e.t);
    const std::vector<double> flat(t.size(), 1.0);
    const CorrelatorOutput o = correlate(t, flat, c.chips, ws);
    CHECK(o.a0 == 4);
    CHECK(o.b0 == 8);
    CHECK(o.a1 == 6);
    CHECK(o.b1 == 6);
  }

  TEST_CASE("experiments that need a collinear ZED path reject other channels") {
    const ExperimentConfig c = make_config(json::object(), {"experiment.trials=2"});
    CHECK_THROWS_AS(run_detection_curve(c), ConfigError);
    CHECK_THROWS_AS(run_estimator_bias(c), ConfigError);
  }

  TEST_CASE("detection curve at zero path strength predicts the false-alarm target") {
    const ExperimentConfig c = make_config(json{{"preset", "regular-grid"}},
                                           {"experiment.trials=10", "channel.mode=aligned",
                                            "detector.p_fa=0.01"});
    const ExperimentReport r = run_detection_curve(c);
    REQUIRE(r.points.size() == 4);
    CHECK(r.points[0].predicted == doctest::Approx(0.01));
    for (std::size_t i = 1; i < 4; ++i) CHECK(r.points[i].predicted > r.points[i - 1].predicted);
    std::ostringstream csv;
    write_points_csv(csv, r);
    CHECK(csv.str().rfind("x,eta_sq,predicted,empirical,ci_lo,ci_hi,trials\n", 0) == 0);
  }

  TEST_CASE("parallel_for visits every index once and propagates errors") {
    std::vector<std::atomic<int>> seen(1000);
    parallel_for(seen.size(), 4, [&](std::size_t i) { seen[i]++; });
    for (auto& s : seen) CHECK(s.load() == 1);
    CHECK_THROWS_AS(parallel_for(100, 3,
                                 [](std::size_t i) {
                                   if (i == 57) throw ConfigError("boom");
                                 }),
                    ConfigError);
  }
}
