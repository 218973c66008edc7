#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "zedbs/config.hpp"
#include "zedbs/correlator.hpp"
#include "zedbs/detector.hpp"
#include "zedbs/error.hpp"
#include "zedbs/kernels.hpp"
#include "zedbs/report_io.hpp"
#include "zedbs/rng.hpp"

using namespace zedbs;

namespace {

struct Scenario {
  ExperimentConfig cfg;
  RsMap map;
  ChannelRealization chan;
  RxGridSamples rx;
};

Scenario scenario(const std::string& preset, std::vector<std::string> overrides,
                  std::uint64_t seed = 1) {
  Scenario s;
  s.cfg = make_config(nlohmann::json{{"preset", preset}}, overrides);
  s.map = build_rs_map(s.cfg.grid, s.cfg.duration()).first_subcarriers(s.cfg.subcarriers_used);
  ChannelParams ch = s.cfg.channel;
  ch.seed = derive_seed(seed, seed_tag::channel);
  if (!s.cfg.zed_enabled) ch.zed_gain_scale = 0.0;
  s.chan = sample_channel(s.cfg.subcarriers_used, ch);
  s.rx = synthesize_rx(s.map, s.cfg.chips, s.cfg.seq, s.cfg.t0, s.chan,
                       derive_seed(seed, seed_tag::noise));
  return s;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("detector") {
  TEST_CASE("noise-free synchronized statistic equals the path strength and its lags follow rho") {
    const Scenario s = scenario("regular-grid", {"channel.mode=\"aligned\"", "channel.noise_var=0"});
    const double eta_sq = s.cfg.grid.pilot_power * s.cfg.channel.zed_gain_scale *
                          s.cfg.channel.zed_gain_scale;
    const DetectorPlan plan(s.rx.records, s.cfg.detector_config(0.0, false));
    const DetectionReport rep = plan.detect(s.rx.records);
    const std::int64_t n0 = s.cfg.n0();
    const std::int64_t stride = plan.bit_stride();
    CHECK(stride == 112);
    CHECK(std::abs(rep.r_m[static_cast<std::size_t>(n0)] - eta_sq) <= 1e-12 * eta_sq);
    const std::vector<double> rho = bit_autocorrelation(s.cfg.seq);
    const auto nb = static_cast<std::int64_t>(s.cfg.seq.n_bits());
    for (std::int64_t k = -(nb - 1); k < nb; ++k) {
      const std::int64_t n = n0 + k * stride;
      if (n < 0 || n >= static_cast<std::int64_t>(rep.r_m.size())) continue;
      CAPTURE(k);
      CHECK(std::abs(rep.r_m[static_cast<std::size_t>(n)] -
                     eta_sq * rho[static_cast<std::size_t>(k + nb - 1)]) <= 1e-12 * eta_sq);
    }
    CHECK(rep.decision == Decision::H1);
    // The RS grid is sparser than the window step, so the peak is a plateau
    // of windows holding the same observations.
    CHECK(std::abs(rep.peak_index - n0) < 7);
    CHECK(rep.peak_value == doctest::Approx(eta_sq).epsilon(1e-12));
  }

  TEST_CASE("plan correlators agree with the direct correlator") {
    const Scenario s = scenario("paper-iv", {"channel.snr_db=10"});
    const DetectorPlan plan(s.rx.records, s.cfg.detector_config(s.chan.noise_var, true));
    const DetectionReport rep = plan.detect(s.rx.records, true);
    REQUIRE(rep.traces.size() == 6);
    for (const CorrelatorTrace& tr : rep.traces) {
      std::vector<double> t, env;
      for (const RxSample& r : s.rx.records)
        if (r.k == tr.k) {
          t.push_back(r.t);
          env.push_back(kernels::envelope(r.y));
        }
      const double level = *std::max_element(env.begin(), env.end());
      for (std::size_t n = 0; n < tr.e0.size(); n += 97) {
        if (tr.lambda[n] == 0.0) continue;
        const CorrelatorOutput c = correlate(t, env, s.cfg.chips, static_cast<double>(n) * 57.6e-6);
        CHECK(tr.a0[n] == c.a0);
        CHECK(tr.b0[n] == c.b0);
        CHECK(tr.a1[n] == c.a1);
        CHECK(tr.b1[n] == c.b1);
        // Running sums over the whole capture: rounding is relative to the
        // envelope level, not to the small correlator outputs.
        CHECK(std::abs(tr.e0[n] - c.e0) <= 1e-12 * level);
        CHECK(std::abs(tr.e1[n] - c.e1) <= 1e-12 * level);
        CHECK(tr.epsilon[n] == bias_correction(c.a1, c.b1, c.a0, c.b0, s.chan.noise_var));
      }
    }
  }

  TEST_CASE("reference statistic is bit-identical to the full chain") {
    for (bool filtered : {false, true}) {
      CAPTURE(filtered);
      const Scenario s = scenario("paper-iv", {"channel.snr_db=15"}, 5);
      const DetectorPlan plan(s.rx.records, s.cfg.detector_config(s.chan.noise_var, filtered));
      const DetectionReport rep = plan.detect(s.rx.records);
      std::vector<double> r_k;
      const double ref = plan.reference_statistic(s.rx.records, r_k);
      const double full = rep.r_m[static_cast<std::size_t>(plan.reference_index())];
      CHECK(std::memcmp(&ref, &full, sizeof ref) == 0);
      CHECK(r_k.size() == 6);
      CHECK(combine(r_k, plan.lambdas()) == doctest::Approx(ref).epsilon(1e-12));
    }
  }

  TEST_CASE("noiseless H0 statistic is identically zero") {
    const Scenario s = scenario("paper-iv", {"channel.zed_enabled=false", "channel.noise_var=0"});
    for (bool filtered : {false, true}) {
      const DetectorPlan plan(s.rx.records, s.cfg.detector_config(0.0, filtered));
      const DetectionReport rep = plan.detect(s.rx.records);
      for (double v : rep.r_m) REQUIRE(v == 0.0);
      CHECK(rep.decision == Decision::H0);
      CHECK(std::isnan(rep.peak_to_lobe_db));
    }
  }

  TEST_CASE("exact H0 variance matches Monte-Carlo") {
    // Fixed |Gamma| keeps the envelope in its linear regime.
    const std::vector<std::string> ov{"channel.mode=\"exact_magnitude\"", "channel.zed_enabled=false",
                                      "channel.snr_db=20"};
    const Scenario first = scenario("paper-iv", ov, 1);
    const DetectorPlan plan(first.rx.records, first.cfg.detector_config(first.chan.noise_var, false));
    const int trials = 3000;
    double sum = 0.0, sum2 = 0.0;
    for (int t = 0; t < trials; ++t) {
      const Scenario s = scenario("paper-iv", ov, 1000 + t);
      const double r = plan.reference_statistic(s.rx.records);
      sum += r;
      sum2 += r * r;
    }
    const double mean = sum / trials;
    const double var = sum2 / trials - mean * mean;
    const double predicted = plan.threshold().variance;
    // Sample variance of 3000 draws: relative sd about 2.6%.
    CHECK(var == doctest::Approx(predicted).epsilon(0.1));
    CHECK(std::abs(mean) <= 4.0 * std::sqrt(predicted / trials));
  }

  TEST_CASE("count-based variance factors") {
    const Scenario s = scenario("regular-grid", {"detector.variance_model=\"count_based\""});
    DetectorConfig dc = s.cfg.detector_config(s.chan.noise_var, false);
    dc.variance_model = VarianceModel::count_based;
    const DetectorPlan plan(s.rx.records, dc);
    const double nb = static_cast<double>(s.cfg.seq.n_bits());
    // Sixteen RS per bit window, eight in each partition of both correlators.
    for (double l : plan.lambdas()) {
      CHECK(l == doctest::Approx(4.0 / 8.0 / nb));
      CHECK(l >= 4.0 / (16.0 * nb));
    }
    double sum = 0.0;
    for (double l : plan.lambdas()) sum += l;
    CHECK(plan.threshold().variance == doctest::Approx(s.chan.noise_var / 6.0 * sum));
  }

  TEST_CASE("decision follows the peak over the search range") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
      const Scenario s = scenario("paper-iv", {"channel.snr_db=0", "detector.p_fa=0.2"}, seed);
      const DetectionReport rep = detect(s.rx.records, s.cfg.detector_config(s.chan.noise_var, true));
      double best = -INFINITY;
      for (std::size_t n = static_cast<std::size_t>(rep.warmup); n < rep.r_m.size(); ++n)
        best = std::max(best, rep.r_m[n]);
      CHECK(rep.peak_value == best);
      CHECK((rep.decision == Decision::H1) == (best > rep.r_star));
      CHECK(rep.var > 0.0);
    }
  }

  TEST_CASE("noiseless reports do not depend on the receiver phase") {
    std::string reference;
    std::vector<double> r_ref;
    for (const char* model : {"\"zero\"", "\"iid_uniform\"", "\"random_walk\""}) {
      const Scenario s = scenario("paper-iv", {"channel.noise_var=0",
                                               std::string("channel.phase_model=") + model});
      const DetectionReport rep = detect(s.rx.records, s.cfg.detector_config(0.0, true), true);
      const std::string j = report_to_json(rep).dump();
      if (reference.empty()) {
        reference = j;
        r_ref = rep.r_m;
      } else {
        CHECK(j == reference);
        CHECK(same_bits(rep.r_m, r_ref));
      }
    }
  }

  TEST_CASE("scalar and SIMD chains agree bit for bit") {
    const Scenario s = scenario("paper-iv", {"channel.snr_db=12"}, 9);
    const DetectorPlan plan(s.rx.records, s.cfg.detector_config(s.chan.noise_var, true));
    const kernels::Isa before = kernels::active_isa();
    kernels::select(kernels::Isa::scalar);
    const DetectionReport a = plan.detect(s.rx.records);
    if (kernels::cpu_has_avx2() && kernels::avx2_table() != nullptr) {
      kernels::select(kernels::Isa::avx2);
      const DetectionReport b = plan.detect(s.rx.records);
      CHECK(same_bits(a.r_m, b.r_m));
    }
    kernels::select(before);
  }

  TEST_CASE("samples that do not match the plan layout are rejected") {
    const Scenario s = scenario("paper-iv", {});
    const DetectorPlan plan(s.rx.records, s.cfg.detector_config(s.chan.noise_var, true));
    std::vector<RxSample> shorter(s.rx.records.begin(), s.rx.records.end() - 1);
    CHECK_THROWS(plan.detect(shorter));
  }

  TEST_CASE("observation shorter than the sequence") {
    const Scenario s = scenario("paper-iv", {"timing.t0=0", "timing.tail=0"});
    std::vector<RxSample> head;
    for (const RxSample& r : s.rx.records)
      if (r.t < 0.1) head.push_back(r);
    CHECK_THROWS_AS(DetectorPlan(head, s.cfg.detector_config(0.01, true)), WindowError);
  }

  TEST_CASE("sliding sequence correlation") {
    const SyncSequence seq{{1, 0, 1}};
    const std::vector<double> zero(12, 0.0);
    for (double v : bc_correlate(zero, seq, 2)) CHECK(v == 0.0);
    std::vector<double> x{3, 0, -3, 0, 3, 0, 1, 1};
    const std::vector<double> r = bc_correlate(x, seq, 2);
    REQUIRE(r.size() == 4);
    CHECK(r[0] == doctest::Approx(3.0));
    CHECK(r[1] == doctest::Approx(0.0));
    CHECK(r[2] == doctest::Approx((-3.0 - 3.0 + 1.0) / 3.0));
    CHECK(r[3] == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(bc_correlate(std::vector<double>(5, 1.0), seq, 2), WindowError);
  }

  TEST_CASE("peak to lobe") {
    const std::vector<double> r{9.0, 0.0, 1.0, 10.0, 1.0, -2.0, 0.5};
    const PeakLobe a = peak_to_lobe(r, 1, 2);
    CHECK(a.peak_index == 3);
    CHECK(a.peak == 10.0);
    CHECK(a.side == 2.0);
    CHECK(a.ratio_db == doctest::Approx(20.0 * std::log10(5.0)));
    const PeakLobe b = peak_to_lobe(r, 1, 10);
    CHECK(std::isnan(b.ratio_db));
    const std::vector<double> neg{-1.0, -2.0, -0.5};
    CHECK(std::isnan(peak_to_lobe(neg, 0, 1).ratio_db));
  }
}
