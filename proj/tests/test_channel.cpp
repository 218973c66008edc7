#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "zedbs/channel.hpp"
#include "zedbs/error.hpp"
#include "zedbs/kernels.hpp"

using namespace zedbs;

namespace {

ChannelParams params(ChannelMode mode, double zed, double noise) {
  ChannelParams p;
  p.mode = mode;
  p.direct_gain_scale = 1.0;
  p.zed_gain_scale = zed;
  p.noise_var = noise;
  p.seed = 7;
  return p;
}

}  // namespace

TEST_SUITE("channel") {
  TEST_CASE("no ZED path gives zero projection") {
    for (auto mode : {ChannelMode::rayleigh, ChannelMode::exact_magnitude, ChannelMode::aligned}) {
      const auto c = sample_channel(6, params(mode, 0.0, 0.1));
      for (double g : c.gamma_proj) CHECK(g == 0.0);
    }
  }

  TEST_CASE("fixed seed, identical realization") {
    const auto a = sample_channel(6, params(ChannelMode::rayleigh, 0.05, 0.1));
    const auto b = sample_channel(6, params(ChannelMode::rayleigh, 0.05, 0.1));
    CHECK(a.gamma_direct == b.gamma_direct);
    CHECK(a.zed_path == b.zed_path);
    CHECK(a.gamma_proj == b.gamma_proj);
  }

  TEST_CASE("projection matches its definition") {
    const auto c = sample_channel(8, params(ChannelMode::rayleigh, 0.05, 0.0));
    for (std::size_t k = 0; k < 8; ++k) {
      const double want = (c.zed_path[k] * std::exp(std::complex<double>(0, -std::arg(c.gamma_direct[k])))).real();
      CHECK(c.gamma_proj[k] == doctest::Approx(want).epsilon(1e-12));
      CHECK(std::abs(c.gamma_direct[k]) >= 10.0 * std::abs(c.zed_path[k]));
    }
  }

  TEST_CASE("projection of an isotropic ZED path: mean 0, sd |LambdaPhi|/sqrt 2") {
    ChannelParams p = params(ChannelMode::exact_magnitude, 0.05, 0.0);
    const int n = 10000;
    p.seed = 11;
    const auto c = sample_channel(n, p);
    double s = 0, ss = 0;
    for (double g : c.gamma_proj) {
      s += g;
      ss += g * g;
    }
    const double mean = s / n;
    const double sd = std::sqrt(ss / n - mean * mean);
    CHECK(std::abs(mean) < 4.0 * 0.05 / std::sqrt(2.0 * n));
    CHECK(sd == doctest::Approx(0.05 / std::sqrt(2.0)).epsilon(0.05));
  }

  TEST_CASE("separation floor and parameter validation") {
    CHECK_THROWS_AS(sample_channel(4, params(ChannelMode::exact_magnitude, 0.2, 0.0)), ConfigError);
    CHECK_THROWS_AS(sample_channel(4, params(ChannelMode::rayleigh, -0.1, 0.0)), ConfigError);
    CHECK_THROWS_AS(sample_channel(4, params(ChannelMode::rayleigh, 0.01, -1.0)), ConfigError);
    CHECK_THROWS_AS(sample_channel(0, params(ChannelMode::rayleigh, 0.01, 0.0)), ConfigError);
  }

  TEST_CASE("aligned mode: path collinear, projection equals the gain") {
    const auto c = sample_channel(6, params(ChannelMode::aligned, 0.07, 0.0));
    for (std::size_t k = 0; k < 6; ++k) {
      CHECK(c.gamma_proj[k] == 0.07);
      CHECK(std::abs(c.gamma_direct[k] + c.zed_path[k]) == doctest::Approx(1.07).epsilon(1e-14));
    }
  }

  TEST_CASE("noise-free synthesis reproduces the two-path model") {
    GridConfig g;
    const RsMap map = build_rs_map(g, 0.3).first_subcarriers(4);
    const ChipConfig chips = fsk_chip_preset();
    const SyncSequence seq = barker_sync_sequence();
    ChannelParams p = params(ChannelMode::rayleigh, 0.05, 0.0);
    p.phase.model = PhaseModel::zero;
    const auto chan = sample_channel(4, p);
    const double t0 = 0.05;
    const auto rx = synthesize_rx(map, chips, seq, t0, chan, 3);
    REQUIRE(rx.records.size() == map.size());
    for (std::size_t i = 0; i < rx.records.size(); ++i) {
      const auto& r = rx.records[i];
      const auto& e = map.entries()[i];
      CHECK(r.k == e.k);
      CHECK(r.l == e.l);
      CHECK(r.t == e.t);
      const auto k = static_cast<std::size_t>(r.k);
      const auto want = zed_state(r.t, chips, seq, t0) ? chan.gamma_direct[k] + chan.zed_path[k] : chan.gamma_direct[k];
      CHECK(r.y == want);
    }
  }

  TEST_CASE("ZED absent: every sample equals sqrt(P) Gamma") {
    GridConfig g;
    g.pilot_power = 4.0;
    const RsMap map = build_rs_map(g, 0.05).first_subcarriers(2);
    ChannelParams p = params(ChannelMode::rayleigh, 0.0, 0.0);
    p.phase.model = PhaseModel::zero;
    const auto chan = sample_channel(2, p);
    const auto rx = synthesize_rx(map, fsk_chip_preset(), barker_sync_sequence(), 0.0, chan, 1);
    for (const auto& r : rx.records) CHECK(r.y == 2.0 * chan.gamma_direct[static_cast<std::size_t>(r.k)]);
  }

  TEST_CASE("complex noise variance") {
    GridConfig g;
    g.n_rb = 25;
    const RsMap map = build_rs_map(g, 0.5);  // 100 subcarriers
    ChannelParams p = params(ChannelMode::exact_magnitude, 0.0, 1.0);
    p.phase.model = PhaseModel::zero;
    const auto chan = sample_channel(100, p);
    const auto rx = synthesize_rx(map, fsk_chip_preset(), barker_sync_sequence(), 0.0, chan, 5);
    REQUIRE(rx.records.size() >= 100000);
    double s_re = 0, s_im = 0, ss = 0;
    for (const auto& r : rx.records) {
      const auto a = r.y - chan.gamma_direct[static_cast<std::size_t>(r.k)];
      s_re += a.real();
      s_im += a.imag();
      ss += std::norm(a);
    }
    const double n = static_cast<double>(rx.records.size());
    const double var = ss / n - (s_re * s_re + s_im * s_im) / (n * n);
    CHECK(var >= 0.99);
    CHECK(var <= 1.01);
  }

  TEST_CASE("equal seeds give bit-identical samples") {
    const RsMap map = build_rs_map(GridConfig{}, 0.2);
    const auto chan = sample_channel(8, params(ChannelMode::rayleigh, 0.05, 0.3));
    const auto a = synthesize_rx(map, fsk_chip_preset(), barker_sync_sequence(), 0.01, chan, 9);
    const auto b = synthesize_rx(map, fsk_chip_preset(), barker_sync_sequence(), 0.01, chan, 9);
    const auto c = synthesize_rx(map, fsk_chip_preset(), barker_sync_sequence(), 0.01, chan, 10);
    REQUIRE(a.records.size() == b.records.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].y == b.records[i].y);
      differs |= a.records[i].y != c.records[i].y;
    }
    CHECK(differs);
  }

  TEST_CASE("receiver phase leaves envelopes bit-identical without noise") {
    const RsMap map = build_rs_map(GridConfig{}, 0.25);
    ChannelParams p = params(ChannelMode::rayleigh, 0.08, 0.0);
    std::vector<std::vector<double>> env;
    for (auto model : {PhaseModel::zero, PhaseModel::iid_uniform, PhaseModel::random_walk}) {
      p.phase.model = model;
      const auto chan = sample_channel(8, p);
      const auto rx = synthesize_rx(map, fsk_chip_preset(), barker_sync_sequence(), 0.02, chan, 4);
      std::vector<double> e;
      for (const auto& r : rx.records) e.push_back(kernels::envelope(r.y));
      env.push_back(std::move(e));
    }
    CHECK(env[0] == env[1]);
    CHECK(env[0] == env[2]);
  }

  TEST_CASE("phase draws") {
    PhaseSpec s;
    s.model = PhaseModel::zero;
    for (double v : draw_tti_phases(s, 10, 1)) CHECK(v == 0.0);
    s.model = PhaseModel::iid_uniform;
    const auto u = draw_tti_phases(s, 1000, 1);
    for (double v : u) {
      CHECK(v >= 0.0);
      CHECK(v < 2 * std::numbers::pi);
    }
    CHECK(u == draw_tti_phases(s, 1000, 1));
    s.model = PhaseModel::random_walk;
    s.walk_step = 0.0;
    const auto w = draw_tti_phases(s, 50, 2);
    for (double v : w) CHECK(v == w.front());
  }

  TEST_CASE("rotation keeps the envelope and moves the phase") {
    const std::complex<double> z{0.3, -1.7};
    for (double phi : {0.1, 1.0, 2.5, 4.0, 6.2}) {
      const auto r = rotate_preserving_envelope(z, phi);
      CHECK(kernels::envelope(r) == kernels::envelope(z));
      CHECK(std::abs(r - z * std::polar(1.0, phi)) < 1e-14);
    }
  }

  TEST_CASE("rotation keeps the envelope for arbitrary samples") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 2 * std::numbers::pi);
    int mismatches = 0;
    double worst = 0.0;
    for (int i = 0; i < 200000; ++i) {
      // Include samples close to an axis, where one component is negligible.
      const std::complex<double> z{n(rng), n(rng) * (i % 4 == 0 ? 1e-9 : 1.0)};
      const double phi = i % 9 == 0 ? std::numbers::pi / 2 : u(rng);
      const auto r = rotate_preserving_envelope(z, phi);
      mismatches += kernels::envelope(r) != kernels::envelope(z);
      worst = std::max(worst, std::abs(r - z * std::polar(1.0, phi)) / std::abs(z));
    }
    CHECK(mismatches == 0);
    CHECK(worst < 1e-10);
  }

  TEST_CASE("magnitude linearization residual") {
    ChannelParams p = params(ChannelMode::exact_magnitude, 0.05, 0.0);
    const auto chan = sample_channel(16, p);
    const auto r = magnitude_approximation_residual(chan, 1.0, 10, 1);
    CHECK(r.max_abs_transparent == 0.0);
    // Second-order remainder of |Gamma + LambdaPhi| - |Gamma| - gamma.
    const double bound = 0.05 * 0.05 / (2.0 * (1.0 - 0.05));
    CHECK(r.max_abs_reflective <= bound);
    CHECK(r.max_abs_reflective > 0.0);

    ChannelParams noisy = params(ChannelMode::exact_magnitude, 0.1, 0.01);
    const auto r2 = magnitude_approximation_residual(sample_channel(6, noisy), 1.0, 1000, 3);
    CHECK(std::isfinite(r2.mean_abs_reflective));
    CHECK(r2.mean_abs_transparent > 0.0);
  }
}
