#include "zedbs/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "zedbs/error.hpp"
#include "zedbs/kernels.hpp"
#include "zedbs/rng.hpp"

namespace zedbs {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::complex<double> circular_gaussian(Rng& rng, double rms) {
  std::normal_distribution<double> n(0.0, rms / std::numbers::sqrt2);
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

void validate(const ChannelParams& p) {
  if (!(p.direct_gain_scale > 0.0) || !std::isfinite(p.direct_gain_scale))
    throw ConfigError("channel: direct_gain_scale must be positive");
  if (!(p.zed_gain_scale >= 0.0) || !std::isfinite(p.zed_gain_scale))
    throw ConfigError("channel: zed_gain_scale must be non-negative");
  if (!(p.noise_var >= 0.0) || !std::isfinite(p.noise_var))
    throw ConfigError("channel: noise_var must be non-negative");
  if (!(p.separation_floor >= 1.0)) throw ConfigError("channel: separation_floor must be >= 1");
  if (p.zed_gain_scale > 0.0 && p.direct_gain_scale / p.zed_gain_scale < p.separation_floor)
    throw ConfigError("channel: |Gamma|/|LambdaPhi| below the separation floor");
  if (p.phase.model == PhaseModel::random_walk && !(p.phase.walk_step >= 0.0))
    throw ConfigError("channel: phase walk_step must be non-negative");
}

}  // namespace

double project_zed_path(std::complex<double> gamma_direct, std::complex<double> zed_path) noexcept {
  const double mag = std::abs(gamma_direct);
  if (mag == 0.0) return zed_path.real();
  return (zed_path * std::conj(gamma_direct / mag)).real();
}

ChannelRealization sample_channel(int k_subcarriers, const ChannelParams& params) {
  validate(params);
  if (k_subcarriers <= 0) throw ConfigError("channel: subcarrier count must be positive");
  Rng rng(derive_seed(params.seed, seed_tag::channel));
  std::uniform_real_distribution<double> uniform_phase(0.0, kTwoPi);

  ChannelRealization chan;
  chan.noise_var = params.noise_var;
  chan.phase = params.phase;
  const auto K = static_cast<std::size_t>(k_subcarriers);
  chan.gamma_direct.resize(K);
  chan.zed_path.resize(K);
  chan.gamma_proj.resize(K);

  for (std::size_t k = 0; k < K; ++k) {
    std::complex<double> g, z;
    switch (params.mode) {
      case ChannelMode::rayleigh:
        do {
          g = circular_gaussian(rng, params.direct_gain_scale);
          z = circular_gaussian(rng, params.zed_gain_scale);
        } while (params.zed_gain_scale > 0.0 &&
                 std::abs(g) < params.separation_floor * std::abs(z));
        break;
      case ChannelMode::exact_magnitude: {
        const double pg = uniform_phase(rng);
        const double pz = uniform_phase(rng);
        g = std::polar(params.direct_gain_scale, pg);
        z = std::polar(params.zed_gain_scale, pz);
        break;
      }
      case ChannelMode::aligned: {
        const double pg = uniform_phase(rng);
        g = std::polar(params.direct_gain_scale, pg);
        z = std::polar(params.zed_gain_scale, pg);
        break;
      }
    }
    chan.gamma_direct[k] = g;
    chan.zed_path[k] = z;
    chan.gamma_proj[k] = params.mode == ChannelMode::aligned ? params.zed_gain_scale
                                                             : project_zed_path(g, z);
  }
  return chan;
}

std::vector<double> draw_tti_phases(const PhaseSpec& spec, std::size_t n_tti, std::uint64_t seed) {
  std::vector<double> phases(n_tti, 0.0);
  if (spec.model == PhaseModel::zero || n_tti == 0) return phases;
  Rng rng(derive_seed(seed, seed_tag::phase));
  std::uniform_real_distribution<double> uniform(0.0, kTwoPi);
  if (spec.model == PhaseModel::iid_uniform) {
    for (auto& p : phases) p = uniform(rng);
    return phases;
  }
  std::normal_distribution<double> step(0.0, spec.walk_step);
  phases[0] = uniform(rng);
  for (std::size_t i = 1; i < n_tti; ++i) phases[i] = std::fmod(phases[i - 1] + step(rng), kTwoPi);
  return phases;
}

namespace {

double nudge(double v, int n) noexcept {
  for (int i = 0; i < std::abs(n); ++i) v = std::nextafter(v, n > 0 ? HUGE_VAL : -HUGE_VAL);
  return v;
}

// Walks one component of r along the circle |y| = target and solves for the
// other, so each candidate lies on the circle to within rounding.
bool snap_to_envelope(std::complex<double> r, double target, bool solve_real,
                      std::complex<double>& out) noexcept {
  const double solved = solve_real ? r.real() : r.imag();
  const double walked = solve_real ? r.imag() : r.real();
  auto make = [&](double s, double w) {
    return solve_real ? std::complex<double>{s, w} : std::complex<double>{w, s};
  };
  const double sq = target * target;
  // Step so that walked^2 moves by about half an ulp of target^2.
  const double mag = std::abs(walked);
  const double step =
      mag > 0.0 ? std::max(std::nextafter(mag, HUGE_VAL) - mag, (std::nextafter(sq, HUGE_VAL) - sq) / (4.0 * mag))
                : 0.0;
  constexpr int kWalk = 16384;
  for (int k = 0; k <= kWalk; ++k) {
    const int d = (k + 1) / 2 * (k % 2 ? 1 : -1);
    if (step == 0.0 && d != 0) break;
    const double w = walked + d * step;
    const double rem = sq - w * w;
    if (rem < 0.0) continue;
    const double s0 = std::copysign(std::sqrt(rem), solved);
    for (int e = -3; e <= 3; ++e) {
      const double s = nudge(s0, e);
      if (kernels::envelope(make(s, w)) == target) {
        out = make(s, w);
        return true;
      }
    }
  }
  return false;
}

}  // namespace

std::complex<double> rotate_preserving_envelope(std::complex<double> z, double phi) noexcept {
  if (phi == 0.0) return z;
  const std::complex<double> rotated = z * std::polar(1.0, phi);
  const double target = kernels::envelope(z);
  if (kernels::envelope(rotated) == target) return rotated;
  const bool real_larger = std::abs(rotated.real()) >= std::abs(rotated.imag());
  std::complex<double> out;
  if (snap_to_envelope(rotated, target, real_larger, out)) return out;
  if (snap_to_envelope(rotated, target, !real_larger, out)) return out;
  return rotated;
}

RxGridSamples synthesize_rx(const RsMap& rs_map, const ChipConfig& chips, const SyncSequence& seq,
                            double t0, const ChannelRealization& chan, std::uint64_t seed) {
  const auto entries = rs_map.entries();
  RxGridSamples out;
  out.records.reserve(entries.size());
  if (entries.empty()) return out;

  std::int64_t max_symbol = 0;
  for (const auto& e : entries) {
    if (e.k < 0 || static_cast<std::size_t>(e.k) >= chan.subcarriers())
      throw ConfigError("synthesize: RS subcarrier outside the channel realization");
    max_symbol = std::max(max_symbol, e.symbol);
  }
  const auto phases =
      draw_tti_phases(chan.phase, static_cast<std::size_t>(max_symbol / kSymbolsPerTti + 1), seed);

  Rng rng(derive_seed(seed, seed_tag::noise));
  std::normal_distribution<double> noise(0.0, std::sqrt(chan.noise_var / 2.0));
  const double amp = std::sqrt(rs_map.grid().pilot_power);
  const bool noisy = chan.noise_var > 0.0;
  // With noise the envelope is random anyway, so the plain rotation is used;
  // without noise it must not change |y| by even one ulp.
  std::vector<std::complex<double>> phasor;
  if (noisy) {
    phasor.reserve(phases.size());
    for (double phi : phases) phasor.push_back(std::polar(1.0, phi));
  }

  for (const auto& e : entries) {
    const auto k = static_cast<std::size_t>(e.k);
    const int x = zed_state(e.t, chips, seq, t0);
    std::complex<double> h = chan.gamma_direct[k];
    if (x != 0) h += chan.zed_path[k];
    const std::complex<double> clean = amp * h;
    const auto tti = static_cast<std::size_t>(e.symbol / kSymbolsPerTti);
    std::complex<double> y = noisy ? (phases[tti] == 0.0 ? clean : clean * phasor[tti])
                                   : rotate_preserving_envelope(clean, phases[tti]);
    if (noisy) {
      const double re = noise(rng);
      const double im = noise(rng);
      y += std::complex<double>(re, im);
    }
    out.records.push_back({e.k, e.l, e.t, y});
  }
  return out;
}

MagnitudeResidual magnitude_approximation_residual(const ChannelRealization& chan,
                                                   double pilot_power, std::size_t n_samples,
                                                   std::uint64_t seed) {
  MagnitudeResidual r;
  if (n_samples == 0 || chan.subcarriers() == 0) return r;
  Rng rng(derive_seed(seed, seed_tag::noise));
  std::normal_distribution<double> noise(0.0, std::sqrt(chan.noise_var / 2.0));
  const double amp = std::sqrt(pilot_power);
  double sum_t = 0.0, sum_r = 0.0;
  for (std::size_t k = 0; k < chan.subcarriers(); ++k) {
    const auto g = chan.gamma_direct[k];
    const double mag = std::abs(g);
    const std::complex<double> unit = mag > 0.0 ? g / mag : 1.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
      const double re = noise(rng);
      const double im = noise(rng);
      const std::complex<double> a{re, im};
      // Noise component along the direct path.
      const double a_r = (a * std::conj(unit)).real();
      const double et = std::abs(std::abs(amp * g + a) - (amp * mag + a_r));
      const double er = std::abs(std::abs(amp * (g + chan.zed_path[k]) + a) -
                                 (amp * (mag + chan.gamma_proj[k]) + a_r));
      r.max_abs_transparent = std::max(r.max_abs_transparent, et);
      r.max_abs_reflective = std::max(r.max_abs_reflective, er);
      sum_t += et;
      sum_r += er;
    }
  }
  const double n = static_cast<double>(n_samples * chan.subcarriers());
  r.mean_abs_transparent = sum_t / n;
  r.mean_abs_reflective = sum_r / n;
  return r;
}

}  // namespace zedbs
