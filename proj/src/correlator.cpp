#include "zedbs/correlator.hpp"

#include <string>

#include "zedbs/error.hpp"

namespace zedbs {

CorrelatorOutput correlate(std::span<const double> times, std::span<const double> envelopes,
                           const ChipConfig& chips, double window_start) {
  if (times.size() != envelopes.size()) throw ConfigError("correlate: size mismatch");
  const auto n_chips = static_cast<std::int64_t>(chips.n_chips());

  // Sums are taken relative to the first envelope in the window so that a
  // constant input cancels exactly, not merely to rounding.
  bool have_ref = false;
  double ref = 0.0;
  double refl0 = 0.0, tr0 = 0.0, refl1 = 0.0, tr1 = 0.0;
  CorrelatorOutput out;
  // Membership follows the snapped chip index at both ends, so a sample on
  // a window boundary belongs to exactly one of two adjacent windows however
  // the boundary time was computed.
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const std::int64_t chip = chip_index(t - window_start, chips.t_chip);
    if (chip < 0) continue;
    if (chip >= n_chips) break;
    if (!have_ref) {
      ref = envelopes[i];
      have_ref = true;
    }
    const double v = envelopes[i] - ref;
    const auto j = static_cast<std::size_t>(chip);
    if (chips.c0[j]) {
      refl0 += v;
      ++out.a0;
    } else {
      tr0 += v;
      ++out.b0;
    }
    if (chips.c1[j]) {
      refl1 += v;
      ++out.a1;
    } else {
      tr1 += v;
      ++out.b1;
    }
  }
  if (out.a0 == 0 || out.b0 == 0 || out.a1 == 0 || out.b1 == 0) {
    throw WindowError("window not identifiable: a chip partition holds no observation (a0=" +
                      std::to_string(out.a0) + ", b0=" + std::to_string(out.b0) +
                      ", a1=" + std::to_string(out.a1) + ", b1=" + std::to_string(out.b1) + ")");
  }
  out.e0 = refl0 / out.a0 - tr0 / out.b0;
  out.e1 = refl1 / out.a1 - tr1 / out.b1;
  return out;
}

double bias_correction(int a_i, int b_i, int a_j, int b_j, double noise_var) noexcept {
  // Grouped so that equal counts give exactly zero.
  return 0.5 * noise_var * ((1.0 / a_i - 1.0 / a_j) + (1.0 / b_i - 1.0 / b_j));
}

double eta_estimate(double e_i, double e_j, int a_i, int b_i, int a_j, int b_j,
                    double noise_var) noexcept {
  return e_i * e_i - e_j * e_j - bias_correction(a_i, b_i, a_j, b_j, noise_var);
}

double eta_estimate(const CorrelatorOutput& out, int active_bit, double noise_var) noexcept {
  const int j = 1 - (active_bit != 0);
  return eta_estimate(out.e(active_bit), out.e(j), out.a(active_bit), out.b(active_bit), out.a(j),
                      out.b(j), noise_var);
}

double count_variance_factor(const CorrelatorOutput& out, std::size_t n_bits) noexcept {
  return (1.0 / out.a0 + 1.0 / out.b0 + 1.0 / out.a1 + 1.0 / out.b1) / static_cast<double>(n_bits);
}

}  // namespace zedbs
