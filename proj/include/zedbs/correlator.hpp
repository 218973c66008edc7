#pragma once
// Normalized dual correlators and the path-strength estimator.

#include <span>

#include "zedbs/waveform.hpp"

namespace zedbs {

struct CorrelatorOutput {
  double e0 = 0.0;
  double e1 = 0.0;
  int a0 = 0, b0 = 0;  // c0 reflective / transparent observation counts
  int a1 = 0, b1 = 0;  // c1 reflective / transparent observation counts

  double e(int bit) const noexcept { return bit != 0 ? e1 : e0; }
  int a(int bit) const noexcept { return bit != 0 ? a1 : a0; }
  int b(int bit) const noexcept { return bit != 0 ? b1 : b0; }
};

/// Correlates the envelopes observed on one subcarrier over the bit window
/// [window_start, window_start + t_bit):
///   e_i = sum_{refl} |y| / a_i - sum_{transp} |y| / b_i
/// Times must be sorted. Throws WindowError if any count is zero.
CorrelatorOutput correlate(std::span<const double> times, std::span<const double> envelopes,
                           const ChipConfig& chips, double window_start);

/// Mean of e_i^2 - e_j^2 under noise alone, i.e. the additive bias that
/// makes the estimator unbiased: (sigma^2 / 2)(1/a_i + 1/b_i - 1/a_j - 1/b_j).
double bias_correction(int a_i, int b_i, int a_j, int b_j, double noise_var) noexcept;

/// Unbiased estimate of eta^2 = P_u gamma^2 given that bit i is active.
double eta_estimate(double e_i, double e_j, int a_i, int b_i, int a_j, int b_j,
                    double noise_var) noexcept;
double eta_estimate(const CorrelatorOutput& out, int active_bit, double noise_var) noexcept;

/// e1^2 - e0^2.
inline double contrast(double e0, double e1) noexcept { return e1 * e1 - e0 * e0; }

/// (1/N_b)(1/a0 + 1/b0 + 1/a1 + 1/b1), bounded below by 4 / (L N_b).
double count_variance_factor(const CorrelatorOutput& out, std::size_t n_bits) noexcept;

}  // namespace zedbs
