#pragma once
// Data-parallel inner loops of the receive chain.
//
// Every kernel has a scalar reference and, on x86-64, an AVX2 variant
// selected at runtime. Both variants perform the same IEEE operations in the
// same order per output element (no FMA contraction, no reassociation), so
// their results are bit-identical; tests/test_kernels.cpp enforces this.

#include <complex>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace zedbs::kernels {

enum class Isa { scalar, avx2 };

/// Envelope of one complex sample: sqrt(re*re + im*im). This exact
/// expression is the receiver's definition of |y|; channel synthesis relies
/// on it when constructing phase-rotated samples.
inline double envelope(std::complex<double> z) noexcept {
  const double re = z.real();
  const double im = z.imag();
  return std::sqrt(re * re + im * im);
}

struct KernelTable {
  /// out[i] = envelope(in[i])
  void (*envelopes)(const std::complex<double>* in, double* out, std::size_t n);
  /// out[i] = e1[i]^2 - e0[i]^2 - bias[i]
  void (*debiased_contrast)(const double* e0, const double* e1, const double* bias,
                            double* out, std::size_t n);
  /// out[n] = (sum_m sign[m] * x[n + offset[m]]) / taps, n in [0, n_out)
  void (*signed_sliding_sum)(const double* x, std::size_t n_out, const std::int64_t* offset,
                             const double* sign, std::size_t taps, double* out);
  /// out[n] = (sum_k weight[k] * rows[k][n]) / weight_sum
  void (*weighted_rows)(const double* const* rows, const double* weight, std::size_t n_rows,
                        double weight_sum, double* out, std::size_t n);
};

const KernelTable& scalar_table() noexcept;
/// Null when the build target has no AVX2 path.
const KernelTable* avx2_table() noexcept;

bool cpu_has_avx2() noexcept;

/// Active table. Chosen once at startup (AVX2 when available) unless the
/// ZEDBS_ISA environment variable is set to "scalar".
const KernelTable& active() noexcept;
Isa active_isa() noexcept;
/// Overrides the selection; throws ConfigError if the ISA is unavailable.
void select(Isa isa);
std::string_view isa_name(Isa isa) noexcept;

}  // namespace zedbs::kernels
