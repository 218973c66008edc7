#include "zedbs/kernels.hpp"

namespace zedbs::kernels {
namespace {

void envelopes_scalar(const std::complex<double>* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = envelope(in[i]);
}

void debiased_contrast_scalar(const double* e0, const double* e1, const double* bias,
                              double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double p1 = e1[i] * e1[i];
    const double p0 = e0[i] * e0[i];
    out[i] = (p1 - p0) - bias[i];
  }
}

void signed_sliding_sum_scalar(const double* x, std::size_t n_out, const std::int64_t* offset,
                               const double* sign, std::size_t taps, double* out) {
  const double denom = static_cast<double>(taps);
  for (std::size_t n = 0; n < n_out; ++n) {
    double acc = 0.0;
    for (std::size_t m = 0; m < taps; ++m) acc += sign[m] * x[n + offset[m]];
    out[n] = acc / denom;
  }
}

void weighted_rows_scalar(const double* const* rows, const double* weight, std::size_t n_rows,
                          double weight_sum, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n_rows; ++k) acc += weight[k] * rows[k][i];
    out[i] = acc / weight_sum;
  }
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{envelopes_scalar, debiased_contrast_scalar,
                                 signed_sliding_sum_scalar, weighted_rows_scalar};
  return table;
}

}  // namespace zedbs::kernels
