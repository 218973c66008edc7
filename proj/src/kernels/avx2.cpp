#include "zedbs/kernels.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define ZEDBS_HAVE_AVX2_PATH 1
#include <immintrin.h>
#else
#define ZEDBS_HAVE_AVX2_PATH 0
#endif

namespace zedbs::kernels {

#if ZEDBS_HAVE_AVX2_PATH
namespace {

#define ZEDBS_AVX2 __attribute__((target("avx2")))

ZEDBS_AVX2 void envelopes_avx2(const std::complex<double>* in, double* out, std::size_t n) {
  const double* p = reinterpret_cast<const double*>(in);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(p + 2 * i);      // re0 im0 re1 im1
    const __m256d b = _mm256_loadu_pd(p + 2 * i + 4);  // re2 im2 re3 im3
    const __m256d a2 = _mm256_mul_pd(a, a);
    const __m256d b2 = _mm256_mul_pd(b, b);
    // hadd: (a0+a1, b0+b1, a2+a3, b2+b3) -> |z0|^2 |z2|^2 |z1|^2 |z3|^2
    const __m256d s = _mm256_hadd_pd(a2, b2);
    const __m256d ordered = _mm256_permute4x64_pd(s, 0b11011000);
    _mm256_storeu_pd(out + i, _mm256_sqrt_pd(ordered));
  }
  for (; i < n; ++i) out[i] = envelope(in[i]);
}

ZEDBS_AVX2 void debiased_contrast_avx2(const double* e0, const double* e1, const double* bias,
                                       double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v0 = _mm256_loadu_pd(e0 + i);
    const __m256d v1 = _mm256_loadu_pd(e1 + i);
    const __m256d d = _mm256_sub_pd(_mm256_mul_pd(v1, v1), _mm256_mul_pd(v0, v0));
    _mm256_storeu_pd(out + i, _mm256_sub_pd(d, _mm256_loadu_pd(bias + i)));
  }
  for (; i < n; ++i) {
    const double p1 = e1[i] * e1[i];
    const double p0 = e0[i] * e0[i];
    out[i] = (p1 - p0) - bias[i];
  }
}

ZEDBS_AVX2 void signed_sliding_sum_avx2(const double* x, std::size_t n_out,
                                        const std::int64_t* offset, const double* sign,
                                        std::size_t taps, double* out) {
  const double denom = static_cast<double>(taps);
  const __m256d vden = _mm256_set1_pd(denom);
  std::size_t n = 0;
  for (; n + 4 <= n_out; n += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t m = 0; m < taps; ++m) {
      const __m256d xv = _mm256_loadu_pd(x + n + offset[m]);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(sign[m]), xv));
    }
    _mm256_storeu_pd(out + n, _mm256_div_pd(acc, vden));
  }
  for (; n < n_out; ++n) {
    double acc = 0.0;
    for (std::size_t m = 0; m < taps; ++m) acc += sign[m] * x[n + offset[m]];
    out[n] = acc / denom;
  }
}

ZEDBS_AVX2 void weighted_rows_avx2(const double* const* rows, const double* weight,
                                   std::size_t n_rows, double weight_sum, double* out,
                                   std::size_t n) {
  const __m256d vsum = _mm256_set1_pd(weight_sum);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < n_rows; ++k) {
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(weight[k]),
                                             _mm256_loadu_pd(rows[k] + i)));
    }
    _mm256_storeu_pd(out + i, _mm256_div_pd(acc, vsum));
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n_rows; ++k) acc += weight[k] * rows[k][i];
    out[i] = acc / weight_sum;
  }
}

}  // namespace

const KernelTable* avx2_table() noexcept {
  static const KernelTable table{envelopes_avx2, debiased_contrast_avx2,
                                 signed_sliding_sum_avx2, weighted_rows_avx2};
  return &table;
}

bool cpu_has_avx2() noexcept { return __builtin_cpu_supports("avx2"); }

#else

const KernelTable* avx2_table() noexcept { return nullptr; }
bool cpu_has_avx2() noexcept { return false; }

#endif

}  // namespace zedbs::kernels
