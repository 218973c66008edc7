#include "zedbs/lowpass.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "zedbs/error.hpp"

namespace zedbs {

namespace {

std::vector<double> poly_mul(const std::vector<double>& p, const double* q, std::size_t nq) {
  std::vector<double> r(p.size() + nq - 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < nq; ++j) r[i + j] += p[i] * q[j];
  return r;
}

}  // namespace

ButterworthLowpass::ButterworthLowpass(int order, double cutoff_hz, double sample_rate_hz)
    : order_(order), cutoff_(cutoff_hz), fs_(sample_rate_hz) {
  if (order < 1 || order > 16) throw ConfigError("low-pass order must be in [1, 16]");
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
    throw ConfigError("low-pass sample rate must be positive");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * sample_rate_hz))
    throw ConfigError("low-pass cutoff must lie in (0, Nyquist)");

  const double two_fs = 2.0 * fs_;
  const double warped = two_fs * std::tan(std::numbers::pi * cutoff_ / fs_);
  // Left half-plane analog poles taken in conjugate pairs; an odd order adds
  // one real pole at -warped.
  for (int k = 0; k < order_ / 2; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order_ + 1) / (2.0 * order_);
    const std::complex<double> s = warped * std::polar(1.0, theta);
    const std::complex<double> z = (two_fs + s) / (two_fs - s);
    Biquad q;
    q.a1 = -2.0 * z.real();
    q.a2 = std::norm(z);
    const double g = (1.0 + q.a1 + q.a2) / 4.0;  // unit gain at DC
    q.b0 = g;
    q.b1 = 2.0 * g;
    q.b2 = g;
    sections_.push_back(q);
  }
  if (order_ % 2 == 1) {
    const double z = (two_fs - warped) / (two_fs + warped);
    Biquad q;
    q.a1 = -z;
    const double g = (1.0 - z) / 2.0;
    q.b0 = g;
    q.b1 = g;
    sections_.push_back(q);
  }
}

void ButterworthLowpass::apply(std::span<const double> x, std::span<double> y) const {
  if (y.size() != x.size()) throw ConfigError("low-pass: output size mismatch");
  if (x.data() != y.data()) std::copy(x.begin(), x.end(), y.begin());
  for (const Biquad& q : sections_) {
    // Transposed direct form II.
    double s1 = 0.0, s2 = 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = q.b0 * in + s1;
      s1 = q.b1 * in - q.a1 * out + s2;
      s2 = q.b2 * in - q.a2 * out;
      v = out;
    }
  }
}

std::vector<double> ButterworthLowpass::apply(std::span<const double> x) const {
  std::vector<double> y(x.size());
  apply(x, y);
  return y;
}

std::vector<double> ButterworthLowpass::impulse_response(std::size_t n) const {
  std::vector<double> x(n, 0.0);
  if (n > 0) x[0] = 1.0;
  apply(x, x);
  return x;
}

std::vector<double> ButterworthLowpass::numerator() const {
  std::vector<double> p{1.0};
  for (const Biquad& q : sections_) {
    const double c[3] = {q.b0, q.b1, q.b2};
    p = poly_mul(p, c, 3);
  }
  p.resize(static_cast<std::size_t>(order_) + 1);
  return p;
}

std::vector<double> ButterworthLowpass::denominator() const {
  std::vector<double> p{1.0};
  for (const Biquad& q : sections_) {
    const double c[3] = {1.0, q.a1, q.a2};
    p = poly_mul(p, c, 3);
  }
  p.resize(static_cast<std::size_t>(order_) + 1);
  return p;
}

}  // namespace zedbs
