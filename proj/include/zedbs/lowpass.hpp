#pragma once
// Butterworth low-pass smoothing of the per-bit contrast sequence.

#include <span>
#include <vector>

namespace zedbs {

struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;  // a0 == 1
};

class ButterworthLowpass {
 public:
  /// Digital Butterworth design via the bilinear transform with cutoff
  /// prewarping. Throws ConfigError unless 0 < cutoff < fs/2 and order >= 1.
  ButterworthLowpass(int order, double cutoff_hz, double sample_rate_hz);

  int order() const noexcept { return order_; }
  double cutoff_hz() const noexcept { return cutoff_; }
  double sample_rate_hz() const noexcept { return fs_; }
  const std::vector<Biquad>& sections() const noexcept { return sections_; }

  /// Zero initial state, causal filtering of the whole input.
  std::vector<double> apply(std::span<const double> x) const;
  void apply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> impulse_response(std::size_t n) const;

  /// Expanded transfer function coefficients (b, a) with a[0] == 1.
  std::vector<double> numerator() const;
  std::vector<double> denominator() const;

 private:
  int order_;
  double cutoff_;
  double fs_;
  std::vector<Biquad> sections_;
};

}  // namespace zedbs
