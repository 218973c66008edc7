#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "zedbs/error.hpp"
#include "zedbs/lowpass.hpp"

using namespace zedbs;

namespace {

constexpr double kFs = 1.0 / 57.6e-6;

// Least-squares amplitude of a known-frequency sinusoid over y[from, end).
double fitted_amplitude(const std::vector<double>& y, std::size_t from, double f, double fs) {
  double ss = 0, cc = 0, sc = 0, ys = 0, yc = 0;
  for (std::size_t n = from; n < y.size(); ++n) {
    const double w = 2.0 * std::numbers::pi * f * static_cast<double>(n) / fs;
    const double s = std::sin(w), c = std::cos(w);
    ss += s * s;
    cc += c * c;
    sc += s * c;
    ys += y[n] * s;
    yc += y[n] * c;
  }
  const double det = ss * cc - sc * sc;
  const double a = (ys * cc - yc * sc) / det;
  const double b = (yc * ss - ys * sc) / det;
  return std::hypot(a, b);
}

double gain_db(const ButterworthLowpass& f, double freq) {
  const std::size_t n = 200000;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / kFs);
  const std::vector<double> y = f.apply(x);
  return 20.0 * std::log10(fitted_amplitude(y, n / 2, freq, kFs));
}

}  // namespace

TEST_SUITE("lowpass") {
  TEST_CASE("coefficients agree with an independent design") {
    // Order 4, 100 Hz at 1 / 57.6 us, designed with prewarped bilinear
    // transform by a reference signal-processing package.
    const std::vector<double> b_ref{1.0231555965897211e-07, 4.0926223863588846e-07,
                                    6.138933579538327e-07, 4.0926223863588846e-07,
                                    1.0231555965897211e-07};
    const std::vector<double> a_ref{1.0, -3.905430477697104, 5.720737484362741,
                                    -3.7250620738453772, 0.9097567042286951};
    const ButterworthLowpass f(4, 100.0, kFs);
    const auto b = f.numerator();
    const auto a = f.denominator();
    REQUIRE(b.size() == 5);
    REQUIRE(a.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(b[i] == doctest::Approx(b_ref[i]).epsilon(1e-9));
      CHECK(a[i] == doctest::Approx(a_ref[i]).epsilon(1e-12));
    }
    CHECK(f.sections().size() == 2);
  }

  TEST_CASE("unit DC gain") {
    const ButterworthLowpass f(4, 100.0, kFs);
    const std::vector<double> x(20000, 3.25);
    const std::vector<double> y = f.apply(x);
    CHECK(std::abs(y.back() - 3.25) <= 1e-6);
    CHECK(y.front() < 1e-5);
    const ButterworthLowpass odd(3, 250.0, kFs);
    CHECK(std::abs(odd.apply(x).back() - 3.25) <= 1e-6);
  }

  TEST_CASE("half power at cutoff and roll-off") {
    const ButterworthLowpass f(4, 100.0, kFs);
    CHECK(gain_db(f, 100.0) == doctest::Approx(-3.0103).epsilon(0.5 / 3.0103));
    CHECK(gain_db(f, 500.0) <= -40.0);
    CHECK(gain_db(f, 10.0) == doctest::Approx(0.0).epsilon(1e-3).scale(1.0));
  }

  TEST_CASE("impulse response matches filtering a unit impulse") {
    const ButterworthLowpass f(4, 300.0, kFs);
    std::vector<double> x(500, 0.0);
    x[0] = 1.0;
    const auto y = f.apply(x);
    const auto h = f.impulse_response(500);
    for (std::size_t i = 0; i < 500; ++i) CHECK(y[i] == h[i]);
    double sum = 0.0;
    for (double v : f.impulse_response(60000)) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("in-place filtering") {
    const ButterworthLowpass f(4, 100.0, kFs);
    std::vector<double> x(1000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::cos(0.01 * static_cast<double>(i));
    const auto expected = f.apply(x);
    f.apply(x, x);
    CHECK(x == expected);
  }

  TEST_CASE("invalid designs") {
    CHECK_THROWS_AS(ButterworthLowpass(4, kFs / 2, kFs), ConfigError);
    CHECK_THROWS_AS(ButterworthLowpass(4, kFs, kFs), ConfigError);
    CHECK_THROWS_AS(ButterworthLowpass(4, 0.0, kFs), ConfigError);
    CHECK_THROWS_AS(ButterworthLowpass(0, 100.0, kFs), ConfigError);
  }
}
