#include "zedbs/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "zedbs/correlator.hpp"
#include "zedbs/error.hpp"
#include "zedbs/kernels.hpp"

namespace zedbs {

namespace {

// Dense quadratic forms above this many samples per subcarrier are refused.
constexpr std::size_t kMaxExactSpan = 6000;

double window_start(std::int64_t n, double t_ofdm) { return static_cast<double>(n) * t_ofdm; }

// Prefix sums of the envelopes relative to the first one: constant inputs
// cancel exactly and precision does not degrade with the mean level.
void centred_prefix(std::span<const double> env, std::vector<double>& prefix) {
  prefix.assign(env.size() + 1, 0.0);
  if (env.empty()) return;
  const double ref = env[0];
  for (std::size_t i = 0; i < env.size(); ++i) prefix[i + 1] = prefix[i] + (env[i] - ref);
}


}  // namespace

void DetectorConfig::validate() const {
  if (chips.c0.empty() || chips.c0.size() != chips.c1.size() || !(chips.t_chip > 0.0))
    throw ConfigError("detector: invalid chip configuration");
  if (seq.bits.empty()) throw ConfigError("detector: empty synchronization sequence");
  if (!(t_ofdm > 0.0)) throw ConfigError("detector: t_ofdm must be positive");
  if (!(noise_var >= 0.0) || !std::isfinite(noise_var))
    throw ConfigError("detector: noise variance must be finite and non-negative");
  if (!(p_fa > 0.0 && p_fa < 1.0)) throw ConfigError("detector: p_fa must be in (0, 1)");
  if (chips.t_bit() < t_ofdm) throw ConfigError("detector: bit shorter than one OFDM symbol");
}

DetectorPlan::DetectorPlan(std::span<const RxSample> layout, DetectorConfig config)
    : cfg_(std::move(config)) {
  cfg_.validate();
  if (cfg_.filtered()) filter_.emplace(cfg_.order, cfg_.cutoff_hz, 1.0 / cfg_.t_ofdm);
  if (layout.empty()) throw WindowError("detector: no samples");

  perm_.resize(layout.size());
  std::iota(perm_.begin(), perm_.end(), 0u);
  std::stable_sort(perm_.begin(), perm_.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (layout[a].k != layout[b].k) return layout[a].k < layout[b].k;
    return layout[a].t < layout[b].t;
  });

  double t_max = 0.0;
  for (const auto& r : layout) t_max = std::max(t_max, r.t);
  const double t_bit = cfg_.chips.t_bit();
  const double obs_end = t_max + cfg_.t_ofdm;
  n_windows_ = obs_end < t_bit
                   ? 0
                   : static_cast<std::int64_t>(std::floor((obs_end - t_bit) / cfg_.t_ofdm + 1e-9)) + 1;

  const std::size_t n_bits = cfg_.seq.n_bits();
  const double per_bit = t_bit / cfg_.t_ofdm;
  stride_ = std::llround(per_bit);
  for (std::size_t m = 0; m < n_bits; ++m) {
    offsets_.push_back(std::llround(static_cast<double>(m) * per_bit));
    signs_.push_back(cfg_.seq.bits[m] ? 1.0 : -1.0);
  }
  n_stat_ = n_windows_ - offsets_.back();
  if (n_stat_ <= 0) throw WindowError("observation shorter than the synchronization sequence");

  warmup_ = cfg_.warmup >= 0 ? cfg_.warmup : static_cast<std::int64_t>(n_bits) * stride_;
  if (cfg_.reference_index >= 0) {
    n_ref_ = cfg_.reference_index;
    if (n_ref_ >= n_stat_)
      throw WindowError("reference index " + std::to_string(n_ref_) +
                        " beyond the statistic length " + std::to_string(n_stat_));
  } else {
    n_ref_ = std::clamp<std::int64_t>((std::min(warmup_, n_stat_ - 1) + n_stat_) / 2, 0,
                                      n_stat_ - 1);
  }

  std::vector<double> times;
  for (std::size_t j = 0; j < perm_.size();) {
    const int k = layout[perm_[j]].k;
    Subcarrier sc;
    sc.begin = static_cast<std::uint32_t>(j);
    times.clear();
    while (j < perm_.size() && layout[perm_[j]].k == k) times.push_back(layout[perm_[j++]].t);
    sc.end = static_cast<std::uint32_t>(j);
    build_windows(sc, times);
    sc.times = times;
    ks_.push_back(k);
    subs_.push_back(std::move(sc));
  }

  for (std::size_t s = 0; s < subs_.size(); ++s) {
    double lambda = 0.0;
    if (cfg_.variance_model == VarianceModel::exact) {
      lambda = exact_lambda(subs_[s]);
    } else {
      const Window& w = subs_[s].windows[static_cast<std::size_t>(n_ref_)];
      if (w.valid())
        lambda = (1.0 / w.a0 + 1.0 / w.b0 + 1.0 / w.a1 + 1.0 / w.b1) / static_cast<double>(n_bits);
    }
    if (!(lambda > 0.0))
      throw WindowError("subcarrier " + std::to_string(ks_[s]) +
                        ": no identifiable window contributes at the reference index");
    lambdas_.push_back(lambda);
    weights_.push_back(1.0 / lambda);
    weight_sum_ += 1.0 / lambda;
  }
  threshold_ = cfg_.variance_model == VarianceModel::exact
                   ? np_threshold(cfg_.p_fa, cfg_.noise_var, lambdas_)
                   : np_threshold_count_based(cfg_.p_fa, cfg_.noise_var, lambdas_);
}

void DetectorPlan::build_windows(Subcarrier& sc, std::span<const double> times) const {
  const auto& chips = cfg_.chips;
  const auto n_chips = static_cast<std::int64_t>(chips.n_chips());
  sc.windows.resize(static_cast<std::size_t>(n_windows_));
  sc.epsilon.assign(static_cast<std::size_t>(n_windows_), 0.0);

  std::size_t first = 0;
  for (std::int64_t n = 0; n < n_windows_; ++n) {
    const double ws = window_start(n, cfg_.t_ofdm);
    while (first < times.size() && chip_index(times[first] - ws, chips.t_chip) < 0) ++first;
    Window& w = sc.windows[static_cast<std::size_t>(n)];
    w.lo = w.hi = static_cast<std::uint32_t>(first);
    // Mirrors the membership rule of correlate().
    bool open0 = false, open1 = false;
    w.run0 = static_cast<std::uint32_t>(sc.runs.size());
    std::vector<std::uint32_t> runs1;
    std::size_t i = first;
    for (; i < times.size(); ++i) {
      const std::int64_t chip = chip_index(times[i] - ws, chips.t_chip);
      if (chip >= n_chips) break;
      const auto j = static_cast<std::size_t>(std::max<std::int64_t>(chip, 0));
      const auto idx = static_cast<std::uint32_t>(i);
      const bool r0 = chips.c0[j] != 0;
      const bool r1 = chips.c1[j] != 0;
      if (r0) {
        ++w.a0;
        if (!open0) sc.runs.push_back(idx);
      } else {
        ++w.b0;
        if (open0) sc.runs.push_back(idx);
      }
      open0 = r0;
      if (r1) {
        ++w.a1;
        if (!open1) runs1.push_back(idx);
      } else {
        ++w.b1;
        if (open1) runs1.push_back(idx);
      }
      open1 = r1;
    }
    w.hi = static_cast<std::uint32_t>(i);
    if (open0) sc.runs.push_back(w.hi);
    if (open1) runs1.push_back(w.hi);
    w.run0_end = static_cast<std::uint32_t>(sc.runs.size());
    w.run1 = w.run0_end;
    sc.runs.insert(sc.runs.end(), runs1.begin(), runs1.end());
    w.run1_end = static_cast<std::uint32_t>(sc.runs.size());
    if (w.valid())
      sc.epsilon[static_cast<std::size_t>(n)] =
          bias_correction(w.a1, w.b1, w.a0, w.b0, cfg_.noise_var);
  }
}

// Coefficient of the debiased contrast at window n in R_k(n_ref), through the
// low-pass stage when present.
std::vector<double> DetectorPlan::tap_coefficients() const {
  const std::size_t n_bits = offsets_.size();
  const auto len = static_cast<std::size_t>(n_ref_ + offsets_.back() + 1);
  std::vector<double> c(len, 0.0);
  if (filter_) {
    const std::vector<double> h = filter_->impulse_response(len);
    for (std::size_t m = 0; m < n_bits; ++m) {
      const auto base = static_cast<std::size_t>(n_ref_ + offsets_[m]);
      for (std::size_t n = 0; n <= base; ++n) c[n] += signs_[m] * h[base - n];
    }
    for (double& v : c) v /= static_cast<double>(n_bits);
  } else {
    for (std::size_t m = 0; m < n_bits; ++m)
      c[static_cast<std::size_t>(n_ref_ + offsets_[m])] += signs_[m] / static_cast<double>(n_bits);
  }
  // Drop the negligible tail of the impulse response.
  double c_max = 0.0;
  for (double v : c) c_max = std::max(c_max, std::abs(v));
  for (double& v : c)
    if (std::abs(v) <= 1e-13 * c_max) v = 0.0;
  return c;
}

// e_i(n) = w_i(n)^T |y| over the window's samples.
void DetectorPlan::window_weights(const Subcarrier& sc, std::int64_t n, std::vector<double>& w0,
                                  std::vector<double>& w1) const {
  const Window& w = sc.windows[static_cast<std::size_t>(n)];
  const double ws = window_start(n, cfg_.t_ofdm);
  const std::size_t len = w.hi - w.lo;
  w0.resize(len);
  w1.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    const auto chip =
        static_cast<std::size_t>(chip_index(sc.times[w.lo + i] - ws, cfg_.chips.t_chip));
    w0[i] = cfg_.chips.c0[chip] ? 1.0 / w.a0 : -1.0 / w.b0;
    w1[i] = cfg_.chips.c1[chip] ? 1.0 / w.a1 : -1.0 / w.b1;
  }
}

std::pair<std::size_t, std::size_t> DetectorPlan::support(const Subcarrier& sc,
                                                          const std::vector<double>& c) const {
  std::size_t lo = std::numeric_limits<std::size_t>::max(), hi = 0;
  for (std::size_t n = 0; n < c.size(); ++n) {
    const Window& w = sc.windows[n];
    if (c[n] == 0.0 || !w.valid()) continue;
    lo = std::min<std::size_t>(lo, w.lo);
    hi = std::max<std::size_t>(hi, w.hi);
  }
  if (hi == 0) lo = 0;
  return {lo, hi};
}

// R_k(n_ref) is a quadratic form in the envelope noise, alpha^T M alpha with
// alpha ~ N(0, sigma^2/2 I), hence Var = (sigma^4 / 2) ||M||_F^2.
double DetectorPlan::exact_lambda(const Subcarrier& sc) const {
  const std::vector<double> c = tap_coefficients();
  const auto [lo, hi] = support(sc, c);
  if (hi <= lo) return 0.0;
  const std::size_t span = hi - lo;
  if (span > kMaxExactSpan)
    throw ConfigError("exact variance: reference span of " + std::to_string(span) +
                      " samples is too large; use the count_based variance model");

  std::vector<double> mat(span * span, 0.0);
  std::vector<double> w0, w1;
  for (std::size_t n = 0; n < c.size(); ++n) {
    const Window& w = sc.windows[n];
    if (c[n] == 0.0 || !w.valid()) continue;
    window_weights(sc, static_cast<std::int64_t>(n), w0, w1);
    const double cn = c[n];
    for (std::size_t i = 0; i < w0.size(); ++i) {
      double* row = mat.data() + (w.lo - lo + i) * span + (w.lo - lo);
      for (std::size_t j = 0; j < w0.size(); ++j) row[j] += cn * (w1[i] * w1[j] - w0[i] * w0[j]);
    }
  }
  double fro = 0.0;
  for (double v : mat) fro += v * v;
  return 0.5 * fro;
}

// Under H1 the contrast also carries 2 (mu1 n1 - mu0 n0), linear in the
// noise; its variance adds to the quadratic H0 part.
double DetectorPlan::signal_noise_variance(std::span<const RxSample> noise_free) const {
  std::vector<double> env;
  gather_envelopes(noise_free, env);
  const std::vector<double> c = tap_coefficients();
  std::vector<double> prefix, w0, w1, v;
  double total = 0.0;
  for (std::size_t s = 0; s < subs_.size(); ++s) {
    const Subcarrier& sc = subs_[s];
    const auto [lo, hi] = support(sc, c);
    if (hi <= lo) continue;
    centred_prefix(std::span<const double>(env).subspan(sc.begin, sc.end - sc.begin), prefix);
    v.assign(hi - lo, 0.0);
    for (std::size_t n = 0; n < c.size(); ++n) {
      const Window& w = sc.windows[n];
      if (c[n] == 0.0 || !w.valid()) continue;
      double mu0 = 0.0, mu1 = 0.0;
      correlate_windows(sc, prefix, static_cast<std::int64_t>(n), static_cast<std::int64_t>(n) + 1,
                        &mu0, &mu1);
      window_weights(sc, static_cast<std::int64_t>(n), w0, w1);
      for (std::size_t i = 0; i < w0.size(); ++i)
        v[w.lo - lo + i] += 2.0 * c[n] * (mu1 * w1[i] - mu0 * w0[i]);
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    const double wk = weights_[s] / weight_sum_;
    total += wk * wk * 0.5 * cfg_.noise_var * norm;
  }
  return total;
}

void DetectorPlan::gather_envelopes(std::span<const RxSample> samples,
                                    std::vector<double>& env) const {
  if (samples.size() != perm_.size())
    throw ConfigError("samples do not match the detector layout (" +
                      std::to_string(samples.size()) + " records, expected " +
                      std::to_string(perm_.size()) + ")");
  std::vector<std::complex<double>> y(perm_.size());
  std::size_t j = 0;
  for (std::size_t s = 0; s < subs_.size(); ++s) {
    for (std::uint32_t i = subs_[s].begin; i < subs_[s].end; ++i, ++j) {
      const RxSample& r = samples[perm_[i]];
      if (r.k != ks_[s]) throw ConfigError("samples do not match the detector layout");
      y[j] = r.y;
    }
  }
  env.resize(y.size());
  kernels::active().envelopes(y.data(), env.data(), y.size());
}


void DetectorPlan::correlate_windows(const Subcarrier& sc, std::span<const double> prefix,
                                     std::int64_t n_begin, std::int64_t n_end, double* e0,
                                     double* e1) const {
  auto run_sum = [&](std::uint32_t from, std::uint32_t to) {
    double s = 0.0;
    for (std::uint32_t r = from; r < to; r += 2) s += prefix[sc.runs[r + 1]] - prefix[sc.runs[r]];
    return s;
  };
  for (std::int64_t n = n_begin; n < n_end; ++n) {
    const Window& w = sc.windows[static_cast<std::size_t>(n)];
    double* o0 = e0 + (n - n_begin);
    double* o1 = e1 + (n - n_begin);
    if (!w.valid()) {
      *o0 = *o1 = 0.0;
      continue;
    }
    const double total = prefix[w.hi] - prefix[w.lo];
    const double r0 = run_sum(w.run0, w.run0_end);
    const double r1 = run_sum(w.run1, w.run1_end);
    *o0 = r0 / w.a0 - (total - r0) / w.b0;
    *o1 = r1 / w.a1 - (total - r1) / w.b1;
  }
}

DetectionReport DetectorPlan::detect(std::span<const RxSample> samples, bool keep_traces) const {
  if (warmup_ >= n_stat_)
    throw WindowError("observation too short: the warm-up period covers the whole statistic");
  std::vector<double> env;
  gather_envelopes(samples, env);
  const auto& kt = kernels::active();
  const auto nw = static_cast<std::size_t>(n_windows_);
  const auto ns = static_cast<std::size_t>(n_stat_);
  const std::size_t n_bits = offsets_.size();

  DetectionReport rep;
  rep.subcarriers = ks_;
  rep.lambdas = lambdas_;
  rep.var = threshold_.variance;
  rep.r_star = threshold_.r_star;
  rep.p_fa_target = cfg_.p_fa;
  rep.warmup = warmup_;
  rep.bit_stride = stride_;
  rep.reference_index = n_ref_;
  rep.variance_model = cfg_.variance_model;

  std::vector<std::vector<double>> rows(subs_.size());
  std::vector<double> prefix, e0(nw), e1(nw), d(nw), f;
  for (std::size_t s = 0; s < subs_.size(); ++s) {
    const Subcarrier& sc = subs_[s];
    centred_prefix(std::span<const double>(env).subspan(sc.begin, sc.end - sc.begin), prefix);
    correlate_windows(sc, prefix, 0, n_windows_, e0.data(), e1.data());
    kt.debiased_contrast(e0.data(), e1.data(), sc.epsilon.data(), d.data(), nw);
    if (filter_) f = filter_->apply(d);
    const std::vector<double>& x = filter_ ? f : d;
    rows[s].resize(ns);
    kt.signed_sliding_sum(x.data(), ns, offsets_.data(), signs_.data(), n_bits, rows[s].data());
    if (keep_traces) {
      CorrelatorTrace tr;
      tr.k = ks_[s];
      tr.e0 = e0;
      tr.e1 = e1;
      tr.a0.resize(nw);
      tr.b0.resize(nw);
      tr.a1.resize(nw);
      tr.b1.resize(nw);
      tr.lambda.resize(nw);
      for (std::size_t n = 0; n < nw; ++n) {
        const Window& w = sc.windows[n];
        tr.a0[n] = w.a0;
        tr.b0[n] = w.b0;
        tr.a1[n] = w.a1;
        tr.b1[n] = w.b1;
        tr.lambda[n] = w.valid() ? (1.0 / w.a0 + 1.0 / w.b0 + 1.0 / w.a1 + 1.0 / w.b1) /
                                       static_cast<double>(n_bits)
                                 : 0.0;
      }
      tr.epsilon = sc.epsilon;
      tr.contrast = d;
      tr.filtered = x;
      tr.r = rows[s];
      rep.traces.push_back(std::move(tr));
    }
  }

  std::vector<const double*> ptrs;
  for (const auto& r : rows) ptrs.push_back(r.data());
  rep.r_m.resize(ns);
  kt.weighted_rows(ptrs.data(), weights_.data(), ptrs.size(), weight_sum_, rep.r_m.data(), ns);

  const PeakLobe pl = peak_to_lobe(rep.r_m, warmup_, stride_);
  rep.peak_index = pl.peak_index;
  rep.peak_value = pl.peak;
  rep.side_lobe = pl.side;
  rep.peak_to_lobe_db = pl.ratio_db;
  rep.decision = pl.peak > threshold_.r_star ? Decision::H1 : Decision::H0;
  return rep;
}

double DetectorPlan::reference_statistic(std::span<const RxSample> samples) const {
  std::vector<double> r_k;
  return reference_statistic(samples, r_k);
}

double DetectorPlan::reference_statistic(std::span<const RxSample> samples,
                                         std::vector<double>& r_k) const {
  std::vector<double> env;
  gather_envelopes(samples, env);
  const auto& kt = kernels::active();
  const std::size_t n_bits = offsets_.size();
  r_k.assign(subs_.size(), 0.0);

  std::vector<double> prefix, e0, e1, eps, d, f;
  std::vector<std::int64_t> dense(n_bits);
  std::iota(dense.begin(), dense.end(), std::int64_t{0});
  for (std::size_t s = 0; s < subs_.size(); ++s) {
    const Subcarrier& sc = subs_[s];
    centred_prefix(std::span<const double>(env).subspan(sc.begin, sc.end - sc.begin), prefix);
    if (!filter_) {
      // Only the N_b windows on the taps are needed.
      e0.resize(n_bits);
      e1.resize(n_bits);
      eps.resize(n_bits);
      d.resize(n_bits);
      for (std::size_t m = 0; m < n_bits; ++m) {
        const std::int64_t n = n_ref_ + offsets_[m];
        correlate_windows(sc, prefix, n, n + 1, &e0[m], &e1[m]);
        eps[m] = sc.epsilon[static_cast<std::size_t>(n)];
      }
      kt.debiased_contrast(e0.data(), e1.data(), eps.data(), d.data(), n_bits);
      kt.signed_sliding_sum(d.data(), 1, dense.data(), signs_.data(), n_bits, &r_k[s]);
    } else {
      const auto len = static_cast<std::size_t>(n_ref_ + offsets_.back() + 1);
      e0.resize(len);
      e1.resize(len);
      d.resize(len);
      correlate_windows(sc, prefix, 0, static_cast<std::int64_t>(len), e0.data(), e1.data());
      kt.debiased_contrast(e0.data(), e1.data(), sc.epsilon.data(), d.data(), len);
      f = filter_->apply(d);
      kt.signed_sliding_sum(f.data() + n_ref_, 1, offsets_.data(), signs_.data(), n_bits, &r_k[s]);
    }
  }
  std::vector<const double*> ptrs;
  for (double& v : r_k) ptrs.push_back(&v);
  double out = 0.0;
  kt.weighted_rows(ptrs.data(), weights_.data(), ptrs.size(), weight_sum_, &out, 1);
  return out;
}

DetectionReport detect(std::span<const RxSample> samples, const DetectorConfig& config,
                       bool keep_traces) {
  return DetectorPlan(samples, config).detect(samples, keep_traces);
}

std::vector<double> bc_correlate(std::span<const double> x, const SyncSequence& seq,
                                 std::int64_t delta_t) {
  if (seq.bits.empty()) throw ConfigError("bc_correlate: empty sequence");
  if (delta_t < 1) throw ConfigError("bc_correlate: delta_t must be positive");
  const std::size_t n_bits = seq.n_bits();
  const std::int64_t need = static_cast<std::int64_t>(n_bits) * delta_t;
  if (static_cast<std::int64_t>(x.size()) < need)
    throw WindowError("bc_correlate: series shorter than N_b * delta_t");
  std::vector<std::int64_t> offsets(n_bits);
  std::vector<double> signs(n_bits);
  for (std::size_t m = 0; m < n_bits; ++m) {
    offsets[m] = static_cast<std::int64_t>(m) * delta_t;
    signs[m] = seq.bits[m] ? 1.0 : -1.0;
  }
  const std::size_t n_out = x.size() - static_cast<std::size_t>(offsets.back());
  std::vector<double> out(n_out);
  kernels::active().signed_sliding_sum(x.data(), n_out, offsets.data(), signs.data(), n_bits,
                                       out.data());
  return out;
}

PeakLobe peak_to_lobe(std::span<const double> r, std::int64_t begin, std::int64_t exclusion) {
  const auto size = static_cast<std::int64_t>(r.size());
  if (begin < 0 || begin >= size) throw WindowError("peak search range is empty");
  PeakLobe pl;
  pl.peak_index = begin;
  for (std::int64_t n = begin; n < size; ++n)
    if (r[static_cast<std::size_t>(n)] > r[static_cast<std::size_t>(pl.peak_index)]) pl.peak_index = n;
  pl.peak = r[static_cast<std::size_t>(pl.peak_index)];
  for (std::int64_t n = begin; n < size; ++n) {
    if (std::abs(n - pl.peak_index) < exclusion) continue;
    pl.side = std::max(pl.side, std::abs(r[static_cast<std::size_t>(n)]));
  }
  pl.ratio_db = pl.peak > 0.0 && pl.side > 0.0 ? 20.0 * std::log10(pl.peak / pl.side)
                                               : std::numeric_limits<double>::quiet_NaN();
  return pl;
}

}  // namespace zedbs
