#pragma once
// Full receive chain: dual correlators, debiased contrast, low-pass,
// sync-sequence correlation, subcarrier combining and the threshold test.

#include <cstdint>
#include <optional>
#include <utility>
#include <span>
#include <vector>

#include "zedbs/channel.hpp"
#include "zedbs/lowpass.hpp"
#include "zedbs/np_test.hpp"
#include "zedbs/waveform.hpp"

namespace zedbs {

enum class VarianceModel {
  exact,        // H0 variance of R_M computed from the sampling pattern (sigma^4 units)
  count_based,  // (sigma^2 / K) sum_k (1/N_b)(1/a0 + 1/b0 + 1/a1 + 1/b1)
};

struct DetectorConfig {
  ChipConfig chips;
  SyncSequence seq;
  double t_ofdm = 57.6e-6;
  double noise_var = 0.0;  // sigma^2, known to the receiver
  double p_fa = 1e-3;
  double cutoff_hz = 100.0;  // <= 0 bypasses the low-pass stage
  int order = 4;
  VarianceModel variance_model = VarianceModel::exact;
  /// Window index at which the H0 variance is evaluated; negative selects
  /// the middle of the search range.
  std::int64_t reference_index = -1;
  /// Leading R_M samples excluded from the peak search; negative selects
  /// N_b * bit_stride.
  std::int64_t warmup = -1;

  bool filtered() const noexcept { return cutoff_hz > 0.0; }
  void validate() const;
};

/// Per subcarrier, per window start n (n * t_ofdm).
struct CorrelatorTrace {
  int k = 0;
  std::vector<double> e0, e1;
  std::vector<int> a0, b0, a1, b1;
  std::vector<double> epsilon;   // bias correction of e1^2 - e0^2
  std::vector<double> lambda;    // (1/N_b)(1/a0 + 1/b0 + 1/a1 + 1/b1), 0 if not identifiable
  std::vector<double> contrast;  // e1^2 - e0^2 - epsilon
  std::vector<double> filtered;  // low-pass output (== contrast when bypassed)
  std::vector<double> r;         // R(n, k)
};

enum class Decision { H0, H1 };

struct DetectionReport {
  std::vector<int> subcarriers;
  std::vector<double> lambdas;  // per-subcarrier H0 variance factors used for combining
  std::vector<double> r_m;      // R_M(n), n in [0, r_m.size())
  double var = 0.0;
  double r_star = 0.0;
  double p_fa_target = 0.0;
  Decision decision = Decision::H0;
  std::int64_t peak_index = -1;
  double peak_value = 0.0;
  double side_lobe = 0.0;
  double peak_to_lobe_db = 0.0;  // NaN when undefined (non-positive peak or zero side lobe)
  std::int64_t warmup = 0;
  std::int64_t bit_stride = 0;
  std::int64_t reference_index = 0;
  VarianceModel variance_model = VarianceModel::exact;
  std::vector<CorrelatorTrace> traces;  // empty unless requested
};

/// Sample layout, window partitions, filter and threshold, precomputed once
/// for a given RS pattern and reused across noise realizations.
class DetectorPlan {
 public:
  /// Only (k, t) of each record is used. Records may come in any order.
  /// Throws WindowError if the observation is shorter than the sequence or a
  /// subcarrier has no identifiable window at the reference index.
  DetectorPlan(std::span<const RxSample> layout, DetectorConfig config);

  const DetectorConfig& config() const noexcept { return cfg_; }
  const std::vector<int>& subcarriers() const noexcept { return ks_; }
  std::size_t sample_count() const noexcept { return perm_.size(); }
  std::int64_t window_count() const noexcept { return n_windows_; }
  std::int64_t statistic_length() const noexcept { return n_stat_; }
  std::int64_t bit_stride() const noexcept { return stride_; }
  std::int64_t warmup() const noexcept { return warmup_; }
  std::int64_t reference_index() const noexcept { return n_ref_; }
  std::span<const std::int64_t> tap_offsets() const noexcept { return offsets_; }
  std::span<const double> tap_signs() const noexcept { return signs_; }
  std::span<const double> lambdas() const noexcept { return lambdas_; }
  const Threshold& threshold() const noexcept { return threshold_; }
  const std::optional<ButterworthLowpass>& filter() const noexcept { return filter_; }

  /// Runs the whole chain. samples must have the plan's layout.
  DetectionReport detect(std::span<const RxSample> samples, bool keep_traces = false) const;

  /// R_M at reference_index() only. Bit-identical to detect().r_m at that
  /// index, at a fraction of the cost when the low-pass stage is bypassed.
  double reference_statistic(std::span<const RxSample> samples) const;
  /// Same, but also returns R(n_ref, k) per subcarrier.
  double reference_statistic(std::span<const RxSample> samples, std::vector<double>& r_k) const;

  /// Extra variance of R_M(n_ref) when the ZED is present: the part linear
  /// in the noise, given the noise-free samples of the same layout. Zero
  /// without a ZED path.
  double signal_noise_variance(std::span<const RxSample> noise_free) const;

 private:
  struct Window {
    std::uint32_t lo = 0, hi = 0;        // local sample range
    std::uint32_t run0 = 0, run0_end = 0;  // reflective runs of c0
    std::uint32_t run1 = 0, run1_end = 0;  // reflective runs of c1
    int a0 = 0, b0 = 0, a1 = 0, b1 = 0;
    bool valid() const noexcept { return a0 > 0 && b0 > 0 && a1 > 0 && b1 > 0; }
  };
  struct Subcarrier {
    std::uint32_t begin = 0, end = 0;  // into perm_
    std::vector<Window> windows;
    std::vector<std::uint32_t> runs;  // [begin, end) pairs, local indices
    std::vector<double> epsilon;
    std::vector<double> times;
  };

  void build_windows(Subcarrier& sc, std::span<const double> times) const;
  std::vector<double> tap_coefficients() const;
  void window_weights(const Subcarrier& sc, std::int64_t n, std::vector<double>& w0,
                      std::vector<double>& w1) const;
  std::pair<std::size_t, std::size_t> support(const Subcarrier& sc,
                                              const std::vector<double>& c) const;
  double exact_lambda(const Subcarrier& sc) const;
  void gather_envelopes(std::span<const RxSample> samples, std::vector<double>& env) const;
  void correlate_windows(const Subcarrier& sc, std::span<const double> prefix, std::int64_t n_begin,
                         std::int64_t n_end, double* e0, double* e1) const;

  DetectorConfig cfg_;
  std::vector<int> ks_;
  std::vector<std::uint32_t> perm_;  // record indices grouped by subcarrier, time-ordered
  std::vector<Subcarrier> subs_;
  std::int64_t n_windows_ = 0;
  std::int64_t n_stat_ = 0;
  std::int64_t stride_ = 0;
  std::int64_t warmup_ = 0;
  std::int64_t n_ref_ = 0;
  std::vector<std::int64_t> offsets_;
  std::vector<double> signs_;
  std::vector<double> lambdas_;
  std::vector<double> weights_;
  double weight_sum_ = 0.0;
  Threshold threshold_;
  std::optional<ButterworthLowpass> filter_;
};

/// Convenience wrapper: plan + detect.
DetectionReport detect(std::span<const RxSample> samples, const DetectorConfig& config,
                       bool keep_traces = false);

/// R(n) = (1/N_b) sum_m (2 b_m - 1) x(n + m * delta_t), for every n where the
/// taps fit. Throws WindowError if x is shorter than N_b * delta_t.
std::vector<double> bc_correlate(std::span<const double> x, const SyncSequence& seq,
                                 std::int64_t delta_t);

/// Peak of r in [begin, r.size()) and the largest |r| over the same range at
/// distance >= exclusion from it.
struct PeakLobe {
  std::int64_t peak_index = -1;
  double peak = 0.0;
  double side = 0.0;
  double ratio_db = 0.0;  // NaN when undefined
};
PeakLobe peak_to_lobe(std::span<const double> r, std::int64_t begin, std::int64_t exclusion);

}  // namespace zedbs
