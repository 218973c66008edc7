#include "zedbs/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <thread>

#include "zedbs/correlator.hpp"
#include "zedbs/error.hpp"
#include "zedbs/kernels.hpp"
#include "zedbs/report_io.hpp"
#include "zedbs/rng.hpp"

namespace zedbs {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t trial_seed(const ExperimentConfig& cfg, std::size_t point, std::size_t trial) {
  return derive_seed(cfg.seed, seed_tag::trial, (static_cast<std::uint64_t>(point) << 40) + trial);
}

double noise_var_for_snr(const ExperimentConfig& cfg, double snr_db) {
  const double g = cfg.channel.direct_gain_scale;
  return cfg.grid.pilot_power * g * g * std::pow(10.0, -snr_db / 10.0);
}

RsMap observation_map(const ExperimentConfig& cfg) {
  return build_rs_map(cfg.grid, cfg.duration()).first_subcarriers(cfg.subcarriers_used);
}

// RS needed for R_M(n0) without the low-pass stage: the N_b tap windows.
RsMap reference_map(const ExperimentConfig& cfg, const RsMap& full) {
  const double per_bit = cfg.chips.t_bit() / cfg.grid.t_ofdm;
  const auto last = std::llround(static_cast<double>(cfg.seq.n_bits() - 1) * per_bit);
  const double from = static_cast<double>(cfg.n0()) * cfg.grid.t_ofdm;
  const double to = static_cast<double>(cfg.n0() + last) * cfg.grid.t_ofdm + cfg.chips.t_bit() +
                    cfg.grid.tti();
  return full.filtered([&](const RsEntry& e) { return e.t >= from && e.t < to; });
}

std::vector<RxSample> layout_of(const RsMap& map) {
  std::vector<RxSample> out;
  out.reserve(map.size());
  for (const auto& e : map.entries()) out.push_back({e.k, e.l, e.t, {}});
  return out;
}

RxGridSamples draw_trial(const ExperimentConfig& cfg, const RsMap& map, ChannelParams ch,
                         std::uint64_t seed) {
  ch.seed = derive_seed(seed, seed_tag::channel);
  const ChannelRealization chan = sample_channel(cfg.subcarriers_used, ch);
  return synthesize_rx(map, cfg.chips, cfg.seq, cfg.t0, chan, derive_seed(seed, seed_tag::noise));
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + frac * (v[i + 1] - v[i]);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// Largest distance between the empirical CDF of z and the standard normal.
double ks_distance(std::vector<double> z) {
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double cdf = 1.0 - q_function(z[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  return d;
}

void finish_rate(SweepPoint& p) {
  p.empirical = static_cast<double>(p.hits) / static_cast<double>(p.trials);
  p.ci = wilson_interval(p.hits, p.trials);
}

ExperimentReport new_report(const ExperimentConfig& cfg, std::string name, SweepKind kind) {
  ExperimentReport rep;
  rep.experiment = std::move(name);
  rep.sweep_kind = std::string(to_string(kind));
  rep.config_hash = config_hash(cfg.document);
  rep.seed = cfg.seed;
  rep.threads = cfg.threads;
  return rep;
}

SweepKind require_kind(const ExperimentConfig& cfg, std::initializer_list<SweepKind> allowed,
                       SweepKind fallback) {
  if (!cfg.sweep_kind) return fallback;
  for (SweepKind k : allowed)
    if (k == *cfg.sweep_kind) return k;
  throw ConfigError("experiment.sweep_kind '" + std::string(to_string(*cfg.sweep_kind)) +
                    "' is not supported by this experiment");
}

void require_aligned(const ExperimentConfig& cfg, const char* what) {
  if (cfg.channel.mode != ChannelMode::aligned)
    throw ConfigError(std::string(what) +
                      " needs a known path strength: set channel.mode to \"aligned\"");
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

}  // namespace

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      (void)w;
      try {
        for (std::size_t i; !failed.load() && (i = next.fetch_add(1)) < n;) fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

ExperimentReport run_pfa_calibration(const ExperimentConfig& cfg) {
  const auto start = Clock::now();
  const SweepKind kind = require_kind(cfg, {SweepKind::p_fa}, SweepKind::p_fa);
  ExperimentReport rep = new_report(cfg, "calibrate", kind);
  const std::vector<double> targets = cfg.sweep.empty() ? std::vector<double>{1e-1, 1e-2, 1e-3} : cfg.sweep;
  for (double p : targets)
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("calibrate: sweep values must be in (0, 1)");

  ChannelParams h0 = cfg.channel;
  h0.zed_gain_scale = 0.0;
  const bool filtered = cfg.detector.filtered_statistic && cfg.detector.cutoff_hz > 0.0;
  const RsMap full = observation_map(cfg);
  const RsMap map = filtered ? full : reference_map(cfg, full);
  const DetectorPlan plan(layout_of(map), cfg.detector_config(h0.noise_var, filtered));
  const double var = plan.threshold().variance;

  std::unique_ptr<DetectorPlan> sliding;
  if (cfg.sliding_diagnostic_trials > 0)
    sliding = std::make_unique<DetectorPlan>(layout_of(full),
                                             cfg.detector_config(h0.noise_var, cfg.detector.cutoff_hz > 0.0));

  for (std::size_t pi = 0; pi < targets.size(); ++pi) {
    std::vector<double> stat(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t i) {
      const RxGridSamples rx = draw_trial(cfg, map, h0, trial_seed(cfg, pi, i));
      stat[i] = plan.reference_statistic(rx.records);
    });
    SweepPoint pt;
    pt.x = targets[pi];
    pt.var = var;
    pt.r_star = std::sqrt(var) * q_inverse(targets[pi]);
    pt.trials = cfg.trials;
    for (double s : stat) pt.hits += s > pt.r_star ? 1 : 0;
    finish_rate(pt);
    pt.predicted = targets[pi];
    if (var > 0.0) {
      std::vector<double> z(stat.size());
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = stat[i] / std::sqrt(var);
      const double m = mean_of(z);
      double ss = 0.0;
      for (double v : z) ss += (v - m) * (v - m);
      pt.extra["z_mean"] = m;
      pt.extra["z_sd"] = z.size() > 1 ? std::sqrt(ss / static_cast<double>(z.size() - 1)) : 0.0;
      pt.extra["ks_distance"] = ks_distance(std::move(z));
    }
    if (sliding) {
      const std::size_t n = cfg.sliding_diagnostic_trials;
      const double r_sl = std::sqrt(sliding->threshold().variance) * q_inverse(targets[pi]);
      std::vector<std::uint8_t> hit(n);
      parallel_for(n, cfg.threads, [&](std::size_t i) {
        const RxGridSamples rx = draw_trial(cfg, full, h0, trial_seed(cfg, targets.size() + pi, i));
        hit[i] = sliding->detect(rx.records).peak_value > r_sl ? 1 : 0;
      });
      std::size_t h = 0;
      for (auto v : hit) h += v;
      pt.extra["sliding_max_trials"] = n;
      pt.extra["sliding_max_rate"] = static_cast<double>(h) / static_cast<double>(n);
    }
    rep.points.push_back(std::move(pt));
  }
  rep.summary["noise_var"] = h0.noise_var;
  rep.summary["var"] = var;
  rep.summary["lambdas"] = std::vector<double>(plan.lambdas().begin(), plan.lambdas().end());
  rep.summary["reference_index"] = plan.reference_index();
  rep.summary["filtered_statistic"] = filtered;
  rep.wall_seconds = seconds_since(start);
  return rep;
}

ExperimentReport run_detection_curve(const ExperimentConfig& cfg) {
  const auto start = Clock::now();
  require_aligned(cfg, "roc");
  const SweepKind kind =
      require_kind(cfg, {SweepKind::eta_sq, SweepKind::eta_sq_over_sd}, SweepKind::eta_sq_over_sd);
  ExperimentReport rep = new_report(cfg, "roc", kind);
  const std::vector<double> sweep = cfg.sweep.empty() ? std::vector<double>{0.0, 1.0, 2.0, 3.0} : cfg.sweep;

  const double sigma2 = cfg.channel.noise_var;
  const bool filtered = cfg.detector.filtered_statistic && cfg.detector.cutoff_hz > 0.0;
  const RsMap full = observation_map(cfg);
  const RsMap map = filtered ? full : reference_map(cfg, full);
  const DetectorPlan plan(layout_of(map), cfg.detector_config(sigma2, filtered));
  const Threshold th = plan.threshold();
  if (kind == SweepKind::eta_sq_over_sd && !(th.variance > 0.0))
    throw ConfigError("roc: eta_sq_over_sd needs a positive noise variance");

  for (std::size_t pi = 0; pi < sweep.size(); ++pi) {
    const double eta_sq = kind == SweepKind::eta_sq ? sweep[pi] : sweep[pi] * std::sqrt(th.variance);
    if (eta_sq < 0.0) throw ConfigError("roc: path strengths must be non-negative");
    ChannelParams ch = cfg.channel;
    ch.zed_gain_scale = std::sqrt(eta_sq / cfg.grid.pilot_power);
    // Validates the separation floor for this strength.
    (void)sample_channel(1, ch);

    std::vector<std::uint8_t> hit(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t i) {
      const RxGridSamples rx = draw_trial(cfg, map, ch, trial_seed(cfg, pi, i));
      hit[i] = plan.reference_statistic(rx.records) > th.r_star ? 1 : 0;
    });
    SweepPoint pt;
    pt.x = sweep[pi];
    pt.eta_sq = eta_sq;
    pt.r_star = th.r_star;
    pt.var = th.variance;
    pt.trials = cfg.trials;
    for (auto h : hit) pt.hits += h;
    finish_rate(pt);
    pt.predicted = detection_probability(eta_sq, th);

    ChannelParams quiet = ch;
    quiet.noise_var = 0.0;
    const RxGridSamples nf = draw_trial(cfg, map, quiet, trial_seed(cfg, pi, 0));
    const double mean_nf = plan.reference_statistic(nf.records);
    const double extra_var = plan.signal_noise_variance(nf.records);
    pt.extra["noise_free_statistic"] = mean_nf;
    pt.extra["h1_variance"] = th.variance + extra_var;
    pt.extra["predicted_h1_variance"] =
        detection_probability(mean_nf, Threshold{th.r_star, th.variance + extra_var});
    rep.points.push_back(std::move(pt));
  }
  rep.summary["noise_var"] = sigma2;
  rep.summary["p_fa_target"] = cfg.detector.p_fa;
  rep.summary["var"] = th.variance;
  rep.summary["r_star"] = th.r_star;
  rep.summary["filtered_statistic"] = filtered;
  rep.wall_seconds = seconds_since(start);
  return rep;
}

ExperimentReport run_peak_to_lobe(const ExperimentConfig& cfg) {
  const auto start = Clock::now();
  const SweepKind kind = require_kind(cfg, {SweepKind::snr_db}, SweepKind::snr_db);
  ExperimentReport rep = new_report(cfg, "peaklobe", kind);
  const RsMap map = observation_map(cfg);
  const std::vector<RxSample> layout = layout_of(map);

  std::vector<std::pair<double, double>> points;  // (snr_db, sigma^2)
  if (cfg.sweep.empty())
    points.emplace_back(cfg.snr_db, cfg.channel.noise_var);
  else
    for (double s : cfg.sweep) points.emplace_back(s, noise_var_for_snr(cfg, s));

  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    ChannelParams ch = cfg.channel;
    ch.noise_var = points[pi].second;
    const DetectorPlan plan(layout, cfg.detector_config(ch.noise_var, cfg.detector.cutoff_hz > 0.0));
    std::vector<double> ratio(cfg.trials), offset(cfg.trials);
    std::vector<std::uint8_t> hit(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t i) {
      const RxGridSamples rx = draw_trial(cfg, map, ch, trial_seed(cfg, pi, i));
      const DetectionReport d = plan.detect(rx.records);
      ratio[i] = d.peak_to_lobe_db;
      offset[i] = static_cast<double>(d.peak_index - cfg.n0());
      hit[i] = d.decision == Decision::H1 ? 1 : 0;
    });
    std::vector<double> defined;
    for (double r : ratio)
      if (std::isfinite(r)) defined.push_back(r);
    SweepPoint pt;
    pt.x = points[pi].first;
    pt.r_star = plan.threshold().r_star;
    pt.var = plan.threshold().variance;
    pt.trials = cfg.trials;
    for (auto h : hit) pt.hits += h;
    finish_rate(pt);
    pt.predicted = std::numeric_limits<double>::quiet_NaN();
    pt.extra["noise_var"] = ch.noise_var;
    pt.extra["mean_db"] = finite_or_null(defined.empty() ? std::nan("") : mean_of(defined));
    pt.extra["p5_db"] = finite_or_null(percentile(defined, 0.05));
    pt.extra["p95_db"] = finite_or_null(percentile(defined, 0.95));
    pt.extra["undefined"] = cfg.trials - defined.size();
    pt.extra["mean_peak_offset"] = mean_of(offset);
    pt.extra["median_peak_offset"] = percentile(offset, 0.5);
    rep.points.push_back(std::move(pt));
  }
  const json& first = rep.points.front().extra;
  rep.summary["mean_db"] = first["mean_db"];
  rep.summary["p5_db"] = first["p5_db"];
  rep.summary["p95_db"] = first["p95_db"];
  rep.summary["filtered"] = cfg.detector.cutoff_hz > 0.0;
  rep.summary["sequence_peak_gain_db"] = peak_gain_db(cfg.seq);
  rep.wall_seconds = seconds_since(start);
  return rep;
}

RsMap thin_reflective_chips(const RsMap& map, const ChipConfig& chips, double t0) {
  const double t_bit = chips.t_bit();
  std::vector<RsEntry> kept;
  int last_k = -1;
  std::int64_t last_slot = std::numeric_limits<std::int64_t>::min();
  int ordinal = 0;
  for (const auto& e : map.entries()) {
    const double off = e.t - t0;
    if (off < 0.0) {
      kept.push_back(e);
      continue;
    }
    const auto bit = static_cast<std::int64_t>(std::floor(off / t_bit + 1e-9));
    const std::int64_t chip = chip_index(off - static_cast<double>(bit) * t_bit, chips.t_chip);
    const std::int64_t slot = bit * static_cast<std::int64_t>(chips.n_chips()) + chip;
    if (e.k != last_k || slot != last_slot) ordinal = 0;
    last_k = e.k;
    last_slot = slot;
    const bool reflective =
        chip >= 0 && chip < static_cast<std::int64_t>(chips.n_chips()) && chips.c0[static_cast<std::size_t>(chip)];
    if (!reflective || ordinal % 2 == 0) kept.push_back(e);
    ++ordinal;
  }
  return RsMap(map.grid(), std::move(kept));
}

ExperimentReport run_estimator_bias(const ExperimentConfig& cfg) {
  const auto start = Clock::now();
  require_aligned(cfg, "bias");
  if (cfg.sweep_kind || !cfg.sweep.empty())
    throw ConfigError("bias takes no sweep: set channel.zed_gain and channel.snr_db instead");
  ExperimentReport rep = new_report(cfg, "bias", SweepKind::eta_sq);
  rep.sweep_kind = "mask";

  const double sigma2 = cfg.channel.noise_var;
  const double eta_sq = cfg.grid.pilot_power * cfg.channel.zed_gain_scale * cfg.channel.zed_gain_scale;
  const int active = cfg.seq.bits.front();
  const double t_w = static_cast<double>(cfg.n0()) * cfg.grid.t_ofdm;
  const RsMap base = build_rs_map(cfg.grid, cfg.duration()).first_subcarriers(1);
  ExperimentConfig one = cfg;
  one.subcarriers_used = 1;

  const char* names[] = {"regular", "irregular"};
  for (std::size_t mi = 0; mi < 2; ++mi) {
    const RsMap masked = mi == 0 ? base : thin_reflective_chips(base, cfg.chips, cfg.t0);
    const RsMap map = masked.filtered(
        [&](const RsEntry& e) { return e.t >= t_w && e.t < t_w + cfg.chips.t_bit(); });
    std::vector<double> times;
    for (const auto& e : map.entries()) times.push_back(e.t);

    std::vector<double> est(cfg.trials), ei2(cfg.trials), ej2(cfg.trials);
    CorrelatorOutput counts;
    {
      std::vector<double> flat(times.size(), 1.0);
      counts = correlate(times, flat, cfg.chips, t_w);
    }
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t i) {
      const RxGridSamples rx = draw_trial(one, map, cfg.channel, trial_seed(cfg, mi, i));
      std::vector<double> env(rx.records.size());
      for (std::size_t s = 0; s < env.size(); ++s) env[s] = kernels::envelope(rx.records[s].y);
      const CorrelatorOutput out = correlate(times, env, cfg.chips, t_w);
      est[i] = eta_estimate(out, active, sigma2);
      ei2[i] = out.e(active) * out.e(active);
      ej2[i] = out.e(1 - active) * out.e(1 - active);
    });
    const int ai = counts.a(active), bi = counts.b(active);
    const int aj = counts.a(1 - active), bj = counts.b(1 - active);
    SweepPoint pt;
    pt.x = static_cast<double>(mi);
    pt.eta_sq = eta_sq;
    pt.trials = cfg.trials;
    pt.empirical = mean_of(est);
    pt.predicted = eta_sq;
    const double se = stderr_of(est, pt.empirical);
    pt.ci = {pt.empirical - 1.959963984540054 * se, pt.empirical + 1.959963984540054 * se};
    pt.extra["mask"] = names[mi];
    pt.extra["stderr"] = se;
    pt.extra["z"] = se > 0.0 ? (pt.empirical - eta_sq) / se : 0.0;
    pt.extra["counts"] = {{"a_i", ai}, {"b_i", bi}, {"a_j", aj}, {"b_j", bj}};
    pt.extra["epsilon"] = bias_correction(ai, bi, aj, bj, sigma2);
    const double mi2 = mean_of(ei2), mj2 = mean_of(ej2);
    pt.extra["mean_ei_sq"] = mi2;
    pt.extra["mean_ej_sq"] = mj2;
    pt.extra["stderr_ei_sq"] = stderr_of(ei2, mi2);
    pt.extra["stderr_ej_sq"] = stderr_of(ej2, mj2);
    // Second moments for total complex variance sigma^2 (sigma^2/2 per
    // component) and for sigma^2 read as the per-component variance.
    pt.extra["ei_sq_model"] = eta_sq + 0.5 * sigma2 * (1.0 / ai + 1.0 / bi);
    pt.extra["ej_sq_model"] = 0.5 * sigma2 * (1.0 / aj + 1.0 / bj);
    pt.extra["ei_sq_full_sigma"] = eta_sq + sigma2 * (1.0 / ai + 1.0 / bi);
    pt.extra["ej_sq_full_sigma"] = sigma2 * (1.0 / aj + 1.0 / bj);
    rep.points.push_back(std::move(pt));
  }
  rep.summary["noise_var"] = sigma2;
  rep.summary["eta_sq"] = eta_sq;
  rep.summary["active_bit"] = active;
  rep.wall_seconds = seconds_since(start);
  return rep;
}

json experiment_to_json(const ExperimentReport& rep) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = rep.experiment;
  j["sweep_kind"] = rep.sweep_kind;
  j["config_hash"] = rep.config_hash;
  j["seed"] = rep.seed;
  j["summary"] = rep.summary;
  json pts = json::array();
  for (const auto& p : rep.points) {
    json o;
    o["x"] = p.x;
    o["eta_sq"] = p.eta_sq;
    o["r_star"] = finite_or_null(p.r_star);
    o["var"] = finite_or_null(p.var);
    o["trials"] = p.trials;
    o["hits"] = p.hits;
    o["empirical"] = finite_or_null(p.empirical);
    o["predicted"] = finite_or_null(p.predicted);
    o["ci_lo"] = finite_or_null(p.ci.lo);
    o["ci_hi"] = finite_or_null(p.ci.hi);
    for (auto it = p.extra.begin(); it != p.extra.end(); ++it) o[it.key()] = it.value();
    pts.push_back(std::move(o));
  }
  j["points"] = std::move(pts);
  return j;
}

json experiment_metadata(const ExperimentReport& rep) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = rep.experiment;
  j["config_hash"] = rep.config_hash;
  j["seed"] = rep.seed;
  j["threads"] = rep.threads;
  j["wall_seconds"] = rep.wall_seconds;
  j["kernel_isa"] = std::string(kernels::isa_name(kernels::active_isa()));
  return j;
}

void write_points_csv(std::ostream& os, const ExperimentReport& rep) {
  auto num = [&](double v) {
    if (!std::isfinite(v)) return;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  os << "x,eta_sq,predicted,empirical,ci_lo,ci_hi,trials\n";
  for (const auto& p : rep.points) {
    num(p.x);
    os << ',';
    num(p.eta_sq);
    os << ',';
    num(p.predicted);
    os << ',';
    num(p.empirical);
    os << ',';
    num(p.ci.lo);
    os << ',';
    num(p.ci.hi);
    os << ',' << p.trials << '\n';
  }
}

}  // namespace zedbs
