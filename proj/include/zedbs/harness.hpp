#pragma once
// Monte-Carlo experiments over the receive chain.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

#include "zedbs/config.hpp"
#include "zedbs/np_test.hpp"

namespace zedbs {

struct SweepPoint {
  double x = 0.0;  // sweep coordinate
  double eta_sq = 0.0;
  double r_star = 0.0;
  double var = 0.0;
  std::size_t trials = 0;
  std::size_t hits = 0;
  double empirical = 0.0;
  double predicted = 0.0;
  Interval ci;
  nlohmann::json extra = nlohmann::json::object();
};

struct ExperimentReport {
  std::string experiment;
  std::string sweep_kind;
  std::vector<SweepPoint> points;
  nlohmann::json summary = nlohmann::json::object();
  std::string config_hash;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double wall_seconds = 0.0;
};

/// H0 trials (ZED path forced to zero): fraction with R_M(n0) > r* per
/// false-alarm target in the sweep (default 1e-1, 1e-2, 1e-3).
ExperimentReport run_pfa_calibration(const ExperimentConfig& cfg);

/// Empirical detection rate at n0 against Q((r* - eta^2)/sqrt(var)), per
/// path strength in the sweep. Requires the aligned channel mode.
ExperimentReport run_detection_curve(const ExperimentConfig& cfg);

/// Distribution of the peak-to-lobe ratio of the full sliding chain. The
/// optional sweep is over SNR in dB.
ExperimentReport run_peak_to_lobe(const ExperimentConfig& cfg);

/// Mean and standard error of the path estimate on the first bit window,
/// for the configured RS mask and a thinned irregular one. Requires the
/// aligned channel mode.
ExperimentReport run_estimator_bias(const ExperimentConfig& cfg);

/// Drops every second RS inside chips where c0 is reflective. The quadrant
/// counts stay proportional, so both correlators keep exact cancellation of
/// the ZED term while a_i != b_i.
RsMap thin_reflective_chips(const RsMap& map, const ChipConfig& chips, double t0);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. fn must write only
/// to slots owned by i.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Deterministic content: everything except wall time.
nlohmann::json experiment_to_json(const ExperimentReport& rep);
/// Run metadata: wall time, worker count, kernel ISA.
nlohmann::json experiment_metadata(const ExperimentReport& rep);
/// x,eta_sq,predicted,empirical,ci_lo,ci_hi,trials
void write_points_csv(std::ostream& os, const ExperimentReport& rep);

}  // namespace zedbs
