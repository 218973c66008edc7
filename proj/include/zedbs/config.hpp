#pragma once
// Experiment configuration: presets, JSON documents and dotted-key overrides.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "zedbs/channel.hpp"
#include "zedbs/detector.hpp"
#include "zedbs/waveform.hpp"

namespace zedbs {

enum class SweepKind {
  p_fa,            // false-alarm targets
  eta_sq,          // ZED path strength
  eta_sq_over_sd,  // ZED path strength in units of the H0 standard deviation
  snr_db,          // P_u |Gamma|^2 / sigma^2
};

struct DetectorSettings {
  double p_fa = 1e-3;
  double cutoff_hz = 100.0;
  int order = 4;
  VarianceModel variance_model = VarianceModel::exact;
  /// Monte-Carlo experiments evaluate R_M at the sequence start; with this
  /// set they do so on the low-pass filtered chain.
  bool filtered_statistic = false;
};

struct ExperimentConfig {
  std::string preset;
  GridConfig grid;
  int subcarriers_used = 6;
  ChipConfig chips;
  SyncSequence seq;
  ChannelParams channel;  // noise_var resolved; seed unused (derived per trial)
  double snr_db = 20.0;
  bool zed_enabled = true;
  double t0 = 0.0;
  double tail = 0.0;
  DetectorSettings detector;
  std::size_t trials = 1;
  std::vector<double> sweep;
  std::optional<SweepKind> sweep_kind;
  unsigned threads = 1;
  std::size_t sliding_diagnostic_trials = 0;
  std::uint64_t seed = 1;
  nlohmann::json document;  // fully expanded, validated document

  /// Window index of the sequence start.
  std::int64_t n0() const;
  /// [0, duration) covers t0, the whole sequence and the tail.
  double duration() const;
  DetectorConfig detector_config(double noise_var, bool filtered) const;
};

/// Names of the built-in presets.
std::vector<std::string> preset_names();
/// Complete default document for a preset. Throws ConfigError if unknown.
nlohmann::json preset_document(const std::string& name);

/// Expands the preset named in doc (default "paper-iv"), merges doc over it,
/// applies "dotted.key=value" overrides, validates and converts. Unknown keys
/// and invalid values throw ConfigError.
ExperimentConfig make_config(const nlohmann::json& doc, const std::vector<std::string>& overrides = {});
/// Same, from a file. A missing or unparsable file throws ConfigError naming the path.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

/// Applies one "a.b.c=value" override in place; value is parsed as JSON,
/// falling back to a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// The document without settings that cannot change results (worker count).
nlohmann::json canonical_document(const nlohmann::json& doc);

/// FNV-1a 64 of the compact canonical serialization, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

std::string_view to_string(SweepKind k) noexcept;

}  // namespace zedbs
