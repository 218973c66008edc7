#include "zedbs/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "zedbs/error.hpp"

namespace zedbs {

using nlohmann::json;

namespace {

json base_document() {
  return json{
      {"preset", "paper-iv"},
      {"grid",
       {{"n_rb", 2},
        {"t_ofdm", 57.6e-6},
        {"rs_symbol_indices", {0, 7}},
        {"stagger", 3},
        {"pilot_power", 1.0},
        {"subcarriers_used", 6}}},
      {"chips",
       {{"c0", {0, 0, 0, 0, 1, 1, 1, 1}}, {"c1", {0, 1, 0, 1, 0, 1, 0, 1}}, {"t_chip", 1e-3}}},
      {"sequence", {{"kind", "barker21"}, {"flip", "reversal"}, {"bits", nullptr}}},
      {"channel",
       {{"mode", "rayleigh"},
        {"direct_gain", 1.0},
        {"zed_gain", 0.1},
        {"zed_enabled", true},
        {"snr_db", 30.0},
        {"noise_var", nullptr},
        {"separation_floor", 10.0},
        {"phase_model", "iid_uniform"},
        {"walk_step", 0.3}}},
      // 3500 symbols: a whole number of TTIs, past the detector warm-up.
      {"timing", {{"t0", 3500 * 57.6e-6}, {"tail", 0.2}}},
      {"detector",
       {{"p_fa", 1e-3},
        {"cutoff_hz", 100.0},
        {"order", 4},
        {"variance_model", "exact"},
        {"filtered_statistic", false}}},
      {"experiment",
       {{"trials", 10000},
        {"sweep", nullptr},
        {"sweep_kind", nullptr},
        {"threads", 1},
        {"sliding_diagnostic_trials", 0}}},
      {"seed", 1},
  };
}

const json& type_at(const json& tree, const std::string& path) {
  const json* node = &tree;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("unknown config key '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) return *node;
    pos = dot + 1;
  }
}

void check_known_keys(const json& doc, const json& schema, const std::string& prefix) {
  if (!doc.is_object()) throw ConfigError("config: '" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!schema.contains(it.key())) throw ConfigError("unknown config key '" + path + "'");
    const json& s = schema[it.key()];
    if (s.is_object()) check_known_keys(it.value(), s, path);
  }
}

// Typed accessors that name the offending key.
template <class T>
T get(const json& doc, const std::string& path) {
  const json& v = type_at(doc, path);
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && v.get<std::int64_t>() < 0) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + path + "' has the wrong type or value: " + v.dump());
  }
}

std::vector<std::uint8_t> get_bits(const json& doc, const std::string& path) {
  const json& v = type_at(doc, path);
  if (!v.is_array()) throw ConfigError("config key '" + path + "' must be an array of 0/1");
  std::vector<std::uint8_t> out;
  for (const auto& b : v) {
    if (!b.is_number_integer() || (b.get<int>() != 0 && b.get<int>() != 1))
      throw ConfigError("config key '" + path + "' must contain only 0 and 1");
    out.push_back(static_cast<std::uint8_t>(b.get<int>()));
  }
  return out;
}

template <class E>
E get_enum(const json& doc, const std::string& path,
           std::initializer_list<std::pair<const char*, E>> names) {
  const std::string s = get<std::string>(doc, path);
  std::string allowed;
  for (const auto& [name, value] : names) {
    if (s == name) return value;
    allowed += allowed.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError("config key '" + path + "': '" + s + "' is not one of " + allowed);
}

// Like a JSON merge patch, except that null is an ordinary value.
void deep_merge(json& target, const json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (it.value().is_object() && target.contains(it.key()) && target[it.key()].is_object())
      deep_merge(target[it.key()], it.value());
    else
      target[it.key()] = it.value();
  }
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

}  // namespace

std::vector<std::string> preset_names() { return {"paper-iv", "regular-grid"}; }

json preset_document(const std::string& name) {
  json doc = base_document();
  doc["preset"] = name;
  if (name == "paper-iv") return doc;
  if (name == "regular-grid") {
    // One chip per TTI: every chip holds exactly two RS on every subcarrier
    // and a bit spans a whole number of OFDM symbols.
    doc["chips"]["t_chip"] = 14 * 57.6e-6;
    return doc;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

void apply_override(json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string path = assignment.substr(0, eq);
  json* node = &doc;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!node->is_object() || !node->contains(key))
      throw ConfigError("override references unknown config key '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  if (node->is_object()) throw ConfigError("override '" + path + "' must name a leaf key");
  *node = parse_value(assignment.substr(eq + 1));
}

json canonical_document(const json& doc) {
  json out = doc;
  if (out.contains("experiment") && out["experiment"].is_object()) out["experiment"].erase("threads");
  return out;
}

std::string config_hash(const json& doc) {
  const std::string s = canonical_document(doc).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string_view to_string(SweepKind k) noexcept {
  switch (k) {
    case SweepKind::p_fa: return "p_fa";
    case SweepKind::eta_sq: return "eta_sq";
    case SweepKind::eta_sq_over_sd: return "eta_sq_over_sd";
    case SweepKind::snr_db: return "snr_db";
  }
  return "?";
}

std::int64_t ExperimentConfig::n0() const { return std::llround(t0 / grid.t_ofdm); }

double ExperimentConfig::duration() const {
  return t0 + static_cast<double>(seq.n_bits()) * chips.t_bit() + tail;
}

DetectorConfig ExperimentConfig::detector_config(double noise_var, bool filtered) const {
  DetectorConfig d;
  d.chips = chips;
  d.seq = seq;
  d.t_ofdm = grid.t_ofdm;
  d.noise_var = noise_var;
  d.p_fa = detector.p_fa;
  d.cutoff_hz = filtered ? detector.cutoff_hz : 0.0;
  d.order = detector.order;
  d.variance_model = detector.variance_model;
  d.reference_index = n0();
  return d;
}

ExperimentConfig make_config(const json& input, const std::vector<std::string>& overrides) {
  if (!input.is_object()) throw ConfigError("config: document root must be an object");
  std::string preset = "paper-iv";
  if (input.contains("preset")) {
    if (!input["preset"].is_string()) throw ConfigError("config key 'preset' must be a string");
    preset = input["preset"].get<std::string>();
  }
  for (const auto& o : overrides)
    if (o.rfind("preset=", 0) == 0) preset = parse_value(o.substr(7)).get<std::string>();
  json doc = preset_document(preset);
  check_known_keys(input, doc, "");
  deep_merge(doc, input);
  for (const auto& o : overrides) apply_override(doc, o);
  doc["preset"] = preset;

  ExperimentConfig cfg;
  cfg.preset = preset;
  cfg.grid.n_rb = get<int>(doc, "grid.n_rb");
  cfg.grid.t_ofdm = get<double>(doc, "grid.t_ofdm");
  if (!type_at(doc, "grid.rs_symbol_indices").is_array())
    throw ConfigError("grid.rs_symbol_indices must be an array");
  cfg.grid.rs_symbol_indices.clear();
  for (const auto& v : type_at(doc, "grid.rs_symbol_indices")) {
    if (!v.is_number_integer()) throw ConfigError("grid.rs_symbol_indices must hold integers");
    cfg.grid.rs_symbol_indices.push_back(v.get<int>());
  }
  cfg.grid.stagger = get<int>(doc, "grid.stagger");
  cfg.grid.pilot_power = get<double>(doc, "grid.pilot_power");
  cfg.grid.validate();
  if (!(cfg.grid.pilot_power > 0.0)) throw ConfigError("grid.pilot_power must be positive");
  cfg.subcarriers_used = get<int>(doc, "grid.subcarriers_used");
  if (cfg.subcarriers_used < 1 || cfg.subcarriers_used > cfg.grid.subcarriers())
    throw ConfigError("grid.subcarriers_used must be in [1, 4 * n_rb]");

  cfg.chips = make_chip_config(get_bits(doc, "chips.c0"), get_bits(doc, "chips.c1"),
                               get<double>(doc, "chips.t_chip"));

  const std::string kind = get<std::string>(doc, "sequence.kind");
  if (kind == "barker21") {
    cfg.seq = barker_sync_sequence(get_enum<BarkerFlip>(
        doc, "sequence.flip", {{"complement", BarkerFlip::complement}, {"reversal", BarkerFlip::reversal}}));
  } else if (kind == "custom") {
    cfg.seq.bits = get_bits(doc, "sequence.bits");
    if (cfg.seq.bits.empty()) throw ConfigError("sequence.bits must be non-empty");
  } else {
    throw ConfigError("sequence.kind must be 'barker21' or 'custom'");
  }

  auto& ch = cfg.channel;
  ch.mode = get_enum<ChannelMode>(doc, "channel.mode",
                                  {{"rayleigh", ChannelMode::rayleigh},
                                   {"exact_magnitude", ChannelMode::exact_magnitude},
                                   {"aligned", ChannelMode::aligned}});
  ch.direct_gain_scale = get<double>(doc, "channel.direct_gain");
  ch.zed_gain_scale = get<double>(doc, "channel.zed_gain");
  cfg.zed_enabled = get<bool>(doc, "channel.zed_enabled");
  if (!cfg.zed_enabled) ch.zed_gain_scale = 0.0;
  ch.separation_floor = get<double>(doc, "channel.separation_floor");
  ch.phase.model = get_enum<PhaseModel>(doc, "channel.phase_model",
                                        {{"zero", PhaseModel::zero},
                                         {"iid_uniform", PhaseModel::iid_uniform},
                                         {"random_walk", PhaseModel::random_walk}});
  ch.phase.walk_step = get<double>(doc, "channel.walk_step");
  cfg.snr_db = get<double>(doc, "channel.snr_db");
  if (!std::isfinite(cfg.snr_db)) throw ConfigError("channel.snr_db must be finite");
  if (!type_at(doc, "channel.noise_var").is_null()) {
    ch.noise_var = get<double>(doc, "channel.noise_var");
  } else {
    ch.noise_var = cfg.grid.pilot_power * ch.direct_gain_scale * ch.direct_gain_scale *
                   std::pow(10.0, -cfg.snr_db / 10.0);
  }
  // Validates scales, floor and phase parameters.
  (void)sample_channel(1, ch);

  cfg.t0 = get<double>(doc, "timing.t0");
  cfg.tail = get<double>(doc, "timing.tail");
  if (!(cfg.t0 >= 0.0) || !(cfg.tail >= 0.0)) throw ConfigError("timing.t0 and timing.tail must be >= 0");

  auto& det = cfg.detector;
  det.p_fa = get<double>(doc, "detector.p_fa");
  if (!(det.p_fa > 0.0 && det.p_fa < 1.0)) throw ConfigError("detector.p_fa must be in (0, 1)");
  det.cutoff_hz = get<double>(doc, "detector.cutoff_hz");
  det.order = get<int>(doc, "detector.order");
  if (det.cutoff_hz > 0.0) ButterworthLowpass(det.order, det.cutoff_hz, 1.0 / cfg.grid.t_ofdm);
  det.variance_model = get_enum<VarianceModel>(
      doc, "detector.variance_model",
      {{"exact", VarianceModel::exact}, {"count_based", VarianceModel::count_based}});
  det.filtered_statistic = get<bool>(doc, "detector.filtered_statistic");

  cfg.trials = get<std::size_t>(doc, "experiment.trials");
  if (cfg.trials < 1) throw ConfigError("experiment.trials must be >= 1");
  const json& sweep = type_at(doc, "experiment.sweep");
  if (!sweep.is_null()) {
    if (!sweep.is_array() || sweep.empty()) throw ConfigError("experiment.sweep must be a non-empty array");
    for (const auto& v : sweep) {
      if (!v.is_number() || !std::isfinite(v.get<double>()))
        throw ConfigError("experiment.sweep must contain finite numbers");
      cfg.sweep.push_back(v.get<double>());
    }
  }
  if (!type_at(doc, "experiment.sweep_kind").is_null()) {
    cfg.sweep_kind = get_enum<SweepKind>(doc, "experiment.sweep_kind",
                                         {{"p_fa", SweepKind::p_fa},
                                          {"eta_sq", SweepKind::eta_sq},
                                          {"eta_sq_over_sd", SweepKind::eta_sq_over_sd},
                                          {"snr_db", SweepKind::snr_db}});
  }
  cfg.threads = get<unsigned>(doc, "experiment.threads");
  if (cfg.threads < 1) throw ConfigError("experiment.threads must be >= 1");
  cfg.sliding_diagnostic_trials = get<std::size_t>(doc, "experiment.sliding_diagnostic_trials");
  cfg.seed = get<std::uint64_t>(doc, "seed");
  if (cfg.duration() / cfg.grid.t_ofdm > 1e8) throw ConfigError("observation too long");
  cfg.document = std::move(doc);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return make_config(doc, overrides);
}

}  // namespace zedbs
