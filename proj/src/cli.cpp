#include "zedbs/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "zedbs/config.hpp"
#include "zedbs/error.hpp"
#include "zedbs/harness.hpp"
#include "zedbs/kernels.hpp"
#include "zedbs/report_io.hpp"
#include "zedbs/rng.hpp"

namespace zedbs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Manifest {
  std::string subcommand;
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::optional<unsigned> threads;
  std::string capture;
  bool traces = false;
};

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  body(os);
  os.flush();
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

void write_json(const fs::path& path, const json& j) {
  write_file(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

fs::path prepare_out(const std::string& dir) {
  const fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw IoError("cannot create output directory '" + dir + "'");
  return p;
}

ExperimentConfig resolve_config(const Manifest& m) {
  std::vector<std::string> overrides = m.overrides;
  if (m.seed) overrides.push_back("seed=" + std::to_string(*m.seed));
  ExperimentConfig cfg = m.config_path.empty() ? make_config(json::object(), overrides)
                                               : load_config(m.config_path, overrides);
  if (m.threads) {
    if (*m.threads < 1) throw ConfigError("--threads must be >= 1");
    cfg.threads = *m.threads;
  }
  return cfg;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json detection_json(const DetectionReport& rep, const ExperimentConfig& cfg) {
  json j = report_to_json(rep);
  j["config_hash"] = config_hash(cfg.document);
  j["seed"] = cfg.seed;
  return j;
}

json run_meta(const std::string& subcommand, const ExperimentConfig& cfg, double wall) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["subcommand"] = subcommand;
  j["config_hash"] = config_hash(cfg.document);
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["wall_seconds"] = wall;
  j["kernel_isa"] = std::string(kernels::isa_name(kernels::active_isa()));
  return j;
}

void emit_detection(const fs::path& out, const DetectionReport& rep, const ExperimentConfig& cfg,
                    std::ostream& os) {
  write_json(out / "detection.json", detection_json(rep, cfg));
  write_file(out / "r_m.csv", [&](std::ostream& s) { write_rm_csv(s, rep); });
  if (!rep.traces.empty())
    write_file(out / "traces.csv", [&](std::ostream& s) { write_trace_csv(s, rep); });
  os << "decision=" << to_string(rep.decision) << " peak_index=" << rep.peak_index
     << " peak=" << fmt(rep.peak_value) << " r_star=" << fmt(rep.r_star)
     << " peak_to_lobe_db=" << fmt(rep.peak_to_lobe_db) << '\n';
}

int cmd_simulate(const Manifest& m, std::ostream& os) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = resolve_config(m);
  const fs::path out = prepare_out(m.out_dir);
  const RsMap map = build_rs_map(cfg.grid, cfg.duration()).first_subcarriers(cfg.subcarriers_used);
  ChannelParams ch = cfg.channel;
  ch.seed = derive_seed(cfg.seed, seed_tag::channel);
  const ChannelRealization chan = sample_channel(cfg.subcarriers_used, ch);
  const RxGridSamples rx =
      synthesize_rx(map, cfg.chips, cfg.seq, cfg.t0, chan, derive_seed(cfg.seed, seed_tag::noise));
  const DetectionReport rep = detect(
      rx.records, cfg.detector_config(ch.noise_var, cfg.detector.cutoff_hz > 0.0), m.traces);

  write_file(out / "rx_samples.csv", [&](std::ostream& s) { write_rx_csv(s, rx); });
  json truth;
  truth["schema_version"] = kSchemaVersion;
  truth["n0"] = cfg.n0();
  truth["t0"] = cfg.t0;
  truth["noise_var"] = ch.noise_var;
  truth["snr_db"] = cfg.snr_db;
  json sub = json::array();
  for (std::size_t k = 0; k < chan.subcarriers(); ++k) {
    const double g = chan.gamma_proj[k];
    sub.push_back({{"k", k},
                   {"gamma_abs", std::abs(chan.gamma_direct[k])},
                   {"zed_abs", std::abs(chan.zed_path[k])},
                   {"gamma_proj", g},
                   {"eta_sq", cfg.grid.pilot_power * g * g}});
  }
  truth["subcarriers"] = std::move(sub);
  write_json(out / "truth.json", truth);
  write_json(out / "config.json", canonical_document(cfg.document));
  emit_detection(out, rep, cfg, os);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out / "run_meta.json", run_meta("simulate", cfg, wall));
  return kExitOk;
}

int cmd_replay(const Manifest& m, std::ostream& os) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = resolve_config(m);
  std::ifstream in(m.capture, std::ios::binary);
  if (!in) throw IoError("cannot open capture '" + m.capture + "'");
  const RxGridSamples rx = read_rx_csv(in);
  const fs::path out = prepare_out(m.out_dir);
  const DetectionReport rep = detect(
      rx.records, cfg.detector_config(cfg.channel.noise_var, cfg.detector.cutoff_hz > 0.0), m.traces);
  write_json(out / "config.json", canonical_document(cfg.document));
  emit_detection(out, rep, cfg, os);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out / "run_meta.json", run_meta("replay", cfg, wall));
  return kExitOk;
}

void print_points(const ExperimentReport& rep, std::ostream& os) {
  for (const auto& p : rep.points) {
    if (rep.experiment == "calibrate") {
      os << "p_fa=" << fmt(p.x) << " empirical=" << fmt(p.empirical) << " ci=[" << fmt(p.ci.lo)
         << ", " << fmt(p.ci.hi) << "] trials=" << p.trials << '\n';
    } else if (rep.experiment == "roc") {
      os << rep.sweep_kind << '=' << fmt(p.x) << " eta_sq=" << fmt(p.eta_sq)
         << " predicted=" << fmt(p.predicted) << " empirical=" << fmt(p.empirical) << " ci=["
         << fmt(p.ci.lo) << ", " << fmt(p.ci.hi) << "] trials=" << p.trials << '\n';
    } else if (rep.experiment == "peaklobe") {
      auto get = [&](const char* k) {
        return p.extra[k].is_null() ? std::string("nan") : fmt(p.extra[k].get<double>());
      };
      os << "snr_db=" << fmt(p.x) << " mean_db=" << get("mean_db") << " p5_db=" << get("p5_db")
         << " p95_db=" << get("p95_db") << " detect_rate=" << fmt(p.empirical)
         << " trials=" << p.trials << '\n';
    } else {
      os << "mask=" << p.extra["mask"].get<std::string>() << " eta_sq=" << fmt(p.eta_sq)
         << " mean=" << fmt(p.empirical) << " stderr=" << fmt(p.extra["stderr"].get<double>())
         << " z=" << fmt(p.extra["z"].get<double>()) << " trials=" << p.trials << '\n';
    }
  }
}

int cmd_experiment(const Manifest& m, std::ostream& os,
                   ExperimentReport (*run)(const ExperimentConfig&)) {
  const ExperimentConfig cfg = resolve_config(m);
  const fs::path out = prepare_out(m.out_dir);
  const ExperimentReport rep = run(cfg);
  write_json(out / "report.json", experiment_to_json(rep));
  write_file(out / "points.csv", [&](std::ostream& s) { write_points_csv(s, rep); });
  write_json(out / "config.json", canonical_document(cfg.document));
  write_json(out / "run_meta.json", experiment_metadata(rep));
  print_points(rep, os);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ambient-backscatter ZED beacon simulator and detector"};
  app.require_subcommand(1);
  Manifest m;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", m.config_path, "JSON configuration file");
    sub->add_option("--out", m.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", m.seed, "Master seed (overrides the config)");
    sub->add_option("--set", m.overrides, "Override a config key: dotted.key=value (repeatable)")
        ->take_all()
        ->allow_extra_args(false);
    sub->add_option("--threads", m.threads, "Worker threads (results do not depend on it)");
  };
  struct Entry {
    const char* name;
    const char* help;
  };
  const Entry entries[] = {
      {"simulate", "Synthesize one capture and run the detector on it"},
      {"calibrate", "False-alarm calibration under H0"},
      {"roc", "Detection probability versus path strength"},
      {"peaklobe", "Peak-to-lobe ratio of the combined statistic"},
      {"bias", "Path-strength estimator bias for regular and irregular RS masks"},
      {"replay", "Run the detector on a recorded capture CSV"},
  };
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub);
    if (std::string(e.name) == "simulate" || std::string(e.name) == "replay")
      sub->add_flag("--traces", m.traces, "Also write per-subcarrier correlator traces");
    if (std::string(e.name) == "replay")
      sub->add_option("capture", m.capture, "Capture CSV (k,l,t_seconds,re,im)")->required();
    sub->callback([&m, name = std::string(e.name)] { m.subcommand = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (m.subcommand == "simulate") return cmd_simulate(m, out);
    if (m.subcommand == "replay") return cmd_replay(m, out);
    if (m.subcommand == "calibrate") return cmd_experiment(m, out, run_pfa_calibration);
    if (m.subcommand == "roc") return cmd_experiment(m, out, run_detection_curve);
    if (m.subcommand == "peaklobe") return cmd_experiment(m, out, run_peak_to_lobe);
    if (m.subcommand == "bias") return cmd_experiment(m, out, run_estimator_bias);
    err << "error: no subcommand\n";
    return kExitConfig;
  } catch (const SchemaError& e) {
    err << "error: capture schema: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << '\n';
    return kExitConfig;
  } catch (const WindowError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace zedbs
