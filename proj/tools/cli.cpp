#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>

#include "rfmsim/experiment.hpp"

namespace rfmsim::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool trace = false;
  unsigned jobs = 1;
};

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  // A report can be fed back in; its echoed config is what reruns.
  if (j.is_object() && j.contains("simulator") && j.contains("config")) j = j["config"];
  return j;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
}

void summarize(std::ostream& out, const Json& report) {
  const Json& r = report["result"];
  const std::string kind = report["kind"];
  if (kind == "COVERT" || kind == "COVERT_RFMSB") {
    out << kind << ": accuracy " << r["accuracy"].dump() << " over " << r["bits_sent"] << " bits, gap "
        << r["gap_ns"].dump() << " ns, raw " << std::fixed << std::setprecision(1)
        << r["raw_bandwidth_KiBps"].get<double>() << " KiB/s per sub-channel\n";
  } else if (kind == "DOS") {
    out << "DOS: nRFM simulated " << r["simulated_nrfm"].dump() << ", analytical " << r["analytical_nrfm_exact"]
        << ", predicted max slowdown " << r["predicted_max_slowdown"].dump() << '\n';
    for (const auto& v : r["victims"])
      out << "  victim " << v["agent"] << ": slowdown " << v["slowdown"].dump() << '\n';
  } else if (kind == "VALIDATE_MODEL") {
    out << "raaimt,analytical,simulated,relative_error\n";
    for (const auto& row : r["rows"])
      out << row["raaimt"] << ',' << row["analytical_nrfm_exact"].get<std::string>() << ','
          << row["simulated_nrfm"].dump() << ',' << row["relative_error"].dump() << '\n';
  }
}

int do_sweep(const ExperimentConfig& c, const Options& o, std::ostream& out) {
  const SweepResult s = run_sweep(c.sweep, o.jobs);
  fs::create_directories(o.out_dir);
  {
    std::ofstream f(fs::path(o.out_dir) / "sweep.csv", std::ios::binary);
    write_csv(f, s.columns, s.rows);
  }
  {
    std::ofstream f(fs::path(o.out_dir) / "sweep_summary.csv", std::ios::binary);
    write_csv(f, s.summary_columns, s.summary_rows);
  }
  Json report;
  report["simulator"] = "rfmsim";
  report["version"] = RFMSIM_VERSION;
  report["kind"] = "SWEEP";
  report["seed"] = c.seed;
  report["config"] = config_to_json(c);
  report["result"] = {{"points", s.rows.size()}, {"table", "sweep.csv"}, {"summary", "sweep_summary.csv"}};
  write_file(fs::path(o.out_dir) / "report.json", report.dump(2) + "\n");
  out << "SWEEP: " << s.rows.size() << " points written to " << (fs::path(o.out_dir) / "sweep.csv").string()
      << '\n';
  return kOk;
}

int execute(const std::string& verb, const Options& o, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  Json j = o.config.empty() ? Json::object() : load_json(o.config);
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  if (verb == "validate-model") j["kind"] = "VALIDATE_MODEL";
  if (o.seed) j["seed"] = *o.seed;
  ExperimentConfig c = parse_config(j);

  int rc = kOk;
  if (verb == "sweep" || c.kind == ExperimentKind::Sweep) {
    if (c.kind != ExperimentKind::Sweep) throw ConfigError("kind: the sweep verb needs kind SWEEP");
    rc = do_sweep(c, o, out);
  } else {
    ExperimentOutput r = run_experiment(c, o.trace);
    fs::create_directories(o.out_dir);
    write_file(fs::path(o.out_dir) / "report.json", r.report.dump(2) + "\n");
    if (o.trace) {
      std::ofstream f(fs::path(o.out_dir) / "trace.csv", std::ios::binary);
      write_trace_csv(f, r.trace);
    }
    summarize(out, r.report);
  }
  // Wall-clock time stays out of the report so reruns are byte-identical.
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  err << "wall-clock " << std::fixed << std::setprecision(3) << secs << " s\n";
  return rc;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DDR5 refresh-management timing simulator"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("-c,--config", o.config, "experiment config (JSON) or a previous report");
    if (need_config) opt->required();
    sub->add_option("-o,--out", o.out_dir, "output directory");
    sub->add_option("--seed", seed, "override the top-level seed");
  };
  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run, true);
  run->add_flag("--trace", o.trace, "also write trace.csv");
  auto* sweep = app.add_subcommand("sweep", "run a parameter grid");
  add_common(sweep, true);
  sweep->add_option("-j,--jobs", o.jobs, "grid points run in parallel")->check(CLI::Range(1u, 256u));
  auto* validate = app.add_subcommand("validate-model", "compare the analytical nRFM model with simulation");
  add_common(validate, false);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  for (auto* sub : {run, sweep, validate})
    if (sub->count("--seed")) o.seed = seed;

  const std::string verb = run->parsed() ? "run" : sweep->parsed() ? "sweep" : "validate-model";
  try {
    return execute(verb, o, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const SyncError& e) {
    err << "synchronization failure: " << e.what() << '\n';
    return kSyncFailure;
  } catch (const std::logic_error& e) {
    err << "invariant violation: " << e.what() << '\n';
    return kInvariantViolation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace rfmsim::cli
