#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <ostream>

#include "kkt/runner.hpp"

#ifndef KKT_BUILD_ID
#define KKT_BUILD_ID "unknown"
#endif

namespace kkt {
namespace {

std::filesystem::path resolve_out_dir(const RunCommand& cmd, const RunConfig& config) {
  if (cmd.out_dir) return *cmd.out_dir;
  if (!config.out_dir.empty()) return config.out_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "kkt_out";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("write failed on " + path.string());
}

void write_error(const std::filesystem::path& dir, const std::string& kind, const std::string& what,
                 nlohmann::json extra = nlohmann::json::object()) {
  extra["schema_version"] = kSummarySchemaVersion;
  extra["build_id"] = build_id();
  extra["error"] = kind;
  extra["message"] = what;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream out(dir / "error.json");
  if (out) out << extra.dump(2) << "\n";
}

}  // namespace

std::string build_id() { return KKT_BUILD_ID; }

int cmd_run(const RunCommand& cmd, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = load_config(cmd.config);
    if (cmd.seed) config.seed = *cmd.seed;
    config.out_dir = resolve_out_dir(cmd, config).string();
    config.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitValidation;
  }
  const std::filesystem::path dir = config.out_dir;
  try {
    std::filesystem::create_directories(dir);
    write_text(dir / "config.ini", config.to_ini());
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << "\n";
    return kExitSampling;
  }

  std::unique_ptr<TraceWriter> writer;
  RunHooks hooks;
  RunResult result;
  try {
    if (config.write_trace) {
      // Dimension is only known once the target is built; open lazily.
      hooks.sink = [&](const KktState& s) {
        if (!writer) writer = std::make_unique<TraceWriter>(dir / "trace.csv", s.y.size());
        writer->write(s);
      };
    }
    result = run_experiment(config, hooks);
    if (writer) writer->close();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DataFileError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const RejectionCapExceeded& e) {
    err << "sampling error: " << e.what() << "\n";
    write_error(dir, "rejection_cap_exceeded", e.what(),
                {{"draws", e.stats().draws}, {"rejections", e.stats().rejections},
                 {"accepts", e.stats().accepts}});
    return kExitSampling;
  } catch (const SinkError& e) {
    err << "sampling error: " << e.what() << "\n";
    write_error(dir, "sink_failure", e.what(), {{"step_index", e.step_index()}});
    return kExitSampling;
  } catch (const std::exception& e) {
    err << "sampling error: " << e.what() << "\n";
    write_error(dir, "runtime_error", e.what());
    return kExitSampling;
  }

  try {
    const nlohmann::json summary = summary_json(result, build_id());
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    if (result.z0.size() == 2) {
      const Grid grid{{config.histogram_lower, config.histogram_lower},
                      {config.histogram_upper, config.histogram_upper},
                      {config.histogram_bins, config.histogram_bins}};
      write_histogram_csv(dir / "histogram.csv", result.trace, grid);
    }
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << "\n";
    return kExitSampling;
  }

  const TraceSummary& s = result.summary;
  out << config.experiment << " / " << config.sampler << ": " << s.n_steps << " steps, "
      << s.n_teleports << " teleports, base acceptance " << s.base_accept_rate << "\n";
  for (std::size_t i = 0; i < result.mode_labels.size(); ++i) {
    out << "  weight " << result.mode_labels[i] << " = " << result.mode_weights[i] << "\n";
  }
  if (result.rejection) {
    out << "  mean rejections per accept = " << result.rejection->mean_rejections_per_accept()
        << "\n";
  }
  if (result.ess) {
    out << "  mean ESS = " << result.ess->ess_spread.mean
        << ", mean ESS per evaluation = " << result.ess->per_eval_spread.mean << "\n";
  }
  out << "  output in " << dir.string() << "\n";
  return kExitOk;
}

int cmd_verify(const VerifyCommand& cmd, std::ostream& out, std::ostream& err) {
  bool ok = true;
  std::vector<std::filesystem::path> files;
  if (cmd.chains_dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(*cmd.chains_dir, ec)) {
      err << "validation error: " << cmd.chains_dir->string() << " is not a directory\n";
      return kExitValidation;
    }
    for (const auto& entry : std::filesystem::directory_iterator(*cmd.chains_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      err << "validation error: no .csv chain files in " << cmd.chains_dir->string() << "\n";
      return kExitValidation;
    }
    // Read everything first so that malformed input fails before any work.
    for (const auto& f : files) {
      try {
        (void)read_chain_file(f);
      } catch (const std::exception& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitValidation;
      }
    }
  }

  out << "== oracle sweep (" << cmd.sweep_size << " instances, seed " << cmd.seed << ")\n";
  const VerifyReport sweep = run_oracle_sweep(cmd.sweep_size, cmd.seed);
  print_report(out, sweep);
  ok = ok && sweep.all_passed();

  out << "== ergodicity certificates\n";
  const VerifyReport ergo = run_ergodicity_checks();
  print_report(out, ergo);
  ok = ok && ergo.all_passed();

  for (const auto& f : files) {
    out << "== chain file " << f.string() << "\n";
    try {
      const VerifyReport r = verify_chain_file(f);
      print_report(out, r);
      ok = ok && r.all_passed();
    } catch (const std::exception& e) {
      err << "verification error in " << f.string() << ": " << e.what() << "\n";
      ok = false;
    }
  }
  out << (ok ? "all checks passed" : "VERIFICATION FAILED") << "\n";
  return ok ? kExitOk : kExitVerification;
}

int cmd_ess(const EssCommand& cmd, std::ostream& out, std::ostream& err) {
  nlohmann::json result;
  try {
    const Trace trace = read_trace_csv(cmd.trace);
    if (trace.size() == 0) throw TraceFormatError(cmd.trace.string() + ": trace has no rows");
    std::uint64_t dens = 0, grad = 0;
    bool counts = false;
    if (cmd.summary) {
      std::ifstream in(*cmd.summary);
      if (!in) throw std::runtime_error("cannot open summary " + cmd.summary->string());
      const nlohmann::json s = nlohmann::json::parse(in);
      const auto& ts = s.at("trace_summary");
      dens = ts.at("density_evals").get<std::uint64_t>();
      grad = ts.at("grad_evals").get<std::uint64_t>();
      if (ts.at("n_steps").get<std::uint64_t>() != trace.size()) {
        throw std::runtime_error("summary covers " + std::to_string(ts.at("n_steps").get<std::uint64_t>()) +
                                 " steps but the trace has " + std::to_string(trace.size()));
      }
      counts = true;
    }
    const EssReport report = ess_report(trace, counts ? dens : trace.size(), counts ? grad : 0);
    std::uint64_t teleports = 0, accepts = 0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
      teleports += trace.teleported[i];
      accepts += trace.accepted[i];
    }
    result["schema_version"] = kSummarySchemaVersion;
    result["trace"] = cmd.trace.string();
    result["n_steps"] = trace.size();
    result["dimension"] = trace.dim;
    result["n_teleports"] = teleports;
    result["teleport_fraction"] = static_cast<double>(teleports) / static_cast<double>(trace.size());
    result["base_accept_rate"] = static_cast<double>(accepts) / static_cast<double>(trace.size());
    if (counts) {
      result["density_evals"] = dens;
      result["grad_evals"] = grad;
    }
    result["ess"] = ess_json(report, counts);
  } catch (const std::exception& e) {
    err << "ess error: " << e.what() << "\n";
    return kExitValidation;
  }
  const std::string text = result.dump(2) + "\n";
  if (cmd.out) {
    try {
      write_text(*cmd.out, text);
    } catch (const std::exception& e) {
      err << "output error: " << e.what() << "\n";
      return kExitSampling;
    }
  } else {
    out << text;
  }
  return kExitOk;
}

}  // namespace kkt
