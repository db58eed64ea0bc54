#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "kkt/runner.hpp"
#include "kkt/target.hpp"

namespace {

int write_data(const std::filesystem::path& dir, std::uint64_t sv_seed) {
  try {
    std::filesystem::create_directories(dir);
    const auto ys = kkt::simulate_sv_observations(kkt::kSvObservationCount, sv_seed);
    kkt::write_observations_csv(dir / "sv_observations.csv", ys);
    std::ofstream modes(dir / "fifteen_modes.csv");
    modes << "x1,x2\n";
    for (const auto& m : kkt::default_fifteen_modes()) modes << m[0] << "," << m[1] << "\n";
    if (!modes) throw std::runtime_error("write failed on fifteen_modes.csv");
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kkt::kExitSampling;
  }
  std::cout << "wrote " << (dir / "sv_observations.csv").string() << " and "
            << (dir / "fifteen_modes.csv").string() << "\n";
  return kkt::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kick-Kac teleportation samplers: experiments, oracle checks and ESS analysis"};
  app.set_version_flag("--version", kkt::build_id());
  app.require_subcommand(1);

  kkt::RunCommand run;
  std::uint64_t seed = 0;
  std::string out_dir;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a config file");
  run_cmd->add_option("--config", run.config, "Config file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the config seed");
  auto* out_opt = run_cmd->add_option("--out", out_dir, "Output directory (default $KKT_OUT_DIR, else ./kkt_out)");

  kkt::VerifyCommand verify;
  std::string chains;
  auto* verify_cmd = app.add_subcommand("verify", "Run the finite-state oracle checks");
  auto* chains_opt = verify_cmd->add_option("--chains", chains, "Directory of chain CSV files");
  verify_cmd->add_option("--sweep-size", verify.sweep_size, "Random instances in the sweep")
      ->check(CLI::Range(1, 1000000));
  verify_cmd->add_option("--seed", verify.seed, "Seed of the first sweep instance");

  kkt::EssCommand ess;
  std::string summary, ess_out;
  auto* ess_cmd = app.add_subcommand("ess", "Recompute ESS from a stored trace");
  ess_cmd->add_option("--trace", ess.trace, "Trace CSV")->required();
  auto* summary_opt = ess_cmd->add_option("--summary", summary, "Run summary supplying evaluation counts");
  auto* ess_out_opt = ess_cmd->add_option("--out", ess_out, "Output JSON (default stdout)");

  std::string data_dir = "data";
  auto* data_cmd = app.add_subcommand("data", "Write the default SV observations and mode list");
  data_cmd->add_option("--dir", data_dir, "Destination directory");
  std::uint64_t sv_seed = kkt::kSvDataSeed;
  data_cmd->add_option("--sv-seed", sv_seed, "Seed for the simulated SV observations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kkt::kExitOk : kkt::kExitValidation;
  }

  if (*run_cmd) {
    if (*seed_opt) run.seed = seed;
    if (*out_opt) run.out_dir = out_dir;
    return kkt::cmd_run(run, std::cout, std::cerr);
  }
  if (*verify_cmd) {
    if (*chains_opt) verify.chains_dir = chains;
    return kkt::cmd_verify(verify, std::cout, std::cerr);
  }
  if (*ess_cmd) {
    if (*summary_opt) ess.summary = summary;
    if (*ess_out_opt) ess.out = ess_out;
    return kkt::cmd_ess(ess, std::cout, std::cerr);
  }
  return write_data(data_dir, sv_seed);
}
