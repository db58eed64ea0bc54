#pragma once

// Config-driven experiment harness behind the command-line tool.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kkt/diagnostics.hpp"
#include "kkt/kernels.hpp"
#include "kkt/sampler.hpp"

namespace kkt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitSampling = 2;
inline constexpr int kExitVerification = 3;

inline constexpr int kSummarySchemaVersion = 1;

/// Seed of the shipped stochastic-volatility data set.
inline constexpr std::uint64_t kSvDataSeed = 20240521;
inline constexpr std::size_t kSvObservationCount = 100;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "KKT_OUT_DIR";

/// A user error in a config file or command line; the message names the
/// offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KernelSection {
  KernelConfig kernel;
  bool tune = false;
  double target_accept = 0.25;
};

struct RunConfig {
  // [experiment]
  std::string experiment = "bimodal";
  std::string modes_file;
  std::string data_file;
  std::string centres_file;
  std::size_t lattice_side = 5;
  double gl_tau = 2.0;
  double gl_lambda = 0.5;
  double gl_alpha = 0.1;

  // [sampler]
  std::string sampler = "kkt_memoryless";

  // [base], [teleport]
  KernelSection base;
  KernelSection teleport;
  std::string alpha = "indicator";  // gkkt trigger: indicator | soft
  double soft_width = 1.0;
  std::uint64_t max_trials = kDefaultRejectionCap;

  // [region]
  std::string region = "envelope";  // envelope | level_set
  double threshold = 0.0;
  double envelope_c = 0.0;
  double box_lower = -15.0;
  double box_upper = 15.0;

  // [run]
  std::uint64_t n_steps = 1'000'000;
  std::uint64_t burn_in = 100'000;
  std::uint64_t seed = 1;
  std::optional<Vector> initial;  // Y_0; also Z_0 when it lies in the region
  std::uint64_t tune_steps = 5000;

  // [output]
  std::string out_dir;  // empty: $KKT_OUT_DIR, else ./kkt_out
  bool write_trace = true;
  std::size_t histogram_bins = 50;
  double histogram_lower = -15.0;
  double histogram_upper = 15.0;

  /// Defaults for an experiment, before any user keys are applied.
  static RunConfig defaults(const std::string& experiment);

  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  /// Every key with its resolved value, in the config file format.
  std::string to_ini() const;
};

/// Parses config text; `source` names it in error messages. Unknown sections
/// or keys are errors. Relative file paths resolve against `base_dir`.
RunConfig parse_config(std::string_view text, const std::string& source,
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

struct TuningRecord {
  std::string kernel;     // "base" or "teleport"
  std::string parameter;  // sigma, gamma or delta_t
  double value = 0.0;
  double acceptance = 0.0;  // mean acceptance over the second half of the pre-run
  std::uint64_t steps = 0;
};

struct RunResult {
  RunConfig config;
  std::string target_label;
  std::string region_description;
  KernelConfig base;      // after tuning
  KernelConfig teleport;  // after tuning
  Vector z0;  // initial anchor, in {alpha > 0} for teleporting samplers
  Vector y0;  // initial state: run.initial, else z0
  Trace trace;
  ChainSummary burn_in;
  ChainSummary chain;
  TraceSummary summary;
  std::optional<EssReport> ess;
  std::vector<std::string> mode_labels;
  std::vector<double> mode_weights;
  std::optional<double> grid_tv;
  std::optional<RejectionStats> rejection;
  std::vector<TuningRecord> tuning;
  std::uint64_t alpha_clamp_events = 0;
};

struct RunHooks {
  /// Called with every post-burn-in state.
  std::function<void(const KktState&)> sink;
  /// Keep the trace in memory (needed for diagnostics).
  bool keep_trace = true;
  /// Compute ESS, mode weights and grid TV.
  bool diagnostics = true;
};

/// Builds the experiment, tunes, burns in and runs. Throws ConfigError for
/// invalid settings and the sampler's structured errors otherwise.
RunResult run_experiment(const RunConfig& config, const RunHooks& hooks = {});

nlohmann::json summary_json(const RunResult& result, const std::string& build_id);

/// The "ess" block of a summary. Per-evaluation fields only when
/// `with_eval_counts`.
nlohmann::json ess_json(const EssReport& report, bool with_eval_counts);

/// Per-cell trace mass for 2-D experiments: "x_lo,x_hi,y_lo,y_hi,mass".
void write_histogram_csv(const std::filesystem::path& path, const Trace& trace, const Grid& grid);

// ---------------------------------------------------------------------------
// Trace files

/// "step,teleported,accepted,x0,..." with shortest round-trip floats.
class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& path, std::size_t dim);
  ~TraceWriter();
  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;

  /// Throws std::runtime_error on a failed write.
  void write(const KktState& s);
  void close();

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  std::string line_;
  std::size_t dim_;
};

class TraceFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws TraceFormatError with the line number of the first malformed line.
Trace read_trace_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Oracle verification sweep

struct CheckResult {
  std::string name;
  bool passed = true;
  double worst = 0.0;  // worst residual or statistic
  double tolerance = 0.0;
  std::uint64_t worst_seed = 0;  // instance seed that produced `worst`
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  std::size_t instances = 0;
  double seconds = 0.0;
  bool all_passed() const;
  const CheckResult* find(std::string_view name) const;
};

/// Randomized oracle sweep: Kac, generalized Kac, memoryless invariance,
/// extended-target invariance and marginal, uniqueness link, reversibility
/// biconditional, MH equivalence.
VerifyReport run_oracle_sweep(std::size_t instances, std::uint64_t seed);

/// Drift and small-set certificates, TV decay fit on a certified instance and
/// on a permutation control.
VerifyReport run_ergodicity_checks();

/// Checks for a user-supplied chain file.
VerifyReport verify_chain_file(const std::filesystem::path& path);

void print_report(std::ostream& out, const VerifyReport& report);

// ---------------------------------------------------------------------------
// Commands

struct RunCommand {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
};

struct VerifyCommand {
  std::optional<std::filesystem::path> chains_dir;
  std::size_t sweep_size = 200;
  std::uint64_t seed = 7;
};

struct EssCommand {
  std::filesystem::path trace;
  std::optional<std::filesystem::path> summary;  // supplies evaluation counts
  std::optional<std::filesystem::path> out;
};

int cmd_run(const RunCommand& cmd, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyCommand& cmd, std::ostream& out, std::ostream& err);
int cmd_ess(const EssCommand& cmd, std::ostream& out, std::ostream& err);

std::string build_id();

}  // namespace kkt
