#include <doctest.h>

#include <sstream>

#include "kkt/runner.hpp"
#include "support/helpers.hpp"

using namespace kkt;

namespace {

std::string config_error(std::string_view text) {
  try {
    (void)parse_config(text, "cfg.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, std::string_view needle) { return s.find(needle) != std::string::npos; }

const char* kSmallBimodal =
    "[experiment]\nname = bimodal\n[run]\nn_steps = 2000\nburn_in = 100\nseed = 3\n";

}  // namespace

TEST_CASE("config parse errors name the line and field") {
  CHECK(contains(config_error("[run]\nn_steps = 10\nbogus = 1\n"), "cfg.ini:3: unknown key 'bogus'"));
  CHECK(contains(config_error("[nowhere]\n"), "unknown section [nowhere]"));
  CHECK(contains(config_error("[run]\nseed = 1\nseed = 2\n"), "cfg.ini:3: duplicate key 'seed'"));
  CHECK(contains(config_error("[run]\nn_steps = -5\n"), "n_steps"));
  CHECK(contains(config_error("[base]\ngamma = abc\n"), "gamma"));
  CHECK(contains(config_error("seed = 1\n"), "outside of any section"));
  CHECK(contains(config_error("[run\n"), "malformed section header"));
  CHECK(contains(config_error("[experiment]\nname = nope\n"), "nope"));
  CHECK(contains(config_error("[base]\nkernel = gibbs\n"), "rwm, mala or hmc"));
}

TEST_CASE("experiment defaults") {
  const RunConfig bi = RunConfig::defaults("bimodal");
  CHECK(bi.sampler == "kkt_memoryless");
  CHECK(bi.region == "envelope");
  CHECK(bi.n_steps == 1000000);
  CHECK_NOTHROW(bi.validate());

  const RunConfig sv = RunConfig::defaults("stoch_vol");
  CHECK(sv.base.kernel.kind == KernelKind::HMC);
  CHECK(sv.threshold == 75.0);
  CHECK(sv.base.tune);

  CHECK(RunConfig::defaults("ginzburg_landau").threshold == 100.0);
  CHECK_THROWS_AS(RunConfig::defaults("custom").validate(), ConfigError);
  CHECK_THROWS_AS(RunConfig::defaults("nothing"), ConfigError);
}

TEST_CASE("resolved config round-trips through the file format") {
  const RunConfig c = parse_config(
      "[experiment]\nname = fifteen_mode\n[base]\ngamma = 0.5\n[run]\nseed = 42\n", "a.ini");
  const RunConfig back = parse_config(c.to_ini(), "b.ini");
  CHECK(back.to_ini() == c.to_ini());
  CHECK(back.seed == 42);
  CHECK(back.base.kernel.gamma == 0.5);
}

TEST_CASE("config validation rules") {
  CHECK(contains(config_error("[sampler]\nkind = kkt_memoryless\n[region]\ntype = level_set\nthreshold = 3\n"),
                 "region.type"));
  CHECK(contains(config_error("[teleport]\nmax_trials = 0\n"), "max_trials"));
  CHECK(contains(config_error("[run]\nn_steps = 0\n"), "n_steps"));
  CHECK(contains(config_error("[sampler]\nkind = mh_gkkt\n[base]\nkernel = hmc\ndelta_t = 0.1\nn_hmc = 5\n"),
                 "base.kernel"));
  CHECK(contains(config_error("[experiment]\nname = custom\n[region]\nthreshold = 1\n"), "centres_file"));
}

TEST_CASE("trace files round-trip and report malformed lines") {
  const auto dir = test::scratch_dir("trace_io");
  Rng rng(1);
  std::vector<KktState> states;
  {
    TraceWriter w(dir / "t.csv", 3);
    for (std::uint64_t i = 0; i < 50; ++i) {
      KktState s;
      s.y = Vector{rng.normal() * 1e-7, rng.normal() * 1e9, rng.normal()};
      s.z = s.y;
      s.step_index = i + 1;
      s.teleported = i % 7 == 0;
      s.candidate_accepted = i % 3 == 0;
      w.write(s);
      states.push_back(s);
    }
    w.close();
  }
  const Trace t = read_trace_csv(dir / "t.csv");
  REQUIRE(t.size() == 50);
  CHECK(t.dim == 3);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(t.step[i] == states[i].step_index);
    CHECK(static_cast<bool>(t.teleported[i]) == states[i].teleported);
    CHECK(static_cast<bool>(t.accepted[i]) == states[i].candidate_accepted);
    for (std::size_t j = 0; j < 3; ++j) CHECK(t.point(i)[j] == states[i].y[j]);
  }

  test::write_file(dir / "bad.csv", "step,teleported,accepted,x0\n1,0,1,0.5\n2,0,1,zzz\n");
  try {
    (void)read_trace_csv(dir / "bad.csv");
    FAIL("expected TraceFormatError");
  } catch (const TraceFormatError& e) {
    CHECK(contains(e.what(), "bad.csv:3"));
  }
  test::write_file(dir / "short.csv", "step,teleported,accepted,x0,x1\n1,0,1,0.5\n");
  CHECK_THROWS_AS(read_trace_csv(dir / "short.csv"), TraceFormatError);
}

TEST_CASE("ess command on an empty trace") {
  const auto dir = test::scratch_dir("ess_empty");
  test::write_file(dir / "empty.csv", "step,teleported,accepted,x0\n");
  std::ostringstream out, err;
  const int code = cmd_ess({dir / "empty.csv", std::nullopt, dir / "ess.json"}, out, err);
  CHECK(code == kExitValidation);
  CHECK_FALSE(std::filesystem::exists(dir / "ess.json"));
  CHECK(contains(err.str(), "no rows"));
}

TEST_CASE("chain file verification") {
  const auto dir = test::scratch_dir("verify_files");
  test::write_file(dir / "swap.csv", "0,1\n1,0\nC: 0\n");
  const VerifyReport ok = verify_chain_file(dir / "swap.csv");
  CHECK(ok.all_passed());

  test::write_file(dir / "bad" / "rows.csv", "0.5,0.5\n0.6,0.3\n");
  std::ostringstream out, err;
  VerifyCommand cmd;
  cmd.chains_dir = dir / "bad";
  cmd.sweep_size = 5;
  CHECK(cmd_verify(cmd, out, err) == kExitValidation);
  CHECK(contains(err.str(), "row 1"));
}

TEST_CASE("runs are deterministic for a fixed seed") {
  const auto dir = test::scratch_dir("determinism");
  test::write_file(dir / "run.ini", kSmallBimodal);
  std::ostringstream out, err;
  REQUIRE(cmd_run({dir / "run.ini", std::nullopt, dir / "a"}, out, err) == kExitOk);
  REQUIRE(cmd_run({dir / "run.ini", std::nullopt, dir / "b"}, out, err) == kExitOk);
  const std::string a = test::read_file(dir / "a" / "trace.csv");
  CHECK_FALSE(a.empty());
  CHECK(a == test::read_file(dir / "b" / "trace.csv"));
  CHECK(std::filesystem::exists(dir / "a" / "summary.json"));
  CHECK(std::filesystem::exists(dir / "a" / "histogram.csv"));

  REQUIRE(cmd_run({dir / "run.ini", 4, dir / "c"}, out, err) == kExitOk);
  CHECK(a != test::read_file(dir / "c" / "trace.csv"));
}

TEST_CASE("run command exit codes") {
  const auto dir = test::scratch_dir("exit_codes");
  std::ostringstream out, err;
  test::write_file(dir / "invalid.ini", "[run]\nn_steps = many\n");
  CHECK(cmd_run({dir / "invalid.ini", std::nullopt, dir / "inv"}, out, err) == kExitValidation);
  CHECK(cmd_run({dir / "missing.ini", std::nullopt, dir / "miss"}, out, err) == kExitValidation);

  test::write_file(dir / "cap.ini", std::string(kSmallBimodal) + "[teleport]\nmax_trials = 1\n");
  CHECK(cmd_run({dir / "cap.ini", std::nullopt, dir / "cap"}, out, err) == kExitSampling);
  REQUIRE(std::filesystem::exists(dir / "cap" / "error.json"));
  CHECK(contains(test::read_file(dir / "cap" / "error.json"), "rejection_cap_exceeded"));
}

TEST_CASE("an initial point outside the region sets Y_0 only") {
  RunConfig c = parse_config(std::string(kSmallBimodal) + "initial = 10,0\n", "init.ini");
  c.n_steps = 200;
  const RunResult r = run_experiment(c, {nullptr, true, false});
  CHECK(r.y0 == Vector{10.0, 0.0});
  const Box box = Box::cube(2, c.box_lower, c.box_upper);
  const EnvelopeRegion env =
      envelope_region(bimodal_target(), uniform_instrumental(box), std::log(c.envelope_c), box);
  CHECK_FALSE(env.contains(r.y0));
  CHECK(env.contains(r.z0));

  c.initial = Vector{0.0, 0.0};
  const RunResult inside = run_experiment(c, {nullptr, true, false});
  CHECK(inside.z0 == inside.y0);
}
