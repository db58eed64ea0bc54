#include <algorithm>
#include <cmath>
#include <limits>

#include "kkt/numeric.hpp"
#include "kkt/runner.hpp"
#include "kkt/simd.hpp"

namespace kkt {
namespace {

struct Model {
  TargetDensity target;  // uncounted
  Vector reference_start;
  std::vector<std::string> labels;
  std::function<std::size_t(std::span<const double>)> classify;  // into labels
};

Model build_model(const RunConfig& c) {
  if (c.experiment == "bimodal") {
    return {bimodal_target(), {10.0, 0.0}, {"left", "right"},
            [](std::span<const double> x) -> std::size_t { return x[0] < 0.0 ? 0 : 1; }};
  }
  if (c.experiment == "fifteen_mode") {
    auto modes = c.modes_file.empty() ? default_fifteen_modes() : read_modes_csv(c.modes_file);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < modes.size(); ++i) labels.push_back("gauss" + std::to_string(i));
    labels.push_back("quartic");
    // Reference start: the Gaussian centre farthest from the quartic one.
    const auto far = std::max_element(modes.begin(), modes.end(), [](const Point2& a, const Point2& b) {
      return std::hypot(a[0] - kQuarticCentre[0], a[1] - kQuarticCentre[1]) <
             std::hypot(b[0] - kQuarticCentre[0], b[1] - kQuarticCentre[1]);
    });
    Vector start{(*far)[0], (*far)[1]};
    return {fifteen_mode_target(modes), std::move(start), std::move(labels),
            [modes](std::span<const double> x) { return fifteen_mode_component(modes, x); }};
  }
  if (c.experiment == "stoch_vol") {
    auto ys = c.data_file.empty() ? simulate_sv_observations(kSvObservationCount, kSvDataSeed)
                                  : read_observations_csv(c.data_file);
    const std::size_t dim = ys.size() + 2;
    return {stochastic_volatility_target(std::move(ys)), Vector(dim, 0.0), {}, {}};
  }
  if (c.experiment == "ginzburg_landau") {
    GinzburgLandauParams p{c.lattice_side, c.gl_tau, c.gl_lambda, c.gl_alpha};
    const std::size_t dim = p.side * p.side * p.side;
    return {ginzburg_landau_target(p), Vector(dim, 0.0), {}, {}};
  }
  // custom
  auto centres = read_centres_csv(c.centres_file);
  if (centres.empty()) throw ConfigError("experiment.centres_file: no centres in " + c.centres_file);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < centres.size(); ++i) labels.push_back("centre" + std::to_string(i));
  Vector start = centres.front();
  return {gaussian_mixture_target(centres, "custom mixture"), std::move(start), std::move(labels),
          [centres](std::span<const double> x) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < centres.size(); ++i) {
              const double d = simd::squared_distance(x, centres[i]);
              if (d < best_d) {
                best_d = d;
                best = i;
              }
            }
            return best;
          }};
}

bool is_base_sampler(const std::string& s) { return s == "rwm" || s == "mala" || s == "hmc"; }

KernelKind sampler_kind(const std::string& s) {
  return s == "rwm" ? KernelKind::RWM : s == "mala" ? KernelKind::MALA : KernelKind::HMC;
}

double& step_parameter(KernelConfig& k) {
  switch (k.kind) {
    case KernelKind::RWM: return k.sigma;
    case KernelKind::MALA: return k.gamma;
    case KernelKind::HMC: return k.delta_t;
  }
  return k.sigma;
}

const char* step_parameter_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::RWM: return "sigma";
    case KernelKind::MALA: return "gamma";
    case KernelKind::HMC: return "delta_t";
  }
  return "sigma";
}

// Robbins-Monro on the log step size toward the target acceptance, using
// min(1, exp(log_alpha)) as the acceptance signal. The tuned value is the
// geometric mean over the second half.
TuningRecord tune_kernel(const TargetDensity& target, KernelConfig& k, Vector x, double target_accept,
                         std::uint64_t steps, Rng& rng, const std::string& which) {
  TuningRecord rec{which, step_parameter_name(k.kind), step_parameter(k), 0.0, steps};
  if (steps == 0) return rec;
  double& param = step_parameter(k);
  double log_s = std::log(param);
  double sum_log = 0.0, sum_acc = 0.0;
  std::uint64_t kept = 0;
  for (std::uint64_t t = 1; t <= steps; ++t) {
    param = std::exp(log_s);
    StepOutcome out = base_step(target, k, x, rng);
    const double a = std::isnan(out.log_alpha) ? 0.0 : std::exp(std::min(0.0, out.log_alpha));
    x = std::move(out.state);
    if (2 * t > steps) {
      sum_log += log_s;
      sum_acc += a;
      ++kept;
    }
    log_s += (a - target_accept) / std::pow(static_cast<double>(t), 0.6);
    log_s = std::clamp(log_s, -30.0, 10.0);
  }
  param = std::exp(sum_log / static_cast<double>(kept));
  rec.value = param;
  rec.acceptance = sum_acc / static_cast<double>(kept);
  return rec;
}

Vector check_initial(const Vector& x, std::size_t dim) {
  if (x.size() != dim) {
    throw ConfigError("run.initial: expected " + std::to_string(dim) + " values, got " +
                      std::to_string(x.size()));
  }
  return x;
}

// Z0 ~ N(0, I) conditioned on `accept`, by rejection.
Vector sample_anchor(std::size_t dim, const std::function<bool(std::span<const double>)>& accept,
                     Rng& rng, std::uint64_t max_trials) {
  RejectionStats stats;
  Vector x(dim);
  for (std::uint64_t i = 0; i < max_trials; ++i) {
    rng.normal(x);
    ++stats.draws;
    if (accept(x)) {
      ++stats.accepts;
      return x;
    }
    ++stats.rejections;
  }
  throw RejectionCapExceeded("no initial anchor in the critical region after " +
                                 std::to_string(max_trials) + " standard normal draws",
                             stats);
}

}  // namespace

RunResult run_experiment(const RunConfig& config, const RunHooks& hooks) {
  config.validate();
  RunResult result;
  result.config = config;
  const Model model = build_model(config);
  const TargetDensity& target = model.target;
  const std::size_t dim = target.dim();
  result.target_label = target.label();
  result.base = config.base.kernel;
  result.teleport = config.teleport.kernel;

  const std::string& sampler = config.sampler;
  const bool base_only = is_base_sampler(sampler);
  if (base_only) result.base.kind = sampler_kind(sampler);

  // Region, alpha and the tilde target (uncounted forms for tuning and anchors).
  std::optional<EnvelopeRegion> envelope;
  CriticalRegion region;
  std::optional<AlphaFunction> alpha;
  std::function<TargetDensity(const TargetDensity&)> make_tilde;
  if (!base_only && sampler != "mh_gkkt") {
    if (config.region == "envelope") {
      if (dim > 16) throw ConfigError("region.type: envelope regions are limited to 16 dimensions");
      const Box box = Box::cube(dim, config.box_lower, config.box_upper);
      envelope = envelope_region(target, uniform_instrumental(box), std::log(config.envelope_c), box);
      region = envelope->region();
    } else {
      region = level_set_region(target, config.threshold);
    }
    result.region_description = region.description;
    if (sampler == "gkkt" && config.alpha == "soft") {
      const double thr = config.threshold, w = config.soft_width;
      const TargetDensity tu = target;
      alpha = AlphaFunction(
          [tu, thr, w](std::span<const double> x) {
            return sigmoid((-tu.log_density(x) - thr) / w);
          },
          "sigmoid((-log pi - " + std::to_string(thr) + ") / " + std::to_string(w) + ")");
      make_tilde = [thr, w](const TargetDensity& t) {
        return TargetDensity(
            t.dim(), t.label() + " * alpha",
            [t, thr, w](std::span<const double> x) {
              const double lp = t.log_density(x);
              return lp - softplus((lp + thr) / w);
            },
            [t, thr, w](std::span<const double> x, std::span<double> g) {
              const double lp = t.log_density(x);
              t.grad_log_density(x, g);
              // d/dx log sigmoid(u), u = (-lp - thr)/w: -sigmoid(-u) grad lp / w
              const double scale = 1.0 - sigmoid((lp + thr) / w) / w;
              for (double& v : g) v *= scale;
            });
      };
    } else {
      alpha = alpha_indicator(region);
      make_tilde = [region](const TargetDensity& t) { return restrict_to(t, region); };
    }
  }

  // Initial state.
  Rng anchor_rng = Rng(config.seed, 0).split(2);
  if (base_only || sampler == "mh_gkkt") {
    result.z0 = config.initial ? check_initial(*config.initial, dim) : model.reference_start;
  } else if (config.initial && (*alpha)(check_initial(*config.initial, dim)) > 0.0) {
    result.z0 = *config.initial;
  } else {
    // Z_0 must lie in {alpha > 0}; an initial point outside it only sets Y_0.
    const AlphaFunction a = *alpha;
    result.z0 = sample_anchor(
        dim, [a](std::span<const double> x) { return a(x) > 0.0; }, anchor_rng, config.max_trials);
  }

  // Tuning on a separate stream with uncounted targets.
  Rng tune_rng = Rng(config.seed, 0).split(1);
  if (config.base.tune) {
    result.tuning.push_back(tune_kernel(target, result.base, result.z0, config.base.target_accept,
                                        config.tune_steps, tune_rng, "base"));
  }
  if (config.teleport.tune && (sampler == "kkt" || sampler == "gkkt")) {
    result.tuning.push_back(tune_kernel(make_tilde(target), result.teleport, result.z0,
                                        config.teleport.target_accept, config.tune_steps, tune_rng,
                                        "teleport"));
  }

  // Counted views drive the chain.
  EvalCounts counts;
  const TargetDensity counted = target.counted(counts);
  std::shared_ptr<RejectionStats> rejection;
  Stepper stepper;
  if (base_only) {
    stepper = make_base_stepper(counted, result.base);
  } else if (sampler == "mh_gkkt") {
    stepper = make_mh_gkkt_stepper(counted, result.base);
  } else if (sampler == "kkt_memoryless") {
    rejection = std::make_shared<RejectionStats>();
    stepper = make_memoryless_kkt_stepper(counted, result.base,
                                          TeleportSpec::exact(*envelope, config.max_trials), rejection);
  } else if (sampler == "kkt") {
    stepper = make_kkt_stepper(counted, result.base, result.teleport, region);
  } else {
    stepper = make_gkkt_stepper(counted, result.base, result.teleport, *alpha, make_tilde(counted));
  }

  Rng rng(config.seed, 0);
  KktState state = initial_state(result.z0);
  if (config.initial) state.y = result.y0 = check_initial(*config.initial, dim);
  else result.y0 = result.z0;
  if (config.burn_in > 0) {
    result.burn_in = run_chain(stepper, config.burn_in, state, rng, [](const KktState&) {}, &counts);
  }
  if (rejection) *rejection = RejectionStats{};

  const bool keep = hooks.keep_trace || hooks.diagnostics;
  result.trace = Trace(dim);
  if (keep) result.trace.reserve(config.n_steps);
  result.chain = run_chain(
      stepper, config.n_steps, state, rng,
      [&](const KktState& s) {
        if (hooks.sink) hooks.sink(s);
        if (keep) result.trace.push(s);
      },
      &counts);
  result.summary = summarize(result.chain, config.seed);
  if (rejection) result.rejection = *rejection;
  if (alpha) result.alpha_clamp_events = alpha->clamp_events();

  if (hooks.diagnostics) {
    if (result.trace.size() >= 100) {
      result.ess = ess_report(result.trace, result.chain.density_evals, result.chain.grad_evals);
    }
    if (model.classify) {
      result.mode_labels = model.labels;
      std::vector<double> counts_per(model.labels.size(), 0.0);
      for (std::size_t i = 0; i < result.trace.size(); ++i) {
        counts_per[model.classify(result.trace.point(i))] += 1.0;
      }
      for (double& w : counts_per) w /= static_cast<double>(result.trace.size());
      result.mode_weights = std::move(counts_per);
    }
    if (dim == 2) {
      const Grid grid{{config.histogram_lower, config.histogram_lower},
                      {config.histogram_upper, config.histogram_upper},
                      {config.histogram_bins, config.histogram_bins}};
      result.grid_tv = grid_tv(result.trace, target, grid);
    }
  }
  return result;
}

}  // namespace kkt
