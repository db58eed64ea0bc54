#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "kkt/runner.hpp"

namespace kkt {
namespace {

const std::set<std::string> kExperiments = {"bimodal", "fifteen_mode", "stoch_vol",
                                            "ginzburg_landau", "custom"};
const std::set<std::string> kSamplers = {"rwm", "mala", "hmc", "kkt_memoryless",
                                         "kkt", "gkkt", "mh_gkkt"};
const std::set<std::string> kSections = {"experiment", "sampler", "base", "teleport",
                                         "region", "run", "output"};

std::string format_double(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string_view trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

double to_double(std::string_view v, const std::string& where) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(where + ": expected a finite number, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t to_uint(std::string_view v, const std::string& where) {
  std::uint64_t out = 0;
  // Accept integral scientific notation such as 1e6.
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (!v.empty() && ec == std::errc() && p == v.data() + v.size()) return out;
  const double d = to_double(v, where);
  if (d < 0.0 || d != std::floor(d) || d > 1.8e19) {
    throw ConfigError(where + ": expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return static_cast<std::uint64_t>(d);
}

bool to_bool(std::string_view v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": expected true or false, got '" + std::string(v) + "'");
}

KernelKind to_kind(std::string_view v, const std::string& where) {
  if (v == "rwm") return KernelKind::RWM;
  if (v == "mala") return KernelKind::MALA;
  if (v == "hmc") return KernelKind::HMC;
  throw ConfigError(where + ": expected rwm, mala or hmc, got '" + std::string(v) + "'");
}

std::string one_of(std::string_view v, const std::set<std::string>& allowed,
                   const std::string& where) {
  if (allowed.count(std::string(v))) return std::string(v);
  std::string list;
  for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
  throw ConfigError(where + ": '" + std::string(v) + "' is not one of " + list);
}

struct Context {
  std::filesystem::path base_dir;
};

std::string resolve_path(std::string_view v, const Context& ctx) {
  if (v.empty()) return {};
  std::filesystem::path p(v);
  if (p.is_relative() && !ctx.base_dir.empty()) p = ctx.base_dir / p;
  return p.lexically_normal().string();
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, std::string_view, const std::string&, const Context&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Member>
Field number_field(std::string section, std::string key, Member RunConfig::*m) {
  return Field{
      std::move(section), std::move(key),
      [m](RunConfig& c, std::string_view v, const std::string& w, const Context&) {
        if constexpr (std::is_floating_point_v<Member>) {
          c.*m = to_double(v, w);
        } else {
          c.*m = static_cast<Member>(to_uint(v, w));
        }
      },
      [m](const RunConfig& c) {
        if constexpr (std::is_floating_point_v<Member>) {
          return format_double(c.*m);
        } else {
          return std::to_string(c.*m);
        }
      }};
}

Field path_field(std::string section, std::string key, std::string RunConfig::*m) {
  return Field{std::move(section), std::move(key),
               [m](RunConfig& c, std::string_view v, const std::string&, const Context& ctx) {
                 c.*m = resolve_path(v, ctx);
               },
               [m](const RunConfig& c) { return c.*m; }};
}

void kernel_fields(std::vector<Field>& f, const std::string& s, KernelSection RunConfig::*k) {
  f.push_back({s, "kernel",
               [k](RunConfig& c, std::string_view v, const std::string& w, const Context&) {
                 (c.*k).kernel.kind = to_kind(v, w);
               },
               [k](const RunConfig& c) { return std::string(kernel_kind_name((c.*k).kernel.kind)); }});
  auto num = [&](const char* key, double KernelConfig::*m) {
    f.push_back({s, key,
                 [k, m](RunConfig& c, std::string_view v, const std::string& w, const Context&) {
                   (c.*k).kernel.*m = to_double(v, w);
                 },
                 [k, m](const RunConfig& c) { return format_double((c.*k).kernel.*m); }});
  };
  num("sigma", &KernelConfig::sigma);
  num("gamma", &KernelConfig::gamma);
  num("delta_t", &KernelConfig::delta_t);
  f.push_back({s, "n_hmc",
               [k](RunConfig& c, std::string_view v, const std::string& w, const Context&) {
                 const auto n = to_uint(v, w);
                 if (n > 1'000'000) throw ConfigError(w + ": n_hmc is unreasonably large");
                 (c.*k).kernel.n_hmc = static_cast<int>(n);
               },
               [k](const RunConfig& c) { return std::to_string((c.*k).kernel.n_hmc); }});
  f.push_back({s, "tune",
               [k](RunConfig& c, std::string_view v, const std::string& w, const Context&) {
                 (c.*k).tune = to_bool(v, w);
               },
               [k](const RunConfig& c) { return std::string((c.*k).tune ? "true" : "false"); }});
  f.push_back({s, "target_accept",
               [k](RunConfig& c, std::string_view v, const std::string& w, const Context&) {
                 (c.*k).target_accept = to_double(v, w);
               },
               [k](const RunConfig& c) { return format_double((c.*k).target_accept); }});
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"experiment", "name",
                 [](RunConfig& c, std::string_view v, const std::string& w, const Context&) {
                   c.experiment = one_of(v, kExperiments, w);
                 },
                 [](const RunConfig& c) { return c.experiment; }});
    f.push_back(path_field("experiment", "modes_file", &RunConfig::modes_file));
    f.push_back(path_field("experiment", "data_file", &RunConfig::data_file));
    f.push_back(path_field("experiment", "centres_file", &RunConfig::centres_file));
    f.push_back(number_field("experiment", "lattice_side", &RunConfig::lattice_side));
    f.push_back(number_field("experiment", "gl_tau", &RunConfig::gl_tau));
    f.push_back(number_field("experiment", "gl_lambda", &RunConfig::gl_lambda));
    f.push_back(number_field("experiment", "gl_alpha", &RunConfig::gl_alpha));

    f.push_back({"sampler", "kind",
                 [](RunConfig& c, std::string_view v, const std::string& w, const Context&) {
                   c.sampler = one_of(v, kSamplers, w);
                 },
                 [](const RunConfig& c) { return c.sampler; }});

    kernel_fields(f, "base", &RunConfig::base);
    kernel_fields(f, "teleport", &RunConfig::teleport);
    f.push_back({"teleport", "alpha",
                 [](RunConfig& c, std::string_view v, const std::string& w, const Context&) {
                   c.alpha = one_of(v, {"indicator", "soft"}, w);
                 },
                 [](const RunConfig& c) { return c.alpha; }});
    f.push_back(number_field("teleport", "soft_width", &RunConfig::soft_width));
    f.push_back(number_field("teleport", "max_trials", &RunConfig::max_trials));

    f.push_back({"region", "type",
                 [](RunConfig& c, std::string_view v, const std::string& w, const Context&) {
                   c.region = one_of(v, {"envelope", "level_set"}, w);
                 },
                 [](const RunConfig& c) { return c.region; }});
    f.push_back(number_field("region", "threshold", &RunConfig::threshold));
    f.push_back(number_field("region", "envelope_c", &RunConfig::envelope_c));
    f.push_back(number_field("region", "box_lower", &RunConfig::box_lower));
    f.push_back(number_field("region", "box_upper", &RunConfig::box_upper));

    f.push_back(number_field("run", "n_steps", &RunConfig::n_steps));
    f.push_back(number_field("run", "burn_in", &RunConfig::burn_in));
    f.push_back(number_field("run", "seed", &RunConfig::seed));
    f.push_back(number_field("run", "tune_steps", &RunConfig::tune_steps));
    f.push_back({"run", "initial",
                 [](RunConfig& c, std::string_view v, const std::string& w, const Context&) {
                   if (v == "auto") {
                     c.initial.reset();
                     return;
                   }
                   Vector x;
                   std::size_t start = 0;
                   while (true) {
                     const auto comma = v.find(',', start);
                     x.push_back(to_double(trim(v.substr(start, comma == v.npos ? v.npos : comma - start)), w));
                     if (comma == v.npos) break;
                     start = comma + 1;
                   }
                   c.initial = std::move(x);
                 },
                 [](const RunConfig& c) {
                   if (!c.initial) return std::string("auto");
                   std::string s;
                   for (double v : *c.initial) s += (s.empty() ? "" : ",") + format_double(v);
                   return s;
                 }});

    f.push_back(path_field("output", "dir", &RunConfig::out_dir));
    f.push_back({"output", "trace",
                 [](RunConfig& c, std::string_view v, const std::string& w, const Context&) {
                   c.write_trace = to_bool(v, w);
                 },
                 [](const RunConfig& c) { return std::string(c.write_trace ? "true" : "false"); }});
    f.push_back(number_field("output", "histogram_bins", &RunConfig::histogram_bins));
    f.push_back(number_field("output", "histogram_lower", &RunConfig::histogram_lower));
    f.push_back(number_field("output", "histogram_upper", &RunConfig::histogram_upper));
    return f;
  }();
  return table;
}

struct Entry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line;
};

std::vector<Entry> tokenize(std::string_view text, const std::string& source) {
  std::vector<Entry> out;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::set<std::pair<std::string, std::string>> seen;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
    pos = nl == text.npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto hash = raw.find_first_of("#;");
    const auto line = trim(raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!kSections.count(section)) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    if (section.empty()) throw ConfigError(where + ": key outside of any section");
    Entry e{section, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))),
            line_no};
    if (!seen.insert({e.section, e.key}).second) {
      throw ConfigError(where + ": duplicate key '" + e.key + "' in [" + section + "]");
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

RunConfig RunConfig::defaults(const std::string& experiment) {
  RunConfig c;
  c.experiment = experiment;
  c.base.kernel = KernelConfig::mala(0.1);
  c.teleport.kernel = KernelConfig::rwm(1.0);
  c.teleport.target_accept = 0.25;
  c.region = "level_set";
  c.n_steps = 100'000;
  c.burn_in = 100'000;
  if (experiment == "bimodal") {
    c.sampler = "kkt_memoryless";
    c.region = "envelope";
    c.envelope_c = 1.3 / std::numbers::pi;
    c.box_lower = -15.0;
    c.box_upper = 15.0;
    c.n_steps = 1'000'000;
    c.histogram_lower = -15.0;
    c.histogram_upper = 15.0;
  } else if (experiment == "fifteen_mode") {
    c.sampler = "kkt";
    c.base.kernel = KernelConfig::mala(0.8);
    c.teleport.kernel = KernelConfig::rwm(0.8);
    // C = {x : -log(14.8 pi(x)) > 2}
    c.threshold = 2.0 + std::log(14.8);
    c.n_steps = 1'000'000;
    c.histogram_lower = -20.0;
    c.histogram_upper = 6.0;
    c.histogram_bins = 52;
  } else if (experiment == "stoch_vol") {
    c.sampler = "kkt";
    c.base.kernel = KernelConfig::hmc(0.02, 35);
    c.base.tune = true;
    c.base.target_accept = 0.7;
    c.teleport.kernel = KernelConfig::rwm(0.05);
    c.teleport.tune = true;
    c.teleport.target_accept = 0.25;
    c.threshold = 75.0;
  } else if (experiment == "ginzburg_landau") {
    c.sampler = "kkt";
    c.base.kernel = KernelConfig::mala(0.1);
    c.teleport.kernel = KernelConfig::rwm(0.1);
    c.threshold = 100.0;
  } else if (experiment == "custom") {
    c.sampler = "kkt";
    // No sensible default level for an arbitrary mixture.
    c.threshold = std::numeric_limits<double>::quiet_NaN();
  } else {
    throw ConfigError("unknown experiment '" + experiment + "'");
  }
  c.base.target_accept = c.base.kernel.kind == KernelKind::HMC ? 0.7 : 0.574;
  return c;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw ConfigError(field + ": " + msg);
  };
  if (!kExperiments.count(experiment)) fail("experiment.name", "unknown experiment");
  if (!kSamplers.count(sampler)) fail("sampler.kind", "unknown sampler");
  for (const auto& [name, section] : {std::pair{"base", &base}, std::pair{"teleport", &teleport}}) {
    try {
      section->kernel.validate();
    } catch (const std::invalid_argument& e) {
      fail(std::string(name) + "." + e.what(), "invalid kernel parameter");
    }
    if (!(section->target_accept > 0.0 && section->target_accept < 1.0)) {
      fail(std::string(name) + ".target_accept", "must lie in (0, 1)");
    }
  }
  if (sampler == "kkt_memoryless" && region != "envelope") {
    fail("region.type", "sampler kkt_memoryless needs an envelope region (exact pi_C sampler)");
  }
  if (region == "envelope") {
    if (!(envelope_c > 0.0)) fail("region.envelope_c", "must be positive");
    if (!(box_lower < box_upper)) fail("region.box_lower", "must be below region.box_upper");
  }
  if (sampler == "gkkt" && alpha == "soft" && region != "level_set") {
    fail("teleport.alpha", "soft alpha is defined from a level-set threshold");
  }
  if (region == "level_set" && !std::isfinite(threshold)) {
    fail("region.threshold", "must be set for a level-set region");
  }
  if (!(soft_width > 0.0)) fail("teleport.soft_width", "must be positive");
  if (sampler == "mh_gkkt" && base.kernel.kind == KernelKind::HMC) {
    fail("base.kernel", "mh_gkkt needs an rwm or mala proposal");
  }
  if (max_trials == 0) fail("teleport.max_trials", "must be positive");
  if (n_steps == 0) fail("run.n_steps", "must be positive");
  if (lattice_side < 2) fail("experiment.lattice_side", "must be at least 2");
  if (experiment == "custom" && centres_file.empty()) {
    fail("experiment.centres_file", "required for the custom experiment");
  }
  if (histogram_bins == 0) fail("output.histogram_bins", "must be positive");
  if (!(histogram_lower < histogram_upper)) {
    fail("output.histogram_lower", "must be below output.histogram_upper");
  }
}

std::string RunConfig::to_ini() const {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      os << (section.empty() ? "" : "\n") << "[" << f.section << "]\n";
      section = f.section;
    }
    os << f.key << " = " << f.get(*this) << "\n";
  }
  return os.str();
}

RunConfig parse_config(std::string_view text, const std::string& source,
                       const std::filesystem::path& base_dir) {
  const auto entries = tokenize(text, source);
  std::string experiment = "bimodal";
  for (const auto& e : entries) {
    if (e.section == "experiment" && e.key == "name") {
      experiment = one_of(e.value, kExperiments, source + ":" + std::to_string(e.line));
    }
  }
  RunConfig c = RunConfig::defaults(experiment);
  const Context ctx{base_dir};
  for (const auto& e : entries) {
    const std::string where =
        source + ":" + std::to_string(e.line) + ": [" + e.section + "] " + e.key;
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (f.section == e.section && f.key == e.key) field = &f;
    }
    if (!field) {
      throw ConfigError(source + ":" + std::to_string(e.line) + ": unknown key '" + e.key +
                        "' in [" + e.section + "]");
    }
    field->set(c, e.value, where, ctx);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), path.parent_path());
}

}  // namespace kkt
