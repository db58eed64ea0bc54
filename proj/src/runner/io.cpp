#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>

#include "kkt/runner.hpp"
#include "kkt/simd.hpp"

namespace kkt {
namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, p);
}

void append_uint(std::string& out, std::uint64_t v) {
  char buf[24];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, p);
}

nlohmann::json spread_json(const Spread& s) {
  return {{"mean", s.mean}, {"variance", s.variance}, {"min", s.min}, {"max", s.max}};
}

nlohmann::json kernel_json(const KernelConfig& k) {
  nlohmann::json j{{"kind", std::string(kernel_kind_name(k.kind))}, {"description", k.describe()}};
  switch (k.kind) {
    case KernelKind::RWM: j["sigma"] = k.sigma; break;
    case KernelKind::MALA: j["gamma"] = k.gamma; break;
    case KernelKind::HMC:
      j["delta_t"] = k.delta_t;
      j["n_hmc"] = k.n_hmc;
      break;
  }
  return j;
}

}  // namespace

TraceWriter::TraceWriter(const std::filesystem::path& path, std::size_t dim)
    : path_(path), dim_(dim) {
  file_ = std::fopen(path.string().c_str(), "wb");
  if (!file_) {
    throw std::runtime_error("cannot open trace file " + path.string() + ": " +
                             std::strerror(errno));
  }
  line_ = "step,teleported,accepted";
  for (std::size_t j = 0; j < dim; ++j) line_ += ",x" + std::to_string(j);
  line_ += '\n';
  if (std::fwrite(line_.data(), 1, line_.size(), file_) != line_.size()) {
    throw std::runtime_error("write failed on " + path_.string());
  }
}

TraceWriter::~TraceWriter() {
  if (file_) std::fclose(file_);
}

void TraceWriter::write(const KktState& s) {
  if (!file_) throw std::runtime_error("trace file " + path_.string() + " is closed");
  if (s.y.size() != dim_) throw std::runtime_error("state dimension does not match the trace header");
  line_.clear();
  append_uint(line_, s.step_index);
  line_ += s.teleported ? ",1," : ",0,";
  line_ += s.candidate_accepted ? '1' : '0';
  for (double v : s.y) {
    line_ += ',';
    append_double(line_, v);
  }
  line_ += '\n';
  if (std::fwrite(line_.data(), 1, line_.size(), file_) != line_.size()) {
    throw std::runtime_error("write failed on " + path_.string() + ": " + std::strerror(errno));
  }
}

void TraceWriter::close() {
  if (!file_) return;
  const bool ok = std::fflush(file_) == 0;
  const bool closed = std::fclose(file_) == 0;
  file_ = nullptr;
  if (!ok || !closed) throw std::runtime_error("failed to finish trace file " + path_.string());
}

Trace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TraceFormatError("cannot open trace file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw TraceFormatError(path.string() + ":1: missing header");
  const std::string prefix = "step,teleported,accepted";
  if (line.rfind(prefix, 0) != 0) {
    throw TraceFormatError(path.string() + ":1: header must start with '" + prefix + "'");
  }
  std::size_t dim = 0;
  {
    std::string rest = line.substr(prefix.size());
    std::size_t pos = 0;
    while (pos < rest.size()) {
      if (rest[pos] != ',') throw TraceFormatError(path.string() + ":1: malformed header");
      const auto next = rest.find(',', pos + 1);
      const std::string name = rest.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1);
      if (name != "x" + std::to_string(dim)) {
        throw TraceFormatError(path.string() + ":1: expected column x" + std::to_string(dim) +
                               ", got '" + name + "'");
      }
      ++dim;
      pos = next == std::string::npos ? rest.size() : next;
    }
  }
  if (dim == 0) throw TraceFormatError(path.string() + ":1: no coordinate columns");

  Trace trace(dim);
  Vector x(dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fail = [&](const std::string& msg) {
      throw TraceFormatError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
    };
    const char* p = line.data();
    const char* end = line.data() + line.size();
    std::uint64_t step = 0;
    auto r = std::from_chars(p, end, step);
    if (r.ec != std::errc() || r.ptr == end || *r.ptr != ',') fail("bad step index");
    p = r.ptr + 1;
    unsigned flags[2];
    for (unsigned& f : flags) {
      r = std::from_chars(p, end, f);
      if (r.ec != std::errc() || f > 1 || r.ptr == end || *r.ptr != ',') fail("flags must be 0 or 1");
      p = r.ptr + 1;
    }
    for (std::size_t j = 0; j < dim; ++j) {
      auto rd = std::from_chars(p, end, x[j]);
      if (rd.ec != std::errc()) fail("bad value in column x" + std::to_string(j));
      p = rd.ptr;
      if (j + 1 < dim) {
        if (p == end || *p != ',') fail("expected " + std::to_string(dim) + " coordinates");
        ++p;
      }
    }
    if (p != end) fail("trailing data after x" + std::to_string(dim - 1));
    trace.push(step, flags[0] != 0, flags[1] != 0, x);
  }
  return trace;
}

void write_histogram_csv(const std::filesystem::path& path, const Trace& trace, const Grid& grid) {
  if (grid.dim() != 2) throw std::invalid_argument("histogram output needs a 2-D grid");
  const auto mass = empirical_mass(trace, grid);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open histogram file " + path.string());
  out << "x_lo,x_hi,y_lo,y_hi,mass\n";
  std::string line;
  for (std::size_t i = 0; i < grid.bins[0]; ++i) {
    for (std::size_t j = 0; j < grid.bins[1]; ++j) {
      line.clear();
      for (double v : {grid.edge(0, i), grid.edge(0, i + 1), grid.edge(1, j), grid.edge(1, j + 1),
                       mass[i * grid.bins[1] + j]}) {
        if (!line.empty()) line += ',';
        append_double(line, v);
      }
      out << line << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed on " + path.string());
}

nlohmann::json ess_json(const EssReport& e, bool with_eval_counts) {
  nlohmann::json j{{"per_coordinate_ess", e.per_coordinate_ess},
                   {"degenerate_coordinates", e.degenerate_coordinates},
                   {"clipped_coordinates", e.clipped_coordinates},
                   {"ess_summary", spread_json(e.ess_spread)}};
  if (with_eval_counts) {
    j["ess_per_eval"] = e.ess_per_eval;
    j["ess_per_density_eval"] = e.ess_per_density_eval;
    j["ess_per_grad_eval"] = e.ess_per_grad_eval;
    j["per_eval_summary"] = spread_json(e.per_eval_spread);
    j["per_density_summary"] = spread_json(e.per_density_spread);
    if (!e.ess_per_grad_eval.empty()) j["per_grad_summary"] = spread_json(e.per_grad_spread);
  }
  return j;
}

nlohmann::json summary_json(const RunResult& r, const std::string& build) {
  using nlohmann::json;
  json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["build_id"] = build;
  j["simd_backend"] = std::string(simd::backend_name(simd::active().backend));
  j["experiment"] = r.config.experiment;
  j["sampler"] = r.config.sampler;
  j["seed"] = r.config.seed;
  j["target"] = r.target_label;
  j["dimension"] = r.z0.size();
  if (!r.region_description.empty()) j["region"] = r.region_description;
  j["config"] = r.config.to_ini();
  j["kernels"] = {{"base", kernel_json(r.base)}, {"teleport", kernel_json(r.teleport)}};
  json tuning = json::array();
  for (const auto& t : r.tuning) {
    tuning.push_back({{"kernel", t.kernel},
                      {"parameter", t.parameter},
                      {"value", t.value},
                      {"acceptance", t.acceptance},
                      {"steps", t.steps}});
  }
  j["tuning"] = tuning;
  j["initial_anchor"] = r.z0;
  j["initial_state"] = r.y0;
  j["burn_in"] = {{"steps", r.burn_in.n_steps},
                  {"density_evals", r.burn_in.density_evals},
                  {"grad_evals", r.burn_in.grad_evals}};
  const TraceSummary& s = r.summary;
  j["trace_summary"] = {{"n_steps", s.n_steps},
                        {"n_teleports", s.n_teleports},
                        {"teleport_fraction", s.teleport_fraction},
                        {"base_accept_rate", s.base_accept_rate},
                        {"q_accept_rate", s.q_accept_rate},
                        {"density_evals", s.density_evals},
                        {"grad_evals", s.grad_evals},
                        {"seed", s.seed}};
  if (r.ess) j["ess"] = ess_json(*r.ess, true);
  if (!r.mode_labels.empty()) {
    json mw = json::object();
    for (std::size_t i = 0; i < r.mode_labels.size(); ++i) mw[r.mode_labels[i]] = r.mode_weights[i];
    j["mode_weights"] = mw;
  }
  if (r.grid_tv) j["grid_tv"] = *r.grid_tv;
  if (r.rejection) {
    j["rejection"] = {{"draws", r.rejection->draws},
                      {"rejections", r.rejection->rejections},
                      {"accepts", r.rejection->accepts},
                      {"mean_rejections_per_accept", r.rejection->mean_rejections_per_accept()}};
  }
  j["alpha_clamp_events"] = r.alpha_clamp_events;
  j["wall_seconds"] = r.burn_in.wall_seconds + r.chain.wall_seconds;
  return j;
}

}  // namespace kkt
