#pragma once

// Experiment configuration parsing and report serialization (JSON, CSV).

#include <cstdio>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccilab/dynamics.hpp"
#include "ccilab/fiber.hpp"
#include "ccilab/flux.hpp"
#include "ccilab/lattice.hpp"

namespace ccilab {

using json = nlohmann::ordered_json;

enum class Format { csv, json };

struct ExperimentConfig {
  ModelConfig model;
  std::vector<int> cuts{0, 1};
  int orbit_depth = 50;
  int grid = 256;
  int steps = 40;
  int power = 1;
  std::optional<Window> window;
  std::optional<LatticeSite> initial_site;
  std::optional<std::string> output;
  std::optional<Format> format;
};

inline constexpr int kGridMin = 64;
inline constexpr int kGridMax = 65536;
inline constexpr int kStepsMax = 1000000;
inline constexpr int kOrbitDepthMax = 10000;
inline constexpr int kPowerMax = 16;
inline constexpr int kCutMagnitudeMax = 1 << 20;

namespace detail {

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  if (!obj.is_object()) throw InvalidInput(where + " must be an object");
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!names.count(key)) throw InvalidInput("unknown key '" + key + "' in " + where);
  }
}

inline long long get_integer(const json& v, const std::string& name, long long lo, long long hi) {
  if (!v.is_number_integer()) throw InvalidInput(name + " must be an integer");
  const long long x = v.get<long long>();
  if (x < lo || x > hi) {
    throw InvalidInput(name + " = " + std::to_string(x) + " outside [" + std::to_string(lo) +
                       ", " + std::to_string(hi) + "]");
  }
  return x;
}

inline cplx get_complex(const json& v, const std::string& name) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return {v[0].get<double>(), v[1].get<double>()};
  }
  throw InvalidInput(name + " must be a number or a [re, im] pair");
}

inline std::vector<int> get_int_array(const json& v, const std::string& name, std::size_t n) {
  if (!v.is_array() || v.size() != n) {
    throw InvalidInput(name + " must be an array of " + std::to_string(n) + " integers");
  }
  std::vector<int> out;
  for (const auto& e : v) {
    out.push_back(static_cast<int>(get_integer(e, name, -kCutMagnitudeMax, kCutMagnitudeMax)));
  }
  return out;
}

}  // namespace detail

inline Format parse_format(const std::string& s) {
  if (s == "csv") return Format::csv;
  if (s == "json") return Format::json;
  throw InvalidInput("format must be 'csv' or 'json' (got '" + s + "')");
}

inline ModelConfig parse_model(const json& m) {
  detail::reject_unknown(m, {"n_left", "n_right", "seed", "deterministic_phases", "vertical_period",
                             "overrides"},
                         "model");
  ModelConfig c;
  constexpr long long kColumnMax = 1 << 20;
  if (!m.contains("n_left") || !m.contains("n_right")) {
    throw InvalidInput("model needs n_left and n_right");
  }
  c.n_left = static_cast<int>(detail::get_integer(m["n_left"], "model.n_left", -kColumnMax, kColumnMax));
  c.n_right = static_cast<int>(detail::get_integer(m["n_right"], "model.n_right", -kColumnMax, kColumnMax));
  if (m.contains("seed")) {
    if (!m["seed"].is_number_unsigned()) throw InvalidInput("model.seed must be a non-negative integer");
    c.seed = m["seed"].get<std::uint64_t>();
  }
  if (m.contains("deterministic_phases")) {
    if (!m["deterministic_phases"].is_boolean()) {
      throw InvalidInput("model.deterministic_phases must be a boolean");
    }
    c.deterministic_phases = m["deterministic_phases"].get<bool>();
  }
  if (m.contains("vertical_period")) {
    c.vertical_period = static_cast<unsigned>(
        detail::get_integer(m["vertical_period"], "model.vertical_period", 0, 1 << 20));
  }
  if (m.contains("overrides")) {
    if (!m["overrides"].is_array()) throw InvalidInput("model.overrides must be an array");
    for (const auto& o : m["overrides"]) {
      detail::reject_unknown(o, {"j", "k2", "q", "r", "t"}, "model.overrides[]");
      if (!o.contains("j") || !o.contains("k2") || !o.contains("r") || !o.contains("t")) {
        throw InvalidInput("override needs j, k2, r and t");
      }
      ScatterOverride s;
      s.j = static_cast<int>(detail::get_integer(o["j"], "override.j", -kColumnMax, kColumnMax));
      s.k2 = static_cast<int>(detail::get_integer(o["k2"], "override.k2", -kColumnMax, kColumnMax));
      s.q = o.contains("q") ? detail::get_complex(o["q"], "override.q") : cplx{1.0, 0.0};
      s.r = detail::get_complex(o["r"], "override.r");
      s.t = detail::get_complex(o["t"], "override.t");
      c.overrides.push_back(s);
    }
  }
  return c;
}

inline ExperimentConfig parse_config(const json& j) {
  detail::reject_unknown(j, {"model", "cuts", "orbit_depth", "grid", "steps", "power", "window",
                             "initial_site", "output", "format"},
                         "config");
  if (!j.contains("model")) throw InvalidInput("config needs a model");
  ExperimentConfig c;
  c.model = parse_model(j["model"]);
  if (j.contains("cuts")) {
    if (!j["cuts"].is_array() || j["cuts"].empty()) throw InvalidInput("cuts must be a non-empty array");
    c.cuts.clear();
    for (const auto& v : j["cuts"]) {
      c.cuts.push_back(static_cast<int>(detail::get_integer(v, "cuts[]", -kCutMagnitudeMax, kCutMagnitudeMax)));
    }
  }
  if (j.contains("orbit_depth")) c.orbit_depth = static_cast<int>(detail::get_integer(j["orbit_depth"], "orbit_depth", 0, kOrbitDepthMax));
  if (j.contains("grid")) c.grid = static_cast<int>(detail::get_integer(j["grid"], "grid", kGridMin, kGridMax));
  if (j.contains("steps")) c.steps = static_cast<int>(detail::get_integer(j["steps"], "steps", 0, kStepsMax));
  if (j.contains("power")) c.power = static_cast<int>(detail::get_integer(j["power"], "power", 1, kPowerMax));
  if (j.contains("window")) {
    const auto w = detail::get_int_array(j["window"], "window", 4);
    if (w[0] > w[1] || w[2] > w[3]) throw InvalidInput("window bounds must satisfy j0 <= j1, k0 <= k1");
    c.window = Window{w[0], w[1], w[2], w[3]};
  }
  if (j.contains("initial_site")) {
    const auto s = detail::get_int_array(j["initial_site"], "initial_site", 2);
    c.initial_site = LatticeSite{s[0], s[1]};
  }
  if (j.contains("output")) {
    if (!j["output"].is_string()) throw InvalidInput("output must be a string");
    c.output = j["output"].get<std::string>();
  }
  if (j.contains("format")) {
    if (!j["format"].is_string()) throw InvalidInput("format must be a string");
    c.format = parse_format(j["format"].get<std::string>());
  }
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// CSV helpers: '.' decimal separator, '\n' line endings, header row.

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline json to_json(const Window& w) { return json::array({w.j0, w.j1, w.k0, w.k1}); }

inline json to_json(const StateVector& psi) {
  json amps = json::array();
  for (Eigen::Index i = 0; i < psi.amplitudes().size(); ++i) amps.push_back(complex_json(psi.amplitudes()(i)));
  return json{{"window", to_json(psi.window())}, {"amps", std::move(amps)}};
}

inline StateVector state_from_json(const json& j) {
  detail::reject_unknown(j, {"window", "amps"}, "state");
  const auto w = detail::get_int_array(j.at("window"), "state.window", 4);
  const Window win{w[0], w[1], w[2], w[3]};
  const json& amps = j.at("amps");
  if (!amps.is_array() || amps.size() != win.size()) throw InvalidInput("state.amps has wrong length");
  CVector v(static_cast<Eigen::Index>(win.size()));
  for (std::size_t i = 0; i < amps.size(); ++i) v(static_cast<Eigen::Index>(i)) = detail::get_complex(amps[i], "state.amps[]");
  return StateVector(win, std::move(v));
}

inline json to_json(const FluxReport& r) {
  json blocks = json::array();
  for (const auto& e : r.by_block) blocks.push_back({{"block", e.column}, {"eigenvalue", e.value}});
  return json{{"cut", r.cut},
              {"trace", r.trace},
              {"index", r.index},
              {"tolerance", r.tolerance_used},
              {"eigenvalues", r.eigenvalues},
              {"blocks", std::move(blocks)}};
}

inline std::string flux_csv(const std::vector<FluxReport>& reports) {
  std::ostringstream os;
  os << "cut,block,eigenvalue\n";
  for (const auto& r : reports)
    for (const auto& e : r.by_block) os << r.cut << ',' << e.column << ',' << format_double(e.value) << '\n';
  return os.str();
}

inline json to_json(const TransportRecord& r) {
  return json{{"t", r.t},           {"mean_k", r.mean_k}, {"var_k", r.var_k},
              {"upper_weight", r.upper_weight},
              {"jmin", r.jmin},     {"jmax", r.jmax},     {"kmin", r.kmin},
              {"kmax", r.kmax}};
}

inline std::string transport_csv(const TransportTrace& trace) {
  std::ostringstream os;
  os << "t,mean_k,var_k,upper_weight,jmin,jmax,kmin,kmax\n";
  for (const auto& r : trace.records) {
    os << r.t << ',' << format_double(r.mean_k) << ',' << format_double(r.var_k) << ','
       << format_double(r.upper_weight) << ',' << r.jmin << ',' << r.jmax << ',' << r.kmin << ','
       << r.kmax << '\n';
  }
  return os.str();
}

inline json to_json(const BandStructure& b) {
  json points = json::array();
  for (std::size_t i = 0; i < b.y.size(); ++i) points.push_back({{"y", b.y[i]}, {"phases", b.phases[i]}});
  return json{{"base_grid", b.base_grid},
              {"coverage",
               {{"largest_gap", b.coverage.largest_gap},
                {"covers_circle", b.coverage.covers_circle},
                {"max_step", b.coverage.max_step},
                {"step_bound", b.coverage.step_bound},
                {"surrogate", b.coverage.surrogate}}},
              {"degeneracies", b.degeneracies},
              {"points", std::move(points)}};
}

inline std::string bands_csv(const BandStructure& b) {
  std::ostringstream os;
  os << "y,branch_id,eigenphase\n";
  for (std::size_t i = 0; i < b.y.size(); ++i)
    for (std::size_t k = 0; k < b.phases[i].size(); ++k)
      os << format_double(b.y[i]) << ',' << k << ',' << format_double(b.phases[i][k]) << '\n';
  return os.str();
}

inline json to_json(const ShiftWitness& w) {
  json nodes = json::array();
  for (const auto& n : w.modified_nodes) nodes.push_back(json::array({n.j, n.k2}));
  return json{{"seed", json::array({w.seed.j, w.seed.k})},
              {"depth", w.depth},
              {"gram_defect", w.gram_defect},
              {"perturbation_rank", w.perturbation_rank},
              {"modified_nodes", std::move(nodes)}};
}

/// Machine-readable error record for standard error.
inline json error_json(const std::string& kind, const std::string& message) {
  return json{{"error", kind}, {"message", message}};
}

inline json error_json(const Error& e) {
  json j = error_json(std::string(e.kind()), e.what());
  if (const auto* c = dynamic_cast<const ChiralityViolation*>(&e)) {
    j["site"] = {{"j", c->j()}, {"k2", c->k2()}};
  } else if (const auto* w = dynamic_cast<const WindowLeak*>(&e)) {
    j["site"] = {{"j", w->j()}, {"k", w->k()}};
  }
  return j;
}

}  // namespace ccilab
