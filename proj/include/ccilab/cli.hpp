#pragma once

// `ccilab <command> --config <path> [--out <path>] [--format csv|json] [--verbose]`

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ccilab/dynamics.hpp"
#include "ccilab/fiber.hpp"
#include "ccilab/flux.hpp"
#include "ccilab/io.hpp"

namespace ccilab::cli {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"flux",          "index",  "winding", "bands",
                                              "shift-witness", "evolve", "check"};
  return names;
}

struct Report {
  std::string text;
  int status = 0;
};

struct Context {
  ExperimentConfig config;
  Format format = Format::json;
  std::ostream* log = nullptr;

  void note(const std::string& msg) const {
    if (log) *log << "ccilab: " << msg << '\n';
  }
};

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline Report run_flux(const Context& ctx) {
  const SField field(ctx.config.model);
  const StripSpec strip = field.strip();
  std::vector<FluxReport> reports;
  for (int c : ctx.config.cuts) {
    ctx.note("flux at cut " + std::to_string(c));
    reports.push_back(flux_spectrum(flux_blocks(field, strip, c)));
  }
  if (ctx.format == Format::csv) return {flux_csv(reports)};
  json rs = json::array();
  for (const auto& r : reports) rs.push_back(to_json(r));
  return {dump({{"command", "flux"}, {"strip", {strip.lo, strip.hi}}, {"reports", std::move(rs)}})};
}

inline Report run_index(const Context& ctx) {
  const SField field(ctx.config.model);
  const StripSpec strip = field.strip();
  const StripKernel kernel(field, strip, ctx.config.power);
  std::ostringstream csv;
  csv << "cut,kitaev_trace,relative_index,ill_conditioned\n";
  json rows = json::array();
  for (int c : ctx.config.cuts) {
    ctx.note("index at cut " + std::to_string(c));
    const double k = kitaev_trace(kernel, c);
    const auto [p, q] = strip_projection_pair(field, strip, c);
    const RelativeIndex rel = relative_index(p, q);
    csv << c << ',' << format_double(k) << ',' << rel.index << ','
        << (rel.ill_conditioned ? "true" : "false") << '\n';
    rows.push_back({{"cut", c},
                    {"kitaev_trace", k},
                    {"relative_index", rel.index},
                    {"ill_conditioned", rel.ill_conditioned}});
  }
  if (ctx.format == Format::csv) return {csv.str()};
  return {dump({{"command", "index"}, {"power", ctx.config.power}, {"cuts", std::move(rows)}})};
}

inline Report run_winding(const Context& ctx) {
  const SField field(ctx.config.model);
  const FiberKernel kernel = fiber_kernel(field, field.strip());
  const int exact = winding_exact(kernel);
  const int phase = winding_phase(kernel, ctx.config.grid);
  if (ctx.format == Format::csv) {
    return {"exact,phase,agree\n" + std::to_string(exact) + ',' + std::to_string(phase) + ',' +
            (exact == phase ? "true" : "false") + '\n'};
  }
  return {dump({{"command", "winding"},
                {"exact", exact},
                {"phase", phase},
                {"agree", exact == phase},
                {"grid", ctx.config.grid}})};
}

inline Report run_bands(const Context& ctx) {
  const SField field(ctx.config.model);
  const BandStructure bands = band_structure(fiber_kernel(field, field.strip()), ctx.config.grid);
  ctx.note("largest gap " + format_double(bands.coverage.largest_gap));
  if (ctx.format == Format::csv) return {bands_csv(bands)};
  json j = to_json(bands);
  j["command"] = "bands";
  return {dump(j)};
}

inline Report run_shift_witness(const Context& ctx) {
  const SField field(ctx.config.model);
  const ShiftWitness w = shift_witness(field, field.strip(), ctx.config.orbit_depth);
  if (ctx.format == Format::csv) {
    return {"depth,gram_defect,perturbation_rank\n" + std::to_string(w.depth) + ',' +
            format_double(w.gram_defect) + ',' + std::to_string(w.perturbation_rank) + '\n'};
  }
  json j = to_json(w);
  j["command"] = "shift-witness";
  return {dump(j)};
}

inline Report run_evolve(const Context& ctx) {
  const SField field(ctx.config.model);
  const StripSpec strip = field.strip();
  const LatticeSite start = ctx.config.initial_site.value_or(LatticeSite{strip.lo, 0});
  const int steps = ctx.config.steps;
  const Window w = ctx.config.window.value_or(strip.window(start.k - steps - 2, start.k + steps + 3));
  if (!w.contains(start)) throw InvalidInput("initial_site lies outside the window");
  const EvolveResult res = evolve(field, StateVector::basis(w, start), steps);
  if (ctx.format == Format::csv) return {transport_csv(res.trace)};
  json recs = json::array();
  for (const auto& r : res.trace.records) recs.push_back(to_json(r));
  return {dump({{"command", "evolve"},
                {"cut", res.trace.cut},
                {"records", std::move(recs)},
                {"final_state", to_json(res.final_state)}})};
}

// ---------------------------------------------------------------------------

struct CheckItem {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
};

inline std::vector<CheckItem> invariant_suite(const ExperimentConfig& config, const Context& ctx) {
  const SField field(config.model);
  const StripSpec strip = field.strip();
  std::vector<CheckItem> items;
  auto add = [&](std::string name, double value, double tol, bool ok) {
    ctx.note(name + " = " + format_double(value));
    items.push_back({std::move(name), ok, value, tol});
  };
  auto guarded = [&](const std::string& name, double tol, const std::function<double()>& f,
                     const std::function<bool(double)>& ok) {
    try {
      const double v = f();
      add(name, v, tol, ok(v));
    } catch (const Error& e) {
      ctx.note(name + ": " + e.what());
      add(name, NAN, tol, false);
    }
  };

  const unsigned period = field.vertical_period();
  const int rows = period == 0 ? 8 : static_cast<int>(2 * period * ((8 + 2 * period - 1) / (2 * period)));
  if (rows <= 256) {
    guarded("unitarity", 1e-12, [&] {
      return strip_dense(field, strip, 0, rows - 1, Closure::torus).unitarity_defect;
    }, [](double v) { return v <= 1e-12; });
    guarded("adjoint", 1e-12, [&] {
      const Network net(field, strip.window(0, rows - 1), Closure::torus);
      const CMatrix u = net.dense();
      double worst = 0.0;
      for (std::size_t i = 0; i < net.window().size(); ++i) {
        const StateVector e = StateVector::basis(net.window(), net.window().site(i));
        const CVector col = u.adjoint().col(static_cast<Eigen::Index>(i));
        worst = std::max(worst, (net.apply_adjoint(e).amplitudes() - col).cwiseAbs().maxCoeff());
      }
      return worst;
    }, [](double v) { return v <= 1e-12; });
  }
  guarded("boundary_relations", 1e-12, [&] {
    return static_cast<double>(boundary_phase_check(field, strip, -2, 2).relations.size());
  }, [](double) { return true; });
  for (int c : config.cuts) {
    const std::string at = "[cut=" + std::to_string(c) + "]";
    guarded("flux_trace" + at, 1e-10, [&] {
      return flux_spectrum(flux_blocks(field, strip, c)).trace;
    }, [](double v) { return std::abs(v + 1.0) <= 1e-10; });
    guarded("flux_closed_form" + at, 1e-12, [&] {
      return (flux_blocks(field, strip, c).dense() - flux_matrix_free(field, strip, c)).cwiseAbs().maxCoeff();
    }, [](double v) { return v <= 1e-12; });
    guarded("kitaev_trace" + at, 1e-9, [&] {
      return kitaev_trace(StripKernel(field, strip), c);
    }, [](double v) { return std::abs(v + 1.0) <= 1e-9; });
    guarded("relative_index" + at, 0.0, [&] {
      const auto [p, q] = strip_projection_pair(field, strip, c);
      return static_cast<double>(relative_index(p, q).index);
    }, [](double v) { return v == -1.0; });
  }
  if (field.translation_invariant()) {
    guarded("winding_exact", 0.0, [&] {
      return static_cast<double>(winding_exact(fiber_kernel(field, strip)));
    }, [](double v) { return v == -1.0; });
    guarded("winding_phase", 0.0, [&] {
      return static_cast<double>(winding_phase(fiber_kernel(field, strip), config.grid));
    }, [](double v) { return v == -1.0; });
  }
  guarded("shift_witness_gram", 1e-10, [&] {
    return shift_witness(field, strip, std::min(config.orbit_depth, 50)).gram_defect;
  }, [](double v) { return v <= 1e-10; });
  return items;
}

inline Report run_check(const Context& ctx) {
  const auto items = invariant_suite(ctx.config, ctx);
  const bool all = std::all_of(items.begin(), items.end(), [](const CheckItem& i) { return i.passed; });
  if (ctx.format == Format::csv) {
    std::ostringstream os;
    os << "name,passed,value,tolerance\n";
    for (const auto& i : items) {
      os << i.name << ',' << (i.passed ? "true" : "false") << ',' << format_double(i.value) << ','
         << format_double(i.tolerance) << '\n';
    }
    return {os.str(), all ? 0 : 1};
  }
  json arr = json::array();
  for (const auto& i : items) {
    arr.push_back({{"name", i.name},
                   {"passed", i.passed},
                   {"value", std::isfinite(i.value) ? json(i.value) : json(nullptr)},
                   {"tolerance", i.tolerance}});
  }
  return {dump({{"command", "check"}, {"passed", all}, {"checks", std::move(arr)}}), all ? 0 : 1};
}

// ---------------------------------------------------------------------------

inline Format default_format(const std::string& command) {
  return command == "bands" || command == "evolve" ? Format::csv : Format::json;
}

/// Entry point shared by the executable and the tests. Exit status: 0 on
/// success, 1 when `check` finds a failing invariant, 2 on any error.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chiral interface lab: flux, index and transport experiments on network models",
               "ccilab"};
  std::string command, config_path, out_path, format_name;
  bool verbose = false;
  app.add_option("command", command, "Experiment to run")
      ->required()
      ->check(CLI::IsMember(command_names()));
  app.add_option("--config", config_path, "JSON experiment configuration")->required();
  app.add_option("--out", out_path, "Write the report here instead of standard output");
  app.add_option("--format", format_name, "Report format")->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--verbose", verbose, "Progress notes on standard error");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_json("usage", e.what()).dump() << '\n';
    return 2;
  }

  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open config '" + config_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    Context ctx;
    ctx.config = parse_config_text(buf.str());
    ctx.format = !format_name.empty() ? parse_format(format_name)
                                      : ctx.config.format.value_or(default_format(command));
    if (verbose) ctx.log = &err;

    static const std::map<std::string, Report (*)(const Context&)> handlers{
        {"flux", run_flux},       {"index", run_index},   {"winding", run_winding},
        {"bands", run_bands},     {"shift-witness", run_shift_witness},
        {"evolve", run_evolve},   {"check", run_check}};
    const Report rep = handlers.at(command)(ctx);

    const std::string target = !out_path.empty() ? out_path : ctx.config.output.value_or("");
    if (target.empty()) {
      out << rep.text;
    } else {
      std::ofstream f(target, std::ios::binary);
      if (!f) throw InvalidInput("cannot write '" + target + "'");
      f << rep.text;
      ctx.note("wrote " + target);
    }
    return rep.status;
  } catch (const Error& e) {
    err << error_json(e).dump() << '\n';
  } catch (const std::exception& e) {
    err << error_json("internal", e.what()).dump() << '\n';
  }
  return 2;
}

}  // namespace ccilab::cli
