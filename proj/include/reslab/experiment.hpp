#pragma once

/// \file experiment.hpp
/// \brief Subcommand runners behind the command-line tool.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "reslab/bifurcation.hpp"
#include "reslab/config.hpp"
#include "reslab/error.hpp"
#include "reslab/grid.hpp"
#include "reslab/io.hpp"
#include "reslab/nonlinearity.hpp"
#include "reslab/potential.hpp"
#include "reslab/resonance_solver.hpp"
#include "reslab/rng.hpp"
#include "reslab/semiflow.hpp"
#include "reslab/spectral.hpp"

namespace reslab {

using Json = nlohmann::ordered_json;

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitNegative = 4 };

inline int exit_code_for(const Error& e) { return e.is_input_error() ? kExitConfig : kExitNumerical; }

namespace detail {

inline void dump_json(const Json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  const std::string close(static_cast<std::size_t>(indent), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(it.key()).dump() + ": ";
        dump_json(it.value(), out, indent + 2);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump_json(j[i], out, indent + 2);
      }
      out += "\n" + close + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format17(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Pretty JSON with doubles at 17 significant digits; non-finite values become null.
inline std::string json_text(const Json& j) {
  std::string out;
  detail::dump_json(j, out, 0);
  out += '\n';
  return out;
}

inline Json config_json(const ExperimentConfig& c) {
  Json j = Json::object();
  for (const auto& [section, entries] : effective_entries(c)) {
    Json s = Json::object();
    for (const auto& [key, value] : entries) s[key] = value;
    j[section] = s;
  }
  return j;
}

/// Grid, potential, operator, spectrum and nonlinearity built from a config.
struct Setup {
  GridPtr grid;
  std::optional<PotentialSpec> potential;
  std::optional<HamiltonianOperator> op;
  SpectralData spectrum;
  NonlinearitySpec nonlinearity;
};

inline PotentialFamily potential_family(const PotentialConfig& p) {
  if (p.family == "poschl_teller") return PoschlTeller{p.ell};
  if (p.family == "square_well") return SquareWell{p.depth, p.width};
  if (p.family == "coulomb") {
    Coulomb c;
    c.c = p.c;
    c.center = Point{p.center_x, p.center_y};
    c.alpha = p.alpha;
    c.cutoff_radius = p.split_radius;
    return c;
  }
  if (p.family == "constant") return Constant{p.c};
  throw Error(ErrorCode::ConfigError, "[potential] family: unknown '" + p.family + "'");
}

inline NonlinearitySpec build_nonlinearity(const NonlinearityConfig& f) {
  const GaussianProfile g{f.amplitude, f.width};
  NonlinearitySpec spec;
  if (f.family == "zero") spec = make_nonlinearity(ZeroNonlinearity{});
  else if (f.family == "arctan") spec = make_nonlinearity(ArctanNonlinearity{g});
  else if (f.family == "rational") spec = make_nonlinearity(RationalNonlinearity{g});
  else if (f.family == "constant") spec = make_nonlinearity(ConstantForcing{g});
  else throw Error(ErrorCode::ConfigError, "[nonlinearity] family: unknown '" + f.family + "'");
  return f.flip_half_line ? flip_on_half_line(spec) : spec;
}

inline Setup build_setup(const ExperimentConfig& c) {
  Setup s;
  s.grid = make_grid(c.grid.dim, c.grid.L, c.grid.n);
  s.potential.emplace(make_potential(s.grid, potential_family(c.potential), c.potential.offset, c.potential.p));
  s.op.emplace(assemble_hamiltonian(*s.grid, *s.potential));
  EigenOptions eo;
  eo.ceiling = c.spectral.ceiling;
  eo.tol_eig = c.spectral.tol_eig;
  eo.cluster_tol_rel = c.spectral.cluster_tol;
  s.spectrum = eigenpairs_below(*s.op, eo);
  s.nonlinearity = build_nonlinearity(c.nonlinearity);
  return s;
}

/// Resolves the lambda0 selector against the computed spectrum.
inline double resolve_lambda0(const SpectralData& data, const std::string& selector) {
  const Lambda0Selector sel = parse_lambda0_selector(selector);
  if (sel.by_index) {
    require(sel.index < data.count(), ErrorCode::ConfigError,
            "[spectral] lambda0: index " + std::to_string(sel.index) + " but only " + std::to_string(data.count()) +
                " eigenvalues lie below the ceiling");
    return data.eigenvalues[static_cast<std::size_t>(sel.index)];
  }
  const int m = find_multiplet(data, sel.value);
  require(m >= 0, ErrorCode::ConfigError,
          "[spectral] lambda0: no computed eigenvalue near " + format_shortest(sel.value));
  return data.multiplets[static_cast<std::size_t>(m)].value;
}

inline Projections build_projections(const Setup& s, const ExperimentConfig& c) {
  return build_projections(s.spectrum, resolve_lambda0(s.spectrum, c.spectral.lambda0), c.spectral.delta);
}

inline SolverConfig solver_config(const ExperimentConfig& c) {
  SolverConfig sc;
  sc.tol_fp_rel = c.experiment.tol_fp;
  sc.tol_pde_rel = c.experiment.tol_pde;
  sc.tol_lin = c.experiment.tol_lin;
  sc.max_iterations = c.experiment.max_iterations;
  sc.u_cap = c.experiment.u_cap;
  return sc;
}

inline CheckOptions check_options(const ExperimentConfig& c) {
  CheckOptions o;
  o.net_size = c.experiment.net_size;
  o.sample_budget = c.experiment.sample_budget;
  o.seed = c.experiment.seed;
  return o;
}

inline Json verdict_json(const ResonanceVerdict& v) {
  Json j = Json::object();
  j["condition"] = v.condition;
  j["holds"] = v.holds;
  j["applicable"] = v.applicable;
  j["pointwise_holds"] = v.pointwise_holds;
  j["extreme"] = v.extreme;
  j["positive_mass_fraction"] = v.positive_mass_fraction;
  j["witness_count"] = v.witnesses.size();
  j["note"] = v.note;
  if (v.violation) {
    j["violation"] = Json{{"x", Json::array({v.violation->x[0], v.violation->x[1]})},
                          {"s", v.violation->s},
                          {"value", v.violation->value}};
  }
  return j;
}

/// LL+-, SR+- verdicts; conditions whose inputs are missing are reported inapplicable.
inline std::vector<ResonanceVerdict> resonance_verdicts(const NonlinearitySpec& spec, const Grid& grid,
                                                        const Projections& proj, const CheckOptions& opt) {
  std::vector<ResonanceVerdict> out;
  for (ResonanceSign s : {ResonanceSign::Plus, ResonanceSign::Minus}) {
    if (spec.has_limits()) {
      out.push_back(check_landesman_lazer(spec, grid, proj.kernel(), s, opt));
    } else {
      ResonanceVerdict v;
      v.condition = s == ResonanceSign::Plus ? "LL+" : "LL-";
      v.applicable = false;
      v.note = "limit fields not declared";
      out.push_back(v);
    }
  }
  for (ResonanceSign s : {ResonanceSign::Plus, ResonanceSign::Minus}) {
    if (spec.k_plus && spec.k_minus) {
      out.push_back(check_sign_condition(spec, grid, s, opt, &proj.kernel()));
    } else {
      ResonanceVerdict v;
      v.condition = s == ResonanceSign::Plus ? "SR+" : "SR-";
      v.applicable = false;
      v.note = "k+- not declared";
      out.push_back(v);
    }
  }
  return out;
}

struct RunResult {
  int exit_code = kExitOk;
  std::vector<std::filesystem::path> files;
  std::string summary;
};

namespace detail {

inline Json header_json(const ExperimentConfig& c, const std::string& subcommand) {
  Json j = Json::object();
  j["subcommand"] = subcommand;
  j["seed"] = c.experiment.seed;
  j["config"] = config_json(c);
  return j;
}

inline void emit(RunResult& r, const std::filesystem::path& path, const std::string& text) {
  write_text_file(path, text);
  r.files.push_back(path);
}

inline Json spectrum_json(const Setup& s) {
  Json j = Json::object();
  j["alpha_hat"] = s.op->alpha_hat();
  j["ceiling"] = s.spectrum.ceiling;
  j["dense_path"] = s.spectrum.dense_path;
  Json eig = Json::array();
  for (double v : s.spectrum.eigenvalues) eig.push_back(v);
  j["eigenvalues"] = eig;
  Json mult = Json::array();
  for (const auto& m : s.spectrum.multiplets) mult.push_back(Json{{"value", m.value}, {"multiplicity", m.multiplicity}});
  j["multiplets"] = mult;
  return j;
}

/// Smooth seeded samples in range(Q) with L2 norm at most `bound`.
inline std::vector<Vec> complement_samples(const Projections& proj, int count, double bound, Rng& rng) {
  const Grid& g = proj.grid();
  std::vector<Vec> out;
  out.push_back(Vec::Zero(g.size()));
  for (int i = 1; i < count; ++i) {
    const double cx = rng.uniform(-0.5, 0.5) * g.half_width();
    const double cy = g.dim() == 2 ? rng.uniform(-0.5, 0.5) * g.half_width() : 0.0;
    const double w = rng.uniform(0.5, 2.0);
    Vec v(g.size());
    for (std::size_t k = 0; k < g.node_count(); ++k) {
      const Point x = g.node(k);
      const double r2 = (x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy);
      v[static_cast<Eigen::Index>(k)] = g.is_interior(k) ? std::exp(-r2 / (w * w)) : 0.0;
    }
    v = proj.Q(v);
    const double n = l2_norm(g, v);
    if (n > 0.0) v *= bound * rng.uniform() / n;
    out.push_back(v);
  }
  return out;
}

struct SideResult {
  int side = -1;
  std::vector<BranchPoint> points;
  Json json;
  bool detected = false;
};

inline SideResult run_side(const ExperimentConfig& c, const Setup& s, const Projections& proj, int side) {
  SideResult out;
  out.side = side;
  ReducedProblem rp(*s.op, proj, s.nonlinearity, c.experiment.tol_lin);
  const auto schedule = geometric_schedule(proj.lambda0(), proj.delta(), c.experiment.points, side);
  out.points = continue_branch(schedule, rp, solver_config(c));

  Json j = Json::object();
  j["side"] = side < 0 ? "below" : "above";
  int converged = 0;
  for (const auto& bp : out.points) converged += bp.converged ? 1 : 0;
  j["points"] = out.points.size();
  j["converged"] = converged;

  Json bj = Json::object();
  try {
    const BlowupVerdict v =
        detect_asymptotic_bifurcation(out.points, proj.lambda0(), c.experiment.growth_factor, c.experiment.window);
    out.detected = v.detected;
    bj["detected"] = v.detected;
    bj["monotone"] = v.monotone;
    bj["trivial"] = v.trivial;
    bj["cap_reached"] = v.cap_reached;
    bj["growth_ratio"] = v.growth_ratio;
    bj["fitted_power"] = v.fitted_power;
    bj["window"] = v.window;
    bj["note"] = v.note;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MissingData) throw;
    bj["detected"] = false;
    bj["note"] = std::string("no asymptotic bifurcation detected (") + e.what() + ")";
  }
  j["blowup"] = bj;

  Json nj = Json::object();
  try {
    NecessaryConditionOptions no;
    no.tail = c.experiment.tail;
    no.slope_tol = c.experiment.slope_tol;
    no.sandwich_bound = c.experiment.sandwich_bound;
    const auto r = necessary_condition_report(out.points, rp.m_l2(), proj.gap_constant(), no);
    nj["trivial"] = r.trivial;
    nj["tail"] = r.tail;
    nj["c"] = r.c;
    nj["qu_bound"] = r.qu_bound;
    nj["max_qu"] = r.max_qu;
    nj["qu_pass"] = r.qu_pass;
    nj["max_grad_qu"] = r.max_grad_qu;
    nj["grad_qu_slope"] = r.grad_qu_slope;
    nj["grad_qu_flat"] = r.grad_qu_flat;
    nj["pu_increasing"] = r.pu_increasing;
    nj["l2_increasing"] = r.l2_increasing;
    nj["grad_increasing"] = r.grad_increasing;
    nj["C1"] = r.C1;
    nj["C2"] = r.C2;
    nj["spread"] = r.spread;
    nj["C1_P"] = r.C1_P;
    nj["C2_P"] = r.C2_P;
    nj["spread_P"] = r.spread_P;
    nj["sandwich_pass"] = r.sandwich_pass;
    nj["note"] = r.note;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MissingData) throw;
    nj["note"] = e.what();
  }
  j["necessary_conditions"] = nj;

  if (s.nonlinearity.is_standing_wave()) {
    const EnergyTrend t = energy_trend(out.points);
    Json ej = Json::object();
    Json vals = Json::array();
    for (double e : t.energies) vals.push_back(e);
    ej["values"] = vals;
    ej["decreasing"] = t.decreasing;
    ej["increasing"] = t.increasing;
    ej["final_sign"] = t.final_sign;
    ej["sign_stable"] = t.sign_stable;
    j["energy"] = ej;
  }
  out.json = j;
  return out;
}

}  // namespace detail

inline RunResult run_spectrum(const ExperimentConfig& c) {
  const Setup s = build_setup(c);
  RunResult r;
  const std::filesystem::path dir(c.output.dir);
  CsvTable table({"index", "eigenvalue", "residual"});
  for (int i = 0; i < s.spectrum.count(); ++i)
    table.add_row({static_cast<double>(i), s.spectrum.eigenvalues[static_cast<std::size_t>(i)],
                   s.spectrum.residuals[static_cast<std::size_t>(i)]});
  detail::emit(r, dir / "spectrum.csv", table.str());

  Json j = detail::header_json(c, "spectrum");
  j["spectrum"] = detail::spectrum_json(s);
  Json morse = Json::array();
  for (double lambda : c.spectral.morse_at) {
    Json m = Json::object();
    m["lambda"] = lambda;
    try {
      const MorseCount k = morse_count(s.spectrum, lambda);
      m["k"] = k.k;
      m["conley_index"] = k.conley_label;
    } catch (const Error& e) {
      m["error"] = e.what();
    }
    morse.push_back(m);
  }
  j["morse_counts"] = morse;
  detail::emit(r, dir / "spectrum.json", json_text(j));
  r.summary = std::to_string(s.spectrum.count()) + " eigenvalues below " + format_shortest(s.spectrum.ceiling);
  return r;
}

inline RunResult run_resonance(const ExperimentConfig& c) {
  const Setup s = build_setup(c);
  const Projections proj = build_projections(s, c);
  RunResult r;
  const std::filesystem::path dir(c.output.dir);
  const auto verdicts = resonance_verdicts(s.nonlinearity, *s.grid, proj, check_options(c));

  Rng rng(c.experiment.seed);
  const double qbound = 2.0 * m_l2_norm(s.nonlinearity, *s.grid) / proj.gap_constant();
  const auto samples = detail::complement_samples(proj, c.experiment.probe_samples, qbound, rng);
  CsvTable table({"sign", "radius", "min_pairing", "argmin_sample", "argmin_direction"});
  for (ResonanceSign sg : {ResonanceSign::Plus, ResonanceSign::Minus}) {
    for (double radius : c.experiment.probe_radii) {
      const SphereProbe p =
          kernel_sphere_probe(s.nonlinearity, proj, samples, radius, sg, c.experiment.net_size, c.experiment.seed);
      table.add_row({sg == ResonanceSign::Plus ? 1.0 : -1.0, radius, p.min_pairing,
                     static_cast<double>(p.argmin_sample), static_cast<double>(p.argmin_direction)});
    }
  }
  detail::emit(r, dir / "sphere_probe.csv", table.str());

  Json j = detail::header_json(c, "resonance");
  j["lambda0"] = proj.lambda0();
  j["delta"] = proj.delta();
  j["kernel_dim"] = proj.kernel_dim();
  Json vj = Json::array();
  bool any = false;
  for (const auto& v : verdicts) {
    vj.push_back(verdict_json(v));
    any = any || (v.applicable && v.holds);
  }
  j["verdicts"] = vj;
  j["any_holds"] = any;
  detail::emit(r, dir / "resonance.json", json_text(j));
  r.exit_code = any ? kExitOk : kExitNegative;
  r.summary = any ? "a resonance condition holds" : "no resonance condition holds";
  return r;
}

inline RunResult run_branch(const ExperimentConfig& c) {
  const Setup s = build_setup(c);
  const Projections proj = build_projections(s, c);
  RunResult r;
  const std::filesystem::path dir(c.output.dir);

  std::vector<int> sides;
  if (c.experiment.side != "above") sides.push_back(-1);
  if (c.experiment.side != "below") sides.push_back(1);
  std::vector<detail::SideResult> results;
  if (sides.size() > 1 && c.effective_workers() > 1) {
    std::vector<std::future<detail::SideResult>> futures;
    for (int side : sides)
      futures.push_back(std::async(std::launch::async, [&c, &s, &proj, side] { return detail::run_side(c, s, proj, side); }));
    for (auto& f : futures) results.push_back(f.get());
  } else {
    for (int side : sides) results.push_back(detail::run_side(c, s, proj, side));
  }

  Json j = detail::header_json(c, "branch");
  j["lambda0"] = proj.lambda0();
  j["delta"] = proj.delta();
  j["m_l2"] = m_l2_norm(s.nonlinearity, *s.grid);
  Json vj = Json::array();
  for (const auto& v : resonance_verdicts(s.nonlinearity, *s.grid, proj, check_options(c))) vj.push_back(verdict_json(v));
  j["resonance_verdicts"] = vj;
  Json bj = Json::array();
  bool detected = false;
  for (const auto& res : results) {
    const std::string name = results.size() > 1 ? (res.side < 0 ? "branch_below.csv" : "branch_above.csv") : "branch.csv";
    detail::emit(r, dir / name, branch_csv(res.points));
    Json sj = res.json;
    sj["csv"] = name;
    bj.push_back(sj);
    detected = detected || res.detected;
  }
  j["branches"] = bj;
  j["verdict"] = detected ? "asymptotic bifurcation detected" : "no asymptotic bifurcation detected";
  detail::emit(r, dir / "bifurcation.json", json_text(j));
  r.exit_code = detected ? kExitOk : kExitNegative;
  r.summary = j["verdict"].get<std::string>();
  return r;
}

inline RunResult run_semiflow(const ExperimentConfig& c) {
  const Setup s = build_setup(c);
  const Projections proj = build_projections(s, c);
  RunResult r;
  const std::filesystem::path dir(c.output.dir);
  const auto& e = c.experiment;
  const double lambda = e.lambda.value_or(proj.lambda0() - 0.5 * proj.delta());

  const Grid& g = *s.grid;
  Vec u0(g.size());
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    const Point x = g.node(k);
    const double r2 = (x[0] - e.init_center) * (x[0] - e.init_center) + x[1] * x[1];
    u0[static_cast<Eigen::Index>(k)] = g.is_interior(k) ? e.init_amplitude * std::exp(-r2 / (e.init_width * e.init_width)) : 0.0;
  }
  Semiflow flow(*s.op, s.nonlinearity, lambda, &proj);
  EvolveOptions eo;
  eo.horizon = e.horizon;
  eo.dt = e.dt;
  eo.save_every = e.save_every;
  eo.stop = e.stop == "equilibrium" ? StopRule::Equilibrium : (e.stop == "plateau" ? StopRule::JPlateau : StopRule::TimeOnly);
  eo.tol_eq_rel = e.tol_eq;
  eo.diagnostics = true;
  eo.keep_fields = e.snapshots || !e.tail_radii.empty();
  const Trajectory traj = flow.evolve(u0, eo, s.spectrum.eigenvalues.empty()
                                                  ? std::nullopt
                                                  : std::optional<double>(s.spectrum.eigenvalues.front()));
  detail::emit(r, dir / "trajectory.csv", trajectory_csv(traj));
  if (e.snapshots) {
    write_snapshots(traj, g, dir / "snapshots.bin");
    r.files.push_back(dir / "snapshots.bin");
  }

  Json j = detail::header_json(c, "semiflow");
  j["lambda"] = lambda;
  j["lambda0"] = proj.lambda0();
  j["delta"] = proj.delta();
  j["dt"] = traj.dt_record.back();
  j["rejections"] = traj.rejections;
  j["saved_states"] = traj.states.size();
  j["max_J_increase"] = traj.max_J_increase;
  j["J_nonincreasing"] = traj.max_J_increase <= 1e-8;
  j["equilibrium"] = traj.equilibrium;
  j["equilibrium_time"] = traj.equilibrium_time;
  double worst_drift = 0.0;
  for (const auto& d : traj.diagnostics)
    if (d.drift_scale > 0.0 && std::isfinite(d.drift_fd)) worst_drift = std::max(worst_drift, std::abs(d.drift_fd - d.drift_rate) / d.drift_scale);
  j["max_drift_relative_error"] = worst_drift;
  const auto& last = traj.states.back();
  j["final"] = Json{{"t", last.t}, {"l2", last.norms.l2}, {"h1", last.norms.h1}, {"J", last.J}, {"Pu_l2", last.Pu_l2}, {"Qu_l2", last.Qu_l2}};
  if (!e.tail_radii.empty()) {
    const auto rep = tail_decay_report(traj, proj, *s.potential, s.nonlinearity, s.op->alpha_hat(), e.tail_radii);
    j["tail_decay"] = Json{{"alpha", rep.alpha}, {"eta", rep.eta}, {"R", rep.R}, {"checked", rep.checked}, {"all_pass", rep.all_pass}};
  }
  detail::emit(r, dir / "semiflow.json", json_text(j));
  r.summary = traj.equilibrium ? "equilibrium reached" : "horizon reached";
  return r;
}

/// Merges the JSON outputs already present in the output directory.
inline RunResult run_report(const ExperimentConfig& c) {
  RunResult r;
  const std::filesystem::path dir(c.output.dir);
  Json j = detail::header_json(c, "report");
  Json parts = Json::object();
  Json missing = Json::array();
  for (const char* name : {"spectrum", "resonance", "bifurcation", "semiflow"}) {
    const auto path = dir / (std::string(name) + ".json");
    if (!std::filesystem::exists(path)) {
      missing.push_back(name);
      continue;
    }
    Json part;
    try {
      part = Json::parse(read_text_file(path));
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
    }
    part.erase("config");
    parts[name] = part;
  }
  require(!parts.empty(), ErrorCode::MissingData, "no prior outputs in " + dir.string());
  j["parts"] = parts;
  j["missing"] = missing;
  detail::emit(r, dir / "summary.json", json_text(j));
  r.summary = "merged " + std::to_string(parts.size()) + " reports";
  return r;
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"spectrum", "resonance", "branch", "semiflow", "report"};
  return names;
}

inline RunResult run_experiment(const ExperimentConfig& c, const std::string& subcommand) {
  if (subcommand == "spectrum") return run_spectrum(c);
  if (subcommand == "resonance") return run_resonance(c);
  if (subcommand == "branch") return run_branch(c);
  if (subcommand == "semiflow") return run_semiflow(c);
  if (subcommand == "report") return run_report(c);
  throw Error(ErrorCode::ConfigError, "unknown subcommand '" + subcommand + "'");
}

}  // namespace reslab
