#pragma once

/// \file bifurcation.hpp
/// \brief Continuation towards lambda0, blow-up detection, necessary-condition
/// diagnostics and standing-wave energies.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "reslab/error.hpp"
#include "reslab/grid.hpp"
#include "reslab/io.hpp"
#include "reslab/nonlinearity.hpp"
#include "reslab/resonance_solver.hpp"
#include "reslab/spectral.hpp"

namespace reslab {

struct BranchPoint {
  double lambda = 0.0;
  Vec u;                  ///< PDE solution
  Vec fixed_point;        ///< reduced-map iterate
  bool converged = false;
  bool capped = false;
  int iterations = 0;
  FieldNorms norms;
  double Pu_l2 = 0.0;
  double Qu_l2 = 0.0;
  double grad_Pu_l2 = 0.0;
  double grad_Qu_l2 = 0.0;
  double residual = 0.0;
  double defect = 0.0;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double drift = 0.0;     ///< (lambda - lambda0) ||Pu||^2 + <Pu, F(u)>
};

/// lambda_n = lambda0 + side 2^{-n} delta, n = 1..count.
inline std::vector<double> geometric_schedule(double lambda0, double delta, int count, int side = -1) {
  require(count > 0, ErrorCode::InvalidArgument, "schedule needs at least one point");
  require(side == 1 || side == -1, ErrorCode::InvalidArgument, "side must be +1 or -1");
  require(delta > 0.0, ErrorCode::InvalidArgument, "delta must be positive");
  std::vector<double> out;
  for (int n = 1; n <= count; ++n) out.push_back(lambda0 + side * std::ldexp(delta, -n));
  return out;
}

/// E = 1/2 (lambda ||u||^2 + sum w (h(x,|u|) |u| - 2 H(x,|u|))).
inline double standing_wave_energy(double lambda, const Vec& u, const Grid& grid, const NonlinearitySpec& spec) {
  require(spec.is_standing_wave(), ErrorCode::InvalidArgument, spec.name + " is not a standing-wave nonlinearity");
  require(u.size() == grid.size(), ErrorCode::GridMismatch, "energy: field size mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.node_count(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const Point x = grid.node(k);
    const double a = std::abs(u[kk]);
    acc += grid.weights()[kk] * (spec.h(x, a) * a - 2.0 * spec.h_primitive(x, a));
  }
  return 0.5 * (lambda * inner(grid, u, u) + acc);
}

inline double standing_wave_energy(double lambda, const Field& u, const HamiltonianOperator& op,
                                   const NonlinearitySpec& spec) {
  require_same_grid(op.grid(), u.grid(), "energy: field lives on another grid");
  return standing_wave_energy(lambda, u.values(), op.grid(), spec);
}

/// H^1 norm below which a branch point counts as the trivial solution.
inline constexpr double kTrivialNorm = 1e-6;

struct BranchOptions {
  std::optional<Vec> u_init;  ///< first point; default (||m|| / |lambda_1 - lambda0|) phi_0
  int sign = 1;               ///< orientation of the default start along phi_0
};

namespace detail {

inline void annotate(BranchPoint& bp, const ReducedProblem& rp) {
  const Grid& g = rp.grid();
  const Projections& proj = rp.projections();
  const Vec pu = proj.P(bp.u), qu = proj.Q(bp.u);
  bp.norms = norms_of(g, bp.u);
  bp.Pu_l2 = l2_norm(g, pu);
  bp.Qu_l2 = l2_norm(g, qu);
  bp.grad_Pu_l2 = std::sqrt(grad_norm_sq(g, pu));
  bp.grad_Qu_l2 = std::sqrt(grad_norm_sq(g, qu));
  const Vec f = apply_f(rp.nonlinearity(), g, bp.u);
  bp.drift = (bp.lambda - proj.lambda0()) * inner(g, pu, pu) + inner(g, pu, f);
  if (rp.nonlinearity().is_standing_wave()) bp.energy = standing_wave_energy(bp.lambda, bp.u, g, rp.nonlinearity());
}

}  // namespace detail

/// Warm-started solves along a schedule approaching lambda0 from one side.
/// Each start rescales the previous kernel part by the ratio of distances to
/// lambda0 and keeps its complement part.  After a trivial point the next
/// start is the default one.
inline std::vector<BranchPoint> continue_branch(const std::vector<double>& schedule, const ReducedProblem& rp,
                                                const SolverConfig& cfg = {}, const BranchOptions& bopt = {}) {
  require(!schedule.empty(), ErrorCode::InvalidArgument, "empty schedule");
  const Projections& proj = rp.projections();
  const double lambda0 = proj.lambda0();
  const double side = schedule.front() < lambda0 ? -1.0 : 1.0;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const double d = schedule[i] - lambda0;
    require(d != 0.0, ErrorCode::ResonantLambda, "schedule contains lambda0");
    require(d * side > 0.0, ErrorCode::InvalidArgument, "schedule must approach lambda0 from one side");
    require(std::abs(d) <= proj.delta() * (1.0 + 1e-12), ErrorCode::DomainExceeded,
            "schedule leaves the delta-window");
    if (i > 0)
      require(std::abs(d) < std::abs(schedule[i - 1] - lambda0), ErrorCode::InvalidArgument,
              "schedule must move strictly towards lambda0");
  }
  require(proj.kernel_dim() > 0, ErrorCode::InvalidArgument, "kernel is empty");

  std::vector<BranchPoint> out;
  std::optional<Vec> last;
  double last_eps = 0.0;
  for (double lambda : schedule) {
    const double eps = std::abs(lambda - lambda0);
    Vec start;
    if (last) {
      const Vec pu = proj.P(*last);
      start = (last_eps / eps) * pu + (*last - pu);
    } else if (bopt.u_init) {
      start = *bopt.u_init;
    } else {
      start = (bopt.sign * std::max(rp.m_l2(), 1e-12) / eps) * proj.kernel().col(0);
    }
    const SolveResult r = rp.solve(lambda, start, cfg);
    BranchPoint bp;
    bp.lambda = lambda;
    bp.u = r.w;
    bp.fixed_point = r.u;
    bp.converged = r.converged;
    bp.capped = r.capped;
    bp.iterations = r.iterations;
    bp.residual = r.pde_residual;
    bp.defect = r.defect;
    detail::annotate(bp, rp);
    // rescaling a trivial solution cannot leave it; restart from the kernel instead
    if (r.converged && bp.norms.h1 >= kTrivialNorm) {
      last = r.u;
      last_eps = eps;
    }
    out.push_back(std::move(bp));
    if (r.capped) break;
  }
  return out;
}

struct BlowupVerdict {
  bool detected = false;
  bool monotone = false;
  bool trivial = false;
  bool cap_reached = false;
  double growth_ratio = 0.0;
  double fitted_power = std::numeric_limits<double>::quiet_NaN();
  int window = 0;
  std::string note;
};

namespace detail {

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

inline std::vector<const BranchPoint*> converged_tail(const std::vector<BranchPoint>& branch, int count) {
  std::vector<const BranchPoint*> conv;
  for (const auto& bp : branch)
    if (bp.converged) conv.push_back(&bp);
  require(static_cast<int>(conv.size()) >= count, ErrorCode::MissingData,
          "branch has " + std::to_string(conv.size()) + " converged points, need " + std::to_string(count));
  return std::vector<const BranchPoint*>(conv.end() - count, conv.end());
}

}  // namespace detail

/// Strictly increasing ||u_n||_{H^1} over the last `window` converged points
/// with growth at least `growth_factor`; a capped solve after the window also
/// counts as divergence evidence.
inline BlowupVerdict detect_asymptotic_bifurcation(const std::vector<BranchPoint>& branch, double lambda0,
                                                   double growth_factor = 4.0, int window = 5) {
  require(window >= 2, ErrorCode::InvalidArgument, "window must be at least 2");
  require(growth_factor > 1.0, ErrorCode::InvalidArgument, "growth factor must exceed 1");
  const auto tail = detail::converged_tail(branch, window);
  BlowupVerdict v;
  v.window = window;
  v.cap_reached = !branch.empty() && branch.back().capped;
  const double first = tail.front()->norms.h1, lastn = tail.back()->norms.h1;
  if (!(first > 0.0)) {
    v.trivial = true;
    v.growth_ratio = lastn > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  } else {
    v.growth_ratio = lastn / first;
  }
  v.monotone = true;
  for (std::size_t i = 1; i < tail.size(); ++i) v.monotone = v.monotone && tail[i]->norms.h1 > tail[i - 1]->norms.h1;

  std::vector<double> lx, ly;
  bool logs_ok = true;
  for (const auto* bp : tail) {
    if (!(bp->norms.h1 > 0.0)) logs_ok = false;
    lx.push_back(std::log(std::abs(bp->lambda - lambda0)));
    ly.push_back(std::log(bp->norms.h1));
  }
  if (logs_ok) v.fitted_power = detail::fit_slope(lx, ly);
  if (lastn < kTrivialNorm) v.trivial = true;

  v.detected = !v.trivial && ((v.monotone && v.growth_ratio >= growth_factor) || (v.cap_reached && v.monotone));
  if (v.trivial) v.note = "trivial branch; no asymptotic bifurcation detected";
  else if (v.detected) v.note = v.cap_reached ? "asymptotic bifurcation detected (norm cap reached)" : "asymptotic bifurcation detected";
  else v.note = "no asymptotic bifurcation detected";
  return v;
}

struct NecessaryConditionReport {
  bool trivial = false;
  int tail = 0;
  double c = 0.0;
  double qu_bound = 0.0;         ///< 2 ||m|| / c
  double max_qu = 0.0;
  bool qu_pass = false;
  double max_grad_qu = 0.0;
  double grad_qu_slope = 0.0;    ///< fitted slope per index divided by the mean
  bool grad_qu_flat = false;
  bool pu_increasing = false;
  bool l2_increasing = false;
  bool grad_increasing = false;
  double C1 = 0.0, C2 = 0.0, spread = 0.0;       ///< ||grad u|| / ||u||
  double C1_P = 0.0, C2_P = 0.0, spread_P = 0.0; ///< ||grad Pu|| / ||Pu||
  bool sandwich_pass = false;
  std::string note;
};

struct NecessaryConditionOptions {
  int tail = 6;
  double slope_tol = 1e-2;
  double sandwich_bound = 10.0;
  double qu_tol = 1e-8;
};

inline NecessaryConditionReport necessary_condition_report(const std::vector<BranchPoint>& branch, double m_l2, double c,
                                                           const NecessaryConditionOptions& opt = {}) {
  require(c > 0.0, ErrorCode::InvalidArgument, "gap constant must be positive");
  require(opt.tail >= 2, ErrorCode::InvalidArgument, "tail must have at least 2 points");
  const auto tail = detail::converged_tail(branch, opt.tail);
  NecessaryConditionReport r;
  r.tail = opt.tail;
  r.c = c;
  r.qu_bound = 2.0 * m_l2 / c;
  for (const auto* bp : tail) {
    r.max_qu = std::max(r.max_qu, bp->Qu_l2);
    r.max_grad_qu = std::max(r.max_grad_qu, bp->grad_Qu_l2);
  }
  r.qu_pass = r.max_qu <= r.qu_bound + opt.qu_tol;

  bool trivial = true;
  for (const auto* bp : tail) trivial = trivial && bp->norms.h1 < kTrivialNorm;
  r.trivial = trivial;
  if (trivial) {
    r.note = "trivial branch; ratios undefined";
    r.C1 = r.C2 = r.spread = r.C1_P = r.C2_P = r.spread_P = std::numeric_limits<double>::quiet_NaN();
    r.grad_qu_slope = std::numeric_limits<double>::quiet_NaN();
    return r;
  }

  std::vector<double> idx, gq;
  double mean = 0.0;
  for (std::size_t i = 0; i < tail.size(); ++i) {
    idx.push_back(static_cast<double>(i));
    gq.push_back(tail[i]->grad_Qu_l2);
    mean += tail[i]->grad_Qu_l2;
  }
  mean /= static_cast<double>(tail.size());
  const double slope = detail::fit_slope(idx, gq);
  r.grad_qu_slope = mean > 0.0 ? slope / mean : slope;
  r.grad_qu_flat = std::abs(r.grad_qu_slope) <= opt.slope_tol;

  r.pu_increasing = r.l2_increasing = r.grad_increasing = true;
  for (std::size_t i = 1; i < tail.size(); ++i) {
    r.pu_increasing = r.pu_increasing && tail[i]->Pu_l2 > tail[i - 1]->Pu_l2;
    r.l2_increasing = r.l2_increasing && tail[i]->norms.l2 > tail[i - 1]->norms.l2;
    r.grad_increasing = r.grad_increasing && tail[i]->norms.grad_l2 > tail[i - 1]->norms.grad_l2;
  }

  r.C1 = r.C1_P = std::numeric_limits<double>::infinity();
  r.C2 = r.C2_P = 0.0;
  for (const auto* bp : tail) {
    const double q = bp->norms.grad_l2 / bp->norms.l2;
    r.C1 = std::min(r.C1, q);
    r.C2 = std::max(r.C2, q);
    if (bp->Pu_l2 > 0.0) {
      const double qp = bp->grad_Pu_l2 / bp->Pu_l2;
      r.C1_P = std::min(r.C1_P, qp);
      r.C2_P = std::max(r.C2_P, qp);
    }
  }
  r.spread = r.C2 / r.C1;
  r.spread_P = r.C2_P > 0.0 ? r.C2_P / r.C1_P : std::numeric_limits<double>::quiet_NaN();
  r.sandwich_pass = r.C1 > 0.0 && std::isfinite(r.C2) && r.spread <= opt.sandwich_bound;
  return r;
}

struct EnergyTrend {
  std::vector<double> energies;
  bool decreasing = false;
  bool increasing = false;
  int final_sign = 0;  ///< sign of the last energy
  bool sign_stable = false;  ///< the last half of the branch shares one sign
};

inline EnergyTrend energy_trend(const std::vector<BranchPoint>& branch) {
  EnergyTrend t;
  for (const auto& bp : branch)
    if (bp.converged && std::isfinite(bp.energy)) t.energies.push_back(bp.energy);
  if (t.energies.size() < 2) return t;
  t.decreasing = t.increasing = true;
  for (std::size_t i = 1; i < t.energies.size(); ++i) {
    t.decreasing = t.decreasing && t.energies[i] < t.energies[i - 1];
    t.increasing = t.increasing && t.energies[i] > t.energies[i - 1];
  }
  const double last = t.energies.back();
  t.final_sign = last > 0.0 ? 1 : (last < 0.0 ? -1 : 0);
  t.sign_stable = true;
  for (std::size_t i = t.energies.size() / 2; i < t.energies.size(); ++i) {
    const int s = t.energies[i] > 0.0 ? 1 : (t.energies[i] < 0.0 ? -1 : 0);
    t.sign_stable = t.sign_stable && s == t.final_sign;
  }
  return t;
}

/// Columns lambda, l2, grad_l2, h1, Pu_l2, Qu_l2, residual, E, converged.
inline std::string branch_csv(const std::vector<BranchPoint>& branch) {
  CsvTable table({"lambda", "l2", "grad_l2", "h1", "Pu_l2", "Qu_l2", "residual", "E", "converged"});
  for (const auto& bp : branch)
    table.add_row({bp.lambda, bp.norms.l2, bp.norms.grad_l2, bp.norms.h1, bp.Pu_l2, bp.Qu_l2, bp.residual, bp.energy,
                   bp.converged ? 1.0 : 0.0});
  return table.str();
}

}  // namespace reslab
