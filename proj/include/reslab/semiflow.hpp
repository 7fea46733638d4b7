#pragma once

/// \file semiflow.hpp
/// \brief IMEX Euler integration of u_t = -A u + lambda u + F(u), the
/// Lyapunov functional, the kernel-drift identity and tail-decay diagnostics.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "reslab/error.hpp"
#include "reslab/grid.hpp"
#include "reslab/io.hpp"
#include "reslab/nonlinearity.hpp"
#include "reslab/potential.hpp"
#include "reslab/spectral.hpp"

namespace reslab {

struct SemiflowState {
  double t = 0.0;
  Vec u;
  double J = 0.0;
  FieldNorms norms;
  double Pu_l2 = std::numeric_limits<double>::quiet_NaN();
  double Qu_l2 = std::numeric_limits<double>::quiet_NaN();
};

/// Finite-difference diagnostics around a saved state u_k.
struct StepDiagnostic {
  double t = 0.0;
  double dt = 0.0;
  double dJ_dt = 0.0;        ///< (J(u_k) - J(u_{k-1})) / dt
  double udot_sq = 0.0;      ///< ||(u_k - u_{k-1}) / dt||^2
  double drift_fd = std::numeric_limits<double>::quiet_NaN();    ///< central difference of ||Pu||^2 / 2
  double drift_rate = std::numeric_limits<double>::quiet_NaN();  ///< identity evaluated at u_k
  double drift_scale = std::numeric_limits<double>::quiet_NaN(); ///< |(lambda-lambda0)||Pu||^2| + |<Pu,F(u)>|
};

enum class StopRule { TimeOnly, Equilibrium, JPlateau };

struct EvolveOptions {
  double horizon = 1.0;
  std::optional<double> dt;       ///< default from default_dt
  double save_every = 0.1;
  StopRule stop = StopRule::TimeOnly;
  double tol_eq_rel = 1e-6;       ///< ||u_next - u|| / dt <= tol_eq_rel (1 + ||u||_{H^1})
  double tol_plateau_rel = 1e-12;
  int max_halvings = 20;
  bool diagnostics = false;       ///< record StepDiagnostic at save points
  bool keep_fields = true;
};

struct Trajectory {
  double lambda = 0.0;
  std::vector<SemiflowState> states;
  std::vector<StepDiagnostic> diagnostics;
  std::vector<double> dt_record;   ///< dt in force at each saved state
  int rejections = 0;
  bool equilibrium = false;
  double equilibrium_time = std::numeric_limits<double>::quiet_NaN();
  double max_J_increase = 0.0;     ///< max over consecutive saves of J_{k+1} - J_k
  bool projections_attached = false;
};

/// dt = min(0.1 / (|lambda_min| + |lambda| + 1), 1e-2).
inline double default_dt(double lambda_min, double lambda) {
  return std::min(0.1 / (std::abs(lambda_min) + std::abs(lambda) + 1.0), 1e-2);
}

/// Semiflow for fixed lambda.  Projections are optional and only feed the
/// kernel-drift and ||Pu||, ||Qu|| bookkeeping.
class Semiflow {
 public:
  Semiflow(const HamiltonianOperator& op, const NonlinearitySpec& spec, double lambda,
           const Projections* proj = nullptr)
      : op_(op), spec_(spec), bound_(spec, op.grid()), lambda_(lambda), proj_(proj) {
    if (proj_ != nullptr) require_same_grid(op.grid(), proj_->grid(), "semiflow: projections on another grid");
  }

  double lambda() const noexcept { return lambda_; }
  const Grid& grid() const noexcept { return op_.grid(); }

  /// J(u) = 1/2 (|grad u|^2 + <Vu,u> - lambda |u|^2) - sum w F_prim(x,u).
  double lyapunov(const Vec& u) const {
    return 0.5 * (op_.quadratic_form(u) - lambda_ * inner(grid(), u, u)) - bound_.primitive_integral(u);
  }

  /// (lambda - lambda0) ||Pu||^2 + <Pu, F(u)>.
  double drift_rate(const Vec& u) const {
    require(proj_ != nullptr, ErrorCode::MissingData, "kernel drift needs projections");
    const Vec pu = proj_->P(u);
    return (lambda_ - proj_->lambda0()) * inner(grid(), pu, pu) + inner(grid(), pu, bound_.apply(u));
  }

  SemiflowState make_state(double t, Vec u) const {
    SemiflowState s;
    s.t = t;
    s.J = lyapunov(u);
    s.norms = norms_of(grid(), u);
    if (proj_ != nullptr) {
      s.Pu_l2 = l2_norm(grid(), proj_->P(u));
      s.Qu_l2 = l2_norm(grid(), proj_->Q(u));
    }
    s.u = std::move(u);
    return s;
  }

  /// Solves (I + dt (A - lambda)) u_next = u + dt F(u).  Throws StepRejected
  /// when the implicit matrix is not positive definite.
  Vec step(const Vec& u, double dt) const {
    require(dt > 0.0 && std::isfinite(dt), ErrorCode::InvalidArgument, "dt must be positive");
    require(u.size() == grid().size(), ErrorCode::GridMismatch, "semiflow: field size mismatch");
    prepare(dt);
    const Vec explicit_part = u + dt * bound_.apply(u);
    const Vec rhs = op_.to_sym(explicit_part);
    const Vec sol = solver_.solve(rhs);
    return op_.from_sym(sol);
  }

  Trajectory evolve(const Vec& u0, const EvolveOptions& opt, std::optional<double> lambda_min = std::nullopt) const;

 private:
  void prepare(double dt) const {
    if (cached_dt_ == dt) return;
    // I + dt (S - lambda) = dt (S - (lambda - 1/dt))
    SpMat m = op_.shifted(lambda_ - 1.0 / dt);
    m *= dt;
    solver_.compute(m);
    cached_dt_ = std::numeric_limits<double>::quiet_NaN();
    require(solver_.info() == Eigen::Success, ErrorCode::StepRejected, "implicit factorization failed");
    require((solver_.vectorD().array() > 0.0).all(), ErrorCode::StepRejected,
            "I + dt (A - lambda) is not positive definite at dt = " + std::to_string(dt) +
                "; reduce dt below 1 / (lambda - lambda_min)");
    cached_dt_ = dt;
  }

  const HamiltonianOperator& op_;
  const NonlinearitySpec& spec_;
  BoundNonlinearity bound_;
  double lambda_;
  const Projections* proj_;
  mutable Ldlt solver_;
  mutable double cached_dt_ = std::numeric_limits<double>::quiet_NaN();
};

inline Trajectory Semiflow::evolve(const Vec& u0, const EvolveOptions& opt, std::optional<double> lambda_min) const {
  require(opt.horizon > 0.0, ErrorCode::InvalidArgument, "horizon must be positive");
  require(opt.save_every > 0.0, ErrorCode::InvalidArgument, "save interval must be positive");
  require(u0.allFinite(), ErrorCode::InvalidArgument, "initial field must be finite");
  double dt = opt.dt.value_or(default_dt(lambda_min.value_or(op_.lower_bound()), lambda_));
  dt = std::min(dt, opt.save_every);

  Trajectory traj;
  traj.lambda = lambda_;
  traj.projections_attached = proj_ != nullptr;
  traj.states.push_back(make_state(0.0, u0));
  traj.dt_record.push_back(dt);

  for (int halving = 0;; ++halving) {
    try {
      prepare(dt);
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::StepRejected || halving >= opt.max_halvings) throw;
      dt *= 0.5;
      ++traj.rejections;
    }
  }

  const auto stride = static_cast<long long>(std::llround(opt.save_every / dt));
  const long long total = static_cast<long long>(std::ceil(opt.horizon / dt - 1e-9));
  Vec prev = u0;
  double J_prev = traj.states.front().J;
  double J_last_saved = J_prev;
  std::optional<std::size_t> pending;  // diagnostic waiting for u_{k+1}
  Vec before_pending;

  for (long long k = 1; k <= total; ++k) {
    Vec next = step(prev, dt);
    require(next.allFinite(), ErrorCode::NotConverged, "semiflow produced non-finite values");
    const double t = static_cast<double>(k) * dt;
    const FieldNorms nn = norms_of(grid(), next);
    const double rate = l2_norm(grid(), next - prev) / dt;

    if (pending) {
      StepDiagnostic& d = traj.diagnostics[*pending];
      if (proj_ != nullptr) {
        const double a = 0.5 * inner(grid(), proj_->P(next), proj_->P(next));
        const double b = 0.5 * inner(grid(), proj_->P(before_pending), proj_->P(before_pending));
        d.drift_fd = (a - b) / (2.0 * dt);
      }
      pending.reset();
    }

    const bool save = k % stride == 0 || k == total;
    bool eq = rate <= opt.tol_eq_rel * (1.0 + nn.h1);
    if (save || (eq && opt.stop == StopRule::Equilibrium)) {
      SemiflowState s = make_state(t, next);
      traj.max_J_increase = std::max(traj.max_J_increase, s.J - J_last_saved);
      const double dJ_saved = s.J - J_last_saved;
      J_last_saved = s.J;
      if (opt.diagnostics) {
        StepDiagnostic d;
        d.t = t;
        d.dt = dt;
        d.dJ_dt = (s.J - J_prev) / dt;
        d.udot_sq = rate * rate;
        if (proj_ != nullptr) {
          d.drift_rate = drift_rate(next);
          const Vec pu = proj_->P(next);
          d.drift_scale = std::abs((lambda_ - proj_->lambda0()) * inner(grid(), pu, pu)) +
                          std::abs(inner(grid(), pu, bound_.apply(next)));
          pending = traj.diagnostics.size();
          before_pending = prev;
        }
        traj.diagnostics.push_back(d);
      }
      J_prev = s.J;
      if (!opt.keep_fields && traj.states.size() > 1) traj.states.back().u = Vec();
      traj.states.push_back(std::move(s));
      traj.dt_record.push_back(dt);
      if (eq && opt.stop == StopRule::Equilibrium) {
        traj.equilibrium = true;
        traj.equilibrium_time = t;
        break;
      }
      if (opt.stop == StopRule::JPlateau && std::abs(dJ_saved) <= opt.tol_plateau_rel * (1.0 + std::abs(J_prev))) {
        traj.equilibrium = eq;
        if (eq) traj.equilibrium_time = t;
        break;
      }
    } else if (opt.diagnostics && ((k + 1) % stride == 0 || k + 1 == total)) {
      J_prev = lyapunov(next);
    }
    if (eq && !traj.equilibrium) {
      traj.equilibrium = true;
      traj.equilibrium_time = t;
    }
    if (!eq && traj.equilibrium && opt.stop != StopRule::Equilibrium) {
      traj.equilibrium = false;
      traj.equilibrium_time = std::numeric_limits<double>::quiet_NaN();
    }
    prev = std::move(next);
  }
  if (pending) traj.diagnostics.erase(traj.diagnostics.begin() + static_cast<std::ptrdiff_t>(*pending));
  return traj;
}

/// Free-function forms.
inline double lyapunov_J(double lambda, const Field& u, const HamiltonianOperator& op, const NonlinearitySpec& spec) {
  require_same_grid(op.grid(), u.grid(), "lyapunov_J: field lives on another grid");
  require(static_cast<bool>(spec.f), ErrorCode::MissingData, "lyapunov_J needs a nonlinearity");
  return Semiflow(op, spec, lambda).lyapunov(u.values());
}

inline double kernel_drift_rate(double lambda, const Field& u, const Projections& proj, const NonlinearitySpec& spec) {
  require_same_grid(proj.grid(), u.grid(), "kernel_drift_rate: field lives on another grid");
  const Grid& g = proj.grid();
  const Vec pu = proj.P(u.values());
  return (lambda - proj.lambda0()) * inner(g, pu, pu) + inner(g, pu, apply_f(spec, g, u.values()));
}

inline Field imex_step(const Field& u, double lambda, double dt, const HamiltonianOperator& op,
                       const NonlinearitySpec& spec) {
  require_same_grid(op.grid(), u.grid(), "imex_step: field lives on another grid");
  return u.with_values(Semiflow(op, spec, lambda).step(u.values(), dt));
}

/// Cubic smoothstep cutoff on [1/2, 1]: sup |phi'| = 3.
inline constexpr double kCutoffLipschitz = 3.0;

struct TailDecayEntry {
  double radius = 0.0;
  double t = 0.0;
  double measured = 0.0;  ///< sum_{|x| >= radius} w |Qu(t)|^2
  double bound = 0.0;
  double alpha_n = 0.0;
  bool applicable = true; ///< V_inf > alpha_hat - eta on |x| >= radius / sqrt(2)
  bool pass = true;
};

struct TailDecayOptions {
  std::optional<double> eta;    ///< default (alpha_hat - lambda0 - delta) / 4
  double alpha_scale = 1.0;     ///< multiplies alpha (inflation check)
  double slack = 1e-12;
};

struct TailDecayReport {
  double alpha = 0.0;
  double eta = 0.0;
  double R = 0.0;               ///< max_t ||Qu(t)||_{H^1}
  double qnorm_sq = 0.0;        ///< max_t ||Qu(t)||^2 in L^{2p/(p-1)}
  std::vector<TailDecayEntry> entries;
  bool all_pass = true;
  int checked = 0;
};

namespace detail {

inline double lq_norm(const Grid& g, const Vec& u, double q) {
  if (std::isinf(q)) return u.cwiseAbs().maxCoeff();
  return std::pow((g.weights().array() * u.array().abs().pow(q)).sum(), 1.0 / q);
}

}  // namespace detail

/// Tail mass of Qu(t) against e^{-2 alpha t} ||u(0)||^2 + alpha_n with
/// alpha_n = (2 R^2 L/n + |Qu|^2_{2p/(p-1)} |V_0|_{L^p(tail)} + R |m|_{L^2(tail)} + R kappa_n) / alpha
/// and tail = {|x| >= n / sqrt(2)}.
inline TailDecayReport tail_decay_report(const Trajectory& traj, const Projections& proj, const PotentialSpec& pot,
                                         const NonlinearitySpec& spec, double alpha_hat,
                                         const std::vector<double>& radii, const TailDecayOptions& opt = {}) {
  require(!traj.states.empty(), ErrorCode::InvalidArgument, "trajectory is empty");
  require(!radii.empty(), ErrorCode::InvalidArgument, "no radii given");
  const Grid& g = proj.grid();
  require_same_grid(g, pot.grid(), "tail_decay_report: potential on another grid");
  for (double r : radii) {
    require(r > 0.0, ErrorCode::InvalidArgument, "radii must be positive");
    require(r <= g.half_width(), ErrorCode::DomainExceeded, "radius " + std::to_string(r) + " exceeds L");
  }
  for (const auto& s : traj.states)
    require(s.u.size() == g.size(), ErrorCode::MissingData, "trajectory states were saved without fields");

  TailDecayReport rep;
  const double gap = alpha_hat - proj.lambda0() - proj.delta();
  require(gap > 0.0, ErrorCode::DomainExceeded, "lambda0 + delta must lie below the asymptotic bottom");
  rep.eta = opt.eta.value_or(0.25 * gap);
  require(rep.eta > 0.0 && rep.eta <= 0.5 * gap * (1.0 + 1e-12), ErrorCode::InvalidArgument,
          "eta must lie in (0, (alpha_hat - lambda0 - delta)/2]");
  rep.alpha = opt.alpha_scale * (gap - rep.eta);

  const double p = pot.p();
  const double q = p > 1.0 ? 2.0 * p / (p - 1.0) : std::numeric_limits<double>::infinity();
  for (const auto& s : traj.states) {
    const Vec qu = proj.Q(s.u);
    rep.R = std::max(rep.R, norms_of(g, qu).h1);
    const double nq = detail::lq_norm(g, qu, q);
    rep.qnorm_sq = std::max(rep.qnorm_sq, nq * nq);
  }
  const Vec m = sample_on(g, spec.m);
  const double m_l2 = l2_norm(g, m);
  const double u0_sq = inner(g, traj.states.front().u, traj.states.front().u);
  const double t0 = traj.states.front().t;

  for (double r : radii) {
    const double inner_r = r / std::sqrt(2.0);
    bool applicable = true;
    for (std::size_t k = 0; k < g.node_count(); ++k) {
      if (g.radius(k) >= inner_r && !(pot.v_inf()[static_cast<Eigen::Index>(k)] > alpha_hat - rep.eta)) {
        applicable = false;
        break;
      }
    }
    // kappa_n: sup of the tail L^2 norm over P(B(0, ||m||)) via the tail Gram matrix
    const Mat& K = proj.kernel();
    Mat gram = Mat::Zero(K.cols(), K.cols());
    for (std::size_t k = 0; k < g.node_count(); ++k) {
      if (g.radius(k) < inner_r) continue;
      const auto kk = static_cast<Eigen::Index>(k);
      gram += g.weights()[kk] * K.row(kk).transpose() * K.row(kk);
    }
    double kappa = 0.0;
    if (gram.size() > 0) {
      Eigen::SelfAdjointEigenSolver<Mat> es(gram);
      kappa = m_l2 * std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
    }
    const double alpha_tilde = 2.0 * rep.R * rep.R * kCutoffLipschitz / r +
                               rep.qnorm_sq * tail_lp_norm(pot, p, inner_r) +
                               rep.R * std::sqrt(tail_mass_of(g, m, inner_r)) + rep.R * kappa;
    const double alpha_n = alpha_tilde / rep.alpha;

    for (const auto& s : traj.states) {
      TailDecayEntry e;
      e.radius = r;
      e.t = s.t;
      e.measured = tail_mass_of(g, proj.Q(s.u), r);
      e.alpha_n = alpha_n;
      e.bound = std::exp(-2.0 * rep.alpha * (s.t - t0)) * u0_sq + alpha_n;
      e.applicable = applicable;
      e.pass = e.measured <= e.bound + opt.slack;
      if (applicable) {
        ++rep.checked;
        rep.all_pass = rep.all_pass && e.pass;
      }
      rep.entries.push_back(e);
    }
  }
  return rep;
}

/// Columns t, l2, grad_l2, h1, J, Pu_l2, Qu_l2.
inline std::string trajectory_csv(const Trajectory& traj) {
  CsvTable table({"t", "l2", "grad_l2", "h1", "J", "Pu_l2", "Qu_l2"});
  for (const auto& s : traj.states)
    table.add_row({s.t, s.norms.l2, s.norms.grad_l2, s.norms.h1, s.J, s.Pu_l2, s.Qu_l2});
  return table.str();
}

/// Header N, n (uint64) and L (double), little-endian, followed by each saved
/// field in row-major order.
inline void write_snapshots(const Trajectory& traj, const Grid& grid, const std::filesystem::path& path) {
  LeWriter w;
  w.u64(static_cast<std::uint64_t>(grid.dim()));
  w.u64(static_cast<std::uint64_t>(grid.points_per_axis()));
  w.f64(grid.half_width());
  for (const auto& s : traj.states) {
    require(s.u.size() == grid.size(), ErrorCode::MissingData, "snapshot state has no field");
    for (Eigen::Index k = 0; k < s.u.size(); ++k) w.f64(s.u[k]);
  }
  w.save(path);
}

}  // namespace reslab
