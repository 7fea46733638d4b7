#pragma once

/// \file resonance_solver.hpp
/// \brief Reduced fixed-point map K(lambda, u) = (1+lambda-lambda0) Pu + F(Pu + R_lambda Qu)
/// and its solver.  R_lambda is the inverse of (A - lambda) on range(Q).

#include <Eigen/QR>

#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "reslab/error.hpp"
#include "reslab/grid.hpp"
#include "reslab/nonlinearity.hpp"
#include "reslab/spectral.hpp"

namespace reslab {

struct SolverConfig {
  double tol_fp_rel = 1e-10;    ///< defect <= tol_fp_rel (1 + ||u||)
  double tol_pde_rel = 1e-8;    ///< residual <= tol_pde_rel (1 + ||w||_{H^1})
  double tol_lin = 1e-10;
  int max_iterations = 4000;
  int anderson_depth = 6;       ///< 0 gives plain damped iteration
  double theta_floor = 1.0 / 64.0;
  double kernel_trust = 0.5;    ///< max ||P step|| / ||Pu|| per iteration; 0 disables
  std::optional<double> u_cap;  ///< default 1e6 max(||m||, 1)
  bool allow_resonant = false;
};

struct SolveResult {
  bool converged = false;
  bool resonant = false;  ///< solved at lambda == lambda0
  bool capped = false;    ///< ||w||_{H^1} exceeded the cap
  double lambda = 0.0;
  Vec u;                  ///< fixed-point iterate
  Vec w;                  ///< reconstructed PDE solution
  int iterations = 0;
  double defect = 0.0;
  double pde_residual = 0.0;
  double tol_fp = 0.0;
  double tol_pde = 0.0;
  double final_theta = 1.0;
  double Pw_l2 = 0.0;
  double Qw_l2 = 0.0;
  std::string message;
};

/// Operator, projections and nonlinearity bundled for repeated evaluation.
/// Keeps one resolvent factorization per lambda; not safe for concurrent use.
class ReducedProblem {
 public:
  ReducedProblem(const HamiltonianOperator& op, const Projections& proj, const NonlinearitySpec& spec,
                 double tol_lin = 1e-10)
      : op_(op), proj_(proj), spec_(spec), bound_(spec, op.grid()), tol_lin_(tol_lin) {
    require_same_grid(op.grid(), proj.grid(), "reduced problem: projections built on another grid");
    m_l2_ = m_l2_norm(spec_, op_.grid());
  }

  const HamiltonianOperator& op() const noexcept { return op_; }
  const Projections& projections() const noexcept { return proj_; }
  const NonlinearitySpec& nonlinearity() const noexcept { return spec_; }
  const Grid& grid() const noexcept { return op_.grid(); }
  double m_l2() const noexcept { return m_l2_; }

  const ComplementResolvent& resolvent(double lambda) const {
    if (!resolvent_ || resolvent_->lambda() != lambda)
      resolvent_ = std::make_unique<ComplementResolvent>(op_, proj_, lambda, tol_lin_);
    return *resolvent_;
  }

  /// w = Pu + R_lambda Qu.
  Vec reconstruct(double lambda, const Vec& u) const { return proj_.P(u) + resolvent(lambda).apply(u); }

  /// u = Pw + (A - lambda) Qw.
  Vec deconstruct(double lambda, const Vec& w) const {
    const Vec qw = proj_.Q(w);
    return proj_.P(w) + op_.apply(qw) - lambda * qw;
  }

  Vec k_map(double lambda, const Vec& u) const {
    const Vec pu = proj_.P(u);
    const Vec w = pu + resolvent(lambda).apply(u);
    return (1.0 + lambda - proj_.lambda0()) * pu + bound_.apply(w);
  }

  double pde_residual(double lambda, const Vec& w) const {
    return l2_norm(grid(), op_.apply(w) - lambda * w - bound_.apply(w));
  }

  SolveResult solve(double lambda, const Vec& u_init, const SolverConfig& cfg = {}) const;

 private:
  const HamiltonianOperator& op_;
  const Projections& proj_;
  const NonlinearitySpec& spec_;
  BoundNonlinearity bound_;
  double tol_lin_;
  double m_l2_ = 0.0;
  mutable std::unique_ptr<ComplementResolvent> resolvent_;
};

/// Damped fixed-point iteration with Anderson mixing.  The damping factor
/// starts at 1 and halves (clearing the mixing history) whenever a step
/// would increase the defect, down to `theta_floor`.
inline SolveResult ReducedProblem::solve(double lambda, const Vec& u_init, const SolverConfig& cfg) const {
  require(u_init.size() == grid().size(), ErrorCode::GridMismatch, "solver: initial field size mismatch");
  require(cfg.tol_fp_rel > 0.0 && cfg.tol_pde_rel > 0.0, ErrorCode::InvalidArgument,
          "solver tolerances must be positive");
  const double lambda0 = proj_.lambda0();
  require(std::abs(lambda - lambda0) <= proj_.delta() * (1.0 + 1e-12), ErrorCode::DomainExceeded,
          "|lambda - lambda0| exceeds delta");
  SolveResult out;
  out.lambda = lambda;
  if (lambda == lambda0) {
    require(cfg.allow_resonant, ErrorCode::ResonantLambda,
            "lambda equals lambda0; pass allow_resonant to attempt the solve anyway");
    out.resonant = true;
  }
  const Grid& g = grid();
  const double cap = cfg.u_cap.value_or(1e6 * std::max(m_l2_, 1.0));
  const Vec sw = g.weights().array().sqrt();

  Vec u = u_init;
  Vec ku = k_map(lambda, u);
  Vec gres = ku - u;
  double d = l2_norm(g, gres);
  Vec best_u = u;
  double best_d = d;
  double theta = 1.0;
  std::deque<Vec> dx, dg;

  auto finish = [&](const Vec& uu) {
    out.u = uu;
    out.w = reconstruct(lambda, uu);
    out.defect = l2_norm(g, uu - k_map(lambda, uu));
    out.pde_residual = pde_residual(lambda, out.w);
    const FieldNorms wn = norms_of(g, out.w);
    out.tol_fp = cfg.tol_fp_rel * (1.0 + l2_norm(g, uu));
    out.tol_pde = cfg.tol_pde_rel * (1.0 + wn.h1);
    out.Pw_l2 = l2_norm(g, proj_.P(out.w));
    out.Qw_l2 = l2_norm(g, proj_.Q(out.w));
    out.final_theta = theta;
    if (wn.h1 > cap) out.capped = true;
  };

  for (int it = 0; it < cfg.max_iterations; ++it) {
    out.iterations = it;
    if (d <= cfg.tol_fp_rel * (1.0 + l2_norm(g, u))) {
      finish(u);
      if (out.pde_residual <= out.tol_pde && !out.capped) {
        out.converged = true;
        out.message = out.resonant ? "converged at resonant lambda" : "converged";
        return out;
      }
    }

    Vec step = theta * gres;
    if (!dx.empty() && cfg.anderson_depth > 0) {
      const int m = static_cast<int>(dx.size());
      Mat G(g.size(), m), X(g.size(), m);
      for (int j = 0; j < m; ++j) {
        G.col(j) = dg[static_cast<std::size_t>(j)];
        X.col(j) = dx[static_cast<std::size_t>(j)];
      }
      const Mat Gw = sw.asDiagonal() * G;
      const Vec gamma = Gw.colPivHouseholderQr().solve(sw.cwiseProduct(gres));
      Vec mixed = step - (X + theta * G) * gamma;
      // the plain iteration is repelled by the trivial root; a mixing step
      // that moves the kernel part against it is discarded
      if (gamma.allFinite() && inner(g, proj_.P(mixed), proj_.P(gres)) >= 0.0) {
        step = std::move(mixed);
      } else {
        dx.clear();
        dg.clear();
      }
    }
    if (cfg.kernel_trust > 0.0) {
      // keeps mixing steps from jumping across to the trivial root
      const double pu = l2_norm(g, proj_.P(u));
      const double ps = l2_norm(g, proj_.P(step));
      if (pu > 0.0 && ps > cfg.kernel_trust * pu) step *= cfg.kernel_trust * pu / ps;
    }
    Vec u_new = u + step;
    Vec ku_new = k_map(lambda, u_new);
    Vec g_new = ku_new - u_new;
    const double d_new = l2_norm(g, g_new);

    if (!(d_new <= d) && theta > cfg.theta_floor) {
      theta = std::max(0.5 * theta, cfg.theta_floor);
      dx.clear();
      dg.clear();
      continue;
    }
    if (cfg.anderson_depth > 0) {
      dx.push_back(u_new - u);
      dg.push_back(g_new - gres);
      while (static_cast<int>(dx.size()) > cfg.anderson_depth) {
        dx.pop_front();
        dg.pop_front();
      }
    }
    u = std::move(u_new);
    gres = std::move(g_new);
    d = d_new;
    if (d < best_d) {
      best_d = d;
      best_u = u;
    }
    if (!std::isfinite(d)) break;
    if (norms_of(g, proj_.P(u)).l2 > cap) {
      finish(u);
      out.capped = true;
      out.message = "solution norm exceeded the cap";
      return out;
    }
  }
  out.iterations = cfg.max_iterations;
  finish(best_u);
  out.converged = out.defect <= out.tol_fp && out.pde_residual <= out.tol_pde && !out.capped;
  out.message = out.converged ? "converged" : "maximum iterations reached";
  return out;
}

inline Field k_map(double lambda, const Field& u, const Projections& proj, const HamiltonianOperator& op,
                   const NonlinearitySpec& spec) {
  require_same_grid(op.grid(), u.grid(), "k_map: field lives on another grid");
  ReducedProblem rp(op, proj, spec);
  return u.with_values(rp.k_map(lambda, u.values()));
}

inline double pde_residual(double lambda, const Field& w, const HamiltonianOperator& op,
                           const NonlinearitySpec& spec) {
  require_same_grid(op.grid(), w.grid(), "pde_residual: field lives on another grid");
  const Grid& g = op.grid();
  return l2_norm(g, op.apply(w.values()) - lambda * w.values() - apply_f(spec, g, w.values()));
}

inline SolveResult solve_near_resonance(double lambda, const Field& u_init, const HamiltonianOperator& op,
                                        const Projections& proj, const NonlinearitySpec& spec,
                                        const SolverConfig& cfg = {}) {
  require_same_grid(op.grid(), u_init.grid(), "solver: initial field lives on another grid");
  ReducedProblem rp(op, proj, spec, cfg.tol_lin);
  return rp.solve(lambda, u_init.values(), cfg);
}

}  // namespace reslab
