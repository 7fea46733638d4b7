#pragma once

/// \file spectral.hpp
/// \brief Hamiltonian assembly, eigenpairs below a ceiling, Morse counts,
/// spectral projections and the resolvent on the complement of the kernel.
///
/// All linear algebra runs on the symmetrised matrix
///   S = W^{-1/2} (K + W V) W^{-1/2},
/// which is similar to A = -Delta_h + V.  A field u maps to W^{1/2} u, so the
/// Euclidean inner product of symmetrised vectors is the quadrature L^2 one.

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reslab/error.hpp"
#include "reslab/grid.hpp"
#include "reslab/potential.hpp"
#include "reslab/rng.hpp"

namespace reslab {

using Ldlt = Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;

class HamiltonianOperator {
 public:
  HamiltonianOperator(GridPtr grid, Vec potential, double alpha_hat)
      : grid_(std::move(grid)), potential_(std::move(potential)), alpha_hat_(alpha_hat) {
    require(potential_.size() == grid_->size(), ErrorCode::GridMismatch,
            "potential samples do not match the grid");
    sqrt_w_ = grid_->weights().array().sqrt();
    inv_sqrt_w_ = sqrt_w_.cwiseInverse();
    SpMat scaled = inv_sqrt_w_.asDiagonal() * grid_->stiffness() * inv_sqrt_w_.asDiagonal();
    SpMat diag(grid_->size(), grid_->size());
    diag.setIdentity();
    diag = potential_.asDiagonal() * diag;
    sym_ = scaled + diag;
    sym_.makeCompressed();
  }

  const Grid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const Vec& potential() const noexcept { return potential_; }
  double alpha_hat() const noexcept { return alpha_hat_; }

  /// A u = -Delta_h u + V u.
  Vec apply(const Vec& u) const {
    Vec ku = grid_->stiffness() * u;
    return (ku.array() / grid_->weights().array() + potential_.array() * u.array()).matrix();
  }

  Field apply(const Field& u) const {
    require_same_grid(*grid_, u.grid(), "hamiltonian: field lives on another grid");
    return u.with_values(apply(u.values()));
  }

  /// <A u, u> evaluated as |grad u|^2 + <V u, u>.
  double quadratic_form(const Vec& u) const {
    return grad_norm_sq(*grid_, u) + inner(*grid_, potential_.cwiseProduct(u), u);
  }

  const SpMat& symmetric() const noexcept { return sym_; }
  Vec to_sym(const Vec& u) const { return sqrt_w_.cwiseProduct(u); }
  Vec from_sym(const Vec& s) const { return inv_sqrt_w_.cwiseProduct(s); }
  Mat from_sym(const Mat& s) const { return inv_sqrt_w_.asDiagonal() * s; }
  Mat to_sym(const Mat& u) const { return sqrt_w_.asDiagonal() * u; }

  /// Gershgorin lower bound for the spectrum.
  double lower_bound() const {
    Vec offsum = Vec::Zero(sym_.rows());
    Vec diag = Vec::Zero(sym_.rows());
    for (int col = 0; col < sym_.outerSize(); ++col) {
      for (SpMat::InnerIterator it(sym_, col); it; ++it) {
        if (it.row() == it.col()) diag[it.row()] = it.value();
        else offsum[it.row()] += std::abs(it.value());
      }
    }
    return (diag - offsum).minCoeff();
  }

  /// S - shift I with the same sparsity pattern as S.
  SpMat shifted(double shift) const {
    SpMat m = sym_;
    for (int col = 0; col < m.outerSize(); ++col) {
      for (SpMat::InnerIterator it(m, col); it; ++it) {
        if (it.row() == it.col()) it.valueRef() -= shift;
      }
    }
    return m;
  }

 private:
  GridPtr grid_;
  Vec potential_;
  double alpha_hat_;
  Vec sqrt_w_, inv_sqrt_w_;
  SpMat sym_;
};

inline HamiltonianOperator assemble_hamiltonian(const Grid& grid, const PotentialSpec& potential) {
  require_same_grid(grid, potential.grid(), "assemble_hamiltonian: potential sampled on another grid");
  const double alpha = asymptotic_bottom(potential, default_bottom_radii(grid.half_width())).value;
  return HamiltonianOperator(potential.grid_ptr(), potential.values(), alpha);
}

struct Multiplet {
  double value = 0.0;
  int multiplicity = 0;
  int first = 0;  ///< index of the first member in SpectralData::eigenvalues
};

struct SpectralData {
  GridPtr grid;
  double ceiling = 0.0;
  double alpha_hat = 0.0;
  double tol_eig = 1e-8;
  double cluster_tol_rel = 1e-6;
  std::vector<double> eigenvalues;   ///< ascending
  Mat eigenfields;                    ///< columns, quadrature-orthonormal
  std::vector<double> residuals;      ///< ||A phi - lambda phi||_{L^2}
  std::vector<Multiplet> multiplets;
  bool dense_path = false;

  double cluster_tol(double value) const { return cluster_tol_rel * std::max(1.0, std::abs(value)); }
  int count() const noexcept { return static_cast<int>(eigenvalues.size()); }
};

struct EigenOptions {
  std::optional<double> ceiling;          ///< defaults to alpha_hat
  double tol_eig = 1e-8;
  double cluster_tol_rel = 1e-6;
  int max_count = 64;
  std::size_t dense_threshold = 2000;     ///< dense solve when node count <= this
  int max_inverse_iterations = 60;
};

namespace detail {

/// Number of eigenvalues of S strictly below `x` (Sylvester inertia).
class InertiaCounter {
 public:
  explicit InertiaCounter(const HamiltonianOperator& op) : op_(op) {
    solver_.analyzePattern(op_.symmetric());
  }

  int operator()(double x) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      solver_.factorize(op_.shifted(x));
      if (solver_.info() == Eigen::Success) {
        const Vec& d = solver_.vectorD();
        if ((d.array() != 0.0).all()) return static_cast<int>((d.array() < 0.0).count());
      }
      x += 1e-12 * std::max(1.0, std::abs(x));
    }
    throw Error(ErrorCode::NotConverged, "inertia factorization failed near " + std::to_string(x));
  }

 private:
  const HamiltonianOperator& op_;
  Ldlt solver_;
};


inline void orthonormalize(Mat& x, const Mat& against) {
  for (int pass = 0; pass < 2; ++pass) {
    if (against.cols() > 0) x -= against * (against.transpose() * x);
    Eigen::HouseholderQR<Mat> qr(x);
    x = qr.householderQ() * Mat::Identity(x.rows(), x.cols());
  }
}

}  // namespace detail

namespace detail {

inline void cluster(SpectralData& data) {
  data.multiplets.clear();
  for (int i = 0; i < data.count(); ++i) {
    const double v = data.eigenvalues[i];
    if (!data.multiplets.empty()) {
      Multiplet& last = data.multiplets.back();
      const double prev = data.eigenvalues[i - 1];
      if (v - prev < data.cluster_tol(v)) {
        last.value = (last.value * last.multiplicity + v) / (last.multiplicity + 1);
        ++last.multiplicity;
        continue;
      }
    }
    data.multiplets.push_back(Multiplet{v, 1, i});
  }
}

inline void dense_eigenpairs(const HamiltonianOperator& op, double ceiling, std::vector<double>& values,
                             Mat& sym_vectors) {
  Mat dense = Mat(op.symmetric());
  Eigen::SelfAdjointEigenSolver<Mat> es(dense);
  require(es.info() == Eigen::Success, ErrorCode::NotConverged, "dense eigensolver failed");
  int k = 0;
  while (k < es.eigenvalues().size() && es.eigenvalues()[k] < ceiling) ++k;
  values.assign(es.eigenvalues().data(), es.eigenvalues().data() + k);
  sym_vectors = es.eigenvectors().leftCols(k);
}

/// Bisection on the inertia count isolates groups of eigenvalues narrower
/// than the clustering tolerance; block shift-invert iteration at each group
/// centre then converges in a handful of steps.
inline void sparse_eigenpairs(const HamiltonianOperator& op, double ceiling, int total,
                              const EigenOptions& opt, std::vector<double>& values, Mat& sym_vectors) {
  InertiaCounter count(op);
  const double lower = op.lower_bound() - 1.0;
  // counts are cumulative, so track them per endpoint
  struct Node {
    double lo, hi;
    int clo, chi;
  };
  std::vector<Node> stack{{lower, ceiling, 0, total}};
  std::vector<Node> leaves;
  while (!stack.empty()) {
    Node nd = stack.back();
    stack.pop_back();
    if (nd.chi == nd.clo) continue;
    const double width_tol = 0.25 * opt.cluster_tol_rel * std::max(1.0, std::max(std::abs(nd.lo), std::abs(nd.hi)));
    if (nd.hi - nd.lo <= width_tol) {
      leaves.push_back(nd);
      continue;
    }
    const double mid = 0.5 * (nd.lo + nd.hi);
    const int cm = count(mid);
    stack.push_back({mid, nd.hi, cm, nd.chi});
    stack.push_back({nd.lo, mid, nd.clo, cm});
  }
  std::sort(leaves.begin(), leaves.end(), [](const Node& a, const Node& b) { return a.lo < b.lo; });

  // merge adjacent leaves into groups closer than the clustering tolerance
  std::vector<Node> groups;
  for (const Node& leaf : leaves) {
    if (!groups.empty()) {
      Node& g = groups.back();
      const double tol = opt.cluster_tol_rel * std::max(1.0, std::abs(leaf.hi));
      if (leaf.lo - g.hi < tol) {
        g.hi = leaf.hi;
        g.chi = leaf.chi;
        continue;
      }
    }
    groups.push_back(leaf);
  }

  const Eigen::Index n = op.symmetric().rows();
  sym_vectors.resize(n, total);
  values.clear();
  Rng rng(0x51ec7a1);
  Ldlt solver;
  solver.analyzePattern(op.symmetric());
  int filled = 0;
  for (const Node& g : groups) {
    const int b = g.chi - g.clo;
    const double span = std::max(g.hi - g.lo, 1e-14 * std::max(1.0, std::abs(g.hi)));
    // shift just below the group so the factorization stays regular
    double shift = g.lo - span;
    solver.factorize(op.shifted(shift));
    if (solver.info() != Eigen::Success) {
      shift -= span;
      solver.factorize(op.shifted(shift));
    }
    require(solver.info() == Eigen::Success, ErrorCode::NotConverged, "shift-invert factorization failed");
    Mat x(n, b);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const Mat prev = sym_vectors.leftCols(filled);
    detail::orthonormalize(x, prev);
    Vec theta(b);
    bool converged = false;
    for (int it = 0; it < opt.max_inverse_iterations; ++it) {
      Mat y = solver.solve(x);
      detail::orthonormalize(y, prev);
      const Mat sy = op.symmetric() * y;
      Mat h = y.transpose() * sy;
      h = 0.5 * (h + h.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Mat> es(h);
      x = y * es.eigenvectors();
      theta = es.eigenvalues();
      const Mat res = sy * es.eigenvectors() - x * theta.asDiagonal();
      const double worst = res.colwise().norm().maxCoeff();
      if (worst <= 0.01 * opt.tol_eig) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      const Mat res = op.symmetric() * x - x * theta.asDiagonal();
      require(res.colwise().norm().maxCoeff() <= opt.tol_eig, ErrorCode::NotConverged,
              "shift-invert iteration did not converge near " + std::to_string(g.lo));
    }
    sym_vectors.middleCols(filled, b) = x;
    for (int j = 0; j < b; ++j) values.push_back(theta[j]);
    filled += b;
  }
}

}  // namespace detail

/// All eigenpairs of A below the ceiling.
inline SpectralData eigenpairs_below(const HamiltonianOperator& op, const EigenOptions& opt = {}) {
  require(opt.tol_eig > 0.0, ErrorCode::InvalidArgument, "tol_eig must be positive");
  require(opt.cluster_tol_rel > 0.0, ErrorCode::InvalidArgument, "cluster tolerance must be positive");
  SpectralData data;
  data.grid = op.grid_ptr();
  data.alpha_hat = op.alpha_hat();
  data.ceiling = opt.ceiling.value_or(op.alpha_hat());
  data.tol_eig = opt.tol_eig;
  data.cluster_tol_rel = opt.cluster_tol_rel;
  require(std::isfinite(data.ceiling), ErrorCode::InvalidArgument, "ceiling must be finite");

  detail::InertiaCounter count(op);
  const int total = count(data.ceiling);
  require(total <= opt.max_count, ErrorCode::NotConverged,
          std::to_string(total) + " eigenvalues below the ceiling exceeds max_count=" +
              std::to_string(opt.max_count) + " (suspected spurious continuum states)");

  std::vector<double> values;
  Mat sym_vectors;
  if (total > 0) {
    if (static_cast<std::size_t>(op.symmetric().rows()) <= opt.dense_threshold) {
      detail::dense_eigenpairs(op, data.ceiling, values, sym_vectors);
      data.dense_path = true;
    } else {
      detail::sparse_eigenpairs(op, data.ceiling, total, opt, values, sym_vectors);
    }
  }

  // ascending order with a deterministic sign convention (largest entry positive)
  std::vector<int> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
  data.eigenfields.resize(op.grid().size(), static_cast<Eigen::Index>(values.size()));
  for (std::size_t j = 0; j < order.size(); ++j) {
    Vec s = sym_vectors.col(order[j]);
    Eigen::Index arg = 0;
    s.cwiseAbs().maxCoeff(&arg);
    if (s[arg] < 0.0) s = -s;
    const double lam = values[order[j]];
    const double res = (op.symmetric() * s - lam * s).norm();
    require(res <= data.tol_eig, ErrorCode::NotConverged,
            "eigenpair residual " + std::to_string(res) + " exceeds tol_eig");
    data.eigenvalues.push_back(lam);
    data.residuals.push_back(res);
    data.eigenfields.col(static_cast<Eigen::Index>(j)) = op.from_sym(s);
  }
  detail::cluster(data);
  return data;
}

inline SpectralData eigenpairs_below(const HamiltonianOperator& op, double ceiling, double tol_eig) {
  EigenOptions opt;
  opt.ceiling = ceiling;
  opt.tol_eig = tol_eig;
  return eigenpairs_below(op, opt);
}

struct MorseCount {
  int k = 0;
  std::string conley_label;  ///< "Sigma^k"
};

/// Total multiplicity of eigenvalues below lambda.
inline MorseCount morse_count(const SpectralData& data, double lambda) {
  require(lambda < data.ceiling, ErrorCode::DomainExceeded,
          "lambda must lie below the spectral ceiling");
  MorseCount out;
  for (const Multiplet& m : data.multiplets) {
    require(std::abs(lambda - m.value) >= data.cluster_tol(m.value), ErrorCode::ResonantLambda,
            "lambda = " + std::to_string(lambda) + " sits on the eigenvalue " + std::to_string(m.value) +
                "; the index is undefined there");
    if (m.value < lambda) out.k += m.multiplicity;
  }
  out.conley_label = "Sigma^" + std::to_string(out.k);
  return out;
}

/// Orthogonal spectral projections around an isolated eigenvalue lambda0:
/// P onto its eigenspace X0, Q- onto the eigenfields below it and
/// Q+ = I - P - Q-.
class Projections {
 public:
  Projections(GridPtr grid, double lambda0, double delta, int multiplet_index, Mat kernel, Mat below)
      : grid_(std::move(grid)), lambda0_(lambda0), delta_(delta), multiplet_(multiplet_index),
        kernel_(std::move(kernel)), below_(std::move(below)) {}

  const Grid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  double lambda0() const noexcept { return lambda0_; }
  double delta() const noexcept { return delta_; }
  /// Lower bound for |lambda_i - lambda| on X when |lambda - lambda0| <= delta.
  double gap_constant() const noexcept { return delta_; }
  int multiplet_index() const noexcept { return multiplet_; }
  int kernel_dim() const noexcept { return static_cast<int>(kernel_.cols()); }
  int below_dim() const noexcept { return static_cast<int>(below_.cols()); }
  const Mat& kernel() const noexcept { return kernel_; }
  const Mat& below() const noexcept { return below_; }

  Vec P(const Vec& u) const { return project(kernel_, u); }
  Vec Qminus(const Vec& u) const { return project(below_, u); }
  Vec Q(const Vec& u) const { return u - P(u); }
  Vec Qplus(const Vec& u) const { return u - P(u) - Qminus(u); }

  Field P(const Field& u) const { return u.with_values(P(u.values())); }
  Field Q(const Field& u) const { return u.with_values(Q(u.values())); }
  Field Qminus(const Field& u) const { return u.with_values(Qminus(u.values())); }
  Field Qplus(const Field& u) const { return u.with_values(Qplus(u.values())); }

 private:
  Vec project(const Mat& basis, const Vec& u) const {
    if (basis.cols() == 0) return Vec::Zero(u.size());
    const Vec coeff = basis.transpose() * grid_->weights().cwiseProduct(u);
    return basis * coeff;
  }

  GridPtr grid_;
  double lambda0_;
  double delta_;
  int multiplet_;
  Mat kernel_;
  Mat below_;
};

/// Index of the multiplet nearest to `lambda0` when it lies within
/// `match_tol`·max(1, |lambda0|), otherwise -1.
inline int find_multiplet(const SpectralData& data, double lambda0, double match_tol = 1e-2) {
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < data.multiplets.size(); ++i) {
    const double d = std::abs(data.multiplets[i].value - lambda0);
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(i);
    }
  }
  if (best < 0 || best_dist > match_tol * std::max(1.0, std::abs(lambda0))) return -1;
  return best;
}

/// delta = min(request, dist(lambda0, other eigenvalues)/2, (top - lambda0)/2)
/// where top = min(alpha_hat, ceiling) bounds the uncomputed spectrum.
inline Projections build_projections(const SpectralData& data, double lambda0, double delta_request = 0.0) {
  const int idx = find_multiplet(data, lambda0);
  require(idx >= 0, ErrorCode::InvalidArgument,
          "lambda0 = " + std::to_string(lambda0) + " is not in the computed spectrum");
  const Multiplet& m = data.multiplets[static_cast<std::size_t>(idx)];
  double dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < data.multiplets.size(); ++i) {
    if (static_cast<int>(i) != idx) dist = std::min(dist, std::abs(data.multiplets[i].value - m.value));
  }
  double delta = 0.5 * dist;
  const double top = std::min(data.alpha_hat, data.ceiling);
  if (m.value < top) delta = std::min(delta, 0.5 * (top - m.value));
  if (delta_request > 0.0) delta = std::min(delta, delta_request);
  require(std::isfinite(delta) && delta > 0.0, ErrorCode::NotConverged,
          "spectral gap collapsed around lambda0 (grid too coarse?)");
  Mat kernel = data.eigenfields.middleCols(m.first, m.multiplicity);
  Mat below = data.eigenfields.leftCols(m.first);
  return Projections(data.grid, m.value, delta, idx, std::move(kernel), std::move(below));
}

/// Solves (A - lambda) z = Q w for z in X = range(Q) with |lambda - lambda0| <= delta.
///
/// A sparse LDL^T of S - mu is reused as a preconditioner for projected
/// iterative refinement; mu = lambda unless lambda is within delta/4 of
/// lambda0, where mu is pushed to lambda0 +- delta/4 to stay regular.
class ComplementResolvent {
 public:
  ComplementResolvent(const HamiltonianOperator& op, const Projections& proj, double lambda,
                      double tol_lin = 1e-10)
      : op_(op), lambda_(lambda), tol_lin_(tol_lin) {
    require_same_grid(op.grid(), proj.grid(), "resolvent: projections built on another grid");
    const double off = lambda - proj.lambda0();
    require(std::abs(off) <= proj.delta() * (1.0 + 1e-12), ErrorCode::DomainExceeded,
            "|lambda - lambda0| exceeds delta");
    mu_ = lambda;
    if (std::abs(off) < 0.25 * proj.delta()) mu_ = proj.lambda0() + (off >= 0.0 ? 0.25 : -0.25) * proj.delta();
    kernel_sym_ = op.to_sym(proj.kernel());
    solver_.compute(op.shifted(mu_));
    require(solver_.info() == Eigen::Success, ErrorCode::NotConverged, "resolvent factorization failed");
  }

  double lambda() const noexcept { return lambda_; }
  double last_relative_residual() const noexcept { return last_residual_; }

  Vec apply(const Vec& w) const {
    const Vec b = project(op_.to_sym(w));
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
      last_residual_ = 0.0;
      return Vec::Zero(w.size());
    }
    Vec z = project(solver_.solve(b));
    double best = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 80; ++it) {
      const Vec r = project(b - (op_.symmetric() * z - lambda_ * z));
      const double rn = r.norm();
      if (rn <= 1e-14 * bnorm || rn >= 0.999 * best) break;
      best = rn;
      z += project(solver_.solve(r));
    }
    // measured on range(Q): leakage into X0 is bounded by the eigenpair residual
    last_residual_ = project(op_.symmetric() * z - lambda_ * z - b).norm() / bnorm;
    require(last_residual_ <= tol_lin_, ErrorCode::NotConverged,
            "resolvent refinement stalled at relative residual " + std::to_string(last_residual_));
    return op_.from_sym(z);
  }

 private:
  Vec project(const Vec& s) const {
    if (kernel_sym_.cols() == 0) return s;
    return s - kernel_sym_ * (kernel_sym_.transpose() * s);
  }

  const HamiltonianOperator& op_;
  double lambda_;
  double mu_;
  double tol_lin_;
  Mat kernel_sym_;
  Ldlt solver_;
  mutable double last_residual_ = 0.0;
};

inline Field apply_resolvent_complement(const HamiltonianOperator& op, const Projections& proj, double lambda,
                                        const Field& w) {
  require_same_grid(op.grid(), w.grid(), "resolvent: field lives on another grid");
  ComplementResolvent r(op, proj, lambda);
  return w.with_values(r.apply(w.values()));
}

}  // namespace reslab
