#pragma once

/// \file potential.hpp
/// \brief Potential families with the bounded + L^p split V = V_inf + V_0.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <type_traits>
#include <variant>
#include <vector>

#include "reslab/error.hpp"
#include "reslab/grid.hpp"

namespace reslab {

using ScalarField = std::function<double(const Point&)>;

enum class SingularPolicy {
  HalfGridOffset,  ///< move a node-aligned center by h/2 along every axis
  Cap,             ///< clip |x - x0|^{-alpha} at h^{-alpha}
};

/// c |x - x0|^{-alpha}, split on the unit ball around x0.
struct Coulomb {
  double c = -1.0;
  Point center{0.0, 0.0};
  double alpha = 0.25;
  double cutoff_radius = 1.0;
  SingularPolicy policy = SingularPolicy::HalfGridOffset;
};

/// `depth` on the cube |x_k| <= width/2, zero outside.
struct SquareWell {
  double depth = -1.0;
  double width = 1.0;
};

/// -l(l+1) / cosh^2(|x|); bound states -(l-j)^2 in 1-D.
struct PoschlTeller {
  double ell = 2.0;
};

struct Constant {
  double c = 0.0;
};

/// Arbitrary evaluator split on a ball; finite away from `center`.
struct Custom {
  ScalarField evaluator;
  double cutoff_radius = 1.0;
  Point center{0.0, 0.0};
  std::string name = "custom";
};

using PotentialFamily = std::variant<Coulomb, SquareWell, PoschlTeller, Constant, Custom>;

struct SplitEvaluators {
  ScalarField v_inf;
  ScalarField v_zero;
};

inline double distance(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

/// V_0 = chi V and V_inf = (1 - chi) V with chi the indicator of the closed
/// ball B(center, cutoff_radius).
inline SplitEvaluators split_kato_rellich(ScalarField evaluator, double cutoff_radius, Point center) {
  require(static_cast<bool>(evaluator), ErrorCode::InvalidArgument, "split needs an evaluator");
  require(std::isfinite(cutoff_radius) && cutoff_radius > 0.0, ErrorCode::InvalidArgument,
          "cutoff radius must be positive");
  SplitEvaluators out;
  out.v_zero = [evaluator, cutoff_radius, center](const Point& x) {
    return distance(x, center) <= cutoff_radius ? evaluator(x) : 0.0;
  };
  out.v_inf = [evaluator, cutoff_radius, center](const Point& x) {
    return distance(x, center) <= cutoff_radius ? 0.0 : evaluator(x);
  };
  return out;
}

/// Samples a split on a grid and rejects an unbounded V_inf part.
inline std::pair<Vec, Vec> sample_split(const Grid& grid, const SplitEvaluators& split,
                                        double bound_cap = 1e12) {
  Vec vinf(grid.size()), vzero(grid.size());
  for (std::size_t k = 0; k < grid.node_count(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const Point x = grid.node(k);
    vinf[kk] = split.v_inf(x);
    vzero[kk] = split.v_zero(x);
    require(std::isfinite(vinf[kk]) && std::abs(vinf[kk]) <= bound_cap, ErrorCode::InvalidArgument,
            "split invalid: V_inf is unbounded on the grid");
    require(std::isfinite(vzero[kk]), ErrorCode::InvalidArgument,
            "V_0 is not finite at a sampled node; adjust the singular-node policy");
  }
  return {std::move(vinf), std::move(vzero)};
}

class PotentialSpec {
 public:
  PotentialSpec(std::string family, GridPtr grid, SplitEvaluators split, double p, Point center)
      : family_(std::move(family)), grid_(std::move(grid)), split_(std::move(split)), p_(p),
        center_(center) {
    if (grid_->dim() == 1) {
      require(p_ >= 2.0, ErrorCode::InvalidArgument, "p must be >= 2 in one dimension");
    } else {
      require(p_ > 2.0, ErrorCode::InvalidArgument, "p must be > 2 in two dimensions");
    }
    auto [vinf, vzero] = sample_split(*grid_, split_);
    v_inf_ = std::move(vinf);
    v_zero_ = std::move(vzero);
    total_ = v_inf_ + v_zero_;
  }

  const std::string& family() const noexcept { return family_; }
  const Grid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  double p() const noexcept { return p_; }
  /// 2p/(p-2), infinite for p == 2.
  double q() const noexcept {
    return p_ > 2.0 ? 2.0 * p_ / (p_ - 2.0) : std::numeric_limits<double>::infinity();
  }
  /// Effective singular center (after any half-grid shift).
  const Point& center() const noexcept { return center_; }

  const Vec& v_inf() const noexcept { return v_inf_; }
  const Vec& v_zero() const noexcept { return v_zero_; }
  const Vec& values() const noexcept { return total_; }
  Field field() const { return Field(grid_, total_); }

  double eval_inf(const Point& x) const { return split_.v_inf(x); }
  double eval_zero(const Point& x) const { return split_.v_zero(x); }

  /// Copy with a constant added to the bounded part.
  PotentialSpec shifted(double offset) const {
    SplitEvaluators s = split_;
    auto base = split_.v_inf;
    s.v_inf = [base, offset](const Point& x) { return base(x) + offset; };
    return PotentialSpec(family_ + "+const", grid_, std::move(s), p_, center_);
  }

 private:
  std::string family_;
  GridPtr grid_;
  SplitEvaluators split_;
  double p_;
  Point center_;
  Vec v_inf_, v_zero_, total_;
};

namespace detail {

inline bool node_aligned(const Grid& grid, const Point& c) {
  auto aligned = [&](double x) {
    const double s = (x + grid.half_width()) / grid.spacing();
    return std::abs(s - std::round(s)) < 1e-9;
  };
  return aligned(c[0]) && (grid.dim() == 1 || aligned(c[1]));
}

inline double default_p(int dim, double alpha) {
  if (dim == 1) return 2.0;
  if (alpha <= 0.0) return 4.0;
  return std::min(4.0, 0.5 * (2.0 + 2.0 / alpha));
}

}  // namespace detail

/// Builds and samples a potential; `offset` is added to V_inf and `p` <= 0
/// selects a family default exponent.
inline PotentialSpec make_potential(GridPtr grid, const PotentialFamily& family, double offset = 0.0,
                                    double p = 0.0) {
  require(grid != nullptr, ErrorCode::InvalidArgument, "potential needs a grid");
  const int dim = grid->dim();
  const double h = grid->spacing();

  auto with_offset = [offset](SplitEvaluators s) {
    if (offset != 0.0) {
      auto base = s.v_inf;
      s.v_inf = [base, offset](const Point& x) { return base(x) + offset; };
    }
    return s;
  };
  auto bounded = [&](ScalarField v) {
    SplitEvaluators s;
    s.v_inf = std::move(v);
    s.v_zero = [](const Point&) { return 0.0; };
    return with_offset(std::move(s));
  };

  return std::visit(
      [&](const auto& fam) -> PotentialSpec {
        using T = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<T, Coulomb>) {
          const double amax = dim == 1 ? 0.5 : 1.0;
          require(fam.alpha >= 0.0 && fam.alpha < amax, ErrorCode::InvalidArgument,
                  "coulomb exponent alpha outside [0, " + std::to_string(amax) + ")");
          const double pp = p > 0.0 ? p : detail::default_p(dim, fam.alpha);
          require(fam.alpha * pp < static_cast<double>(dim), ErrorCode::InvalidArgument,
                  "coulomb V_0 is not in L^p for this exponent");
          Point center = fam.center;
          if (dim == 1) center[1] = 0.0;
          double cap = std::numeric_limits<double>::infinity();
          if (fam.policy == SingularPolicy::HalfGridOffset) {
            if (detail::node_aligned(*grid, center)) {
              center[0] += 0.5 * h;
              if (dim == 2) center[1] += 0.5 * h;
            }
          } else {
            cap = std::pow(h, -fam.alpha);
          }
          const double c = fam.c, alpha = fam.alpha;
          ScalarField v = [c, alpha, center, cap](const Point& x) {
            const double r = distance(x, center);
            const double s = r > 0.0 ? std::pow(r, -alpha) : cap;
            return c * std::min(s, cap);
          };
          return PotentialSpec("coulomb", grid, with_offset(split_kato_rellich(v, fam.cutoff_radius, center)),
                               pp, center);
        } else if constexpr (std::is_same_v<T, SquareWell>) {
          require(fam.width > 0.0, ErrorCode::InvalidArgument, "well width must be positive");
          const double depth = fam.depth, half = 0.5 * fam.width;
          const int d = dim;
          ScalarField v = [depth, half, d](const Point& x) {
            const bool inside = std::abs(x[0]) <= half && (d == 1 || std::abs(x[1]) <= half);
            return inside ? depth : 0.0;
          };
          return PotentialSpec("square_well", grid, bounded(std::move(v)),
                               p > 0.0 ? p : detail::default_p(dim, 0.0), Point{0.0, 0.0});
        } else if constexpr (std::is_same_v<T, PoschlTeller>) {
          require(fam.ell > 0.0, ErrorCode::InvalidArgument, "poschl-teller ell must be positive");
          const double strength = fam.ell * (fam.ell + 1.0);
          ScalarField v = [strength](const Point& x) {
            const double ch = std::cosh(std::hypot(x[0], x[1]));
            return -strength / (ch * ch);
          };
          return PotentialSpec("poschl_teller", grid, bounded(std::move(v)),
                               p > 0.0 ? p : detail::default_p(dim, 0.0), Point{0.0, 0.0});
        } else if constexpr (std::is_same_v<T, Constant>) {
          const double c = fam.c;
          return PotentialSpec("constant", grid, bounded([c](const Point&) { return c; }),
                               p > 0.0 ? p : detail::default_p(dim, 0.0), Point{0.0, 0.0});
        } else {
          require(static_cast<bool>(fam.evaluator), ErrorCode::InvalidArgument,
                  "custom potential needs an evaluator");
          return PotentialSpec(fam.name, grid,
                               with_offset(split_kato_rellich(fam.evaluator, fam.cutoff_radius, fam.center)),
                               p > 0.0 ? p : detail::default_p(dim, 0.0), fam.center);
        }
      },
      family);
}

struct AsymptoticBottom {
  double value = 0.0;           ///< estimate at the largest radius
  std::vector<double> radii;
  std::vector<double> minima;   ///< nodal minimum of V_inf over |x| >= R
  bool converged = false;       ///< last two minima agree to `tol`
};

inline std::vector<double> default_bottom_radii(double half_width) {
  return {0.5 * half_width, 0.6 * half_width, 0.7 * half_width, 0.8 * half_width, 0.9 * half_width};
}

/// Nodal proxy for lim_{R->inf} essinf_{|x|>=R} V_inf.
inline AsymptoticBottom asymptotic_bottom(const PotentialSpec& spec, const std::vector<double>& radii,
                                          double tol = 1e-3) {
  require(!radii.empty(), ErrorCode::InvalidArgument, "radius schedule is empty");
  const Grid& grid = spec.grid();
  AsymptoticBottom out;
  double prev = -std::numeric_limits<double>::infinity();
  for (double r : radii) {
    require(r > prev, ErrorCode::InvalidArgument, "radius schedule must be increasing");
    require(r <= grid.half_width(), ErrorCode::DomainExceeded, "radius exceeds the box half-width");
    prev = r;
    double lo = std::numeric_limits<double>::infinity();
    bool has_interior = false;
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
      if (grid.radius(k) < r) continue;
      lo = std::min(lo, spec.v_inf()[static_cast<Eigen::Index>(k)]);
      has_interior = has_interior || grid.is_interior(k);
    }
    require(has_interior, ErrorCode::DomainExceeded,
            "annulus |x| >= " + std::to_string(r) + " holds no interior node");
    out.radii.push_back(r);
    out.minima.push_back(lo);
  }
  out.value = out.minima.back();
  out.converged = out.minima.size() < 2 ||
                  std::abs(out.minima.back() - out.minima[out.minima.size() - 2]) <= tol;
  return out;
}

/// (sum_{|x| >= R} w |V_0|^p)^{1/p}.
inline double tail_lp_norm(const PotentialSpec& spec, double p, double radius) {
  const Grid& grid = spec.grid();
  require(p >= 1.0, ErrorCode::InvalidArgument, "Lebesgue exponent must be >= 1");
  require(radius >= 0.0, ErrorCode::InvalidArgument, "radius must be nonnegative");
  require(radius <= grid.half_width(), ErrorCode::DomainExceeded, "radius exceeds the box half-width");
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.node_count(); ++k) {
    if (grid.radius(k) < radius) continue;
    const auto kk = static_cast<Eigen::Index>(k);
    acc += grid.weights()[kk] * std::pow(std::abs(spec.v_zero()[kk]), p);
  }
  return std::pow(acc, 1.0 / p);
}

}  // namespace reslab
