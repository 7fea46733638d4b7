#pragma once

/// \file grid.hpp
/// \brief Uniform tensor-product grids on [-L, L]^N and sampled fields.
///
/// The discrete Laplacian is the weighted graph Laplacian of the lattice
/// (including the halo edges to the zero Dirichlet exterior) divided by the
/// trapezoid weights, i.e. -Delta_h = W^{-1} K.  With this pairing the
/// summation-by-parts identity <-Delta_h u, u>_W = |grad_h u|^2 holds exactly
/// and the 2-D operator is the Kronecker sum of the 1-D ones.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "reslab/error.hpp"

namespace reslab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

/// Node coordinates; the second entry is 0 on 1-D grids.
using Point = std::array<double, 2>;

inline constexpr std::size_t kDefaultMaxNodes = std::size_t{1} << 24;

class Grid {
 public:
  Grid(int dim, double half_width, int points, std::size_t max_nodes = kDefaultMaxNodes) {
    require(dim == 1 || dim == 2, ErrorCode::InvalidArgument, "grid dimension must be 1 or 2");
    require(std::isfinite(half_width) && half_width > 0.0, ErrorCode::InvalidArgument,
            "grid half-width must be positive");
    require(points >= 3, ErrorCode::InvalidArgument, "need at least 3 points per axis");
    require(points % 2 == 1, ErrorCode::InvalidArgument,
            "points per axis must be odd so that x = 0 is a node");
    std::size_t count = 1;
    for (int a = 0; a < dim; ++a) {
      require(count <= max_nodes / static_cast<std::size_t>(points), ErrorCode::InvalidArgument,
              "node count exceeds the configured cap of " + std::to_string(max_nodes));
      count *= static_cast<std::size_t>(points);
    }
    dim_ = dim;
    half_width_ = half_width;
    points_ = points;
    count_ = count;

    const double span = 2.0 * half_width;
    const double segs = static_cast<double>(points - 1);
    spacing_ = span / segs;
    // Keep h*(n-1) == 2L in the stored representation when a neighbouring
    // double achieves it.
    for (double cand : {spacing_, std::nextafter(spacing_, 0.0), std::nextafter(spacing_, span)}) {
      if (cand * segs == span) {
        spacing_ = cand;
        break;
      }
    }

    axis_.resize(points);
    axis_weights_.resize(points);
    for (int i = 0; i < points; ++i) {
      // symmetric formula: x_{n-1-i} == -x_i and the midpoint is exactly 0
      axis_[i] = static_cast<double>(2 * i - (points - 1)) * half_width / segs;
      axis_weights_[i] = (i == 0 || i == points - 1) ? 0.5 * spacing_ : spacing_;
    }

    weights_.resize(static_cast<Eigen::Index>(count_));
    for (std::size_t k = 0; k < count_; ++k) {
      double w = axis_weights_[ix(k)];
      if (dim_ == 2) w *= axis_weights_[iy(k)];
      weights_[static_cast<Eigen::Index>(k)] = w;
    }
    assemble_stiffness();
  }

  int dim() const noexcept { return dim_; }
  double half_width() const noexcept { return half_width_; }
  int points_per_axis() const noexcept { return points_; }
  double spacing() const noexcept { return spacing_; }
  std::size_t node_count() const noexcept { return count_; }
  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(count_); }

  const std::vector<double>& axis() const noexcept { return axis_; }
  const std::vector<double>& axis_weights() const noexcept { return axis_weights_; }
  const Vec& weights() const noexcept { return weights_; }

  int ix(std::size_t k) const noexcept { return static_cast<int>(k % static_cast<std::size_t>(points_)); }
  int iy(std::size_t k) const noexcept {
    return dim_ == 2 ? static_cast<int>(k / static_cast<std::size_t>(points_)) : 0;
  }
  std::size_t index(int i, int j = 0) const noexcept {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(j) * static_cast<std::size_t>(points_);
  }

  Point node(std::size_t k) const noexcept {
    return {axis_[ix(k)], dim_ == 2 ? axis_[iy(k)] : 0.0};
  }
  double radius(std::size_t k) const noexcept {
    const Point p = node(k);
    return std::hypot(p[0], p[1]);
  }

  /// True when the node lies strictly inside the box (not on its faces).
  bool is_interior(std::size_t k) const noexcept {
    auto inner = [&](int i) { return i > 0 && i < points_ - 1; };
    return inner(ix(k)) && (dim_ == 1 || inner(iy(k)));
  }

  /// Symmetric stiffness matrix K with <-Delta_h u, v>_W = u^T K v.
  const SpMat& stiffness() const noexcept { return stiffness_; }

  bool same_as(const Grid& other) const noexcept {
    return this == &other || (dim_ == other.dim_ && points_ == other.points_ &&
                              half_width_ == other.half_width_);
  }

  /// Visits every lattice edge once, including the halo edges that connect
  /// face nodes to the zero exterior (reported with `j == npos`).  The edge
  /// coefficient is the transverse trapezoid weight divided by h.
  template <class Fn>
  void for_each_edge(Fn&& fn) const {
    constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    const int n = points_;
    for (int axis_id = 0; axis_id < dim_; ++axis_id) {
      for (std::size_t k = 0; k < count_; ++k) {
        const int along = axis_id == 0 ? ix(k) : iy(k);
        double coef = 1.0 / spacing_;
        if (dim_ == 2) coef *= axis_weights_[axis_id == 0 ? iy(k) : ix(k)];
        const std::size_t stride = axis_id == 0 ? 1 : static_cast<std::size_t>(n);
        if (along == 0) fn(k, npos, coef);
        fn(k, along == n - 1 ? npos : k + stride, coef);
      }
    }
  }

 private:
  void assemble_stiffness() {
    constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(count_ * (1 + 4 * static_cast<std::size_t>(dim_)));
    for_each_edge([&](std::size_t i, std::size_t j, double c) {
      const auto ii = static_cast<Eigen::Index>(i);
      trips.emplace_back(ii, ii, c);
      if (j != npos) {
        const auto jj = static_cast<Eigen::Index>(j);
        trips.emplace_back(jj, jj, c);
        trips.emplace_back(ii, jj, -c);
        trips.emplace_back(jj, ii, -c);
      }
    });
    stiffness_.resize(size(), size());
    stiffness_.setFromTriplets(trips.begin(), trips.end());
    stiffness_.makeCompressed();
  }

  int dim_ = 1;
  double half_width_ = 1.0;
  int points_ = 3;
  std::size_t count_ = 0;
  double spacing_ = 1.0;
  std::vector<double> axis_;
  std::vector<double> axis_weights_;
  Vec weights_;
  SpMat stiffness_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(int dim, double half_width, int points,
                         std::size_t max_nodes = kDefaultMaxNodes) {
  return std::make_shared<const Grid>(dim, half_width, points, max_nodes);
}

inline void require_same_grid(const Grid& a, const Grid& b, const char* where) {
  require(a.same_as(b), ErrorCode::GridMismatch, where);
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

/// Real samples on the nodes of a grid.
class Field {
 public:
  explicit Field(GridPtr grid) : grid_(std::move(grid)) {
    require(grid_ != nullptr, ErrorCode::InvalidArgument, "field needs a grid");
    values_ = Vec::Zero(grid_->size());
  }

  Field(GridPtr grid, Vec values) : grid_(std::move(grid)), values_(std::move(values)) {
    require(grid_ != nullptr, ErrorCode::InvalidArgument, "field needs a grid");
    require(values_.size() == grid_->size(), ErrorCode::GridMismatch,
            "sample count does not match node count");
    require(values_.allFinite(), ErrorCode::InvalidArgument, "field samples must be finite");
  }

  static Field constant(GridPtr grid, double c) {
    const auto n = grid->size();
    return Field(std::move(grid), Vec::Constant(n, c));
  }

  template <class Fn>
  static Field sample(GridPtr grid, Fn&& fn) {
    Vec v(grid->size());
    for (std::size_t k = 0; k < grid->node_count(); ++k) v[static_cast<Eigen::Index>(k)] = fn(grid->node(k));
    return Field(std::move(grid), std::move(v));
  }

  const Grid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const Vec& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.size(); }
  double operator[](Eigen::Index k) const { return values_[k]; }

  /// New field on the same grid.
  Field with_values(Vec v) const { return Field(grid_, std::move(v)); }

 private:
  GridPtr grid_;
  Vec values_;
};

struct FieldNorms {
  double l2 = 0.0;
  double grad_l2 = 0.0;
  double h1 = 0.0;
};

inline double inner(const Grid& grid, const Vec& u, const Vec& v) {
  return (grid.weights().array() * u.array() * v.array()).sum();
}

inline double l2_norm(const Grid& grid, const Vec& u) { return std::sqrt(inner(grid, u, u)); }

/// |grad_h u|^2 from forward differences over all lattice edges, halo included.
inline double grad_norm_sq(const Grid& grid, const Vec& u) {
  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  double acc = 0.0;
  grid.for_each_edge([&](std::size_t i, std::size_t j, double c) {
    const double d = u[static_cast<Eigen::Index>(i)] - (j == npos ? 0.0 : u[static_cast<Eigen::Index>(j)]);
    acc += c * d * d;
  });
  return acc;
}

inline FieldNorms norms_of(const Grid& grid, const Vec& u) {
  FieldNorms out;
  const double l2sq = inner(grid, u, u);
  const double gsq = grad_norm_sq(grid, u);
  out.l2 = std::sqrt(l2sq);
  out.grad_l2 = std::sqrt(gsq);
  out.h1 = std::sqrt(l2sq + gsq);
  return out;
}

inline FieldNorms field_norms(const Grid& grid, const Field& field) {
  require_same_grid(grid, field.grid(), "field_norms: field lives on another grid");
  return norms_of(grid, field.values());
}

/// Delta_h u = -W^{-1} K u.
inline Vec laplacian_of(const Grid& grid, const Vec& u) {
  Vec ku = grid.stiffness() * u;
  return -(ku.array() / grid.weights().array()).matrix();
}

inline Field apply_laplacian(const Grid& grid, const Field& field) {
  require_same_grid(grid, field.grid(), "apply_laplacian: field lives on another grid");
  return field.with_values(laplacian_of(grid, field.values()));
}

/// Quadrature mass of u^2 over nodes with |x| >= radius.
inline double tail_mass_of(const Grid& grid, const Vec& u, double radius) {
  require(radius >= 0.0, ErrorCode::InvalidArgument, "tail radius must be nonnegative");
  require(radius <= grid.half_width(), ErrorCode::DomainExceeded,
          "tail radius " + std::to_string(radius) + " exceeds the box half-width");
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.node_count(); ++k) {
    if (grid.radius(k) >= radius) {
      const auto kk = static_cast<Eigen::Index>(k);
      acc += grid.weights()[kk] * u[kk] * u[kk];
    }
  }
  return acc;
}

inline double tail_mass(const Grid& grid, const Field& field, double radius) {
  require_same_grid(grid, field.grid(), "tail_mass: field lives on another grid");
  return tail_mass_of(grid, field.values(), radius);
}

}  // namespace reslab
