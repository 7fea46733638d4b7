#pragma once

/// \file nonlinearity.hpp
/// \brief Bounded nonlinearities f(x,u), the superposition operator and the
/// resonance-condition checkers.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "reslab/error.hpp"
#include "reslab/grid.hpp"
#include "reslab/potential.hpp"
#include "reslab/rng.hpp"
#include "reslab/spectral.hpp"

namespace reslab {

using PointFn = std::function<double(const Point&, double)>;

/// lim s f(x,s); `unbounded` marks families where the limit is infinite.
struct LimitField {
  ScalarField eval;
  bool unbounded = false;
};

struct NonlinearitySpec {
  std::string name;
  PointFn f;
  ScalarField m;      ///< |f(x,u)| <= m(x)
  ScalarField l0;     ///< Lipschitz part in L^p
  ScalarField linf;   ///< Lipschitz part in L^inf
  // limsup (hat) / liminf (check) of f(x,s) as s -> +inf (plus) or -inf (minus)
  ScalarField f_hat_plus, f_check_plus, f_hat_minus, f_check_minus;
  std::optional<LimitField> k_plus, k_minus;
  PointFn primitive;  ///< int_0^s f(x,t) dt; quadrature when empty
  // standing-wave profile: f(x,u) = h(x,|u|) sign(u)
  PointFn h, h_primitive;
  bool odd = false;
  // optional separable form f(x,u) = profile(x) shape(u), used for fast sampling
  ScalarField profile;
  std::function<double(double)> shape, shape_primitive;

  bool separable() const { return profile && shape && shape_primitive; }

  bool has_limits() const {
    return f_hat_plus && f_check_plus && f_hat_minus && f_check_minus;
  }
  bool is_standing_wave() const { return static_cast<bool>(h) && static_cast<bool>(h_primitive); }

  double value(const Point& x, double u) const {
    const double v = f(x, u);
    require(std::isfinite(v), ErrorCode::InvalidArgument,
            name + ": nonlinearity returned a non-finite value at u = " + std::to_string(u));
    return v;
  }

  double primitive_at(const Point& x, double s) const {
    if (primitive) return primitive(x, s);
    if (s == 0.0) return 0.0;
    auto integrand = [&](double t) { return f(x, t); };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, s, 15, 1e-13);
  }
};

/// Profile of a standing-wave nonlinearity h(x, xi), xi >= 0.
struct StandingWaveSpec {
  std::string name = "standing_wave";
  PointFn h;
  PointFn H;  ///< int_0^xi h(x,t) dt
  ScalarField m, l0, linf;
  ScalarField h_check;  ///< liminf_{xi -> inf} h
  ScalarField h_hat;    ///< limsup_{xi -> inf} h
  std::optional<LimitField> xi_h_limit;  ///< lim xi h(x, xi)
};

/// f(x,u) = h(x,|u|) u/|u|, f(x,0) = 0.
inline NonlinearitySpec from_standing_wave(const StandingWaveSpec& hs) {
  require(static_cast<bool>(hs.h), ErrorCode::InvalidArgument, "standing wave needs h");
  require(hs.m && hs.l0 && hs.linf, ErrorCode::InvalidArgument, "standing wave needs m and Lipschitz fields");
  for (double xi : {0.0, 1e-6, 1e-2, 1.0, 1e2, 1e6, 1e12}) {
    for (double x : {0.0, 0.5, 3.0}) {
      const double v = hs.h(Point{x, 0.0}, xi);
      require(std::isfinite(v), ErrorCode::InvalidArgument,
              hs.name + ": h undefined at xi = " + std::to_string(xi));
    }
  }
  NonlinearitySpec out;
  out.name = hs.name;
  const PointFn h = hs.h;
  out.f = [h](const Point& x, double u) {
    if (u == 0.0) return 0.0;
    const double v = h(x, std::abs(u));
    return u > 0.0 ? v : -v;
  };
  out.m = hs.m;
  out.l0 = hs.l0;
  out.linf = hs.linf;
  if (hs.h_check && hs.h_hat) {
    const ScalarField hc = hs.h_check, hh = hs.h_hat;
    out.f_check_plus = hc;
    out.f_hat_plus = hh;
    out.f_hat_minus = [hc](const Point& x) { return -hc(x); };
    out.f_check_minus = [hh](const Point& x) { return -hh(x); };
  }
  if (hs.xi_h_limit) {
    out.k_plus = hs.xi_h_limit;
    out.k_minus = hs.xi_h_limit;
  }
  out.h = hs.h;
  out.h_primitive = hs.H;
  if (hs.H) {
    const PointFn H = hs.H;
    out.primitive = [H](const Point& x, double s) { return H(x, std::abs(s)); };
  }
  out.odd = true;
  return out;
}

/// g(x) = amplitude exp(-|x|^2 / width^2).
struct GaussianProfile {
  double amplitude = 1.0;
  double width = 1.0;

  double operator()(const Point& x) const {
    return amplitude * std::exp(-(x[0] * x[0] + x[1] * x[1]) / (width * width));
  }
};

struct ZeroNonlinearity {};

/// g(x) (2/pi) arctan(u).
struct ArctanNonlinearity {
  GaussianProfile profile;
};

/// g(x) u / (1 + u^2).
struct RationalNonlinearity {
  GaussianProfile profile;
};

/// g(x), independent of u.
struct ConstantForcing {
  GaussianProfile profile;
};

using NonlinearityFamily = std::variant<ZeroNonlinearity, ArctanNonlinearity, RationalNonlinearity, ConstantForcing>;

inline NonlinearitySpec make_nonlinearity(const NonlinearityFamily& family) {
  constexpr double two_over_pi = 2.0 / std::numbers::pi;
  auto zero = [](const Point&) { return 0.0; };
  return std::visit(
      [&](const auto& fam) -> NonlinearitySpec {
        using T = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<T, ZeroNonlinearity>) {
          StandingWaveSpec hs;
          hs.name = "zero";
          hs.h = [](const Point&, double) { return 0.0; };
          hs.H = hs.h;
          hs.m = hs.l0 = hs.linf = hs.h_check = hs.h_hat = zero;
          hs.xi_h_limit = LimitField{zero, false};
          NonlinearitySpec out = from_standing_wave(hs);
          out.profile = zero;
          out.shape = [](double) { return 0.0; };
          out.shape_primitive = out.shape;
          return out;
        } else if constexpr (std::is_same_v<T, ArctanNonlinearity>) {
          const GaussianProfile g = fam.profile;
          require(std::isfinite(g.amplitude) && g.width > 0.0, ErrorCode::InvalidArgument, "bad arctan profile");
          StandingWaveSpec hs;
          hs.name = "arctan";
          hs.h = [g](const Point& x, double xi) { return g(x) * two_over_pi * std::atan(xi); };
          hs.H = [g](const Point& x, double xi) {
            return g(x) * two_over_pi * (xi * std::atan(xi) - 0.5 * std::log1p(xi * xi));
          };
          hs.m = [g](const Point& x) { return std::abs(g(x)); };
          hs.l0 = [g](const Point& x) { return two_over_pi * std::abs(g(x)); };
          hs.linf = zero;
          hs.h_check = g;
          hs.h_hat = g;
          hs.xi_h_limit = LimitField{[g](const Point& x) {
                                       const double v = g(x);
                                       return v == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), v);
                                     },
                                     g.amplitude != 0.0};
          NonlinearitySpec out = from_standing_wave(hs);
          out.profile = g;
          out.shape = [](double u) { return two_over_pi * std::atan(u); };
          out.shape_primitive = [](double u) { return two_over_pi * (u * std::atan(u) - 0.5 * std::log1p(u * u)); };
          return out;
        } else if constexpr (std::is_same_v<T, RationalNonlinearity>) {
          const GaussianProfile g = fam.profile;
          require(std::isfinite(g.amplitude) && g.width > 0.0, ErrorCode::InvalidArgument, "bad rational profile");
          StandingWaveSpec hs;
          hs.name = "rational";
          hs.h = [g](const Point& x, double xi) { return g(x) * xi / (1.0 + xi * xi); };
          hs.H = [g](const Point& x, double xi) { return 0.5 * g(x) * std::log1p(xi * xi); };
          hs.m = [g](const Point& x) { return 0.5 * std::abs(g(x)); };
          hs.l0 = [g](const Point& x) { return std::abs(g(x)); };
          hs.linf = zero;
          hs.h_check = zero;
          hs.h_hat = zero;
          hs.xi_h_limit = LimitField{g, false};
          NonlinearitySpec out = from_standing_wave(hs);
          out.profile = g;
          out.shape = [](double u) { return u / (1.0 + u * u); };
          out.shape_primitive = [](double u) { return 0.5 * std::log1p(u * u); };
          return out;
        } else {
          const GaussianProfile g = fam.profile;
          require(std::isfinite(g.amplitude) && g.width > 0.0, ErrorCode::InvalidArgument, "bad forcing profile");
          NonlinearitySpec out;
          out.name = "constant_forcing";
          out.f = [g](const Point& x, double) { return g(x); };
          out.m = [g](const Point& x) { return std::abs(g(x)); };
          out.l0 = out.linf = zero;
          out.f_hat_plus = out.f_check_plus = out.f_hat_minus = out.f_check_minus = g;
          out.k_plus = LimitField{[g](const Point& x) {
                                    const double v = g(x);
                                    return v == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), v);
                                  },
                                  g.amplitude != 0.0};
          out.k_minus = LimitField{[g](const Point& x) {
                                     const double v = g(x);
                                     return v == 0.0 ? 0.0 : -std::copysign(std::numeric_limits<double>::infinity(), v);
                                   },
                                   g.amplitude != 0.0};
          out.primitive = [g](const Point& x, double s) { return g(x) * s; };
          out.profile = g;
          out.shape = [](double) { return 1.0; };
          out.shape_primitive = [](double u) { return u; };
          return out;
        }
      },
      family);
}

/// Multiplies f by -1 on the half-space x_1 > 0, carrying every declared
/// limit and primitive along.
inline NonlinearitySpec flip_on_half_line(const NonlinearitySpec& spec) {
  auto sigma = [](const Point& x) { return x[0] > 0.0 ? -1.0 : 1.0; };
  NonlinearitySpec out = spec;
  out.name = spec.name + "_flipped";
  const PointFn f = spec.f;
  out.f = [f, sigma](const Point& x, double u) { return sigma(x) * f(x, u); };
  if (spec.has_limits()) {
    const ScalarField hp = spec.f_hat_plus, cp = spec.f_check_plus, hm = spec.f_hat_minus, cm = spec.f_check_minus;
    out.f_hat_plus = [=](const Point& x) { return sigma(x) > 0 ? hp(x) : -cp(x); };
    out.f_check_plus = [=](const Point& x) { return sigma(x) > 0 ? cp(x) : -hp(x); };
    out.f_hat_minus = [=](const Point& x) { return sigma(x) > 0 ? hm(x) : -cm(x); };
    out.f_check_minus = [=](const Point& x) { return sigma(x) > 0 ? cm(x) : -hm(x); };
  }
  auto flip_limit = [&](const std::optional<LimitField>& k) -> std::optional<LimitField> {
    if (!k) return std::nullopt;
    const ScalarField e = k->eval;
    return LimitField{[e, sigma](const Point& x) { return sigma(x) * e(x); }, k->unbounded};
  };
  out.k_plus = flip_limit(spec.k_plus);
  out.k_minus = flip_limit(spec.k_minus);
  if (spec.primitive) {
    const PointFn p = spec.primitive;
    out.primitive = [p, sigma](const Point& x, double s) { return sigma(x) * p(x, s); };
  }
  if (spec.h) {
    const PointFn h = spec.h;
    out.h = [h, sigma](const Point& x, double xi) { return sigma(x) * h(x, xi); };
  }
  if (spec.h_primitive) {
    const PointFn H = spec.h_primitive;
    out.h_primitive = [H, sigma](const Point& x, double xi) { return sigma(x) * H(x, xi); };
  }
  if (spec.profile) {
    const ScalarField pr = spec.profile;
    out.profile = [pr, sigma](const Point& x) { return sigma(x) * pr(x); };
  }
  return out;
}

/// Samples of a scalar field on the grid nodes.
inline Vec sample_on(const Grid& grid, const ScalarField& fn) {
  Vec v(grid.size());
  for (std::size_t k = 0; k < grid.node_count(); ++k) v[static_cast<Eigen::Index>(k)] = fn(grid.node(k));
  return v;
}

/// F(u) = f(., u(.)) at the grid nodes.
inline Vec apply_f(const NonlinearitySpec& spec, const Grid& grid, const Vec& u) {
  require(u.size() == grid.size(), ErrorCode::GridMismatch, "nonlinearity: field size mismatch");
  Vec out(u.size());
  for (std::size_t k = 0; k < grid.node_count(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    out[kk] = spec.value(grid.node(k), u[kk]);
  }
  return out;
}

inline Field evaluate_f(const NonlinearitySpec& spec, const Field& u) {
  return u.with_values(apply_f(spec, u.grid(), u.values()));
}

/// Sum_i w_i F_prim(x_i, u_i).
inline double primitive_integral(const NonlinearitySpec& spec, const Grid& grid, const Vec& u) {
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.node_count(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    acc += grid.weights()[kk] * spec.primitive_at(grid.node(k), u[kk]);
  }
  return acc;
}

/// A nonlinearity with its x-dependence sampled once on a grid.
class BoundNonlinearity {
 public:
  BoundNonlinearity(const NonlinearitySpec& spec, const Grid& grid) : spec_(spec), grid_(grid) {
    if (spec.separable()) profile_ = sample_on(grid, spec.profile);
  }

  const NonlinearitySpec& spec() const noexcept { return spec_; }
  const Grid& grid() const noexcept { return grid_; }

  Vec apply(const Vec& u) const {
    if (profile_.size() == 0) return apply_f(spec_, grid_, u);
    require(u.size() == grid_.size(), ErrorCode::GridMismatch, "nonlinearity: field size mismatch");
    Vec out(u.size());
    for (Eigen::Index k = 0; k < u.size(); ++k) out[k] = profile_[k] * spec_.shape(u[k]);
    require(out.allFinite(), ErrorCode::InvalidArgument, spec_.name + ": nonlinearity returned a non-finite value");
    return out;
  }

  double primitive_integral(const Vec& u) const {
    if (profile_.size() == 0) return reslab::primitive_integral(spec_, grid_, u);
    double acc = 0.0;
    const Vec& w = grid_.weights();
    for (Eigen::Index k = 0; k < u.size(); ++k) acc += w[k] * profile_[k] * spec_.shape_primitive(u[k]);
    return acc;
  }

 private:
  const NonlinearitySpec& spec_;
  const Grid& grid_;
  Vec profile_;
};

inline double m_l2_norm(const NonlinearitySpec& spec, const Grid& grid) {
  return l2_norm(grid, sample_on(grid, spec.m));
}

/// Pointwise Lipschitz bound sup_x (l0 + linf) on the grid; bounds
/// ||F(u) - F(v)||_{L^2} / ||u - v||_{L^2}.
inline double lipschitz_bound(const NonlinearitySpec& spec, const Grid& grid) {
  return (sample_on(grid, spec.l0) + sample_on(grid, spec.linf)).maxCoeff();
}

enum class ResonanceSign { Plus, Minus };

struct ViolationWitness {
  Point x{0.0, 0.0};
  double s = 0.0;
  double value = 0.0;
};

struct ResonanceVerdict {
  std::string condition;           ///< "LL+", "LL-", "SR+", "SR-"
  bool holds = false;
  bool applicable = true;
  std::string note;
  std::vector<double> witnesses;   ///< one integral per net direction
  double extreme = 0.0;            ///< min (plus) or max (minus) witness
  bool pointwise_holds = false;    ///< sign layer of the condition
  double positive_mass_fraction = 0.0;
  std::optional<ViolationWitness> violation;
};

struct CheckOptions {
  double margin_rel = 1e-10;
  std::optional<double> mass_tol;  ///< default 1e-8 (2L)^N
  int net_size = 64;
  std::uint64_t seed = 0x5eed;
  int sample_budget = 20000;
  double s_scale = 1.0;
};

namespace detail {

inline double default_mass_tol(const Grid& grid) { return 1e-8 * std::pow(2.0 * grid.half_width(), grid.dim()); }

/// Unit-sphere net in span(basis): +-phi for dim 1, equally spaced angles for
/// dim 2, +-phi_i plus seeded random mixtures otherwise.
inline std::vector<Vec> sphere_net(const Mat& basis, int net_size, std::uint64_t seed) {
  std::vector<Vec> net;
  const int d = static_cast<int>(basis.cols());
  if (d == 1) {
    net.push_back(basis.col(0));
    net.push_back(-basis.col(0));
  } else if (d == 2) {
    for (int i = 0; i < net_size; ++i) {
      const double t = 2.0 * std::numbers::pi * i / net_size;
      net.push_back(std::cos(t) * basis.col(0) + std::sin(t) * basis.col(1));
    }
  } else {
    for (int i = 0; i < d; ++i) {
      net.push_back(basis.col(i));
      net.push_back(-basis.col(i));
    }
    Rng rng(seed);
    for (int i = 0; i < net_size; ++i) {
      Vec c(d);
      for (int j = 0; j < d; ++j) c[j] = rng.normal();
      c.normalize();
      net.push_back(basis * c);
    }
  }
  return net;
}

}  // namespace detail

/// Evaluates the integral Landesman-Lazer witnesses over a net of the unit
/// sphere of span(kernel_basis) and, separately, the pointwise sign layer.
inline ResonanceVerdict check_landesman_lazer(const NonlinearitySpec& spec, const Grid& grid, const Mat& kernel_basis,
                                              ResonanceSign sign, const CheckOptions& opt = {}) {
  require(kernel_basis.cols() > 0, ErrorCode::InvalidArgument, "Landesman-Lazer check needs a kernel basis");
  require(kernel_basis.rows() == grid.size(), ErrorCode::GridMismatch, "kernel basis does not match the grid");
  require(spec.has_limits(), ErrorCode::MissingData, spec.name + ": limit fields are not declared");
  const bool plus = sign == ResonanceSign::Plus;
  ResonanceVerdict out;
  out.condition = plus ? "LL+" : "LL-";
  // I(phi) = int a phi^+ - b phi^-
  const Vec a = sample_on(grid, plus ? spec.f_check_plus : spec.f_hat_plus);
  const Vec b = sample_on(grid, plus ? spec.f_hat_minus : spec.f_check_minus);
  const Vec& w = grid.weights();
  const double margin = opt.margin_rel * std::max(1.0, m_l2_norm(spec, grid));

  for (const Vec& phi : detail::sphere_net(kernel_basis, opt.net_size, opt.seed)) {
    const Vec pos = phi.cwiseMax(0.0);
    const Vec neg = (-phi).cwiseMax(0.0);
    out.witnesses.push_back((w.array() * (a.array() * pos.array() - b.array() * neg.array())).sum());
  }
  if (plus) {
    out.extreme = *std::min_element(out.witnesses.begin(), out.witnesses.end());
    out.holds = out.extreme > margin;
  } else {
    out.extreme = *std::max_element(out.witnesses.begin(), out.witnesses.end());
    out.holds = out.extreme < -margin;
  }

  // LL+: a >= 0, b <= 0 everywhere; LL-: a <= 0, b >= 0.
  const double s = plus ? 1.0 : -1.0;
  out.pointwise_holds = true;
  double mass = 0.0;
  for (std::size_t k = 0; k < grid.node_count(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    if (s * a[kk] < 0.0 || s * b[kk] > 0.0) {
      if (out.pointwise_holds) out.violation = ViolationWitness{grid.node(k), s * std::numeric_limits<double>::infinity(),
                                                                s * a[kk] < 0.0 ? a[kk] : b[kk]};
      out.pointwise_holds = false;
    }
    if (a[kk] != 0.0 && b[kk] != 0.0) mass += w[kk];
  }
  out.positive_mass_fraction = mass / w.sum();
  if (mass <= opt.mass_tol.value_or(detail::default_mass_tol(grid))) out.pointwise_holds = false;
  if (!out.holds) out.note = "integral condition fails on the sphere net";
  else if (!out.pointwise_holds) out.note = "integral condition holds; pointwise sign layer fails";
  return out;
}

/// Verifies s f(x,s) >= 0 (plus) or <= 0 (minus) on grid nodes times a
/// log-spaced s ladder and on seeded random (x, s) samples, then checks the
/// mass where k+- has the required strict sign.
inline ResonanceVerdict check_sign_condition(const NonlinearitySpec& spec, const Grid& grid, ResonanceSign sign,
                                             const CheckOptions& opt = {}, const Mat* kernel_basis = nullptr) {
  require(spec.k_plus.has_value() && spec.k_minus.has_value(), ErrorCode::MissingData,
          spec.name + ": k+- limits are not declared");
  const bool plus = sign == ResonanceSign::Plus;
  const double sg = plus ? 1.0 : -1.0;
  ResonanceVerdict out;
  out.condition = plus ? "SR+" : "SR-";
  if (spec.k_plus->unbounded || spec.k_minus->unbounded) {
    out.applicable = false;
    out.holds = false;
    out.note = "k+- unbounded, SR inapplicable";
    return out;
  }

  auto check = [&](const Point& x, double s) {
    const double v = s * spec.value(x, s);
    if (sg * v < 0.0 && !out.violation) out.violation = ViolationWitness{x, s, v};
  };
  std::vector<double> ladder;
  for (int e = -6; e <= 6; ++e) {
    ladder.push_back(opt.s_scale * std::pow(10.0, e));
    ladder.push_back(-opt.s_scale * std::pow(10.0, e));
  }
  for (std::size_t k = 0; k < grid.node_count() && !out.violation; ++k) {
    for (double s : ladder) check(grid.node(k), s);
  }
  Rng rng(opt.seed);
  const double L = grid.half_width();
  for (int i = 0; i < opt.sample_budget && !out.violation; ++i) {
    Point x{rng.uniform(-L, L), grid.dim() == 2 ? rng.uniform(-L, L) : 0.0};
    const double mag = opt.s_scale * std::pow(10.0, rng.uniform(-6.0, 6.0));
    check(x, rng.uniform() < 0.5 ? -mag : mag);
  }

  const Vec kp = sample_on(grid, spec.k_plus->eval);
  const Vec km = sample_on(grid, spec.k_minus->eval);
  const Vec& w = grid.weights();
  double mass = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (sg * kp[k] > 0.0 && sg * km[k] > 0.0) mass += w[k];
  }
  out.positive_mass_fraction = mass / w.sum();
  out.pointwise_holds = !out.violation.has_value();

  if (kernel_basis != nullptr && kernel_basis->cols() > 0) {
    // lim_{rho -> inf} <rho phi, F(rho phi)> = int_{phi>0} k+ + int_{phi<0} k-
    for (const Vec& phi : detail::sphere_net(*kernel_basis, opt.net_size, opt.seed)) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < w.size(); ++k) {
        if (phi[k] > 0.0) acc += w[k] * kp[k];
        else if (phi[k] < 0.0) acc += w[k] * km[k];
      }
      out.witnesses.push_back(sg * acc);
    }
    out.extreme = *std::min_element(out.witnesses.begin(), out.witnesses.end());
  }

  out.holds = out.pointwise_holds && mass > opt.mass_tol.value_or(detail::default_mass_tol(grid));
  if (out.violation) out.note = "sign violation found";
  else if (!out.holds) out.note = "k+- lacks a set of positive mass with the required sign";
  return out;
}

struct SphereProbe {
  double min_pairing = 0.0;
  std::size_t argmin_sample = 0;
  std::size_t argmin_direction = 0;
  int directions = 0;
};

/// min over v on the radius-R sphere of X0 and w in `samples` of
/// sign <v, F(v + w)>.
inline SphereProbe kernel_sphere_probe(const NonlinearitySpec& spec, const Projections& proj,
                                       const std::vector<Vec>& samples, double radius, ResonanceSign sign,
                                       int net_size = 64, std::uint64_t seed = 0x5eed) {
  require(!samples.empty(), ErrorCode::InvalidArgument, "kernel sphere probe needs at least one sample");
  require(radius > 0.0, ErrorCode::InvalidArgument, "probe radius must be positive");
  require(proj.kernel_dim() > 0, ErrorCode::InvalidArgument, "kernel is empty");
  const Grid& grid = proj.grid();
  const auto net = detail::sphere_net(proj.kernel(), net_size, seed);
  const double sg = sign == ResonanceSign::Plus ? 1.0 : -1.0;
  SphereProbe out;
  out.min_pairing = std::numeric_limits<double>::infinity();
  out.directions = static_cast<int>(net.size());
  for (std::size_t si = 0; si < samples.size(); ++si) {
    require(samples[si].size() == grid.size(), ErrorCode::GridMismatch, "probe sample does not match the grid");
    for (std::size_t di = 0; di < net.size(); ++di) {
      const Vec v = radius * net[di];
      const double pairing = sg * inner(grid, v, apply_f(spec, grid, v + samples[si]));
      if (pairing < out.min_pairing) {
        out.min_pairing = pairing;
        out.argmin_sample = si;
        out.argmin_direction = di;
      }
    }
  }
  return out;
}

}  // namespace reslab
