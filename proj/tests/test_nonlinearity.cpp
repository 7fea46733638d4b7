#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "reslab/nonlinearity.hpp"

using namespace reslab;

namespace {

struct PtKernel {
  GridPtr grid = make_grid(1, 20.0, 4001);
  HamiltonianOperator op = assemble_hamiltonian(*grid, make_potential(grid, PoschlTeller{2.0}));
  SpectralData data = eigenpairs_below(op, -0.1, 1e-8);
  Projections proj = build_projections(data, -1.0);
};

const PtKernel& pt() {
  static const PtKernel s;
  return s;
}

NonlinearitySpec negated(const NonlinearitySpec& s) {
  StandingWaveSpec hs;
  hs.name = "neg_" + s.name;
  const PointFn h = s.h, H = s.h_primitive;
  hs.h = [h](const Point& x, double xi) { return -h(x, xi); };
  hs.H = [H](const Point& x, double xi) { return -H(x, xi); };
  hs.m = s.m;
  hs.l0 = s.l0;
  hs.linf = s.linf;
  const ScalarField hc = s.f_check_plus, hh = s.f_hat_plus;
  hs.h_check = [hh](const Point& x) { return -hh(x); };
  hs.h_hat = [hc](const Point& x) { return -hc(x); };
  if (s.k_plus) {
    const LimitField k = *s.k_plus;
    hs.xi_h_limit = LimitField{[k](const Point& x) { return -k.eval(x); }, k.unbounded};
  }
  return from_standing_wave(hs);
}

}  // namespace

TEST(Evaluate, Examples) {
  auto g = make_grid(1, 3.0, 61);
  const Field zero = evaluate_f(make_nonlinearity(ZeroNonlinearity{}), Field::constant(g, 2.0));
  EXPECT_EQ(zero.values().norm(), 0.0);

  const auto at = make_nonlinearity(ArctanNonlinearity{});
  const Field big = evaluate_f(at, Field::constant(g, 1e9));
  const Vec m = sample_on(*g, at.m);
  EXPECT_LT((big.values() - m).cwiseAbs().maxCoeff(), 1e-9);

  const auto ra = make_nonlinearity(RationalNonlinearity{});
  const Field half = evaluate_f(ra, Field::constant(g, 1.0));
  for (std::size_t k = 0; k < g->node_count(); ++k) {
    const double x = g->node(k)[0];
    EXPECT_NEAR(half[static_cast<Eigen::Index>(k)], 0.5 * std::exp(-x * x), 1e-15);
  }
}

TEST(Evaluate, NonFiniteRejected) {
  auto g = make_grid(1, 1.0, 5);
  NonlinearitySpec bad;
  bad.name = "bad";
  bad.f = [](const Point&, double) { return std::numeric_limits<double>::infinity(); };
  EXPECT_THROW(evaluate_f(bad, Field(g)), Error);
}

TEST(StandingWave, OddAndArctanMatch) {
  const auto at = make_nonlinearity(ArctanNonlinearity{});
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Point x{rng.uniform(-3, 3), 0.0};
    const double u = rng.normal() * 10.0;
    EXPECT_DOUBLE_EQ(at.f(x, -u), -at.f(x, u));
    EXPECT_NEAR(at.f(x, u), std::exp(-x[0] * x[0]) * 2.0 / std::numbers::pi * std::atan(u), 1e-15);
  }
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  EXPECT_EQ(z.f(Point{0.3, 0.0}, 7.0), 0.0);
  StandingWaveSpec broken;
  broken.h = [](const Point&, double xi) { return 1.0 / (xi - 1.0); };
  broken.m = broken.l0 = broken.linf = [](const Point&) { return 1.0; };
  EXPECT_THROW(from_standing_wave(broken), Error);
}

TEST(Bounds, GrowthAndLipschitz) {
  auto g = make_grid(1, 10.0, 401);
  Rng rng(9);
  for (const auto& spec : {make_nonlinearity(ArctanNonlinearity{}), make_nonlinearity(RationalNonlinearity{}),
                           make_nonlinearity(ConstantForcing{})}) {
    const double ml2 = m_l2_norm(spec, *g);
    const double lip = lipschitz_bound(spec, *g);
    const Vec m = sample_on(*g, spec.m);
    for (int i = 0; i < 30; ++i) {
      const double scale = std::pow(10.0, rng.uniform(-2.0, 6.0));
      Vec u(g->size()), v(g->size());
      for (Eigen::Index k = 0; k < u.size(); ++k) {
        u[k] = scale * rng.normal();
        v[k] = u[k] + rng.normal();
      }
      const Vec fu = apply_f(spec, *g, u), fv = apply_f(spec, *g, v);
      EXPECT_TRUE((fu.cwiseAbs().array() <= m.array() + 1e-15).all());
      EXPECT_LE(l2_norm(*g, fu), ml2 + 1e-12);
      EXPECT_LE(l2_norm(*g, fu - fv), lip * l2_norm(*g, u - v) + 1e-12);
    }
  }
}

TEST(Primitive, AnalyticMatchesQuadrature) {
  const auto at = make_nonlinearity(ArctanNonlinearity{});
  NonlinearitySpec numeric = at;
  numeric.primitive = nullptr;
  for (double s : {-7.0, -0.3, 0.0, 0.5, 3.0, 40.0}) {
    const Point x{0.4, 0.0};
    EXPECT_NEAR(at.primitive_at(x, s), numeric.primitive_at(x, s), 1e-10 * std::max(1.0, std::abs(s)));
  }
}

TEST(Bound, MatchesPointwise) {
  auto g = make_grid(1, 5.0, 101);
  const auto at = make_nonlinearity(ArctanNonlinearity{GaussianProfile{2.0, 1.5}});
  const BoundNonlinearity b(at, *g);
  Rng rng(4);
  Vec u(g->size());
  for (Eigen::Index k = 0; k < u.size(); ++k) u[k] = 3.0 * rng.normal();
  EXPECT_LT((b.apply(u) - apply_f(at, *g, u)).norm(), 1e-13);
  EXPECT_NEAR(b.primitive_integral(u), primitive_integral(at, *g, u), 1e-12);
}

TEST(LandesmanLazer, ArctanHoldsPlus) {
  const auto& s = pt();
  const auto at = make_nonlinearity(ArctanNonlinearity{});
  const auto v = check_landesman_lazer(at, *s.grid, s.proj.kernel(), ResonanceSign::Plus);
  EXPECT_TRUE(v.holds);
  EXPECT_TRUE(v.pointwise_holds);
  ASSERT_EQ(v.witnesses.size(), 2u);
  // I(phi) = int e^{-x^2} |phi|
  const Vec g = sample_on(*s.grid, at.m);
  const double expect = (s.grid->weights().array() * g.array() * s.proj.kernel().col(0).array().abs()).sum();
  for (double w : v.witnesses) EXPECT_NEAR(w, expect, 1e-12);
  EXPECT_FALSE(check_landesman_lazer(at, *s.grid, s.proj.kernel(), ResonanceSign::Minus).holds);
}

TEST(LandesmanLazer, ZeroFailsBoth) {
  const auto& s = pt();
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  for (ResonanceSign sg : {ResonanceSign::Plus, ResonanceSign::Minus}) {
    const auto v = check_landesman_lazer(z, *s.grid, s.proj.kernel(), sg);
    EXPECT_FALSE(v.holds);
    EXPECT_FALSE(v.pointwise_holds);
    EXPECT_EQ(v.positive_mass_fraction, 0.0);
  }
}

TEST(LandesmanLazer, NegatedHoldsMinus) {
  const auto& s = pt();
  const auto neg = negated(make_nonlinearity(ArctanNonlinearity{}));
  const auto v = check_landesman_lazer(neg, *s.grid, s.proj.kernel(), ResonanceSign::Minus);
  EXPECT_TRUE(v.holds);
  EXPECT_LT(v.extreme, 0.0);
}

TEST(LandesmanLazer, MissingLimits) {
  const auto& s = pt();
  NonlinearitySpec bare;
  bare.f = [](const Point&, double) { return 0.0; };
  EXPECT_THROW(check_landesman_lazer(bare, *s.grid, s.proj.kernel(), ResonanceSign::Plus), Error);
  EXPECT_THROW(check_landesman_lazer(make_nonlinearity(ArctanNonlinearity{}), *s.grid, Mat(), ResonanceSign::Plus),
               Error);
}

TEST(LandesmanLazer, TwoDimensionalNet) {
  auto g = make_grid(2, 4.0, 81);
  const auto op = assemble_hamiltonian(*g, make_potential(g, SquareWell{-50.0, 1.0}));
  const auto d = eigenpairs_below(op, -0.1, 1e-8);
  const Projections p = build_projections(d, d.multiplets[1].value);
  ASSERT_EQ(p.kernel_dim(), 2);
  const auto v = check_landesman_lazer(make_nonlinearity(ArctanNonlinearity{}), *g, p.kernel(), ResonanceSign::Plus);
  EXPECT_EQ(v.witnesses.size(), 64u);
  EXPECT_TRUE(v.holds);
}

TEST(SignCondition, RationalPlusAndMinus) {
  auto g = make_grid(1, 10.0, 401);
  const auto ra = make_nonlinearity(RationalNonlinearity{});
  const auto vp = check_sign_condition(ra, *g, ResonanceSign::Plus);
  EXPECT_TRUE(vp.applicable);
  EXPECT_TRUE(vp.holds);
  EXPECT_GT(vp.positive_mass_fraction, 0.0);
  EXPECT_FALSE(check_sign_condition(ra, *g, ResonanceSign::Minus).holds);
  const auto vm = check_sign_condition(negated(ra), *g, ResonanceSign::Minus);
  EXPECT_TRUE(vm.holds);
}

TEST(SignCondition, ArctanInapplicable) {
  auto g = make_grid(1, 10.0, 401);
  const auto v = check_sign_condition(make_nonlinearity(ArctanNonlinearity{}), *g, ResonanceSign::Plus);
  EXPECT_FALSE(v.applicable);
  EXPECT_FALSE(v.holds);
  EXPECT_EQ(v.note, "k+- unbounded, SR inapplicable");
}

TEST(SignCondition, FlipCaught) {
  const auto& s = pt();
  const auto flipped = flip_on_half_line(make_nonlinearity(RationalNonlinearity{}));
  const auto v = check_sign_condition(flipped, *s.grid, ResonanceSign::Plus, {}, &s.proj.kernel());
  EXPECT_FALSE(v.holds);
  ASSERT_TRUE(v.violation.has_value());
  EXPECT_GT(v.violation->x[0], 0.0);
  EXPECT_LT(v.violation->value, 0.0);

  const auto fa = flip_on_half_line(make_nonlinearity(ArctanNonlinearity{}));
  const auto ll = check_landesman_lazer(fa, *s.grid, s.proj.kernel(), ResonanceSign::Plus);
  EXPECT_FALSE(ll.holds);
  EXPECT_FALSE(ll.pointwise_holds);
  EXPECT_TRUE(ll.violation.has_value());
}

TEST(SphereProbe, ZeroAndGrowth) {
  const auto& s = pt();
  const std::vector<Vec> samples{Vec::Zero(s.grid->size())};
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  EXPECT_EQ(kernel_sphere_probe(z, s.proj, samples, 10.0, ResonanceSign::Plus).min_pairing, 0.0);

  const auto at = make_nonlinearity(ArctanNonlinearity{});
  const auto neg = negated(at);
  double prev = -1.0;
  for (double R : {10.0, 100.0, 1000.0}) {
    const auto p = kernel_sphere_probe(at, s.proj, samples, R, ResonanceSign::Plus);
    EXPECT_GT(p.min_pairing, 0.0);
    EXPECT_GT(p.min_pairing, prev);
    prev = p.min_pairing;
    // direct quadrature of R <phi, F(R phi)>
    const Vec phi = s.proj.kernel().col(0);
    const double direct = R * inner(*s.grid, phi, apply_f(at, *s.grid, R * phi));
    EXPECT_NEAR(p.min_pairing, direct, 1e-9 * direct);
    EXPECT_NEAR(kernel_sphere_probe(neg, s.proj, samples, R, ResonanceSign::Minus).min_pairing, p.min_pairing,
                1e-12 * p.min_pairing);
  }
  EXPECT_THROW(kernel_sphere_probe(at, s.proj, {}, 1.0, ResonanceSign::Plus), Error);
}
