#include <gtest/gtest.h>

#include <cmath>

#include "reslab/potential.hpp"

using namespace reslab;

TEST(Potential, CoulombSplit) {
  auto g = make_grid(1, 5.0, 1001);
  Coulomb c;
  c.c = -1.0;
  c.alpha = 0.25;
  const PotentialSpec v = make_potential(g, c);
  for (std::size_t k = 0; k < g->node_count(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double r = std::abs(g->node(k)[0] - v.center()[0]);
    if (r > 1.0) EXPECT_EQ(v.v_zero()[kk], 0.0);
    EXPECT_LE(std::abs(v.v_inf()[kk]), 1.0);
    EXPECT_TRUE(std::isfinite(v.values()[kk]));
    EXPECT_EQ(v.values()[kk], v.v_inf()[kk] + v.v_zero()[kk]);
    EXPECT_NEAR(v.values()[kk], -std::pow(r, -0.25), 1e-12);
  }
  // the center sits on a node and is moved by h/2
  EXPECT_NEAR(v.center()[0], 0.5 * g->spacing(), 1e-15);
}

TEST(Potential, CoulombCapPolicy) {
  auto g = make_grid(1, 5.0, 1001);
  Coulomb c;
  c.policy = SingularPolicy::Cap;
  const PotentialSpec v = make_potential(g, c);
  EXPECT_NEAR(v.values().minCoeff(), -std::pow(g->spacing(), -0.25), 1e-12);
}

TEST(Potential, CoulombAlphaRange) {
  auto g = make_grid(1, 5.0, 101);
  Coulomb c;
  c.alpha = 0.5;
  EXPECT_THROW(make_potential(g, c), Error);
  auto g2 = make_grid(2, 5.0, 21);
  c.alpha = 0.9;
  EXPECT_NO_THROW(make_potential(g2, c));
  c.alpha = 1.0;
  EXPECT_THROW(make_potential(g2, c), Error);
}

TEST(Potential, ConstantAndPoschlTeller) {
  auto g = make_grid(1, 10.0, 201);
  const PotentialSpec c = make_potential(g, Constant{2.5});
  EXPECT_TRUE((c.v_inf().array() == 2.5).all());
  EXPECT_TRUE((c.v_zero().array() == 0.0).all());
  const PotentialSpec pt = make_potential(g, PoschlTeller{2.0});
  EXPECT_TRUE((pt.v_zero().array() == 0.0).all());
  EXPECT_DOUBLE_EQ(pt.values()[100], -6.0);
}

TEST(Potential, WellWidth) {
  auto g = make_grid(1, 2.0, 21);
  EXPECT_THROW(make_potential(g, SquareWell{-1.0, 0.0}), Error);
}

TEST(Potential, ExponentInvariants) {
  auto g1 = make_grid(1, 2.0, 21);
  EXPECT_THROW(make_potential(g1, Constant{0.0}, 0.0, 1.5), Error);
  auto g2 = make_grid(2, 2.0, 21);
  EXPECT_THROW(make_potential(g2, Constant{0.0}, 0.0, 2.0), Error);
  EXPECT_TRUE(std::isinf(make_potential(g1, Constant{0.0}, 0.0, 2.0).q()));
  EXPECT_DOUBLE_EQ(make_potential(g1, Constant{0.0}, 0.0, 4.0).q(), 4.0);
}

TEST(Split, ConstantOnBall) {
  auto g = make_grid(1, 3.0, 61);
  const SplitEvaluators s = split_kato_rellich([](const Point&) { return 5.0; }, 1.0, Point{0.0, 0.0});
  for (std::size_t k = 0; k < g->node_count(); ++k) {
    const Point x = g->node(k);
    const bool in = std::abs(x[0]) <= 1.0;
    EXPECT_EQ(s.v_zero(x), in ? 5.0 : 0.0);
    EXPECT_EQ(s.v_inf(x), in ? 0.0 : 5.0);
  }
}

TEST(Split, Recomposition) {
  auto g = make_grid(1, 6.0, 601);
  auto v = [](const Point& x) { return std::exp(-std::abs(x[0])) / std::pow(std::abs(x[0]), 0.25); };
  const SplitEvaluators s = split_kato_rellich(v, 2.0, Point{0.0, 0.0});
  for (std::size_t k = 0; k < g->node_count(); ++k) {
    const Point x = g->node(k);
    if (x[0] == 0.0) continue;
    EXPECT_EQ(s.v_zero(x) + s.v_inf(x), v(x));
  }
}

TEST(Split, UnboundedOutsideRejected) {
  auto g = make_grid(1, 3.0, 61);
  Custom c;
  c.evaluator = [](const Point& x) { return 1.0 / (x[0] - 2.0); };
  c.cutoff_radius = 1.0;
  EXPECT_THROW(make_potential(g, c), Error);
}

TEST(AsymptoticBottom, ConstantAndCoulomb) {
  auto g = make_grid(1, 20.0, 2001);
  const auto c = asymptotic_bottom(make_potential(g, Constant{1.5}), {5.0, 10.0, 15.0});
  for (double m : c.minima) EXPECT_EQ(m, 1.5);
  EXPECT_EQ(c.value, 1.5);

  Coulomb cc;
  const PotentialSpec v = make_potential(g, cc);
  const std::vector<double> radii{2.0, 4.0, 8.0, 16.0};
  const auto b = asymptotic_bottom(v, radii);
  for (std::size_t i = 0; i < radii.size(); ++i) EXPECT_NEAR(b.minima[i], -std::pow(radii[i], -0.25), 2e-3);
  for (std::size_t i = 1; i < radii.size(); ++i) EXPECT_GE(b.minima[i], b.minima[i - 1]);
}

TEST(AsymptoticBottom, PoschlTellerFromBelow) {
  auto g = make_grid(1, 20.0, 4001);
  const auto b = asymptotic_bottom(make_potential(g, PoschlTeller{2.0}), default_bottom_radii(20.0));
  for (std::size_t i = 0; i < b.radii.size(); ++i) {
    const double ch = std::cosh(b.radii[i]);
    EXPECT_NEAR(b.minima[i], -6.0 / (ch * ch), 1e-12);
    EXPECT_LE(b.minima[i], 0.0);
  }
  EXPECT_TRUE(b.converged);
}

TEST(AsymptoticBottom, Errors) {
  auto g = make_grid(1, 2.0, 21);
  const PotentialSpec v = make_potential(g, Constant{0.0});
  EXPECT_THROW(asymptotic_bottom(v, {}), Error);
  EXPECT_THROW(asymptotic_bottom(v, {1.0, 0.5}), Error);
  EXPECT_THROW(asymptotic_bottom(v, {3.0}), Error);
  EXPECT_THROW(asymptotic_bottom(v, {2.0}), Error);
}

TEST(TailLp, Examples) {
  auto g = make_grid(1, 4.0, 801);
  EXPECT_EQ(tail_lp_norm(make_potential(g, Constant{3.0}), 2.0, 0.0), 0.0);
  Custom box;
  box.evaluator = [](const Point&) { return 1.0; };
  box.cutoff_radius = 1.0;
  EXPECT_EQ(tail_lp_norm(make_potential(g, box), 2.0, 2.0), 0.0);
  EXPECT_THROW(tail_lp_norm(make_potential(g, box), 2.0, 5.0), Error);
}

TEST(TailLp, CoulombAnnulus) {
  // sum over 0.5 <= |x - c| <= 1 of |x - c|^{-1/2}, versus 2 * int_{0.5}^{1} r^{-1/2} dr = 4 (1 - sqrt(0.5))
  auto g = make_grid(1, 4.0, 80001);
  Coulomb c;
  const PotentialSpec v = make_potential(g, c);
  const double exact = std::sqrt(4.0 * (1.0 - std::sqrt(0.5)));
  // radius measured from the origin; the h/2 center shift is below the tolerance
  EXPECT_NEAR(tail_lp_norm(v, 2.0, 0.5), exact, 1e-4);
  double prev = tail_lp_norm(v, 2.0, 0.0);
  for (double r : {0.25, 0.5, 0.75, 1.0, 2.0}) {
    const double t = tail_lp_norm(v, 2.0, r);
    EXPECT_LE(t, prev);
    prev = t;
  }
}
