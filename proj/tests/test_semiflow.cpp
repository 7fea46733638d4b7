#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "reslab/resonance_solver.hpp"
#include "reslab/rng.hpp"
#include "reslab/semiflow.hpp"

using namespace reslab;

namespace {

struct Pt {
  GridPtr grid = make_grid(1, 15.0, 1501);
  PotentialSpec pot = make_potential(grid, PoschlTeller{2.0});
  HamiltonianOperator op = assemble_hamiltonian(*grid, pot);
  SpectralData data = eigenpairs_below(op, -0.1, 1e-8);
};

const Pt& pt() {
  static const Pt s;
  return s;
}

Vec bump(const Grid& g, double amp, double center, double width) {
  Vec u(g.size());
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    const double x = g.node(k)[0];
    u[static_cast<Eigen::Index>(k)] = g.is_interior(k) ? amp * std::exp(-(x - center) * (x - center) / (width * width)) : 0.0;
  }
  return u;
}

}  // namespace

TEST(ImexStep, FreeDecay) {
  auto g = make_grid(1, 5.0, 201);
  const auto op = assemble_hamiltonian(*g, make_potential(g, Constant{0.0}));
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  Rng rng(3);
  Vec u(g->size());
  for (Eigen::Index k = 0; k < u.size(); ++k) u[k] = rng.normal();
  const double dt = 0.05;
  const Field next = imex_step(Field(g, u), -1.0, dt, op, z);
  EXPECT_LE(field_norms(*g, next).l2, l2_norm(*g, u) / (1.0 + dt) * (1.0 + 1e-12));
}

TEST(ImexStep, EigenfieldAction) {
  const auto& s = pt();
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  const double lambda = -4.5, dt = 0.01;
  for (int i = 0; i < s.data.count(); ++i) {
    const Vec phi = s.data.eigenfields.col(i);
    const Vec next = imex_step(Field(s.grid, phi), lambda, dt, s.op, z).values();
    const Vec expect = phi / (1.0 + dt * (s.data.eigenvalues[static_cast<std::size_t>(i)] - lambda));
    EXPECT_LT(l2_norm(*s.grid, next - expect), 1e-8);
  }
}

TEST(ImexStep, StationaryPoint) {
  const auto& s = pt();
  const auto at = make_nonlinearity(ArctanNonlinearity{});
  const Projections p = build_projections(s.data, -4.0);
  const ReducedProblem rp(s.op, p, at);
  const double lambda = -4.3;
  const SolveResult r = rp.solve(lambda, (rp.m_l2() / 0.3) * p.kernel().col(0));
  ASSERT_TRUE(r.converged);
  const double dt = 1e-3;
  const Vec next = imex_step(Field(s.grid, r.w), lambda, dt, s.op, at).values();
  EXPECT_LE(l2_norm(*s.grid, next - r.w), dt * r.pde_residual * (1.0 + 1e-6) + 1e-15);
}

TEST(ImexStep, RejectsIndefiniteStep) {
  const auto& s = pt();
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  try {
    imex_step(Field(s.grid), -1.0, 1.0, s.op, z);
    FAIL() << "expected a rejected step";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StepRejected);
  }
  EXPECT_THROW(imex_step(Field(s.grid), -1.0, -0.1, s.op, z), Error);
}

TEST(Lyapunov, Examples) {
  const auto& s = pt();
  const auto at = make_nonlinearity(ArctanNonlinearity{});
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  EXPECT_EQ(lyapunov_J(-1.0, Field(s.grid), s.op, at), 0.0);
  const double lambda = -4.5;
  for (int i = 0; i < s.data.count(); ++i) {
    const Field phi(s.grid, s.data.eigenfields.col(i));
    EXPECT_NEAR(lyapunov_J(lambda, phi, s.op, z), 0.5 * (s.data.eigenvalues[static_cast<std::size_t>(i)] - lambda), 1e-8);
  }
}

TEST(Lyapunov, QuadratureOracle) {
  const auto& s = pt();
  const auto at = make_nonlinearity(ArctanNonlinearity{});
  const Vec u = bump(*s.grid, 3.0, 0.7, 1.3) - bump(*s.grid, 1.0, -2.0, 0.8);
  const double lambda = -3.7;
  double prim = 0.0;
  for (std::size_t k = 0; k < s.grid->node_count(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double x = s.grid->node(k)[0];
    auto fx = [x](double t) { return std::exp(-x * x) * 2.0 / std::numbers::pi * std::atan(t); };
    prim += s.grid->weights()[kk] *
            (u[kk] == 0.0 ? 0.0 : boost::math::quadrature::gauss_kronrod<double, 61>::integrate(fx, 0.0, u[kk], 3, 1e-13));
  }
  const double quad = 0.5 * (grad_norm_sq(*s.grid, u) + inner(*s.grid, s.pot.values().cwiseProduct(u), u) -
                             lambda * inner(*s.grid, u, u)) - prim;
  const double J = lyapunov_J(lambda, Field(s.grid, u), s.op, at);
  EXPECT_NEAR(J, quad, 1e-8 * std::abs(quad));
}

TEST(Evolve, ImmediateEquilibriumAtSolution) {
  const auto& s = pt();
  const auto at = make_nonlinearity(ArctanNonlinearity{});
  const Projections p = build_projections(s.data, -4.0);
  const ReducedProblem rp(s.op, p, at);
  const double lambda = -4.3;
  const SolveResult r = rp.solve(lambda, (rp.m_l2() / 0.3) * p.kernel().col(0));
  ASSERT_TRUE(r.converged);
  Semiflow flow(s.op, at, lambda, &p);
  EvolveOptions o;
  o.horizon = 1.0;
  o.dt = 1e-3;
  o.save_every = 0.1;
  o.stop = StopRule::Equilibrium;
  const Trajectory t = flow.evolve(r.w, o);
  EXPECT_TRUE(t.equilibrium);
  EXPECT_NEAR(t.equilibrium_time, 1e-3, 1e-12);
}

TEST(Evolve, DecayBelowSpectrum) {
  const auto& s = pt();
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  Semiflow flow(s.op, z, -5.0);
  EvolveOptions o;
  o.horizon = 20.0;
  o.dt = 1e-2;
  o.save_every = 1.0;
  const Trajectory t = flow.evolve(bump(*s.grid, 1.0, 0.0, 1.0), o);
  for (std::size_t i = 1; i < t.states.size(); ++i) {
    EXPECT_LE(t.states[i].J, t.states[i - 1].J);
    EXPECT_GE(t.states[i].J, 0.0);
  }
  EXPECT_LT(t.states.back().J, 1e-6);
  EXPECT_LE(t.max_J_increase, 0.0);
}

TEST(Evolve, GrowthInGap) {
  const auto& s = pt();
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  const Projections p = build_projections(s.data, -4.0);
  Semiflow flow(s.op, z, -2.0, &p);
  EvolveOptions o;
  o.horizon = 1.0;
  o.dt = 1e-2;
  o.save_every = 0.1;
  const Trajectory t = flow.evolve(bump(*s.grid, 1.0, 0.0, 1.0), o);
  const double factor = 1.0 / (1.0 + 1e-2 * (s.data.eigenvalues[0] + 2.0));
  for (std::size_t i = 1; i < t.states.size(); ++i)
    EXPECT_NEAR(t.states[i].Pu_l2 / t.states[i - 1].Pu_l2, std::pow(factor, 10), 1e-7);
  EXPECT_FALSE(t.equilibrium);
}

TEST(Evolve, HalvesRejectedStep) {
  const auto& s = pt();
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  Semiflow flow(s.op, z, -1.0);
  EvolveOptions o;
  o.horizon = 0.5;
  o.dt = 0.5;
  o.save_every = 0.5;
  const Trajectory t = flow.evolve(bump(*s.grid, 1.0, 0.0, 1.0), o);
  EXPECT_GT(t.rejections, 0);
  EXPECT_LT(t.dt_record.back(), 1.0 / 3.0);
}

TEST(Evolve, ContinuityInData) {
  const auto& s = pt();
  const auto at = make_nonlinearity(ArctanNonlinearity{});
  Semiflow flow(s.op, at, -4.4);
  EvolveOptions o;
  o.horizon = 2.0;
  o.dt = 1e-3;
  o.save_every = 0.5;
  const Vec u0 = bump(*s.grid, 2.0, 0.5, 1.0);
  const Vec dir = bump(*s.grid, 1.0, -1.0, 2.0);
  const Trajectory base = flow.evolve(u0, o);
  std::vector<double> ratios;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    const Vec pert = u0 + eps * dir / norms_of(*s.grid, dir).h1;
    const Trajectory t = flow.evolve(pert, o);
    double worst = 0.0;
    for (std::size_t i = 0; i < t.states.size(); ++i)
      worst = std::max(worst, norms_of(*s.grid, t.states[i].u - base.states[i].u).h1);
    ratios.push_back(worst / eps);
  }
  for (double r : ratios) EXPECT_LT(r, 10.0);
  EXPECT_NEAR(ratios[1], ratios[2], 0.1 * ratios[2]);
}

TEST(Drift, Identity) {
  const auto& s = pt();
  const Projections p = build_projections(s.data, -4.0);
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  const Vec u = bump(*s.grid, 1.0, 0.3, 1.0);
  EXPECT_EQ(kernel_drift_rate(p.lambda0(), Field(s.grid, u), p, z), 0.0);
  const Vec pu = 2.0 * p.kernel().col(0);
  EXPECT_NEAR(kernel_drift_rate(p.lambda0() + 0.1, Field(s.grid, pu), p, z), 0.4, 1e-12);
}

TEST(Drift, FiniteDifferenceAlongTrajectory) {
  const auto& s = pt();
  const Projections p = build_projections(s.data, -4.0);
  const auto at = make_nonlinearity(ArctanNonlinearity{});
  Semiflow flow(s.op, at, -4.6, &p);
  EvolveOptions o;
  o.horizon = 1.0;
  o.dt = 1e-4;
  o.save_every = 0.1;
  o.diagnostics = true;
  const Trajectory t = flow.evolve(bump(*s.grid, 2.0, 0.4, 1.2), o);
  ASSERT_FALSE(t.diagnostics.empty());
  for (const auto& d : t.diagnostics) {
    EXPECT_NEAR(d.drift_fd, d.drift_rate, 1e-3 * std::abs(d.drift_rate));
    if (std::abs(d.dJ_dt) * d.dt > 1e-11) {
      EXPECT_NEAR(d.dJ_dt, -d.udot_sq, 0.05 * d.udot_sq);
    }
  }
}

TEST(TailDecay, ZeroTrajectory) {
  const auto& s = pt();
  const Projections p = build_projections(s.data, -4.0);
  const auto at = make_nonlinearity(ArctanNonlinearity{});
  Semiflow flow(s.op, at, -4.2, &p);
  EvolveOptions o;
  o.horizon = 0.5;
  o.dt = 1e-2;
  const Trajectory t = flow.evolve(Vec::Zero(s.grid->size()), o);
  const auto rep = tail_decay_report(t, p, s.pot, at, s.op.alpha_hat(), {3.0, 6.0, 12.0});
  for (const auto& e : rep.entries) EXPECT_EQ(e.measured, 0.0);
  EXPECT_TRUE(rep.all_pass);
  EXPECT_THROW(tail_decay_report(t, p, s.pot, at, s.op.alpha_hat(), {20.0}), Error);
}

TEST(TailDecay, LinearDecayIsMonotone) {
  const auto& s = pt();
  const Projections p = build_projections(s.data, -4.0);
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  Semiflow flow(s.op, z, -5.0, &p);
  EvolveOptions o;
  o.horizon = 3.0;
  o.dt = 1e-2;
  o.save_every = 0.25;
  const Trajectory t = flow.evolve(bump(*s.grid, 1.0, 0.0, 0.7), o);
  const auto rep = tail_decay_report(t, p, s.pot, z, s.op.alpha_hat(), {2.0, 4.0});
  EXPECT_TRUE(rep.all_pass);
  for (std::size_t i = 1; i < rep.entries.size(); ++i) {
    if (rep.entries[i].radius != rep.entries[i - 1].radius) continue;
    EXPECT_LE(rep.entries[i].measured, rep.entries[i - 1].measured);
  }
}

TEST(Output, CsvAndSnapshots) {
  auto g = make_grid(1, 4.0, 21);
  const auto op = assemble_hamiltonian(*g, make_potential(g, Constant{0.0}));
  const auto z = make_nonlinearity(ZeroNonlinearity{});
  Semiflow flow(op, z, -1.0);
  EvolveOptions o;
  o.horizon = 0.2;
  o.dt = 0.1;
  o.save_every = 0.1;
  Vec u0 = Vec::Zero(21);
  u0[10] = 1.0;
  const Trajectory t = flow.evolve(u0, o);
  ASSERT_EQ(t.states.size(), 3u);
  const std::string csv = trajectory_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,l2,grad_l2,h1,J,Pu_l2,Qu_l2");

  const auto path = std::filesystem::temp_directory_path() / "reslab_snap_test.bin";
  write_snapshots(t, *g, path);
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_EQ(bytes.size(), 24u + 3u * 21u * 8u);
  EXPECT_EQ(read_le_u64(bytes.data()), 1u);
  EXPECT_EQ(read_le_u64(bytes.data() + 8), 21u);
  EXPECT_EQ(read_le_f64(bytes.data() + 16), 4.0);
  EXPECT_EQ(read_le_f64(bytes.data() + 24 + 10 * 8), 1.0);
  std::filesystem::remove(path);
}
