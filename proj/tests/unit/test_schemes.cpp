#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "chstep/errors.hpp"
#include "chstep/io.hpp"
#include "chstep/schemes.hpp"

namespace chstep {
namespace {

ModelParams smooth_params() {
  ModelParams p;
  p.kappa = 1.0;
  p.epsilon = std::sqrt(0.5);
  p.points = 16;
  return p;
}

ModelParams coarsening_params(int m = 32) {
  ModelParams p;
  p.points = m;
  return p;
}

double observed_order(double e_coarse, double e_fine) { return std::log2(e_coarse / e_fine); }

// Max-norm error at T = 1 after n uniform steps of a two-level marcher.
double global_error(const std::function<Field(const CahnHilliardSolver&, int)>& run, int n) {
  const ModelParams p = smooth_params();
  CahnHilliardSolver solver(p);
  solver.set_source(ManufacturedSolution::make_source(p));
  const ManufacturedSolution exact(p);
  return max_abs_difference(run(solver, n), exact.exact(1.0));
}

Field run_bdf2(const CahnHilliardSolver& s, int n) {
  const double tau = 1.0 / n;
  const ManufacturedSolution exact(s.params());
  Field older = exact.exact(0.0);
  Field old = s.tr_bdf2_one_step(older, tau, 0.0).phi;
  for (int k = 2; k <= n; ++k) {
    Field next = s.bdf2_step(old, older, tau, tau, k * tau).phi;
    older = std::move(old);
    old = std::move(next);
  }
  return old;
}

Field run_cn(const CahnHilliardSolver& s, int n) {
  const double tau = 1.0 / n;
  Field phi = ManufacturedSolution(s.params()).exact(0.0);
  for (int k = 1; k <= n; ++k) phi = s.cn_step(phi, tau, k * tau).phi;
  return phi;
}

Field run_cncs(const CahnHilliardSolver& s, int n) {
  const double tau = 1.0 / n;
  Field older = ManufacturedSolution(s.params()).exact(0.0);
  Field old = s.convex_splitting_first_step(older, tau, tau).phi;
  for (int k = 2; k <= n; ++k) {
    Field next = s.cncs_step(old, older, tau, k * tau).phi;
    older = std::move(old);
    old = std::move(next);
  }
  return old;
}

// Max-norm error of one step of size tau from the exact state at t0.
double local_error(const std::function<StepResult(const CahnHilliardSolver&, const Field&, double, double)>& step,
                   double tau) {
  const ModelParams p = smooth_params();
  CahnHilliardSolver solver(p);
  solver.set_source(ManufacturedSolution::make_source(p));
  const ManufacturedSolution exact(p);
  const double t0 = 0.3;
  return max_abs_difference(step(solver, exact.exact(t0), tau, t0).phi, exact.exact(t0 + tau));
}

Field smooth_state(const Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double a[5][5];
  for (auto& row : a) for (double& x : row) x = u(rng);
  return Field::from_function(g, [&](double x, double y) {
    double v = 0.0;
    for (int l = 1; l <= 4; ++l)
      for (int m = 1; m <= 4; ++m) v += a[l][m] * std::sin(l * x + 0.3) * std::cos(m * y - 0.7) / (l * m);
    return v;
  });
}

TEST(ModelParams, Validate) {
  ModelParams p;
  EXPECT_NO_THROW(p.validate());
  p.epsilon = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = ModelParams{};
  p.kappa = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = ModelParams{};
  p.points = 7;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(ChemicalPotential, Examples) {
  const CahnHilliardSolver s(coarsening_params(16));
  EXPECT_LE(s.chemical_potential(Field(16, 1.0)).max_abs(), 1e-15);
  EXPECT_LE(s.chemical_potential(Field(16, 0.0)).max_abs(), 0.0);
  const Field half(16, 0.5);
  EXPECT_LE(max_abs_difference(s.chemical_potential(half), Field(16, 0.125 - 0.5)), 1e-15);
  const Grid g = s.grid();
  const Field ss = Field::from_function(g, [](double x, double y) { return std::sin(x) * std::sin(y); });
  const Field expected = Field::from_function(g, [](double x, double y) {
    const double v = std::sin(x) * std::sin(y);
    return v * v * v - v + 0.0025 * 2.0 * v;
  });
  EXPECT_LE(max_abs_difference(s.chemical_potential(ss), expected), 1e-13);
}

TEST(Schemes, PureStatesAreStationary) {
  const CahnHilliardSolver s(coarsening_params(16));
  const Field one(16, 1.0);
  const double tau = 0.05;
  for (const StepResult& r : {s.bdf2_step(one, one, tau, tau, 0.0), s.bdf1_step(one, tau, 0.0),
                              s.cn_step(one, tau, 0.0), s.cncs_step(one, one, tau, 0.0),
                              s.sdirk2_start(one, tau, 0.0), s.tr_bdf2_one_step(one, tau, 0.0),
                              s.convex_splitting_first_step(one, tau, 0.0)}) {
    EXPECT_LE(max_abs_difference(r.phi, one), 1e-14);
    EXPECT_LE(r.iterations, 2);  // one per implicit stage
  }
}

TEST(Schemes, LinearOnlySolvesInOneIteration) {
  FixedPointConfig cfg;
  cfg.linear_only = true;
  const CahnHilliardSolver s(coarsening_params(16), cfg);
  const Field phi = smooth_state(s.grid(), 1);
  EXPECT_EQ(s.bdf2_step(phi, phi, 0.1, 0.2, 0.0).iterations, 1);
}

TEST(Schemes, ConserveVolume) {
  const CahnHilliardSolver s(coarsening_params(32));
  const Grid g = s.grid();
  Field older = random_initial_field(g, 3, 0.5);
  const double v0 = volume(g, older);
  Field old = s.tr_bdf2_one_step(older, 0.01, 0.0).phi;
  double worst = std::abs(volume(g, old) - v0);
  const double taus[] = {0.02, 0.005, 0.015, 0.03};
  double prev = 0.01;
  for (double tau : taus) {
    Field next = s.bdf2_step(old, older, prev, tau, 0.0).phi;
    worst = std::max(worst, std::abs(volume(g, next) - v0));
    older = std::move(old);
    old = std::move(next);
    prev = tau;
  }
  EXPECT_LE(worst, 1e-12);
  EXPECT_LE(std::abs(volume(g, s.cn_step(old, 0.01, 0.0).phi) - v0), 1e-12);
}

TEST(Manufactured, SourceVanishesForExactSemiDiscreteResidual) {
  const ModelParams p = smooth_params();
  const ManufacturedSolution m(p);
  const CahnHilliardSolver s(p);
  const double t = 0.7, h = 1e-5;
  const Field dphi = (1.0 / (2 * h)) * (m.exact(t + h) - m.exact(t - h));
  const Field rhs = s.ops().laplacian(s.chemical_potential(m.exact(t)));
  EXPECT_LE(max_abs_difference(m.source(t), dphi - p.kappa * rhs), 1e-8);
}

TEST(Manufactured, Bdf2IsSecondOrder) {
  const double e1 = global_error(run_bdf2, 20), e2 = global_error(run_bdf2, 40), e3 = global_error(run_bdf2, 80);
  EXPECT_NEAR(observed_order(e1, e2), 2.0, 0.15);
  EXPECT_NEAR(observed_order(e2, e3), 2.0, 0.1);
}

TEST(Manufactured, CrankNicolsonIsSecondOrder) {
  const double e1 = global_error(run_cn, 20), e2 = global_error(run_cn, 40);
  EXPECT_NEAR(observed_order(e1, e2), 2.0, 0.1);
}

TEST(Manufactured, ConvexSplittingCnIsSecondOrder) {
  const double e1 = global_error(run_cncs, 20), e2 = global_error(run_cncs, 40), e3 = global_error(run_cncs, 80);
  EXPECT_NEAR(observed_order(e2, e3), 2.0, 0.2);
  EXPECT_LT(e3, e1);
}

TEST(Manufactured, OneStepStartersHaveThirdOrderLocalError) {
  auto tr = [](const CahnHilliardSolver& s, const Field& phi, double tau, double t0) {
    return s.tr_bdf2_one_step(phi, tau, t0);
  };
  auto sd = [](const CahnHilliardSolver& s, const Field& phi, double tau, double t0) {
    return s.sdirk2_start(phi, tau, t0);
  };
  EXPECT_NEAR(observed_order(local_error(tr, 0.04), local_error(tr, 0.02)), 3.0, 0.3);
  // SDIRK shows stiff order reduction at larger steps (2.4 at tau = 0.08).
  EXPECT_NEAR(observed_order(local_error(sd, 0.005), local_error(sd, 0.0025)), 3.0, 0.3);
}

TEST(Manufactured, FirstOrderStartersHaveSecondOrderLocalError) {
  auto be = [](const CahnHilliardSolver& s, const Field& phi, double tau, double t0) {
    return s.bdf1_step(phi, tau, t0 + tau);
  };
  auto cs = [](const CahnHilliardSolver& s, const Field& phi, double tau, double t0) {
    return s.convex_splitting_first_step(phi, tau, t0 + tau);
  };
  EXPECT_NEAR(observed_order(local_error(be, 0.02), local_error(be, 0.01)), 2.0, 0.2);
  EXPECT_NEAR(observed_order(local_error(cs, 0.02), local_error(cs, 0.01)), 2.0, 0.2);
}

TEST(TrBdf2, OneStepIsTheTwoLevelStartWithGamma) {
  EXPECT_NEAR(CahnHilliardSolver::kTrBdf2Gamma, 2.0 - std::numbers::sqrt2, 0.0);
  const CahnHilliardSolver s(coarsening_params(16));
  const Field phi = smooth_state(s.grid(), 2);
  const double tau = 0.05, g = CahnHilliardSolver::kTrBdf2Gamma;
  const Field a = s.tr_bdf2_one_step(phi, tau, 0.0).phi;
  const Field b = s.tr_bdf2_start(phi, g * tau, (1 - g) * tau, 0.0).second.phi;
  EXPECT_LE(max_abs_difference(a, b), 1e-14);
}

TEST(FixedPoint, ThrowsWhenIterationBudgetIsExhausted) {
  FixedPointConfig cfg;
  cfg.max_iters = 1;
  const CahnHilliardSolver s(coarsening_params(16), cfg);
  const Field phi = smooth_state(s.grid(), 3);
  try {
    s.bdf2_step(phi, phi, 0.1, 0.1, 0.0);
    FAIL() << "expected FixedPointDiverged";
  } catch (const FixedPointDiverged& e) {
    EXPECT_EQ(e.iterations(), 1);
    EXPECT_GT(e.last_increment(), cfg.tol);
  }
}

TEST(FixedPoint, RejectsNonPositiveSteps) {
  const CahnHilliardSolver s(coarsening_params(16));
  const Field phi(16, 0.0);
  EXPECT_THROW(s.bdf2_step(phi, phi, 0.1, 0.0, 0.0), NonPositiveStep);
  EXPECT_THROW(s.bdf1_step(phi, -1.0, 0.0), NonPositiveStep);
}

TEST(FixedPoint, DefectIsAtTolerance) {
  const CahnHilliardSolver s(coarsening_params(64));
  const Field older = smooth_state(s.grid(), 4);
  const Field old = s.bdf1_step(older, 0.01, 0.0).phi;
  SolverState st;
  st.phi_prev = old;
  st.phi_prev2 = older;
  st.tau_prev = 0.01;
  st.tau_cur = 0.03;
  const Field phi = s.bdf2_step(st).phi;
  EXPECT_LE(s.bdf2_defect(st, phi).preconditioned, 10 * s.config().tol);
}

TEST(FixedPoint, StabilizationDoesNotChangeTheSolution) {
  FixedPointConfig plain, stab;
  stab.stabilization = 1.5;
  const CahnHilliardSolver a(coarsening_params(32), plain), b(coarsening_params(32), stab);
  const Field older = smooth_state(a.grid(), 5);
  const Field old = a.bdf1_step(older, 0.01, 0.0).phi;
  const StepResult ra = a.bdf2_step(old, older, 0.01, 0.02, 0.0);
  const StepResult rb = b.bdf2_step(old, older, 0.01, 0.02, 0.0);
  EXPECT_LE(max_abs_difference(ra.phi, rb.phi), 1e-11);
  EXPECT_LT(rb.iterations, ra.iterations);
}

}  // namespace
}  // namespace chstep
