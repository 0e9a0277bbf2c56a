#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "chstep/errors.hpp"
#include "chstep/kernels.hpp"
#include "chstep/meshing.hpp"

namespace chstep {
namespace {

ModelParams coarsening_params() {
  ModelParams p;
  p.kappa = 0.01;
  p.epsilon = 0.05;
  return p;
}

TEST(UniformMesh, Basic) {
  const TimeMesh m = uniform_mesh(1.0, 4);
  ASSERT_EQ(m.steps_count(), 4);
  for (int k = 1; k <= 4; ++k) EXPECT_NEAR(m.tau(k), 0.25, 1e-15);
  EXPECT_DOUBLE_EQ(m.final_time(), 1.0);
  EXPECT_THROW(uniform_mesh(1.0, 0), std::invalid_argument);
}

TEST(RandomMesh, EndsAtFinalTimeAndIsDeterministic) {
  const TimeMesh a = random_mesh(1.0, 100, 5), b = random_mesh(1.0, 100, 5), c = random_mesh(1.0, 100, 6);
  EXPECT_NEAR(a.final_time(), 1.0, 1e-14);
  double sum = 0.0;
  for (double t : a.steps()) sum += t;
  EXPECT_NEAR(sum, 1.0, 1e-13);
  EXPECT_TRUE(std::equal(a.steps().begin(), a.steps().end(), b.steps().begin()));
  EXPECT_FALSE(std::equal(a.steps().begin(), a.steps().end(), c.steps().begin()));
}

TEST(RandomMesh, ProducesLargeRatios) {
  EXPECT_GT(random_mesh(1.0, 640, 2020).max_ratio(), 1000.0);
}

TEST(BoundedRatioMesh, RatiosWithinCap) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TimeMesh m = bounded_ratio_mesh(2.0, 300, 4.0, seed);
    EXPECT_NEAR(m.final_time(), 2.0, 1e-12);
    for (int k = 2; k <= m.steps_count(); ++k) {
      EXPECT_LE(m.ratio(k), 4.0 * (1 + 1e-12));
      EXPECT_GE(m.ratio(k), 0.25 * (1 - 1e-12));
    }
  }
}

TEST(AdaptiveStep, Examples) {
  AdaptiveConfig cfg;
  cfg.beta = 100.0;
  EXPECT_NEAR(adaptive_next_step(cfg, 1.0, 0.0), 0.1, 1e-15);
  EXPECT_NEAR(adaptive_next_step(cfg, 1.0, std::sqrt(0.99)), 0.01, 1e-15);
  EXPECT_NEAR(adaptive_next_step(cfg, 1.0, 1e6), cfg.tau_min, 0.0);
  // Ratio cap: at most r_user times the previous step.
  EXPECT_NEAR(adaptive_next_step(cfg, 0.01, 0.0), 0.04, 1e-15);
}

TEST(AdaptiveStep, StaysInRange) {
  AdaptiveConfig cfg;
  for (double rate : {0.0, 1e-3, 0.1, 1.0, 10.0, 1e3}) {
    for (double tau : {1e-4, 1e-3, 1e-1}) {
      const double next = adaptive_next_step(cfg, tau, rate);
      EXPECT_GE(next, cfg.tau_min);
      EXPECT_LE(next, cfg.tau_max);
      EXPECT_LE(next, cfg.r_user * tau * (1 + 1e-15));
    }
  }
}

TEST(AdaptiveConfig, Validate) {
  AdaptiveConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.tau_min = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = AdaptiveConfig{};
  cfg.r_user = 6.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = AdaptiveConfig{};
  cfg.beta = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(StabilityCap, Examples) {
  const ModelParams p = coarsening_params();
  // 4 eps^2 / kappa = 1; min{3/2, R_L(1, 4) = 5/2 - 8/5}.
  EXPECT_NEAR(stability_cap(p, 1.0, 4.0), 0.9, 1e-14);
  // min{9/5, R_L(4, 4) = 2/5}.
  EXPECT_NEAR(stability_cap(p, 4.0, 4.0), 0.4, 1e-14);
  EXPECT_THROW(stability_cap(p, 0.0, 4.0), OutOfDomain);
  EXPECT_THROW(stability_cap(p, 4.5, 4.0), OutOfDomain);
}

TEST(StabilityCap, ApplyShrinksOnlyWhenNeeded) {
  const ModelParams p = coarsening_params();
  EXPECT_DOUBLE_EQ(apply_stability_cap(p, 0.1, 0.05, 4.0), 0.05);
  ModelParams tight = p;
  tight.kappa = 1.0;  // cap scale 0.01
  const double tau = apply_stability_cap(tight, 0.01, 0.04, 4.0);
  EXPECT_LE(tau, stability_cap(tight, tau / 0.01, 4.0) * (1 + 1e-12));
  EXPECT_LT(tau, 0.04);
}

TEST(MeshCsv, RoundTrip) {
  const TimeMesh m = random_mesh(1.0, 25, 3);
  std::stringstream ss;
  write_mesh_csv(ss, m);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  EXPECT_EQ(header, "k,t,tau,r");
  const TimeMesh back = read_mesh_csv(ss);
  ASSERT_EQ(back.steps_count(), m.steps_count());
  for (int k = 0; k <= m.steps_count(); ++k) EXPECT_EQ(back.level(k), m.level(k));
}

TEST(MeshCsv, RejectsGarbage) {
  std::stringstream ss("k,t,tau,r\n0,0,,\n1,abc,,\n");
  EXPECT_ANY_THROW(read_mesh_csv(ss));
}

}  // namespace
}  // namespace chstep
