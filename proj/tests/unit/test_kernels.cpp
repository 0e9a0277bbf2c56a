#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>
#include <json.hpp>

#include "chstep/errors.hpp"
#include "chstep/kernels.hpp"
#include "chstep/meshing.hpp"

namespace chstep {
namespace {

// theta via the defining recursion with BDF2 kernels computed from steps.
std::vector<double> recursion_theta(const TimeMesh& mesh, int n) {
  auto b = [&](int k, int offset) {
    const double tp = mesh.tau(k - 1), tc = mesh.tau(k), r = tc / tp;
    if (offset == 0) return (1 + 2 * r) / (tc * (1 + r));
    if (offset == 1) return -r * r / (tc * (1 + r));
    return 0.0;
  };
  std::vector<double> row(static_cast<std::size_t>(n - 1));
  row[0] = 1.0 / b(n, 0);
  for (int j = n - 1; j >= 2; --j) {
    double s = 0.0;
    for (int l = j + 1; l <= n; ++l) s += row[static_cast<std::size_t>(n - l)] * b(l, l - j);
    row[static_cast<std::size_t>(n - j)] = -s / b(j, 0);
  }
  return row;
}

// Lower-bidiagonal BDF2 matrix for levels 2..N.
Eigen::MatrixXd bdf2_matrix(const TimeMesh& mesh) {
  const int n = mesh.steps_count() - 1;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (int k = 2; k <= mesh.steps_count(); ++k) {
    const auto c = bdf2_coeffs(mesh.tau(k - 1), mesh.tau(k));
    B(k - 2, k - 2) = c.b0;
    if (k > 2) B(k - 2, k - 3) = c.b1;
  }
  return B;
}

double oracle_rl(double z, double s) {
  return (2 + 4 * z - std::pow(z, 1.5)) / (1 + z) - std::pow(s, 1.5) / (1 + s);
}

TEST(TimeMesh, LevelsAndRatios) {
  const std::vector<double> steps{0.1, 0.2, 0.05};
  const TimeMesh m = TimeMesh::from_steps(0.0, steps);
  EXPECT_EQ(m.steps_count(), 3);
  EXPECT_DOUBLE_EQ(m.final_time(), 0.35);
  EXPECT_DOUBLE_EQ(m.ratio(2), 2.0);
  EXPECT_DOUBLE_EQ(m.ratio(3), 0.25);
  EXPECT_DOUBLE_EQ(m.max_step(), 0.2);
  EXPECT_DOUBLE_EQ(m.max_ratio(), 2.0);
  EXPECT_EQ(m.count_ratios_at_least(2.0), 1);
  EXPECT_EQ(m.prefix(2).steps_count(), 2);
  EXPECT_THROW(TimeMesh::from_levels({0.0, 1.0, 1.0}), NonPositiveStep);
}

TEST(Bdf2Coeffs, Examples) {
  const auto a = bdf2_coeffs(0.1, 0.1);
  EXPECT_NEAR(a.b0, 15.0, 1e-12);
  EXPECT_NEAR(a.b1, -5.0, 1e-12);
  const auto b = bdf2_coeffs(0.1, 0.2);
  EXPECT_NEAR(b.b0, 25.0 / 3.0, 1e-12);
  EXPECT_NEAR(b.b1, -20.0 / 3.0, 1e-12);
  EXPECT_THROW(bdf2_coeffs(0.1, 0.0), NonPositiveStep);
  EXPECT_THROW(bdf2_coeffs(-0.1, 0.1), NonPositiveStep);
}

TEST(Bdf2Coeffs, ScaledMatchesDefinition) {
  for (double r : {0.2, 1.0, 3.7}) {
    const auto s = scaled_bdf2_coeffs(r);
    EXPECT_NEAR(s.b0, (1 + 2 * r) / (1 + r), 1e-15);
    EXPECT_NEAR(s.b1, -std::pow(r, 1.5) / (1 + r), 1e-15);
  }
}

TEST(DocKernels, UniformUnitSteps) {
  const TimeMesh m = uniform_mesh(3.0, 3);
  const auto row = doc_kernels(m, 3);
  ASSERT_EQ(row.size(), 2u);
  EXPECT_NEAR(row[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(row[1], 2.0 / 9.0, 1e-15);
}

TEST(DocKernels, ProductFormMatchesRecursion) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TimeMesh m = bounded_ratio_mesh(1.0, 60, 4.0, seed);
    for (int n : {2, 3, 17, 60}) {
      const auto a = doc_kernels(m, n);
      const auto b = recursion_theta(m, n);
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12 * std::abs(b[0]));
    }
  }
}

TEST(DocKernels, TableIsInverseOfBdf2Matrix) {
  const TimeMesh m = random_mesh(1.0, 40, 9);
  const Eigen::MatrixXd inv = bdf2_matrix(m).inverse();
  const KernelTable table(m, 40);
  double worst = 0.0;
  for (int n = 2; n <= 40; ++n) {
    for (int j = 2; j <= n; ++j) worst = std::max(worst, std::abs(table.theta(n, j) - inv(n - 2, j - 2)));
  }
  EXPECT_LE(worst, 1e-10 * inv.cwiseAbs().maxCoeff());
}

TEST(DocKernels, PositiveAndSumBoundedByStep) {
  const TimeMesh m = bounded_ratio_mesh(1.0, 200, 4.8, 3);
  const KernelTable table(m, 200);
  for (int n = 2; n <= 200; ++n) {
    double sum = 0.0;
    for (int j = 2; j <= n; ++j) {
      EXPECT_GT(table.theta(n, j), 0.0);
      sum += table.theta(n, j);
    }
    EXPECT_LE(sum, m.tau(n) * (1 + 1e-12));
    EXPECT_NEAR(table.scaled_theta(n, 2), table.theta(n, 2) / std::sqrt(m.tau(n) * m.tau(2)), 1e-12);
  }
}

TEST(Orthogonality, UniformAndShortMeshes) {
  EXPECT_LE(verify_orthogonality(uniform_mesh(1.0, 50), 50), 1e-12);
  EXPECT_EQ(verify_orthogonality(uniform_mesh(1.0, 2), 2), 0.0);
  EXPECT_LE(verify_orthogonality(bounded_ratio_mesh(1.0, 100, 4.8, 1), 100), 1e-12);
}

TEST(RatioBounds, Examples) {
  EXPECT_NEAR(stability_lower_bound(1.0, 1.0), 2.0, 1e-15);
  const double rs = zero_stability_limit();
  EXPECT_NEAR(stability_lower_bound(rs, rs), 0.0, 1e-10);
  EXPECT_NEAR(stability_upper_bound(4.0, 4.0), 11.56, 1e-12);
  EXPECT_THROW(stability_lower_bound(-1.0, 1.0), OutOfDomain);
  EXPECT_THROW(stability_upper_bound(1.0, -1.0), OutOfDomain);
}

TEST(RatioBounds, LowerBoundPositiveBelowFour) {
  for (int a = 0; a < 200; ++a) {
    for (int b = 0; b < 200; ++b) {
      const double z = 4.0 * (a + 0.5) / 200, s = 4.0 * (b + 0.5) / 200;
      EXPECT_GT(stability_lower_bound(z, s), 0.0);
      EXPECT_NEAR(stability_lower_bound(z, s), oracle_rl(z, s), 1e-13);
    }
  }
}

TEST(ZeroStability, RootAndBracket) {
  const double rs = zero_stability_limit();
  EXPECT_LE(std::abs(1 + 2 * rs - std::pow(rs, 1.5)), 1e-12);
  EXPECT_GT(rs, 4.86);
  EXPECT_LT(rs, 4.87);
}

TEST(StabilityConstants, AtFour) {
  const auto c = stability_constants(4.0);
  EXPECT_NEAR(c.m1, 0.4, 1e-14);
  EXPECT_NEAR(c.m2, 11.56, 1e-12);
  EXPECT_NEAR(c.m_star, 8.0 / 9.0, 1e-14);
  EXPECT_NEAR(c.m3, 18.0, 1e-12);
  EXPECT_THROW(stability_constants(5.0), OutOfDomain);
  EXPECT_THROW(stability_constants(0.0), OutOfDomain);
}

TEST(StabilityConstants, LowerConstantIsNotTheMinimumBelowFour) {
  // The ratio-matched lower bound exceeds the r_k -> 0 row for r_user < 4,
  // equals it at 4 and falls below it above 4.
  EXPECT_LT(oracle_rl(0.0, 3.0), oracle_rl(3.0, 3.0));
  EXPECT_NEAR(oracle_rl(0.0, 4.0), oracle_rl(4.0, 4.0), 1e-14);
  EXPECT_GT(oracle_rl(0.0, 4.5), oracle_rl(4.5, 4.5));
}

TEST(EigenRange, MatchesDenseSolver) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> d(30), e(29);
  for (double& x : d) x = u(rng);
  for (double& x : e) x = u(rng);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(30, 30);
  for (int i = 0; i < 30; ++i) A(i, i) = d[static_cast<std::size_t>(i)];
  for (int i = 0; i < 29; ++i) A(i, i + 1) = A(i + 1, i) = e[static_cast<std::size_t>(i)];
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A).eigenvalues();
  const auto range = tridiagonal_eigen_range(d, e);
  EXPECT_NEAR(range.min, ev.minCoeff(), 1e-10);
  EXPECT_NEAR(range.max, ev.maxCoeff(), 1e-10);
}

TEST(Certification, MatchesDenseScaledMatrices) {
  const TimeMesh m = bounded_ratio_mesh(1.0, 80, 4.0, 21);
  const int n = m.steps_count() - 1;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (int k = 2; k <= m.steps_count(); ++k) {
    const double r = m.ratio(k);
    B(k - 2, k - 2) = (1 + 2 * r) / (1 + r);
    if (k > 2) B(k - 2, k - 3) = -std::pow(r, 1.5) / (1 + r);
  }
  const Eigen::MatrixXd S = B + B.transpose();
  const Eigen::MatrixXd P = B.transpose() * B;
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().minCoeff();
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(P).eigenvalues().maxCoeff();
  const auto rep = certify_mesh(m, stability_constants(4.0));
  EXPECT_EQ(rep.n, n);
  EXPECT_NEAR(rep.lambda_min, lmin, 1e-9);
  EXPECT_NEAR(rep.lambda_max, lmax, 1e-9);
  EXPECT_TRUE(rep.pass);
  EXPECT_LE(rep.gerschgorin_lower, rep.lambda_min + 1e-12);
}

TEST(Certification, UniformMeshLowerEigenvalueApproachesTwo) {
  const auto rep = certify_mesh(uniform_mesh(1.0, 400), stability_constants(4.0));
  // Toeplitz tridiagonal with diagonal 3 and off-diagonal -1/2.
  EXPECT_NEAR(rep.lambda_min, 3.0 - std::cos(M_PI / (rep.n + 1)), 1e-9);
  EXPECT_NEAR(rep.lambda_min, 2.0, 1e-4);
}

TEST(Certification, SingleRowMatrix) {
  const std::vector<double> steps{1.0, 3.0};
  const auto rep = certify_mesh(TimeMesh::from_steps(0.0, steps), stability_constants(4.0));
  EXPECT_EQ(rep.n, 1);
  EXPECT_NEAR(rep.lambda_min, (2.0 + 4.0 * 3.0) / 4.0, 1e-12);
}

TEST(Certification, RejectsLargeRatioAndReportsJson) {
  const std::vector<double> steps{0.1, 0.5, 0.5};
  EXPECT_THROW(certify_mesh(TimeMesh::from_steps(0.0, steps), stability_constants(4.0)), RatioExceedsUser);
  const auto rep = certify_mesh(uniform_mesh(1.0, 10), stability_constants(4.0));
  const auto j = nlohmann::json::parse(rep.to_json());
  for (const char* key : {"n", "lambda_min", "lambda_max", "m1", "m2", "pass"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["pass"].get<bool>(), true);
}

TEST(QuadraticForms, FirstUnitVector) {
  const TimeMesh m = uniform_mesh(4.0, 4);
  const KernelTable table(m, 4);
  const std::vector<double> w{1.0, 0.0, 0.0}, zero{0.0, 0.0, 0.0};
  const auto q = quadratic_forms(table, m, w, zero);
  // b_0^{(2)} = 3/2 for unit steps; theta_0^{(2)} = 2/3.
  EXPECT_NEAR(q.bdf2_form, 3.0, 1e-14);
  EXPECT_NEAR(q.doc_form, 4.0 / 3.0, 1e-14);
  EXPECT_NEAR(q.scaled_norm_sq, 1.0, 1e-14);
  EXPECT_EQ(q.doc_cross, 0.0);
  EXPECT_EQ(q.doc_form_v_half, 0.0);
  const auto z = quadratic_forms(table, m, zero, zero);
  EXPECT_EQ(z.bdf2_form, 0.0);
  EXPECT_EQ(z.doc_form, 0.0);
}

TEST(QuadraticForms, ProbesHoldOnBoundedMeshes) {
  const auto c = stability_constants(4.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rep = quadratic_form_probes(bounded_ratio_mesh(1.0, 100, 4.0, seed), c, 20, seed);
    EXPECT_EQ(rep.trials, 20);
    EXPECT_EQ(rep.positive_definite_violations + rep.sandwich_lower_violations +
                  rep.sandwich_upper_violations + rep.young_violations,
              0);
  }
}

}  // namespace
}  // namespace chstep
