#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace chstep {

/// Monotone time levels t_0 < t_1 < ... < t_N.
///
/// Steps and ratios use 1-based level indices: tau(k) = t_k - t_{k-1} for
/// 1 <= k <= N and ratio(k) = tau(k) / tau(k-1) for 2 <= k <= N.
class TimeMesh {
 public:
  TimeMesh() = default;

  /// Throws NonPositiveStep unless the levels are strictly increasing and finite.
  static TimeMesh from_levels(std::vector<double> levels);
  static TimeMesh from_steps(double t0, std::span<const double> steps);

  int steps_count() const noexcept { return static_cast<int>(levels_.size()) - 1; }
  std::span<const double> levels() const noexcept { return levels_; }
  double level(int k) const { return levels_.at(static_cast<std::size_t>(k)); }
  double tau(int k) const { return steps_.at(static_cast<std::size_t>(k - 1)); }
  double ratio(int k) const;
  std::span<const double> steps() const noexcept { return steps_; }

  double final_time() const noexcept { return levels_.back(); }
  double max_step() const noexcept;
  /// Largest r_k over 2 <= k <= N; 0 if N < 2.
  double max_ratio() const noexcept;
  /// Number of levels k >= 2 with r_k >= threshold.
  int count_ratios_at_least(double threshold) const noexcept;

  /// A copy restricted to levels 0..n.
  TimeMesh prefix(int n) const;

 private:
  std::vector<double> levels_{0.0};
  std::vector<double> steps_;
};

struct Bdf2Coeffs {
  double b0;
  double b1;
};

/// BDF2 kernels b_0^{(n)}, b_1^{(n)} for steps tau_{n-1} = tau_prev and
/// tau_n = tau_cur. Throws NonPositiveStep.
Bdf2Coeffs bdf2_coeffs(double tau_prev, double tau_cur);

/// Step-scaled kernels (1+2r)/(1+r) and -r^{3/2}/(1+r).
Bdf2Coeffs scaled_bdf2_coeffs(double ratio);

/// DOC kernel row {theta_{n-j}^{(n)}} for j = 2..n, stored so that
/// row[n - j] = theta_{n-j}^{(n)}. Uses the closed product form.
/// Requires 2 <= n <= mesh.steps_count().
std::vector<double> doc_kernels(const TimeMesh& mesh, int n);

/// All DOC kernels for levels 2..N in a lower-triangular table.
class KernelTable {
 public:
  KernelTable(const TimeMesh& mesh, int last_level);

  int last_level() const noexcept { return last_; }
  double b0(int n) const { return b_[idx(n)].b0; }
  double b1(int n) const { return b_[idx(n)].b1; }
  /// theta_{n-j}^{(n)} for 2 <= j <= n.
  double theta(int n, int j) const;
  /// theta_{n-j}^{(n)} / sqrt(tau_n tau_j)
  double scaled_theta(int n, int j) const;
  double tau(int k) const { return tau_.at(static_cast<std::size_t>(k - 1)); }

 private:
  std::size_t idx(int n) const { return static_cast<std::size_t>(n - 2); }

  int last_;
  std::vector<double> tau_;
  std::vector<Bdf2Coeffs> b_;
  std::vector<std::vector<double>> rows_;  // rows_[n-2][n-j]
};

/// max over 2 <= k <= n <= N of
/// |sum_{j=k}^{n} theta_{n-j}^{(n)} b_{j-k}^{(j)} - delta_{nk}| and
/// |sum_{j=k}^{n} b_{n-j}^{(n)} theta_{j-k}^{(j)} - delta_{nk}|.
double verify_orthogonality(const TimeMesh& mesh, int last_level);

/// Positive root of 1 + 2r - r^{3/2} = 0 (about 4.864), by bisection on [4, 5].
double zero_stability_limit();

/// R_L(z, s) = (2 + 4z - z^{3/2})/(1 + z) - s^{3/2}/(1 + s).
/// Gerschgorin lower bound for row k of the step-scaled symmetric BDF2
/// matrix with z = r_k, s = r_{k+1}. Throws OutOfDomain for negative arguments.
double stability_lower_bound(double z, double s);

/// R_U(z, s) = (1+2z)(1+2z+z^{3/2})/(1+z)^2 + s^{3/2}(1+2s+s^{3/2})/(1+s)^2.
/// Gerschgorin upper bound for row k of B2~^T B2~. Throws OutOfDomain.
double stability_upper_bound(double z, double s);

/// Constants bounding the step-scaled kernel matrices under 0 < r_k <= r_user.
struct StabilityConstants {
  double r_user;
  double r_star;
  double m1;      ///< lower eigenvalue bound of B~ = B2~ + B2~^T
  double m2;      ///< upper eigenvalue bound of B2~^T B2~
  double m_star;  ///< r_user^{3/2} / (1 + 2 r_user)
  double m3;      ///< 2 / (1 - m_star), upper bound for the DOC quadratic form
};

/// Throws OutOfDomain unless 0 < r_user < r_star.
StabilityConstants stability_constants(double r_user);

/// Extreme eigenvalues of a symmetric tridiagonal matrix by Sturm-sequence
/// bisection. `off` has one fewer entry than `diag`.
struct EigenRange {
  double min;
  double max;
};
EigenRange tridiagonal_eigen_range(std::span<const double> diag, std::span<const double> off);

struct CertificationReport {
  int n = 0;                 ///< matrix order (levels 2..N)
  double lambda_min = 0.0;   ///< lambda_min(B2~ + B2~^T)
  double lambda_max = 0.0;   ///< lambda_max(B2~^T B2~)
  double gerschgorin_lower = 0.0;  ///< min_k R_L(r_k, r_{k+1})
  double gerschgorin_upper = 0.0;  ///< max_k R_U(r_k, r_{k+1})
  double m1 = 0.0;
  double m2 = 0.0;
  double max_ratio = 0.0;
  bool pass = false;

  /// JSON object with keys n, lambda_min, lambda_max, m1, m2, pass plus the
  /// Gerschgorin bounds and max_ratio.
  std::string to_json() const;
};

/// Maximum number of levels accepted by certify_mesh.
inline constexpr int kMaxCertifiedLevels = 10000;

/// Eigenvalue certification of the step-scaled BDF2 matrix for levels 2..N.
/// Uses r_{N+1} := 0 for the last Gerschgorin row.
/// Throws RatioExceedsUser if any r_k > constants.r_user and OutOfDomain if
/// N - 1 exceeds kMaxCertifiedLevels.
CertificationReport certify_mesh(const TimeMesh& mesh, const StabilityConstants& constants);

struct ProbeReport {
  int trials = 0;
  int positive_definite_violations = 0;  ///< BDF2 kernel positivity with R_L weights
  int sandwich_lower_violations = 0;     ///< (m1/m2) ||L w||^2 <= w^T Theta w
  int sandwich_upper_violations = 0;     ///< w^T Theta w <= m3 ||L w||^2
  int young_violations = 0;              ///< Young-type DOC bound, eps in {0.5, 1, 2}
  double worst_lower_margin = 0.0;       ///< min over trials of w^T Theta w / ||L w||^2
  double worst_upper_margin = 0.0;       ///< max over trials of w^T Theta w / ||L w||^2

  int violations() const noexcept {
    return positive_definite_violations + sandwich_lower_violations +
           sandwich_upper_violations + young_violations;
  }
};

/// Quadratic forms of the BDF2 and DOC kernels evaluated for a single pair of
/// vectors; w and v are indexed by level k = 2..N (entry 0 is level 2).
struct QuadraticForms {
  double bdf2_form;        ///< 2 sum_k w_k sum_{j=2}^k b_{k-j}^{(k)} w_j
  double bdf2_lower;       ///< sum_k R_L(r_k, r_{k+1}) w_k^2 / tau_k
  double doc_form;         ///< w^T Theta w = 2 sum_k sum_{j<=k} theta_{k-j}^{(k)} w_k w_j
  double scaled_norm_sq;   ///< ||Lambda_tau w||^2 = sum tau_k w_k^2
  double doc_cross;        ///< sum_k sum_{j<=k} theta_{k-j}^{(k)} w_k v_j
  double doc_form_v_half;  ///< sum_k sum_{j<=k} theta_{k-j}^{(k)} v_k v_j
};

QuadraticForms quadratic_forms(const KernelTable& table, const TimeMesh& mesh,
                               std::span<const double> w, std::span<const double> v);

/// Randomized check of the kernel quadratic-form inequalities on one mesh.
/// Throws RatioExceedsUser if a ratio exceeds constants.r_user.
ProbeReport quadratic_form_probes(const TimeMesh& mesh, const StabilityConstants& constants,
                                  int trials, std::uint64_t seed);

}  // namespace chstep
