#include "chstep/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "chstep/errors.hpp"

namespace chstep {

namespace {

double pow32(double x) { return x * std::sqrt(x); }

void require_positive_step(double tau, const char* what) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    std::ostringstream msg;
    msg << what << " must be positive and finite, got " << tau;
    throw NonPositiveStep(msg.str());
  }
}

void require_ratios_within(const TimeMesh& mesh, double r_user) {
  for (int k = 2; k <= mesh.steps_count(); ++k) {
    const double r = mesh.ratio(k);
    if (r > r_user) {
      std::ostringstream msg;
      msg << "step ratio r_" << k << " = " << r << " exceeds r_user = " << r_user;
      throw RatioExceedsUser(msg.str(), k, r);
    }
  }
}

// Ratio r_k with the convention r_{N+1} := 0 past the end of the mesh.
double ratio_or_zero(const TimeMesh& mesh, int k) {
  return k <= mesh.steps_count() ? mesh.ratio(k) : 0.0;
}

}  // namespace

// ---------------------------------------------------------------------------
// TimeMesh

TimeMesh TimeMesh::from_levels(std::vector<double> levels) {
  if (levels.empty()) throw NonPositiveStep("time mesh needs at least one level");
  TimeMesh mesh;
  mesh.levels_ = std::move(levels);
  mesh.steps_.reserve(mesh.levels_.size() - 1);
  for (std::size_t k = 1; k < mesh.levels_.size(); ++k) {
    const double tau = mesh.levels_[k] - mesh.levels_[k - 1];
    require_positive_step(tau, "time step");
    mesh.steps_.push_back(tau);
  }
  return mesh;
}

TimeMesh TimeMesh::from_steps(double t0, std::span<const double> steps) {
  TimeMesh mesh;
  mesh.levels_.assign(1, t0);
  mesh.levels_.reserve(steps.size() + 1);
  mesh.steps_.assign(steps.begin(), steps.end());
  // Compensated running sum keeps t_N accurate for long meshes.
  double t = t0;
  double carry = 0.0;
  for (double tau : steps) {
    require_positive_step(tau, "time step");
    const double y = tau - carry;
    const double next = t + y;
    carry = (next - t) - y;
    t = next;
    mesh.levels_.push_back(t);
  }
  return mesh;
}

double TimeMesh::ratio(int k) const {
  if (k < 2 || k > steps_count()) throw std::out_of_range("step ratio index outside [2, N]");
  return steps_[static_cast<std::size_t>(k - 1)] / steps_[static_cast<std::size_t>(k - 2)];
}

double TimeMesh::max_step() const noexcept {
  return steps_.empty() ? 0.0 : *std::max_element(steps_.begin(), steps_.end());
}

double TimeMesh::max_ratio() const noexcept {
  double r = 0.0;
  for (std::size_t k = 1; k < steps_.size(); ++k) r = std::max(r, steps_[k] / steps_[k - 1]);
  return r;
}

int TimeMesh::count_ratios_at_least(double threshold) const noexcept {
  int count = 0;
  for (std::size_t k = 1; k < steps_.size(); ++k) {
    if (steps_[k] / steps_[k - 1] >= threshold) ++count;
  }
  return count;
}

TimeMesh TimeMesh::prefix(int n) const {
  if (n < 0 || n > steps_count()) throw std::out_of_range("mesh prefix beyond last level");
  TimeMesh mesh;
  mesh.levels_.assign(levels_.begin(), levels_.begin() + n + 1);
  mesh.steps_.assign(steps_.begin(), steps_.begin() + n);
  return mesh;
}

// ---------------------------------------------------------------------------
// BDF2 and DOC kernels

Bdf2Coeffs bdf2_coeffs(double tau_prev, double tau_cur) {
  require_positive_step(tau_prev, "previous step");
  require_positive_step(tau_cur, "current step");
  const double r = tau_cur / tau_prev;
  const double denom = tau_cur * (1.0 + r);
  return {(1.0 + 2.0 * r) / denom, -r * r / denom};
}

Bdf2Coeffs scaled_bdf2_coeffs(double ratio) {
  if (!(ratio >= 0.0)) throw OutOfDomain("step ratio must be nonnegative");
  return {(1.0 + 2.0 * ratio) / (1.0 + ratio), -pow32(ratio) / (1.0 + ratio)};
}

std::vector<double> doc_kernels(const TimeMesh& mesh, int n) {
  if (n < 2 || n > mesh.steps_count()) {
    throw std::out_of_range("DOC kernels need 2 <= n <= N");
  }
  std::vector<double> row(static_cast<std::size_t>(n - 1));
  // theta_{n-j}^{(n)} = (1/b_0^{(j)}) prod_{i=j+1}^{n} r_i^2 / (1 + 2 r_i)
  double product = 1.0;
  for (int j = n; j >= 2; --j) {
    const Bdf2Coeffs b = bdf2_coeffs(mesh.tau(j - 1), mesh.tau(j));
    row[static_cast<std::size_t>(n - j)] = product / b.b0;
    const double r = mesh.ratio(j);
    product *= r * r / (1.0 + 2.0 * r);
  }
  return row;
}

KernelTable::KernelTable(const TimeMesh& mesh, int last_level) : last_(last_level) {
  if (last_level < 2 || last_level > mesh.steps_count()) {
    throw std::out_of_range("kernel table needs 2 <= last_level <= N");
  }
  tau_.assign(mesh.steps().begin(), mesh.steps().begin() + last_level);
  b_.reserve(static_cast<std::size_t>(last_level - 1));
  rows_.reserve(static_cast<std::size_t>(last_level - 1));
  for (int n = 2; n <= last_level; ++n) {
    b_.push_back(bdf2_coeffs(mesh.tau(n - 1), mesh.tau(n)));
    rows_.push_back(doc_kernels(mesh, n));
  }
}

double KernelTable::theta(int n, int j) const {
  if (j < 2 || j > n || n > last_) throw std::out_of_range("theta index outside 2 <= j <= n <= N");
  return rows_[idx(n)][static_cast<std::size_t>(n - j)];
}

double KernelTable::scaled_theta(int n, int j) const {
  return theta(n, j) / std::sqrt(tau(n) * tau(j));
}

double verify_orthogonality(const TimeMesh& mesh, int last_level) {
  if (last_level < 2) throw std::out_of_range("orthogonality check needs N >= 2");
  const KernelTable table(mesh, last_level);
  // b_{j-k}^{(j)} is nonzero only for j - k in {0, 1}.
  auto b = [&](int j, int offset) { return offset == 0 ? table.b0(j) : table.b1(j); };
  double worst = 0.0;
  for (int n = 2; n <= last_level; ++n) {
    for (int k = 2; k <= n; ++k) {
      const double delta = (n == k) ? 1.0 : 0.0;
      // sum_{j=k}^{n} theta_{n-j}^{(n)} b_{j-k}^{(j)}
      double s1 = table.theta(n, k) * b(k, 0);
      if (k + 1 <= n) s1 += table.theta(n, k + 1) * b(k + 1, 1);
      // sum_{j=k}^{n} b_{n-j}^{(n)} theta_{j-k}^{(j)}
      double s2 = table.b0(n) * table.theta(n, k);
      if (n - 1 >= k) s2 += table.b1(n) * table.theta(n - 1, k);
      worst = std::max({worst, std::abs(s1 - delta), std::abs(s2 - delta)});
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Ratio functions and constants

double zero_stability_limit() {
  static const double root = [] {
    auto f = [](double r) { return 1.0 + 2.0 * r - pow32(r); };
    double lo = 4.0;  // f(4) = 1 > 0
    double hi = 5.0;  // f(5) < 0
    while (hi - lo > 1e-15) {
      const double mid = 0.5 * (lo + hi);
      if (f(mid) > 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (mid == lo && mid == hi) break;
    }
    return 0.5 * (lo + hi);
  }();
  return root;
}

double stability_lower_bound(double z, double s) {
  if (!(z >= 0.0) || !(s >= 0.0)) throw OutOfDomain("R_L arguments must be nonnegative");
  return (2.0 + 4.0 * z - pow32(z)) / (1.0 + z) - pow32(s) / (1.0 + s);
}

double stability_upper_bound(double z, double s) {
  if (!(z >= 0.0) || !(s >= 0.0)) throw OutOfDomain("R_U arguments must be nonnegative");
  const double a = (1.0 + 2.0 * z) * (1.0 + 2.0 * z + pow32(z)) / ((1.0 + z) * (1.0 + z));
  const double b = pow32(s) * (1.0 + 2.0 * s + pow32(s)) / ((1.0 + s) * (1.0 + s));
  return a + b;
}

StabilityConstants stability_constants(double r_user) {
  const double r_star = zero_stability_limit();
  if (!(r_user > 0.0) || !(r_user < r_star)) {
    std::ostringstream msg;
    msg << "r_user must lie in (0, " << r_star << "), got " << r_user;
    throw OutOfDomain(msg.str());
  }
  StabilityConstants c{};
  c.r_user = r_user;
  c.r_star = r_star;
  c.m1 = 2.0 * (1.0 + 2.0 * r_user - pow32(r_user)) / (1.0 + r_user);
  c.m2 = stability_upper_bound(r_user, r_user);
  c.m_star = pow32(r_user) / (1.0 + 2.0 * r_user);
  c.m3 = 2.0 / (1.0 - c.m_star);
  return c;
}

// ---------------------------------------------------------------------------
// Eigenvalue certification

namespace {

// Number of eigenvalues strictly below x (Sturm count through the LDL^T pivots).
int sturm_count(std::span<const double> diag, std::span<const double> off, double x) {
  constexpr double tiny = std::numeric_limits<double>::min();
  int count = 0;
  double d = 1.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const double coupling = (i == 0) ? 0.0 : off[i - 1] * off[i - 1] / d;
    d = diag[i] - x - coupling;
    if (d == 0.0) d = -tiny;
    if (d < 0.0) ++count;
  }
  return count;
}

}  // namespace

EigenRange tridiagonal_eigen_range(std::span<const double> diag, std::span<const double> off) {
  const std::size_t n = diag.size();
  if (n == 0) throw std::invalid_argument("empty matrix");
  if (off.size() + 1 != n) throw std::invalid_argument("off-diagonal length must be n - 1");

  double lo = std::numeric_limits<double>::max();
  double hi = std::numeric_limits<double>::lowest();
  for (std::size_t i = 0; i < n; ++i) {
    const double radius = (i > 0 ? std::abs(off[i - 1]) : 0.0) + (i + 1 < n ? std::abs(off[i]) : 0.0);
    lo = std::min(lo, diag[i] - radius);
    hi = std::max(hi, diag[i] + radius);
  }
  const double scale = std::max({std::abs(lo), std::abs(hi), 1.0});
  const double tol = 4.0 * std::numeric_limits<double>::epsilon() * scale;

  auto bisect = [&](int target) {
    // Smallest x with sturm_count(x) >= target, i.e. the target-th eigenvalue.
    double a = lo - tol;
    double b = hi + tol;
    while (b - a > tol) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      if (sturm_count(diag, off, mid) >= target) {
        b = mid;
      } else {
        a = mid;
      }
    }
    return 0.5 * (a + b);
  };
  return {bisect(1), bisect(static_cast<int>(n))};
}

std::string CertificationReport::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["lambda_min"] = lambda_min;
  j["lambda_max"] = lambda_max;
  j["m1"] = m1;
  j["m2"] = m2;
  j["pass"] = pass;
  j["gerschgorin_lower"] = gerschgorin_lower;
  j["gerschgorin_upper"] = gerschgorin_upper;
  j["max_ratio"] = max_ratio;
  return j.dump();
}

CertificationReport certify_mesh(const TimeMesh& mesh, const StabilityConstants& constants) {
  const int last = mesh.steps_count();
  if (last < 2) throw std::out_of_range("certification needs at least two steps");
  if (last - 1 > kMaxCertifiedLevels) {
    throw OutOfDomain("certification is capped at " + std::to_string(kMaxCertifiedLevels) + " levels");
  }
  require_ratios_within(mesh, constants.r_user);

  const std::size_t order = static_cast<std::size_t>(last - 1);
  std::vector<Bdf2Coeffs> scaled(order);
  for (int k = 2; k <= last; ++k) scaled[static_cast<std::size_t>(k - 2)] = scaled_bdf2_coeffs(mesh.ratio(k));

  // B~ = B2~ + B2~^T: diagonal 2 b~0^{(k)}, off-diagonal b~1^{(k+1)}.
  // B2~^T B2~: diagonal b~0^{(k)2} + b~1^{(k+1)2}, off-diagonal b~1^{(k+1)} b~0^{(k+1)}.
  std::vector<double> sym_diag(order), sym_off(order - 1), gram_diag(order), gram_off(order - 1);
  for (std::size_t i = 0; i < order; ++i) {
    const double next_b1 = (i + 1 < order) ? scaled[i + 1].b1 : 0.0;
    sym_diag[i] = 2.0 * scaled[i].b0;
    gram_diag[i] = scaled[i].b0 * scaled[i].b0 + next_b1 * next_b1;
    if (i + 1 < order) {
      sym_off[i] = scaled[i + 1].b1;
      gram_off[i] = scaled[i + 1].b1 * scaled[i + 1].b0;
    }
  }

  CertificationReport report;
  report.n = static_cast<int>(order);
  report.m1 = constants.m1;
  report.m2 = constants.m2;
  report.max_ratio = mesh.max_ratio();
  report.lambda_min = tridiagonal_eigen_range(sym_diag, sym_off).min;
  report.lambda_max = tridiagonal_eigen_range(gram_diag, gram_off).max;

  double g_lo = std::numeric_limits<double>::max();
  double g_hi = 0.0;
  for (int k = 2; k <= last; ++k) {
    const double z = mesh.ratio(k);
    const double s = ratio_or_zero(mesh, k + 1);
    g_lo = std::min(g_lo, stability_lower_bound(z, s));
    g_hi = std::max(g_hi, stability_upper_bound(z, s));
  }
  report.gerschgorin_lower = g_lo;
  report.gerschgorin_upper = g_hi;

  constexpr double slack = 1e-10;
  report.pass = report.lambda_min >= constants.m1 - slack && report.lambda_max <= constants.m2 + slack &&
                report.lambda_min >= g_lo - slack && report.lambda_max <= g_hi + slack;
  return report;
}

// ---------------------------------------------------------------------------
// Quadratic-form probes

QuadraticForms quadratic_forms(const KernelTable& table, const TimeMesh& mesh,
                               std::span<const double> w, std::span<const double> v) {
  const int last = table.last_level();
  const std::size_t order = static_cast<std::size_t>(last - 1);
  if (w.size() != order || v.size() != order) {
    throw std::invalid_argument("probe vectors must have one entry per level 2..N");
  }
  auto at = [](std::span<const double> x, int k) { return x[static_cast<std::size_t>(k - 2)]; };

  QuadraticForms q{};
  for (int k = 2; k <= last; ++k) {
    const double wk = at(w, k);
    double conv = table.b0(k) * wk;
    if (k > 2) conv += table.b1(k) * at(w, k - 1);
    q.bdf2_form += 2.0 * wk * conv;
    q.bdf2_lower += stability_lower_bound(mesh.ratio(k), ratio_or_zero(mesh, k + 1)) * wk * wk / table.tau(k);
    q.scaled_norm_sq += table.tau(k) * wk * wk;

    double theta_w = 0.0;
    double theta_v = 0.0;
    for (int j = 2; j <= k; ++j) {
      const double th = table.theta(k, j);
      theta_w += th * at(w, j);
      theta_v += th * at(v, j);
    }
    q.doc_form += 2.0 * wk * theta_w;
    q.doc_cross += wk * theta_v;
    q.doc_form_v_half += at(v, k) * theta_v;
  }
  return q;
}

ProbeReport quadratic_form_probes(const TimeMesh& mesh, const StabilityConstants& constants,
                                  int trials, std::uint64_t seed) {
  require_ratios_within(mesh, constants.r_user);
  const int last = mesh.steps_count();
  const KernelTable table(mesh, last);
  const std::size_t order = static_cast<std::size_t>(last - 1);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> w(order), v(order);

  // Roundoff allowance relative to the magnitude of the compared sums.
  auto exceeds = [](double lhs, double rhs, double scale) { return lhs > rhs + 1e-12 * scale; };

  ProbeReport report;
  report.trials = trials;
  report.worst_lower_margin = std::numeric_limits<double>::max();
  for (int t = 0; t < trials; ++t) {
    for (auto& x : w) x = gauss(rng);
    for (auto& x : v) x = gauss(rng);
    const QuadraticForms q = quadratic_forms(table, mesh, w, v);

    if (exceeds(q.bdf2_lower, q.bdf2_form, std::abs(q.bdf2_lower) + std::abs(q.bdf2_form))) {
      ++report.positive_definite_violations;
    }
    const double scale = q.scaled_norm_sq + std::abs(q.doc_form);
    if (exceeds(constants.m1 / constants.m2 * q.scaled_norm_sq, q.doc_form, scale)) {
      ++report.sandwich_lower_violations;
    }
    if (exceeds(q.doc_form, constants.m3 * q.scaled_norm_sq, scale)) {
      ++report.sandwich_upper_violations;
    }
    if (q.scaled_norm_sq > 0.0) {
      const double ratio = q.doc_form / q.scaled_norm_sq;
      report.worst_lower_margin = std::min(report.worst_lower_margin, ratio);
      report.worst_upper_margin = std::max(report.worst_upper_margin, ratio);
    }
    for (double eps : {0.5, 1.0, 2.0}) {
      const double rhs = eps * q.doc_form_v_half + q.scaled_norm_sq / (2.0 * constants.m1 * eps);
      if (exceeds(q.doc_cross, rhs, std::abs(q.doc_cross) + std::abs(rhs))) {
        ++report.young_violations;
      }
    }
  }
  if (trials == 0) report.worst_lower_margin = 0.0;
  return report;
}

}  // namespace chstep
