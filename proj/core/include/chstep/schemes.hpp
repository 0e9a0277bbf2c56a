#pragma once

#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <utility>

#include "chstep/spectral_grid.hpp"

namespace chstep {

/// Cahn-Hilliard model instance: d_t phi = kappa Delta mu with
/// mu = phi^3 - phi - eps^2 Delta phi on the periodic square (0, L)^2.
struct ModelParams {
  double kappa = 0.01;
  double epsilon = 0.05;
  double length = 2.0 * std::numbers::pi;
  int points = 128;

  /// Throws std::invalid_argument unless kappa > 0, 0 < epsilon < 1, M even >= 4.
  void validate() const;
  Grid grid() const { return Grid(length, points); }
};

struct FixedPointConfig {
  double tol = 1e-12;   ///< max-norm bound on the iterate increment
  int max_iters = 500;
  /// Multiple S of phi moved to the implicit side per unit weight of the
  /// cubic term, lagging phi^3 - S phi instead of phi^3. 0 is the plain
  /// splitting; 1.5 (half of sup 3 phi^2 on |phi| <= 1) roughly halves the
  /// iteration count. The converged solution does not depend on S.
  double stabilization = 0.0;
  /// Testing hook: drop the cubic term so every solve is linear.
  bool linear_only = false;
};

struct StepResult {
  Field phi;
  int iterations = 0;
};

/// External source g(t) added to the right-hand side of every scheme.
using Source = std::function<Field(double t)>;

/// Inputs of one variable-step BDF2 step at level n >= 2.
struct SolverState {
  Field phi_prev;                  ///< phi^{n-1}
  std::optional<Field> phi_prev2;  ///< phi^{n-2}; absent before level 2
  double tau_prev = 0.0;           ///< tau_{n-1}
  double tau_cur = 0.0;            ///< tau_n
  double t_new = 0.0;              ///< t_n, used only to evaluate the source
  int level = 2;
};

/// Residuals of a BDF2 step evaluated at a candidate solution.
struct Defect {
  double raw = 0.0;            ///< max |b0 (phi - phi1) + b1 (phi1 - phi2) - kappa Delta mu - g|
  double preconditioned = 0.0; ///< max norm of the raw residual mapped through the solver's linear operator
};

/// Time steppers for the pseudo-spectral Cahn-Hilliard system.
///
/// Every implicit stage is solved by a fixed-point iteration: terms linear
/// in the unknown (plus an optional stabilizing multiple of it) are inverted
/// diagonally in Fourier space and only the cubic remainder lags one iterate
/// behind. The iteration starts from the previous level and
/// stops once the max-norm increment drops below FixedPointConfig::tol; it
/// throws FixedPointDiverged after max_iters.
///
/// One instance owns one SpectralOps workspace and is not thread-safe.
class CahnHilliardSolver {
 public:
  explicit CahnHilliardSolver(ModelParams params, FixedPointConfig config = {});

  const ModelParams& params() const noexcept { return params_; }
  const Grid& grid() const noexcept { return ops_.grid(); }
  const SpectralOps& ops() const noexcept { return ops_; }
  const FixedPointConfig& config() const noexcept { return config_; }
  void set_config(const FixedPointConfig& config) { config_ = config; }

  void set_source(Source source) { source_ = std::move(source); }
  bool has_source() const noexcept { return static_cast<bool>(source_); }

  /// mu = phi^3 - phi - eps^2 Delta_h phi (collocation cube).
  Field chemical_potential(const Field& phi) const;

  /// Variable-step BDF2: b0 (phi - phi^{n-1}) + b1 (phi^{n-1} - phi^{n-2}) = kappa Delta_h mu(phi).
  StepResult bdf2_step(const SolverState& state) const;
  StepResult bdf2_step(const Field& phi_prev, const Field& phi_prev2, double tau_prev,
                       double tau_cur, double t_new) const;

  /// Backward Euler.
  StepResult bdf1_step(const Field& phi_prev, double tau, double t_new) const;

  /// Trapezoidal rule with mu at both ends: (phi - phi0)/tau = kappa/2 Delta (mu + mu0).
  StepResult trapezoidal_step(const Field& phi_prev, double tau, double t_new) const;

  /// Trapezoidal step over tau1 followed by a BDF2 step over tau2; returns
  /// (phi^1, phi^2). With tau2 / tau1 = sqrt(2)/2 this is TR-BDF2 with
  /// gamma = tau1 / (tau1 + tau2) = 2 - sqrt(2).
  std::pair<StepResult, StepResult> tr_bdf2_start(const Field& phi0, double tau1, double tau2,
                                                  double t0) const;

  /// One-step TR-BDF2 over tau: tr_bdf2_start with tau1 = gamma tau,
  /// tau2 = (1 - gamma) tau, gamma = 2 - sqrt(2). Returns the level at t0 + tau.
  StepResult tr_bdf2_one_step(const Field& phi0, double tau, double t0) const;

  /// Two-stage SDIRK with alpha = (2 - sqrt 2)/2.
  StepResult sdirk2_start(const Field& phi0, double tau, double t0) const;

  /// Crank-Nicolson with mu^{n-1/2} = (phi^2 + phi_prev^2)/2 phi^{n-1/2} - phi^{n-1/2} - eps^2 Delta phi^{n-1/2}.
  StepResult cn_step(const Field& phi_prev, double tau, double t_new) const;

  /// Crank-Nicolson convex splitting (uniform steps) with
  /// phi_hat = (3 phi + phi^{n-2})/4 and phi_check = (3 phi^{n-1} - phi^{n-2})/2.
  StepResult cncs_step(const Field& phi_prev, const Field& phi_prev2, double tau, double t_new) const;

  /// First-order convex splitting: (phi - phi0)/tau = kappa Delta (phi^3 - phi0 - eps^2 Delta phi).
  StepResult convex_splitting_first_step(const Field& phi_prev, double tau, double t_new) const;

  /// Residual of the BDF2 equation at `phi`.
  Defect bdf2_defect(const SolverState& state, const Field& phi) const;

  static constexpr double kTrBdf2Gamma = 2.0 - std::numbers::sqrt2;
  static constexpr double kSdirkAlpha = (2.0 - std::numbers::sqrt2) / 2.0;

 private:
  struct ImplicitProblem;
  StepResult solve(const ImplicitProblem& problem, const Field& guess) const;
  Field source_at(double t) const;

  ModelParams params_;
  FixedPointConfig config_;
  SpectralOps ops_;
  Source source_;
};

/// Smooth exact solution cos(t) sin(x) sin(y) on (0, 2 pi)^2 and the
/// matching source g = d_t Phi - kappa Delta_h (Phi^3 - Phi - eps^2 Delta_h Phi),
/// built with the discrete operators so the semi-discrete system is solved exactly.
class ManufacturedSolution {
 public:
  explicit ManufacturedSolution(const ModelParams& params);

  Field exact(double t) const;
  Field source(double t) const;
  /// A Source bound to a shared copy of this object.
  static Source make_source(const ModelParams& params);

 private:
  ModelParams params_;
  std::shared_ptr<SpectralOps> ops_;
  Field base_;  // sin(x) sin(y)
};

}  // namespace chstep
