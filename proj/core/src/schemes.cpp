#include "chstep/schemes.hpp"

#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "chstep/errors.hpp"
#include "chstep/kernels.hpp"

namespace chstep {

void ModelParams::validate() const {
  if (!(kappa > 0.0)) throw std::invalid_argument("mobility kappa must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  if (!(length > 0.0)) throw std::invalid_argument("domain length must be positive");
  if (points < 4 || points % 2 != 0) throw std::invalid_argument("grid size must be even and >= 4");
}

// One implicit stage written as
//
//   a phi - kappa Delta [ -lin phi - grad eps^2 Delta phi + N(phi) ] = rhs.
//
// With -Delta -> lambda the stabilized iteration is
//
//   (a + kappa lambda (S - lin) + kappa grad eps^2 lambda^2) phi_new^
//       = rhs^ - kappa lambda (N(phi_old) - S phi_old)^.
//
// S = 0 is the plain splitting, whose symbol stays positive under the
// unique-solvability step bound; S > lin keeps it positive for any step.
struct CahnHilliardSolver::ImplicitProblem {
  double a = 0.0;
  double lin = 0.0;
  double grad = 0.0;
  double stabilizer = 0.0;
  // Writes N(phi) into out; empty means N = 0.
  std::function<void(const Field& phi, Field& out)> nonlinear;
  Field rhs;
};

namespace {

double cube(double x) { return x * x * x; }

}  // namespace

CahnHilliardSolver::CahnHilliardSolver(ModelParams params, FixedPointConfig config)
    : params_(params), config_(config), ops_((params.validate(), params.grid())) {
  if (!(config_.tol > 0.0) || config_.max_iters < 1) {
    throw std::invalid_argument("fixed-point config needs tol > 0 and max_iters >= 1");
  }
}

Field CahnHilliardSolver::chemical_potential(const Field& phi) const {
  Field mu = ops_.laplacian(phi);
  const double e2 = params_.epsilon * params_.epsilon;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    mu[k] = cube(phi[k]) - phi[k] - e2 * mu[k];
  }
  return mu;
}

Field CahnHilliardSolver::source_at(double t) const {
  if (!source_) return Field(params_.points, 0.0);
  return source_(t);
}

StepResult CahnHilliardSolver::solve(const ImplicitProblem& p, const Field& guess) const {
  const auto symbol = ops_.minus_laplacian_symbol();
  const double kappa = params_.kappa;
  const double e2 = params_.epsilon * params_.epsilon;
  const bool linear = config_.linear_only || !p.nonlinear;
  const double stab = linear ? 0.0 : p.stabilizer;

  std::vector<std::complex<double>> rhs_hat;
  ops_.forward_raw(p.rhs, rhs_hat);
  std::vector<double> denom(symbol.size());
  for (std::size_t k = 0; k < symbol.size(); ++k) {
    const double lam = symbol[k];
    denom[k] = p.a + kappa * lam * (stab - p.lin) + kappa * p.grad * e2 * lam * lam;
  }

  std::vector<std::complex<double>> work;
  StepResult out{Field(params_.points), 0};
  if (linear) {
    work = rhs_hat;
    for (std::size_t k = 0; k < work.size(); ++k) work[k] /= denom[k];
    ops_.inverse_raw(work, out.phi);
    out.iterations = 1;
    return out;
  }

  Field current = guess;
  Field lagged(params_.points);
  double increment = 0.0;
  for (int it = 1; it <= config_.max_iters; ++it) {
    p.nonlinear(current, lagged);
    lagged.axpy(-stab, current);
    ops_.forward_raw(lagged, work);
    for (std::size_t k = 0; k < work.size(); ++k) {
      work[k] = (rhs_hat[k] - kappa * symbol[k] * work[k]) / denom[k];
    }
    ops_.inverse_raw(work, out.phi);
    increment = max_abs_difference(out.phi, current);
    if (!std::isfinite(increment)) break;
    if (increment <= config_.tol) {
      out.iterations = it;
      return out;
    }
    std::swap(current, out.phi);
  }
  std::ostringstream msg;
  msg << "fixed-point iteration did not reach tol " << config_.tol << " in " << config_.max_iters
      << " iterations (last increment " << increment << ")";
  throw FixedPointDiverged(msg.str(), config_.max_iters, increment);
}

StepResult CahnHilliardSolver::bdf2_step(const SolverState& state) const {
  if (state.level < 2 || !state.phi_prev2) {
    throw std::invalid_argument("BDF2 step needs level >= 2 and two history levels");
  }
  return bdf2_step(state.phi_prev, *state.phi_prev2, state.tau_prev, state.tau_cur, state.t_new);
}

StepResult CahnHilliardSolver::bdf2_step(const Field& phi_prev, const Field& phi_prev2,
                                         double tau_prev, double tau_cur, double t_new) const {
  const Bdf2Coeffs b = bdf2_coeffs(tau_prev, tau_cur);
  ImplicitProblem p;
  p.a = b.b0;
  p.lin = 1.0;
  p.grad = 1.0;
  p.stabilizer = config_.stabilization;
  p.nonlinear = [](const Field& phi, Field& out) {
    for (std::size_t k = 0; k < phi.size(); ++k) out[k] = cube(phi[k]);
  };
  p.rhs = source_at(t_new);
  p.rhs.axpy(b.b0 - b.b1, phi_prev);
  p.rhs.axpy(b.b1, phi_prev2);
  return solve(p, phi_prev);
}

Defect CahnHilliardSolver::bdf2_defect(const SolverState& state, const Field& phi) const {
  if (!state.phi_prev2) throw std::invalid_argument("BDF2 defect needs two history levels");
  const Bdf2Coeffs b = bdf2_coeffs(state.tau_prev, state.tau_cur);
  Field residual = ops_.laplacian(chemical_potential(phi));
  residual *= -params_.kappa;
  residual.axpy(b.b0, phi);
  residual.axpy(b.b1 - b.b0, state.phi_prev);
  residual.axpy(-b.b1, *state.phi_prev2);
  residual -= source_at(state.t_new);

  Defect d;
  d.raw = residual.max_abs();

  // Map through the (stabilized) linear operator used by the solver.
  const auto symbol = ops_.minus_laplacian_symbol();
  const double e2 = params_.epsilon * params_.epsilon;
  const double stab = config_.linear_only ? 0.0 : config_.stabilization;
  std::vector<std::complex<double>> hat;
  ops_.forward_raw(residual, hat);
  for (std::size_t k = 0; k < hat.size(); ++k) {
    const double lam = symbol[k];
    hat[k] /= b.b0 + params_.kappa * lam * (stab - 1.0) + params_.kappa * e2 * lam * lam;
  }
  Field mapped(params_.points);
  ops_.inverse_raw(hat, mapped);
  d.preconditioned = mapped.max_abs();
  return d;
}

StepResult CahnHilliardSolver::bdf1_step(const Field& phi_prev, double tau, double t_new) const {
  if (!(tau > 0.0)) throw NonPositiveStep("BDF1 step needs tau > 0");
  ImplicitProblem p;
  p.a = 1.0 / tau;
  p.lin = 1.0;
  p.grad = 1.0;
  p.stabilizer = config_.stabilization;
  p.nonlinear = [](const Field& phi, Field& out) {
    for (std::size_t k = 0; k < phi.size(); ++k) out[k] = cube(phi[k]);
  };
  p.rhs = source_at(t_new);
  p.rhs.axpy(1.0 / tau, phi_prev);
  return solve(p, phi_prev);
}

StepResult CahnHilliardSolver::trapezoidal_step(const Field& phi_prev, double tau, double t_new) const {
  if (!(tau > 0.0)) throw NonPositiveStep("trapezoidal step needs tau > 0");
  ImplicitProblem p;
  p.a = 1.0 / tau;
  p.lin = 0.5;
  p.grad = 0.5;
  p.stabilizer = 0.5 * config_.stabilization;
  p.nonlinear = [](const Field& phi, Field& out) {
    for (std::size_t k = 0; k < phi.size(); ++k) out[k] = 0.5 * cube(phi[k]);
  };
  const double t_old = t_new - tau;
  p.rhs = ops_.laplacian(chemical_potential(phi_prev));
  p.rhs *= 0.5 * params_.kappa;
  p.rhs.axpy(1.0 / tau, phi_prev);
  if (source_) {
    p.rhs.axpy(0.5, source_(t_old));
    p.rhs.axpy(0.5, source_(t_new));
  }
  return solve(p, phi_prev);
}

std::pair<StepResult, StepResult> CahnHilliardSolver::tr_bdf2_start(const Field& phi0, double tau1,
                                                                    double tau2, double t0) const {
  StepResult first = trapezoidal_step(phi0, tau1, t0 + tau1);
  StepResult second = bdf2_step(first.phi, phi0, tau1, tau2, t0 + tau1 + tau2);
  return {std::move(first), std::move(second)};
}

StepResult CahnHilliardSolver::tr_bdf2_one_step(const Field& phi0, double tau, double t0) const {
  const double tau1 = kTrBdf2Gamma * tau;
  auto [stage, end] = tr_bdf2_start(phi0, tau1, tau - tau1, t0);
  end.iterations += stage.iterations;
  return std::move(end);
}

StepResult CahnHilliardSolver::sdirk2_start(const Field& phi0, double tau, double t0) const {
  if (!(tau > 0.0)) throw NonPositiveStep("SDIRK step needs tau > 0");
  constexpr double alpha = kSdirkAlpha;
  const double t_stage = t0 + alpha * tau;
  const double t_end = t0 + tau;

  // (phi_a - phi0) / (alpha tau) = kappa Delta mu(phi_a)
  StepResult stage = bdf1_step(phi0, alpha * tau, t_stage);

  // (phi1 - phi0) / tau = alpha kappa Delta mu(phi1) + (1 - alpha) kappa Delta mu(phi_a)
  ImplicitProblem p;
  p.a = 1.0 / tau;
  p.lin = alpha;
  p.grad = alpha;
  p.stabilizer = alpha * config_.stabilization;
  p.nonlinear = [](const Field& phi, Field& out) {
    for (std::size_t k = 0; k < phi.size(); ++k) out[k] = alpha * cube(phi[k]);
  };
  p.rhs = ops_.laplacian(chemical_potential(stage.phi));
  p.rhs *= (1.0 - alpha) * params_.kappa;
  p.rhs.axpy(1.0 / tau, phi0);
  if (source_) {
    p.rhs.axpy(alpha, source_(t_end));
    p.rhs.axpy(1.0 - alpha, source_(t_stage));
  }
  StepResult out = solve(p, stage.phi);
  out.iterations += stage.iterations;
  return out;
}

StepResult CahnHilliardSolver::cn_step(const Field& phi_prev, double tau, double t_new) const {
  if (!(tau > 0.0)) throw NonPositiveStep("CN step needs tau > 0");
  const double e2 = params_.epsilon * params_.epsilon;
  ImplicitProblem p;
  p.a = 1.0 / tau;
  p.lin = 0.5;
  p.grad = 0.5;
  p.stabilizer = 0.5 * config_.stabilization;
  // (phi^2 + q^2)/2 * (phi + q)/2
  p.nonlinear = [&phi_prev](const Field& phi, Field& out) {
    for (std::size_t k = 0; k < phi.size(); ++k) {
      const double a = phi[k];
      const double q = phi_prev[k];
      out[k] = 0.25 * (a * a + q * q) * (a + q);
    }
  };
  // Explicit half of mu: -q/2 - eps^2/2 Delta q.
  Field explicit_mu = ops_.laplacian(phi_prev);
  explicit_mu *= -0.5 * e2;
  explicit_mu.axpy(-0.5, phi_prev);
  p.rhs = ops_.laplacian(explicit_mu);
  p.rhs *= params_.kappa;
  p.rhs.axpy(1.0 / tau, phi_prev);
  if (source_) p.rhs += source_(t_new - 0.5 * tau);
  return solve(p, phi_prev);
}

StepResult CahnHilliardSolver::cncs_step(const Field& phi_prev, const Field& phi_prev2, double tau,
                                         double t_new) const {
  if (!(tau > 0.0)) throw NonPositiveStep("CNCS step needs tau > 0");
  const double e2 = params_.epsilon * params_.epsilon;
  ImplicitProblem p;
  p.a = 1.0 / tau;
  p.lin = 0.0;
  p.grad = 0.75;
  p.stabilizer = 0.5 * config_.stabilization;
  p.nonlinear = [&phi_prev](const Field& phi, Field& out) {
    for (std::size_t k = 0; k < phi.size(); ++k) {
      const double a = phi[k];
      const double q = phi_prev[k];
      out[k] = 0.25 * (a * a + q * q) * (a + q);
    }
  };
  // Explicit part of mu: -(3 q - q2)/2 - eps^2/4 Delta q2.
  Field explicit_mu = ops_.laplacian(phi_prev2);
  explicit_mu *= -0.25 * e2;
  explicit_mu.axpy(-1.5, phi_prev);
  explicit_mu.axpy(0.5, phi_prev2);
  p.rhs = ops_.laplacian(explicit_mu);
  p.rhs *= params_.kappa;
  p.rhs.axpy(1.0 / tau, phi_prev);
  if (source_) p.rhs += source_(t_new - 0.5 * tau);
  return solve(p, phi_prev);
}

StepResult CahnHilliardSolver::convex_splitting_first_step(const Field& phi_prev, double tau,
                                                           double t_new) const {
  if (!(tau > 0.0)) throw NonPositiveStep("convex-splitting step needs tau > 0");
  ImplicitProblem p;
  p.a = 1.0 / tau;
  p.lin = 0.0;
  p.grad = 1.0;
  p.stabilizer = config_.stabilization;
  p.nonlinear = [](const Field& phi, Field& out) {
    for (std::size_t k = 0; k < phi.size(); ++k) out[k] = cube(phi[k]);
  };
  p.rhs = ops_.laplacian(phi_prev);
  p.rhs *= -params_.kappa;
  p.rhs.axpy(1.0 / tau, phi_prev);
  p.rhs += source_at(t_new);
  return solve(p, phi_prev);
}

// ---------------------------------------------------------------------------

ManufacturedSolution::ManufacturedSolution(const ModelParams& params)
    : params_(params), ops_(std::make_shared<SpectralOps>(params.grid())) {
  params_.validate();
  base_ = Field::from_function(ops_->grid(), [](double x, double y) { return std::sin(x) * std::sin(y); });
}

Field ManufacturedSolution::exact(double t) const { return std::cos(t) * base_; }

Field ManufacturedSolution::source(double t) const {
  const Field phi = exact(t);
  const double e2 = params_.epsilon * params_.epsilon;
  Field mu = ops_->laplacian(phi);
  for (std::size_t k = 0; k < mu.size(); ++k) mu[k] = cube(phi[k]) - phi[k] - e2 * mu[k];
  Field g = ops_->laplacian(mu);
  g *= -params_.kappa;
  g.axpy(-std::sin(t), base_);
  return g;
}

Source ManufacturedSolution::make_source(const ModelParams& params) {
  auto shared = std::make_shared<const ManufacturedSolution>(params);
  return [shared](double t) { return shared->source(t); };
}

}  // namespace chstep
