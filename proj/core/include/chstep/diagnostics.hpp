#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "chstep/schemes.hpp"
#include "chstep/spectral_grid.hpp"

namespace chstep {

/// E[phi] = eps^2/2 ||grad_h phi||^2 + <F(phi), 1> with F(phi) = (phi^2 - 1)^2 / 4.
double energy(const SpectralOps& ops, const ModelParams& params, const Field& phi);

/// Modified energy at level k:
///   E[phi^k] + sqrt(r_{k+1}) tau_{k+1} / (2 kappa (1 + r_{k+1})) ||(phi^k - phi^{k-1}) / tau_k||_{-1}^2
/// with r_{k+1} = tau_{k+1} / tau_k. Throws NonZeroMean if the increment is
/// not mean-zero relative to the size of the two levels.
double modified_energy(const SpectralOps& ops, const ModelParams& params, const Field& phi,
                       const Field& phi_prev, double tau_cur, double tau_next);

/// Order_i = log(e_i / e_{i+1}) / log(tau_i / tau_{i+1}) for adjacent pairs.
/// Throws DegenerateRefinement if two adjacent step sizes coincide and
/// std::invalid_argument for mismatched or too-short inputs.
std::vector<double> convergence_order(std::span<const double> errors, std::span<const double> steps);

/// Least-squares slope of log E against log t over [t_lo, t_hi].
///
/// The record is resampled at `samples` points uniformly spaced in log t
/// (linear interpolation in log-log coordinates) before fitting. Throws
/// InsufficientData unless the record covers the window with positive
/// energies and at least two distinct samples.
double scaling_fit(std::span<const double> times, std::span<const double> energies, double t_lo,
                   double t_hi, int samples = 200);

/// sum_i |v_{i+1} - v_i| over a periodic slice.
double total_variation(std::span<const double> slice);

/// One row of a run history.
struct RunRow {
  int n = 0;
  double t = 0.0;
  double tau = 0.0;
  double ratio = 0.0;
  double energy = 0.0;
  double modified_energy = 0.0;
  double volume = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
};

/// Per-level history; rows are kept in strictly increasing time.
class RunRecord {
 public:
  /// Throws std::invalid_argument if row.t does not exceed the last time.
  void append(const RunRow& row);
  std::span<const RunRow> rows() const noexcept { return rows_; }
  std::span<RunRow> rows() noexcept { return rows_; }
  bool empty() const noexcept { return rows_.empty(); }
  std::size_t size() const noexcept { return rows_.size(); }
  const RunRow& back() const { return rows_.back(); }

  std::vector<double> times() const;
  std::vector<double> energies() const;

  /// Header: n,t,tau,r,energy,modified_energy,volume,iters,wall_ms
  void write_csv(std::ostream& out, bool include_wall_time = true) const;

 private:
  std::vector<RunRow> rows_;
};

}  // namespace chstep
