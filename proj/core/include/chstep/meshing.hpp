#pragma once

#include <cstdint>
#include <iosfwd>

#include "chstep/kernels.hpp"
#include "chstep/schemes.hpp"

namespace chstep {

/// N equal steps T/N starting at t = 0; t_N = T exactly.
TimeMesh uniform_mesh(double final_time, int steps);

/// Random mesh tau_k = T sigma_k / S with sigma_k ~ U(0, 1) drawn from a
/// seeded mt19937_64 and S = sum sigma_k. Deterministic per seed.
TimeMesh random_mesh(double final_time, int steps, std::uint64_t seed);

/// Random mesh whose ratios are log-uniform in [1/max_ratio, max_ratio],
/// rescaled so that t_N = T. Used to sample meshes satisfying a ratio cap.
TimeMesh bounded_ratio_mesh(double final_time, int steps, double max_ratio, std::uint64_t seed);

struct AdaptiveConfig {
  double tau_min = 1e-4;
  double tau_max = 1e-1;
  double beta = 1e3;
  double r_user = 4.0;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

/// tau_ada = max{tau_min, tau_max / sqrt(1 + beta rate^2)};
/// returns min{tau_ada, r_user * tau_n}.
double adaptive_next_step(const AdaptiveConfig& cfg, double tau_n, double rate);

/// Largest step allowed at level n by the energy-dissipation step condition,
/// (4 eps^2 / kappa) min{(1+2r)/(1+r), R_L(r, r_user)}, with the unknown
/// next ratio replaced by r_user. Throws OutOfDomain unless 0 < r <= r_user.
double stability_cap(const ModelParams& params, double ratio, double r_user);

/// Shrinks a proposed step until it satisfies stability_cap for the ratio it
/// forms with tau_prev. Returns the accepted step.
double apply_stability_cap(const ModelParams& params, double tau_prev, double proposed, double r_user);

/// CSV rows "k,t,tau,r" (tau and r empty where undefined).
void write_mesh_csv(std::ostream& out, const TimeMesh& mesh);
TimeMesh read_mesh_csv(std::istream& in);

}  // namespace chstep
