#include "chstep/meshing.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "chstep/errors.hpp"

namespace chstep {

TimeMesh uniform_mesh(double final_time, int steps) {
  if (!(final_time > 0.0) || steps < 1) throw std::invalid_argument("uniform mesh needs T > 0 and N >= 1");
  std::vector<double> levels(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) levels[static_cast<std::size_t>(k)] = final_time * k / steps;
  levels.back() = final_time;
  return TimeMesh::from_levels(std::move(levels));
}

TimeMesh random_mesh(double final_time, int steps, std::uint64_t seed) {
  if (!(final_time > 0.0) || steps < 1) throw std::invalid_argument("random mesh needs T > 0 and N >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> sigma(static_cast<std::size_t>(steps));
  for (auto& s : sigma) {
    do {
      s = unit(rng);
    } while (s <= 0.0);
  }
  std::vector<double> levels(sigma.size() + 1, 0.0);
  double partial = 0.0;
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    partial += sigma[k];
    levels[k + 1] = partial;
  }
  const double total = partial;
  for (auto& t : levels) t = final_time * (t / total);
  levels.back() = final_time;
  return TimeMesh::from_levels(std::move(levels));
}

TimeMesh bounded_ratio_mesh(double final_time, int steps, double max_ratio, std::uint64_t seed) {
  if (!(final_time > 0.0) || steps < 1 || !(max_ratio > 1.0)) {
    throw std::invalid_argument("bounded-ratio mesh needs T > 0, N >= 1 and max_ratio > 1");
  }
  std::mt19937_64 rng(seed);
  const double span = std::log(max_ratio);
  std::uniform_real_distribution<double> log_ratio(-span, span);
  std::vector<double> log_tau(static_cast<std::size_t>(steps), 0.0);
  for (std::size_t k = 1; k < log_tau.size(); ++k) log_tau[k] = log_tau[k - 1] + log_ratio(rng);
  // Normalize in log space first so exp() cannot overflow.
  double peak = -std::numeric_limits<double>::infinity();
  for (double x : log_tau) peak = std::max(peak, x);
  std::vector<double> tau(log_tau.size());
  double total = 0.0;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    tau[k] = std::exp(log_tau[k] - peak);
    total += tau[k];
  }
  for (auto& x : tau) x *= final_time / total;
  return TimeMesh::from_steps(0.0, tau);
}

void AdaptiveConfig::validate() const {
  if (!(tau_min > 0.0) || !(tau_min <= tau_max)) throw std::invalid_argument("need 0 < tau_min <= tau_max");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (!(r_user > 0.0) || !(r_user < zero_stability_limit())) {
    throw std::invalid_argument("r_user must lie in (0, r_star)");
  }
}

double adaptive_next_step(const AdaptiveConfig& cfg, double tau_n, double rate) {
  if (!(tau_n > 0.0)) throw NonPositiveStep("adaptive controller needs tau_n > 0");
  if (!(rate >= 0.0)) throw std::invalid_argument("change rate must be nonnegative");
  const double tau_ada = std::max(cfg.tau_min, cfg.tau_max / std::sqrt(1.0 + cfg.beta * rate * rate));
  return std::min(tau_ada, cfg.r_user * tau_n);
}

double stability_cap(const ModelParams& params, double ratio, double r_user) {
  if (!(ratio > 0.0) || !(ratio <= r_user)) {
    std::ostringstream msg;
    msg << "stability cap needs 0 < r <= r_user, got r = " << ratio << ", r_user = " << r_user;
    throw OutOfDomain(msg.str());
  }
  const double scale = 4.0 * params.epsilon * params.epsilon / params.kappa;
  const double solvable = (1.0 + 2.0 * ratio) / (1.0 + ratio);
  return scale * std::min(solvable, stability_lower_bound(ratio, r_user));
}

double apply_stability_cap(const ModelParams& params, double tau_prev, double proposed, double r_user) {
  if (!(tau_prev > 0.0) || !(proposed > 0.0)) throw NonPositiveStep("steps must be positive");
  double tau = std::min(proposed, r_user * tau_prev);
  // The cap depends on the ratio the step itself forms; shrinking tau can
  // lower the cap again (for r < 1), so iterate to a fixed point.
  for (int it = 0; it < 200; ++it) {
    const double cap = stability_cap(params, tau / tau_prev, r_user);
    if (tau <= cap) return tau;
    tau = cap;
  }
  // The cap is bounded below by its minimum over r in (0, r_user].
  // R_L(., r_user) rises on (0, 1) and falls on (1, r_user), so its minimum
  // sits at an endpoint.
  const double floor_cap = 4.0 * params.epsilon * params.epsilon / params.kappa *
                           std::min({1.0, stability_lower_bound(0.0, r_user),
                                     stability_lower_bound(r_user, r_user)});
  return std::min(tau, floor_cap);
}

void write_mesh_csv(std::ostream& out, const TimeMesh& mesh) {
  out << "k,t,tau,r\n";
  out << std::setprecision(17);
  for (int k = 0; k <= mesh.steps_count(); ++k) {
    out << k << ',' << mesh.level(k) << ',';
    if (k >= 1) out << mesh.tau(k);
    out << ',';
    if (k >= 2) out << mesh.ratio(k);
    out << '\n';
  }
}

TimeMesh read_mesh_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("k,t,tau,r", 0) != 0) {
    throw std::runtime_error("mesh CSV must start with header k,t,tau,r");
  }
  std::vector<double> levels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string k_field, t_field;
    std::getline(row, k_field, ',');
    std::getline(row, t_field, ',');
    if (std::stoi(k_field) != static_cast<int>(levels.size())) {
      throw std::runtime_error("mesh CSV levels must be consecutive from 0");
    }
    levels.push_back(std::stod(t_field));
  }
  return TimeMesh::from_levels(std::move(levels));
}

}  // namespace chstep
