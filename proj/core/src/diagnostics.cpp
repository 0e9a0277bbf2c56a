#include "chstep/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "chstep/errors.hpp"

namespace chstep {

double energy(const SpectralOps& ops, const ModelParams& params, const Field& phi) {
  const Grid& grid = ops.grid();
  double bulk = 0.0;
  for (double x : phi.values()) {
    const double w = x * x - 1.0;
    bulk += 0.25 * w * w;
  }
  bulk *= grid.cell_area();
  const double grad = ops.seminorm_h1(phi);
  return 0.5 * params.epsilon * params.epsilon * grad * grad + bulk;
}

double modified_energy(const SpectralOps& ops, const ModelParams& params, const Field& phi,
                       const Field& phi_prev, double tau_cur, double tau_next) {
  if (!(tau_cur > 0.0) || !(tau_next > 0.0)) throw NonPositiveStep("modified energy needs positive steps");
  const Grid& grid = ops.grid();
  Field rate = phi - phi_prev;
  rate *= 1.0 / tau_cur;
  const double reference =
      std::max(norm_l2(grid, phi), norm_l2(grid, phi_prev)) / tau_cur;
  const double hm1 = ops.norm_hm1(rate, reference);
  const double r = tau_next / tau_cur;
  const double weight = std::sqrt(r) * tau_next / (2.0 * params.kappa * (1.0 + r));
  return energy(ops, params, phi) + weight * hm1 * hm1;
}

std::vector<double> convergence_order(std::span<const double> errors, std::span<const double> steps) {
  if (errors.size() != steps.size()) throw std::invalid_argument("errors and steps differ in length");
  if (errors.size() < 2) throw std::invalid_argument("convergence order needs at least two refinements");
  std::vector<double> orders;
  orders.reserve(errors.size() - 1);
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    if (steps[i] == steps[i + 1]) {
      throw DegenerateRefinement("adjacent refinements share the same step size");
    }
    orders.push_back(std::log(errors[i] / errors[i + 1]) / std::log(steps[i] / steps[i + 1]));
  }
  return orders;
}

double scaling_fit(std::span<const double> times, std::span<const double> energies, double t_lo,
                   double t_hi, int samples) {
  if (times.size() != energies.size()) throw std::invalid_argument("times and energies differ in length");
  if (!(t_lo > 0.0) || !(t_hi > t_lo) || samples < 2) {
    throw InsufficientData("scaling fit needs 0 < t_lo < t_hi and at least two samples");
  }
  if (times.size() < 2 || times.front() > t_lo || times.back() < t_hi) {
    throw InsufficientData("record does not cover the fitting window");
  }
  // Interpolate log E linearly in log t on the covering segment.
  auto log_energy_at = [&](double t) {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - times.begin());
    if (hi == 0) hi = 1;
    if (hi >= times.size()) hi = times.size() - 1;
    const std::size_t lo = hi - 1;
    if (!(energies[lo] > 0.0) || !(energies[hi] > 0.0) || !(times[lo] > 0.0)) {
      throw InsufficientData("energies must be positive inside the fitting window");
    }
    const double x0 = std::log(times[lo]);
    const double x1 = std::log(times[hi]);
    const double y0 = std::log(energies[lo]);
    const double y1 = std::log(energies[hi]);
    const double s = (x1 == x0) ? 0.0 : (std::log(t) - x0) / (x1 - x0);
    return y0 + s * (y1 - y0);
  };

  const double a = std::log(t_lo);
  const double b = std::log(t_hi);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = a + (b - a) * i / (samples - 1);
    const double y = log_energy_at(std::exp(x));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = samples;
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw InsufficientData("degenerate fitting window");
  return (n * sxy - sx * sy) / denom;
}

double total_variation(std::span<const double> slice) {
  double tv = 0.0;
  for (std::size_t i = 0; i < slice.size(); ++i) {
    tv += std::abs(slice[(i + 1) % slice.size()] - slice[i]);
  }
  return tv;
}

void RunRecord::append(const RunRow& row) {
  if (!rows_.empty() && !(row.t > rows_.back().t)) {
    std::ostringstream msg;
    msg << "run record times must increase: " << row.t << " after " << rows_.back().t;
    throw std::invalid_argument(msg.str());
  }
  rows_.push_back(row);
}

std::vector<double> RunRecord::times() const {
  std::vector<double> t;
  t.reserve(rows_.size());
  for (const auto& r : rows_) t.push_back(r.t);
  return t;
}

std::vector<double> RunRecord::energies() const {
  std::vector<double> e;
  e.reserve(rows_.size());
  for (const auto& r : rows_) e.push_back(r.energy);
  return e;
}

void RunRecord::write_csv(std::ostream& out, bool include_wall_time) const {
  out << "n,t,tau,r,energy,modified_energy,volume,iters,wall_ms\n";
  out << std::setprecision(17);
  for (const auto& r : rows_) {
    out << r.n << ',' << r.t << ',' << r.tau << ',' << r.ratio << ',' << r.energy << ','
        << r.modified_energy << ',' << r.volume << ',' << r.iterations << ',';
    if (include_wall_time) out << std::setprecision(6) << r.wall_ms << std::setprecision(17);
    out << '\n';
  }
}

}  // namespace chstep
