#include "chstep/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "chstep/errors.hpp"
#include "chstep/io.hpp"

#ifndef CHSTEP_VERSION
#define CHSTEP_VERSION "unknown"
#endif

namespace chstep {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

template <class Enum, std::size_t N>
Enum parse_name(std::string_view name, const std::pair<Enum, std::string_view> (&table)[N],
                std::string_view what) {
  for (const auto& [value, label] : table) {
    if (label == name) return value;
  }
  throw std::invalid_argument("unknown " + std::string(what) + " '" + std::string(name) + "'");
}

constexpr std::pair<ExperimentKind, std::string_view> kExperimentNames[] = {
    {ExperimentKind::accuracy, "accuracy"}, {ExperimentKind::compare, "compare"},
    {ExperimentKind::adaptive, "adaptive"}, {ExperimentKind::coarsen, "coarsen"},
    {ExperimentKind::certify, "certify"}};
constexpr std::pair<MeshKind, std::string_view> kMeshNames[] = {
    {MeshKind::uniform, "uniform"}, {MeshKind::random, "random"}, {MeshKind::adaptive, "adaptive"}};
constexpr std::pair<SchemeKind, std::string_view> kSchemeNames[] = {
    {SchemeKind::bdf2, "bdf2"}, {SchemeKind::cn, "cn"}, {SchemeKind::cncs, "cncs"}};
constexpr std::pair<StarterKind, std::string_view> kStarterNames[] = {
    {StarterKind::tr_bdf2, "tr_bdf2"}, {StarterKind::sdirk2, "sdirk2"}, {StarterKind::bdf1, "bdf1"}};

template <class Enum, std::size_t N>
std::string_view name_of(Enum value, const std::pair<Enum, std::string_view> (&table)[N]) {
  for (const auto& [v, label] : table) {
    if (v == value) return label;
  }
  return "?";
}

/// Compact decimal label for file names: 0.1 -> "0.1", 1e-3 -> "0.001".
std::string number_label(double x) {
  std::ostringstream s;
  s << std::setprecision(12) << std::fixed << x;
  std::string text = s.str();
  text.erase(text.find_last_not_of('0') + 1);
  if (!text.empty() && text.back() == '.') text.pop_back();
  return text;
}

bool reached(double time, double target) {
  return time >= target - 1e-9 * std::max(1.0, std::abs(target));
}

/// Shortens tau so the step ends on `remaining` without leaving a sliver
/// shorter than tau_min before the target.
double fit_to_target(double tau, double remaining, double tau_min, double bound) {
  if (remaining <= tau) return remaining;
  if (remaining - tau >= tau_min) return tau;
  if (remaining <= bound) return remaining;
  if (remaining - tau_min >= tau_min) return remaining - tau_min;
  return 0.5 * remaining;
}

/// Proposes the next step given the marcher state and the distance to the next target.
using Proposer = std::function<double(const Marcher&, double remaining)>;
using SnapshotHook = std::function<void(const Marcher&)>;

struct Simulation {
  RunRecord record;
  std::vector<double> steps;
  double max_volume_drift = 0.0;
  int rejections = 0;
  double seconds = 0.0;
};

Simulation simulate(const CahnHilliardSolver& solver, const Field& phi0, SchemeKind scheme,
                    StarterKind starter, int max_rejections, double final_time,
                    std::vector<double> targets, const Proposer& propose,
                    const SnapshotHook& on_target = {}) {
  std::sort(targets.begin(), targets.end());
  std::erase_if(targets, [&](double t) { return !(t > 0.0) || t > final_time; });
  if (targets.empty() || !reached(targets.back(), final_time)) targets.push_back(final_time);

  const auto start = Clock::now();
  Marcher marcher(solver, phi0, scheme, starter, max_rejections);
  RecordBuilder builder(solver.ops(), solver.params());
  builder.push(marcher, 0.0);
  const double volume0 = volume(solver.grid(), phi0);

  Simulation sim;
  std::size_t next = 0;
  while (next < targets.size()) {
    const double remaining = targets[next] - marcher.time();
    const double tau = propose(marcher, remaining);
    const auto step_start = Clock::now();
    const double taken = marcher.step(tau);
    builder.push(marcher, elapsed_ms(step_start));
    sim.steps.push_back(taken);
    sim.max_volume_drift =
        std::max(sim.max_volume_drift, std::abs(volume(solver.grid(), marcher.current()) - volume0));
    while (next < targets.size() && reached(marcher.time(), targets[next])) {
      if (on_target) on_target(marcher);
      ++next;
    }
  }
  sim.rejections = marcher.rejections();
  sim.record = builder.finish();
  sim.seconds = elapsed_ms(start) / 1000.0;
  return sim;
}

Proposer uniform_proposer(double step) {
  return [step](const Marcher&, double) { return step; };
}

Proposer adaptive_proposer(const AdaptiveConfig& cfg, const ModelParams& params, bool energy_safe) {
  return [cfg, params, energy_safe](const Marcher& m, double remaining) {
    if (m.level() == 0) return fit_to_target(cfg.tau_min, remaining, cfg.tau_min, cfg.tau_max);
    const double last = m.last_step();
    double tau = adaptive_next_step(cfg, last, m.change_rate());
    double bound = std::min(cfg.tau_max, cfg.r_user * last);
    if (energy_safe) {
      tau = apply_stability_cap(params, last, tau, cfg.r_user);
      bound = apply_stability_cap(params, last, bound, cfg.r_user);
    }
    return fit_to_target(tau, remaining, cfg.tau_min, bound);
  };
}

void write_record(const std::filesystem::path& path, const RunRecord& record) {
  auto out = open_output(path);
  record.write_csv(out);
}

void write_manifest(const ExperimentConfig& config, const std::vector<std::string>& outputs,
                    const nlohmann::json& summary) {
  nlohmann::json m;
  m["experiment"] = to_string(config.kind);
  m["version"] = library_version();
  m["seed"] = config.seed;
  m["grid"] = {{"M", config.model.points}, {"L", config.model.length}};
  m["scheme"] = to_string(config.scheme);
  m["starter"] = to_string(config.starter);
  m["config"] = nlohmann::json::parse(config.to_json());
  m["outputs"] = outputs;
  m["summary"] = summary;
  write_text(config.out_dir / "manifest.json", m.dump(2) + "\n");
}

std::vector<double> mid_row_slice(const Field& phi) {
  const int m = phi.points();
  std::vector<double> slice(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) slice[static_cast<std::size_t>(i)] = phi(i, m / 2);
  return slice;
}

int uniform_step_count(double final_time, double step) {
  const double n = final_time / step;
  const long rounded = std::lround(n);
  if (rounded < 1 || std::abs(n - static_cast<double>(rounded)) > 1e-9 * n) {
    std::ostringstream msg;
    msg << "uniform step " << step << " does not divide final time " << final_time;
    throw std::invalid_argument(msg.str());
  }
  return static_cast<int>(rounded);
}

}  // namespace

std::string_view to_string(ExperimentKind kind) { return name_of(kind, kExperimentNames); }
std::string_view to_string(MeshKind kind) { return name_of(kind, kMeshNames); }
std::string_view to_string(SchemeKind kind) { return name_of(kind, kSchemeNames); }
std::string_view to_string(StarterKind kind) { return name_of(kind, kStarterNames); }
ExperimentKind parse_experiment(std::string_view name) { return parse_name(name, kExperimentNames, "experiment"); }
MeshKind parse_mesh(std::string_view name) { return parse_name(name, kMeshNames, "mesh"); }
SchemeKind parse_scheme(std::string_view name) { return parse_name(name, kSchemeNames, "scheme"); }
StarterKind parse_starter(std::string_view name) { return parse_name(name, kStarterNames, "starter"); }

std::string_view library_version() { return CHSTEP_VERSION; }

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::accuracy:
      c.model = ModelParams{1.0, std::sqrt(0.5), 2.0 * std::numbers::pi, 32};
      c.mesh = MeshKind::random;
      c.final_time = 1.0;
      break;
    case ExperimentKind::compare:
      c.mesh = MeshKind::uniform;
      c.final_time = 0.1;
      break;
    case ExperimentKind::adaptive:
      c.mesh = MeshKind::adaptive;
      c.final_time = 30.0;
      break;
    case ExperimentKind::coarsen:
      c.mesh = MeshKind::adaptive;
      c.final_time = 500.0;
      c.adaptive.beta = 1e3;
      break;
    case ExperimentKind::certify:
      c.mesh = MeshKind::random;
      c.final_time = 1.0;
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  model.validate();
  adaptive.validate();
  if (!(final_time > 0.0)) throw std::invalid_argument("final_time must be positive");
  if (!(solver.stabilization >= 0.0)) throw std::invalid_argument("stabilization must be nonnegative");
  if (!(solver.tol > 0.0) || solver.max_iters < 1) throw std::invalid_argument("solver tol and max_iters must be positive");
  if (max_rejections < 0) throw std::invalid_argument("max_rejections must be nonnegative");
  switch (kind) {
    case ExperimentKind::accuracy:
      if (mesh == MeshKind::adaptive) throw std::invalid_argument("accuracy runs need a uniform or random mesh");
      if (step_counts.size() < 2) throw std::invalid_argument("accuracy runs need at least two step counts");
      for (int n : step_counts) {
        if (n < 2) throw std::invalid_argument("accuracy step counts must be >= 2");
      }
      break;
    case ExperimentKind::compare:
      if (step_sizes.empty() || schemes.empty()) throw std::invalid_argument("compare needs step sizes and schemes");
      for (double s : step_sizes) uniform_step_count(final_time, s);
      uniform_step_count(final_time, reference_step);
      break;
    case ExperimentKind::adaptive:
      if (betas.empty()) throw std::invalid_argument("adaptive runs need at least one beta");
      for (double b : betas) {
        if (!(b > 0.0)) throw std::invalid_argument("beta must be positive");
      }
      if (adaptive_reference) uniform_step_count(final_time, reference_step);
      break;
    case ExperimentKind::coarsen:
      if (mesh == MeshKind::random) throw std::invalid_argument("coarsening runs need a uniform or adaptive mesh");
      if (mesh == MeshKind::uniform) uniform_step_count(final_time, step);
      if (mesh == MeshKind::adaptive && scheme != SchemeKind::bdf2) {
        throw std::invalid_argument("only bdf2 supports variable steps");
      }
      if (!(fit_t_lo > 0.0) || !(fit_t_hi > fit_t_lo)) throw std::invalid_argument("need 0 < fit_t_lo < fit_t_hi");
      break;
    case ExperimentKind::certify:
      if (mesh_files.empty() && (certify_meshes < 0 || certify_steps < 2 || !(certify_max_ratio > 1.0))) {
        throw std::invalid_argument("certify needs meshes >= 0, steps >= 2 and max ratio > 1");
      }
      break;
  }
}

std::string ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["experiment"] = to_string(kind);
  j["kappa"] = model.kappa;
  j["epsilon"] = model.epsilon;
  j["length"] = model.length;
  j["grid"] = model.points;
  j["mesh"] = to_string(mesh);
  j["scheme"] = to_string(scheme);
  j["starter"] = to_string(starter);
  j["tol"] = solver.tol;
  j["max_iters"] = solver.max_iters;
  j["stabilization"] = solver.stabilization;
  j["seed"] = seed;
  j["out"] = out_dir.string();
  j["final_time"] = final_time;
  j["step"] = step;
  j["step_counts"] = step_counts;
  j["step_sizes"] = step_sizes;
  std::vector<std::string> scheme_names;
  for (auto s : schemes) scheme_names.emplace_back(to_string(s));
  j["schemes"] = scheme_names;
  j["reference_step"] = reference_step;
  j["adaptive_reference"] = adaptive_reference;
  j["tau_min"] = adaptive.tau_min;
  j["tau_max"] = adaptive.tau_max;
  j["beta"] = adaptive.beta;
  j["r_user"] = adaptive.r_user;
  j["betas"] = betas;
  j["energy_safe"] = energy_safe;
  j["max_rejections"] = max_rejections;
  j["snapshot_times"] = snapshot_times;
  j["fit_t_lo"] = fit_t_lo;
  j["fit_t_hi"] = fit_t_hi;
  j["certify_meshes"] = certify_meshes;
  j["certify_steps"] = certify_steps;
  j["certify_max_ratio"] = certify_max_ratio;
  j["certify_probe_trials"] = certify_probe_trials;
  std::vector<std::string> files;
  for (const auto& f : mesh_files) files.push_back(f.string());
  j["mesh_files"] = files;
  return j.dump();
}

// ---------------------------------------------------------------------------

Marcher::Marcher(const CahnHilliardSolver& solver, Field phi0, SchemeKind scheme,
                 StarterKind starter, int max_rejections, double t0)
    : solver_(&solver),
      scheme_(scheme),
      starter_(starter),
      max_rejections_(max_rejections),
      current_(std::move(phi0)),
      previous_(current_),
      time_(t0) {
  if (current_.points() != solver.grid().points()) throw std::invalid_argument("initial field does not match grid");
}

StepResult Marcher::attempt(double tau) const {
  const double t_new = time_ + tau;
  if (level_ == 0) {
    switch (scheme_) {
      case SchemeKind::cn:
        return solver_->cn_step(current_, tau, t_new);
      case SchemeKind::cncs:
        return solver_->convex_splitting_first_step(current_, tau, t_new);
      case SchemeKind::bdf2:
        switch (starter_) {
          case StarterKind::tr_bdf2:
            return solver_->tr_bdf2_one_step(current_, tau, time_);
          case StarterKind::sdirk2:
            return solver_->sdirk2_start(current_, tau, time_);
          case StarterKind::bdf1:
            return solver_->bdf1_step(current_, tau, t_new);
        }
    }
  }
  switch (scheme_) {
    case SchemeKind::cn:
      return solver_->cn_step(current_, tau, t_new);
    case SchemeKind::cncs:
      if (std::abs(tau - tau_cur_) > 1e-12 * tau) throw std::invalid_argument("cncs needs uniform steps");
      return solver_->cncs_step(current_, previous_, tau, t_new);
    case SchemeKind::bdf2:
      break;
  }
  return solver_->bdf2_step(current_, previous_, tau_cur_, tau, t_new);
}

double Marcher::step(double tau) {
  if (!(tau > 0.0)) throw NonPositiveStep("step size must be positive");
  for (int attempt_no = 0;; ++attempt_no) {
    try {
      StepResult result = attempt(tau);
      previous_ = std::move(current_);
      current_ = std::move(result.phi);
      time_ += tau;
      tau_prev_ = tau_cur_;
      tau_cur_ = tau;
      iterations_ = result.iterations;
      ++level_;
      return tau;
    } catch (const FixedPointDiverged&) {
      if (attempt_no >= max_rejections_ || scheme_ == SchemeKind::cncs) throw;
      ++rejections_;
      tau *= 0.5;
    }
  }
}

double Marcher::change_rate() const {
  if (level_ == 0) return 0.0;
  return norm_l2(solver_->grid(), current_ - previous_) / tau_cur_;
}

RecordBuilder::RecordBuilder(const SpectralOps& ops, const ModelParams& params)
    : ops_(&ops), params_(params) {}

void RecordBuilder::push(const Marcher& marcher, double wall_ms) {
  if (record_.size() >= 2) {
    RunRow& last = record_.rows().back();
    last.modified_energy =
        modified_energy(*ops_, params_, last_, before_last_, last_tau_, marcher.last_step());
  }
  RunRow row;
  row.n = marcher.level();
  row.t = marcher.time();
  row.tau = marcher.last_step();
  row.ratio = marcher.last_ratio();
  row.energy = energy(*ops_, params_, marcher.current());
  row.modified_energy = row.energy;
  row.volume = volume(ops_->grid(), marcher.current());
  row.iterations = marcher.last_iterations();
  row.wall_ms = wall_ms;
  record_.append(row);
  last_ = marcher.current();
  before_last_ = marcher.previous();
  last_tau_ = marcher.last_step();
}

RunRecord RecordBuilder::finish() { return std::move(record_); }

// ---------------------------------------------------------------------------

AccuracyResult run_accuracy(const ExperimentConfig& config) {
  config.validate();
  CahnHilliardSolver solver(config.model, config.solver);
  const ManufacturedSolution exact(config.model);
  solver.set_source(ManufacturedSolution::make_source(config.model));
  const Grid& grid = solver.grid();
  const double r_star = zero_stability_limit();

  AccuracyResult result;
  std::vector<double> errors, steps;
  std::vector<std::string> outputs;
  for (std::size_t idx = 0; idx < config.step_counts.size(); ++idx) {
    const int n_steps = config.step_counts[idx];
    const TimeMesh mesh = config.mesh == MeshKind::uniform
                              ? uniform_mesh(config.final_time, n_steps)
                              : random_mesh(config.final_time, n_steps, derive_seed(config.seed, idx));
    Marcher marcher(solver, exact.exact(0.0), SchemeKind::bdf2, config.starter, 0);
    double error = 0.0;
    for (int k = 1; k <= n_steps; ++k) {
      try {
        marcher.step(mesh.tau(k));
      } catch (const FixedPointDiverged& e) {
        std::ostringstream msg;
        msg << "accuracy run N=" << n_steps << " diverged at level " << k << ": " << e.what();
        throw FixedPointDiverged(msg.str(), e.iterations(), e.last_increment());
      }
      error = std::max(error, norm_l2(grid, marcher.current() - exact.exact(mesh.level(k))));
    }
    AccuracyRow row;
    row.steps = n_steps;
    row.max_step = mesh.max_step();
    row.error = error;
    row.max_ratio = mesh.max_ratio();
    row.large_ratios = mesh.count_ratios_at_least(r_star);
    result.rows.push_back(row);
    errors.push_back(error);
    steps.push_back(row.max_step);
    if (config.write_outputs) {
      const std::string name = "mesh_N" + std::to_string(n_steps) + ".csv";
      auto out = open_output(config.out_dir / name);
      write_mesh_csv(out, mesh);
      outputs.push_back(name);
    }
  }
  const auto orders = convergence_order(errors, steps);
  for (std::size_t i = 0; i < orders.size(); ++i) result.rows[i + 1].order = orders[i];

  if (config.write_outputs) {
    auto out = open_output(config.out_dir / "accuracy.csv");
    out << "N,tau,error,order,max_ratio,n1\n" << std::setprecision(17);
    for (const auto& row : result.rows) {
      out << row.steps << ',' << row.max_step << ',' << row.error << ',';
      if (row.order) out << *row.order;
      out << ',' << row.max_ratio << ',' << row.large_ratios << '\n';
    }
    outputs.insert(outputs.begin(), "accuracy.csv");
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& row : result.rows) {
      summary.push_back({{"N", row.steps},
                         {"error", row.error},
                         {"order", row.order ? nlohmann::json(*row.order) : nlohmann::json()}});
    }
    write_manifest(config, outputs, summary);
  }
  return result;
}

const CompareEntry* CompareResult::find(SchemeKind scheme, double tau) const {
  for (const auto& e : entries) {
    if (e.scheme == scheme && std::abs(e.tau - tau) <= 1e-12 * tau) return &e;
  }
  return nullptr;
}

CompareResult run_compare(const ExperimentConfig& config) {
  config.validate();
  CahnHilliardSolver solver(config.model, config.solver);
  const Field phi0 = random_initial_field(solver.grid(), config.seed);
  const double t_end = config.final_time;
  std::vector<std::string> outputs;

  auto run_uniform = [&](SchemeKind scheme, double tau) {
    Field final_phi;
    Simulation sim = simulate(solver, phi0, scheme, config.starter, 0, t_end, {}, uniform_proposer(tau),
                              [&](const Marcher& m) { final_phi = m.current(); });
    return std::make_pair(std::move(sim), std::move(final_phi));
  };

  CompareResult result;
  {
    auto [sim, phi] = run_uniform(SchemeKind::bdf2, config.reference_step);
    result.reference_slice = mid_row_slice(phi);
    result.reference_total_variation = total_variation(result.reference_slice);
    if (config.write_outputs) {
      write_record(config.out_dir / "energy_reference.csv", sim.record);
      outputs.push_back("energy_reference.csv");
    }
  }

  for (double tau : config.step_sizes) {
    for (SchemeKind scheme : config.schemes) {
      CompareEntry entry;
      entry.scheme = scheme;
      entry.tau = tau;
      try {
        auto [sim, phi] = run_uniform(scheme, tau);
        entry.ok = true;
        entry.slice = mid_row_slice(phi);
        entry.total_variation = total_variation(entry.slice);
        for (std::size_t i = 0; i < entry.slice.size(); ++i) {
          entry.reference_distance =
              std::max(entry.reference_distance, std::abs(entry.slice[i] - result.reference_slice[i]));
        }
        entry.final_energy = sim.record.back().energy;
        entry.max_volume_drift = sim.max_volume_drift;
        entry.record = std::move(sim.record);
      } catch (const std::exception& e) {
        entry.ok = false;
        entry.error = e.what();
      }
      result.entries.push_back(std::move(entry));
    }
  }

  if (config.write_outputs) {
    const Grid& grid = solver.grid();
    auto write_slice = [&](const std::string& name, const std::vector<double>& slice) {
      auto out = open_output(config.out_dir / name);
      out << "x,phi\n" << std::setprecision(17);
      for (std::size_t i = 0; i < slice.size(); ++i) {
        out << grid.coordinate(static_cast<int>(i)) << ',' << slice[i] << '\n';
      }
      outputs.push_back(name);
    };
    write_slice("slice_reference.csv", result.reference_slice);
    auto summary_out = open_output(config.out_dir / "compare_summary.csv");
    summary_out << "scheme,tau,status,total_variation,reference_distance,final_energy,max_volume_drift\n"
                << std::setprecision(17);
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& e : result.entries) {
      const std::string tag = std::string(to_string(e.scheme)) + "_tau" + number_label(e.tau);
      summary_out << to_string(e.scheme) << ',' << e.tau << ',' << (e.ok ? "ok" : "failed") << ','
                  << e.total_variation << ',' << e.reference_distance << ',' << e.final_energy << ','
                  << e.max_volume_drift << '\n';
      summary.push_back({{"scheme", to_string(e.scheme)},
                         {"tau", e.tau},
                         {"ok", e.ok},
                         {"error", e.error},
                         {"total_variation", e.total_variation},
                         {"reference_distance", e.reference_distance}});
      if (!e.ok) continue;
      write_slice("slice_" + tag + ".csv", e.slice);
      write_record(config.out_dir / ("energy_" + tag + ".csv"), e.record);
      outputs.push_back("energy_" + tag + ".csv");
    }
    outputs.push_back("compare_summary.csv");
    write_manifest(config, outputs, summary);
  }
  return result;
}

AdaptiveResult run_adaptive(const ExperimentConfig& config) {
  config.validate();
  CahnHilliardSolver solver(config.model, config.solver);
  const Field phi0 = random_initial_field(solver.grid(), config.seed);
  std::vector<std::string> outputs;

  AdaptiveResult result;
  for (double beta : config.betas) {
    AdaptiveConfig ac = config.adaptive;
    ac.beta = beta;
    Simulation sim = simulate(solver, phi0, SchemeKind::bdf2, config.starter, config.max_rejections,
                              config.final_time, {}, adaptive_proposer(ac, config.model, config.energy_safe));
    AdaptiveRun run;
    run.beta = beta;
    run.mesh = TimeMesh::from_steps(0.0, sim.steps);
    run.levels = run.mesh.steps_count();
    run.cpu_seconds = sim.seconds;
    run.rejections = sim.rejections;
    run.max_volume_drift = sim.max_volume_drift;
    run.record = std::move(sim.record);
    result.runs.push_back(std::move(run));
  }
  if (config.adaptive_reference) {
    Simulation sim = simulate(solver, phi0, SchemeKind::bdf2, config.starter, 0, config.final_time, {},
                              uniform_proposer(config.reference_step));
    result.reference = std::move(sim.record);
  }

  if (config.write_outputs) {
    auto summary_out = open_output(config.out_dir / "adaptive_summary.csv");
    summary_out << "beta,levels,cpu_seconds,rejections,max_volume_drift\n";
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& run : result.runs) {
      const std::string tag = "beta" + number_label(run.beta);
      write_record(config.out_dir / ("record_" + tag + ".csv"), run.record);
      {
        auto out = open_output(config.out_dir / ("mesh_" + tag + ".csv"));
        write_mesh_csv(out, run.mesh);
      }
      outputs.push_back("record_" + tag + ".csv");
      outputs.push_back("mesh_" + tag + ".csv");
      summary_out << std::setprecision(17) << run.beta << ',' << run.levels << ','
                  << std::setprecision(6) << run.cpu_seconds << ',' << run.rejections << ','
                  << std::setprecision(17) << run.max_volume_drift << '\n';
      summary.push_back({{"beta", run.beta},
                         {"levels", run.levels},
                         {"cpu_seconds", run.cpu_seconds},
                         {"rejections", run.rejections}});
    }
    if (result.reference) {
      write_record(config.out_dir / "record_reference.csv", *result.reference);
      outputs.push_back("record_reference.csv");
    }
    outputs.push_back("adaptive_summary.csv");
    write_manifest(config, outputs, summary);
  }
  return result;
}

CoarsenResult run_coarsen(const ExperimentConfig& config) {
  config.validate();
  CahnHilliardSolver solver(config.model, config.solver);
  const Grid& grid = solver.grid();
  const Field phi0 = random_initial_field(grid, config.seed);
  std::vector<std::string> outputs;

  CoarsenResult result;
  auto on_snapshot = [&](const Marcher& m) {
    result.snapshot_times.push_back(m.time());
    if (!config.write_outputs) return;
    const std::string stem = "snapshot_t" + number_label(m.time());
    write_snapshot_binary(config.out_dir / (stem + ".bin"), grid, m.time(), m.current());
    write_snapshot_csv(config.out_dir / (stem + ".csv"), grid, m.time(), m.current());
    outputs.push_back(stem + ".bin");
    outputs.push_back(stem + ".csv");
  };
  const Proposer propose = config.mesh == MeshKind::uniform
                               ? uniform_proposer(config.step)
                               : adaptive_proposer(config.adaptive, config.model, config.energy_safe);
  std::vector<double> targets = config.snapshot_times;
  targets.push_back(config.final_time);
  Simulation sim = simulate(solver, phi0, config.scheme, config.starter,
                            config.mesh == MeshKind::uniform ? 0 : config.max_rejections,
                            config.final_time, targets, propose, on_snapshot);
  result.mesh = TimeMesh::from_steps(0.0, sim.steps);
  result.max_volume_drift = sim.max_volume_drift;
  result.rejections = sim.rejections;
  result.record = std::move(sim.record);
  try {
    const auto t = result.record.times();
    const auto e = result.record.energies();
    result.slope = scaling_fit(t, e, config.fit_t_lo, config.fit_t_hi);
  } catch (const InsufficientData& e) {
    result.fit_error = e.what();
  }

  if (config.write_outputs) {
    write_record(config.out_dir / "record.csv", result.record);
    {
      auto out = open_output(config.out_dir / "mesh.csv");
      write_mesh_csv(out, result.mesh);
    }
    outputs.push_back("record.csv");
    outputs.push_back("mesh.csv");
    nlohmann::json summary;
    summary["levels"] = result.mesh.steps_count();
    summary["rejections"] = result.rejections;
    summary["max_volume_drift"] = result.max_volume_drift;
    summary["fit_window"] = {config.fit_t_lo, config.fit_t_hi};
    summary["slope"] = result.slope ? nlohmann::json(*result.slope) : nlohmann::json();
    if (!result.fit_error.empty()) summary["fit_error"] = result.fit_error;
    write_text(config.out_dir / "coarsen_summary.json", summary.dump(2) + "\n");
    outputs.push_back("coarsen_summary.json");
    write_manifest(config, outputs, summary);
  }
  return result;
}

bool CertifyResult::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const CertifyEntry& e) { return e.pass; });
}

CertifyResult run_certify(const ExperimentConfig& config) {
  config.validate();
  std::vector<std::pair<std::string, TimeMesh>> meshes;
  if (!config.mesh_files.empty()) {
    for (const auto& path : config.mesh_files) {
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot open mesh file " + path.string());
      meshes.emplace_back(path.stem().string(), read_mesh_csv(in));
    }
  } else {
    meshes.emplace_back("uniform_N" + std::to_string(config.certify_steps),
                        uniform_mesh(config.final_time, config.certify_steps));
    for (int i = 0; i < config.certify_meshes; ++i) {
      meshes.emplace_back("bounded_" + std::to_string(i),
                          bounded_ratio_mesh(config.final_time, config.certify_steps,
                                             config.certify_max_ratio,
                                             derive_seed(config.seed, static_cast<std::uint64_t>(i))));
    }
  }

  const StabilityConstants constants = stability_constants(config.adaptive.r_user);
  CertifyResult result;
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    const auto& [name, mesh] = meshes[i];
    CertifyEntry entry;
    entry.name = name;
    try {
      entry.report = certify_mesh(mesh, constants);
      entry.orthogonality_residual = verify_orthogonality(mesh, mesh.steps_count());
      if (config.certify_probe_trials > 0) {
        entry.probe_violations =
            quadratic_form_probes(mesh, constants, config.certify_probe_trials,
                                  derive_seed(config.seed, 1000 + i))
                .violations();
      }
      entry.pass = entry.report->pass && entry.orthogonality_residual <= 1e-11 &&
                   entry.probe_violations == 0;
    } catch (const Error& e) {
      entry.error = e.what();
      entry.pass = false;
    }
    result.entries.push_back(std::move(entry));
  }

  if (config.write_outputs) {
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& e : result.entries) {
      nlohmann::json j = e.report ? nlohmann::json::parse(e.report->to_json()) : nlohmann::json::object();
      j["name"] = e.name;
      j["pass"] = e.pass;
      if (e.report) {
        j["orthogonality_residual"] = e.orthogonality_residual;
        j["probe_violations"] = e.probe_violations;
      }
      if (!e.error.empty()) j["error"] = e.error;
      reports.push_back(j);
    }
    write_text(config.out_dir / "certify.json", reports.dump(2) + "\n");
    write_manifest(config, {"certify.json"}, {{"all_pass", result.all_pass()}});
  }
  return result;
}

int run_experiment(const ExperimentConfig& config) {
  std::cout << std::setprecision(6);
  switch (config.kind) {
    case ExperimentKind::accuracy: {
      const auto result = run_accuracy(config);
      std::cout << "N        tau          e(N)         order   max r_k     N1\n";
      for (const auto& row : result.rows) {
        std::printf("%-8d %-12.4e %-12.4e %-7s %-11.4g %d\n", row.steps, row.max_step, row.error,
                    row.order ? std::to_string(*row.order).substr(0, 5).c_str() : "-", row.max_ratio,
                    row.large_ratios);
      }
      return 0;
    }
    case ExperimentKind::compare: {
      const auto result = run_compare(config);
      int failures = 0;
      std::printf("reference TV %.6g\n", result.reference_total_variation);
      for (const auto& e : result.entries) {
        if (!e.ok) {
          ++failures;
          std::printf("%-5s tau=%-8g failed: %s\n", std::string(to_string(e.scheme)).c_str(), e.tau, e.error.c_str());
          continue;
        }
        std::printf("%-5s tau=%-8g TV=%-12.6g |slice-ref|=%-12.4e E(T)=%.8g\n",
                    std::string(to_string(e.scheme)).c_str(), e.tau, e.total_variation,
                    e.reference_distance, e.final_energy);
      }
      return failures == 0 ? 0 : 1;
    }
    case ExperimentKind::adaptive: {
      const auto result = run_adaptive(config);
      for (const auto& run : result.runs) {
        std::printf("beta=%-8g levels=%-7d cpu=%.2fs rejections=%d\n", run.beta, run.levels, run.cpu_seconds,
                    run.rejections);
      }
      return 0;
    }
    case ExperimentKind::coarsen: {
      const auto result = run_coarsen(config);
      std::printf("levels=%d rejections=%d max volume drift=%.3e\n", result.mesh.steps_count(),
                  result.rejections, result.max_volume_drift);
      if (result.slope) {
        std::printf("energy slope on [%g, %g] = %.4f\n", config.fit_t_lo, config.fit_t_hi, *result.slope);
      } else {
        std::printf("scaling fit skipped: %s\n", result.fit_error.c_str());
      }
      return 0;
    }
    case ExperimentKind::certify: {
      const auto result = run_certify(config);
      for (const auto& e : result.entries) {
        if (e.report) {
          std::printf("%-14s %s lambda_min=%.6f lambda_max=%.6f orth=%.2e probes=%d\n", e.name.c_str(),
                      e.pass ? "pass" : "FAIL", e.report->lambda_min, e.report->lambda_max,
                      e.orthogonality_residual, e.probe_violations);
        } else {
          std::printf("%-14s FAIL %s\n", e.name.c_str(), e.error.c_str());
        }
      }
      return result.all_pass() ? 0 : 2;
    }
  }
  return 1;
}

}  // namespace chstep
