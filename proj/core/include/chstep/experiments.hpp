#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chstep/diagnostics.hpp"
#include "chstep/kernels.hpp"
#include "chstep/meshing.hpp"
#include "chstep/schemes.hpp"

namespace chstep {

enum class ExperimentKind { accuracy, compare, adaptive, coarsen, certify };
enum class MeshKind { uniform, random, adaptive };
enum class SchemeKind { bdf2, cn, cncs };
/// First-level solver for BDF2 runs. CN is self-starting; CNCS always starts
/// with first-order convex splitting.
enum class StarterKind { tr_bdf2, sdirk2, bdf1 };

std::string_view to_string(ExperimentKind kind);
std::string_view to_string(MeshKind kind);
std::string_view to_string(SchemeKind kind);
std::string_view to_string(StarterKind kind);
/// Parsers throw std::invalid_argument for unknown names.
ExperimentKind parse_experiment(std::string_view name);
MeshKind parse_mesh(std::string_view name);
SchemeKind parse_scheme(std::string_view name);
StarterKind parse_starter(std::string_view name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::coarsen;
  ModelParams model;
  MeshKind mesh = MeshKind::adaptive;
  SchemeKind scheme = SchemeKind::bdf2;
  StarterKind starter = StarterKind::tr_bdf2;
  FixedPointConfig solver;
  std::uint64_t seed = 2020;
  std::filesystem::path out_dir = "out";
  bool write_outputs = true;

  double final_time = 500.0;
  double step = 1e-2;                              ///< uniform step (coarsen with mesh = uniform)
  std::vector<int> step_counts{40, 80, 160, 320, 640};              ///< accuracy
  std::vector<double> step_sizes{1e-1, 2e-2, 1e-2, 1e-3};           ///< compare
  std::vector<SchemeKind> schemes{SchemeKind::bdf2, SchemeKind::cn, SchemeKind::cncs};
  double reference_step = 1e-3;                    ///< compare and adaptive reference runs
  bool adaptive_reference = true;

  AdaptiveConfig adaptive;
  std::vector<double> betas{10.0, 100.0, 1000.0};
  bool energy_safe = false;
  int max_rejections = 30;

  std::vector<double> snapshot_times{10, 50, 100, 200, 300, 500};
  double fit_t_lo = 50.0;
  double fit_t_hi = 500.0;

  int certify_meshes = 20;
  int certify_steps = 500;
  double certify_max_ratio = 4.0;
  int certify_probe_trials = 20;
  std::vector<std::filesystem::path> mesh_files;  ///< certify these instead of generated meshes

  /// Per-experiment defaults of the worked examples.
  static ExperimentConfig defaults(ExperimentKind kind);
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  std::string to_json() const;
};

/// Field history and level bookkeeping for one simulation.
///
/// step() advances by tau with the configured scheme. A FixedPointDiverged
/// step is retried with tau halved up to `max_rejections` times, then
/// rethrown. Level 1 uses the starter (BDF2), CN itself, or first-order
/// convex splitting (CNCS).
class Marcher {
 public:
  Marcher(const CahnHilliardSolver& solver, Field phi0, SchemeKind scheme, StarterKind starter,
          int max_rejections = 30, double t0 = 0.0);

  /// Returns the step actually taken.
  double step(double tau);

  const Field& current() const noexcept { return current_; }
  /// phi^{n-1}; equals current() before the first step.
  const Field& previous() const noexcept { return previous_; }
  double time() const noexcept { return time_; }
  int level() const noexcept { return level_; }
  double last_step() const noexcept { return tau_cur_; }
  double last_ratio() const noexcept { return level_ >= 2 ? tau_cur_ / tau_prev_ : 0.0; }
  int last_iterations() const noexcept { return iterations_; }
  int rejections() const noexcept { return rejections_; }
  /// ||(phi^n - phi^{n-1}) / tau_n||_{L2}; 0 before the first step.
  double change_rate() const;

 private:
  StepResult attempt(double tau) const;

  const CahnHilliardSolver* solver_;
  SchemeKind scheme_;
  StarterKind starter_;
  int max_rejections_;
  Field current_;
  Field previous_;
  double time_;
  int level_ = 0;
  double tau_prev_ = 0.0;
  double tau_cur_ = 0.0;
  int iterations_ = 0;
  int rejections_ = 0;
};

/// Appends RunRecord rows as a simulation advances. The modified energy of
/// level k needs tau_{k+1}, so each row is completed when the next level
/// arrives; finish() sets the last one to the plain energy.
class RecordBuilder {
 public:
  RecordBuilder(const SpectralOps& ops, const ModelParams& params);
  void push(const Marcher& marcher, double wall_ms);
  RunRecord finish();
  const RunRecord& record() const noexcept { return record_; }

 private:
  const SpectralOps* ops_;
  ModelParams params_;
  RunRecord record_;
  Field last_;
  Field before_last_;
  double last_tau_ = 0.0;
};

struct AccuracyRow {
  int steps = 0;
  double max_step = 0.0;
  double error = 0.0;
  std::optional<double> order;
  double max_ratio = 0.0;
  int large_ratios = 0;  ///< number of ratios >= r_star
};

struct AccuracyResult {
  std::vector<AccuracyRow> rows;
};

struct CompareEntry {
  SchemeKind scheme = SchemeKind::bdf2;
  double tau = 0.0;
  bool ok = false;
  std::string error;
  std::vector<double> slice;  ///< phi(x_i, y_{M/2}) at T
  double total_variation = 0.0;
  double reference_distance = 0.0;  ///< max |slice - reference slice|
  double final_energy = 0.0;
  double max_volume_drift = 0.0;
  RunRecord record;
};

struct CompareResult {
  std::vector<double> reference_slice;
  double reference_total_variation = 0.0;
  std::vector<CompareEntry> entries;
  const CompareEntry* find(SchemeKind scheme, double tau) const;
};

struct AdaptiveRun {
  double beta = 0.0;
  RunRecord record;
  TimeMesh mesh;
  int levels = 0;
  double cpu_seconds = 0.0;
  int rejections = 0;
  double max_volume_drift = 0.0;
};

struct AdaptiveResult {
  std::vector<AdaptiveRun> runs;
  std::optional<RunRecord> reference;
};

struct CoarsenResult {
  RunRecord record;
  TimeMesh mesh;
  std::vector<double> snapshot_times;
  std::optional<double> slope;
  std::string fit_error;
  double max_volume_drift = 0.0;
  int rejections = 0;
};

struct CertifyEntry {
  std::string name;
  std::optional<CertificationReport> report;
  double orthogonality_residual = 0.0;
  int probe_violations = 0;
  std::string error;
  bool pass = false;
};

struct CertifyResult {
  std::vector<CertifyEntry> entries;
  bool all_pass() const;
};

AccuracyResult run_accuracy(const ExperimentConfig& config);
CompareResult run_compare(const ExperimentConfig& config);
AdaptiveResult run_adaptive(const ExperimentConfig& config);
CoarsenResult run_coarsen(const ExperimentConfig& config);
CertifyResult run_certify(const ExperimentConfig& config);

/// Runs config.kind, writes outputs, and returns a process exit code.
int run_experiment(const ExperimentConfig& config);

/// Version string recorded in manifests.
std::string_view library_version();

}  // namespace chstep
