#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "perfmc/array.hpp"
#include "perfmc/evaluation.hpp"
#include "perfmc/periodicity.hpp"
#include "perfmc/phantom.hpp"
#include "perfmc/registration.hpp"
#include "perfmc/rpca.hpp"

namespace perfmc {

enum class Preset { desk, paper };
Preset parse_preset(std::string_view name);
std::string to_string(Preset p);

struct PeriodicityConfig {
  int m = 3;
  double min_energy_frac = 0.05;

  void validate() const;
};

/// One run description. Without `input` the series comes from the phantom.
struct PipelineConfig {
  int version = 1;
  Preset preset = Preset::desk;
  std::uint64_t seed = 0;
  double rate = 2.0;
  PhantomSpec phantom = PhantomSpec::desk();
  std::optional<std::filesystem::path> input;      // complex series, fully sampled
  std::optional<std::filesystem::path> reference;  // series to score against
  std::optional<std::filesystem::path> sectors;    // sectors.json
  SolverConfig solver;
  PeriodicityConfig periodicity;
  RegistrationConfig registration;
  std::filesystem::path out_dir = "out";

  void validate() const;
};

/// Preset defaults (phantom scene and solver weights).
PipelineConfig default_pipeline_config(Preset preset);

/// Overlays a JSON config document on `base`. The document must carry
/// "version": 1; unknown keys anywhere are ConfigErrors. Relative paths are
/// resolved against the directory of `path`.
PipelineConfig load_pipeline_config(const std::filesystem::path& path, PipelineConfig base);
PipelineConfig parse_pipeline_config(std::string_view json_text, PipelineConfig base,
                                     const std::filesystem::path& base_dir = {});
/// Canonical JSON of a config; parse_pipeline_config(dump(c), ...) == c.
std::string dump_pipeline_config(const PipelineConfig& cfg);

struct PipelineMetrics {
  double rate = 0.0;
  double achieved_rate = 0.0;
  SolverVariant solver_variant = SolverVariant::prox_jacobian;
  SolverStatus solver_status = SolverStatus::max_iterations;
  int solver_iterations = 0;
  double constraint_violation = 0.0;
  std::vector<PeriodEnergy> periods;
  Index reference_frame = 0;

  // Only with a reference series.
  // rmse and rmse_zero_filled share the motion-free reference at the
  // respiratory state of the registration reference frame; the reconstruction
  // pair is scored against the reference with motion.
  std::optional<double> rmse;                             // M_mc
  std::optional<double> rmse_zero_filled;                 // zero-filled
  std::optional<double> rmse_reconstruction;              // L + S
  std::optional<double> rmse_reconstruction_zero_filled;  // zero-filled
  // Only with a motion ROI (phantom input).
  std::optional<ResidualMotion> residual_motion;               // M_mc
  std::optional<ResidualMotion> residual_motion_unregistered;  // real L + S before registration
  // Only with sectors and reference curves.
  std::optional<double> curve_rmse;                // M_mc
  std::optional<double> curve_rmse_unregistered;   // real L + S
  std::optional<double> curve_rmse_zero_filled;    // |zero-filled|
};

struct PipelineResult {
  std::optional<Phantom> phantom;
  KSpaceData data;
  ComplexSeries zero_filled;
  Decomposition decomposition;
  RealSeries low_rank;  // phase-demodulated real parts
  RealSeries sparse;
  PeriodicSplit split;
  SeriesRegistration registration;
  RealSeries m_mc;
  std::optional<TimeIntensityCurves> curves;
  PipelineMetrics metrics;

  /// True when every stage converged (the solver reached its tolerance).
  bool converged() const { return decomposition.converged(); }
};

using LogFn = std::function<void(const std::string&)>;

/// phantom/input -> undersample -> reconstruct -> periodic split of S ->
/// register L + P -> M_mc = L_reg + Q -> metrics. Errors are rethrown with the
/// failing stage name. When `out_dir` is set every stage persists its
/// artifacts with a ".partial" suffix as it completes; all are renamed once
/// the run finishes.
PipelineResult run_pipeline(const PipelineConfig& cfg, const LogFn& log = {},
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// metrics.json with the RMSE normalization documented alongside the values.
void write_metrics_json(const std::filesystem::path& path, const PipelineMetrics& m);

/// Tracks files written with a ".partial" suffix and renames them on commit.
class ArtifactStager {
 public:
  explicit ArtifactStager(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  static constexpr const char* suffix = ".partial";
  /// Staged path for `name`, registered for commit.
  std::filesystem::path stage(const std::string& name);
  void add(const std::vector<std::filesystem::path>& staged);
  /// Renames every staged file to its final name.
  void commit();

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> staged_;
};

}  // namespace perfmc
