#pragma once

// Run configuration (strict JSON), command dispatch and result files.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "blochhom/harness.hpp"

namespace blochhom {

struct PotentialSpec {
  std::string kind = "zero";  // zero | separable | grid
  MacroProfile macro = MacroProfile::constant(0.0);
  CoefficientSpec micro;
  std::vector<CoefficientSpec> rows;
  std::optional<double> bound;
  bool operator==(const PotentialSpec&) const = default;
};

struct RunConfig {
  std::string scenario;
  CoefficientSpec sigma = CoefficientSpec::constant(1.0);
  CoefficientSpec c = CoefficientSpec::constant(0.0);
  PotentialSpec d;
  NoiseKind noise = NoiseKind::none;
  CoefficientSpec noise_profile = CoefficientSpec::constant(0.0);
  int band = 1;
  std::vector<double> theta_candidates{0.0, 0.5};
  MacroProfile initial = MacroProfile::bump(1.0, 0.5, 0.5);
  std::optional<MacroProfile> pairing_macro;

  // numerics
  int order = 16;
  int coeff_grid = 64;
  int n_bands = 4;
  int theta_points = 65;
  double length = 1.0;
  double T = 0.5;
  double dt = 1e-4;
  std::vector<int> q_list{8, 16, 32, 64};
  int points_per_cell = 64;
  int homog_nx = 0;
  int replicas = 1;
  std::uint64_t seed = 0;
  int output_instants = 16;
  double fd_step = 1e-2;
  bool lab_frame = false;

  // tolerances
  double derivative_tol = 1e-7;
  double gap_tol = 1e-6;
  double compat_tol = 1e-9;
  double residual_tol = 1e-9;
  double lambda_pp_rel_tol = 1e-5;

  std::string output_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

/// Parses and validates a configuration; unknown keys and invalid values
/// raise InputError with the offending JSON path in the message.
RunConfig parse_config(const std::string& text);

/// Canonical JSON text (keys in fixed order, epsilon written as 1/q).
std::string serialize_config(const RunConfig& cfg);

/// FNV-1a 64 of serialize_config, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

CellProblem make_cell_problem(const RunConfig& cfg);
MacroPotential make_potential(const RunConfig& cfg);
PeriodicFunction make_noise_profile(const RunConfig& cfg);
BandAnalysisConfig make_analysis_config(const RunConfig& cfg, int threads);
SweepConfig make_sweep_config(const RunConfig& cfg, int threads);

struct CliOptions {
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool quiet = false;
};

/// Stages: bands, critical, correctors, effective, simulate-eps,
/// simulate-homog, converge, all.
const std::vector<std::string>& command_names();

/// In-memory result of a run; files are produced by write_report.
struct RunOutput {
  std::string report_json;  // deterministic
  std::string bands_csv;
  std::string errors_csv;
  std::string mass_csv;
  std::string sweep_csv;
  std::string trajectory_csv;
  std::string trajectory_homog_csv;
  std::vector<std::pair<std::string, std::string>> svgs;  // file name, content
  std::vector<std::string> notices;
};

RunOutput run_command(const std::string& command, const RunConfig& cfg, const CliOptions& opts);

/// Writes report.json, bands.csv, errors.csv, mass.csv, manifest.json and any
/// optional artefacts present in `out`. Throws std::runtime_error naming the
/// path on I/O failure.
void write_report(const RunOutput& out, const RunConfig& cfg, const std::filesystem::path& dir,
                  const std::string& started_at, double wall_seconds);

// CSV writers with fixed headers; numbers use 17 significant digits.
std::string bands_csv(const BandStructure& b);
std::string errors_csv(const ConvergenceReport& rep);
std::string sweep_csv(const ConvergenceReport& rep);
std::string mass_csv(const MassDiagnostics& md);
std::string trajectory_csv(const Trajectory& tr);

const char* tool_version();

}  // namespace blochhom
