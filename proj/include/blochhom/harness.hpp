#pragma once

// Well-prepared data, demodulation, factorization error and two-scale
// pairings, plus the epsilon x replica convergence sweep.

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blochhom/band_tools.hpp"
#include "blochhom/correctors.hpp"
#include "blochhom/effective_model.hpp"
#include "blochhom/spde_engine.hpp"

namespace blochhom {

/// psi(x_j / eps) v0(x_j) with eps = 1/q. Rejects v0 that does not vanish at
/// both ends of D.
CVector well_prepared_initial(std::span<const cplx> psi, const MacroProfile& v0, int q,
                              std::span<const double> x_grid);

/// u = exp(i lambda t / eps^2) exp(2 pi i theta x / eps) v and its inverse.
CVector modulate(std::span<const cplx> v, std::span<const double> x, double t, double eps, double theta,
                 double lambda);
CVector demodulate(std::span<const cplx> u, std::span<const double> x, double t, double eps, double theta,
                   double lambda);

/// Local cubic (four-point Lagrange) interpolation from a uniform grid with
/// `coarse.size()` nodes onto a uniform grid with `fine_nodes` nodes.
CVector lift_cubic(std::span<const cplx> coarse, std::size_t fine_nodes);

/// |v_eps - psi(x/eps) v|_{L2(D)} on the fine grid (v lifted when needed).
double factorization_error_at(std::span<const cplx> v_eps, std::span<const cplx> v, std::span<const cplx> psi,
                              int q, double length);

struct FactorizationErrors {
  std::vector<double> t;
  std::vector<double> error;
  double sup = 0.0;
};

FactorizationErrors factorization_error(const Trajectory& v_eps, const Trajectory& v, std::span<const cplx> psi,
                                        int q);

/// Test function phi(x) h(x/eps) + eps phi'(x) zeta(x/eps) in the
/// demodulated frame; the second term is present when `zeta` is non-empty.
struct TwoScaleTest {
  MacroProfile macro = MacroProfile::constant(1.0);
  PeriodicFunction micro = PeriodicFunction::constant(1.0, 1);
  CVector zeta;
};

/// Trapezoidal value of int_D w(x) conj(Psi(x, x/eps)) dx. Throws when the
/// grid has fewer than 8 points per eps-cell.
cplx two_scale_pairing(std::span<const cplx> w, double length, const TwoScaleTest& test, double eps);

/// int_D int_T w_limit(x, y) conj(phi(x) h(y)) dy dx by tensor quadrature
/// (trapezoid in x with nx intervals, uniform rule in y with ny points).
cplx two_scale_limit(const std::function<cplx(double, double)>& w_limit, double length, const TwoScaleTest& test,
                     int nx, int ny);

/// Band analysis shared by the CLI stages and the sweep.
struct BandAnalysisConfig {
  CellProblem cell;
  int band = 1;
  std::vector<double> theta_candidates{0.0, 0.5};
  int theta_points = 65;
  int n_bands = 4;
  CriticalOptions critical;
  FredholmOptions fredholm;
  EffectiveOptions effective;
  int threads = 1;
};

struct BandAnalysis {
  BandStructure bands;
  std::vector<CriticalPoint> candidates;
  CriticalPoint critical;
  CorrectorSet correctors;
};

/// Locates critical points from each candidate and keeps the first simple
/// critical one; throws HypothesisViolation when none qualifies.
BandAnalysis analyze_band(const BandAnalysisConfig& cfg);

/// Effective record with d* sampled on the given grid.
EffectiveModel effective_model_on_grid(const BandAnalysis& ba, const MacroPotential& d, const PeriodicFunction& g,
                                       NoiseKind kind, std::span<const double> x_grid,
                                       const EffectiveOptions& opts = {});

struct SweepConfig {
  BandAnalysisConfig analysis;
  MacroPotential d;
  NoiseKind noise = NoiseKind::none;
  PeriodicFunction noise_profile;
  MacroProfile v0 = MacroProfile::bump(1.0, 0.5, 0.5);
  MacroProfile pairing_macro = MacroProfile::bump(1.0, 0.5, 0.5);
  double length = 1.0;
  double T = 0.5;
  double dt = 1e-4;
  std::vector<int> q_list{8, 16, 32, 64};
  int points_per_cell = 64;
  int homog_nx = 0;  // 0: homogenized grid equals each epsilon grid
  int replicas = 1;
  std::uint64_t seed = 0;
  int output_instants = 16;
  int threads = 1;
};

struct EpsSummary {
  int q = 0;
  double epsilon = 0.0;
  int nx = 0;
  int homog_nx = 0;
  int replicas_requested = 0;
  int replicas_completed = 0;
  std::vector<std::string> failures;
  std::vector<double> t;
  std::vector<double> err_mean;
  std::vector<double> err_stderr;
  std::vector<double> mass_resid_mean;
  double sup_mean = 0.0;
  double sup_stderr = 0.0;
  std::vector<cplx> pairing_mean;        // per output instant
  std::vector<cplx> pairing_limit_mean;  // per output instant
  double pairing_stderr = 0.0;           // at the final instant
  double max_step_drift = 0.0;
  double initial_mass = 0.0;
};

struct ConvergenceReport {
  BandAnalysis analysis;
  double sigma_star = 0.0;
  double g_star = 0.0;
  NoiseKind noise = NoiseKind::none;
  std::vector<EpsSummary> per_eps;
  double lifting_error = 0.0;
  bool monotone = false;
  bool partial = false;
  std::string verdict;
};

/// A step counts as a decrease when mean_prev - mean_next exceeds the larger
/// of the two standard errors.
bool strictly_decreasing(const std::vector<EpsSummary>& per_eps);

ConvergenceReport convergence_sweep(const SweepConfig& cfg);

/// Uniform output instants t_i = i T / count, i = 1..count.
std::vector<double> output_instants(double T, int count);

}  // namespace blochhom
