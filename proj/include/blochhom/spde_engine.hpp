#pragma once

// Time integration of the oscillating-coefficient problem (in the frame that
// removes the Bloch phase) and of the homogenized problem on D = (0, L) with
// Dirichlet data, driven by one real Wiener process:
//   dv = i H v dt + i G(v) dW,   G(v) = g (additive) or g v (multiplicative).
// Each step applies the Ito increment at the left endpoint and then the
// Cayley (implicit midpoint) propagator of the Hermitian tridiagonal H.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blochhom/cell_spectrum.hpp"
#include "blochhom/effective_model.hpp"
#include "blochhom/linalg.hpp"
#include "blochhom/rng.hpp"

namespace blochhom {

/// Hermitian tridiagonal operator on the interior nodes j = 1..nx-1.
struct TridiagonalOperator {
  CVector lower;  // H(j+1, j)
  CVector diag;
  CVector upper;  // H(j, j+1)

  std::size_t size() const noexcept { return diag.size(); }
  CVector apply(std::span<const cplx> v) const;
};

/// G^H Sigma G + diag(V) with G the half-point difference
///   (G v)_{j+1/2} = (exp(i kappa h/2) v_{j+1} - exp(-i kappa h/2) v_j) / h
/// and zero Dirichlet values at j = 0 and j = nx. `sigma_half` has nx
/// entries (half points), `potential` nx+1 entries (all nodes).
TridiagonalOperator assemble_schrodinger(std::span<const double> sigma_half, std::span<const double> potential,
                                         double kappa, double h);

class CayleyPropagator {
 public:
  CayleyPropagator(TridiagonalOperator h, double dt);
  /// v <- (I - i dt/2 H)^{-1} (I + i dt/2 H) v on interior values.
  void step(std::span<cplx> v, std::span<cplx> scratch) const;
  const TridiagonalOperator& hamiltonian() const noexcept { return h_; }
  double dt() const noexcept { return dt_; }

 private:
  TridiagonalOperator h_;
  TridiagonalLu lu_;
  double dt_;
};

/// Noise amplitude on all nodes. In the lab-frame validation mode the additive
/// amplitude carries exp(i rate t) exp(i kappa x_j).
struct NoiseField {
  NoiseKind kind = NoiseKind::none;
  std::vector<double> amplitude;  // nx+1 nodal values
  double kappa = 0.0;
  double temporal_rate = 0.0;
};

struct Trajectory {
  std::vector<double> x;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<int> steps;
  std::vector<CVector> states;  // all nodes, boundary zeros included
  CVector initial;
  std::vector<double> mass;     // every step, n_steps + 1 entries
  std::vector<double> quadratic_variation;  // realized sum dW^2 before each step entry
  double max_step_drift = 0.0;  // max relative norm change of the deterministic part
  double gradient_integral = 0.0;  // sum_k dt |G v_k|^2
  NoiseField noise;
  std::int64_t increments_consumed = 0;
  std::uint64_t increment_checksum = 0;
  std::string scheme = "ito-left-noise+cayley";
};

struct IntegrationOptions {
  std::vector<double> output_times;  // snapped to the nearest step
  bool monitor_gradient = true;
};

/// Shared core used by both problems.
Trajectory integrate(const CayleyPropagator& prop, const NoiseField& noise, const WienerPath& path,
                     std::span<const cplx> v0, double length, double kappa, const IntegrationOptions& opts);

struct EpsProblem {
  double length = 1.0;
  double T = 0.5;
  int q = 8;  // epsilon = 1 / q
  CellProblem cell;
  MacroPotential d;
  NoiseKind noise = NoiseKind::none;
  PeriodicFunction noise_profile;
  double theta_n = 0.0;
  double lambda_n = 0.0;
  int nx = 512;
  double dt = 1e-4;
  bool lab_frame = false;

  double epsilon() const noexcept { return 1.0 / q; }
};

/// Checks the grid/step invariants (nx divisible by q with at least 16 points
/// per cell, positive dt, T/dt integral).
void validate_eps_problem(const EpsProblem& p);

TridiagonalOperator eps_hamiltonian(const EpsProblem& p);
NoiseField eps_noise(const EpsProblem& p);

Trajectory integrate_eps(const EpsProblem& p, const WienerPath& path, std::span<const cplx> v0,
                         const IntegrationOptions& opts = {});

struct HomogenizedProblem {
  double length = 1.0;
  int nx = 512;
  double dt = 1e-4;
};

TridiagonalOperator homogenized_hamiltonian(const EffectiveModel& m, const HomogenizedProblem& hp);

/// The model's d* must be sampled on the integration grid.
Trajectory integrate_homogenized(const EffectiveModel& m, const WienerPath& path, std::span<const cplx> v0,
                                 const HomogenizedProblem& hp, const IntegrationOptions& opts = {});

struct MassDiagnostics {
  std::vector<double> t;
  std::vector<double> mass;
  std::vector<double> predicted;
  std::vector<double> residual;  // (mass - predicted) / predicted
  double max_abs_residual = 0.0;
  double log_mass_qv_slope = 0.0;  // multiplicative: regression of log mass on realized sum dW^2
  double log_mass_time_slope = 0.0;
  double mass_time_slope = 0.0;  // least-squares slope of mass against t
};

/// Observed mass against the law for the noise kind: constant (none),
/// m0 + t h sum |g_j|^2 (additive, in expectation), m0 exp(gbar^2 t)
/// (multiplicative, gbar^2 the |v0|^2-weighted mean of g^2).
MassDiagnostics mass_diagnostics(const Trajectory& traj);

/// h sum |v_j|^2 over the nodes (boundary values are zero).
double discrete_mass(std::span<const cplx> v, double h);

}  // namespace blochhom
