#pragma once

// Homogenized constants of a simple critical band: sigma*, d*(x), g*.

#include <span>
#include <string>
#include <vector>

#include "blochhom/band_tools.hpp"
#include "blochhom/correctors.hpp"

namespace blochhom {

enum class NoiseKind { none, additive, multiplicative };

std::string to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

struct EffectiveModel {
  int n = 1;
  double theta = 0.0;
  double lambda = 0.0;
  double sigma_star = 0.0;
  double lambda_pp_compat = 0.0;
  double lambda_pp_fd = 0.0;
  std::vector<double> x_grid;
  std::vector<double> d_star;  // on x_grid
  double g_star = 0.0;
  CellEigenpair psi;
  NoiseKind noise_kind = NoiseKind::none;
  bool sigma_star_positive = true;
};

/// d*(x_j) = int d(x_j, y) |psi(y)|^2 dy.
std::vector<double> effective_d(const MacroPotential& d, std::span<const cplx> psi, std::span<const double> x_grid);

/// g* = int g(y) |psi(y)|^2 dy; g must be real.
double effective_g(const PeriodicFunction& g, std::span<const cplx> psi);

struct EffectiveOptions {
  double lambda_pp_rel_tol = 1e-5;  // compat versus finite-difference curvature
};

/// Assembles the record after checking that the band is simple and critical
/// at the located point and that the two curvature routes agree.
EffectiveModel build_effective_model(const CriticalPoint& cp, const CorrectorSet& cs, const MacroPotential& d,
                                     const PeriodicFunction& g, NoiseKind noise_kind,
                                     std::span<const double> x_grid, const EffectiveOptions& opts = {});

/// Uniform nodes x_j = j L / nx, j = 0..nx.
std::vector<double> uniform_x_grid(double length, int nx);

}  // namespace blochhom
