#pragma once

// Bloch band sweeps, critical-point location, simplicity checks and
// finite-difference curvature of a single band.

#include <optional>
#include <string>
#include <vector>

#include "blochhom/cell_spectrum.hpp"

namespace blochhom {

struct BandStructure {
  std::vector<double> theta_grid;
  std::vector<std::vector<double>> bands;              // bands[j][n-1] = lambda_n(theta_j)
  std::vector<std::vector<CVector>> eigvecs;           // same layout; empty unless requested
  std::vector<std::vector<unsigned char>> degenerate;  // same layout
  int order = 0;

  int band_count() const noexcept { return bands.empty() ? 0 : static_cast<int>(bands.front().size()); }
  double lambda(int n, std::size_t j) const { return bands.at(j).at(static_cast<std::size_t>(n - 1)); }
};

/// Uniform grid of `points` values on [-1/2, 1/2] (points >= 2).
std::vector<double> uniform_theta_grid(int points);

/// Eigensolves run in parallel over the grid; eigenvectors, when stored, are
/// gauge-aligned with the previous grid point in a sequential pass.
BandStructure compute_band_structure(const CellProblem& p, std::vector<double> theta_grid, int n_bands,
                                     bool store_vectors = false, int threads = 1);

struct SimplicityReport {
  int n = 1;
  double theta = 0.0;
  double lambda = 0.0;
  double gap_below = 0.0;  // infinity for n = 1
  double gap_above = 0.0;
  double gap = 0.0;
  bool simple = false;
};

SimplicityReport check_simplicity(const CellProblem& p, double theta, int n, double gap_tol = 1e-6);

struct SecondDerivativeFd {
  double value = 0.0;  // Richardson extrapolation of the two stencils
  double coarse = 0.0;  // step h
  double fine = 0.0;    // step h/2
  double error_estimate = 0.0;
  double h = 0.0;
};

/// Centered second difference of lambda_n at theta with steps h and h/2.
/// Throws HypothesisViolation when the band is not simple at a stencil point.
SecondDerivativeFd second_derivative_fd(const CellProblem& p, int n, double theta, double h = 1e-2,
                                        double gap_tol = 1e-6);

/// Band slope from the Hellmann-Feynman identity <A'(theta) psi, psi>.
double band_slope(const CellProblem& p, const CellEigenpair& pair);

struct CriticalOptions {
  double derivative_tol = 1e-7;  // relative: |lambda'| <= tol (1 + |lambda|)
  double gap_tol = 1e-6;
  double fd_step = 1e-2;
  double snap_distance = 1e-6;
};

struct CriticalPoint {
  int n = 1;
  double theta = 0.0;
  double lambda = 0.0;
  double slope = 0.0;
  double gap = 0.0;
  double lambda_pp_fd = 0.0;
  double lambda_pp_fd_error = 0.0;
  bool simple = false;
  bool critical = false;
  bool boundary_candidate = false;
  std::string method;  // "initial", "golden-section", "boundary"
};

CriticalPoint locate_critical_point(const CellProblem& p, const BandStructure& b, int n, double theta_init,
                                    const CriticalOptions& opts = {});

}  // namespace blochhom
