#pragma once

// Plane-wave Galerkin discretization of the shifted cell operator
//   A(theta) psi = -(d/dy + 2 pi i theta)(sigma (d/dy + 2 pi i theta) psi) + c psi
// on the window k in {-K..K}:
//   A_kl = 4 pi^2 (k+theta)(l+theta) sigmahat(k-l) + chat(k-l) - shift delta_kl.

#include <optional>
#include <span>
#include <vector>

#include "blochhom/periodic.hpp"
#include "blochhom/types.hpp"

namespace blochhom {

/// sigma, c and the plane-wave truncation order shared by every cell solve.
struct CellProblem {
  PeriodicFunction sigma;
  PeriodicFunction c;
  int order = 16;

  int dimension() const noexcept { return 2 * order + 1; }
};

struct CellOperator {
  double theta = 0.0;
  int order = 0;
  double spectral_shift = 0.0;
  CMatrix matrix;
};

struct CellEigenpair {
  int n = 1;  // 1-based band index
  double theta = 0.0;
  double lambda = 0.0;
  CVector psi;  // coefficients on {-K..K}, unit l2 norm, gauge fixed
  double residual = 0.0;
  bool degenerate = false;
};

/// Throws HypothesisViolation unless sigma is real and uniformly positive and
/// c is real.
void validate_cell_coefficients(const PeriodicFunction& sigma, const PeriodicFunction& c);

CellOperator assemble_cell_operator(const PeriodicFunction& sigma, const PeriodicFunction& c,
                                    double theta, int order, double spectral_shift = 0.0);

inline CellOperator assemble_cell_operator(const CellProblem& p, double theta,
                                           double spectral_shift = 0.0) {
  return assemble_cell_operator(p.sigma, p.c, theta, p.order, spectral_shift);
}

/// Lowest n_max eigenpairs, ascending. Pairs whose eigenvalue lies within
/// `degeneracy_tol * (1 + |lambda|)` of a neighbour are flagged degenerate.
std::vector<CellEigenpair> solve_cell_eigen(const CellOperator& a, int n_max,
                                            double degeneracy_tol = 1e-6);

/// Fixes the U(1) phase of an eigenvector. Without a reference the
/// largest-modulus coefficient becomes real positive (near-ties within a
/// relative 1e-9 go to the smallest k). With a reference the phase maximizes
/// Re <psi, reference>.
CVector fix_gauge(std::span<const cplx> psi, std::span<const cplx> reference = {});

/// Convenience: eigenpair of band n (1-based) at theta.
CellEigenpair band_eigenpair(const CellProblem& p, int n, double theta);

/// Full ascending spectrum at theta (values only).
std::vector<double> cell_spectrum_values(const CellProblem& p, double theta);

/// d/dtheta of the Galerkin matrix applied to v (Hellmann-Feynman derivative
/// <A' psi, psi> gives the band slope).
CVector apply_theta_derivative(const PeriodicFunction& sigma, std::span<const cplx> v, double theta);

}  // namespace blochhom
