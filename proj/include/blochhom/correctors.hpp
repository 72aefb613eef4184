#pragma once

// First and second order cell correctors at a critical Bloch parameter, solved
// on the orthogonal complement of psi_n, and the effective coefficient sigma*.
//
// With D = d/dy + 2 pi i theta and products projected onto the plane-wave
// window:
//   (A - lambda) zeta = sigma D psi + D(sigma psi)
//   (A - lambda) chi  = 2 sigma D zeta + 2 D(sigma zeta) + 2 sigma psi - lambda'' psi / (4 pi^2)
// so that d psi / d theta = 2 pi i zeta and d^2 psi / d theta^2 = -4 pi^2 chi
// (up to multiples of psi).

#include <span>
#include <string>

#include "blochhom/cell_spectrum.hpp"

namespace blochhom {

struct ZetaRhs {
  CVector rhs;
  cplx projection;  // <rhs, psi>
};

ZetaRhs build_zeta_rhs(const PeriodicFunction& sigma, std::span<const cplx> psi, double theta);

struct FredholmOptions {
  double compat_tol = 1e-9;    // on |<rhs, psi>| / max(1, |rhs|)
  double residual_tol = 1e-9;  // on the projected residual / max(1, |rhs|)
};

struct FredholmResult {
  CVector u;
  double compat_residual = 0.0;  // |<rhs, psi>|
  double residual = 0.0;         // |(A - lambda) u - P rhs|
  double pivot_ratio = 1.0;
  bool ill_conditioned = false;
};

/// Solves (A(theta) - lambda) u = rhs with <u, psi> = 0 through the deflated
/// system (A - lambda + psi psi^H) u = rhs - <rhs, psi> psi. Throws
/// HypothesisViolation when rhs is not orthogonal to psi within tolerance and
/// NumericalError when the residual check fails after one refinement step.
FredholmResult fredholm_solve(const CellProblem& p, double theta, double lambda, std::span<const cplx> psi,
                              std::span<const cplx> rhs, const FredholmOptions& opts = {});

struct ChiResult {
  CVector chi;
  double lambda_pp_compat = 0.0;
  double lambda_pp_imag = 0.0;  // imaginary residue of the compatibility quotient
  double compat_residual = 0.0;  // |<rhs_chi, psi>| once lambda'' is inserted
  double residual = 0.0;
};

/// Extracts lambda'' from the compatibility condition of the chi equation,
/// then solves for chi with that value.
ChiResult compute_chi(const CellProblem& p, double theta, double lambda, std::span<const cplx> psi,
                      std::span<const cplx> zeta, const FredholmOptions& opts = {});

struct SigmaStar {
  double value = 0.0;
  double imag = 0.0;
};

/// sigma* = int sigma |psi|^2 + sigma psi conj(D zeta) - sigma conj(zeta) D psi.
/// Throws NumericalError when the imaginary part exceeds 1e-10 max(1, |value|).
SigmaStar effective_sigma(const PeriodicFunction& sigma, std::span<const cplx> psi, std::span<const cplx> zeta,
                          double theta);

struct CorrectorSet {
  int n = 1;
  double theta = 0.0;
  double lambda = 0.0;
  double gap = 0.0;
  CVector psi;
  CVector zeta;
  CVector chi;
  double compat_residual_zeta = 0.0;
  double residual_zeta = 0.0;
  double compat_residual_chi = 0.0;
  double residual_chi = 0.0;
  double orthogonality_zeta = 0.0;  // |<zeta, psi>|
  double orthogonality_chi = 0.0;
  double lambda_pp_compat = 0.0;
  double sigma_star_formula = 0.0;
  double sigma_star_imag = 0.0;
  bool ill_conditioned = false;
};

/// Full corrector pipeline for band n at theta. The eigenvector may be passed
/// in (any phase); otherwise it is computed.
CorrectorSet compute_correctors(const CellProblem& p, int n, double theta, const FredholmOptions& opts = {});
CorrectorSet compute_correctors(const CellProblem& p, const CellEigenpair& pair, double gap,
                                const FredholmOptions& opts = {});

/// |P(fd d psi/d theta) - 2 pi i zeta| with the centered difference of step h,
/// neighbouring eigenvectors gauge-aligned with psi and P the projector
/// orthogonal to psi.
double zeta_identity_error(const CellProblem& p, const CorrectorSet& cs, double h);

}  // namespace blochhom
