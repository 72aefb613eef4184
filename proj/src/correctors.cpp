#include "blochhom/correctors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "blochhom/linalg.hpp"

namespace blochhom {
namespace {

void check_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw InputError(fmt::format("{}: coefficient windows differ in length ({} vs {})", what, a, b));
}

// sigma D v + D (sigma v), the coefficient form of the theta-derivative of A
// up to the factor -2 pi i.
CVector symmetric_flux(const PeriodicFunction& sigma, std::span<const cplx> v, double theta) {
  const CVector a = multiply_projected(sigma, shifted_derivative(v, theta));
  const CVector b = shifted_derivative(multiply_projected(sigma, v), theta);
  CVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

CVector project_out(std::span<const cplx> v, std::span<const cplx> psi) {
  const cplx c = coeff_inner(v, psi);
  CVector out(v.begin(), v.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= c * psi[i];
  return out;
}

}  // namespace

ZetaRhs build_zeta_rhs(const PeriodicFunction& sigma, std::span<const cplx> psi, double theta) {
  ZetaRhs r;
  r.rhs = symmetric_flux(sigma, psi, theta);
  r.projection = coeff_inner(r.rhs, psi);
  return r;
}

FredholmResult fredholm_solve(const CellProblem& p, double theta, double lambda, std::span<const cplx> psi,
                              std::span<const cplx> rhs, const FredholmOptions& opts) {
  check_sizes(psi.size(), static_cast<std::size_t>(p.dimension()), "fredholm_solve");
  check_sizes(rhs.size(), psi.size(), "fredholm_solve");
  const double scale = std::max(1.0, coeff_norm(rhs));
  FredholmResult out;
  out.compat_residual = std::abs(coeff_inner(rhs, psi));
  if (out.compat_residual > opts.compat_tol * scale) {
    throw HypothesisViolation("Fredholm compatibility",
                              fmt::format("right-hand side has component {:.3e} along psi_n", out.compat_residual));
  }

  const auto op = assemble_cell_operator(p, theta, lambda);
  CMatrix bordered = op.matrix;
  const std::size_t n = psi.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) bordered(i, j) += psi[i] * std::conj(psi[j]);
  }
  const LuFactorization lu(bordered);
  out.pivot_ratio = lu.pivot_ratio();
  out.ill_conditioned = out.pivot_ratio < 1e-10;

  const CVector f = project_out(rhs, psi);
  CVector u = lu.solve(f);
  auto residual_of = [&](const CVector& x) {
    const CVector bx = bordered.apply(x);
    CVector r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = f[i] - bx[i];
    return r;
  };
  const CVector r1 = residual_of(u);
  const CVector du = lu.solve(r1);
  for (std::size_t i = 0; i < n; ++i) u[i] += du[i];
  u = project_out(u, psi);

  const CVector au = op.matrix.apply(u);
  double r2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) r2 += std::norm(au[i] - f[i]);
  out.residual = std::sqrt(r2);
  if (out.residual > opts.residual_tol * scale) {
    throw NumericalError(fmt::format("Fredholm solve residual {:.3e} exceeds tolerance", out.residual));
  }
  out.u = std::move(u);
  return out;
}

ChiResult compute_chi(const CellProblem& p, double theta, double lambda, std::span<const cplx> psi,
                      std::span<const cplx> zeta, const FredholmOptions& opts) {
  check_sizes(zeta.size(), psi.size(), "compute_chi");
  CVector rhs = symmetric_flux(p.sigma, zeta, theta);
  const CVector sp = multiply_projected(p.sigma, psi);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = 2.0 * rhs[i] + 2.0 * sp[i];

  ChiResult out;
  const double four_pi2 = 4.0 * kPi * kPi;
  const cplx q = four_pi2 * coeff_inner(rhs, psi) / coeff_inner(psi, psi).real();
  out.lambda_pp_compat = q.real();
  out.lambda_pp_imag = q.imag();
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= (out.lambda_pp_compat / four_pi2) * psi[i];
  out.compat_residual = std::abs(coeff_inner(rhs, psi));

  auto sol = fredholm_solve(p, theta, lambda, psi, rhs, opts);
  out.residual = sol.residual;
  out.chi = std::move(sol.u);
  return out;
}

SigmaStar effective_sigma(const PeriodicFunction& sigma, std::span<const cplx> psi, std::span<const cplx> zeta,
                          double theta) {
  check_sizes(zeta.size(), psi.size(), "effective_sigma");
  const CVector sp = multiply_projected(sigma, psi);
  const CVector dz = shifted_derivative(zeta, theta);
  const CVector sdp = multiply_projected(sigma, shifted_derivative(psi, theta));
  const cplx s = coeff_inner(sp, psi) + coeff_inner(sp, dz) - coeff_inner(sdp, zeta);
  SigmaStar out{s.real(), s.imag()};
  if (std::abs(out.imag) > 1e-10 * std::max(1.0, std::abs(out.value))) {
    throw NumericalError(fmt::format("sigma* has imaginary part {:.3e}", out.imag));
  }
  return out;
}

CorrectorSet compute_correctors(const CellProblem& p, const CellEigenpair& pair, double gap,
                                const FredholmOptions& opts) {
  CorrectorSet cs;
  cs.n = pair.n;
  cs.theta = pair.theta;
  cs.lambda = pair.lambda;
  cs.gap = gap;
  cs.psi = pair.psi;

  const auto zr = build_zeta_rhs(p.sigma, cs.psi, cs.theta);
  cs.compat_residual_zeta = std::abs(zr.projection);
  auto zeta = fredholm_solve(p, cs.theta, cs.lambda, cs.psi, zr.rhs, opts);
  cs.residual_zeta = zeta.residual;
  cs.ill_conditioned = zeta.ill_conditioned;
  cs.zeta = std::move(zeta.u);
  cs.orthogonality_zeta = std::abs(coeff_inner(cs.zeta, cs.psi));

  auto chi = compute_chi(p, cs.theta, cs.lambda, cs.psi, cs.zeta, opts);
  cs.lambda_pp_compat = chi.lambda_pp_compat;
  cs.compat_residual_chi = chi.compat_residual;
  cs.residual_chi = chi.residual;
  cs.chi = std::move(chi.chi);
  cs.orthogonality_chi = std::abs(coeff_inner(cs.chi, cs.psi));

  const auto s = effective_sigma(p.sigma, cs.psi, cs.zeta, cs.theta);
  cs.sigma_star_formula = s.value;
  cs.sigma_star_imag = s.imag;
  return cs;
}

CorrectorSet compute_correctors(const CellProblem& p, int n, double theta, const FredholmOptions& opts) {
  if (n < 1 || n >= p.dimension()) throw InputError(fmt::format("band index {} out of range", n));
  const auto pairs = solve_cell_eigen(assemble_cell_operator(p, theta), n + 1);
  const auto& pair = pairs[static_cast<std::size_t>(n - 1)];
  double gap = pairs[static_cast<std::size_t>(n)].lambda - pair.lambda;
  if (n > 1) gap = std::min(gap, pair.lambda - pairs[static_cast<std::size_t>(n - 2)].lambda);
  if (pair.degenerate) {
    throw HypothesisViolation("simple-critical-band",
                              fmt::format("lambda_{} at theta = {} is degenerate (gap {:.3e})", n, theta, gap));
  }
  return compute_correctors(p, pair, gap, opts);
}

double zeta_identity_error(const CellProblem& p, const CorrectorSet& cs, double h) {
  const CVector plus = fix_gauge(band_eigenpair(p, cs.n, cs.theta + h).psi, cs.psi);
  const CVector minus = fix_gauge(band_eigenpair(p, cs.n, cs.theta - h).psi, cs.psi);
  CVector fd(plus.size());
  for (std::size_t i = 0; i < fd.size(); ++i) fd[i] = (plus[i] - minus[i]) / (2.0 * h);
  fd = project_out(fd, cs.psi);
  const CVector target = project_out(cs.zeta, cs.psi);
  double e2 = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) e2 += std::norm(fd[i] - kTwoPi * kI * target[i]);
  return std::sqrt(e2);
}

}  // namespace blochhom
