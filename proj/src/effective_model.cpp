#include "blochhom/effective_model.hpp"

#include <cmath>

#include <fmt/format.h>

namespace blochhom {

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::none: return "none";
    case NoiseKind::additive: return "additive";
    case NoiseKind::multiplicative: return "multiplicative";
  }
  return "none";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "none") return NoiseKind::none;
  if (s == "additive") return NoiseKind::additive;
  if (s == "multiplicative") return NoiseKind::multiplicative;
  throw InputError(fmt::format("unknown noise kind '{}'", s));
}

std::vector<double> uniform_x_grid(double length, int nx) {
  if (!(length > 0.0) || nx < 2) throw InputError("x grid needs length > 0 and at least 2 intervals");
  std::vector<double> x(static_cast<std::size_t>(nx) + 1);
  for (int j = 0; j <= nx; ++j) x[static_cast<std::size_t>(j)] = length * j / nx;
  return x;
}

std::vector<double> effective_d(const MacroPotential& d, std::span<const cplx> psi, std::span<const double> x_grid) {
  if (psi.empty()) throw InputError("effective_d: empty eigenvector");
  std::vector<double> out(x_grid.size());
  for (std::size_t j = 0; j < x_grid.size(); ++j) out[j] = d.weighted_slice_mean(x_grid[j], psi);
  return out;
}

double effective_g(const PeriodicFunction& g, std::span<const cplx> psi) {
  if (!g.is_real()) throw HypothesisViolation("real noise profile", "the noise amplitude g must be real-valued");
  return weighted_mean(g, psi);
}

EffectiveModel build_effective_model(const CriticalPoint& cp, const CorrectorSet& cs, const MacroPotential& d,
                                     const PeriodicFunction& g, NoiseKind noise_kind,
                                     std::span<const double> x_grid, const EffectiveOptions& opts) {
  if (!cp.simple) {
    throw HypothesisViolation("simple-critical-band",
                              fmt::format("lambda_{} at theta = {} is not simple (gap {:.3e})", cp.n, cp.theta, cp.gap));
  }
  if (!cp.critical) {
    throw HypothesisViolation("simple-critical-band",
                              fmt::format("theta = {} is not critical for band {} (slope {:.3e})", cp.theta, cp.n, cp.slope));
  }
  if (cs.n != cp.n || cs.theta != cp.theta) {
    throw InputError("build_effective_model: corrector set and critical point disagree on (n, theta)");
  }
  const double rel = std::abs(cs.lambda_pp_compat - cp.lambda_pp_fd) / std::max(1e-300, std::abs(cp.lambda_pp_fd));
  if (!(rel <= opts.lambda_pp_rel_tol)) {
    throw NumericalError(fmt::format("curvature cross-check failed: compat {} vs finite difference {} (rel {:.3e})",
                                     cs.lambda_pp_compat, cp.lambda_pp_fd, rel));
  }

  EffectiveModel m;
  m.n = cp.n;
  m.theta = cp.theta;
  m.lambda = cp.lambda;
  m.sigma_star = cs.sigma_star_formula;
  m.lambda_pp_compat = cs.lambda_pp_compat;
  m.lambda_pp_fd = cp.lambda_pp_fd;
  m.x_grid.assign(x_grid.begin(), x_grid.end());
  m.d_star = effective_d(d, cs.psi, x_grid);
  m.g_star = noise_kind == NoiseKind::none ? 0.0 : effective_g(g, cs.psi);
  m.psi.n = cs.n;
  m.psi.theta = cs.theta;
  m.psi.lambda = cs.lambda;
  m.psi.psi = cs.psi;
  m.noise_kind = noise_kind;
  m.sigma_star_positive = m.sigma_star > 0.0;
  return m;
}

}  // namespace blochhom
