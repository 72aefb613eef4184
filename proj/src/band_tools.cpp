#include "blochhom/band_tools.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "blochhom/parallel.hpp"

namespace blochhom {
namespace {

void require_band(const CellProblem& p, int n) {
  if (n < 1 || n > p.dimension()) {
    throw InputError(fmt::format("band index {} outside 1..{}", n, p.dimension()));
  }
}

double wrap_theta(double theta) {
  const double r = theta - std::floor(theta + 0.5);
  return r == -0.5 && theta > 0.0 ? 0.5 : r;
}

}  // namespace

std::vector<double> uniform_theta_grid(int points) {
  if (points < 2) throw InputError("theta grid needs at least 2 points");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int j = 0; j < points; ++j) g[static_cast<std::size_t>(j)] = -0.5 + static_cast<double>(j) / (points - 1);
  return g;
}

BandStructure compute_band_structure(const CellProblem& p, std::vector<double> theta_grid, int n_bands,
                                     bool store_vectors, int threads) {
  if (theta_grid.empty()) throw InputError("band structure: empty theta grid");
  if (!std::is_sorted(theta_grid.begin(), theta_grid.end())) {
    throw InputError("band structure: theta grid must be sorted");
  }
  for (double t : theta_grid) {
    if (!(t >= -0.5 && t <= 0.5)) throw InputError(fmt::format("band structure: theta {} outside [-1/2, 1/2]", t));
  }
  require_band(p, n_bands);
  validate_cell_coefficients(p.sigma, p.c);

  BandStructure b;
  b.order = p.order;
  b.theta_grid = std::move(theta_grid);
  const std::size_t m = b.theta_grid.size();
  b.bands.assign(m, {});
  b.degenerate.assign(m, {});
  if (store_vectors) b.eigvecs.assign(m, {});

  parallel_for(m, threads, [&](std::size_t j) {
    std::vector<CellEigenpair> pairs;
    try {
      pairs = solve_cell_eigen(assemble_cell_operator(p, b.theta_grid[j]), n_bands);
    } catch (const NumericalError& e) {
      throw NumericalError(fmt::format("at theta = {}: {}", b.theta_grid[j], e.what()));
    }
    for (auto& pr : pairs) {
      b.bands[j].push_back(pr.lambda);
      b.degenerate[j].push_back(pr.degenerate ? 1 : 0);
      if (store_vectors) b.eigvecs[j].push_back(std::move(pr.psi));
    }
  });

  if (store_vectors) {
    for (std::size_t j = 1; j < m; ++j) {
      for (std::size_t n = 0; n < b.eigvecs[j].size(); ++n) {
        b.eigvecs[j][n] = fix_gauge(b.eigvecs[j][n], b.eigvecs[j - 1][n]);
      }
    }
  }
  return b;
}

SimplicityReport check_simplicity(const CellProblem& p, double theta, int n, double gap_tol) {
  require_band(p, n);
  const auto values = cell_spectrum_values(p, theta);
  const auto i = static_cast<std::size_t>(n - 1);
  SimplicityReport r;
  r.n = n;
  r.theta = theta;
  r.lambda = values[i];
  r.gap_below = i == 0 ? std::numeric_limits<double>::infinity() : values[i] - values[i - 1];
  r.gap_above = i + 1 == values.size() ? std::numeric_limits<double>::infinity() : values[i + 1] - values[i];
  r.gap = std::min(r.gap_below, r.gap_above);
  r.simple = r.gap > gap_tol;
  return r;
}

SecondDerivativeFd second_derivative_fd(const CellProblem& p, int n, double theta, double h, double gap_tol) {
  require_band(p, n);
  if (!(h > 0.0)) throw InputError("second_derivative_fd: step must be positive");
  const double offsets[] = {-h, -0.5 * h, 0.0, 0.5 * h, h};
  double lam[5];
  for (int s = 0; s < 5; ++s) {
    const auto rep = check_simplicity(p, theta + offsets[s], n, gap_tol);
    if (!rep.simple) {
      throw HypothesisViolation("simple-critical-band",
                                fmt::format("band {} crosses a neighbour inside the stencil at theta = {} (gap {})",
                                            n, theta + offsets[s], rep.gap));
    }
    lam[s] = rep.lambda;
  }
  SecondDerivativeFd out;
  out.h = h;
  out.coarse = (lam[4] - 2.0 * lam[2] + lam[0]) / (h * h);
  out.fine = (lam[3] - 2.0 * lam[2] + lam[1]) / (0.25 * h * h);
  out.value = (4.0 * out.fine - out.coarse) / 3.0;
  out.error_estimate = std::abs(out.value - out.fine);
  return out;
}

double band_slope(const CellProblem& p, const CellEigenpair& pair) {
  const CVector ap = apply_theta_derivative(p.sigma, pair.psi, pair.theta);
  return coeff_inner(ap, pair.psi).real();
}

CriticalPoint locate_critical_point(const CellProblem& p, const BandStructure& b, int n, double theta_init,
                                    const CriticalOptions& opts) {
  require_band(p, n);
  if (n > b.band_count()) throw InputError(fmt::format("band {} not present in the band structure", n));
  if (b.theta_grid.empty()) throw InputError("locate_critical_point: empty band structure");
  if (theta_init < b.theta_grid.front() || theta_init > b.theta_grid.back()) {
    throw InputError(fmt::format("theta_init {} outside the band grid hull", theta_init));
  }

  auto lambda_at = [&](double t) { return band_eigenpair(p, n, t).lambda; };
  auto passes = [&](const CellEigenpair& e) {
    return std::abs(band_slope(p, e)) <= opts.derivative_tol * (1.0 + std::abs(e.lambda));
  };

  CriticalPoint cp;
  cp.n = n;
  double theta = theta_init;
  const auto initial = band_eigenpair(p, n, theta_init);

  if (passes(initial)) {
    cp.method = "initial";
  } else {
    // Local extrema of the sampled band, with periodic wrap when the grid
    // covers the whole dual cell.
    const auto& g = b.theta_grid;
    const std::size_t m = g.size();
    const bool full_cell = m >= 3 && g.front() == -0.5 && g.back() == 0.5;
    struct Bracket {
      double lo, mid, hi;
      bool minimum;
    };
    std::optional<Bracket> best;
    double best_dist = std::numeric_limits<double>::infinity();
    auto consider = [&](double lo, double mid, double hi, double l_lo, double l_mid, double l_hi) {
      const bool is_min = l_mid <= l_lo && l_mid <= l_hi;
      const bool is_max = l_mid >= l_lo && l_mid >= l_hi;
      if (!is_min && !is_max) return;
      const double dist = std::abs(wrap_theta(mid - theta_init));
      if (dist < best_dist) {
        best_dist = dist;
        best = Bracket{lo, mid, hi, is_min};
      }
    };
    for (std::size_t j = 1; j + 1 < m; ++j) {
      consider(g[j - 1], g[j], g[j + 1], b.lambda(n, j - 1), b.lambda(n, j), b.lambda(n, j + 1));
    }
    if (full_cell) {
      consider(g[m - 2], 0.5, g[1] + 1.0, b.lambda(n, m - 2), b.lambda(n, m - 1), b.lambda(n, 1));
    }

    if (best) {
      const double sign = best->minimum ? 1.0 : -1.0;
      auto f = [&](double t) { return sign * lambda_at(t); };
      const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
      double a = best->lo, c = best->hi;
      double x1 = c - inv_phi * (c - a), x2 = a + inv_phi * (c - a);
      double f1 = f(x1), f2 = f(x2);
      while (c - a > 1e-9) {
        if (f1 <= f2) {
          c = x2;
          x2 = x1;
          f2 = f1;
          x1 = c - inv_phi * (c - a);
          f1 = f(x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + inv_phi * (c - a);
          f2 = f(x2);
        }
      }
      theta = 0.5 * (a + c);
      // Newton polish on the Hellmann-Feynman slope.
      for (int it = 0; it < 6; ++it) {
        const auto e = band_eigenpair(p, n, theta);
        if (passes(e)) break;
        double curvature = 0.0;
        try {
          curvature = second_derivative_fd(p, n, theta, opts.fd_step, opts.gap_tol).value;
        } catch (const HypothesisViolation&) {
          break;
        }
        if (curvature == 0.0) break;
        const double step = band_slope(p, e) / curvature;
        if (std::abs(step) > 0.5 * (best->hi - best->lo)) break;
        theta -= step;
      }
      theta = wrap_theta(theta);
      cp.method = "golden-section";
    } else {
      const double candidates[] = {-0.5, 0.0, 0.5};
      theta = *std::min_element(std::begin(candidates), std::end(candidates), [&](double x, double y) {
        return std::abs(x - theta_init) < std::abs(y - theta_init);
      });
      cp.boundary_candidate = true;
      cp.method = "boundary";
    }
  }

  for (double s : {0.0, -0.5, 0.5}) {
    if (theta != s && std::abs(theta - s) <= opts.snap_distance && passes(band_eigenpair(p, n, s))) {
      theta = s;
    }
  }

  const auto e = band_eigenpair(p, n, theta);
  cp.theta = theta;
  cp.lambda = e.lambda;
  cp.slope = band_slope(p, e);
  cp.critical = std::abs(cp.slope) <= opts.derivative_tol * (1.0 + std::abs(e.lambda));
  const auto simp = check_simplicity(p, theta, n, opts.gap_tol);
  cp.gap = simp.gap;
  cp.simple = simp.simple;
  cp.lambda_pp_fd = std::numeric_limits<double>::quiet_NaN();
  cp.lambda_pp_fd_error = std::numeric_limits<double>::quiet_NaN();
  if (cp.simple) {
    try {
      const auto fd = second_derivative_fd(p, n, theta, opts.fd_step, opts.gap_tol);
      cp.lambda_pp_fd = fd.value;
      cp.lambda_pp_fd_error = fd.error_estimate;
    } catch (const HypothesisViolation&) {
      // Crossing inside the stencil; curvature stays undefined.
    }
  }
  return cp;
}

}  // namespace blochhom
