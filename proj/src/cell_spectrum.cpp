#include "blochhom/cell_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "blochhom/linalg.hpp"

namespace blochhom {

void validate_cell_coefficients(const PeriodicFunction& sigma, const PeriodicFunction& c) {
  if (!sigma.positivity_bound()) {
    throw HypothesisViolation(
        "uniform positivity of sigma",
        "sigma must be real with min sigma >= nu > 0 (observed min " + std::to_string(sigma.min_sample()) + ")");
  }
  if (!c.is_real()) throw HypothesisViolation("real bounded coefficients", "c must be real-valued");
}

CellOperator assemble_cell_operator(const PeriodicFunction& sigma, const PeriodicFunction& c,
                                    double theta, int order, double spectral_shift) {
  validate_cell_coefficients(sigma, c);
  if (order < 1) throw InputError("cell operator: truncation order must be >= 1");
  if (!std::isfinite(theta)) throw InputError("cell operator: theta must be finite");
  const auto n = static_cast<std::size_t>(2 * order + 1);
  CellOperator op{theta, order, spectral_shift, CMatrix(n, n)};
  const double four_pi2 = 4.0 * kPi * kPi;
  for (int k = -order; k <= order; ++k) {
    for (int l = -order; l <= order; ++l) {
      cplx v = four_pi2 * (k + theta) * (l + theta) * sigma.coeff(k - l) + c.coeff(k - l);
      if (k == l) v -= spectral_shift;
      op.matrix(static_cast<std::size_t>(k + order), static_cast<std::size_t>(l + order)) = v;
    }
  }
  // Real sigma and c make the matrix Hermitian up to rounding in the
  // coefficients; symmetrize exactly so the eigensolver sees a Hermitian input.
  for (std::size_t i = 0; i < n; ++i) {
    op.matrix(i, i) = op.matrix(i, i).real();
    for (std::size_t j = i + 1; j < n; ++j) {
      const cplx avg = 0.5 * (op.matrix(i, j) + std::conj(op.matrix(j, i)));
      op.matrix(i, j) = avg;
      op.matrix(j, i) = std::conj(avg);
    }
  }
  return op;
}

CVector fix_gauge(std::span<const cplx> psi, std::span<const cplx> reference) {
  const double norm = coeff_norm(psi);
  if (norm == 0.0) throw InputError("fix_gauge: zero vector");
  CVector out(psi.begin(), psi.end());
  if (!reference.empty()) {
    const cplx overlap = coeff_inner(psi, reference);
    if (std::abs(overlap) > 1e-14 * norm * coeff_norm(reference)) {
      const cplx rot = std::conj(overlap) / std::abs(overlap);
      for (auto& z : out) z *= rot;
      return out;
    }
  }
  double largest = 0.0;
  for (const auto& z : psi) largest = std::max(largest, std::abs(z));
  std::size_t pick = 0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (std::abs(psi[i]) >= largest * (1.0 - 1e-9)) {
      pick = i;
      break;
    }
  }
  const cplx rot = std::conj(psi[pick]) / std::abs(psi[pick]);
  for (auto& z : out) z *= rot;
  out[pick] = std::abs(out[pick]);
  return out;
}

std::vector<CellEigenpair> solve_cell_eigen(const CellOperator& a, int n_max, double degeneracy_tol) {
  const int dim = static_cast<int>(a.matrix.rows());
  if (n_max < 1 || n_max > dim) {
    throw InputError("solve_cell_eigen: requested " + std::to_string(n_max) + " pairs from a " +
                     std::to_string(dim) + "-dimensional operator");
  }
  const auto eig = hermitian_eigen(a.matrix);
  std::vector<CellEigenpair> out;
  out.reserve(static_cast<std::size_t>(n_max));
  for (int j = 0; j < n_max; ++j) {
    const auto col = static_cast<std::size_t>(j);
    CellEigenpair p;
    p.n = j + 1;
    p.theta = a.theta;
    p.lambda = eig.values[col];
    CVector v = eig.vectors.column(col);
    const double nv = coeff_norm(v);
    for (auto& z : v) z /= nv;
    p.psi = fix_gauge(v);
    const CVector av = a.matrix.apply(p.psi);
    double r2 = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) r2 += std::norm(av[i] - p.lambda * p.psi[i]);
    p.residual = std::sqrt(r2);
    const double tol = degeneracy_tol * (1.0 + std::abs(p.lambda));
    const bool below = j > 0 && p.lambda - eig.values[col - 1] <= tol;
    const bool above = j + 1 < dim && eig.values[col + 1] - p.lambda <= tol;
    p.degenerate = below || above;
    out.push_back(std::move(p));
  }
  return out;
}

CellEigenpair band_eigenpair(const CellProblem& p, int n, double theta) {
  const int count = std::min(n + 1, p.dimension());
  auto pairs = solve_cell_eigen(assemble_cell_operator(p, theta), count);
  return std::move(pairs[static_cast<std::size_t>(n - 1)]);
}

std::vector<double> cell_spectrum_values(const CellProblem& p, double theta) {
  return hermitian_eigen(assemble_cell_operator(p, theta).matrix).values;
}

CVector apply_theta_derivative(const PeriodicFunction& sigma, std::span<const cplx> v, double theta) {
  const int order = window_order(v.size());
  const double four_pi2 = 4.0 * kPi * kPi;
  CVector out(v.size());
  for (int k = -order; k <= order; ++k) {
    cplx acc = 0.0;
    for (int l = -order; l <= order; ++l) {
      acc += four_pi2 * ((k + theta) + (l + theta)) * sigma.coeff(k - l) * v[static_cast<std::size_t>(l + order)];
    }
    out[static_cast<std::size_t>(k + order)] = acc;
  }
  return out;
}

}  // namespace blochhom
