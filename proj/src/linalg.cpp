#include "blochhom/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace blochhom {
namespace {

// Implicit QL with Wilkinson-type shifts on a real symmetric tridiagonal
// matrix (diag d, off-diagonal e[i] between rows i and i+1, e[n-1] unused).
// Rotations are accumulated into the columns of z.
int tridiagonal_ql(std::vector<double>& d, std::vector<double>& e, CMatrix& z, int max_sweeps) {
  const std::size_t n = d.size();
  const double eps = std::numeric_limits<double>::epsilon();
  double shift_total = 0.0;
  double tst1 = 0.0;
  int total = 0;
  e[n - 1] = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n - 1 && std::abs(e[m]) > eps * tst1) ++m;
    if (m > l) {
      int sweeps = 0;
      do {
        if (++sweeps > max_sweeps) {
          throw NumericalError("Hermitian eigensolver did not converge for eigenvalue " +
                               std::to_string(l) + " after " + std::to_string(max_sweeps) +
                               " QL sweeps");
        }
        ++total;
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        shift_total += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          for (std::size_t k = 0; k < n; ++k) {
            const cplx zk1 = z(k, ii + 1);
            z(k, ii + 1) = s * z(k, ii) + c * zk1;
            z(k, ii) = c * z(k, ii) - s * zk1;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += shift_total;
    e[l] = 0.0;
  }
  return total;
}

}  // namespace

HermitianEigenResult hermitian_eigen(const CMatrix& input, int max_sweeps) {
  const std::size_t n = input.rows();
  if (n == 0 || input.cols() != n) throw InputError("hermitian_eigen: matrix must be square and non-empty");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const cplx z = input(i, j);
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        throw InputError("hermitian_eigen: non-finite matrix entry");
      }
    }
  }

  CMatrix a = input;
  CMatrix q = CMatrix::identity(n);

  // Householder: annihilate a(k+2.., k) with H = I - tau v v^H acting on rows/cols k+1..
  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t m = n - k - 1;
    CVector v(m);
    double xnorm2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      v[i] = a(k + 1 + i, k);
      xnorm2 += std::norm(v[i]);
    }
    const double tail2 = xnorm2 - std::norm(v[0]);
    if (tail2 == 0.0) continue;
    const double xnorm = std::sqrt(xnorm2);
    const double x0abs = std::abs(v[0]);
    const cplx phase = x0abs > 0.0 ? v[0] / x0abs : cplx{1.0};
    const cplx alpha = -phase * xnorm;
    v[0] -= alpha;
    const double vnorm2 = 2.0 * xnorm * (xnorm + x0abs);
    const double tau = 2.0 / vnorm2;

    // p = tau * A_sub v ; beta = (tau/2) v^H p ; w = p - beta v
    CVector p(m);
    for (std::size_t i = 0; i < m; ++i) {
      cplx acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += a(k + 1 + i, k + 1 + j) * v[j];
      p[i] = tau * acc;
    }
    cplx vhp = 0.0;
    for (std::size_t i = 0; i < m; ++i) vhp += std::conj(v[i]) * p[i];
    const double beta = 0.5 * tau * vhp.real();
    for (std::size_t i = 0; i < m; ++i) p[i] -= beta * v[i];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        a(k + 1 + i, k + 1 + j) -= v[i] * std::conj(p[j]) + p[i] * std::conj(v[j]);
      }
    }
    a(k + 1, k) = alpha;
    a(k, k + 1) = std::conj(alpha);
    for (std::size_t i = 1; i < m; ++i) {
      a(k + 1 + i, k) = 0.0;
      a(k, k + 1 + i) = 0.0;
    }
    // Q <- Q H
    for (std::size_t r = 0; r < n; ++r) {
      cplx acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += q(r, k + 1 + j) * v[j];
      acc *= tau;
      for (std::size_t j = 0; j < m; ++j) q(r, k + 1 + j) -= acc * std::conj(v[j]);
    }
  }

  // Diagonal unitary scaling that makes the off-diagonal real and non-negative.
  std::vector<double> d(n), e(n, 0.0);
  CVector phase(n, cplx{1.0});
  for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i).real();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const cplx sub = a(i + 1, i);
    const double mag = std::abs(sub);
    e[i] = mag;
    phase[i + 1] = mag > 0.0 ? phase[i] * (sub / mag) : phase[i];
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < n; ++j) q(r, j) *= phase[j];
  }

  HermitianEigenResult out;
  out.iterations = tridiagonal_ql(d, e, q, max_sweeps);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });
  out.values.resize(n);
  out.vectors = CMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = d[order[j]];
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, j) = q(r, order[j]);
  }
  return out;
}

// ---------------------------------------------------------------------------

LuFactorization::LuFactorization(CMatrix a) : lu_(std::move(a)) {
  const std::size_t n = lu_.rows();
  if (n == 0 || lu_.cols() != n) throw InputError("LU: matrix must be square and non-empty");
  perm_.resize(n);
  std::iota(perm_.begin(), perm_.end(), 0);
  double pmax = 0.0;
  double pmin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(lu_(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best == 0.0) throw NumericalError("LU: singular matrix at column " + std::to_string(k));
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
      std::swap(perm_[k], perm_[piv]);
    }
    pmax = std::max(pmax, best);
    pmin = std::min(pmin, best);
    const cplx inv = 1.0 / lu_(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const cplx f = lu_(i, k) * inv;
      lu_(i, k) = f;
      if (f == cplx{}) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
    }
  }
  pivot_ratio_ = pmin / pmax;
}

CVector LuFactorization::solve(std::span<const cplx> b) const {
  const std::size_t n = lu_.rows();
  if (b.size() != n) throw InputError("LU solve: size mismatch");
  CVector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
    x[i] /= lu_(i, i);
  }
  return x;
}

// ---------------------------------------------------------------------------

TridiagonalLu::TridiagonalLu(CVector lower, CVector diag, CVector upper)
    : dl_(std::move(lower)), d_(std::move(diag)), du_(std::move(upper)) {
  const std::size_t n = d_.size();
  if (n == 0 || dl_.size() + 1 != n || du_.size() + 1 != n) {
    throw InputError("tridiagonal factorization: inconsistent band lengths");
  }
  du2_.assign(n > 2 ? n - 2 : 0, cplx{});
  swapped_.assign(n > 1 ? n - 1 : 0, 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::abs(d_[i]) >= std::abs(dl_[i])) {
      if (d_[i] == cplx{}) throw NumericalError("tridiagonal factorization: zero pivot at row " + std::to_string(i));
      const cplx f = dl_[i] / d_[i];
      dl_[i] = f;
      d_[i + 1] -= f * du_[i];
    } else {
      const cplx f = d_[i] / dl_[i];
      d_[i] = dl_[i];
      dl_[i] = f;
      const cplx tmp = du_[i];
      du_[i] = d_[i + 1];
      d_[i + 1] = tmp - f * d_[i + 1];
      if (i + 2 < n) {
        du2_[i] = du_[i + 1];
        du_[i + 1] = -f * du_[i + 1];
      }
      swapped_[i] = 1;
    }
  }
  if (d_[n - 1] == cplx{}) throw NumericalError("tridiagonal factorization: zero pivot at last row");
  inv_d_.resize(n);
  for (std::size_t i = 0; i < n; ++i) inv_d_[i] = 1.0 / d_[i];
}

void TridiagonalLu::solve_in_place(std::span<cplx> b) const {
  const std::size_t n = d_.size();
  if (b.size() != n) throw InputError("tridiagonal solve: size mismatch");
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!swapped_[i]) {
      b[i + 1] -= dl_[i] * b[i];
    } else {
      const cplx tmp = b[i];
      b[i] = b[i + 1];
      b[i + 1] = tmp - dl_[i] * b[i];
    }
  }
  b[n - 1] *= inv_d_[n - 1];
  if (n > 1) b[n - 2] = (b[n - 2] - du_[n - 2] * b[n - 1]) * inv_d_[n - 2];
  if (n > 2) {
    for (std::size_t i = n - 2; i-- > 0;) {
      b[i] = (b[i] - du_[i] * b[i + 1] - du2_[i] * b[i + 2]) * inv_d_[i];
    }
  }
}

}  // namespace blochhom
