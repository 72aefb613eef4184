#pragma once

// Dense complex linear algebra for the cell problems (matrices of order at
// most a few hundred): Hermitian eigendecomposition and LU solves.

#include <span>
#include <vector>

#include "blochhom/types.hpp"

namespace blochhom {

struct HermitianEigenResult {
  std::vector<double> values;  // ascending
  CMatrix vectors;             // column j pairs with values[j]; orthonormal
  int iterations = 0;          // total implicit QL sweeps
};

/// Householder reduction to real symmetric tridiagonal form followed by the
/// implicit-shift QL algorithm. Throws NumericalError when a single
/// eigenvalue needs more than `max_sweeps` QL sweeps.
HermitianEigenResult hermitian_eigen(const CMatrix& a, int max_sweeps = 60);

/// LU with partial pivoting; throws NumericalError on an exactly singular pivot.
class LuFactorization {
 public:
  explicit LuFactorization(CMatrix a);
  CVector solve(std::span<const cplx> b) const;
  /// Smallest over largest pivot modulus; a cheap conditioning indicator.
  double pivot_ratio() const noexcept { return pivot_ratio_; }

 private:
  CMatrix lu_;
  std::vector<std::size_t> perm_;
  double pivot_ratio_ = 1.0;
};

/// LAPACK-style gttrf/gttrs factorization of a complex tridiagonal matrix
/// with row interchanges. O(n) per solve.
class TridiagonalLu {
 public:
  /// lower/upper have length n-1, diag length n.
  TridiagonalLu(CVector lower, CVector diag, CVector upper);
  void solve_in_place(std::span<cplx> b) const;
  std::size_t size() const noexcept { return d_.size(); }

 private:
  CVector dl_, d_, du_, du2_, inv_d_;
  std::vector<unsigned char> swapped_;
};

}  // namespace blochhom
