#include <cmath>
#include <random>

#include "blochhom/band_tools.hpp"
#include "blochhom/correctors.hpp"
#include "doctest.h"

using namespace blochhom;

namespace {

CellProblem make(CoefficientSpec sigma, CoefficientSpec c, int order = 16) {
  return {sample_periodic(sigma, 64), sample_periodic(c, 64), order};
}

CellProblem free_problem(double s = 1.0) { return make(CoefficientSpec::constant(s), CoefficientSpec::constant(0.0)); }
CellProblem mathieu() { return make(CoefficientSpec::constant(1.0), CoefficientSpec::cosine(0.0, 2.0)); }

CVector unit_constant(int order) {
  CVector v(static_cast<std::size_t>(2 * order + 1));
  v[static_cast<std::size_t>(order)] = 1.0;
  return v;
}

double norm_of(std::span<const cplx> v) { return coeff_norm(v); }

const double k8Pi2 = 8.0 * kPi * kPi;

}  // namespace

TEST_CASE("zeta right-hand side in the free case") {
  const auto sigma = PeriodicFunction::constant(1.0, 64);
  const auto psi = unit_constant(16);
  CHECK(norm_of(build_zeta_rhs(sigma, psi, 0.0).rhs) == 0.0);

  const auto r = build_zeta_rhs(sigma, psi, 0.25);
  CHECK(std::abs(r.rhs[16] - cplx(0.0, kPi)) < 1e-14);
  for (std::size_t i = 0; i < r.rhs.size(); ++i)
    if (i != 16) CHECK(std::abs(r.rhs[i]) == 0.0);
}

TEST_CASE("zeta right-hand side is compatible at a Mathieu band edge") {
  const auto p = make(CoefficientSpec::cosine(1.0, 0.5), CoefficientSpec::cosine(0.0, 2.0));
  const auto pair = band_eigenpair(p, 1, 0.0);
  CHECK(std::abs(build_zeta_rhs(p.sigma, pair.psi, 0.0).projection) < 1e-10);
}

TEST_CASE("Fredholm solve: zero, incompatible and projected right-hand sides") {
  const auto p = free_problem();
  const auto psi = unit_constant(16);
  const CVector zero(psi.size());
  const auto z = fredholm_solve(p, 0.0, 0.0, psi, zero);
  CHECK(norm_of(z.u) == 0.0);

  try {
    fredholm_solve(p, 0.0, 0.0, psi, psi);
    FAIL("incompatible right-hand side accepted");
  } catch (const HypothesisViolation& e) {
    CHECK(e.hypothesis() == "Fredholm compatibility");
  }

  // Off the band edge the free right-hand side is a multiple of psi, so the
  // projected problem has the zero solution.
  const double theta = 0.25;
  const double lambda = 4.0 * kPi * kPi * theta * theta;
  auto rhs = build_zeta_rhs(p.sigma, psi, theta).rhs;
  const cplx c = coeff_inner(rhs, psi);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= c * psi[i];
  const auto sol = fredholm_solve(p, theta, lambda, psi, rhs);
  CHECK(norm_of(sol.u) < 1e-14);
}

TEST_CASE("Fredholm solve returns the orthogonal solution with small residual") {
  const auto p = mathieu();
  const auto pair = band_eigenpair(p, 1, 0.0);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  CVector rhs(pair.psi.size());
  for (auto& v : rhs) v = {g(rng), g(rng)};
  const cplx c = coeff_inner(rhs, pair.psi);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= c * pair.psi[i];
  const auto sol = fredholm_solve(p, 0.0, pair.lambda, pair.psi, rhs);
  CHECK(sol.residual < 1e-9 * std::max(1.0, norm_of(rhs)));
  CHECK(std::abs(coeff_inner(sol.u, pair.psi)) < 1e-12);
  const auto au = assemble_cell_operator(p, 0.0, pair.lambda).matrix.apply(sol.u);
  double r = 0.0;
  for (std::size_t i = 0; i < au.size(); ++i) r = std::max(r, std::abs(au[i] - rhs[i]));
  CHECK(r < 1e-10);
}

TEST_CASE("chi and curvature in the free case") {
  for (double s : {0.5, 1.0, 2.0}) {
    const auto p = free_problem(s);
    const auto psi = unit_constant(16);
    const CVector zeta(psi.size());
    const auto chi = compute_chi(p, 0.0, 0.0, psi, zeta);
    CHECK(chi.lambda_pp_compat == doctest::Approx(k8Pi2 * s).epsilon(1e-13));
    CHECK(norm_of(chi.chi) < 1e-14);
  }
}

TEST_CASE("effective sigma in the free case") {
  for (double s : {0.5, 1.0, 2.0}) {
    const auto cs = compute_correctors(free_problem(s), 1, 0.0);
    CHECK(std::abs(cs.sigma_star_formula - s) <= 1e-12 * s);
    CHECK(norm_of(cs.zeta) < 1e-14);
    const auto sig = PeriodicFunction::constant(s, 64);
    CHECK(effective_sigma(sig, unit_constant(16), CVector(33), 0.25).value == doctest::Approx(s).epsilon(1e-14));
  }
}

TEST_CASE("Mathieu consistency chain") {
  const auto p = mathieu();
  const auto cs = compute_correctors(p, 1, 0.0);
  const auto fd = second_derivative_fd(p, 1, 0.0);
  CHECK(std::abs(cs.lambda_pp_compat - fd.value) < 1e-6 * std::abs(fd.value));
  CHECK(std::abs(cs.sigma_star_formula - cs.lambda_pp_compat / k8Pi2) < 1e-10 * cs.sigma_star_formula);
  CHECK(std::abs(cs.sigma_star_formula - fd.value / k8Pi2) < 1e-6 * cs.sigma_star_formula);
  CHECK(cs.compat_residual_zeta < 1e-9);
  CHECK(cs.residual_zeta < 1e-9);
  CHECK(cs.compat_residual_chi < 1e-9);
  CHECK(cs.residual_chi < 1e-9);
  CHECK(cs.orthogonality_zeta < 1e-12);
  CHECK(cs.orthogonality_chi < 1e-12);
}

TEST_CASE("zeta identity converges at second order") {
  const auto p = make(CoefficientSpec::cosine(1.0, 0.5), CoefficientSpec::cosine(0.0, 2.0));
  const auto cs = compute_correctors(p, 1, 0.0);
  const double e1 = zeta_identity_error(p, cs, 1e-2);
  const double e2 = zeta_identity_error(p, cs, 5e-3);
  const double e3 = zeta_identity_error(p, cs, 2.5e-3);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
  CHECK(e2 / e3 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("sigma* invariances: re-phasing and zeta + mu psi") {
  const auto p = make(CoefficientSpec::cosine(1.0, 0.5), CoefficientSpec::cosine(0.0, 2.0));
  const auto base = compute_correctors(p, 1, 0.0);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 8; ++t) {
    // Re-phase psi; zeta recomputed from the rotated eigenvector.
    CellEigenpair pair = band_eigenpair(p, 1, 0.0);
    const cplx ph = std::polar(1.0, u(rng) * kPi);
    for (auto& z : pair.psi) z *= ph;
    const auto cs = compute_correctors(p, pair, base.gap);
    CHECK(std::abs(cs.sigma_star_formula - base.sigma_star_formula) < 1e-12);
    CHECK(std::abs(cs.lambda_pp_compat - base.lambda_pp_compat) < 1e-9);

    // Additive freedom along psi with complex mu.
    const cplx mu{u(rng), u(rng)};
    CVector zeta = base.zeta;
    for (std::size_t i = 0; i < zeta.size(); ++i) zeta[i] += mu * base.psi[i];
    const auto s = effective_sigma(p.sigma, base.psi, zeta, 0.0);
    CHECK(std::abs(s.value - base.sigma_star_formula) < 1e-12);
    CHECK(std::abs(s.imag) < 1e-12);
  }
}

TEST_CASE("degenerate band is rejected") {
  CHECK_THROWS_AS(compute_correctors(free_problem(), 2, 0.0), HypothesisViolation);
}
