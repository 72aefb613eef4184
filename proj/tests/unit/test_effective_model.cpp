#include <cmath>

#include "blochhom/effective_model.hpp"
#include "doctest.h"

using namespace blochhom;

namespace {

CellProblem make(CoefficientSpec sigma, CoefficientSpec c, int order = 16) {
  return {sample_periodic(sigma, 64), sample_periodic(c, 64), order};
}

CellProblem mathieu() { return make(CoefficientSpec::constant(1.0), CoefficientSpec::cosine(0.0, 2.0)); }

CVector unit_constant(int order) {
  CVector v(static_cast<std::size_t>(2 * order + 1));
  v[static_cast<std::size_t>(order)] = 1.0;
  return v;
}

// Fine-grid quadrature of int f(y) |psi(y)|^2 dy, independent of the
// coefficient-space convolution used by the library.
double quadrature(const std::function<double(double)>& f, std::span<const cplx> psi, int points = 4096) {
  double acc = 0.0;
  for (int m = 0; m < points; ++m) {
    const double y = static_cast<double>(m) / points;
    acc += f(y) * std::norm(evaluate_series(psi, y));
  }
  return acc / points;
}

struct Pipeline {
  CellProblem p;
  CriticalPoint cp;
  CorrectorSet cs;
};

Pipeline analyse(const CellProblem& p) {
  const auto b = compute_band_structure(p, uniform_theta_grid(33), 3);
  Pipeline out{p, locate_critical_point(p, b, 1, 0.0), {}};
  out.cs = compute_correctors(p, 1, out.cp.theta);
  return out;
}

}  // namespace

TEST_CASE("noise kind names") {
  for (auto k : {NoiseKind::none, NoiseKind::additive, NoiseKind::multiplicative})
    CHECK(noise_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(noise_kind_from_string("stratonovich"), InputError);
}

TEST_CASE("effective potential") {
  const auto x = uniform_x_grid(1.0, 8);
  const auto psi1 = unit_constant(4);

  // y-independent d: d* = a(x).
  const auto a = MacroProfile::linear(2.0, -1.0);
  const auto flat = MacroPotential::separable(a, PeriodicFunction::constant(1.0, 16), 1.0);
  const auto m = mathieu();
  const auto pair = band_eigenpair(m, 1, 0.0);
  const auto d1 = effective_d(flat, pair.psi, x);
  for (std::size_t j = 0; j < x.size(); ++j) CHECK(std::abs(d1[j] - a(x[j])) < 1e-12);

  // Zero-mean micro profile against psi = 1.
  const auto cosine = sample_periodic(CoefficientSpec::cosine(0.0, 1.0), 16);
  const auto zm = MacroPotential::separable(MacroProfile::constant(1.0), cosine, 1.0);
  for (double v : effective_d(zm, psi1, x)) CHECK(std::abs(v) < 1e-15);

  // x cos(2 pi y) against the Mathieu ground state: linear in x with the
  // slope of an independent fine quadrature.
  const auto lin = MacroPotential::separable(MacroProfile::linear(1.0, 0.0), cosine, 1.0);
  const double slope = quadrature([](double y) { return std::cos(kTwoPi * y); }, pair.psi);
  const auto d3 = effective_d(lin, pair.psi, x);
  for (std::size_t j = 0; j < x.size(); ++j) CHECK(std::abs(d3[j] - slope * x[j]) < 1e-12);
  CHECK(slope < 0.0);

  // Averaging bounds.
  for (std::size_t j = 0; j < x.size(); ++j) {
    CHECK(d3[j] >= -x[j] - 1e-14);
    CHECK(d3[j] <= x[j] + 1e-14);
  }
}

TEST_CASE("effective noise amplitude") {
  const auto psi1 = unit_constant(4);
  CHECK(effective_g(PeriodicFunction::constant(0.7, 16), psi1) == doctest::Approx(0.7));
  const auto cosine = sample_periodic(CoefficientSpec::cosine(0.0, 1.0), 16);
  CHECK(std::abs(effective_g(cosine, psi1)) < 1e-15);
  const auto pair = band_eigenpair(mathieu(), 1, 0.0);
  const double oracle = quadrature([](double y) { return std::cos(kTwoPi * y); }, pair.psi);
  CHECK(std::abs(effective_g(cosine, pair.psi) - oracle) < 1e-10);

  const std::vector<FourierTerm> cx = {{1, 1.0}};
  CHECK_THROWS_AS(effective_g(PeriodicFunction::from_coefficients(cx, 1, 8), psi1), HypothesisViolation);
}

TEST_CASE("free and constant-shift models") {
  const auto x = uniform_x_grid(1.0, 16);
  const auto one = PeriodicFunction::constant(1.0, 64);
  const auto f = analyse(make(CoefficientSpec::constant(1.0), CoefficientSpec::constant(0.0)));
  const auto m = build_effective_model(f.cp, f.cs, MacroPotential::zero(), one, NoiseKind::additive, x);
  CHECK(m.sigma_star == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(m.lambda) < 1e-12);
  CHECK(m.g_star == doctest::Approx(1.0).epsilon(1e-14));
  for (double v : m.d_star) CHECK(v == 0.0);

  const auto s = analyse(make(CoefficientSpec::constant(1.0), CoefficientSpec::constant(5.0)));
  const auto ms = build_effective_model(s.cp, s.cs, MacroPotential::zero(), one, NoiseKind::additive, x);
  CHECK(ms.sigma_star == doctest::Approx(m.sigma_star).epsilon(1e-12));
  CHECK(ms.g_star == m.g_star);
  CHECK(ms.lambda == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(ms.d_star == m.d_star);

  const auto none = build_effective_model(f.cp, f.cs, MacroPotential::zero(), one, NoiseKind::none, x);
  CHECK(none.g_star == 0.0);
}

TEST_CASE("Mathieu model composes the per-operation oracles") {
  const auto x = uniform_x_grid(1.0, 16);
  const auto pl = analyse(mathieu());
  const auto cosine = sample_periodic(CoefficientSpec::cosine(0.0, 1.0), 64);
  const auto d = MacroPotential::separable(MacroProfile::linear(1.0, 0.0), cosine, 1.0);
  const auto m = build_effective_model(pl.cp, pl.cs, d, cosine, NoiseKind::multiplicative, x);
  CHECK(m.sigma_star == doctest::Approx(pl.cs.sigma_star_formula));
  CHECK(std::abs(m.sigma_star - m.lambda_pp_fd / (8 * kPi * kPi)) < 1e-6 * m.sigma_star);
  const double slope = quadrature([](double y) { return std::cos(kTwoPi * y); }, pl.cs.psi);
  CHECK(std::abs(m.g_star - slope) < 1e-10);
  for (std::size_t j = 0; j < x.size(); ++j) CHECK(std::abs(m.d_star[j] - slope * x[j]) < 1e-10);
  CHECK(m.sigma_star_positive);
  CHECK(m.x_grid.size() == x.size());

  // Gauge invariance of every field.
  CorrectorSet rotated = pl.cs;
  CellEigenpair pair = band_eigenpair(pl.p, 1, pl.cp.theta);
  for (auto& z : pair.psi) z *= std::polar(1.0, 1.234);
  rotated = compute_correctors(pl.p, pair, pl.cs.gap);
  const auto m2 = build_effective_model(pl.cp, rotated, d, cosine, NoiseKind::multiplicative, x);
  CHECK(std::abs(m2.sigma_star - m.sigma_star) < 1e-12);
  CHECK(std::abs(m2.g_star - m.g_star) < 1e-14);
  for (std::size_t j = 0; j < x.size(); ++j) CHECK(std::abs(m2.d_star[j] - m.d_star[j]) < 1e-14);
}

TEST_CASE("a non-critical point is rejected") {
  const auto p = mathieu();
  const auto b = compute_band_structure(p, uniform_theta_grid(33), 3);
  auto cp = locate_critical_point(p, b, 1, 0.0);
  cp.critical = false;
  const auto cs = compute_correctors(p, 1, 0.0);
  CHECK_THROWS_AS(build_effective_model(cp, cs, MacroPotential::zero(), PeriodicFunction::constant(0.0, 8),
                                        NoiseKind::none, uniform_x_grid(1.0, 4)),
                  HypothesisViolation);
}
