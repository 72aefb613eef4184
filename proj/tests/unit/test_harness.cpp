#include <cmath>

#include "blochhom/harness.hpp"
#include "doctest.h"

using namespace blochhom;

namespace {

CellProblem make(CoefficientSpec sigma, CoefficientSpec c, int order = 16) {
  return {sample_periodic(sigma, 64), sample_periodic(c, 64), order};
}

CellProblem mathieu() { return make(CoefficientSpec::constant(1.0), CoefficientSpec::cosine(0.0, 2.0)); }

CVector constant_psi(int order) {
  CVector v(static_cast<std::size_t>(2 * order + 1));
  v[static_cast<std::size_t>(order)] = 1.0;
  return v;
}

CVector sample(const MacroProfile& f, std::span<const double> x) {
  CVector out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = f(x[j]);
  return out;
}

SweepConfig base_sweep(CellProblem cell) {
  SweepConfig c;
  c.analysis.cell = std::move(cell);
  c.analysis.theta_candidates = {0.0};
  c.analysis.theta_points = 33;
  c.analysis.n_bands = 3;
  c.v0 = MacroProfile::sine(1.0, 1, 1.0);
  c.pairing_macro = MacroProfile::sine(1.0, 1, 1.0);
  c.T = 0.05;
  c.dt = 1e-3;
  c.q_list = {4, 8};
  c.points_per_cell = 16;
  c.output_instants = 5;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("well-prepared data") {
  const auto x = uniform_x_grid(1.0, 64);
  const auto v0 = MacroProfile::sine(1.0, 1, 1.0);
  const auto w = well_prepared_initial(constant_psi(4), v0, 8, x);
  for (std::size_t j = 0; j < x.size(); ++j) CHECK(std::abs(w[j] - v0(x[j])) < 1e-15);

  // The mass of psi(x/eps) v0 tends to |psi|^2 |v0|^2 = 1/2.
  const auto psi = band_eigenpair(mathieu(), 1, 0.0).psi;
  const auto xf = uniform_x_grid(1.0, 64 * 32);
  CHECK(std::abs(discrete_mass(well_prepared_initial(psi, v0, 64, xf), 1.0 / xf.size()) - 0.5) < 1e-3);

  CHECK_THROWS_AS(well_prepared_initial(psi, MacroProfile::constant(1.0), 8, x), InputError);
  CHECK_THROWS_AS(well_prepared_initial(psi, v0, 0, x), InputError);
}

TEST_CASE("modulation round trip and phase") {
  const auto x = uniform_x_grid(1.0, 40);
  CVector v(x.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = {std::sin(3.0 * j), std::cos(1.7 * j)};
  const auto back = demodulate(modulate(v, x, 0.37, 1.0 / 16, 0.5, -0.8), x, 0.37, 1.0 / 16, 0.5, -0.8);
  for (std::size_t j = 0; j < v.size(); ++j) CHECK(std::abs(back[j] - v[j]) < 1e-14);

  const std::vector<double> quarter{0.25};
  const CVector one{1.0};
  CHECK(std::abs(modulate(one, quarter, 0.0, 0.5, 0.5, 0.0)[0] - kI) < 1e-15);
  CHECK(std::abs(modulate(one, std::vector<double>{0.0}, kPi / 8, 0.5, 0.0, 1.0)[0] - kI) < 1e-15);
  CHECK_THROWS_AS(modulate(v, quarter, 0.0, 0.5, 0.5, 0.0), InputError);
}

TEST_CASE("cubic lift") {
  auto cubic = [](double x) { return cplx(1.0 - 2.0 * x + 0.5 * x * x * x, x * x); };
  CVector coarse(17);
  for (std::size_t j = 0; j < coarse.size(); ++j) coarse[j] = cubic(j / 16.0);
  const auto fine = lift_cubic(coarse, 129);
  for (std::size_t j = 0; j < fine.size(); ++j) CHECK(std::abs(fine[j] - cubic(j / 128.0)) < 1e-13);
  CHECK(lift_cubic(coarse, 17) == coarse);

  // Fourth-order convergence on a smooth function.
  auto err = [](int n) {
    CVector c(static_cast<std::size_t>(n) + 1);
    for (int j = 0; j <= n; ++j) c[static_cast<std::size_t>(j)] = std::sin(kPi * j / n);
    const auto f = lift_cubic(c, 4 * static_cast<std::size_t>(n) + 1);
    double e = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) e = std::max(e, std::abs(f[j] - std::sin(kPi * j / (4.0 * n))));
    return e;
  };
  CHECK(err(16) / err(32) == doctest::Approx(16.0).epsilon(0.15));
  CHECK_THROWS_AS(lift_cubic(CVector(3), 9), InputError);
}

TEST_CASE("factorization error") {
  const auto psi = band_eigenpair(mathieu(), 1, 0.0).psi;
  const auto x = uniform_x_grid(1.0, 256);
  const auto v0 = MacroProfile::sine(1.0, 1, 1.0);
  const auto exact = well_prepared_initial(psi, v0, 8, x);
  CHECK(factorization_error_at(exact, sample(v0, x), psi, 8, 1.0) < 1e-15);

  // A constant offset c has error |c| sqrt(L).
  CVector shifted = exact;
  for (auto& z : shifted) z += cplx(0.0, 0.3);
  CHECK(factorization_error_at(shifted, sample(v0, x), psi, 8, 1.0) == doctest::Approx(0.3).epsilon(1e-13));

  // A coarse homogenized field is lifted before comparison.
  const auto xc = uniform_x_grid(1.0, 64);
  CHECK(factorization_error_at(exact, sample(v0, xc), psi, 8, 1.0) < 1e-5);
}

TEST_CASE("two-scale pairings") {
  const double eps = 1.0 / 16;
  const auto x = uniform_x_grid(1.0, 16 * 32);
  TwoScaleTest plain;
  const auto f = MacroProfile::linear(2.0, 1.0);
  CHECK(std::abs(two_scale_pairing(sample(f, x), 1.0, plain, eps) - 2.0) < 1e-14);

  // Oscillation matched by the micro test function: int cos^2 = 1/2.
  CVector osc(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) osc[j] = std::cos(kTwoPi * x[j] / eps);
  TwoScaleTest cosine;
  cosine.micro = sample_periodic(CoefficientSpec::cosine(0.0, 1.0), 16);
  CHECK(std::abs(two_scale_pairing(osc, 1.0, cosine, eps) - 0.5) < 1e-12);

  // Unmatched oscillation: int sin(pi x) cos(2 pi q x) dx = 2 / (pi (1 - 4 q^2)).
  double prev = 1.0;
  for (int q : {4, 8, 16, 32}) {
    const auto xq = uniform_x_grid(1.0, q * 32);
    CVector w(xq.size());
    for (std::size_t j = 0; j < xq.size(); ++j) w[j] = std::sin(kPi * xq[j]) * std::cos(kTwoPi * q * xq[j]);
    const cplx p = two_scale_pairing(w, 1.0, plain, 1.0 / q);
    const double oracle = 2.0 / (kPi * (1.0 - 4.0 * q * q));
    CHECK(std::abs(p - oracle) < 1e-2 * std::abs(oracle));
    CHECK(std::abs(p) < prev);
    prev = std::abs(p);
  }
  CHECK(prev < 1e-3);

  // The eps field psi(x/eps) v(x) paired with phi(x) psi(y) approaches the
  // tensor limit int v phi * |psi|^2.
  const auto psi = band_eigenpair(mathieu(), 1, 0.0).psi;
  std::vector<FourierTerm> terms;
  for (int k = -16; k <= 16; ++k) terms.push_back({k, psi[static_cast<std::size_t>(k + 16)]});
  TwoScaleTest tpsi;
  tpsi.macro = MacroProfile::sine(1.0, 1, 1.0);
  tpsi.micro = PeriodicFunction::from_coefficients(terms, 16, 128);
  const auto v0 = MacroProfile::sine(1.0, 1, 1.0);
  const auto xf = uniform_x_grid(1.0, 64 * 32);
  const cplx eps_pair = two_scale_pairing(well_prepared_initial(psi, v0, 64, xf), 1.0, tpsi, 1.0 / 64);
  const cplx limit = two_scale_limit(
      [&](double xx, double y) { return v0(xx) * evaluate_series(psi, y); }, 1.0, tpsi, 512, 64);
  CHECK(std::abs(limit - 0.5) < 1e-5);
  CHECK(std::abs(eps_pair - limit) < 1e-3);

  CHECK_THROWS_AS(two_scale_pairing(sample(f, uniform_x_grid(1.0, 64)), 1.0, plain, 1.0 / 16), InputError);
}

TEST_CASE("strict decrease rule") {
  auto row = [](double mean, double se) {
    EpsSummary s;
    s.sup_mean = mean;
    s.sup_stderr = se;
    return s;
  };
  CHECK(strictly_decreasing({row(1.0, 0.1), row(0.5, 0.1), row(0.2, 0.05)}));
  CHECK_FALSE(strictly_decreasing({row(1.0, 0.1), row(0.95, 0.1)}));
  CHECK_FALSE(strictly_decreasing({row(1.0, 0.0), row(1.2, 0.0)}));
  CHECK_FALSE(strictly_decreasing({row(1.0, 0.0)}));
  const auto t = output_instants(1.0, 4);
  CHECK(t == std::vector<double>{0.25, 0.5, 0.75, 1.0});
  CHECK_THROWS_AS(output_instants(1.0, 0), InputError);
}

TEST_CASE("constant coefficients: the two solves coincide") {
  for (auto kind : {NoiseKind::none, NoiseKind::additive, NoiseKind::multiplicative}) {
    auto cfg = base_sweep(make(CoefficientSpec::constant(1.0), CoefficientSpec::constant(5.0), 4));
    cfg.noise = kind;
    cfg.noise_profile = PeriodicFunction::constant(0.6, 8);
    cfg.replicas = 3;
    const auto rep = convergence_sweep(cfg);
    CHECK(rep.sigma_star == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& s : rep.per_eps) {
      CHECK(s.replicas_completed == 3);
      CHECK(s.sup_mean < 1e-13);
      for (std::size_t k = 0; k < s.t.size(); ++k) CHECK(std::abs(s.pairing_mean[k] - s.pairing_limit_mean[k]) < 1e-13);
    }
    CHECK(rep.verdict == "not strictly decreasing");
  }
}

TEST_CASE("deterministic Mathieu sweep converges at first order") {
  auto cfg = base_sweep(mathieu());
  cfg.q_list = {8, 16, 32};
  // Coarser cells leave a discrete band-energy drift q^2 (lambda_h - lambda)
  // that grows with q and masks the first-order decay.
  cfg.points_per_cell = 128;
  cfg.T = 0.1;
  cfg.dt = 5e-4;
  const auto rep = convergence_sweep(cfg);
  CHECK(rep.monotone);
  CHECK(rep.verdict == "strictly decreasing");
  const auto& e = rep.per_eps;
  for (std::size_t i = 1; i < e.size(); ++i) {
    CHECK(e[i - 1].sup_mean / e[i].sup_mean == doctest::Approx(2.0).epsilon(0.25));
  }
  CHECK(e[0].max_step_drift < 1e-10);
  CHECK(std::abs(rep.sigma_star - rep.analysis.correctors.sigma_star_formula) < 1e-15);
}

TEST_CASE("replica statistics and thread determinism") {
  auto cfg = base_sweep(mathieu());
  cfg.q_list = {4};
  cfg.noise = NoiseKind::additive;
  cfg.noise_profile = sample_periodic(CoefficientSpec::cosine(0.5, 1.0), 16);

  cfg.replicas = 200;
  const auto small = convergence_sweep(cfg);
  cfg.replicas = 800;
  const auto large = convergence_sweep(cfg);
  const double ratio = large.per_eps[0].sup_stderr / small.per_eps[0].sup_stderr;
  CHECK(ratio > 0.4);
  CHECK(ratio < 0.6);
  CHECK(std::abs(large.per_eps[0].sup_mean - small.per_eps[0].sup_mean) <
        4.0 * std::hypot(small.per_eps[0].sup_stderr, large.per_eps[0].sup_stderr));

  cfg.replicas = 12;
  cfg.q_list = {4, 8};
  cfg.threads = 1;
  const auto a = convergence_sweep(cfg);
  cfg.threads = 3;
  const auto b = convergence_sweep(cfg);
  for (std::size_t e = 0; e < a.per_eps.size(); ++e) {
    CHECK(a.per_eps[e].err_mean == b.per_eps[e].err_mean);
    CHECK(a.per_eps[e].err_stderr == b.per_eps[e].err_stderr);
    CHECK(a.per_eps[e].sup_mean == b.per_eps[e].sup_mean);
    CHECK(a.per_eps[e].pairing_mean == b.per_eps[e].pairing_mean);
  }
}

TEST_CASE("sweep input checks") {
  auto cfg = base_sweep(mathieu());
  cfg.replicas = 0;
  CHECK_THROWS_AS(convergence_sweep(cfg), InputError);
  cfg.replicas = 1;
  cfg.points_per_cell = 8;
  CHECK_THROWS_AS(convergence_sweep(cfg), InputError);
  cfg.points_per_cell = 16;
  cfg.q_list.clear();
  CHECK_THROWS_AS(convergence_sweep(cfg), InputError);

  BandAnalysisConfig bad;
  bad.cell = make(CoefficientSpec::constant(1.0), CoefficientSpec::constant(0.0), 4);
  bad.band = 2;
  bad.theta_candidates = {0.0};
  CHECK_THROWS_AS(analyze_band(bad), HypothesisViolation);
}
