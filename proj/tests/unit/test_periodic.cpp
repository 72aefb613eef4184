#include <cmath>
#include <random>

#include "blochhom/periodic.hpp"
#include "doctest.h"

using namespace blochhom;

namespace {

// Plain O(M^2) transform used as an oracle for the FFT path.
CVector naive_forward(const CVector& f) {
  const std::size_t m = f.size();
  CVector out(m);
  for (std::size_t k = 0; k < m; ++k) {
    cplx acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      acc += f[j] * std::polar(1.0, -kTwoPi * static_cast<double>(j * k) / static_cast<double>(m));
    }
    out[k] = acc / static_cast<double>(m);
  }
  return out;
}

double max_diff(std::span<const cplx> a, std::span<const cplx> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("cosine spec samples 2 cos(2 pi y)") {
  const std::vector<FourierTerm> terms = {{1, 1.0}, {-1, 1.0}};
  const auto c = PeriodicFunction::from_coefficients(terms, 1, 16);
  for (int j = 0; j < 16; ++j) CHECK(std::abs(c.samples()[j] - 2.0 * std::cos(kTwoPi * j / 16.0)) < 1e-14);
  CHECK(c.is_real());
}

TEST_CASE("constant spec has a single mean coefficient") {
  const auto f = sample_periodic(CoefficientSpec::constant(1.0), 8);
  CHECK(std::abs(f.coeff(0) - 1.0) < 1e-15);
  for (int k = 1; k <= f.order(); ++k) {
    CHECK(std::abs(f.coeff(k)) < 1e-15);
    CHECK(std::abs(f.coeff(-k)) < 1e-15);
  }
}

TEST_CASE("positivity bound of 1 + 0.5 cos") {
  const auto s = sample_periodic(CoefficientSpec::cosine(1.0, 0.5), 64);
  CHECK(s.min_sample() == doctest::Approx(0.5).epsilon(1e-14));
  REQUIRE(s.positivity_bound().has_value());
  CHECK(*s.positivity_bound() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_FALSE(sample_periodic(CoefficientSpec::cosine(0.0, 1.0), 64).positivity_bound().has_value());
}

TEST_CASE("sample grid too small for the spec is rejected") {
  CHECK_THROWS_AS(sample_periodic(CoefficientSpec::cosine(1.0, 0.5, 4), 8), InputError);
  CHECK_THROWS_AS(sample_periodic(CoefficientSpec::constant(std::nan("")), 8), InputError);
}

TEST_CASE("dft on simple inputs") {
  const CVector ones(4, 1.0);
  const auto c = dft_forward(ones);
  CHECK(std::abs(c[0] - 1.0) < 1e-15);
  for (int k = 1; k < 4; ++k) CHECK(std::abs(c[k]) < 1e-15);

  for (int m : {5, 8, 12}) {
    CVector e(m);
    e[1] = 1.0;
    const auto s = dft_inverse(e);
    for (int j = 0; j < m; ++j) CHECK(std::abs(s[j] - std::polar(1.0, kTwoPi * j / m)) < 1e-14);
  }
}

TEST_CASE("dft round trip and naive oracle") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  for (int m : {7, 32, 45, 64}) {
    CVector f(m);
    for (auto& v : f) v = {n(rng), m == 32 ? 0.0 : n(rng)};
    const auto c = dft_forward(f);
    CHECK(max_diff(c, naive_forward(f)) < 1e-13);
    CHECK(max_diff(dft_inverse(c), f) < 1e-12);
  }
}

TEST_CASE("torus inner products") {
  const auto one = PeriodicFunction::constant(1.0, 16);
  CHECK(std::abs(inner_product_torus(one, one) - 1.0) < 1e-15);
  const std::vector<FourierTerm> e1 = {{1, 1.0}};
  const auto wave = PeriodicFunction::from_coefficients(e1, 1, 16);
  CHECK(std::abs(inner_product_torus(wave, one)) < 1e-15);
  const auto cosine = sample_periodic(CoefficientSpec::cosine(0.0, 1.0), 16);
  CHECK(std::abs(inner_product_torus(cosine, cosine) - 0.5) < 1e-15);
  CHECK_THROWS_AS(inner_product_torus(cosine, PeriodicFunction::constant(1.0, 8)), InputError);
}

TEST_CASE("properties on random band-limited functions") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    const int K = 1 + trial % 6;
    const int M = 2 * K + 1 + trial;
    std::vector<FourierTerm> ta, tb;
    for (int k = -K; k <= K; ++k) {
      ta.push_back({k, {n(rng), n(rng)}});
      tb.push_back({k, {n(rng), n(rng)}});
    }
    const auto a = PeriodicFunction::from_coefficients(ta, K, M);
    const auto b = PeriodicFunction::from_coefficients(tb, K, M);

    // Parseval.
    double lhs = 0.0, rhs = 0.0;
    for (const auto& c : a.coeffs()) lhs += std::norm(c);
    for (const auto& s : a.samples()) rhs += std::norm(s);
    CHECK(std::abs(lhs - rhs / M) < 1e-12 * std::max(1.0, lhs));

    // Round trip samples -> coefficients -> samples.
    const auto back = PeriodicFunction::from_samples(a.samples(), K);
    CHECK(max_diff(back.samples(), a.samples()) < 1e-12);

    // Quadrature pairing equals the coefficient-space sum; conjugate symmetry.
    const cplx ip = inner_product_torus(a, b);
    CHECK(std::abs(ip - coeff_inner(a.coeffs(), b.coeffs())) < 1e-12);
    CHECK(std::abs(ip - std::conj(inner_product_torus(b, a))) < 1e-12);
    CHECK(inner_product_torus(a, a).real() >= 0.0);

    // Interpolation at an off-grid point.
    const double y = 0.123 + 0.01 * trial;
    cplx direct = 0.0;
    for (const auto& t : ta) direct += t.value * std::polar(1.0, kTwoPi * t.k * y);
    CHECK(std::abs(a(y) - direct) < 1e-12);
  }
}

TEST_CASE("real flag implies conjugate-symmetric coefficients") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CVector s(33);
  for (auto& v : s) v = u(rng);
  const auto f = PeriodicFunction::from_samples(s, 16);
  REQUIRE(f.is_real());
  for (int k = 0; k <= 16; ++k) CHECK(std::abs(f.coeff(-k) - std::conj(f.coeff(k))) < 1e-12);
}

TEST_CASE("coefficient-space helpers") {
  const auto sigma = sample_periodic(CoefficientSpec::cosine(1.0, 0.5), 32);
  CVector v(9);
  v[4] = 1.0;  // constant 1 on {-4..4}
  const auto sv = multiply_projected(sigma, v);
  CHECK(std::abs(sv[4] - 1.0) < 1e-15);
  CHECK(std::abs(sv[5] - 0.25) < 1e-15);
  CHECK(std::abs(sv[3] - 0.25) < 1e-15);

  const auto dv = shifted_derivative(v, 0.25);
  CHECK(std::abs(dv[4] - cplx(0.0, kTwoPi * 0.25)) < 1e-15);
  CHECK(std::abs(evaluate_series(v, 0.3) - 1.0) < 1e-15);
  CHECK(weighted_mean(sigma, v) == doctest::Approx(1.0));
  CHECK(coeff_norm(v) == doctest::Approx(1.0));
}

TEST_CASE("macro profiles") {
  const auto b = MacroProfile::bump(1.0, 0.5, 0.5);
  CHECK(b(0.5) == doctest::Approx(1.0));
  CHECK(b(0.2) == 0.0);
  CHECK(b(0.8) == 0.0);
  const double h = 1e-5;
  for (double x : {0.3, 0.45, 0.6, 0.7}) {
    CHECK(b.derivative(x) == doctest::Approx((b(x + h) - b(x - h)) / (2 * h)).epsilon(1e-6));
  }
  const auto s = MacroProfile::sine(2.0, 3, 1.0);
  CHECK(s(1.0 / 6.0) == doctest::Approx(2.0));
  CHECK(MacroProfile::linear(2.0, 1.0)(0.25) == doctest::Approx(1.5));
  CHECK_THROWS_AS(MacroProfile::bump(1.0, 0.5, 0.0), InputError);
}

TEST_CASE("macro potentials") {
  const auto b = sample_periodic(CoefficientSpec::cosine(0.0, 1.0), 16);
  const auto d = MacroPotential::separable(MacroProfile::linear(1.0, 0.0), b, 1.0);
  CHECK(d(0.5, 0.0) == doctest::Approx(0.5));
  CHECK(d.bound() >= 1.0 - 1e-12);
  CHECK_THROWS_AS(MacroPotential::separable(MacroProfile::linear(1.0, 0.0), b, 1.0, 0.5), InputError);

  std::vector<PeriodicFunction> rows = {PeriodicFunction::constant(0.0, 8), PeriodicFunction::constant(2.0, 8)};
  const auto g = MacroPotential::sampled(rows, 1.0);
  CHECK(g(0.25, 0.3) == doctest::Approx(0.5));
  CHECK(MacroPotential::zero()(0.3, 0.7) == 0.0);
}
