#include <cmath>

#include "blochhom/rng.hpp"
#include "blochhom/types.hpp"
#include "doctest.h"

using namespace blochhom;

// Known-answer vectors for Philox4x64-10, cross-checked against numpy's
// Philox bit generator.
TEST_CASE("philox4x64-10 known answers") {
  using C = Philox4x64Counter;
  CHECK(philox4x64(C{0, 0, 0, 0}, {0, 0}) ==
        C{0x16554d9eca36314cULL, 0xdb20fe9d672d0fdcULL, 0xd7e772cee186176bULL, 0x7e68b68aec7ba23bULL});
  CHECK(philox4x64(C{1, 0, 0, 0}, {0, 0}) ==
        C{0x02f4ba6408e4d89bULL, 0x3dd62b0b9ca8c5b2ULL, 0x1c8667a55d902e79ULL, 0x907d7a052fd5b4dcULL});
  CHECK(philox4x64(C{0, 1, 0, 0}, {0, 0}) ==
        C{0xe85facf8b3b067d6ULL, 0xfdbc6a61c123b5f8ULL, 0x349bde9a4b8d60c1ULL, 0x39212690df8b178aULL});
  CHECK(philox4x64(C{7, 0, 7, 0}, {0x1234, 0xdead}) ==
        C{0xa0902fba63384f4dULL, 0xe1482820255ff689ULL, 0xc41bffc4118e91dcULL, 0x14beb8c00e884c1bULL});
  CHECK(philox4x64(C{8, 0, 7, 0}, {0x1234, 0xdead}) ==
        C{0x7c4192f8443162aeULL, 0x5fb5f01ead37d48dULL, 0x90d5f4c2aae38487ULL, 0xc7132bd6d298ac5dULL});
}

TEST_CASE("Wiener path structure and determinism") {
  const auto w = sample_wiener_path(1.0, 0.25, 42, 3);
  CHECK(w.n_steps == 4);
  CHECK(w.increments.size() == 4);
  double s = 0.0;
  for (double d : w.increments) s += d;
  CHECK(w.terminal_value() == doctest::Approx(s).epsilon(1e-15));
  CHECK(w.quadratic_variation(0) == 0.0);
  CHECK(w.quadratic_variation(4) == doctest::Approx(w.increments[0] * w.increments[0] + w.increments[1] * w.increments[1] +
                                                    w.increments[2] * w.increments[2] + w.increments[3] * w.increments[3]));

  const auto again = sample_wiener_path(1.0, 0.25, 42, 3);
  CHECK(again.increments == w.increments);
  CHECK(again.checksum() == w.checksum());
  CHECK(sample_wiener_path(1.0, 0.25, 42, 4).increments != w.increments);
  CHECK(sample_wiener_path(1.0, 0.25, 43, 3).increments != w.increments);

  // A longer path starts with the shorter one (same stream, more draws).
  const auto longer = sample_wiener_path(2.0, 0.25, 42, 3);
  for (int k = 0; k < 4; ++k) CHECK(longer.increments[k] == w.increments[k]);

  CHECK_THROWS_AS(sample_wiener_path(1.0, 0.3, 1, 0), InputError);
}

TEST_CASE("variance of W(T) over replicas") {
  const int m = 10000;
  double acc = 0.0;
  for (int r = 0; r < m; ++r) {
    const double wt = sample_wiener_path(1.0, 0.25, 2024, static_cast<std::uint64_t>(r)).terminal_value();
    acc += wt * wt;
  }
  CHECK(std::abs(acc / m - 1.0) < 0.05);
}

TEST_CASE("Gaussian stream moments") {
  GaussianStream g(7, 0);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = g.next();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  CHECK(std::abs(s1 / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
}
