#include "blochhom/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "blochhom/types.hpp"

namespace blochhom {
namespace {

constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;

__extension__ typedef unsigned __int128 u128;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const u128 p = static_cast<u128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

inline double to_open_unit(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x64Counter philox4x64(Philox4x64Counter ctr, Philox4x64Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, ctr[0], hi0, lo0);
    mulhilo(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

GaussianStream::GaussianStream(std::uint64_t seed, std::uint64_t lane, std::uint64_t stream)
    : key_{seed, 0x5769656e65725061ULL}, lane_(lane), stream_(stream) {}

void GaussianStream::refill() {
  const auto r = philox4x64({block_++, lane_, stream_, 0}, key_);
  for (int pair = 0; pair < 2; ++pair) {
    const double u1 = to_open_unit(r[2 * pair]);
    const double u2 = to_open_unit(r[2 * pair + 1]);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    buffer_[2 * pair] = rad * std::cos(ang);
    buffer_[2 * pair + 1] = rad * std::sin(ang);
  }
  used_ = 0;
}

double GaussianStream::next() {
  if (used_ == 4) refill();
  return buffer_[used_++];
}

double WienerPath::terminal_value() const {
  double w = 0.0;
  for (double x : increments) w += x;
  return w;
}

double WienerPath::quadratic_variation(int k) const {
  double q = 0.0;
  for (int i = 0; i < k && i < n_steps; ++i) q += increments[static_cast<std::size_t>(i)] * increments[static_cast<std::size_t>(i)];
  return q;
}

std::uint64_t WienerPath::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : increments) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) {
      h ^= bits & 0xffU;
      h *= 0x100000001b3ULL;
      bits >>= 8;
    }
  }
  return h;
}

WienerPath sample_wiener_path(double T, double dt, std::uint64_t seed, std::uint64_t replica) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("Wiener path: time step must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw InputError("Wiener path: horizon must be positive");
  const double ratio = T / dt;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-9 * ratio || steps < 1.0) {
    throw InputError(fmt::format("Wiener path: T / dt = {} is not an integer", ratio));
  }
  WienerPath w;
  w.dt = dt;
  w.n_steps = static_cast<int>(steps);
  w.seed = seed;
  w.replica = replica;
  w.increments.resize(static_cast<std::size_t>(w.n_steps));
  GaussianStream g(seed, replica);
  const double s = std::sqrt(dt);
  for (auto& x : w.increments) x = s * g.next();
  return w;
}

}  // namespace blochhom
