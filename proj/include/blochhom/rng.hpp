#pragma once

// Counter-based Philox4x64-10 generator and Gaussian Wiener increments.

#include <array>
#include <cstdint>
#include <vector>

namespace blochhom {

using Philox4x64Counter = std::array<std::uint64_t, 4>;
using Philox4x64Key = std::array<std::uint64_t, 2>;

/// One Philox4x64 block with 10 rounds (Random123 reference algorithm).
Philox4x64Counter philox4x64(Philox4x64Counter ctr, Philox4x64Key key);

/// Standard normal variates from the block stream (seed, stream, lane), drawn
/// as Box-Muller pairs. Block b uses counter {b, lane, stream, 0}.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t seed, std::uint64_t lane, std::uint64_t stream = 0);
  double next();

 private:
  void refill();
  Philox4x64Key key_;
  std::uint64_t lane_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<double, 4> buffer_{};
  int used_ = 4;
};

struct WienerPath {
  double dt = 0.0;
  int n_steps = 0;
  std::vector<double> increments;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;

  double terminal_value() const;
  /// Realized quadratic variation up to step k (exclusive).
  double quadratic_variation(int k) const;
  /// Order-sensitive fingerprint of the increments (FNV-1a over the bits).
  std::uint64_t checksum() const;
};

/// n_steps = T/dt (must be integral within 1e-9 relative); increments are
/// sqrt(dt) Z with Z from GaussianStream(seed, replica).
WienerPath sample_wiener_path(double T, double dt, std::uint64_t seed, std::uint64_t replica);

}  // namespace blochhom
