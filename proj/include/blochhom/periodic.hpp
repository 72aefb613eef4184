#pragma once

// 1-periodic functions on the unit torus, held both as a truncated Fourier
// series f(y) = sum_{|k|<=K} fhat(k) exp(2 pi i k y) and as M uniform samples.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "blochhom/types.hpp"

namespace blochhom {

/// Forward DFT in standard order: fhat[k] = (1/M) sum_j f_j exp(-2 pi i j k / M),
/// index k >= M/2 standing for k - M. Radix-2 FFT when M is a power of two.
CVector dft_forward(std::span<const cplx> samples);

/// Inverse of dft_forward: f_j = sum_k fhat[k] exp(2 pi i j k / M).
CVector dft_inverse(std::span<const cplx> coeffs);

struct FourierTerm {
  int k = 0;
  cplx value;
  bool operator==(const FourierTerm&) const = default;
};

/// Coefficient specification as it appears in run configurations.
struct CoefficientSpec {
  struct Fourier {
    std::vector<FourierTerm> terms;
    bool operator==(const Fourier&) const = default;
  };
  /// mean + amplitude * cos(2 pi harmonic y)
  struct Cosine {
    double mean = 0.0;
    double amplitude = 0.0;
    int harmonic = 1;
    bool operator==(const Cosine&) const = default;
  };
  struct Constant {
    double value = 0.0;
    bool operator==(const Constant&) const = default;
  };

  std::variant<Constant, Cosine, Fourier> form = Constant{};

  static CoefficientSpec constant(double v) { return {Constant{v}}; }
  static CoefficientSpec cosine(double mean, double amplitude, int harmonic = 1) {
    return {Cosine{mean, amplitude, harmonic}};
  }

  int order() const;
  bool operator==(const CoefficientSpec&) const = default;
};

class PeriodicFunction {
 public:
  PeriodicFunction() : PeriodicFunction(constant(0.0, 1)) {}

  /// Band-limited function from explicit coefficients; terms with |k| > order
  /// are rejected. Requires grid >= 2*order+1.
  static PeriodicFunction from_coefficients(std::span<const FourierTerm> terms, int order, int grid);

  /// Projection of uniform samples onto |k| <= order. Aliasing of content
  /// above the truncation is accepted.
  static PeriodicFunction from_samples(std::span<const cplx> samples, int order);

  /// Samples a closed form on `grid` points and projects; see from_samples.
  static PeriodicFunction from_function(const std::function<double(double)>& f, int order, int grid);

  static PeriodicFunction constant(double value, int grid);

  int order() const noexcept { return order_; }
  int grid_size() const noexcept { return static_cast<int>(samples_.size()); }

  /// fhat(k); zero outside the truncation window.
  cplx coeff(int k) const noexcept {
    return (k < -order_ || k > order_) ? cplx{} : coeffs_[static_cast<std::size_t>(k + order_)];
  }
  std::span<const cplx> coeffs() const noexcept { return coeffs_; }
  std::span<const cplx> samples() const noexcept { return samples_; }

  bool is_real() const noexcept { return real_; }
  double min_sample() const;
  double max_abs_sample() const;

  /// nu = min sample when the function is real and strictly positive.
  std::optional<double> positivity_bound() const;

  /// Trigonometric interpolation at an arbitrary point.
  cplx operator()(double y) const;
  double real_at(double y) const { return (*this)(y).real(); }

 private:
  PeriodicFunction(int order, CVector coeffs, CVector samples);

  int order_ = 0;
  CVector coeffs_;
  CVector samples_;
  bool real_ = true;
};

PeriodicFunction sample_periodic(const CoefficientSpec& spec, int grid);

/// Integral over the torus of a * conj(b) with the uniform rule.
cplx inner_product_torus(const PeriodicFunction& a, const PeriodicFunction& b);

// ---------------------------------------------------------------------------
// Coefficient-space algebra on symmetric index windows {-K..K}, used by the
// cell solvers. A vector of length 2K+1 stores index k at position k+K.

inline int window_order(std::size_t length) { return static_cast<int>((length - 1) / 2); }

/// (f v)_k = sum_l fhat(k-l) v_l, projected back onto the window of v.
CVector multiply_projected(const PeriodicFunction& f, std::span<const cplx> v);

/// (d/dy + 2 pi i theta) in coefficient space.
CVector shifted_derivative(std::span<const cplx> v, double theta);

/// sum_k a_k conj(b_k); equals the torus L2 pairing of the two series.
cplx coeff_inner(std::span<const cplx> a, std::span<const cplx> b);

double coeff_norm(std::span<const cplx> v);

/// Evaluates sum_k v_k exp(2 pi i k y) for a window vector.
cplx evaluate_series(std::span<const cplx> v, double y);

/// Integral over the torus of f |psi|^2, exact for band-limited data.
double weighted_mean(const PeriodicFunction& f, std::span<const cplx> psi);

// ---------------------------------------------------------------------------

/// Real macroscopic profile on D = (0, L): coefficient a(x) of separable
/// potentials and initial envelopes v0(x).
class MacroProfile {
 public:
  enum class Kind { constant, linear, sine, bump, sine_bump };

  static MacroProfile constant(double value);
  static MacroProfile linear(double slope, double intercept);
  /// amplitude * sin(mode * pi * x / length)
  static MacroProfile sine(double amplitude, int mode, double length);
  /// C-infinity bump exp(1 - 1/(1-r^2)) with r = (x - center)/(width/2).
  static MacroProfile bump(double amplitude, double center, double width);
  /// sine(1 mode) times bump.
  static MacroProfile sine_bump(double amplitude, double center, double width, double length);

  Kind kind() const noexcept { return kind_; }
  const std::vector<double>& params() const noexcept { return params_; }

  double operator()(double x) const;
  double derivative(double x) const;

  bool operator==(const MacroProfile&) const = default;

 private:
  MacroProfile(Kind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}
  Kind kind_ = Kind::constant;
  std::vector<double> params_;
};

/// d(x, y): bounded in x, periodic and continuous in y.
class MacroPotential {
 public:
  enum class Kind { zero, separable, grid };

  MacroPotential() = default;

  static MacroPotential zero() { return {}; }

  /// d(x,y) = a(x) b(y). `declared_bound` is checked on a sampling of D x T.
  static MacroPotential separable(MacroProfile a, PeriodicFunction b, double length,
                                  std::optional<double> declared_bound = std::nullopt);

  /// rows[j] is d(x_j, .) at x_j = j*length/(rows.size()-1); linear in x between rows.
  static MacroPotential sampled(std::vector<PeriodicFunction> rows, double length,
                                std::optional<double> declared_bound = std::nullopt);

  Kind kind() const noexcept { return kind_; }
  double bound() const noexcept { return bound_; }

  double operator()(double x, double y) const;

  /// Integral over the torus of d(x, .) |psi|^2.
  double weighted_slice_mean(double x, std::span<const cplx> psi) const;

  const MacroProfile* macro() const noexcept { return kind_ == Kind::separable ? &macro_ : nullptr; }
  const PeriodicFunction* micro() const noexcept {
    return kind_ == Kind::separable ? &micro_ : nullptr;
  }

 private:
  Kind kind_ = Kind::zero;
  MacroProfile macro_ = MacroProfile::constant(0.0);
  PeriodicFunction micro_;
  std::vector<PeriodicFunction> rows_;
  double length_ = 1.0;
  double bound_ = 0.0;
};

}  // namespace blochhom
