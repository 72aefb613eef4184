#include "blochhom/periodic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace blochhom {
namespace {

void check_finite(std::span<const cplx> v, const char* what) {
  for (const auto& z : v) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw InputError(std::string(what) + ": non-finite value");
    }
  }
}

// In-place iterative radix-2 transform; sign = -1 forward, +1 inverse. No scaling.
void fft_pow2(CVector& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    CVector tw(half);
    for (std::size_t k = 0; k < half; ++k) {
      tw[k] = std::polar(1.0, sign * kTwoPi * static_cast<double>(k) / static_cast<double>(len));
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

CVector dft_generic(std::span<const cplx> in, int sign) {
  const std::size_t n = in.size();
  CVector out(n);
  if (n == 0) return out;
  if (std::has_single_bit(n)) {
    out.assign(in.begin(), in.end());
    fft_pow2(out, sign);
    return out;
  }
  CVector tw(n);
  for (std::size_t m = 0; m < n; ++m) {
    tw[m] = std::polar(1.0, sign * kTwoPi * static_cast<double>(m) / static_cast<double>(n));
  }
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += in[j] * tw[(j * k) % n];
    out[k] = acc;
  }
  return out;
}

bool detect_real(const CVector& coeffs, const CVector& samples) {
  double scale = 0.0;
  for (const auto& z : samples) scale = std::max(scale, std::abs(z));
  const double tol = 1e-12 * std::max(1.0, scale);
  for (const auto& z : samples) {
    if (std::abs(z.imag()) > tol) return false;
  }
  const int order = window_order(coeffs.size());
  for (int k = 1; k <= order; ++k) {
    const auto& a = coeffs[static_cast<std::size_t>(order + k)];
    const auto& b = coeffs[static_cast<std::size_t>(order - k)];
    if (std::abs(a - std::conj(b)) > tol) return false;
  }
  return true;
}

void check_grid(int order, int grid) {
  if (order < 0) throw InputError("truncation order must be non-negative");
  if (grid < 2 * order + 1) {
    throw InputError("grid of " + std::to_string(grid) + " points cannot carry truncation order " +
                     std::to_string(order) + " (need at least " + std::to_string(2 * order + 1) + ")");
  }
}

}  // namespace

CVector dft_forward(std::span<const cplx> samples) {
  check_finite(samples, "dft_forward");
  CVector out = dft_generic(samples, -1);
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (auto& z : out) z *= inv;
  return out;
}

CVector dft_inverse(std::span<const cplx> coeffs) {
  check_finite(coeffs, "dft_inverse");
  return dft_generic(coeffs, +1);
}

int CoefficientSpec::order() const {
  return std::visit(
      [](const auto& f) -> int {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return 0;
        } else if constexpr (std::is_same_v<T, Cosine>) {
          return std::abs(f.harmonic);
        } else {
          int k = 0;
          for (const auto& t : f.terms) k = std::max(k, std::abs(t.k));
          return k;
        }
      },
      form);
}

PeriodicFunction::PeriodicFunction(int order, CVector coeffs, CVector samples)
    : order_(order), coeffs_(std::move(coeffs)), samples_(std::move(samples)) {
  real_ = detect_real(coeffs_, samples_);
  if (real_) {
    for (auto& z : samples_) z = z.real();
  }
}

PeriodicFunction PeriodicFunction::from_coefficients(std::span<const FourierTerm> terms, int order,
                                                     int grid) {
  check_grid(order, grid);
  CVector coeffs(static_cast<std::size_t>(2 * order + 1));
  for (const auto& t : terms) {
    if (std::abs(t.k) > order) throw InputError("Fourier index exceeds truncation order");
    if (!std::isfinite(t.value.real()) || !std::isfinite(t.value.imag())) {
      throw InputError("Fourier coefficient is not finite");
    }
    coeffs[static_cast<std::size_t>(t.k + order)] += t.value;
  }
  CVector full(static_cast<std::size_t>(grid));
  for (int k = -order; k <= order; ++k) {
    full[static_cast<std::size_t>((k + grid) % grid)] = coeffs[static_cast<std::size_t>(k + order)];
  }
  return PeriodicFunction(order, std::move(coeffs), dft_inverse(full));
}

PeriodicFunction PeriodicFunction::from_samples(std::span<const cplx> samples, int order) {
  const int grid = static_cast<int>(samples.size());
  check_grid(order, grid);
  check_finite(samples, "periodic samples");
  const CVector full = dft_forward(samples);
  CVector coeffs(static_cast<std::size_t>(2 * order + 1));
  CVector kept(static_cast<std::size_t>(grid));
  for (int k = -order; k <= order; ++k) {
    const auto idx = static_cast<std::size_t>((k + grid) % grid);
    coeffs[static_cast<std::size_t>(k + order)] = full[idx];
    kept[idx] = full[idx];
  }
  return PeriodicFunction(order, std::move(coeffs), dft_inverse(kept));
}

PeriodicFunction PeriodicFunction::from_function(const std::function<double(double)>& f, int order,
                                                 int grid) {
  check_grid(order, grid);
  CVector s(static_cast<std::size_t>(grid));
  for (int j = 0; j < grid; ++j) s[static_cast<std::size_t>(j)] = f(static_cast<double>(j) / grid);
  return from_samples(s, order);
}

PeriodicFunction PeriodicFunction::constant(double value, int grid) {
  const FourierTerm t{0, value};
  return from_coefficients(std::span(&t, 1), 0, grid);
}

double PeriodicFunction::min_sample() const {
  double m = samples_.front().real();
  for (const auto& z : samples_) m = std::min(m, z.real());
  return m;
}

double PeriodicFunction::max_abs_sample() const {
  double m = 0.0;
  for (const auto& z : samples_) m = std::max(m, std::abs(z));
  return m;
}

std::optional<double> PeriodicFunction::positivity_bound() const {
  if (!real_) return std::nullopt;
  const double nu = min_sample();
  if (nu > 0.0) return nu;
  return std::nullopt;
}

cplx PeriodicFunction::operator()(double y) const { return evaluate_series(coeffs_, y); }

PeriodicFunction sample_periodic(const CoefficientSpec& spec, int grid) {
  return std::visit(
      [grid](const auto& f) -> PeriodicFunction {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, CoefficientSpec::Constant>) {
          if (!std::isfinite(f.value)) throw InputError("constant coefficient is not finite");
          return PeriodicFunction::constant(f.value, grid);
        } else if constexpr (std::is_same_v<T, CoefficientSpec::Cosine>) {
          if (!std::isfinite(f.mean) || !std::isfinite(f.amplitude)) {
            throw InputError("cosine coefficient is not finite");
          }
          const int m = std::abs(f.harmonic);
          std::vector<FourierTerm> terms{{0, f.mean}};
          if (m == 0) {
            terms[0].value += f.amplitude;
          } else {
            terms.push_back({m, 0.5 * f.amplitude});
            terms.push_back({-m, 0.5 * f.amplitude});
          }
          return PeriodicFunction::from_coefficients(terms, m, grid);
        } else {
          int order = 0;
          for (const auto& t : f.terms) order = std::max(order, std::abs(t.k));
          return PeriodicFunction::from_coefficients(f.terms, order, grid);
        }
      },
      spec.form);
}

cplx inner_product_torus(const PeriodicFunction& a, const PeriodicFunction& b) {
  if (a.grid_size() != b.grid_size()) throw InputError("inner_product_torus: grid mismatch");
  const auto sa = a.samples();
  const auto sb = b.samples();
  cplx acc = 0.0;
  for (std::size_t j = 0; j < sa.size(); ++j) acc += sa[j] * std::conj(sb[j]);
  return acc / static_cast<double>(sa.size());
}

CVector multiply_projected(const PeriodicFunction& f, std::span<const cplx> v) {
  const int order = window_order(v.size());
  CVector out(v.size());
  for (int k = -order; k <= order; ++k) {
    cplx acc = 0.0;
    const int lo = std::max(-order, k - f.order());
    const int hi = std::min(order, k + f.order());
    for (int l = lo; l <= hi; ++l) acc += f.coeff(k - l) * v[static_cast<std::size_t>(l + order)];
    out[static_cast<std::size_t>(k + order)] = acc;
  }
  return out;
}

CVector shifted_derivative(std::span<const cplx> v, double theta) {
  const int order = window_order(v.size());
  CVector out(v.size());
  for (int k = -order; k <= order; ++k) {
    const auto i = static_cast<std::size_t>(k + order);
    out[i] = kI * (kTwoPi * (k + theta)) * v[i];
  }
  return out;
}

cplx coeff_inner(std::span<const cplx> a, std::span<const cplx> b) {
  if (a.size() != b.size()) throw InputError("coefficient inner product: size mismatch");
  cplx acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * std::conj(b[i]);
  return acc;
}

double coeff_norm(std::span<const cplx> v) {
  double acc = 0.0;
  for (const auto& z : v) acc += std::norm(z);
  return std::sqrt(acc);
}

cplx evaluate_series(std::span<const cplx> v, double y) {
  const int order = window_order(v.size());
  y -= std::floor(y);
  // Horner-style recurrence in exp(2 pi i y) keeps this O(K) without repeated polar calls.
  const cplx w = std::polar(1.0, kTwoPi * y);
  cplx acc = 0.0;
  for (int k = order; k >= -order; --k) acc = acc * w + v[static_cast<std::size_t>(k + order)];
  return acc * std::polar(1.0, -kTwoPi * y * order);
}

double weighted_mean(const PeriodicFunction& f, std::span<const cplx> psi) {
  return coeff_inner(multiply_projected(f, psi), psi).real();
}

// ---------------------------------------------------------------------------

MacroProfile MacroProfile::constant(double value) { return {Kind::constant, {value}}; }

MacroProfile MacroProfile::linear(double slope, double intercept) {
  return {Kind::linear, {slope, intercept}};
}

MacroProfile MacroProfile::sine(double amplitude, int mode, double length) {
  if (length <= 0.0) throw InputError("sine profile: length must be positive");
  return {Kind::sine, {amplitude, static_cast<double>(mode), length}};
}

MacroProfile MacroProfile::bump(double amplitude, double center, double width) {
  if (width <= 0.0) throw InputError("bump profile: width must be positive");
  return {Kind::bump, {amplitude, center, width}};
}

MacroProfile MacroProfile::sine_bump(double amplitude, double center, double width, double length) {
  if (width <= 0.0 || length <= 0.0) throw InputError("sine_bump profile: width and length must be positive");
  return {Kind::sine_bump, {amplitude, center, width, length}};
}

namespace {

// exp(1 - 1/(1-r^2)) and its derivative in x.
std::pair<double, double> bump_value(double x, double center, double width) {
  const double half = 0.5 * width;
  const double r = (x - center) / half;
  if (std::abs(r) >= 1.0) return {0.0, 0.0};
  const double s = 1.0 - r * r;
  const double v = std::exp(1.0 - 1.0 / s);
  const double dv_dr = v * (-2.0 * r / (s * s));
  return {v, dv_dr / half};
}

}  // namespace

double MacroProfile::operator()(double x) const {
  const auto& p = params_;
  switch (kind_) {
    case Kind::constant:
      return p[0];
    case Kind::linear:
      return p[0] * x + p[1];
    case Kind::sine:
      return p[0] * std::sin(p[1] * kPi * x / p[2]);
    case Kind::bump:
      return p[0] * bump_value(x, p[1], p[2]).first;
    case Kind::sine_bump:
      return p[0] * std::sin(kPi * x / p[3]) * bump_value(x, p[1], p[2]).first;
  }
  return 0.0;
}

double MacroProfile::derivative(double x) const {
  const auto& p = params_;
  switch (kind_) {
    case Kind::constant:
      return 0.0;
    case Kind::linear:
      return p[0];
    case Kind::sine:
      return p[0] * (p[1] * kPi / p[2]) * std::cos(p[1] * kPi * x / p[2]);
    case Kind::bump:
      return p[0] * bump_value(x, p[1], p[2]).second;
    case Kind::sine_bump: {
      const auto [b, db] = bump_value(x, p[1], p[2]);
      const double w = kPi / p[3];
      return p[0] * (w * std::cos(w * x) * b + std::sin(w * x) * db);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kBoundProbeX = 257;

void enforce_bound(double observed, std::optional<double> declared) {
  if (!std::isfinite(observed)) throw InputError("macro potential: non-finite samples");
  if (declared && observed > *declared * (1.0 + 1e-12)) {
    throw InputError("macro potential exceeds its declared bound (" + std::to_string(observed) +
                     " > " + std::to_string(*declared) + ")");
  }
}

}  // namespace

MacroPotential MacroPotential::separable(MacroProfile a, PeriodicFunction b, double length,
                                         std::optional<double> declared_bound) {
  if (!b.is_real()) throw InputError("macro potential: periodic factor must be real");
  MacroPotential d;
  d.kind_ = Kind::separable;
  d.macro_ = std::move(a);
  d.micro_ = std::move(b);
  d.length_ = length;
  double amax = 0.0;
  for (int j = 0; j < kBoundProbeX; ++j) {
    amax = std::max(amax, std::abs(d.macro_(length * j / (kBoundProbeX - 1))));
  }
  const double observed = amax * d.micro_.max_abs_sample();
  enforce_bound(observed, declared_bound);
  d.bound_ = declared_bound.value_or(observed);
  return d;
}

MacroPotential MacroPotential::sampled(std::vector<PeriodicFunction> rows, double length,
                                       std::optional<double> declared_bound) {
  if (rows.size() < 2) throw InputError("macro potential grid needs at least two x rows");
  double observed = 0.0;
  for (const auto& r : rows) {
    if (!r.is_real()) throw InputError("macro potential: grid rows must be real");
    observed = std::max(observed, r.max_abs_sample());
  }
  enforce_bound(observed, declared_bound);
  MacroPotential d;
  d.kind_ = Kind::grid;
  d.rows_ = std::move(rows);
  d.length_ = length;
  d.bound_ = declared_bound.value_or(observed);
  return d;
}

double MacroPotential::operator()(double x, double y) const {
  switch (kind_) {
    case Kind::zero:
      return 0.0;
    case Kind::separable:
      return macro_(x) * micro_.real_at(y);
    case Kind::grid: {
      const double s = std::clamp(x / length_, 0.0, 1.0) * static_cast<double>(rows_.size() - 1);
      const auto j = std::min(static_cast<std::size_t>(s), rows_.size() - 2);
      const double w = s - static_cast<double>(j);
      return (1.0 - w) * rows_[j].real_at(y) + w * rows_[j + 1].real_at(y);
    }
  }
  return 0.0;
}

double MacroPotential::weighted_slice_mean(double x, std::span<const cplx> psi) const {
  switch (kind_) {
    case Kind::zero:
      return 0.0;
    case Kind::separable:
      return macro_(x) * weighted_mean(micro_, psi);
    case Kind::grid: {
      const double s = std::clamp(x / length_, 0.0, 1.0) * static_cast<double>(rows_.size() - 1);
      const auto j = std::min(static_cast<std::size_t>(s), rows_.size() - 2);
      const double w = s - static_cast<double>(j);
      return (1.0 - w) * weighted_mean(rows_[j], psi) + w * weighted_mean(rows_[j + 1], psi);
    }
  }
  return 0.0;
}

}  // namespace blochhom
