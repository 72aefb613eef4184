#include "blochhom/spde_engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <fmt/format.h>

namespace blochhom {

CVector TridiagonalOperator::apply(std::span<const cplx> v) const {
  const std::size_t n = diag.size();
  if (v.size() != n) throw InputError("tridiagonal apply: size mismatch");
  CVector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    cplx acc = diag[i] * v[i];
    if (i > 0) acc += lower[i - 1] * v[i - 1];
    if (i + 1 < n) acc += upper[i] * v[i + 1];
    out[i] = acc;
  }
  return out;
}

TridiagonalOperator assemble_schrodinger(std::span<const double> sigma_half, std::span<const double> potential,
                                         double kappa, double h) {
  const std::size_t nx = sigma_half.size();
  if (nx < 2 || potential.size() != nx + 1) throw InputError("assemble_schrodinger: inconsistent grid arrays");
  if (!(h > 0.0)) throw InputError("assemble_schrodinger: mesh width must be positive");
  const std::size_t n = nx - 1;
  TridiagonalOperator op;
  op.diag.resize(n);
  op.lower.resize(n - 1);
  op.upper.resize(n - 1);
  const double ih2 = 1.0 / (h * h);
  const cplx hop = std::polar(1.0, kappa * h);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + 1;
    op.diag[i] = (sigma_half[j] + sigma_half[j - 1]) * ih2 + potential[j];
    if (i + 1 < n) {
      op.upper[i] = -sigma_half[j] * ih2 * hop;
      op.lower[i] = std::conj(op.upper[i]);
    }
  }
  return op;
}

namespace {

TridiagonalLu cayley_factor(const TridiagonalOperator& h, double dt) {
  const cplx a = -kI * (0.5 * dt);
  CVector lower(h.lower.size()), diag(h.diag.size()), upper(h.upper.size());
  for (std::size_t i = 0; i < diag.size(); ++i) diag[i] = 1.0 + a * h.diag[i];
  for (std::size_t i = 0; i < lower.size(); ++i) {
    lower[i] = a * h.lower[i];
    upper[i] = a * h.upper[i];
  }
  return TridiagonalLu(std::move(lower), std::move(diag), std::move(upper));
}

double interior_norm2(std::span<const cplx> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return s;
}

std::uint64_t fnv_mix(std::uint64_t h, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b) {
    h ^= bits & 0xffU;
    h *= 0x100000001b3ULL;
    bits >>= 8;
  }
  return h;
}

}  // namespace

CayleyPropagator::CayleyPropagator(TridiagonalOperator h, double dt)
    : h_(std::move(h)), lu_(cayley_factor(h_, dt)), dt_(dt) {
  if (!(dt > 0.0)) throw InputError("propagator: time step must be positive");
}

void CayleyPropagator::step(std::span<cplx> v, std::span<cplx> scratch) const {
  const std::size_t n = h_.diag.size();
  const cplx a = kI * (0.5 * dt_);
  for (std::size_t i = 0; i < n; ++i) {
    cplx acc = h_.diag[i] * v[i];
    if (i > 0) acc += h_.lower[i - 1] * v[i - 1];
    if (i + 1 < n) acc += h_.upper[i] * v[i + 1];
    scratch[i] = v[i] + a * acc;
  }
  lu_.solve_in_place(scratch.first(n));
  std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(n), v.begin());
}

double discrete_mass(std::span<const cplx> v, double h) { return h * interior_norm2(v); }

Trajectory integrate(const CayleyPropagator& prop, const NoiseField& noise, const WienerPath& path,
                     std::span<const cplx> v0, double length, double kappa, const IntegrationOptions& opts) {
  const std::size_t nodes = v0.size();
  const std::size_t n = prop.hamiltonian().size();
  if (nodes != n + 2) throw InputError("integrate: initial field does not match the operator grid");
  if (noise.kind != NoiseKind::none && noise.amplitude.size() != nodes) {
    throw InputError("integrate: noise amplitude does not match the grid");
  }
  if (std::abs(path.dt - prop.dt()) > 1e-15 * prop.dt()) {
    throw InputError("integrate: Wiener path time step differs from the scheme step");
  }
  double vmax = 0.0;
  for (const auto& z : v0) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw InputError("integrate: non-finite initial data");
    vmax = std::max(vmax, std::abs(z));
  }
  if (std::abs(v0.front()) > 1e-12 * vmax || std::abs(v0.back()) > 1e-12 * vmax) {
    throw InputError("integrate: initial data violates the Dirichlet condition");
  }

  const double h = length / static_cast<double>(nodes - 1);
  const double dt = prop.dt();
  Trajectory tr;
  tr.dt = dt;
  tr.noise = noise;
  tr.x.resize(nodes);
  for (std::size_t j = 0; j < nodes; ++j) tr.x[j] = length * static_cast<double>(j) / static_cast<double>(nodes - 1);
  tr.initial.assign(v0.begin(), v0.end());
  tr.initial.front() = 0.0;
  tr.initial.back() = 0.0;

  for (double t : opts.output_times) {
    const double s = std::round(t / dt);
    if (s < 0.0 || s > path.n_steps) throw InputError(fmt::format("output time {} outside [0, T]", t));
    tr.steps.push_back(static_cast<int>(s));
  }
  std::sort(tr.steps.begin(), tr.steps.end());
  tr.steps.erase(std::unique(tr.steps.begin(), tr.steps.end()), tr.steps.end());
  for (int s : tr.steps) tr.times.push_back(s * dt);

  CVector v(tr.initial.begin() + 1, tr.initial.end() - 1);
  CVector scratch(n);
  const cplx hop_half = std::polar(1.0, 0.5 * kappa * h);
  auto gradient_norm2 = [&](std::span<const cplx> w) {
    double s = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      const cplx left = k == 0 ? cplx{} : w[k - 1];
      const cplx right = k == n ? cplx{} : w[k];
      s += std::norm(hop_half * right - std::conj(hop_half) * left);
    }
    return s / h;
  };

  std::vector<cplx> spatial_phase;
  if (noise.kind == NoiseKind::additive && (noise.kappa != 0.0 || noise.temporal_rate != 0.0)) {
    spatial_phase.resize(n);
    for (std::size_t i = 0; i < n; ++i) spatial_phase[i] = std::polar(1.0, noise.kappa * tr.x[i + 1]);
  }

  const auto steps_total = static_cast<std::size_t>(path.n_steps);
  tr.mass.reserve(steps_total + 1);
  tr.quadratic_variation.reserve(steps_total + 1);
  tr.mass.push_back(h * interior_norm2(v));
  tr.quadratic_variation.push_back(0.0);
  std::size_t next_out = 0;
  auto snapshot = [&](std::size_t k) {
    while (next_out < tr.steps.size() && static_cast<std::size_t>(tr.steps[next_out]) == k) {
      CVector full(nodes);
      std::copy(v.begin(), v.end(), full.begin() + 1);
      tr.states.push_back(std::move(full));
      ++next_out;
    }
  };
  snapshot(0);

  std::uint64_t checksum = 0xcbf29ce484222325ULL;
  double qv = 0.0;
  for (std::size_t k = 0; k < steps_total; ++k) {
    const double dw = path.increments[k];
    checksum = fnv_mix(checksum, dw);
    ++tr.increments_consumed;
    qv += dw * dw;
    if (opts.monitor_gradient) tr.gradient_integral += dt * gradient_norm2(v);

    switch (noise.kind) {
      case NoiseKind::none: break;
      case NoiseKind::additive:
        if (spatial_phase.empty()) {
          for (std::size_t i = 0; i < n; ++i) v[i] += kI * (noise.amplitude[i + 1] * dw);
        } else {
          const cplx tphase = std::polar(1.0, noise.temporal_rate * static_cast<double>(k) * dt);
          for (std::size_t i = 0; i < n; ++i) v[i] += kI * tphase * spatial_phase[i] * (noise.amplitude[i + 1] * dw);
        }
        break;
      case NoiseKind::multiplicative:
        for (std::size_t i = 0; i < n; ++i) v[i] *= cplx{1.0, noise.amplitude[i + 1] * dw};
        break;
    }
    const double before = interior_norm2(v);
    prop.step(v, scratch);
    const double after = interior_norm2(v);
    if (!std::isfinite(after)) throw NumericalError(fmt::format("non-finite state after step {}", k + 1));
    if (before > 0.0) tr.max_step_drift = std::max(tr.max_step_drift, std::abs(std::sqrt(after / before) - 1.0));
    tr.mass.push_back(h * after);
    tr.quadratic_variation.push_back(qv);
    snapshot(k + 1);
  }
  tr.increment_checksum = checksum;
  return tr;
}

void validate_eps_problem(const EpsProblem& p) {
  if (p.q < 1) throw InputError("epsilon must be 1/q with a positive integer q");
  if (!(p.length > 0.0)) throw InputError("domain length must be positive");
  if (p.nx % p.q != 0) throw InputError(fmt::format("nx = {} is not divisible by q = {}", p.nx, p.q));
  if (p.nx / p.q < 16) throw InputError(fmt::format("nx = {} gives fewer than 16 points per cell", p.nx));
  if (!(p.dt > 0.0)) throw InputError("time step must be positive");
  const double ratio = p.T / p.dt;
  if (!(p.T > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    throw InputError("T must be a positive integer multiple of dt");
  }
  validate_cell_coefficients(p.cell.sigma, p.cell.c);
  if (p.noise != NoiseKind::none && !p.noise_profile.is_real()) {
    throw HypothesisViolation("real noise profile", "the noise amplitude must be real-valued");
  }
}

TridiagonalOperator eps_hamiltonian(const EpsProblem& p) {
  validate_eps_problem(p);
  const double h = p.length / p.nx;
  const double eps = p.epsilon();
  const double q = p.q;
  std::vector<double> sigma_half(static_cast<std::size_t>(p.nx));
  std::vector<double> potential(static_cast<std::size_t>(p.nx) + 1);
  for (int j = 0; j < p.nx; ++j) {
    sigma_half[static_cast<std::size_t>(j)] = p.cell.sigma.real_at((j + 0.5) * h * q);
  }
  const double shift = p.lab_frame ? 0.0 : p.lambda_n;
  for (int j = 0; j <= p.nx; ++j) {
    const double x = j * h;
    const double y = x * q;
    potential[static_cast<std::size_t>(j)] = q * q * (p.cell.c.real_at(y) - shift) + p.d(x, y);
  }
  const double kappa = p.lab_frame ? 0.0 : kTwoPi * p.theta_n / eps;
  return assemble_schrodinger(sigma_half, potential, kappa, h);
}

NoiseField eps_noise(const EpsProblem& p) {
  NoiseField f;
  f.kind = p.noise;
  if (p.noise == NoiseKind::none) return f;
  const double h = p.length / p.nx;
  f.amplitude.resize(static_cast<std::size_t>(p.nx) + 1);
  for (int j = 0; j <= p.nx; ++j) f.amplitude[static_cast<std::size_t>(j)] = p.noise_profile.real_at(j * h * p.q);
  if (p.lab_frame && p.noise == NoiseKind::additive) {
    f.kappa = kTwoPi * p.theta_n * p.q;
    f.temporal_rate = p.lambda_n * p.q * p.q;
  }
  return f;
}

Trajectory integrate_eps(const EpsProblem& p, const WienerPath& path, std::span<const cplx> v0,
                         const IntegrationOptions& opts) {
  const CayleyPropagator prop(eps_hamiltonian(p), p.dt);
  if (path.n_steps != static_cast<int>(std::round(p.T / p.dt))) {
    throw InputError("integrate_eps: Wiener path length does not cover [0, T]");
  }
  const double kappa = p.lab_frame ? 0.0 : kTwoPi * p.theta_n * p.q;
  return integrate(prop, eps_noise(p), path, v0, p.length, kappa, opts);
}

TridiagonalOperator homogenized_hamiltonian(const EffectiveModel& m, const HomogenizedProblem& hp) {
  if (m.d_star.size() != static_cast<std::size_t>(hp.nx) + 1) {
    throw InputError(fmt::format("homogenized solve: d* has {} samples, grid has {} nodes", m.d_star.size(), hp.nx + 1));
  }
  const std::vector<double> sigma_half(static_cast<std::size_t>(hp.nx), m.sigma_star);
  return assemble_schrodinger(sigma_half, m.d_star, 0.0, hp.length / hp.nx);
}

Trajectory integrate_homogenized(const EffectiveModel& m, const WienerPath& path, std::span<const cplx> v0,
                                 const HomogenizedProblem& hp, const IntegrationOptions& opts) {
  const CayleyPropagator prop(homogenized_hamiltonian(m, hp), hp.dt);
  NoiseField f;
  f.kind = m.noise_kind;
  if (f.kind != NoiseKind::none) f.amplitude.assign(static_cast<std::size_t>(hp.nx) + 1, m.g_star);
  return integrate(prop, f, path, v0, hp.length, 0.0, opts);
}

MassDiagnostics mass_diagnostics(const Trajectory& traj) {
  MassDiagnostics md;
  if (traj.mass.empty()) return md;
  const std::size_t nodes = traj.x.size();
  const double h = nodes > 1 ? traj.x[1] - traj.x[0] : 1.0;
  const double m0 = traj.mass.front();
  double g2_sum = 0.0, weighted = 0.0, weight = 0.0;
  if (traj.noise.kind != NoiseKind::none) {
    for (std::size_t j = 1; j + 1 < nodes; ++j) {
      const double a2 = traj.noise.amplitude[j] * traj.noise.amplitude[j];
      g2_sum += a2;
      const double w = std::norm(traj.initial[j]);
      weighted += a2 * w;
      weight += w;
    }
  }
  const double gbar2 = weight > 0.0 ? weighted / weight : 0.0;

  double sxx = 0.0, sxy = 0.0, sq = 0.0, sqy = 0.0, st = 0.0, sm = 0.0, stt = 0.0, stm = 0.0;
  const std::size_t count = traj.mass.size();
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) * traj.dt;
    double predicted = m0;
    if (traj.noise.kind == NoiseKind::additive) predicted = m0 + t * h * g2_sum;
    if (traj.noise.kind == NoiseKind::multiplicative) predicted = m0 * std::exp(gbar2 * t);
    const double mass = traj.mass[k];
    md.t.push_back(t);
    md.mass.push_back(mass);
    md.predicted.push_back(predicted);
    const double r = predicted != 0.0 ? (mass - predicted) / predicted : mass;
    md.residual.push_back(r);
    md.max_abs_residual = std::max(md.max_abs_residual, std::abs(r));
    if (m0 > 0.0 && mass > 0.0) {
      const double lm = std::log(mass / m0);
      sxx += t * t;
      sxy += t * lm;
      if (k < traj.quadratic_variation.size()) {
        const double qv = traj.quadratic_variation[k];
        sq += qv * qv;
        sqy += qv * lm;
      }
    }
    st += t;
    sm += mass;
    stt += t * t;
    stm += t * mass;
  }
  md.log_mass_time_slope = sxx > 0.0 ? sxy / sxx : 0.0;
  md.log_mass_qv_slope = sq > 0.0 ? sqy / sq : 0.0;
  const double nn = static_cast<double>(count);
  const double den = nn * stt - st * st;
  md.mass_time_slope = den > 0.0 ? (nn * stm - st * sm) / den : 0.0;
  return md;
}

}  // namespace blochhom
