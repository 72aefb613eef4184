#include "blochhom/harness.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "blochhom/parallel.hpp"

namespace blochhom {

CVector well_prepared_initial(std::span<const cplx> psi, const MacroProfile& v0, int q,
                              std::span<const double> x_grid) {
  if (q < 1) throw InputError("well_prepared_initial: epsilon must be 1/q with q >= 1");
  if (x_grid.size() < 3) throw InputError("well_prepared_initial: grid too small");
  double vmax = 0.0;
  for (double x : x_grid) vmax = std::max(vmax, std::abs(v0(x)));
  const double tol = 1e-12 * std::max(vmax, 1e-300);
  if (std::abs(v0(x_grid.front())) > tol || std::abs(v0(x_grid.back())) > tol) {
    throw InputError("well_prepared_initial: v0 must vanish at both ends of D");
  }
  CVector out(x_grid.size());
  for (std::size_t j = 0; j < x_grid.size(); ++j) {
    out[j] = evaluate_series(psi, x_grid[j] * q) * v0(x_grid[j]);
  }
  out.front() = 0.0;
  out.back() = 0.0;
  return out;
}

namespace {

CVector apply_phase(std::span<const cplx> v, std::span<const double> x, double t, double eps, double theta,
                    double lambda, double sign) {
  if (v.size() != x.size()) throw InputError("modulation: field and grid differ in size");
  CVector out(v.size());
  const double time_phase = std::fmod(lambda * t / (eps * eps), kTwoPi);
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double space_phase = std::fmod(kTwoPi * theta * x[j] / eps, kTwoPi);
    out[j] = v[j] * std::polar(1.0, sign * (time_phase + space_phase));
  }
  return out;
}

double trapezoid_weight(std::size_t j, std::size_t nodes) { return (j == 0 || j + 1 == nodes) ? 0.5 : 1.0; }

}  // namespace

CVector modulate(std::span<const cplx> v, std::span<const double> x, double t, double eps, double theta,
                 double lambda) {
  return apply_phase(v, x, t, eps, theta, lambda, 1.0);
}

CVector demodulate(std::span<const cplx> u, std::span<const double> x, double t, double eps, double theta,
                   double lambda) {
  return apply_phase(u, x, t, eps, theta, lambda, -1.0);
}

CVector lift_cubic(std::span<const cplx> coarse, std::size_t fine_nodes) {
  const std::size_t nc = coarse.size();
  if (nc < 4 || fine_nodes < 2) throw InputError("lift_cubic: need at least 4 coarse nodes");
  if (nc == fine_nodes) return CVector(coarse.begin(), coarse.end());
  CVector out(fine_nodes);
  const double scale = static_cast<double>(nc - 1) / static_cast<double>(fine_nodes - 1);
  for (std::size_t j = 0; j < fine_nodes; ++j) {
    const double p = static_cast<double>(j) * scale;
    const double nearest = std::round(p);
    if (std::abs(p - nearest) < 1e-12) {
      out[j] = coarse[static_cast<std::size_t>(nearest)];
      continue;
    }
    auto i = static_cast<std::ptrdiff_t>(std::floor(p));
    i = std::clamp<std::ptrdiff_t>(i, 1, static_cast<std::ptrdiff_t>(nc) - 3);
    const double u = p - static_cast<double>(i);
    const double w0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
    const double w1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
    const double w2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
    const double w3 = (u + 1.0) * u * (u - 1.0) / 6.0;
    const auto k = static_cast<std::size_t>(i);
    out[j] = w0 * coarse[k - 1] + w1 * coarse[k] + w2 * coarse[k + 1] + w3 * coarse[k + 2];
  }
  return out;
}

double factorization_error_at(std::span<const cplx> v_eps, std::span<const cplx> v, std::span<const cplx> psi,
                              int q, double length) {
  const std::size_t nodes = v_eps.size();
  if (nodes < 2) throw InputError("factorization_error: empty field");
  const CVector lifted = v.size() == nodes ? CVector(v.begin(), v.end()) : lift_cubic(v, nodes);
  const double h = length / static_cast<double>(nodes - 1);
  double e2 = 0.0;
  for (std::size_t j = 0; j < nodes; ++j) {
    const double x = length * static_cast<double>(j) / static_cast<double>(nodes - 1);
    e2 += trapezoid_weight(j, nodes) * std::norm(v_eps[j] - evaluate_series(psi, x * q) * lifted[j]);
  }
  return std::sqrt(h * e2);
}

FactorizationErrors factorization_error(const Trajectory& v_eps, const Trajectory& v, std::span<const cplx> psi,
                                        int q) {
  if (v_eps.steps != v.steps || v_eps.dt != v.dt) throw InputError("factorization_error: time-grid mismatch");
  const double length = v_eps.x.back() - v_eps.x.front();
  FactorizationErrors fe;
  fe.t = v_eps.times;
  for (std::size_t k = 0; k < v_eps.states.size(); ++k) {
    const double e = factorization_error_at(v_eps.states[k], v.states[k], psi, q, length);
    fe.error.push_back(e);
    fe.sup = std::max(fe.sup, e);
  }
  return fe;
}

cplx two_scale_pairing(std::span<const cplx> w, double length, const TwoScaleTest& test, double eps) {
  const std::size_t nodes = w.size();
  if (nodes < 2) throw InputError("two_scale_pairing: empty field");
  const double h = length / static_cast<double>(nodes - 1);
  if (eps / h < 8.0 - 1e-9) {
    throw InputError(fmt::format("two_scale_pairing: {:.2f} points per eps-cell, at least 8 required", eps / h));
  }
  cplx acc = 0.0;
  for (std::size_t j = 0; j < nodes; ++j) {
    const double x = length * static_cast<double>(j) / static_cast<double>(nodes - 1);
    const double y = x / eps;
    cplx psi_test = test.macro(x) * test.micro(y - std::floor(y));
    if (!test.zeta.empty()) psi_test += eps * test.macro.derivative(x) * evaluate_series(test.zeta, y);
    acc += trapezoid_weight(j, nodes) * w[j] * std::conj(psi_test);
  }
  return h * acc;
}

cplx two_scale_limit(const std::function<cplx(double, double)>& w_limit, double length, const TwoScaleTest& test,
                     int nx, int ny) {
  if (nx < 2 || ny < 1) throw InputError("two_scale_limit: quadrature sizes too small");
  const double h = length / nx;
  cplx acc = 0.0;
  for (int j = 0; j <= nx; ++j) {
    const double x = j * h;
    cplx inner = 0.0;
    for (int m = 0; m < ny; ++m) {
      const double y = static_cast<double>(m) / ny;
      inner += w_limit(x, y) * std::conj(test.macro(x) * test.micro(y));
    }
    acc += trapezoid_weight(static_cast<std::size_t>(j), static_cast<std::size_t>(nx) + 1) * inner / static_cast<double>(ny);
  }
  return h * acc;
}

BandAnalysis analyze_band(const BandAnalysisConfig& cfg) {
  const CellProblem& p = cfg.cell;
  if (cfg.band < 1 || cfg.band >= p.dimension()) throw InputError(fmt::format("band {} out of range", cfg.band));
  const int n_bands = std::min(std::max(cfg.n_bands, cfg.band + 1), p.dimension());
  BandAnalysis ba;
  ba.bands = compute_band_structure(p, uniform_theta_grid(cfg.theta_points), n_bands, false, cfg.threads);
  if (cfg.theta_candidates.empty()) throw InputError("at least one theta candidate is required");
  std::optional<std::size_t> chosen;
  for (double t0 : cfg.theta_candidates) {
    ba.candidates.push_back(locate_critical_point(p, ba.bands, cfg.band, t0, cfg.critical));
    const auto& cp = ba.candidates.back();
    if (!chosen && cp.simple && cp.critical) chosen = ba.candidates.size() - 1;
  }
  if (!chosen) {
    std::string detail;
    for (const auto& cp : ba.candidates) {
      detail += fmt::format(" [theta {} slope {:.3e} gap {:.3e}]", cp.theta, cp.slope, cp.gap);
    }
    throw HypothesisViolation("simple-critical-band",
                              fmt::format("no simple critical point found for band {}:{}", cfg.band, detail));
  }
  ba.critical = ba.candidates[*chosen];
  ba.correctors = compute_correctors(p, cfg.band, ba.critical.theta, cfg.fredholm);
  return ba;
}

EffectiveModel effective_model_on_grid(const BandAnalysis& ba, const MacroPotential& d, const PeriodicFunction& g,
                                       NoiseKind kind, std::span<const double> x_grid, const EffectiveOptions& opts) {
  return build_effective_model(ba.critical, ba.correctors, d, g, kind, x_grid, opts);
}

std::vector<double> output_instants(double T, int count) {
  if (count < 1) throw InputError("at least one output instant is required");
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) t[static_cast<std::size_t>(i - 1)] = T * i / count;
  return t;
}

bool strictly_decreasing(const std::vector<EpsSummary>& per_eps) {
  if (per_eps.size() < 2) return false;
  for (std::size_t i = 1; i < per_eps.size(); ++i) {
    const auto& a = per_eps[i - 1];
    const auto& b = per_eps[i];
    if (!(a.sup_mean - b.sup_mean > std::max(a.sup_stderr, b.sup_stderr))) return false;
  }
  return true;
}

namespace {

struct EpsSetup {
  int q = 0;
  int nx = 0;
  int hnx = 0;
  std::vector<double> x_fine;
  std::vector<double> x_coarse;
  std::optional<CayleyPropagator> prop_eps;
  std::optional<CayleyPropagator> prop_hom;
  NoiseField noise_eps;
  NoiseField noise_hom;
  CVector v0_eps;
  CVector v0_hom;
  double kappa = 0.0;
};

struct CellResult {
  bool ok = false;
  std::string message;
  std::vector<double> error;
  double sup = 0.0;
  std::vector<cplx> pairing;
  std::vector<cplx> limit;
  std::vector<double> mass_resid;
  double drift = 0.0;
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

ConvergenceReport convergence_sweep(const SweepConfig& cfg) {
  if (cfg.replicas < 1) throw InputError("replica count must be at least 1");
  if (cfg.q_list.empty()) throw InputError("epsilon list is empty");
  if (cfg.points_per_cell < 16) throw InputError("at least 16 points per eps-cell are required");

  ConvergenceReport rep;
  rep.noise = cfg.noise;
  rep.analysis = analyze_band(cfg.analysis);
  const BandAnalysis& ba = rep.analysis;
  const CVector& psi = ba.correctors.psi;
  const auto times = output_instants(cfg.T, cfg.output_instants);
  const int K = cfg.analysis.cell.order;
  std::vector<FourierTerm> terms;
  for (int k = -K; k <= K; ++k) terms.push_back({k, psi[static_cast<std::size_t>(k + K)]});
  TwoScaleTest test;
  test.macro = cfg.pairing_macro;
  test.micro = PeriodicFunction::from_coefficients(terms, K, std::max(4 * K + 1, 64));
  test.zeta = ba.correctors.zeta;
  const double psi_norm2 = coeff_inner(psi, psi).real();

  std::vector<EpsSetup> setups(cfg.q_list.size());
  for (std::size_t e = 0; e < cfg.q_list.size(); ++e) {
    auto& s = setups[e];
    s.q = cfg.q_list[e];
    s.nx = cfg.points_per_cell * s.q;
    s.hnx = cfg.homog_nx > 0 ? cfg.homog_nx : s.nx;
    s.x_fine = uniform_x_grid(cfg.length, s.nx);
    s.x_coarse = uniform_x_grid(cfg.length, s.hnx);

    EpsProblem p;
    p.length = cfg.length;
    p.T = cfg.T;
    p.q = s.q;
    p.cell = cfg.analysis.cell;
    p.d = cfg.d;
    p.noise = cfg.noise;
    p.noise_profile = cfg.noise_profile;
    p.theta_n = ba.critical.theta;
    p.lambda_n = ba.critical.lambda;
    p.nx = s.nx;
    p.dt = cfg.dt;
    s.prop_eps.emplace(eps_hamiltonian(p), cfg.dt);
    s.noise_eps = eps_noise(p);
    s.kappa = kTwoPi * p.theta_n * p.q;

    const auto model = effective_model_on_grid(ba, cfg.d, cfg.noise_profile, cfg.noise, s.x_coarse,
                                               cfg.analysis.effective);
    rep.sigma_star = model.sigma_star;
    rep.g_star = model.g_star;
    const HomogenizedProblem hp{cfg.length, s.hnx, cfg.dt};
    s.prop_hom.emplace(homogenized_hamiltonian(model, hp), cfg.dt);
    s.noise_hom.kind = cfg.noise;
    if (cfg.noise != NoiseKind::none) s.noise_hom.amplitude.assign(static_cast<std::size_t>(s.hnx) + 1, model.g_star);

    s.v0_eps = well_prepared_initial(psi, cfg.v0, s.q, s.x_fine);
    s.v0_hom.resize(s.x_coarse.size());
    for (std::size_t j = 0; j < s.x_coarse.size(); ++j) s.v0_hom[j] = cfg.v0(s.x_coarse[j]);
    s.v0_hom.front() = 0.0;
    s.v0_hom.back() = 0.0;

    if (s.hnx != s.nx) {
      const CVector lifted = lift_cubic(s.v0_hom, s.x_fine.size());
      for (std::size_t j = 0; j < lifted.size(); ++j) {
        rep.lifting_error = std::max(rep.lifting_error, std::abs(lifted[j] - cfg.v0(s.x_fine[j])));
      }
    }
  }

  const auto m = static_cast<std::size_t>(cfg.replicas);
  std::vector<CellResult> cells(setups.size() * m);
  IntegrationOptions io;
  io.output_times = times;
  io.monitor_gradient = false;

  parallel_for(cells.size(), cfg.threads, [&](std::size_t i) {
    const auto& s = setups[i / m];
    const auto r = static_cast<std::uint64_t>(i % m);
    CellResult& out = cells[i];
    try {
      const auto path = sample_wiener_path(cfg.T, cfg.dt, cfg.seed, r);
      const auto te = integrate(*s.prop_eps, s.noise_eps, path, s.v0_eps, cfg.length, s.kappa, io);
      const auto th = integrate(*s.prop_hom, s.noise_hom, path, s.v0_hom, cfg.length, 0.0, io);
      if (te.increments_consumed != th.increments_consumed || te.increment_checksum != th.increment_checksum) {
        throw NumericalError("shared Wiener path consumed differently by the two solves");
      }
      const auto fe = factorization_error(te, th, psi, s.q);
      out.error = fe.error;
      out.sup = fe.sup;
      const double hc = cfg.length / s.hnx;
      for (std::size_t k = 0; k < te.states.size(); ++k) {
        out.pairing.push_back(two_scale_pairing(te.states[k], cfg.length, test, 1.0 / s.q));
        const auto& vt = th.states[k];
        cplx lim = 0.0;
        for (std::size_t j = 0; j < vt.size(); ++j) {
          lim += trapezoid_weight(j, vt.size()) * vt[j] * cfg.pairing_macro(s.x_coarse[j]);
        }
        out.limit.push_back(hc * lim * psi_norm2);
      }
      const auto md = mass_diagnostics(te);
      for (int st : te.steps) out.mass_resid.push_back(md.residual[static_cast<std::size_t>(st)]);
      out.drift = te.max_step_drift;
      out.ok = true;
    } catch (const std::exception& ex) {
      out.ok = false;
      out.message = fmt::format("q = {}, replica {}: {}", s.q, r, ex.what());
    }
  });

  for (std::size_t e = 0; e < setups.size(); ++e) {
    const auto& s = setups[e];
    EpsSummary sum;
    sum.q = s.q;
    sum.epsilon = 1.0 / s.q;
    sum.nx = s.nx;
    sum.homog_nx = s.hnx;
    sum.replicas_requested = cfg.replicas;
    sum.t = times;
    sum.initial_mass = discrete_mass(s.v0_eps, cfg.length / s.nx);
    std::vector<const CellResult*> ok;
    for (std::size_t r = 0; r < m; ++r) {
      const auto& c = cells[e * m + r];
      if (c.ok) {
        ok.push_back(&c);
      } else {
        sum.failures.push_back(c.message);
      }
    }
    sum.replicas_completed = static_cast<int>(ok.size());
    if (sum.replicas_completed < cfg.replicas) rep.partial = true;
    const std::size_t nt = times.size();
    sum.err_mean.assign(nt, 0.0);
    sum.err_stderr.assign(nt, 0.0);
    sum.mass_resid_mean.assign(nt, 0.0);
    sum.pairing_mean.assign(nt, cplx{});
    sum.pairing_limit_mean.assign(nt, cplx{});
    if (!ok.empty()) {
      for (std::size_t k = 0; k < nt; ++k) {
        std::vector<double> ek, mk, pre, pim, lre, lim;
        for (const auto* c : ok) {
          ek.push_back(c->error[k]);
          mk.push_back(c->mass_resid[k]);
          pre.push_back(c->pairing[k].real());
          pim.push_back(c->pairing[k].imag());
          lre.push_back(c->limit[k].real());
          lim.push_back(c->limit[k].imag());
        }
        sum.err_mean[k] = mean_of(ek);
        sum.err_stderr[k] = stderr_of(ek);
        sum.mass_resid_mean[k] = mean_of(mk);
        sum.pairing_mean[k] = {mean_of(pre), mean_of(pim)};
        sum.pairing_limit_mean[k] = {mean_of(lre), mean_of(lim)};
        if (k + 1 == nt) sum.pairing_stderr = std::hypot(stderr_of(pre), stderr_of(pim));
      }
      std::vector<double> sups;
      for (const auto* c : ok) {
        sups.push_back(c->sup);
        sum.max_step_drift = std::max(sum.max_step_drift, c->drift);
      }
      sum.sup_mean = mean_of(sups);
      sum.sup_stderr = stderr_of(sups);
    }
    rep.per_eps.push_back(std::move(sum));
  }

  rep.monotone = !rep.partial && strictly_decreasing(rep.per_eps);
  if (rep.partial) {
    rep.verdict = "partial coverage";
  } else if (rep.per_eps.size() < 2) {
    rep.verdict = "single epsilon";
  } else {
    rep.verdict = rep.monotone ? "strictly decreasing" : "not strictly decreasing";
  }
  return rep;
}

}  // namespace blochhom
