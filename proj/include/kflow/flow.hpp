#pragma once

// Normalized Kahler-Ricci flow in potential form,
//   d phi / dt = log rho + phi + C,
// with C fixed so that phi_dot(0) = u(0). The potential is split as
// phi = psi + a(t): psi carries all spatial structure and stays bounded,
// while the spatial constant a obeys a_dot = a + C + m(t) (m the dx-mean of
// log rho + psi) and is integrated exactly across each step.
//
// psi is advanced by classical RK4 with step doubling. A stage that loses
// positivity rejects the step. The top Chebyshev mode, invisible to the
// collocated Legendre operator, is removed from the rate so it cannot grow.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kflow/errors.hpp"
#include "kflow/functionals.hpp"
#include "kflow/geodesic.hpp"
#include "kflow/metric.hpp"
#include "kflow/profiles.hpp"
#include "kflow/ricci.hpp"
#include "kflow/spectral.hpp"
#include "kflow/trace.hpp"

namespace kflow {

struct FlowState {
  double t = 0.0;
  MetricState state;
  double offset = 0.0;  // a(t)
  ScalarField u;
  double b = 0.0;
  double c = 0.0;
  ScalarField phi_dot;
  double potential_constant = 0.0;  // C
};

namespace detail {

struct Drift {
  VectorXd F;       // log rho + psi
  double mean = 0;  // dx-mean of F
};

// Throws PositivityError when the density dips below the floor.
inline Drift drift(const GridSpec& g, const VectorXd& psi) {
  const VectorXd rho = VectorXd::Ones(g.size()) + g.apply_legendre(psi);
  const double m = rho.minCoeff();
  if (!(m >= kDensityFloor))
    throw PositivityError("flow", "flow_step", "density minimum " + std::to_string(m) + " below floor");
  Drift d;
  d.F = g.remove_top_mode(rho.array().log().matrix() + psi);
  d.mean = 0.5 * g.integrate_dx(d.F);
  return d;
}

inline VectorXd psi_rate(const GridSpec& g, const VectorXd& psi) {
  const Drift d = drift(g, psi);
  return (d.F.array() - d.mean).matrix();
}

inline VectorXd rk4(const GridSpec& g, const VectorXd& psi, double h) {
  const VectorXd k1 = psi_rate(g, psi);
  const VectorXd k2 = psi_rate(g, psi + 0.5 * h * k1);
  const VectorXd k3 = psi_rate(g, psi + 0.5 * h * k2);
  const VectorXd k4 = psi_rate(g, psi + h * k3);
  return psi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// y' = y + f(t) across [0, h] with f linear between f0 and f1.
inline double exp_linear(double y0, double f0, double f1, double h) {
  const double em1 = std::expm1(h);
  const double e = em1 + 1.0;
  // (e^h - 1 - h)/h, series for small h
  const double phi2 = std::abs(h) < 1e-4 ? h / 2.0 + h * h / 6.0 + h * h * h / 24.0 : (em1 - h) / h;
  return e * y0 + f0 * em1 + (f1 - f0) * phi2;
}

}  // namespace detail

/// u from the flow: log rho + psi, shifted to the exponential normalization.
inline ScalarField flow_ricci_potential(const MetricState& state) {
  const VectorXd f = state.grid()->remove_top_mode(state.log_density() + state.phi());
  const double k = exponential_normalization(state, f);
  return {(f.array() + k).matrix(), detect_parity(*state.grid(), state.density())};
}

inline FlowState make_flow_state(double t, MetricState st, double offset, double c, double potential_constant) {
  FlowState fs{t, std::move(st), offset, {}, 0.0, c, {}, potential_constant};
  fs.u = flow_ricci_potential(fs.state);
  fs.b = average_b(fs.state, fs.u);
  VectorXd pd = fs.state.grid()->remove_top_mode(fs.state.log_density() + fs.state.phi());
  pd.array() += offset + potential_constant;
  fs.phi_dot = {std::move(pd), fs.u.parity};
  return fs;
}

/// Initial state phi0 = psi0; C chosen so phi_dot(0) = u(0).
inline FlowState initial_flow_state(const Grid& grid, const VectorXd& phi0) {
  MetricState st = MetricState::from_potential(grid, grid->remove_top_mode(phi0));
  const double k0 = exponential_normalization(st, grid->remove_top_mode(st.log_density() + st.phi()));
  return make_flow_state(0.0, std::move(st), 0.0, 0.0, k0);
}

struct StepControl {
  double dt_min = 1e-12;
  double dt_max = 0.05;
  double tolerance = 1e-10;
};

/// Largest step the explicit scheme tolerates for the current density.
inline double stability_cap(const MetricState& st) {
  return 2.5 / (st.grid()->legendre_spectral_radius() / st.min_density() + 1.0);
}

struct StepOutcome {
  FlowState next;
  double dt_taken = 0.0;
  double dt_suggested = 0.0;
  std::size_t rejected = 0;
};

/// One accepted step of at most `dt`. Halves and retries on a failed error
/// estimate or a positivity loss; gives up below dt_min.
inline StepOutcome flow_step(const FlowState& fs, double dt, const StepControl& ctl = {}) {
  if (!(dt > 0.0)) throw ConfigError("flow", "flow_step", "dt must be positive");
  const GridSpec& g = *fs.state.grid();
  const VectorXd& psi = fs.state.phi();
  const double cap = stability_cap(fs.state);
  double h = std::min({dt, ctl.dt_max, cap});
  const double scale = 1.0 + psi.cwiseAbs().maxCoeff();
  StepOutcome out{fs, 0.0, 0.0, 0};
  const double m0 = detail::drift(g, psi).mean;
  for (;;) {
    bool positivity_failed = false;
    double err = 0.0;
    VectorXd next;
    try {
      const VectorXd full = detail::rk4(g, psi, h);
      const VectorXd half = detail::rk4(g, detail::rk4(g, psi, 0.5 * h), 0.5 * h);
      err = (half - full).cwiseAbs().maxCoeff() / 15.0;
      next = half;
      detail::drift(g, next);
    } catch (const PositivityError&) {
      positivity_failed = true;
    }
    const bool ok = !positivity_failed && std::isfinite(err) && err <= ctl.tolerance * scale;
    if (ok) {
      MetricState st = MetricState::from_potential(fs.state.grid(), next);
      const double m1 = detail::drift(g, next).mean;
      const double a1 = detail::exp_linear(fs.offset, fs.potential_constant + m0, fs.potential_constant + m1, h);
      // c: same integrator with b piecewise linear
      const ScalarField u1 = flow_ricci_potential(st);
      const double b1 = average_b(st, u1);
      const double c1 = detail::exp_linear(fs.c, fs.b, b1, h);
      out.next = make_flow_state(fs.t + h, std::move(st), a1, c1, fs.potential_constant);
      out.dt_taken = h;
      const double grow = err > 0.0 ? 0.9 * std::pow(ctl.tolerance * scale / err, 0.2) : 2.0;
      out.dt_suggested = std::min({h * std::clamp(grow, 0.2, 2.0), ctl.dt_max});
      return out;
    }
    ++out.rejected;
    h *= 0.5;
    if (h < ctl.dt_min) {
      if (positivity_failed)
        throw PositivityError("flow", "flow_step",
                              "positivity lost at t=" + std::to_string(fs.t) + " for every dt >= dt_min");
      throw SteppingError("flow", "flow_step",
                          "error estimate above tolerance at dt_min (t=" + std::to_string(fs.t) + ")");
    }
  }
}

/// u-hat = -u - c.
inline ScalarField hat_u(const FlowState& fs) {
  return {(-fs.u.values.array() - fs.c).matrix(), fs.u.parity};
}

/// Amplitude a for phi0 = a P with |u(0)|_C0 = target (relative 1e-6).
inline double amplitude_for_u_c0(const Grid& grid, const std::string& family, std::uint64_t seed, double target) {
  const VectorXd p = profile_values(family, grid->nodes(), seed);
  if (target == 0.0) return 0.0;
  const double limit = max_admissible_amplitude(*grid, p, 1.0, 1e-3);
  auto measure = [&](double a) {
    const MetricState st = MetricState::from_potential(grid, a * p);
    return c0_norm(*grid, flow_ricci_potential(st).values);
  };
  double lo = 0.0, hi = std::min(1e-3, 0.5 * limit);
  while (measure(hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (hi >= limit) {
      hi = limit;
      if (measure(hi) < target)
        throw ConfigError("flow", "amplitude",
                          "profile '" + family + "' cannot reach |u|_C0 = " + std::to_string(target) +
                              " while positive");
      break;
    }
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = measure(mid);
    if (std::abs(v - target) <= 1e-6 * target) return mid;
    (v < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double resolve_amplitude(const FlowConfig& cfg, const Grid& grid) {
  if (cfg.initial.amplitude) return *cfg.initial.amplitude;
  return amplitude_for_u_c0(grid, cfg.initial.family, cfg.initial.seed, *cfg.initial.target_u_c0);
}

/// Light monitors of one sample; spectral and ball fields are left unset.
inline MonitorRecord light_record(const FlowState& fs) {
  const MetricState& st = fs.state;
  const GridSpec& g = *st.grid();
  MonitorRecord r;
  r.t = fs.t;
  const ScalarField u{fs.u.values, Parity::none};
  r.Y = y_functional(st, u);
  r.b = fs.b;
  r.c = fs.c;
  r.u_c0 = c0_norm(g, u);
  const VectorXd g2 = grad_norm_sq(st, u).values;
  r.grad_u_c0 = std::sqrt(c0_norm(g, g2));
  r.grad_u_l2 = std::sqrt(std::max(0.0, integrate(st, g2)));
  const VectorXd rn = (st.curvature().array() - kComplexDim).matrix();
  r.Rn_c0 = c0_norm(g, rn);
  r.Rn_l2 = l2_norm(st, rn);
  r.R_c0 = c0_norm(g, st.curvature());
  const FutakiResult fut = futaki_projection(st, u);
  r.futaki = fut.value;
  r.futaki_basis = fut.basis_value;
  r.y_identity_rhs = y_identity_rhs(st, u);
  r.y_ibp_gap = std::abs(r.Y - integrate(st, (-u.values.array() * laplacian(st, u).values.array()).matrix()));
  const Lemma3Result l3 = lemma3_check(st, u);
  r.lemma3_constant = l3.constant;
  r.lemma3_i = l3.inequality_i;
  r.u_minus_b_c0 = l3.u_minus_b_c0;
  r.volume = st.volume();
  r.curvature_mean = integrate(st, st.curvature()) / st.volume();
  r.normalization_defect = std::abs(integrate(st, (-u.values.array()).exp().matrix()) / st.volume() - 1.0);
  const VectorXd tc = fs.phi_dot.values - fs.u.values;
  r.time_constant = tc.mean();
  r.time_constant_spread = tc.maxCoeff() - tc.minCoeff();
  const RicciPotential rp = ricci_potential_detail(st);
  r.u_route_gap = c0_norm(g, (rp.u.values - fs.u.values).eval());
  r.poisson_residual = rp.residual;
  r.curvature_route_gap = (scalar_curvature_moment(st).values - st.curvature()).cwiseAbs().maxCoeff();
  r.min_density = st.min_density();
  r.phi_offset = fs.offset;
  return r;
}

struct HeavyOptions {
  int kmax = 8;
  int basis_size = 40;
  double rho_max = 1.0;
};

inline void heavy_monitors(const FlowState& fs, const HeavyOptions& opt, MonitorRecord& r) {
  SpectralOptions so;
  so.kmax = opt.kmax;
  so.basis_size = opt.basis_size;
  const SpectrumResult vec = vector_laplacian_spectrum(fs.state, opt.kmax, so);
  const SpectrumResult mu = poincare_mu(fs.state, fs.u, so);
  const BallVolumeResult ball = ball_volume_ratio(fs.state, opt.rho_max);
  r.heavy = true;
  r.lambda = vec.lambda_min_positive;
  r.lambda_kernel = vec.kernel_dimension;
  r.mu = mu.lambda_min_positive;
  r.mu_kernel = mu.kernel_dimension;
  r.mu_bound = mu.lower_bound_holds;
  r.mode_truncation_ok = vec.mode_truncation_ok && mu.mode_truncation_ok;
  r.noncollapse = ball.ratio;
  r.ball_clamped = ball.clamped;
}

using SampleObserver = std::function<void(const FlowState&, const MonitorRecord&)>;

/// Integrates to end_time, sampling monitors every monitor_cadence. A
/// failure stops the run; the trace up to that point is returned with
/// `completed == false` and the failure named.
inline FlowTrace run_flow(const FlowConfig& cfg, const SampleObserver& observer = {},
                          std::optional<VectorXd> phi0 = std::nullopt) {
  cfg.validate();
  FlowTrace trace;
  trace.config = cfg;
  const Grid grid = build_grid(cfg.nodes);
  if (!phi0) {
    trace.amplitude = resolve_amplitude(cfg, grid);
    phi0 = (trace.amplitude * profile_values(cfg.initial.family, grid->nodes(), cfg.initial.seed)).eval();
  }
  const StepControl ctl{cfg.dt_min, cfg.dt_max, cfg.tolerance};
  const HeavyOptions hopt{cfg.kmax, cfg.basis_size, cfg.rho_max};

  std::vector<double> checkpoints = cfg.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  std::size_t next_checkpoint = 0;
  double mabuchi = 0.0;
  double last_lambda = std::numeric_limits<double>::quiet_NaN(), last_mu = last_lambda, last_ball = last_lambda;
  double next_heavy = 0.0;

  auto sample = [&](const FlowState& fs) {
    MonitorRecord r = light_record(fs);
    if (!trace.records.empty()) {
      const auto& prev = trace.records.back();
      mabuchi -= 0.5 * (prev.Y + r.Y) * (r.t - prev.t) / kClassVolume;
    }
    r.M = mabuchi;
    if (fs.t >= next_heavy - 1e-9 || fs.t >= cfg.end_time - 1e-9) {
      heavy_monitors(fs, hopt, r);
      last_lambda = r.lambda;
      last_mu = r.mu;
      last_ball = r.noncollapse;
      while (next_heavy <= fs.t + 1e-9) next_heavy += cfg.heavy_cadence;
    } else {
      r.lambda = last_lambda;
      r.mu = last_mu;
      r.noncollapse = last_ball;
    }
    while (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] <= fs.t + 1e-9) {
      trace.checkpoints.push_back({fs.t, cfg.nodes, fs.state.phi(), fs.offset, fs.c});
      ++next_checkpoint;
    }
    if (cfg.store_fields) trace.fields.push_back({fs.t, fs.state.density(), fs.u.values, fs.c});
    trace.records.push_back(r);
    if (observer) observer(fs, r);
  };

  try {
    FlowState fs = initial_flow_state(grid, *phi0);
    trace.potential_constant = fs.potential_constant;
    sample(fs);
    double dt = cfg.dt_init;
    const long samples = std::lround(std::ceil(cfg.end_time / cfg.monitor_cadence - 1e-9));
    for (long k = 1; k <= samples; ++k) {
      const double target = std::min(k * cfg.monitor_cadence, cfg.end_time);
      while (target - fs.t > 1e-12) {
        const double remaining = target - fs.t;
        // avoid leaving a sliver shorter than a tenth of the step
        double want = dt;
        if (want >= remaining || remaining - want < 0.1 * want) want = remaining;
        StepOutcome so = flow_step(fs, want, ctl);
        trace.rejected_steps += so.rejected;
        ++trace.accepted_steps;
        const bool hit = std::abs(so.next.t - target) <= 1e-12;
        fs = std::move(so.next);
        if (hit) fs.t = target;
        dt = std::max(so.dt_suggested, cfg.dt_min);
      }
      fs.t = target;
      sample(fs);
    }
    trace.completed = true;
  } catch (const Error& e) {
    trace.completed = false;
    trace.failure = e.what();
  }
  return trace;
}

}  // namespace kflow
