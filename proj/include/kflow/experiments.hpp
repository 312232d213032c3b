#pragma once

// Named experiments producing pass/fail reports.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kflow/errors.hpp"
#include "kflow/flow.hpp"
#include "kflow/functionals.hpp"
#include "kflow/spectral.hpp"

namespace kflow {

struct Check {
  std::string name;
  std::string module;
  std::string monitor;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string note;
};

struct ExperimentReport {
  std::string name;
  std::string kind;
  std::vector<Check> checks;
  std::map<std::string, double> summary;
  std::vector<std::string> artifacts;
  bool passed = false;
  std::string failure;  // first failing check, module/monitor

  Check& add(Check c) {
    checks.push_back(std::move(c));
    return checks.back();
  }
  void finalize() {
    passed = !checks.empty();
    failure.clear();
    for (const auto& c : checks)
      if (!c.passed) {
        passed = false;
        if (failure.empty()) failure = c.module + "/" + c.monitor + ": " + c.name;
      }
  }
};

// ---------------------------------------------------------------------------
// Smoothing

struct EpsilonState {
  double epsilon = 0.0;
  double amplitude = 0.0;
  double u_c0 = 0.0;
  VectorXd phi0;
  Grid grid;
};

/// phi0 = a P with a bisected until |u|_C0 = epsilon (relative 1e-6).
inline EpsilonState prepare_epsilon_state(const Grid& grid, const std::string& family, double epsilon,
                                          std::uint64_t seed = 0) {
  if (!(epsilon > 0.0 && epsilon <= 0.1))
    throw ConfigError("experiments", "prepare_epsilon_state", "epsilon must lie in (0, 0.1]");
  EpsilonState s;
  s.epsilon = epsilon;
  s.grid = grid;
  s.amplitude = amplitude_for_u_c0(grid, family, seed, epsilon);
  s.phi0 = s.amplitude * profile_values(family, grid->nodes(), seed);
  const MetricState st = MetricState::from_potential(grid, s.phi0);
  s.u_c0 = c0_norm(*grid, flow_ricci_potential(st).values);
  return s;
}

struct SmoothingOptions {
  std::string family = "legendre2";
  std::uint64_t seed = 0;
  int nodes = 64;
  double cadence = 0.02;
  double tolerance = 1e-10;
};

struct SmoothingCase {
  double epsilon = 0.0;
  double amplitude = 0.0;
  double K_meas = 0.0;      // (|grad u|_C0 + |R-n|_C0)(t0+2) / eps
  double hat_u_max = 0.0;   // max over [t0, t0+2] of |u-hat|_C0
  double grad_sq_max = 0.0;  // max over [t0+1, t0+2] of |grad u-hat|^2_C0
  double H_max = 0.0;       // max over [t0+1, t0+2]
  double K_max = 0.0;
  double lap_hat_end = 0.0;  // |Delta u-hat|_C0 at t0+2
  bool hat_u_ok = true;
  bool grad_ok = true;
  bool H_ok = true;
  bool K_ok = true;
  bool lap_ok = true;
  bool passed() const { return hat_u_ok && grad_ok && H_ok && K_ok && lap_ok; }
};

struct SmoothingReport {
  std::vector<SmoothingCase> cases;
  double K_spread = 1.0;  // max/min of K_meas over positive epsilons
  bool K_stable = true;
  bool passed = true;
};

namespace detail {

inline double refined_max(const GridSpec& g, const VectorXd& f) {
  return std::max(f.maxCoeff(), (g.refinement() * f).maxCoeff());
}

inline SmoothingCase smoothing_case(double eps, const SmoothingOptions& opt) {
  SmoothingCase sc;
  sc.epsilon = eps;
  if (eps == 0.0) return sc;
  const Grid grid = build_grid(opt.nodes);
  const EpsilonState es = prepare_epsilon_state(grid, opt.family, eps, opt.seed);
  sc.amplitude = es.amplitude;
  FlowConfig cfg;
  cfg.name = "smoothing";
  cfg.nodes = opt.nodes;
  cfg.initial.family = opt.family;
  cfg.initial.amplitude = es.amplitude;
  cfg.end_time = 2.0;
  cfg.monitor_cadence = opt.cadence;
  cfg.heavy_cadence = 2.0;
  cfg.tolerance = opt.tolerance;
  const double n = kComplexDim;
  const double e2 = std::exp(2.0), e4 = std::exp(4.0), e5 = std::exp(5.0);
  double grad_end = 0.0, rn_end = 0.0;
  auto observer = [&](const FlowState& fs, const MonitorRecord& rec) {
    const GridSpec& g = *fs.state.grid();
    const ScalarField uh = hat_u(fs);
    const ScalarField f{uh.values, Parity::none};
    sc.hat_u_max = std::max(sc.hat_u_max, c0_norm(g, f));
    const double t = fs.t;
    if (t >= 1.0 - 1e-9) {
      const VectorXd g2 = grad_norm_sq(fs.state, f).values;
      const VectorXd lap = laplacian(fs.state, f).values;
      sc.grad_sq_max = std::max(sc.grad_sq_max, c0_norm(g, g2));
      const double w = std::exp(-(t - 1.0));
      const double s = eps / n * (t - 1.0);
      sc.H_max = std::max(sc.H_max, refined_max(g, (w * (g2 - s * lap)).eval()));
      sc.K_max = std::max(sc.K_max, refined_max(g, (w * (g2 + s * lap)).eval()));
    }
    if (std::abs(t - 2.0) < 1e-9) {
      sc.lap_hat_end = c0_norm(g, laplacian(fs.state, f).values);
      grad_end = rec.grad_u_c0;
      rn_end = rec.Rn_c0;
    }
  };
  const FlowTrace tr = run_flow(cfg, observer);
  if (!tr.completed) throw SteppingError("experiments", "smoothing_experiment", tr.failure);
  sc.K_meas = (grad_end + rn_end) / eps;
  sc.hat_u_ok = sc.hat_u_max <= e2 * eps;
  sc.grad_ok = sc.grad_sq_max <= e4 * eps * eps;
  sc.H_ok = sc.H_max < 2.0 * e4 * eps * eps;
  sc.K_ok = sc.K_max < 2.0 * e4 * eps * eps;
  sc.lap_ok = sc.lap_hat_end < 2.0 * n * e5 * eps;
  return sc;
}

}  // namespace detail

/// Flows each prepared state for two time units from t0 = 0 and checks the
/// barrier estimates on u-hat = -u - c.
inline SmoothingReport smoothing_experiment(const std::vector<double>& eps_list, const SmoothingOptions& opt = {}) {
  for (double e : eps_list)
    if (!(e >= 0.0 && e <= 0.05))
      throw ConfigError("experiments", "smoothing_experiment", "each epsilon must lie in [0, 0.05]");
  SmoothingReport r;
  double kmin = std::numeric_limits<double>::infinity(), kmax = 0.0;
  for (double e : eps_list) {
    r.cases.push_back(detail::smoothing_case(e, opt));
    const auto& c = r.cases.back();
    if (!c.passed()) r.passed = false;
    if (e > 0.0) {
      if (!std::isfinite(c.K_meas)) r.passed = false;
      kmin = std::min(kmin, c.K_meas);
      kmax = std::max(kmax, c.K_meas);
    }
  }
  if (kmax > 0.0) {
    r.K_spread = kmax / kmin;
    r.K_stable = r.K_spread <= 2.0;
  }
  r.passed = r.passed && r.K_stable;
  return r;
}

// ---------------------------------------------------------------------------
// Delay inequality and comparison function

struct DelayInequalityCase {
  std::vector<double> t;
  std::vector<double> Y;
  double lambda = 1.0;
  std::vector<int> delays{0};
  std::vector<double> weights{1.0};
  double K0 = 0.0;

  void validate() const {
    if (t.size() != Y.size() || t.size() < 3)
      throw ConfigError("experiments", "delay_comparison", "need at least three (t, Y) samples");
    for (std::size_t i = 1; i < t.size(); ++i)
      if (!(t[i] > t[i - 1])) throw ConfigError("experiments", "delay_comparison", "times must increase");
    if (delays.size() != weights.size() || delays.empty())
      throw ConfigError("experiments", "delay_comparison", "delays and weights differ in length");
    double sum = 0.0;
    for (std::size_t j = 0; j < delays.size(); ++j) {
      if (delays[j] < 0 || weights[j] < 0.0)
        throw ConfigError("experiments", "delay_comparison", "delays and weights must be non-negative");
      sum += weights[j];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("experiments", "delay_comparison", "weights must sum to 1");
    if (!(lambda > 0.0)) throw ConfigError("experiments", "delay_comparison", "lambda must be positive");
  }
};

struct DelayViolation {
  double t = 0.0;
  double lhs = 0.0;  // Y_dot
  double rhs = 0.0;
};

struct DelayResult {
  bool precheck_passed = false;
  std::optional<DelayViolation> violation;
  std::size_t checked_samples = 0;
  std::vector<double> admissible_mu;
  bool certified = false;
  DecayCertificate certificate;
};

namespace detail {

// Y at time s by log-linear interpolation between samples.
inline double sample_at(const std::vector<double>& t, const std::vector<double>& y, double s) {
  if (s <= t.front()) return y.front();
  if (s >= t.back()) return y.back();
  const auto it = std::upper_bound(t.begin(), t.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - t.begin());
  const double a = (s - t[i - 1]) / (t[i] - t[i - 1]);
  if (y[i - 1] > 0.0 && y[i] > 0.0) return std::exp((1.0 - a) * std::log(y[i - 1]) + a * std::log(y[i]));
  return (1.0 - a) * y[i - 1] + a * y[i];
}

}  // namespace detail

/// mu is admissible when lambda - 3 mu > 0, mu < 1, and the closing
/// inequality e^{-mu S/2} <= lambda / (2(lambda - 3 mu)) fails, S = sum a_j d_j.
inline bool delay_mu_admissible(double mu, double lambda, double S) {
  if (!(mu > 0.0 && mu < 1.0 && lambda - 3.0 * mu > 0.0)) return false;
  return std::exp(-mu * S / 2.0) > lambda / (2.0 * (lambda - 3.0 * mu));
}

inline std::vector<double> default_mu_grid(double lambda, int points = 400) {
  std::vector<double> g;
  const double lo = lambda / 1000.0, hi = lambda / 3.0;
  for (int i = 0; i < points; ++i) g.push_back(lo * std::pow(hi / lo, double(i) / (points - 1)));
  return g;
}

/// Checks the sampled delay inequality for t >= K0, then returns the largest
/// admissible mu on the grid with the minimal R such that Y <= R e^{-mu t}
/// at every sample.
inline DelayResult delay_comparison(const DelayInequalityCase& c, std::vector<double> mu_grid = {}) {
  c.validate();
  if (mu_grid.empty()) mu_grid = default_mu_grid(c.lambda);
  DelayResult r;
  const int amax = *std::max_element(c.delays.begin(), c.delays.end());
  for (std::size_t i = 1; i + 1 < c.t.size(); ++i) {
    const double t = c.t[i];
    if (t < c.K0 - 1e-12 || t - amax < c.t.front() - 1e-12) continue;
    const double ydot = (c.Y[i + 1] - c.Y[i - 1]) / (c.t[i + 1] - c.t[i - 1]);
    double prod = 1.0;
    for (std::size_t j = 0; j < c.delays.size(); ++j)
      prod *= std::pow(std::max(0.0, detail::sample_at(c.t, c.Y, t - c.delays[j])), c.weights[j] / 2.0);
    const double rhs = -c.lambda * c.Y[i] + 0.5 * c.lambda * std::sqrt(std::max(0.0, c.Y[i])) * prod;
    ++r.checked_samples;
    if (ydot > rhs + 1e-12 * (std::abs(ydot) + std::abs(rhs))) {
      r.violation = DelayViolation{t, ydot, rhs};
      return r;
    }
  }
  r.precheck_passed = r.checked_samples > 0;
  if (!r.precheck_passed) return r;

  double S = 0.0;
  for (std::size_t j = 0; j < c.delays.size(); ++j) S += c.delays[j] * c.weights[j];
  for (double mu : mu_grid)
    if (delay_mu_admissible(mu, c.lambda, S)) r.admissible_mu.push_back(mu);
  if (r.admissible_mu.empty()) return r;
  const double mu = *std::max_element(r.admissible_mu.begin(), r.admissible_mu.end());

  DecayCertificate& cert = r.certificate;
  cert.t1 = c.t.front();
  cert.t2 = c.t.back();
  cert.mu = mu;
  cert.samples = c.t.size();
  double log_r = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.t.size(); ++i)
    if (c.Y[i] > 0.0) log_r = std::max(log_r, std::log(c.Y[i]) + mu * c.t[i]);
  cert.R = std::isfinite(log_r) ? std::exp(log_r) : 0.0;
  cert.degenerate = !std::isfinite(log_r);
  cert.envelope_holds = true;
  for (std::size_t i = 0; i < c.t.size(); ++i)
    if (c.Y[i] > cert.R * std::exp(-mu * c.t[i]) * (1.0 + 1e-12)) cert.envelope_holds = false;
  cert.pass = cert.envelope_holds && mu > 0.0;
  cert.note = "comparison function R exp(-mu t)";
  r.certified = cert.pass;
  return r;
}

// ---------------------------------------------------------------------------
// Convergence report

struct ReportThresholds {
  double transient = 2.0;
  double y_floor = 1e-22;
  double u_floor = 1e-11;
  double rn_floor = 1e-8;
  double terminal_rn = 1e-4;
};

/// Lowest positive vector-field eigenvalue of the reference metric.
inline double reference_lambda(int nodes, int kmax, int basis_size) {
  SpectralOptions so;
  so.kmax = kmax;
  so.basis_size = basis_size;
  return vector_laplacian_spectrum(reference_metric(build_grid(nodes)), kmax, so).lambda_min_positive;
}

namespace detail {

inline bool decreasing_above(const std::vector<double>& t, const std::vector<double>& v, double t0, double floor,
                             double rel = 1e-9) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (t[i - 1] < t0 - 1e-12) continue;
    if (v[i - 1] <= floor || v[i] <= floor) break;
    if (v[i] > v[i - 1] * (1.0 + rel)) return false;
  }
  return true;
}

}  // namespace detail

/// Evaluates every run-level check on a finished trace.
inline ExperimentReport assess_trace(const FlowTrace& tr, const ReportThresholds& th = {}) {
  ExperimentReport rep;
  rep.name = tr.config.name;
  rep.kind = "convergence";
  rep.add({"run completed", "flow", "run_flow", tr.completed, double(tr.records.size()), 0.0, tr.failure});
  if (tr.records.empty()) {
    rep.finalize();
    return rep;
  }
  const auto& rs = tr.records;
  const auto t = tr.times();
  const double tend = rs.back().t;
  auto max_of = [&](auto f) {
    double m = 0.0;
    for (const auto& r : rs) m = std::max(m, f(r));
    return m;
  };
  auto all_of = [&](auto f) {
    for (const auto& r : rs)
      if (!f(r)) return false;
    return true;
  };
  const double vol = max_of([](const MonitorRecord& r) { return std::abs(r.volume / kClassVolume - 1.0); });
  rep.add({"volume conserved", "geometry", "volume", vol <= 1e-10, vol, 1e-10, ""});
  const double cm = max_of([](const MonitorRecord& r) { return std::abs(r.curvature_mean - kComplexDim); });
  rep.add({"curvature average equals n", "geometry", "scalar_curvature", cm <= 1e-8, cm, 1e-8, ""});
  const double nd = max_of([](const MonitorRecord& r) { return r.normalization_defect; });
  rep.add({"exponential normalization of u", "flow", "ricci_potential", nd <= 1e-9, nd, 1e-9, ""});
  const double gap = max_of([](const MonitorRecord& r) { return r.u_route_gap; });
  rep.add({"Poisson and flow routes to u agree", "flow", "ricci_potential", gap <= 1e-7, gap, 1e-7, ""});
  const double spread = max_of([](const MonitorRecord& r) { return r.time_constant_spread; });
  rep.add({"phi_dot - u spatially constant", "flow", "flow_step", spread <= 1e-8, spread, 1e-8, ""});
  const double ibp = max_of([](const MonitorRecord& r) { return r.y_ibp_gap; });
  rep.add({"Y equals int u(-Delta u)", "functionals", "y_functional", ibp <= 1e-9, ibp, 1e-9, ""});

  // b <= 0 and nondecreasing
  bool b_sign = all_of([](const MonitorRecord& r) { return r.b <= kLemma3Roundoff; });
  double b_drop = 0.0;
  for (std::size_t i = 1; i < rs.size(); ++i) b_drop = std::max(b_drop, rs[i - 1].b - rs[i].b);
  rep.add({"b nonpositive", "flow", "average_b", b_sign, max_of([](const MonitorRecord& r) { return r.b; }),
           kLemma3Roundoff, ""});
  rep.add({"b nondecreasing", "functionals", "average_b", b_drop <= 1e-8, b_drop, 1e-8, ""});

  // M nonincreasing and plateau
  double m_rise = 0.0;
  for (std::size_t i = 1; i < rs.size(); ++i) m_rise = std::max(m_rise, rs[i].M - rs[i - 1].M);
  rep.add({"Mabuchi energy nonincreasing", "functionals", "mabuchi_along_flow", m_rise <= 1e-10, m_rise, 1e-10, ""});
  const double m_tail = rs.back().M - rs[sample_index(tr, 0.75 * tend)].M;
  const double m_total = std::abs(rs.back().M) + 1e-300;
  const double plateau = std::abs(m_tail) / (m_total + 1e-30);
  rep.add({"Mabuchi energy plateaus (bounded below)", "functionals", "mabuchi_along_flow",
           std::abs(m_tail) <= 1e-6 * (1.0 + m_total), std::abs(m_tail), 1e-6, ""});
  rep.summary["M_final"] = rs.back().M;
  rep.summary["M_tail_fraction"] = plateau;

  // Long-time monitors
  rep.add({"terminal |R-n|_C0", "flow", "run_flow", rs.back().Rn_c0 < th.terminal_rn, rs.back().Rn_c0,
           th.terminal_rn, ""});
  const auto rn = tr.series([](const MonitorRecord& r) { return r.Rn_c0; });
  const auto y = tr.series([](const MonitorRecord& r) { return r.Y; });
  rep.add({"|R-n|_C0 decreasing after transient", "flow", "run_flow",
           detail::decreasing_above(t, rn, th.transient, th.rn_floor), 0.0, th.rn_floor, ""});
  rep.add({"Y decreasing after transient", "functionals", "y_functional",
           detail::decreasing_above(t, y, th.transient, th.y_floor), 0.0, th.y_floor, ""});
  const DecayCertificate yc = decay_fit(t, y, th.transient, tend, th.y_floor);
  rep.add({"Y decay certificate", "functionals", "decay_fit", yc.pass, yc.mu, 0.0, yc.note});
  rep.summary["Y_mu"] = yc.mu;
  rep.summary["Y_R"] = yc.R;
  const double rate_floor = yc.mu / (2.0 * (kComplexDim + 1));
  struct Norm {
    const char* name;
    double MonitorRecord::*field;
    double floor;
  };
  for (const Norm& nm : {Norm{"u_c0", &MonitorRecord::u_c0, th.u_floor},
                         Norm{"grad_u_c0", &MonitorRecord::grad_u_c0, th.u_floor},
                         Norm{"Rn_c0", &MonitorRecord::Rn_c0, th.rn_floor}}) {
    const auto v = tr.series([&](const MonitorRecord& r) { return r.*(nm.field); });
    const DecayCertificate c = decay_fit(t, v, th.transient, tend, nm.floor);
    rep.add({std::string(nm.name) + " exponential envelope", "functionals", "decay_fit",
             c.pass && (c.degenerate || c.mu >= rate_floor), c.mu, rate_floor, c.note});
    rep.summary[std::string(nm.name) + "_mu"] = c.mu;
  }
  const PIntegral pi = p_integral(tr, 2.5);
  const bool last_small = tend < 30.0 - 1e-9 || (!pi.increments.empty() && pi.increments.back() < 1e-8);
  rep.add({"p=2.5 integral increments decay geometrically", "functionals", "p_integral", pi.geometric && last_small,
           pi.max_ratio, 0.9, ""});
  rep.summary["p_integral"] = pi.running.empty() ? 0.0 : pi.running.back();

  // Ricci potential bounds
  rep.add({"-b <= |u - b|_C0 at every sample", "functionals", "lemma3_check",
           all_of([](const MonitorRecord& r) { return r.lemma3_i; }), 0.0, 0.0, ""});
  double l3 = 0.0;
  bool l3_finite = true;
  for (const auto& r : rs)
    if (!std::isnan(r.lemma3_constant)) {
      l3 = std::max(l3, r.lemma3_constant);
      if (!std::isfinite(r.lemma3_constant)) l3_finite = false;
    }
  rep.add({"Ricci potential C0 constant bounded", "functionals", "lemma3_check", l3_finite, l3, 0.0, ""});
  rep.summary["lemma3_constant"] = l3;

  // Perelman curvature bound: no sample exceeds 10x the first-quarter maximum
  double q = 0.0, all = 0.0;
  for (const auto& r : rs) {
    const double v = r.u_c0 + r.grad_u_c0 + r.R_c0;
    if (r.t <= 0.25 * tend + 1e-9) q = std::max(q, v);
    all = std::max(all, v);
  }
  rep.add({"Perelman curvature bound non-exploding", "flow", "run_flow", all <= 10.0 * q, all, 10.0 * q, ""});

  bool chain = all_of([](const MonitorRecord& r) {
    return r.Rn_l2 <= std::sqrt(kClassVolume) * r.Rn_c0 * (1.0 + 1e-10) + 1e-15;
  });
  rep.add({"L2 <= V^{1/2} C0 for R-n", "functionals", "norms", chain, 0.0, 0.0, ""});
  const double fut = max_of([](const MonitorRecord& r) { return std::max(std::abs(r.futaki), std::abs(r.futaki_basis)); });
  rep.add({"Futaki invariant vanishes", "functionals", "futaki_projection", fut < 1e-7, fut, 1e-7, ""});

  // Y_dot <= C Y with C from the recorded curvature bound
  const double cbound = kComplexDim + 1 + max_of([](const MonitorRecord& r) { return r.R_c0; });
  bool ydot_ok = true;
  for (std::size_t i = 1; i + 1 < rs.size(); ++i) {
    const double yd = (rs[i + 1].Y - rs[i - 1].Y) / (rs[i + 1].t - rs[i - 1].t);
    if (rs[i].Y > th.y_floor && yd > cbound * rs[i].Y * (1.0 + 1e-6)) ydot_ok = false;
  }
  rep.add({"Y_dot <= C Y", "functionals", "y_identity_residual", ydot_ok, cbound, 0.0, ""});
  const IterationRatio it = iteration_ratio(tr);
  const bool grad_vanishes = all_of([](const MonitorRecord& r) { return r.grad_u_c0 <= 1e-9; });
  rep.add({"iteration inequality constant finite", "functionals", "iteration_ratio",
           std::isfinite(it.max_ratio) && (it.samples > 0 || grad_vanishes), it.max_ratio, 0.0, ""});
  rep.summary["iteration_constant"] = it.max_ratio;

  // Heavy monitors
  double lam_ref = reference_lambda(tr.config.nodes, tr.config.kmax, tr.config.basis_size);
  double lam_inf = std::numeric_limits<double>::infinity(), mu_min = lam_inf, nc_min = lam_inf;
  bool kernels = true, mu_kernel = true, trunc = true;
  for (const auto& r : rs) {
    if (!r.heavy) continue;
    if (r.lambda_kernel != 3) kernels = false;
    if (r.mu_kernel != 1) mu_kernel = false;
    if (!r.mode_truncation_ok) trunc = false;
    mu_min = std::min(mu_min, r.mu);
    nc_min = std::min(nc_min, r.noncollapse);
    if (r.t >= th.transient - 1e-9) lam_inf = std::min(lam_inf, r.lambda);
  }
  rep.add({"Poincare constant mu >= 1 - 1e-3", "spectral", "poincare_mu", mu_min >= 1.0 - 1e-3, mu_min, 1.0 - 1e-3,
           ""});
  rep.add({"Poincare kernel is the constants", "spectral", "poincare_mu", mu_kernel, 1.0, 1.0, ""});
  rep.add({"holomorphic kernel dimension 3", "spectral", "vector_laplacian_spectrum", kernels, 3.0, 3.0, ""});
  rep.add({"uniform gap: inf lambda >= lambda_ref / 2", "spectral", "vector_laplacian_spectrum",
           lam_inf >= 0.5 * lam_ref && lam_inf > 0.0, lam_inf, 0.5 * lam_ref, ""});
  rep.add({"mode truncation monotone", "spectral", "mode_truncation", trunc, 0.0, 0.0, ""});
  rep.add({"non-collapsing ratio positive", "geometry", "ball_volume_ratio", nc_min > 0.0 && std::isfinite(nc_min),
           nc_min, 0.0, ""});
  rep.summary["lambda_inf"] = lam_inf;
  rep.summary["lambda_ref"] = lam_ref;
  rep.summary["mu_min"] = mu_min;
  rep.summary["noncollapse_min"] = nc_min;

  // Delay certificate on the measured Y tail, one delay of 2 time units
  DelayInequalityCase dc;
  for (const auto& r : rs)
    if (r.Y > th.y_floor) {
      dc.t.push_back(r.t);
      dc.Y.push_back(r.Y);
    } else {
      break;
    }
  dc.lambda = std::isfinite(lam_inf) ? lam_inf : lam_ref;
  dc.delays = {2};
  dc.weights = {1.0};
  dc.K0 = th.transient;
  bool delay_ok = false;
  double delay_mu = 0.0;
  std::string delay_note = "trajectory at floor";
  if (dc.t.size() >= 3 && dc.t.back() > dc.K0 + 2.0) {
    const DelayResult dr = delay_comparison(dc);
    delay_ok = dr.certified;
    delay_mu = dr.certificate.mu;
    delay_note = dr.violation ? "delay inequality violated at t=" + std::to_string(dr.violation->t) : "";
  } else if (dc.t.size() < 3) {
    delay_ok = true;  // Y identically at the floor: nothing to certify
  }
  rep.add({"delay comparison certificate", "experiments", "delay_comparison", delay_ok, delay_mu, 0.0, delay_note});
  rep.summary["delay_mu"] = delay_mu;
  rep.finalize();
  return rep;
}

/// Runs the flow and assesses it.
inline ExperimentReport convergence_report(const FlowConfig& cfg, FlowTrace* trace_out = nullptr,
                                           const ReportThresholds& th = {}) {
  FlowTrace tr = run_flow(cfg);
  ExperimentReport rep = assess_trace(tr, th);
  if (trace_out) *trace_out = std::move(tr);
  return rep;
}

/// Independent runs in parallel; results in input order.
inline std::vector<ExperimentReport> sweep(const std::vector<FlowConfig>& configs,
                                           std::vector<FlowTrace>* traces = nullptr) {
  std::vector<std::future<std::pair<ExperimentReport, FlowTrace>>> jobs;
  for (const auto& c : configs)
    jobs.push_back(std::async(std::launch::async, [c] {
      FlowTrace tr;
      ExperimentReport rep = convergence_report(c, &tr);
      return std::make_pair(std::move(rep), std::move(tr));
    }));
  std::vector<ExperimentReport> out;
  for (auto& j : jobs) {
    auto [rep, tr] = j.get();
    out.push_back(std::move(rep));
    if (traces) traces->push_back(std::move(tr));
  }
  return out;
}

}  // namespace kflow
