#pragma once

// Scalar functionals of a state and their analysis along a trace.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "kflow/errors.hpp"
#include "kflow/metric.hpp"
#include "kflow/ricci.hpp"
#include "kflow/trace.hpp"

namespace kflow {

/// Y = int |grad u|^2 omega.
inline double y_functional(const MetricState& state, const ScalarField& u) {
  return integrate(state, grad_norm_sq(state, {u.values, Parity::none}));
}

/// (n+1) Y - int |grad u|^2 R - int |grad gradbar u|^2 - int |grad grad u|^2.
inline double y_identity_rhs(const MetricState& state, const ScalarField& u) {
  const ScalarField f{u.values, Parity::none};
  const VectorXd g2 = grad_norm_sq(state, f).values;
  const HessianNorms h = hessian_norms(state, f);
  const double y = integrate(state, g2);
  return (kComplexDim + 1) * y - integrate(state, (g2.array() * state.curvature().array()).matrix()) -
         integrate(state, h.mixed) - integrate(state, h.pure);
}

struct FutakiResult {
  // Projection of grad^{1,0} u on d/dz, z d/dz, z^2 d/dz (modes -1, 0, 1).
  std::array<double, 3> coefficients{};
  std::array<double, 3> gram{};
  double basis_value = 0.0;  // Fut(z d/dz)
  double value = 0.0;        // Fut of the projection
};

/// Vector fields are written V = z H(x) e^{ik theta} d/dz. In this form
/// |V|^2 omega reduces to rho^2 (1-x^2) H^2 / 4 dx dtheta, grad^{1,0} u has
/// H = u'/rho in mode 0, and (z d/dz) u = (1-x^2) u' / 2.
inline FutakiResult futaki_projection(const MetricState& state, const ScalarField& u) {
  const GridSpec& g = *state.grid();
  const VectorXd& x = g.nodes();
  const Eigen::ArrayXd rho = state.density().array();
  const Eigen::ArrayXd s = 1.0 - x.array().square();
  const VectorXd ux = g.derivative(u.values);
  FutakiResult r;
  // mode -1: H^2 = (1-x)/(1+x); mode 0: H = 1; mode 1: H^2 = (1+x)/(1-x).
  const Eigen::ArrayXd sq_minus = (1.0 - x.array()).square();
  const Eigen::ArrayXd sq_plus = (1.0 + x.array()).square();
  r.gram[0] = 2.0 * kPi * g.integrate_dx((rho.square() * sq_minus / 4.0).matrix());
  r.gram[1] = 2.0 * kPi * g.integrate_dx((rho.square() * s / 4.0).matrix());
  r.gram[2] = 2.0 * kPi * g.integrate_dx((rho.square() * sq_plus / 4.0).matrix());
  for (double gk : r.gram)
    if (!(gk > 0.0)) throw NumericalError("functionals", "futaki_projection", "singular Gram matrix");
  const double pairing = 2.0 * kPi * g.integrate_dx((rho.square() * s / 4.0 * ux.array() / rho).matrix());
  r.coefficients = {0.0, pairing / r.gram[1], 0.0};
  r.basis_value = kPi * g.integrate_dx((0.5 * s * ux.array() * rho).matrix()) / state.volume();
  r.value = r.coefficients[1] * r.basis_value;
  return r;
}

struct Lemma3Result {
  double b = 0.0;
  double u_minus_b_c0 = 0.0;
  bool inequality_i = true;  // 0 <= -b <= |u - b|_C0
  bool constant_defined = false;
  double constant = std::numeric_limits<double>::quiet_NaN();
  double noncollapse = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr double kLemma3Roundoff = 1e-14;
inline constexpr double kLemma3Denominator = 1e-14;

/// Checks 0 <= -b <= |u-b|_C0 and extracts
/// C = |u-b|^{n+1} / (|grad u|_L2 |grad u|_C0^n).
inline Lemma3Result lemma3_check(const MetricState& state, const ScalarField& u,
                                 double noncollapse = std::numeric_limits<double>::quiet_NaN()) {
  const GridSpec& g = *state.grid();
  Lemma3Result r;
  r.noncollapse = noncollapse;
  r.b = average_b(state, u);
  r.u_minus_b_c0 = c0_norm(g, (u.values.array() - r.b).matrix());
  r.inequality_i = (-r.b >= -kLemma3Roundoff) && (-r.b <= r.u_minus_b_c0 + kLemma3Roundoff);
  const ScalarField f{u.values, Parity::none};
  const VectorXd g2 = grad_norm_sq(state, f).values;
  const double a = std::sqrt(std::max(0.0, integrate(state, g2)));
  const double bnorm = std::sqrt(c0_norm(g, g2));
  const double den = a * std::pow(bnorm, kComplexDim);
  if (den > kLemma3Denominator) {
    r.constant_defined = true;
    r.constant = std::pow(r.u_minus_b_c0, kComplexDim + 1) / den;
  }
  return r;
}

/// |d/dt Y - rhs| / (1 + |Y|) at records[index] by central differences over
/// `stride` samples on each side.
inline double y_identity_residual(const FlowTrace& trace, std::size_t index, std::size_t stride = 1) {
  const auto& r = trace.records;
  if (stride == 0 || index < stride || index + stride >= r.size())
    throw ConfigError("functionals", "y_identity_residual", "sample needs neighbours on both sides");
  const double dy = (r[index + stride].Y - r[index - stride].Y) / (r[index + stride].t - r[index - stride].t);
  return std::abs(dy - r[index].y_identity_rhs) / (1.0 + std::abs(r[index].Y));
}

/// Index of the sample closest to t.
inline std::size_t sample_index(const FlowTrace& trace, double t) {
  const auto& r = trace.records;
  if (r.empty()) return 0;
  const auto it = std::lower_bound(r.begin(), r.end(), t, [](const MonitorRecord& m, double v) { return m.t < v; });
  std::size_t i = static_cast<std::size_t>(it - r.begin());
  if (i == r.size()) return i - 1;
  if (i > 0 && std::abs(r[i - 1].t - t) <= std::abs(r[i].t - t)) --i;
  return i;
}

inline double y_identity_residual_at(const FlowTrace& trace, double t, std::size_t stride = 1) {
  return y_identity_residual(trace, sample_index(trace, t), stride);
}

/// M(t) = -(1/V) int_0^t Y, trapezoid on the samples, M(0) = 0.
inline std::vector<double> mabuchi_along_flow(const FlowTrace& trace) {
  std::vector<double> m;
  double acc = 0.0;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    if (i > 0) {
      const auto& a = trace.records[i - 1];
      const auto& b = trace.records[i];
      acc -= 0.5 * (a.Y + b.Y) * (b.t - a.t) / kClassVolume;
    }
    m.push_back(acc);
  }
  return m;
}

struct DecayCertificate {
  double t1 = 0.0;
  double t2 = 0.0;
  double R = 0.0;
  double mu = 0.0;
  double max_relative_residual = 0.0;  // of the log-linear fit
  std::size_t samples = 0;
  bool degenerate = false;  // no positive samples: treated as converged
  bool envelope_holds = false;
  bool pass = false;
  std::string note;
};

inline constexpr std::size_t kMinFitSamples = 10;

/// Least-squares fit of log v against t over samples in [t1, t2] with
/// v > floor, then the smallest R with v <= R e^{-mu t} on those samples.
inline DecayCertificate decay_fit(const std::vector<double>& t, const std::vector<double>& v, double t1, double t2,
                                  double floor = 0.0) {
  DecayCertificate c;
  c.t1 = t1;
  c.t2 = t2;
  std::vector<double> ts, ls;
  bool any_positive = false;
  for (std::size_t i = 0; i < t.size() && i < v.size(); ++i) {
    if (t[i] < t1 - 1e-12 || t[i] > t2 + 1e-12) continue;
    if (v[i] > 0.0) any_positive = true;
    if (v[i] > floor && v[i] > 0.0) {
      ts.push_back(t[i]);
      ls.push_back(std::log(v[i]));
    }
  }
  c.samples = ts.size();
  if (!any_positive) {
    c.degenerate = true;
    c.envelope_holds = true;
    c.pass = true;
    c.note = "all samples zero";
    return c;
  }
  if (ts.size() < kMinFitSamples) {
    c.note = "fewer than 10 samples above floor";
    return c;
  }
  const double n = static_cast<double>(ts.size());
  double st = 0, sl = 0, stt = 0, stl = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sl += ls[i];
    stt += ts[i] * ts[i];
    stl += ts[i] * ls[i];
  }
  const double slope = (n * stl - st * sl) / (n * stt - st * st);
  const double icpt = (sl - slope * st) / n;
  c.mu = -slope;
  double log_r = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    log_r = std::max(log_r, ls[i] + c.mu * ts[i]);
    c.max_relative_residual = std::max(c.max_relative_residual, std::abs(std::expm1(ls[i] - (icpt + slope * ts[i]))));
  }
  c.R = std::exp(log_r);
  c.envelope_holds = true;
  for (std::size_t i = 0; i < ts.size(); ++i)
    if (std::exp(ls[i]) > c.R * std::exp(-c.mu * ts[i]) * (1.0 + 1e-12)) c.envelope_holds = false;
  c.pass = c.mu > 0.0 && c.envelope_holds;
  return c;
}

struct PIntegral {
  double p = 0.0;
  std::vector<double> running;     // per sample
  std::vector<double> increments;  // over [k, k+1]
  std::vector<double> ratios;      // increments[k+1]/increments[k], above the floor
  double max_ratio = 0.0;
  bool geometric = false;
};

inline constexpr double kIncrementFloor = 1e-20;

/// Running trapezoid integral of |R-n|_C0^p and its unit-interval increments.
inline PIntegral p_integral(const FlowTrace& trace, double p, double ratio_bound = 0.9) {
  if (!(p > 0.0)) throw ConfigError("functionals", "p_integral", "p must be positive");
  PIntegral out;
  out.p = p;
  double acc = 0.0;
  const auto& r = trace.records;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i > 0) acc += 0.5 * (std::pow(r[i - 1].Rn_c0, p) + std::pow(r[i].Rn_c0, p)) * (r[i].t - r[i - 1].t);
    out.running.push_back(acc);
  }
  if (r.empty()) return out;
  const double t_end = r.back().t;
  auto value_at = [&](double t) {
    const std::size_t k = sample_index(trace, t);
    return out.running[k];
  };
  for (int k = 0; k + 1 <= t_end + 1e-9; ++k) out.increments.push_back(value_at(k + 1.0) - value_at(k));
  for (std::size_t k = 0; k + 1 < out.increments.size(); ++k) {
    if (out.increments[k + 1] <= kIncrementFloor || out.increments[k] <= kIncrementFloor) break;
    out.ratios.push_back(out.increments[k + 1] / out.increments[k]);
    out.max_ratio = std::max(out.max_ratio, out.ratios.back());
  }
  // the first unit interval carries the transient and is not required to contract
  std::size_t sustained = 0;
  bool ok = true;
  for (std::size_t k = 1; k < out.ratios.size(); ++k) {
    ++sustained;
    if (out.ratios[k] >= ratio_bound) ok = false;
  }
  out.geometric = ok && sustained >= 3;
  // a trajectory already at the fixed point has nothing left to decay
  if (std::all_of(out.increments.begin(), out.increments.end(), [](double d) { return d <= kIncrementFloor; }))
    out.geometric = true;
  return out;
}

struct IterationRatio {
  double max_ratio = 0.0;
  std::size_t samples = 0;
};

/// max over t >= 2 of |grad u|_C0(t) / (|grad u|_C0^{n/(n+1)}(t-2) |grad u|_L2^{1/(n+1)}(t-2)),
/// restricted to samples where the earlier gradient norms exceed `floor`.
inline IterationRatio iteration_ratio(const FlowTrace& trace, double floor = 1e-9) {
  IterationRatio out;
  const double e = static_cast<double>(kComplexDim) / (kComplexDim + 1);
  for (const auto& rec : trace.records) {
    if (rec.t < 2.0 - 1e-9) continue;
    const auto& prev = trace.records[sample_index(trace, rec.t - 2.0)];
    if (std::abs(prev.t - (rec.t - 2.0)) > 1e-6) continue;
    if (prev.grad_u_c0 <= floor || prev.grad_u_l2 <= floor) continue;
    const double ratio = rec.grad_u_c0 / (std::pow(prev.grad_u_c0, e) * std::pow(prev.grad_u_l2, 1.0 - e));
    out.max_ratio = std::max(out.max_ratio, ratio);
    ++out.samples;
  }
  return out;
}

}  // namespace kflow
