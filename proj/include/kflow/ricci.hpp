#pragma once

// Ricci potential u: R_{kj} - g_{kj} = -d_j d_k u, (1/V) int e^{-u} omega = 1.
// Tracing gives Delta u = n - R. In the reduction this is the Legendre problem
// L0 u = rho (1 - R), whose right-hand side has zero dx-mean.

#include <Eigen/Dense>

#include <cmath>

#include "kflow/metric.hpp"

namespace kflow {

/// Shift v by the constant making (1/V) int e^{-v} omega = 1.
inline double exponential_normalization(const MetricState& state, const VectorXd& v) {
  const double shift = v.minCoeff();
  const double mean = integrate(state, (-(v.array() - shift)).exp().matrix()) / state.volume();
  if (!(mean > 0.0) || !std::isfinite(mean))
    throw NumericalError("flow", "ricci_potential", "exponential normalization has no finite solution");
  return std::log(mean) - shift;
}

inline constexpr double kPoissonResidualLimit = 1e-7;

struct RicciPotential {
  ScalarField u;
  double normalization = 0.0;  // constant added to the zero-mean solve
  double residual = 0.0;       // max |Delta u - (n - R)|
};

inline RicciPotential ricci_potential_detail(const MetricState& state) {
  const GridSpec& g = *state.grid();
  const VectorXd rhs = (state.density().array() * (1.0 - state.curvature().array())).matrix();
  VectorXd v = g.solve_legendre(rhs);
  RicciPotential out;
  out.normalization = exponential_normalization(state, v);
  v.array() += out.normalization;
  const VectorXd lap = (g.apply_legendre(v).array() / state.density().array()).matrix();
  out.residual = (lap.array() - (1.0 - state.curvature().array())).abs().maxCoeff();
  if (!(out.residual <= kPoissonResidualLimit * (1.0 + rhs.cwiseAbs().maxCoeff())))
    throw NumericalError("flow", "ricci_potential", "Poisson residual " + std::to_string(out.residual));
  out.u = {std::move(v), detect_parity(g, state.density())};
  return out;
}

inline ScalarField ricci_potential(const MetricState& state) { return ricci_potential_detail(state).u; }

/// b = (1/V) int u e^{-u} omega. Nonpositive by Jensen.
inline double average_b(const MetricState& state, const ScalarField& u) {
  return integrate(state, (u.values.array() * (-u.values.array()).exp()).matrix()) / state.volume();
}

}  // namespace kflow
