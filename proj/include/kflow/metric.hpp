#pragma once

// Rotationally symmetric Kahler metrics in the class pi c_1(CP^1).
//
// Conventions: omega = (i/2) g dz^dzbar with reference g0 = 2/(1+|z|^2)^2, so
// V = 2 pi and R = 1 for the reference. In the coordinate x = (|z|^2-1)/(|z|^2+1)
// the reference form is omega0 = (1/2) dx^dtheta. A potential phi(x) gives
//   density rho = omega_phi/omega0 = 1 + L0 phi,  L0 f = (1/2)((1-x^2) f')',
// and every operator below follows from the conformal factor rho:
//   Laplacian          f -> L0 f / rho
//   |grad f|^2         (1-x^2) f'^2 / (2 rho)
//   |grad grad f|^2    ((1-x^2)/2 * (f'/rho)')^2
//   R                  (1 - L0 log rho) / rho

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "kflow/errors.hpp"
#include "kflow/grid.hpp"

namespace kflow {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kClassVolume = 2.0 * std::numbers::pi;
inline constexpr int kComplexDim = 1;
inline constexpr double kDensityFloor = 1e-12;

enum class Parity { none, even, odd };

struct ScalarField {
  VectorXd values;
  Parity parity = Parity::none;
};

inline const char* to_string(Parity p) {
  switch (p) {
    case Parity::even: return "even";
    case Parity::odd: return "odd";
    default: return "none";
  }
}

/// Throws RegularityError unless f(-x) = +-f(x) as declared.
inline void check_parity(const GridSpec& grid, const ScalarField& f, const char* op) {
  if (f.parity == Parity::none) return;
  const double sign = (f.parity == Parity::even) ? 1.0 : -1.0;
  const double scale = 1.0 + f.values.cwiseAbs().maxCoeff();
  for (int i = 0; i < grid.size(); ++i) {
    const double defect = std::abs(f.values(i) - sign * f.values(grid.mirror(i)));
    if (defect > 1e-10 * scale)
      throw RegularityError("geometry", op,
                            std::string("field declared ") + to_string(f.parity) +
                                " but antipodal defect is " + std::to_string(defect));
  }
}

inline Parity detect_parity(const GridSpec& grid, const VectorXd& v, double tol = 1e-12) {
  const double scale = 1.0 + v.cwiseAbs().maxCoeff();
  bool even = true, odd = true;
  for (int i = 0; i < grid.size(); ++i) {
    const double a = v(i), b = v(grid.mirror(i));
    if (std::abs(a - b) > tol * scale) even = false;
    if (std::abs(a + b) > tol * scale) odd = false;
  }
  if (even) return Parity::even;
  if (odd) return Parity::odd;
  return Parity::none;
}

class MetricState {
 public:
  /// Builds the metric omega0 + (i/2) ddbar phi. Rejects (never regularizes)
  /// a density below kDensityFloor.
  static MetricState from_potential(Grid grid, VectorXd phi) {
    if (phi.size() != grid->size())
      throw ConfigError("geometry", "metric", "potential length does not match grid");
    if (!phi.allFinite()) throw NumericalError("geometry", "metric", "non-finite potential");
    MetricState s;
    s.grid_ = std::move(grid);
    s.phi_ = std::move(phi);
    s.density_ = VectorXd::Ones(s.grid_->size()) + s.grid_->apply_legendre(s.phi_);
    const double min_density = s.density_.minCoeff();
    if (!(min_density >= kDensityFloor))
      throw PositivityError("geometry", "density",
                            "density minimum " + std::to_string(min_density) + " below floor");
    const VectorXd& x = s.grid_->nodes();
    s.log_density_ = s.density_.array().log().matrix();
    s.coefficient_ = (0.5 * s.density_.array() * (1.0 - x.array().square())).matrix();
    s.curvature_ = ((1.0 - s.grid_->apply_legendre(s.log_density_).array()) / s.density_.array()).matrix();
    s.volume_ = kPi * s.grid_->weights().dot(s.density_);
    return s;
  }

  const Grid& grid() const noexcept { return grid_; }
  const VectorXd& phi() const noexcept { return phi_; }
  /// omega_phi / omega0.
  const VectorXd& density() const noexcept { return density_; }
  const VectorXd& log_density() const noexcept { return log_density_; }
  /// g_{z zbar} |z|^2 = |d/dtheta|^2 in the Kahler norm; vanishes at the poles.
  const VectorXd& metric_coefficient() const noexcept { return coefficient_; }
  const VectorXd& curvature() const noexcept { return curvature_; }
  double volume() const noexcept { return volume_; }
  double min_density() const { return density_.minCoeff(); }

 private:
  MetricState() = default;
  Grid grid_;
  VectorXd phi_, density_, log_density_, coefficient_, curvature_;
  double volume_ = 0.0;
};

inline MetricState reference_metric(const Grid& grid) {
  return MetricState::from_potential(grid, VectorXd::Zero(grid->size()));
}

inline ScalarField scalar_curvature(const MetricState& state) {
  return {state.curvature(), detect_parity(*state.grid(), state.density())};
}

/// Second curvature route through the moment coordinate y (dy = rho dx):
/// R = -d^2 Theta/dy^2 with Theta = |d/dtheta|^2. Shares only the density
/// with the conformal route.
inline ScalarField scalar_curvature_moment(const MetricState& state) {
  const GridSpec& g = *state.grid();
  const VectorXd& rho = state.density();
  const VectorXd dtheta_dy = (g.derivative(state.metric_coefficient()).array() / rho.array()).matrix();
  const VectorXd r = (-g.derivative(dtheta_dy).array() / rho.array()).matrix();
  return {r, detect_parity(g, rho)};
}

namespace detail {
inline Parity result_parity(const MetricState& s, Parity in) {
  if (in == Parity::none) return in;
  return detect_parity(*s.grid(), s.density()) == Parity::even ? in : Parity::none;
}
}  // namespace detail

inline ScalarField laplacian(const MetricState& state, const ScalarField& f) {
  check_parity(*state.grid(), f, "laplacian");
  VectorXd out = (state.grid()->apply_legendre(f.values).array() / state.density().array()).matrix();
  return {std::move(out), detail::result_parity(state, f.parity)};
}

inline ScalarField grad_norm_sq(const MetricState& state, const ScalarField& f) {
  check_parity(*state.grid(), f, "grad_norm_sq");
  const VectorXd& x = state.grid()->nodes();
  const VectorXd fx = state.grid()->derivative(f.values);
  VectorXd out =
      ((1.0 - x.array().square()) * fx.array().square() / (2.0 * state.density().array())).matrix();
  return {std::move(out), f.parity == Parity::none ? Parity::none : detail::result_parity(state, Parity::even)};
}

struct HessianNorms {
  ScalarField mixed;  // |grad gradbar f|^2
  ScalarField pure;   // |grad grad f|^2
};

inline HessianNorms hessian_norms(const MetricState& state, const ScalarField& f) {
  check_parity(*state.grid(), f, "hessian_norms");
  const GridSpec& g = *state.grid();
  const VectorXd& x = g.nodes();
  const VectorXd lap = (g.apply_legendre(f.values).array() / state.density().array()).matrix();
  const VectorXd fx_over_rho = (g.derivative(f.values).array() / state.density().array()).matrix();
  const VectorXd pure = (0.5 * (1.0 - x.array().square()) * g.derivative(fx_over_rho).array()).matrix();
  const Parity p = f.parity == Parity::none ? Parity::none : detail::result_parity(state, Parity::even);
  return {{lap.array().square().matrix(), p}, {pure.array().square().matrix(), p}};
}

/// Integral of f against omega_phi.
inline double integrate(const MetricState& state, const VectorXd& f) {
  return kPi * state.grid()->weights().dot((state.density().array() * f.array()).matrix());
}
inline double integrate(const MetricState& state, const ScalarField& f) { return integrate(state, f.values); }

/// Max of |f| over the nodes and over the 4x refined interpolant.
inline double c0_norm(const GridSpec& grid, const VectorXd& f) {
  const double coarse = f.cwiseAbs().maxCoeff();
  const double fine = (grid.refinement() * f).cwiseAbs().maxCoeff();
  return std::max(coarse, fine);
}
inline double c0_norm(const GridSpec& grid, const ScalarField& f) { return c0_norm(grid, f.values); }

inline double l2_norm(const MetricState& state, const VectorXd& f) {
  return std::sqrt(std::max(0.0, integrate(state, f.array().square().matrix())));
}
inline double l2_norm(const MetricState& state, const ScalarField& f) { return l2_norm(state, f.values); }

}  // namespace kflow
