#pragma once

// Chebyshev-Gauss-Lobatto collocation on the symmetric coordinate x in [-1, 1].
// x is the moment coordinate of the reference metric; the poles sit at x = -1
// and x = +1. Rotationally symmetric smooth functions on CP^1 are exactly the
// smooth functions of x, so no endpoint conditions are imposed here.
//
// The collocated Legendre operator D diag(1-x^2) D annihilates the highest
// Chebyshev mode T_{N-1} (its derivative vanishes at every interior node), so
// that mode is carried separately: `remove_top_mode` projects it out and the
// Poisson solve constrains it to zero.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>

#include "kflow/errors.hpp"

namespace kflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kMinNodes = 16;
inline constexpr int kRefinementFactor = 4;

namespace detail {

inline VectorXd cgl_nodes(int n) {
  VectorXd x(n);
  const int m = n - 1;
  for (int j = 0; j < n; ++j) x(j) = -std::cos(std::numbers::pi * j / m);
  // exact symmetry; the cosine does not deliver it bit for bit
  for (int j = 0; j < n / 2; ++j) {
    const double s = 0.5 * (x(n - 1 - j) - x(j));
    x(j) = -s;
    x(n - 1 - j) = s;
  }
  if (n % 2 == 1) x(n / 2) = 0.0;
  return x;
}

// Clenshaw-Curtis weights on the CGL nodes (exact for degree n-1).
inline VectorXd clenshaw_curtis_weights(int n) {
  const int m = n - 1;
  VectorXd w = VectorXd::Zero(n);
  VectorXd v = VectorXd::Ones(std::max(m - 1, 0));
  auto theta = [m](int j) { return std::numbers::pi * j / m; };
  if (m % 2 == 0) {
    w(0) = w(m) = 1.0 / (m * m - 1.0);
    for (int k = 1; k < m / 2; ++k)
      for (int j = 1; j < m; ++j) v(j - 1) -= 2.0 * std::cos(2.0 * k * theta(j)) / (4.0 * k * k - 1.0);
    for (int j = 1; j < m; ++j) v(j - 1) -= std::cos(m * theta(j)) / (m * m - 1.0);
  } else {
    w(0) = w(m) = 1.0 / (double(m) * m);
    for (int k = 1; k <= (m - 1) / 2; ++k)
      for (int j = 1; j < m; ++j) v(j - 1) -= 2.0 * std::cos(2.0 * k * theta(j)) / (4.0 * k * k - 1.0);
  }
  for (int j = 1; j < m; ++j) w(j) = 2.0 * v(j - 1) / m;
  return w;
}

inline VectorXd barycentric_weights(int n) {
  VectorXd c(n);
  for (int j = 0; j < n; ++j) c(j) = (j % 2 == 0) ? 1.0 : -1.0;
  c(0) *= 0.5;
  c(n - 1) *= 0.5;
  return c;
}

// Trefethen's differentiation matrix with the negative-sum diagonal.
inline MatrixXd cgl_differentiation(const VectorXd& x) {
  const int n = static_cast<int>(x.size());
  VectorXd c(n);
  for (int j = 0; j < n; ++j) c(j) = ((j == 0 || j == n - 1) ? 2.0 : 1.0) * ((j % 2 == 0) ? 1.0 : -1.0);
  MatrixXd d = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      d(i, j) = (c(i) / c(j)) / (x(i) - x(j));
      row += d(i, j);
    }
    d(i, i) = -row;
  }
  return d;
}

}  // namespace detail

/// Immutable collocation grid. Shared between states via `Grid`.
class GridSpec {
 public:
  explicit GridSpec(int node_count) {
    if (node_count < kMinNodes)
      throw ConfigError("geometry", "build_grid",
                        "node_count " + std::to_string(node_count) + " below minimum " +
                            std::to_string(kMinNodes));
    n_ = node_count;
    x_ = detail::cgl_nodes(n_);
    w_ = detail::clenshaw_curtis_weights(n_);
    bary_ = detail::barycentric_weights(n_);
    d1_ = detail::cgl_differentiation(x_);
    d2_ = d1_ * d1_;
    const VectorXd one_minus_x2 = (1.0 - x_.array().square()).matrix();
    legendre_ = 0.5 * d1_ * one_minus_x2.asDiagonal() * d1_;

    Eigen::EigenSolver<MatrixXd> es(legendre_, false);
    legendre_radius_ = es.eigenvalues().cwiseAbs().maxCoeff();

    top_mode_ = VectorXd(n_);
    for (int j = 0; j < n_; ++j) top_mode_(j) = (j % 2 == 0) ? 1.0 : -1.0;

    // Bordered system for the Poisson problem with zero dx-mean and no top
    // mode. The two multipliers absorb the compatibility defect of the
    // right-hand side.
    MatrixXd bordered = MatrixXd::Zero(n_ + 2, n_ + 2);
    bordered.topLeftCorner(n_, n_) = legendre_;
    bordered.block(0, n_, n_, 1).setOnes();
    bordered.block(0, n_ + 1, n_, 1) = top_mode_;
    bordered.block(n_, 0, 1, n_) = w_.transpose();
    bordered.block(n_ + 1, 0, 1, n_) = bary_.transpose();
    poisson_lu_ = bordered.partialPivLu();

    fine_x_ = detail::cgl_nodes(kRefinementFactor * (n_ - 1) + 1);
    refine_ = interpolation_matrix(fine_x_);
  }

  int size() const noexcept { return n_; }
  const VectorXd& nodes() const noexcept { return x_; }
  /// Quadrature weights for integrals in dx over [-1, 1].
  const VectorXd& weights() const noexcept { return w_; }
  const MatrixXd& d1() const noexcept { return d1_; }
  const MatrixXd& d2() const noexcept { return d2_; }
  /// f -> (1/2) d/dx((1 - x^2) df/dx), the reference Laplacian.
  const MatrixXd& legendre_operator() const noexcept { return legendre_; }
  double legendre_spectral_radius() const noexcept { return legendre_radius_; }
  const VectorXd& fine_nodes() const noexcept { return fine_x_; }
  const MatrixXd& refinement() const noexcept { return refine_; }
  int mirror(int i) const noexcept { return n_ - 1 - i; }

  /// Nodal values of the top Chebyshev mode, (-1)^j.
  const VectorXd& top_mode() const noexcept { return top_mode_; }
  /// Coefficient of T_{N-1} in the Chebyshev interpolant of f (up to sign).
  double top_mode_coefficient(const VectorXd& f) const { return bary_.dot(f) / (n_ - 1); }
  VectorXd remove_top_mode(const VectorXd& f) const { return f - top_mode_coefficient(f) * top_mode_; }

  VectorXd derivative(const VectorXd& f) const { return d1_ * f; }
  VectorXd apply_legendre(const VectorXd& f) const { return legendre_ * f; }
  double integrate_dx(const VectorXd& f) const { return w_.dot(f); }

  /// Solves (1/2)((1-x^2)u')' = rhs - mean(rhs), returning the solution with
  /// zero dx-mean and no top mode.
  VectorXd solve_legendre(const VectorXd& rhs) const {
    VectorXd b = VectorXd::Zero(n_ + 2);
    b.head(n_) = rhs;
    const VectorXd sol = poisson_lu_.solve(b);
    return sol.head(n_);
  }

  double interpolate(const VectorXd& f, double t) const {
    double num = 0.0, den = 0.0;
    for (int j = 0; j < n_; ++j) {
      const double diff = t - x_(j);
      if (diff == 0.0) return f(j);
      const double c = bary_(j) / diff;
      num += c * f(j);
      den += c;
    }
    return num / den;
  }

  MatrixXd interpolation_matrix(const VectorXd& targets) const {
    MatrixXd p = MatrixXd::Zero(targets.size(), n_);
    for (Eigen::Index i = 0; i < targets.size(); ++i) {
      const double t = targets(i);
      int exact = -1;
      double den = 0.0;
      for (int j = 0; j < n_; ++j) {
        const double diff = t - x_(j);
        if (diff == 0.0) {
          exact = j;
          break;
        }
        p(i, j) = bary_(j) / diff;
        den += p(i, j);
      }
      if (exact >= 0) {
        p.row(i).setZero();
        p(i, exact) = 1.0;
      } else {
        p.row(i) /= den;
      }
    }
    return p;
  }

 private:
  int n_ = 0;
  VectorXd x_, w_, bary_, fine_x_, top_mode_;
  MatrixXd d1_, d2_, legendre_, refine_;
  double legendre_radius_ = 0.0;
  Eigen::PartialPivLU<MatrixXd> poisson_lu_;
};

using Grid = std::shared_ptr<const GridSpec>;

inline Grid build_grid(int node_count) { return std::make_shared<const GridSpec>(node_count); }

}  // namespace kflow
