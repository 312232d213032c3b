#pragma once

// Per-angular-mode eigenproblems for the two self-adjoint operators.
//
// Both are solved by Rayleigh-Ritz on their quadratic forms in a Jacobi
// polynomial basis whose weight matches the pole behaviour of mode k, so the
// discrete matrices are symmetric by construction and the holomorphic kernel
// lies exactly in the trial space.
//
// Poincare operator, f = F(x) e^{ik theta}, F = (1-x^2)^{|k|/2} P(x):
//   Q = int (1-x^2)^{|k|-1} [(1-x^2)P' - (|k|x + k)P]^2 e^{-u} / 4 dx
//   M = int (1-x^2)^{|k|} P^2 e^{-u} rho / 2 dx
// dbar^dagger dbar on T^{1,0}, V = z H e^{ik theta} d/dz,
// H = (1+x)^a (1-x)^b P with a = (|k+1|-1)/2, b = (|k-1|-1)/2:
//   Q = int rho (1+x)^{2a}(1-x)^{2b} [(1-x^2)P' + (a(1-x) - b(1+x) - k)P]^2 / 8 dx
//   M = int rho^2 (1+x)^{|k+1|} (1-x)^{|k-1|} P^2 / 4 dx
// (common factors of 2 pi dropped). The kernel of the second problem is
// spanned by d/dz, z d/dz, z^2 d/dz, living in modes k = -1, 0, 1.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kflow/errors.hpp"
#include "kflow/metric.hpp"

namespace kflow {

struct GaussRule {
  VectorXd nodes;
  VectorXd weights;
};

/// Gauss-Legendre rule by Newton iteration on P_n.
inline GaussRule gauss_legendre(int n) {
  GaussRule rule{VectorXd(n), VectorXd(n)};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes(i) = -x;
    rule.nodes(n - 1 - i) = x;
    rule.weights(i) = w;
    rule.weights(n - 1 - i) = w;
  }
  return rule;
}

/// Orthonormal Jacobi polynomials P_n^{(alpha,beta)}, n < count, and their
/// derivatives at the given points. Rows index the degree.
struct JacobiBasis {
  MatrixXd values;
  MatrixXd derivatives;
};

namespace detail {

inline MatrixXd jacobi_raw(int count, double alpha, double beta, const VectorXd& x) {
  MatrixXd p = MatrixXd::Zero(count, x.size());
  if (count == 0) return p;
  p.row(0).setOnes();
  if (count == 1) return p;
  p.row(1) = (0.5 * ((alpha - beta) + (alpha + beta + 2.0) * x.array())).matrix().transpose();
  for (int n = 2; n < count; ++n) {
    const double s = 2.0 * n + alpha + beta;
    const double a1 = 2.0 * n * (n + alpha + beta) * (s - 2.0);
    const double a2 = (s - 1.0) * (alpha * alpha - beta * beta);
    const double a3 = (s - 1.0) * s * (s - 2.0);
    const double a4 = 2.0 * (n + alpha - 1.0) * (n + beta - 1.0) * s;
    p.row(n) = (((a2 + a3 * x.array().transpose()) * p.row(n - 1).array() - a4 * p.row(n - 2).array()) / a1)
                   .matrix();
  }
  return p;
}

inline double jacobi_log_norm(int n, double alpha, double beta) {
  return (alpha + beta + 1.0) * std::log(2.0) - std::log(2.0 * n + alpha + beta + 1.0) +
         std::lgamma(n + alpha + 1.0) + std::lgamma(n + beta + 1.0) - std::lgamma(n + alpha + beta + 1.0) -
         std::lgamma(n + 1.0);
}

}  // namespace detail

inline JacobiBasis jacobi_basis(int count, double alpha, double beta, const VectorXd& x) {
  JacobiBasis b;
  b.values = detail::jacobi_raw(count, alpha, beta, x);
  const MatrixXd shifted = detail::jacobi_raw(std::max(count - 1, 0), alpha + 1.0, beta + 1.0, x);
  b.derivatives = MatrixXd::Zero(count, x.size());
  for (int n = 1; n < count; ++n) b.derivatives.row(n) = 0.5 * (n + alpha + beta + 1.0) * shifted.row(n - 1);
  for (int n = 0; n < count; ++n) {
    double log_h = detail::jacobi_log_norm(n, alpha, beta);
    if (n == 0 && alpha + beta + 1.0 == 1.0) log_h = std::log(2.0);  // lgamma(1)/lgamma(1) edge
    const double scale = std::exp(-0.5 * log_h);
    b.values.row(n) *= scale;
    b.derivatives.row(n) *= scale;
  }
  return b;
}

enum class SpectralOperator { poincare, vector_laplacian };

inline const char* to_string(SpectralOperator op) {
  return op == SpectralOperator::poincare ? "poincare_weighted_laplacian" : "dbar_dagger_dbar_vector_fields";
}

struct SpectralOptions {
  int basis_size = 40;
  int kmax = 8;
  int eigen_count = 6;        // eigenvalues kept per mode
  double mu_tolerance = 1e-3;  // Poincare lower-bound slack
};

struct ModeSpectrum {
  int k = 0;
  std::vector<double> eigenvalues;
};

struct SpectrumResult {
  SpectralOperator op = SpectralOperator::poincare;
  int kmax = 0;
  std::vector<ModeSpectrum> modes;
  int kernel_dimension = 0;
  double kernel_threshold = 0.0;
  double lambda_min_positive = std::numeric_limits<double>::infinity();
  double max_asymmetry = 0.0;  // relative, before symmetrization
  bool mode_truncation_ok = true;
  bool lower_bound_holds = true;  // Poincare only: lambda_min_positive >= 1 - tol
};

struct ModeMatrices {
  MatrixXd stiffness;
  MatrixXd mass;
  double asymmetry = 0.0;
};

namespace detail {

struct QuadratureData {
  GaussRule rule;
  VectorXd rho;
  VectorXd u;
};

inline QuadratureData quadrature_data(const MetricState& state, const VectorXd* u, int basis_size) {
  QuadratureData q;
  q.rule = gauss_legendre(2 * basis_size + 48);
  const MatrixXd interp = state.grid()->interpolation_matrix(q.rule.nodes);
  q.rho = interp * state.density();
  q.u = u ? VectorXd(interp * *u) : VectorXd::Zero(q.rule.nodes.size());
  return q;
}

inline double relative_asymmetry(const MatrixXd& a) {
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

inline ModeMatrices assemble(const MatrixXd& trial, const MatrixXd& bracket, const VectorXd& qw,
                             const VectorXd& mw) {
  ModeMatrices m;
  m.stiffness = bracket * qw.asDiagonal() * bracket.transpose();
  m.mass = trial * mw.asDiagonal() * trial.transpose();
  m.asymmetry = std::max(relative_asymmetry(m.stiffness), relative_asymmetry(m.mass));
  m.stiffness = 0.5 * (m.stiffness + m.stiffness.transpose());
  m.mass = 0.5 * (m.mass + m.mass.transpose());
  return m;
}

inline ModeMatrices poincare_mode(const QuadratureData& q, int k, int nb) {
  const int ak = std::abs(k);
  const VectorXd& x = q.rule.nodes;
  const JacobiBasis b = jacobi_basis(nb, ak, ak, x);
  const Eigen::ArrayXd s = 1.0 - x.array().square();
  const Eigen::ArrayXd eu = (-q.u.array()).exp();
  VectorXd qw, mw;
  MatrixXd bracket;
  if (ak == 0) {
    qw = (q.rule.weights.array() * s * eu / 4.0).matrix();
    bracket = b.derivatives;
  } else {
    qw = (q.rule.weights.array() * s.pow(ak - 1) * eu / 4.0).matrix();
    const Eigen::ArrayXd coef = ak * x.array() + k;
    bracket = (b.derivatives.array().rowwise() * s.transpose() - b.values.array().rowwise() * coef.transpose())
                  .matrix();
  }
  mw = (q.rule.weights.array() * s.pow(ak) * eu * q.rho.array() / 2.0).matrix();
  return assemble(b.values, bracket, qw, mw);
}

inline ModeMatrices vector_mode(const QuadratureData& q, int k, int nb) {
  const int kp = std::abs(k + 1), km = std::abs(k - 1);
  const double a = 0.5 * (kp - 1), bexp = 0.5 * (km - 1);
  const VectorXd& x = q.rule.nodes;
  const JacobiBasis b = jacobi_basis(nb, km, kp, x);
  const Eigen::ArrayXd xp = 1.0 + x.array(), xm = 1.0 - x.array();
  const VectorXd qw = (q.rule.weights.array() * q.rho.array() * xp.pow(2.0 * a) * xm.pow(2.0 * bexp) / 8.0).matrix();
  const VectorXd mw =
      (q.rule.weights.array() * q.rho.array().square() * xp.pow(double(kp)) * xm.pow(double(km)) / 4.0).matrix();
  const Eigen::ArrayXd coef = a * xm - bexp * xp - k;
  const Eigen::ArrayXd s = xp * xm;
  const MatrixXd bracket =
      (b.derivatives.array().rowwise() * s.transpose() + b.values.array().rowwise() * coef.transpose()).matrix();
  return assemble(b.values, bracket, qw, mw);
}

inline std::vector<double> solve_mode(const ModeMatrices& m, int keep) {
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(m.stiffness, m.mass, Eigen::EigenvaluesOnly);
  if (ges.info() != Eigen::Success)
    throw NumericalError("spectral", "eigensolver", "generalized eigenproblem failed (mass not positive?)");
  const VectorXd& ev = ges.eigenvalues();
  std::vector<double> out;
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(keep, ev.size()); ++i) out.push_back(ev(i));
  return out;
}

inline void finalize(SpectrumResult& r) {
  double estimate = std::numeric_limits<double>::infinity();
  for (const auto& m : r.modes)
    for (double e : m.eigenvalues)
      if (e > 1e-3) estimate = std::min(estimate, e);
  if (!std::isfinite(estimate)) estimate = 0.0;
  r.kernel_threshold = 1e-7 * (1.0 + estimate);
  r.kernel_dimension = 0;
  r.lambda_min_positive = std::numeric_limits<double>::infinity();
  for (const auto& m : r.modes)
    for (double e : m.eigenvalues) {
      if (std::abs(e) < r.kernel_threshold)
        ++r.kernel_dimension;
      else if (e > 0.0)
        r.lambda_min_positive = std::min(r.lambda_min_positive, e);
    }
  // Per-mode minima must not decrease in |k| beyond |k| = 2 on either side.
  auto mode_min = [&](int k) {
    for (const auto& m : r.modes)
      if (m.k == k) {
        for (double e : m.eigenvalues)
          if (std::abs(e) >= r.kernel_threshold) return e;
      }
    return std::numeric_limits<double>::infinity();
  };
  r.mode_truncation_ok = true;
  for (int sign : {-1, 1})
    for (int ak = 2; ak < r.kmax; ++ak)
      if (mode_min(sign * (ak + 1)) < mode_min(sign * ak) * (1.0 - 1e-9)) r.mode_truncation_ok = false;
}

}  // namespace detail

/// Stiffness and mass matrices of one angular mode (exposed for checks).
inline ModeMatrices poincare_mode_matrices(const MetricState& state, const ScalarField& u, int k,
                                           int basis_size = 40) {
  const auto q = detail::quadrature_data(state, &u.values, basis_size);
  return detail::poincare_mode(q, k, basis_size);
}

inline ModeMatrices vector_mode_matrices(const MetricState& state, int k, int basis_size = 40) {
  const auto q = detail::quadrature_data(state, nullptr, basis_size);
  return detail::vector_mode(q, k, basis_size);
}

inline constexpr double kHermiticityTolerance = 1e-10;

/// Spectrum of -Delta f + <dbar f, dbar u> in L^2(e^{-u} omega). The lowest
/// positive eigenvalue is the Poincare constant mu.
inline SpectrumResult poincare_mu(const MetricState& state, const ScalarField& u, const SpectralOptions& opt = {}) {
  if (opt.kmax < 1) throw ConfigError("spectral", "poincare_mu", "kmax must be at least 1");
  const auto q = detail::quadrature_data(state, &u.values, opt.basis_size);
  SpectrumResult r;
  r.op = SpectralOperator::poincare;
  r.kmax = opt.kmax;
  for (int k = -opt.kmax; k <= opt.kmax; ++k) {
    const ModeMatrices m = detail::poincare_mode(q, k, opt.basis_size);
    r.max_asymmetry = std::max(r.max_asymmetry, m.asymmetry);
    if (m.asymmetry > kHermiticityTolerance)
      throw NumericalError("spectral", "poincare_mu", "non-symmetric discretization in mode " + std::to_string(k));
    r.modes.push_back({k, detail::solve_mode(m, opt.eigen_count)});
  }
  detail::finalize(r);
  r.lower_bound_holds = r.lambda_min_positive >= 1.0 - opt.mu_tolerance;
  return r;
}

/// Spectrum of dbar^dagger dbar on T^{1,0} vector fields, |k| <= kmax.
inline SpectrumResult vector_laplacian_spectrum(const MetricState& state, int kmax, const SpectralOptions& opt = {}) {
  if (kmax < 3)
    throw ConfigError("spectral", "vector_laplacian_spectrum",
                      "kmax " + std::to_string(kmax) + " cannot separate the kernel modes (need >= 3)");
  const auto q = detail::quadrature_data(state, nullptr, opt.basis_size);
  SpectrumResult r;
  r.op = SpectralOperator::vector_laplacian;
  r.kmax = kmax;
  for (int k = -kmax; k <= kmax; ++k) {
    const ModeMatrices m = detail::vector_mode(q, k, opt.basis_size);
    r.max_asymmetry = std::max(r.max_asymmetry, m.asymmetry);
    if (m.asymmetry > kHermiticityTolerance)
      throw NumericalError("spectral", "vector_laplacian_spectrum",
                           "non-symmetric discretization in mode " + std::to_string(k));
    r.modes.push_back({k, detail::solve_mode(m, opt.eigen_count)});
  }
  detail::finalize(r);
  return r;
}

}  // namespace kflow
