#pragma once

// Reference computations used only by the tests. None of them calls into the
// collocation grid or the spectral Galerkin code.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Fn = std::function<double(double)>;
inline constexpr double pi = std::numbers::pi;

/// Monomial coefficients of P_l from Bonnet's recursion.
inline std::vector<double> legendre_coefficients(int l) {
  std::vector<double> p0{1.0}, p1{0.0, 1.0};
  if (l == 0) return p0;
  for (int n = 1; n < l; ++n) {
    std::vector<double> p2(n + 2, 0.0);
    for (int i = 0; i <= n; ++i) p2[i + 1] += (2.0 * n + 1) / (n + 1) * p1[i];
    for (int i = 0; i < n; ++i) p2[i] -= double(n) / (n + 1) * p0[i];
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

inline double poly_eval(const std::vector<double>& c, double x, int derivative = 0) {
  double s = 0.0;
  for (std::size_t i = derivative; i < c.size(); ++i) {
    double f = c[i];
    for (int d = 0; d < derivative; ++d) f *= double(i - d);
    s += f * std::pow(x, double(i - derivative));
  }
  return s;
}

/// Density of phi = a P_l: rho = 1 - a l(l+1)/2 P_l, with two derivatives.
struct LegendreDensity {
  double a;
  int l;
  std::vector<double> c = legendre_coefficients(l);
  double k() const { return -a * l * (l + 1) / 2.0; }
  double rho(double x) const { return 1.0 + k() * poly_eval(c, x); }
  double d1(double x) const { return k() * poly_eval(c, x, 1); }
  double d2(double x) const { return k() * poly_eval(c, x, 2); }
};

/// R = (1 - (1/2) d/dx[(1-x^2) d/dx log rho]) / rho in closed form.
inline double analytic_curvature(const LegendreDensity& d, double x) {
  const double r = d.rho(x), r1 = d.d1(x), r2 = d.d2(x);
  const double l0 = 0.5 * (-2.0 * x * r1 / r + (1.0 - x * x) * (r2 / r - r1 * r1 / (r * r)));
  return (1.0 - l0) / r;
}

/// Same formula with centred second-order differences of step h.
inline double fd_curvature(const Fn& rho, double x, double h) {
  auto lg = [&](double s) { return std::log(rho(s)); };
  const double fp = (1.0 - (x + 0.5 * h) * (x + 0.5 * h)) * (lg(x + h) - lg(x)) / h;
  const double fm = (1.0 - (x - 0.5 * h) * (x - 0.5 * h)) * (lg(x) - lg(x - h)) / h;
  return (1.0 - 0.5 * (fp - fm) / h) / rho(x);
}

/// Quadratic form Q[H] = int_0^pi q (s H' + c H)^2 dt, mass M[H] = int_0^pi m H^2 dt
/// on the polar angle t, discretized with P1 elements and three-point Gauss
/// quadrature. Returns the lowest `count` generalized eigenvalues.
struct Form {
  Fn q, s, c, m;
  bool dirichlet = true;
};

inline std::vector<double> fem_eigenvalues(const Form& f, int elements, int count) {
  const int n = elements + 1;
  const double h = pi / elements;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n), M = Eigen::MatrixXd::Zero(n, n);
  const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  for (int e = 0; e < elements; ++e) {
    const double t0 = e * h;
    for (int g = 0; g < 3; ++g) {
      const double xi = 0.5 * (gx[g] + 1.0), t = t0 + xi * h, w = 0.5 * gw[g] * h;
      const double phi[2] = {1.0 - xi, xi}, dphi[2] = {-1.0 / h, 1.0 / h};
      const double q = f.q(t), s = f.s(t), c = f.c(t), m = f.m(t);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          const double bi = s * dphi[i] + c * phi[i], bj = s * dphi[j] + c * phi[j];
          K(e + i, e + j) += w * q * bi * bj;
          M(e + i, e + j) += w * m * phi[i] * phi[j];
        }
    }
  }
  const int lo = f.dirichlet ? 1 : 0, sz = f.dirichlet ? n - 2 : n;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(K.block(lo, lo, sz, sz), M.block(lo, lo, sz, sz),
                                                                Eigen::EigenvaluesOnly);
  std::vector<double> out;
  for (int i = 0; i < std::min<int>(count, sz); ++i) out.push_back(ges.eigenvalues()(i));
  return out;
}

/// Richardson extrapolation of a second-order method from h and h/2.
inline std::vector<double> fem_extrapolated(const Form& f, int elements, int count) {
  const auto a = fem_eigenvalues(f, elements, count), b = fem_eigenvalues(f, 2 * elements, count);
  std::vector<double> out;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) out.push_back((4.0 * b[i] - a[i]) / 3.0);
  return out;
}

/// Mode-k weighted Dirichlet form of f = F e^{ik theta}, x = -cos t:
/// Q = int [(1-x^2)F' - kF]^2 e^{-u} / (4 (1-x^2)) dx, M = int F^2 e^{-u} rho / 2 dx.
inline Form poincare_form(const Fn& rho, const Fn& u, int k) {
  Form f;
  f.q = [u](double t) { return std::exp(-u(-std::cos(t))) / (4.0 * std::sin(t)); };
  f.s = [](double t) { return std::sin(t); };
  f.c = [k](double) { return -double(k); };
  f.m = [rho, u](double t) {
    const double x = -std::cos(t);
    return std::exp(-u(x)) * rho(x) * std::sin(t) / 2.0;
  };
  f.dirichlet = k != 0;
  return f;
}

/// Mode-k form of dbar on V = z H e^{ik theta} d/dz:
/// Q = int rho [(1-x^2)H' - kH]^2 / 8 dx, M = int rho^2 (1-x^2) H^2 / 4 dx.
/// Valid for |k| >= 2, where H vanishes at both poles.
inline Form vector_form(const Fn& rho, int k) {
  Form f;
  f.q = [rho](double t) { return rho(-std::cos(t)) * std::sin(t) / 8.0; };
  f.s = [](double t) { return std::sin(t); };
  f.c = [k](double) { return -double(k); };
  f.m = [rho](double t) {
    const double r = rho(-std::cos(t)), s = std::sin(t);
    return r * r * s * s * s / 4.0;
  };
  return f;
}

/// Fut(z d/dz) = (1/V) int (z d/dz) u omega as a two-dimensional midpoint sum
/// over the stereographic plane, r = tan(t/2), z = r e^{i theta}.
inline double futaki_bruteforce(const Fn& rho, const Fn& ux, int nt, int ntheta) {
  double sum = 0.0;
  const double dt = pi / nt, dth = 2.0 * pi / ntheta;
  for (int i = 0; i < nt; ++i) {
    const double t = (i + 0.5) * dt;
    const double r = std::tan(0.5 * t), drdt = 0.5 / std::pow(std::cos(0.5 * t), 2);
    const double x = (r * r - 1.0) / (r * r + 1.0);
    const double dxdr = 4.0 * r / std::pow(1.0 + r * r, 2);
    for (int j = 0; j < ntheta; ++j) {
      const double zdz_u = 0.5 * r * ux(x) * dxdr;
      const double omega = rho(x) * 2.0 * r / std::pow(1.0 + r * r, 2);
      sum += zdz_u * omega * drdt * dt * dth;
    }
  }
  return sum / (2.0 * pi);
}

/// vol(B_r)/r^2 for the round reference metric (area form omega, unit sphere distances).
inline double round_ball_ratio(double r) { return pi * (1.0 - std::cos(r)) / (r * r); }

/// Ball centred at the pole x = -1 of a rotationally symmetric density.
inline double pole_ball_ratio(const Fn& rho, double radius, int steps = 20000) {
  double s = 0.0, area = 0.0;
  const double dt = pi / steps;
  for (int i = 0; i < steps; ++i) {
    const double t = (i + 0.5) * dt, x = -std::cos(t);
    const double ds = std::sqrt(rho(x)) * dt;
    if (s + ds > radius) {
      area += pi * rho(x) * std::sin(t) * dt * (radius - s) / ds;
      break;
    }
    s += ds;
    area += pi * rho(x) * std::sin(t) * dt;
  }
  return area / (radius * radius);
}

/// Samples of R exp(-mu t) with optional multiplicative jitter below `noise`.
inline std::pair<std::vector<double>, std::vector<double>> exponential_series(double R, double mu, double t1,
                                                                              double t2, int n, double noise = 0.0,
                                                                              unsigned seed = 1) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> t, v;
  for (int i = 0; i < n; ++i) {
    const double s = t1 + (t2 - t1) * i / (n - 1);
    t.push_back(s);
    v.push_back(R * std::exp(-mu * s) * (1.0 + noise * d(rng)));
  }
  return {t, v};
}

}  // namespace oracle
