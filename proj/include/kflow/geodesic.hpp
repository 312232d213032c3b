#pragma once

// Geodesic-ball volumes for the non-collapsing monitor.
//
// Distances use ds^2 = 2 g |dz|^2, which is the unit round sphere for the
// reference metric; its Gaussian curvature equals the Kahler scalar curvature
// R and its area form is 2 omega. Balls are swept by geodesic shooting in a
// stereographic chart, with the Jacobi equation J'' + R J = 0 giving the
// polar area element, so vol_omega(B_r) = (1/2) int_0^{2pi} int_0^r J ds da.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "kflow/metric.hpp"

namespace kflow {

struct BallVolumeOptions {
  int centers = 9;
  int directions = 32;
  int steps = 96;
  // Balls are kept inside one chart: radius at most this fraction of the
  // pole-to-pole distance.
  double max_fraction_of_diameter = 0.45;
};

struct BallVolumeResult {
  double ratio = 0.0;     // min over centers and radii of vol(B_r)/r^2
  double center_x = 0.0;  // where the minimum occurred
  double radius = 0.0;
  double rho_used = 0.0;
  double diameter = 0.0;  // pole-to-pole meridian distance
  bool clamped = false;
};

/// Pole-to-pole length of a meridian, int_0^pi sqrt(rho(-cos t)) dt.
inline double meridian_length(const MetricState& state, int panels = 512) {
  const GridSpec& g = *state.grid();
  const VectorXd sqrt_rho = state.density().cwiseSqrt();
  double sum = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double t = kPi * i / panels;
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += w * g.interpolate(sqrt_rho, -std::cos(t));
  }
  return sum * (kPi / panels) / 3.0;
}

namespace detail {

// Chart data for a radial conformal metric exp(2 Phi)|dz|^2 with
// exp(2 Phi) = (1-x)^2 rho(x), x = (|z|^2-1)/(|z|^2+1).
class ConformalChart {
 public:
  ConformalChart(const MetricState& state, bool mirrored)
      : grid_(*state.grid()), mirrored_(mirrored) {
    rho_ = state.density();
    drho_ = grid_.derivative(rho_);
    curv_ = state.curvature();
  }

  double x_of(double r2) const { return (r2 - 1.0) / (r2 + 1.0); }

  double rho(double x) const { return grid_.interpolate(rho_, sign() * x); }
  double drho(double x) const { return sign() * grid_.interpolate(drho_, sign() * x); }
  double curvature(double x) const { return grid_.interpolate(curv_, sign() * x); }

  double phi(double x) const { return std::log(1.0 - x) + 0.5 * std::log(rho(x)); }

  // d Phi / dX and d Phi / dY at (X, Y).
  std::array<double, 2> grad_phi(double X, double Y, double x) const {
    const double dphi_dx = -1.0 / (1.0 - x) + drho(x) / (2.0 * rho(x));
    const double f = dphi_dx * (1.0 - x) * (1.0 - x);
    return {f * X, f * Y};
  }

 private:
  double sign() const { return mirrored_ ? -1.0 : 1.0; }
  const GridSpec& grid_;
  bool mirrored_;
  VectorXd rho_, drho_, curv_;
};

using GeoState = std::array<double, 7>;  // X, Y, VX, VY, J, J', area

inline GeoState geo_rhs(const ConformalChart& chart, const GeoState& s) {
  const double X = s[0], Y = s[1], vx = s[2], vy = s[3];
  const double x = chart.x_of(X * X + Y * Y);
  const auto [px, py] = chart.grad_phi(X, Y, x);
  GeoState d{};
  d[0] = vx;
  d[1] = vy;
  d[2] = -px * (vx * vx - vy * vy) - 2.0 * py * vx * vy;
  d[3] = py * (vx * vx - vy * vy) - 2.0 * px * vx * vy;
  d[4] = s[5];
  d[5] = -chart.curvature(x) * s[4];
  d[6] = std::max(s[4], 0.0);
  return d;
}

inline GeoState geo_axpy(const GeoState& a, double h, const GeoState& b) {
  GeoState r;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] + h * b[i];
  return r;
}

}  // namespace detail

inline BallVolumeResult ball_volume_ratio(const MetricState& state, double rho_max,
                                          const BallVolumeOptions& opt = {}) {
  if (!(rho_max > 0.0)) throw ConfigError("geometry", "ball_volume_ratio", "rho_max must be positive");
  BallVolumeResult out;
  out.diameter = meridian_length(state);
  out.rho_used = rho_max;
  const double limit = opt.max_fraction_of_diameter * out.diameter;
  if (rho_max > limit) {
    out.rho_used = limit;
    out.clamped = true;
  }
  const double h = out.rho_used / opt.steps;
  const double dalpha = 2.0 * kPi / opt.directions;

  out.ratio = std::numeric_limits<double>::infinity();
  const detail::ConformalChart south(state, false), north(state, true);
  for (int ci = 0; ci < opt.centers; ++ci) {
    const double xc = opt.centers == 1 ? 0.0 : -1.0 + 2.0 * ci / (opt.centers - 1);
    const bool mirrored = xc > 0.0;
    const detail::ConformalChart& chart = mirrored ? north : south;
    const double xl = mirrored ? -xc : xc;
    const double rc = std::sqrt((1.0 + xl) / (1.0 - xl));
    const double speed = std::exp(-chart.phi(xl));

    std::vector<double> area(opt.steps + 1, 0.0);
    for (int a = 0; a < opt.directions; ++a) {
      const double alpha = (a + 0.5) * dalpha;
      detail::GeoState s{rc, 0.0, speed * std::cos(alpha), speed * std::sin(alpha), 0.0, 1.0, 0.0};
      for (int k = 1; k <= opt.steps; ++k) {
        const auto k1 = detail::geo_rhs(chart, s);
        const auto k2 = detail::geo_rhs(chart, detail::geo_axpy(s, 0.5 * h, k1));
        const auto k3 = detail::geo_rhs(chart, detail::geo_axpy(s, 0.5 * h, k2));
        const auto k4 = detail::geo_rhs(chart, detail::geo_axpy(s, h, k3));
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        area[k] += s[6] * dalpha;
      }
    }
    for (int k = 1; k <= opt.steps; ++k) {
      const double r = k * h;
      const double ratio = 0.5 * area[k] / (r * r);
      if (ratio < out.ratio) {
        out.ratio = ratio;
        out.center_x = xc;
        out.radius = r;
      }
    }
  }
  return out;
}

}  // namespace kflow
