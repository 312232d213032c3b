#pragma once

// Named initial potentials phi0 = a * P(x).

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "kflow/metric.hpp"

namespace kflow {

inline double legendre_p(int l, double x) {
  if (l == 0) return 1.0;
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= l; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

inline const std::vector<std::string>& profile_families() {
  static const std::vector<std::string> names = {"legendre1", "legendre2", "legendre3", "legendre4",
                                                 "legendre5", "legendre6", "gaussian",  "mixed",
                                                 "random"};
  return names;
}

inline bool is_profile_family(const std::string& family) {
  for (const auto& f : profile_families())
    if (f == family) return true;
  return false;
}

/// Profile values at the given points. `random` draws Legendre coefficients
/// for degrees 2..6 from the seed, scaled so max |L0 P| is of order one.
inline VectorXd profile_values(const std::string& family, const VectorXd& x, std::uint64_t seed = 0) {
  VectorXd p(x.size());
  if (family.rfind("legendre", 0) == 0 && family.size() == 9 && family[8] >= '1' && family[8] <= '6') {
    const int l = family[8] - '0';
    for (Eigen::Index i = 0; i < x.size(); ++i) p(i) = legendre_p(l, x(i));
  } else if (family == "gaussian") {
    for (Eigen::Index i = 0; i < x.size(); ++i) p(i) = std::exp(-4.0 * x(i) * x(i));
  } else if (family == "mixed") {
    for (Eigen::Index i = 0; i < x.size(); ++i) p(i) = legendre_p(2, x(i)) + 0.5 * legendre_p(3, x(i));
  } else if (family == "random") {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double coeff[7] = {};
    for (int l = 2; l <= 6; ++l) coeff[l] = normal(rng) / (0.5 * l * (l + 1));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      double v = 0.0;
      for (int l = 2; l <= 6; ++l) v += coeff[l] * legendre_p(l, x(i));
      p(i) = v;
    }
  } else {
    throw ConfigError("flow", "initial.family", "unknown profile family '" + family + "'");
  }
  return p;
}

inline Parity profile_parity(const std::string& family) {
  if (family == "legendre2" || family == "legendre4" || family == "legendre6" || family == "gaussian")
    return Parity::even;
  if (family == "legendre1" || family == "legendre3" || family == "legendre5") return Parity::odd;
  return Parity::none;
}

/// Largest |a| (with the sign of `direction`) keeping 1 + a L0 P >= margin.
inline double max_admissible_amplitude(const GridSpec& grid, const VectorXd& profile, double direction = 1.0,
                                       double margin = 1e-3) {
  const VectorXd lp = grid.apply_legendre(profile) * (direction >= 0.0 ? 1.0 : -1.0);
  const double worst = -lp.minCoeff();
  if (worst <= 0.0) return std::numeric_limits<double>::infinity();
  return (1.0 - margin) / worst;
}

}  // namespace kflow
