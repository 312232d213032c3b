#include <gtest/gtest.h>

#include <cmath>

#include "kflow/profiles.hpp"
#include "kflow/ricci.hpp"
#include "kflow/spectral.hpp"
#include "oracles.hpp"

using namespace kflow;

namespace {

const std::vector<double>& mode(const SpectrumResult& r, int k) {
  for (const auto& m : r.modes)
    if (m.k == k) return m.eigenvalues;
  throw std::runtime_error("missing mode");
}

double first_positive(const std::vector<double>& ev, double threshold = 1e-6) {
  for (double e : ev)
    if (e > threshold) return e;
  return NAN;
}

struct Perturbed {
  double a = 0.06;
  Grid g = build_grid(64);
  oracle::LegendreDensity d{a, 2};
  MetricState state = MetricState::from_potential(g, a * profile_values("legendre2", g->nodes()));
  oracle::Fn rho = [d = d](double x) { return d.rho(x); };
};

}  // namespace

TEST(Quadrature, GaussLegendreIsExactToDegree2nMinus1) {
  const GaussRule r = gauss_legendre(12);
  for (int p = 0; p <= 23; ++p) {
    const double q = r.weights.dot(r.nodes.array().pow(p).matrix());
    EXPECT_NEAR(q, (p % 2) ? 0.0 : 2.0 / (p + 1), 1e-14) << p;
  }
}

TEST(Quadrature, JacobiBasisIsOrthonormal) {
  for (auto [al, be] : {std::pair{0.0, 0.0}, {2.0, 2.0}, {1.0, 3.0}}) {
    const GaussRule r = gauss_legendre(60);
    const JacobiBasis b = jacobi_basis(10, al, be, r.nodes);
    const VectorXd w = (r.weights.array() * (1.0 - r.nodes.array()).pow(al) * (1.0 + r.nodes.array()).pow(be)).matrix();
    const MatrixXd gram = b.values * w.asDiagonal() * b.values.transpose();
    EXPECT_LT((gram - MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Poincare, ReferenceSpectrumIsHalfLTimesLPlusOne) {
  const Grid g = build_grid(32);
  const MetricState s = reference_metric(g);
  const SpectrumResult r = poincare_mu(s, {VectorXd::Zero(g->size()), Parity::even});
  EXPECT_EQ(r.kernel_dimension, 1);
  EXPECT_NEAR(r.lambda_min_positive, 1.0, 1e-12);
  for (int k = -3; k <= 3; ++k) {
    const auto& ev = mode(r, k);
    int l = std::max(std::abs(k), k == 0 ? 1 : 0);
    for (double e : ev) {
      if (std::abs(e) < 1e-9) continue;
      EXPECT_NEAR(e, 0.5 * l * (l + 1), 1e-9) << "k = " << k << " l = " << l;
      ++l;
    }
  }
  EXPECT_TRUE(r.lower_bound_holds);
}

TEST(Poincare, MatchesFiniteElementOracle) {
  Perturbed p;
  const VectorXd uvals = (0.3 * p.g->nodes().array().square() + 0.1 * p.g->nodes().array()).matrix();
  const oracle::Fn u = [](double x) { return 0.3 * x * x + 0.1 * x; };
  const SpectrumResult r = poincare_mu(p.state, {uvals, Parity::none});
  for (int k : {-2, -1, 0, 1, 3}) {
    const auto fem = oracle::fem_extrapolated(oracle::poincare_form(p.rho, u, k), 300, 3);
    const auto& ev = mode(r, k);
    const std::size_t skip = k == 0 ? 1 : 0;
    for (std::size_t i = 0; i + skip < 3; ++i)
      EXPECT_NEAR(ev[i + skip], fem[i + skip], 1e-6 * (1.0 + fem[i + skip])) << "k = " << k << " i = " << i;
  }
}

TEST(Poincare, ConstantsSpanTheKernelForRicciPotential) {
  Perturbed p;
  const SpectrumResult r = poincare_mu(p.state, ricci_potential(p.state));
  EXPECT_EQ(r.kernel_dimension, 1);
  EXPECT_GE(r.lambda_min_positive, 1.0 - 1e-3);
  EXPECT_LT(r.max_asymmetry, kHermiticityTolerance);
}

TEST(VectorLaplacian, ReferenceHasKernelThreeAndGapTwo) {
  const MetricState s = reference_metric(build_grid(32));
  const SpectrumResult r = vector_laplacian_spectrum(s, 8);
  EXPECT_EQ(r.kernel_dimension, 3);
  EXPECT_NEAR(r.lambda_min_positive, 2.0, 1e-10);
  EXPECT_TRUE(r.mode_truncation_ok);
  for (int k : {-1, 0, 1}) EXPECT_NEAR(mode(r, k).front(), 0.0, 1e-10);
}

TEST(VectorLaplacian, MatchesFiniteElementOracle) {
  Perturbed p;
  const SpectrumResult r = vector_laplacian_spectrum(p.state, 6);
  for (int k : {-4, -2, 2, 3, 5}) {
    const auto fem = oracle::fem_extrapolated(oracle::vector_form(p.rho, k), 300, 3);
    const auto& ev = mode(r, k);
    for (std::size_t i = 0; i < 3; ++i)
      EXPECT_NEAR(ev[i], fem[i], 1e-6 * (1.0 + fem[i])) << "k = " << k << " i = " << i;
  }
}

TEST(VectorLaplacian, HolomorphicKernelIsMetricIndependent) {
  const Grid g = build_grid(64);
  for (const auto& fam : {"legendre2", "legendre3", "gaussian", "random"}) {
    const VectorXd prof = profile_values(fam, g->nodes(), 11);
    const double a = 0.5 * max_admissible_amplitude(*g, prof);
    const SpectrumResult r = vector_laplacian_spectrum(MetricState::from_potential(g, a * prof), 8);
    EXPECT_EQ(r.kernel_dimension, 3) << fam;
    EXPECT_GT(r.lambda_min_positive, r.kernel_threshold) << fam;
  }
}

TEST(VectorLaplacian, GapMovesContinuouslyWithAmplitude) {
  const Grid g = build_grid(64);
  const VectorXd prof = profile_values("legendre2", g->nodes());
  double prev = 2.0;
  for (double a : {0.01, 0.02, 0.04}) {
    const double lam = vector_laplacian_spectrum(MetricState::from_potential(g, a * prof), 8).lambda_min_positive;
    EXPECT_LT(lam, prev + 1e-12);
    EXPECT_GT(lam, 1.0);
    prev = lam;
  }
}

TEST(VectorLaplacian, RequiresEnoughModes) {
  const MetricState s = reference_metric(build_grid(32));
  EXPECT_THROW(vector_laplacian_spectrum(s, 2), ConfigError);
  SpectralOptions o;
  o.kmax = 0;
  EXPECT_THROW(poincare_mu(s, {VectorXd::Zero(32), Parity::none}, o), ConfigError);
}

TEST(VectorLaplacian, ModeMatricesAreSymmetricBeforeSymmetrization) {
  Perturbed p;
  for (int k = -4; k <= 4; ++k) {
    EXPECT_LT(vector_mode_matrices(p.state, k).asymmetry, kHermiticityTolerance) << k;
    EXPECT_LT(poincare_mode_matrices(p.state, ricci_potential(p.state), k).asymmetry, kHermiticityTolerance) << k;
  }
}
