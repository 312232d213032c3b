#include <gtest/gtest.h>

#include <cmath>

#include "kflow/flow.hpp"
#include "kflow/functionals.hpp"
#include "oracles.hpp"

using namespace kflow;

namespace {

MetricState random_state(const Grid& g, std::uint64_t seed, double size) {
  const VectorXd p = profile_values("random", g->nodes(), seed);
  return MetricState::from_potential(g, size / p.cwiseAbs().maxCoeff() * p);
}

FlowTrace synthetic_trace(double rate, double end, double cadence) {
  FlowTrace tr;
  for (int i = 0; i * cadence <= end + 1e-12; ++i) {
    MonitorRecord r;
    r.t = i * cadence;
    r.Y = std::exp(-2.0 * rate * r.t);
    r.Rn_c0 = std::exp(-rate * r.t);
    r.grad_u_c0 = 2.0 * std::exp(-rate * r.t);
    r.grad_u_l2 = 3.0 * std::exp(-rate * r.t);
    r.y_identity_rhs = -2.0 * rate * r.Y;
    tr.records.push_back(r);
  }
  tr.completed = true;
  return tr;
}

}  // namespace

TEST(YFunctional, EqualsIntegratedPotentialTimesMinusLaplacian) {
  const Grid g = build_grid(64);
  for (const auto& fam : {"legendre2", "legendre3", "gaussian", "mixed"}) {
    const VectorXd p = profile_values(fam, g->nodes(), 5);
    const MetricState s = MetricState::from_potential(g, 0.2 * max_admissible_amplitude(*g, p) * p);
    const ScalarField u = ricci_potential(s);
    const double y = y_functional(s, u);
    const double ibp = -integrate(s, (u.values.array() * laplacian(s, {u.values, Parity::none}).values.array()).matrix());
    EXPECT_GE(y, 0.0);
    EXPECT_NEAR(y, ibp, 1e-10 * (1.0 + y)) << fam;
  }
  const MetricState ref = reference_metric(g);
  EXPECT_NEAR(y_functional(ref, ricci_potential(ref)), 0.0, 1e-25);
}

TEST(YFunctional, IdentityRightHandSideMatchesTimeDerivative) {
  const Grid g = build_grid(64);
  const double h = 1e-4;
  const FlowState s0 = initial_flow_state(g, 0.04 * profile_values("legendre2", g->nodes()));
  const FlowState s1 = flow_step(s0, h).next;
  const FlowState s2 = flow_step(s1, h).next;
  const double ydot = (y_functional(s2.state, s2.u) - y_functional(s0.state, s0.u)) / (2.0 * h);
  EXPECT_NEAR(ydot, y_identity_rhs(s1.state, s1.u), 1e-7);
  EXPECT_LT(ydot, 0.0);
}

TEST(Futaki, BasisValueMatchesBruteForceIntegral) {
  const Grid g = build_grid(64);
  const double a = 0.05;
  const MetricState s = MetricState::from_potential(g, a * profile_values("legendre2", g->nodes()));
  const oracle::LegendreDensity d{a, 2};
  const VectorXd u = (g->nodes().array() + 0.3 * g->nodes().array().square()).matrix();
  const FutakiResult r = futaki_projection(s, {u, Parity::none});
  const double brute = oracle::futaki_bruteforce([&](double x) { return d.rho(x); },
                                                 [](double x) { return 1.0 + 0.6 * x; }, 4000, 16);
  EXPECT_GT(std::abs(brute), 1e-3);
  EXPECT_NEAR(r.basis_value, brute, 1e-6 * std::abs(brute));
}

TEST(Futaki, VanishesForTheRicciPotential) {
  const Grid g = build_grid(64);
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const MetricState s = random_state(g, seed, 0.03);
    const FutakiResult r = futaki_projection(s, ricci_potential(s));
    EXPECT_LT(std::abs(r.basis_value), 1e-10) << seed;
    EXPECT_LT(std::abs(r.value), 1e-10) << seed;
    for (double gk : r.gram) EXPECT_GT(gk, 0.0);
  }
}

TEST(RicciBounds, FirstInequalityHoldsOnRandomStates) {
  const Grid g = build_grid(64);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const MetricState s = random_state(g, seed, 0.04);
    const Lemma3Result r = lemma3_check(s, ricci_potential(s));
    EXPECT_TRUE(r.inequality_i) << seed;
    EXPECT_LE(-r.b, r.u_minus_b_c0);
    EXPECT_TRUE(r.constant_defined);
    EXPECT_GT(r.constant, 0.0);
  }
  const MetricState ref = reference_metric(g);
  const Lemma3Result r = lemma3_check(ref, ricci_potential(ref));
  EXPECT_TRUE(r.inequality_i);
  EXPECT_FALSE(r.constant_defined);
}

TEST(DecayFit, RecoversExactExponential) {
  const auto [t, v] = oracle::exponential_series(3.0, 1.7, 0.0, 10.0, 101);
  const DecayCertificate c = decay_fit(t, v, 2.0, 10.0);
  EXPECT_TRUE(c.pass);
  EXPECT_NEAR(c.mu, 1.7, 1e-10);
  EXPECT_NEAR(c.R, 3.0, 1e-9);
  EXPECT_EQ(c.samples, 81u);
}

TEST(DecayFit, EnvelopeCoversNoisyData) {
  const auto [t, v] = oracle::exponential_series(1.0, 0.8, 0.0, 20.0, 201, 0.2, 3);
  const DecayCertificate c = decay_fit(t, v, 0.0, 20.0);
  EXPECT_TRUE(c.pass);
  EXPECT_NEAR(c.mu, 0.8, 0.02);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_LE(v[i], c.R * std::exp(-c.mu * t[i]) * (1.0 + 1e-12));
}

TEST(DecayFit, GrowthFailsAndZeroIsDegenerate) {
  const auto [t, v] = oracle::exponential_series(1.0, -0.5, 0.0, 5.0, 51);
  EXPECT_FALSE(decay_fit(t, v, 0.0, 5.0).pass);
  const std::vector<double> zeros(t.size(), 0.0);
  const DecayCertificate z = decay_fit(t, zeros, 0.0, 5.0);
  EXPECT_TRUE(z.degenerate);
  EXPECT_TRUE(z.pass);
  const DecayCertificate few = decay_fit(t, v, 0.0, 0.5);
  EXPECT_FALSE(few.pass);
}

TEST(DecayFit, FloorExcludesRoundoffTail) {
  auto [t, v] = oracle::exponential_series(1.0, 2.0, 0.0, 30.0, 301);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i], 1e-22 * (1.0 + 0.5 * std::sin(37.0 * i)));
  EXPECT_LT(decay_fit(t, v, 0.0, 30.0).mu, 1.9);
  const DecayCertificate c = decay_fit(t, v, 0.0, 30.0, 1e-20);
  EXPECT_TRUE(c.pass);
  EXPECT_NEAR(c.mu, 2.0, 1e-8);
}

TEST(TraceAnalysis, YIdentityResidualNeedsNeighbours) {
  const FlowTrace tr = synthetic_trace(1.0, 2.0, 0.1);
  EXPECT_THROW(y_identity_residual(tr, 0), ConfigError);
  EXPECT_THROW(y_identity_residual(tr, tr.records.size() - 1), ConfigError);
  EXPECT_THROW(y_identity_residual(tr, 5, 0), ConfigError);
  EXPECT_NO_THROW(y_identity_residual(tr, 5, 2));
}

TEST(TraceAnalysis, YIdentityResidualIsSecondOrderInCadence) {
  const FlowTrace tr = synthetic_trace(1.0, 2.0, 0.01);
  const std::size_t i = sample_index(tr, 1.0);
  const double r1 = y_identity_residual(tr, i, 1), r2 = y_identity_residual(tr, i, 2), r4 = y_identity_residual(tr, i, 4);
  EXPECT_NEAR(std::log2(r2 / r1), 2.0, 0.01);
  EXPECT_NEAR(std::log2(r4 / r2), 2.0, 0.01);
}

TEST(TraceAnalysis, SampleIndexFindsNearest) {
  const FlowTrace tr = synthetic_trace(1.0, 1.0, 0.1);
  EXPECT_EQ(sample_index(tr, 0.0), 0u);
  EXPECT_EQ(sample_index(tr, 0.34), 3u);
  EXPECT_EQ(sample_index(tr, 0.36), 4u);
  EXPECT_EQ(sample_index(tr, 5.0), 10u);
}

TEST(TraceAnalysis, MabuchiIsMinusIntegratedY) {
  const FlowTrace tr = synthetic_trace(0.5, 4.0, 0.01);
  const auto m = mabuchi_along_flow(tr);
  const double exact = -(1.0 - std::exp(-4.0)) / kClassVolume;
  EXPECT_NEAR(m.back(), exact, 1e-5);
  for (std::size_t i = 1; i < m.size(); ++i) EXPECT_LE(m[i], m[i - 1]);
}

TEST(TraceAnalysis, PIntegralIncrementsContractGeometrically) {
  const FlowTrace tr = synthetic_trace(1.0, 10.0, 0.01);
  const PIntegral p = p_integral(tr, 2.5);
  EXPECT_TRUE(p.geometric);
  for (double r : p.ratios) EXPECT_NEAR(r, std::exp(-2.5), 1e-4);
  // trapezoid rule: exact integral plus h^2/12 (f'(b) - f'(a))
  const double h = 0.01, exact = (1.0 - std::exp(-25.0)) / 2.5;
  EXPECT_NEAR(p.running.back(), exact + h * h / 12.0 * 2.5 * (1.0 - std::exp(-25.0)), 1e-8);
  EXPECT_THROW(p_integral(tr, 0.0), ConfigError);
}

TEST(TraceAnalysis, PIntegralDetectsStagnation) {
  FlowTrace tr = synthetic_trace(1.0, 10.0, 0.1);
  for (auto& r : tr.records) r.Rn_c0 = 0.1;
  EXPECT_FALSE(p_integral(tr, 2.5).geometric);
}

TEST(TraceAnalysis, IterationRatioOnExponentialData) {
  const FlowTrace tr = synthetic_trace(1.0, 6.0, 0.1);
  const IterationRatio it = iteration_ratio(tr);
  EXPECT_EQ(it.samples, 41u);
  EXPECT_NEAR(it.max_ratio, 2.0 * std::exp(-2.0) / (std::sqrt(2.0) * std::sqrt(3.0)), 1e-12);
}
