#include <gtest/gtest.h>

#include "ddlab/ddlab.hpp"
#include "oracles.hpp"

using namespace ddlab;

namespace {

std::vector<DistributionSpec> small_targets() {
  return {two_point_mixture(4),
          XorSpec{4},
          StructureWithNoiseSpec{5, {0, 2}},
          ProductSpec{3, {0.2, 0.3, 0.5}},
          HmmSpec{4, 2, 2, 0.2, 0.1, {}},
          HmmSpec{3, 3, 3, 0.3, 0.2, {}},
          SbmSpec{3, 2, 0.8, 0.2},
          QuantizedLatentSpec{1, 3, 3, 0.5, 16}};
}

}  // namespace

TEST(InfoMetrics, EntropyKlTv) {
  StateSpace sp(1, Alphabet(2, false));
  DensePmf a(sp, {0.25, 0.75}), b(sp, {0.5, 0.5}), pt = DensePmf::point_mass(sp, 0);
  EXPECT_NEAR(entropy(b), std::log(2.0), 1e-15);
  EXPECT_NEAR(kl(a, b).value, 0.25 * std::log(0.5) + 0.75 * std::log(1.5), 1e-15);
  EXPECT_TRUE(kl(a, pt).infinite);
  EXPECT_TRUE(std::isinf(kl(a, pt).as_double()));
  EXPECT_EQ(kl(pt, a).infinite, false);
  EXPECT_NEAR(tv(a, b), 0.25, 1e-15);
  EXPECT_NEAR(kl_equal_mass(a.mass(), b.mass()), kl(a, b).value, 1e-15);
}

TEST(InfoMetrics, AnalyticCorrelations) {
  for (const auto& spec : small_targets()) {
    AnalyticValues v = analytic_expectations(spec);
    DensePmf p = build(spec);
    Correlations c = correlations_direct(p);
    auto [C, B] = oracle::total_and_dual(p);
    EXPECT_NEAR(c.total, C, 1e-12) << spec_name(spec);
    EXPECT_NEAR(c.dual, B, 1e-12) << spec_name(spec);
    if (v.dual_exact) {
      EXPECT_NEAR(c.dual, *v.dual_exact, 1e-12) << spec_name(spec);
    }
    if (v.total_exact) {
      EXPECT_NEAR(c.total, *v.total_exact, 1e-12) << spec_name(spec);
    }
    if (v.dual_bound) {
      EXPECT_LE(c.dual, *v.dual_bound) << spec_name(spec);
    }
  }
}

TEST(InfoMetrics, DenseProfileMatchesSubsetOracle) {
  for (const auto& spec : small_targets()) {
    DensePmf p = build(spec);
    for (double t : {0.05, 0.5, 2.0}) {
      double want = oracle::info_profile(p, t);
      EXPECT_NEAR(info_profile(p, t), want, 1e-11 * std::max(1.0, want)) << spec_name(spec) << " t=" << t;
    }
  }
}

TEST(InfoMetrics, ExpansionMatchesDense) {
  for (const auto& spec : small_targets()) {
    DensePmf p = build(spec);
    std::string dense_route, exp_route;
    auto dense = info_profile_function(p, InfoRoute::Dense, 0, &dense_route);
    auto exp = info_profile_function(p, InfoRoute::Expansion, 0, &exp_route);
    EXPECT_EQ(dense_route, "dense");
    EXPECT_EQ(exp_route, "expansion");
    for (double t : {0.01, 0.3, 1.0, 4.0}) EXPECT_NEAR(exp(t), dense(t), 1e-11) << spec_name(spec);
  }
}

TEST(InfoMetrics, AutoRoutePicksBySize) {
  DensePmf small = build(XorSpec{4}), large = build(XorSpec{10});
  std::string r1, r2;
  info_profile_function(small, InfoRoute::Auto, 20000, &r1);
  info_profile_function(large, InfoRoute::Auto, 20000, &r2);
  EXPECT_EQ(r1, "dense");
  EXPECT_EQ(r2, "expansion");
}

TEST(InfoMetrics, StructureWithNoiseClosedForm) {
  for (const auto& s : {StructureWithNoiseSpec{6, {0, 1, 2}}, StructureWithNoiseSpec{5, {1}}, StructureWithNoiseSpec{7, {0, 3, 5, 6}}}) {
    auto f = info_profile_function(build(s), InfoRoute::Expansion, 0);
    for (double t : {0.1, 0.25, 1.0, 3.0}) EXPECT_NEAR(structure_with_noise_info(s, t), f(t), 1e-12);
  }
}

TEST(InfoMetrics, ProfileIsZeroForProducts) {
  DensePmf p = build(ProductSpec{4, {0.1, 0.9}});
  for (double t : {0.1, 1.0}) EXPECT_LT(info_profile(p, t), 1e-14);
}

TEST(InfoMetrics, QuadratureRecoversCorrelations) {
  QuadratureOptions opt;
  opt.rel_tol = 1e-6;
  for (const auto& spec : small_targets()) {
    DensePmf p = build(spec);
    Correlations c = correlations_direct(p);
    CorrelationQuadrature q = correlations_quadrature(p, opt);
    EXPECT_NEAR(q.dual, c.dual, 1e-5 * std::max(c.dual, 1e-3)) << spec_name(spec);
    EXPECT_NEAR(q.total, c.total, 1e-5 * std::max(c.total, 1e-3)) << spec_name(spec);
    EXPECT_LE(q.mixed, std::min(q.dual, q.total) + 1e-9) << spec_name(spec);
  }
  EXPECT_THROW(correlations_quadrature(build(XorSpec{3}), QuadratureOptions{1e-9}), ConfigError);
}

TEST(InfoMetrics, PhiIdentities) {
  for (const auto& spec : small_targets()) {
    DensePmf p = build(spec);
    if (p.space().dim() > 5) continue;
    for (double t : {0.2, 1.0, 3.0}) {
      double f = phi(p, t);
      EXPECT_GE(f, 0.0);
      EXPECT_NEAR(phi_pushforward(p, t), f, 1e-10 * std::max(1.0, f)) << spec_name(spec);
      IdentityGap g = uniform_entropy_identity(p, t);
      EXPECT_NEAR(g.lhs, g.rhs, 1e-10 * std::max(1.0, std::abs(g.rhs))) << spec_name(spec);
      // d/dt KL(q_t || uniform) = -phi(t)
      double h = 1e-4;
      double dkl = (kl_to_uniform(p, t + h) - kl_to_uniform(p, t - h)) / (2 * h);
      EXPECT_NEAR(dkl, -f, 1e-6 * std::max(1.0, f)) << spec_name(spec);
    }
  }
}

TEST(InfoMetrics, PhiNonincreasing) {
  DensePmf p = build(HmmSpec{4, 2, 2, 0.2, 0.1, {}});
  double prev = phi(p, 0.01);
  for (double t = 0.1; t < 5.0; t += 0.1) {
    double f = phi(p, t);
    EXPECT_LE(f, prev + 1e-12);
    prev = f;
  }
}

TEST(InfoMetrics, ScoreMartingales) {
  for (const auto& spec : {DistributionSpec{HmmSpec{3, 2, 2, 0.2, 0.1, {}}}, DistributionSpec{XorSpec{3}}}) {
    DensePmf p = build(spec);
    for (NoiseKind kind : {NoiseKind::Uniform, NoiseKind::Masking}) {
      MartingaleReport r = check_martingales(p, kind, 2.0, 0.3, 1.2);
      EXPECT_GT(r.checked, 0u);
      EXPECT_LT(std::min(r.max_abs_dev, r.max_rel_dev), 1e-10) << spec_name(spec) << " " << to_string(kind);
    }
  }
  EXPECT_THROW(check_martingales(build(XorSpec{3}), NoiseKind::Uniform, 2.0, 1.5, 1.0), DomainError);
}

TEST(InfoMetrics, MartingaleFailsForCorruptedScores) {
  DensePmf p = build(HmmSpec{3, 2, 2, 0.2, 0.1, {}});
  ScoreField bad = ScoreField::exact(p, NoiseKind::Uniform, 0.8).corrupted({LogNormal{0.3}, 1});
  MartingaleReport r = check_martingales(p, NoiseKind::Uniform, 2.0, 0.3, 1.2, &bad);
  EXPECT_GT(r.max_abs_dev, 1e-3);
}

TEST(InfoMetrics, ControlIdentity) {
  for (const auto& spec : {DistributionSpec{HmmSpec{3, 2, 2, 0.2, 0.1, {}}}, DistributionSpec{StructureWithNoiseSpec{4, {0, 1}}}}) {
    ControlReport r = check_control_at_t(build(spec), 3.0, 1.0, 1.5);
    EXPECT_LT(r.rel_err, 1e-8) << spec_name(spec);
    EXPECT_GT(r.rhs, 0.0);
  }
}

TEST(InfoMetrics, ConditionalMiRejectsSameCoordinate) {
  EXPECT_THROW(conditional_mi(build(XorSpec{3}), 1, 1), DomainError);
  EXPECT_NEAR(conditional_mi(build(XorSpec{3}), 0, 1), std::log(2.0), 1e-14);
}

TEST(InfoMetrics, ProfileCsv) {
  std::string csv = profile_csv({{0.5, 1.0}, {1.0, 2.0}}, "I");
  EXPECT_EQ(csv.substr(0, 4), "t,I\n");
  EXPECT_NE(csv.find("0.5,1"), std::string::npos);
}
