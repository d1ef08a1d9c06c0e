#include <gtest/gtest.h>

#include "ddlab/ddlab.hpp"
#include "oracles.hpp"

using namespace ddlab;

TEST(Score, UniformMatchesKernelOracle) {
  DensePmf q0 = build(HmmSpec{3, 2, 3, 0.3, 0.2, {}});
  const auto& sp = q0.space();
  for (double t : {0.05, 0.7, 3.0}) {
    ScoreField f = ScoreField::exact(q0, NoiseKind::Uniform, t);
    for (StateIndex x = 0; x < sp.size(); x += 3)
      for (int i = 0; i < 3; ++i)
        for (int c = 1; c < 3; ++c) {
          double want = oracle::uniform_score(q0, t, x, i, c);
          EXPECT_NEAR(f.by_increment(x, i, c), want, 1e-12 * std::max(1.0, want));
          EXPECT_NEAR(exact_score_uniform(q0, t, x, i, c), want, 1e-12 * std::max(1.0, want));
        }
  }
}

TEST(Score, MaskingMatchesPosteriorOracle) {
  DensePmf q0 = build(XorSpec{3});
  DensePmf p_ex = build(StructureWithNoiseSpec{4, {0, 1}});
  for (const DensePmf* p : {&q0, &p_ex}) {
    StateSpace ms = p->space().with_mask();
    for (double t : {0.1, 1.0, 4.0}) {
      ScoreField f = ScoreField::exact(*p, NoiseKind::Masking, t);
      auto table = masked_marginal_table(*p);
      for (StateIndex x = 0; x < ms.size(); ++x) {
        if (f.marginal()[x] <= 0.0) continue;
        for (int i : ms.masked_set(x))
          for (int a = 0; a < ms.vocab(); ++a) {
            double want = oracle::masking_score(*p, t, ms.unpack(x), i, a);
            EXPECT_NEAR(f(x, i, a), want, 1e-12 * std::max(1.0, want));
            EXPECT_NEAR(exact_score_masking(ms, table, t, x, i, a), want, 1e-12 * std::max(1.0, want));
          }
      }
    }
  }
}

TEST(Score, MaskingScoresSumToReverseRateNormalizer) {
  // Posterior over the token of a masked coordinate sums to one.
  DensePmf q0 = build(HmmSpec{3, 2, 3, 0.3, 0.2, {}});
  double t = 0.8;
  ScoreField f = ScoreField::exact(q0, NoiseKind::Masking, t);
  StateSpace ms = f.space();
  for (StateIndex x = 0; x < ms.size(); ++x) {
    if (f.marginal()[x] <= 0.0) continue;
    for (int i : ms.masked_set(x)) {
      double s = 0.0;
      for (int a = 0; a < 3; ++a) s += f(x, i, a);
      EXPECT_NEAR(s * std::expm1(t), 1.0, 1e-12);
    }
  }
}

TEST(Score, RejectsInadmissiblePairs) {
  DensePmf q0 = build(XorSpec{3});
  ScoreField u = ScoreField::exact(q0, NoiseKind::Uniform, 1.0);
  EXPECT_THROW(u(0, 0, 0), DomainError);
  EXPECT_THROW(u.by_increment(0, 0, 2), DomainError);
  ScoreField m = ScoreField::exact(q0, NoiseKind::Masking, 1.0);
  EXPECT_THROW(m(0, 0, 1), DomainError);  // coordinate 0 is not masked
  EXPECT_THROW(ScoreField::exact(q0, NoiseKind::Uniform, 0.0), DomainError);
}

TEST(Score, OffSupportThrowsOrIsUninformative) {
  // Under masking a point mass never reaches states whose visible tokens disagree with it.
  StateSpace sp(2, Alphabet(2, false));
  DensePmf pt = DensePmf::point_mass(sp, 0);
  ScoreField m = ScoreField::exact(pt, NoiseKind::Masking, 1.0);
  StateSpace ms = m.space();
  StateIndex off = ms.pack({1, 2});
  ASSERT_EQ(m.marginal()[off], 0.0);
  EXPECT_THROW(m(off, 1, 0), SingularScoreError);
  EXPECT_NEAR(m.with_off_support(OffSupport::Uninformative)(off, 1, 0), 1.0 / (std::expm1(1.0) * 2), 1e-15);
  EXPECT_THROW(exact_score_uniform(DensePmf::point_mass(sp, 0), 0.0, 1, 0, 1), SingularScoreError);
}

TEST(Score, BregmanProperties) {
  EXPECT_EQ(bregman(2.0, 2.0), 0.0);
  for (double a : {0.1, 0.5, 3.0})
    for (double b : {0.2, 1.0, 7.0}) {
      EXPECT_GE(bregman(a, b), 0.0);
      EXPECT_NEAR(weighted_bregman(a, b), b * bregman(a, b), 1e-14 * std::max(1.0, a + b));
    }
  EXPECT_EQ(weighted_bregman(0.0, 0.0), 0.0);
  EXPECT_EQ(weighted_bregman(0.3, 0.0), 0.3);
  EXPECT_TRUE(std::isinf(weighted_bregman(0.0, 0.3)));
  EXPECT_THROW(bregman(0.0, 1.0), DomainError);
}

TEST(Score, ExactLossIsZero) {
  DensePmf q0 = build(HmmSpec{3, 2, 2, 0.2, 0.1, {}});
  for (NoiseKind kind : {NoiseKind::Uniform, NoiseKind::Masking}) {
    ScoreField s = ScoreField::exact(q0, kind, 0.6);
    EXPECT_EQ(score_entropy_loss(0.6, s, s, s.marginal(), kind), 0.0);
  }
}

TEST(Score, ConstantBiasLossHasClosedForm) {
  DensePmf q0 = build(HmmSpec{3, 2, 3, 0.2, 0.1, {}});
  for (NoiseKind kind : {NoiseKind::Uniform, NoiseKind::Masking})
    for (double beta : {0.5, 1.3}) {
      ScoreField s = ScoreField::exact(q0, kind, 0.9);
      ScoreField h = s.corrupted({ConstantBias{beta}, 0});
      double want = (beta - 1.0 - std::log(beta)) * expected_reverse_rate(s, s.marginal(), kind);
      EXPECT_NEAR(score_entropy_loss(0.9, h, s, s.marginal(), kind), want, 1e-12);
    }
}

TEST(Score, CorruptionIsDeterministicAndIndependentAcrossStreams) {
  DensePmf q0 = build(XorSpec{3});
  ScoreField s = ScoreField::exact(q0, NoiseKind::Uniform, 0.5);
  CorruptionModel m{LogNormal{0.3}, 7};
  ScoreField a = s.corrupted(m, 1), b = s.corrupted(m, 1), c = s.corrupted(m, 2);
  int differ = 0;
  for (StateIndex x = 0; x < 8; ++x)
    for (int i = 0; i < 3; ++i) {
      EXPECT_EQ(a.by_increment(x, i, 1), b.by_increment(x, i, 1));
      differ += a.by_increment(x, i, 1) != c.by_increment(x, i, 1);
    }
  EXPECT_GT(differ, 20);
  EXPECT_EQ(s.corrupted({LogNormal{0.0}, 7}).by_increment(3, 1, 1), s.by_increment(3, 1, 1));
  EXPECT_THROW(s.corrupted({LogNormal{-1.0}, 0}), ConfigError);
  EXPECT_THROW(s.corrupted({ConstantBias{0.0}, 0}), ConfigError);
}

TEST(Score, LogNormalFactorsHaveTheRightLaw) {
  // log-factors over many keys should look standard normal times sigma.
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    double z = hashed_normal(static_cast<std::uint64_t>(k));
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(Score, ScoreErrorTotalScalesWithSigma) {
  DensePmf q0 = build(XorSpec{3});
  Schedule sch = build_schedule(ScheduleRecipe::Constant, 3.0, 8);
  auto exact = exact_score_provider(q0, NoiseKind::Uniform);
  EXPECT_EQ(score_error_total(sch, exact, exact), 0.0);
  double lo = score_error_total(sch, corrupted_score_provider(q0, NoiseKind::Uniform, {LogNormal{0.05}, 1}), exact);
  double hi = score_error_total(sch, corrupted_score_provider(q0, NoiseKind::Uniform, {LogNormal{0.2}, 1}), exact);
  EXPECT_GT(lo, 0.0);
  EXPECT_GT(hi, lo);
  // D(e^z, 1) ~ z^2 / 2 for small z: the ratio tracks sigma^2.
  EXPECT_NEAR(hi / lo, 16.0, 3.0);
}

TEST(Score, DumpCoversEveryAdmissiblePair) {
  DensePmf q0 = build(XorSpec{3});
  auto u = score_dump(ScoreField::exact(q0, NoiseKind::Uniform, 1.0));
  EXPECT_EQ(u.size(), 8u * 3 * 1);
  auto m = score_dump(ScoreField::exact(q0, NoiseKind::Masking, 1.0));
  std::size_t want = 0;
  ScoreField f = ScoreField::exact(q0, NoiseKind::Masking, 1.0);
  for (StateIndex x = 0; x < f.space().size(); ++x)
    if (f.marginal()[x] > 0.0) want += 2 * f.space().mask_count(x);
  EXPECT_EQ(m.size(), want);
}
