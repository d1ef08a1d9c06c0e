#include <gtest/gtest.h>

#include "ddlab/ddlab.hpp"
#include "oracles.hpp"

using namespace ddlab;

TEST(ForwardRates, RowsSumToZeroAndOffDiagonalsNonnegative) {
  for (NoiseKind kind : {NoiseKind::Uniform, NoiseKind::Masking})
    for (int S : {2, 3, 5}) {
      RateMatrixTok q = token_rate_matrix(kind, S);
      EXPECT_NO_THROW(q.validate());
      for (std::size_t a = 0; a < q.matrix.rows(); ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < q.matrix.cols(); ++b) {
          s += q.matrix(a, b);
          if (a != b) {
            EXPECT_GE(q.matrix(a, b), 0.0);
          }
        }
        EXPECT_NEAR(s, 0.0, 1e-15);
      }
    }
  RateMatrixTok m = token_rate_matrix(NoiseKind::Masking, 3);
  for (int b = 0; b < 4; ++b) EXPECT_EQ(m.matrix(3, b), 0.0);  // MASK absorbs
  EXPECT_DOUBLE_EQ(max_exit_rate(NoiseKind::Uniform, 4), 0.75);
  EXPECT_DOUBLE_EQ(dominating_rate(NoiseKind::Masking, 4, 6), 6.0);
}

TEST(ForwardKernel, MatchesMatrixExponentialOfRates) {
  for (NoiseKind kind : {NoiseKind::Uniform, NoiseKind::Masking})
    for (double t : {0.0, 0.3, 2.0}) {
      Matrix q = token_rate_matrix(kind, 3).matrix;
      q *= t;
      Matrix e = expm(q);
      TokenKernel k = forward_token_kernel(kind, 3, t);
      EXPECT_NO_THROW(k.validate());
      EXPECT_LT((e - k.matrix).max_abs(), 1e-13);
    }
}

TEST(ForwardKernel, SemigroupProperty) {
  for (NoiseKind kind : {NoiseKind::Uniform, NoiseKind::Masking}) {
    Matrix a = forward_token_kernel(kind, 4, 0.4).matrix, b = forward_token_kernel(kind, 4, 1.1).matrix;
    Matrix ab = forward_token_kernel(kind, 4, 1.5).matrix;
    EXPECT_LT((a * b - ab).max_abs(), 1e-14);
  }
}

TEST(ForwardKernel, UniformClosedForm) {
  double t = 0.7;
  TokenKernel k = forward_token_kernel(NoiseKind::Uniform, 3, t);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) EXPECT_NEAR(k.matrix(a, b), oracle::uniform_token_kernel(3, t, a, b), 1e-15);
  EXPECT_NEAR(alpha(t, 3), k.matrix(0, 1) / k.matrix(0, 0), 1e-15);
}

TEST(Propagate, AgreesWithFullSpaceGenerator) {
  DensePmf q0 = build(HmmSpec{3, 2, 3, 0.3, 0.2, {}});
  for (NoiseKind kind : {NoiseKind::Uniform, NoiseKind::Masking})
    for (double t : {0.1, 0.8, 3.0}) {
      DensePmf qt = propagate_forward(q0, kind, t);
      std::vector<double> ref = oracle::propagate(lift_for(kind, q0), kind, t);
      for (StateIndex x = 0; x < qt.space().size(); ++x) ASSERT_NEAR(qt[x], ref[x], 1e-12);
    }
}

TEST(Propagate, TimeZeroIsIdentityAndLongTimeLimits) {
  DensePmf q0 = build(XorSpec{3});
  DensePmf same = propagate_forward(q0, NoiseKind::Uniform, 0.0);
  for (StateIndex x = 0; x < q0.space().size(); ++x) EXPECT_EQ(same[x], q0[x]);
  DensePmf far = propagate_forward(q0, NoiseKind::Uniform, 40.0);
  for (StateIndex x = 0; x < q0.space().size(); ++x) EXPECT_NEAR(far[x], 1.0 / 8, 1e-15);
  DensePmf masked = propagate_forward(q0, NoiseKind::Masking, 40.0);
  EXPECT_NEAR(masked[masked.space().size() - 1], 1.0, 1e-15);
}

TEST(Propagate, MaskCountIsBinomial) {
  DensePmf q0 = build(two_point_mixture(4));
  double t = 0.9, p = -std::expm1(-t);
  DensePmf qt = propagate_forward(q0, NoiseKind::Masking, t);
  std::vector<double> by_count(5, 0.0);
  for (StateIndex x = 0; x < qt.space().size(); ++x) by_count[qt.space().mask_count(x)] += qt[x];
  for (int k = 0; k <= 4; ++k) EXPECT_NEAR(by_count[k], std::tgamma(5) / (std::tgamma(k + 1) * std::tgamma(5 - k)) * std::pow(p, k) * std::pow(1 - p, 4 - k), 1e-14);
}

TEST(Propagate, RejectsMaskedAlphabetForUniformAndChargedMaskForMasking) {
  DensePmf q0 = build(XorSpec{3});
  DensePmf lifted = embed_masked(q0);
  EXPECT_THROW(propagate_forward(lifted, NoiseKind::Uniform, 1.0), DomainError);
  DensePmf charged = DensePmf::uniform(lifted.space());
  EXPECT_THROW(propagate_forward(charged, NoiseKind::Masking, 1.0), ValidationError);
  EXPECT_THROW(propagate_forward(q0, NoiseKind::Uniform, -1.0), DomainError);
}

namespace {
// Pearson p-value of draws against an exact law.
double fit_p_value(const std::vector<StateIndex>& draws, const DensePmf& law) {
  std::vector<double> counts(law.space().size(), 0.0);
  for (auto x : draws) counts[x] += 1.0;
  return chi_square_gof(counts, law.mass()).p_value;
}
}  // namespace

TEST(ForwardSampling, PathTerminalsFollowTheMarginal) {
  DensePmf q0 = build(HmmSpec{3, 2, 2, 0.2, 0.1, {}});
  for (NoiseKind kind : {NoiseKind::Uniform, NoiseKind::Masking}) {
    Rng rng(11);
    std::vector<StateIndex> draws;
    for (int n = 0; n < 40000; ++n) draws.push_back(sample_forward_path(q0, kind, 0.6, rng).terminal());
    EXPECT_GT(fit_p_value(draws, propagate_forward(q0, kind, 0.6)), 1e-3);
  }
}

TEST(ForwardSampling, UniformizationFollowsTheMarginal) {
  DensePmf q0 = build(HmmSpec{3, 2, 2, 0.2, 0.1, {}});
  for (NoiseKind kind : {NoiseKind::Uniform, NoiseKind::Masking}) {
    Rng rng(12);
    std::vector<StateIndex> draws;
    for (int n = 0; n < 40000; ++n) draws.push_back(uniformize_forward(q0, kind, 1.3, rng));
    EXPECT_GT(fit_p_value(draws, propagate_forward(q0, kind, 1.3)), 1e-3);
  }
}

TEST(ForwardSampling, MaskingPathsOnlyEverMask) {
  DensePmf q0 = build(XorSpec{4});
  Rng rng(5);
  for (int n = 0; n < 200; ++n) {
    ForwardPath p = sample_forward_path(q0, NoiseKind::Masking, 5.0, rng);
    StateSpace ms = q0.space().with_mask();
    int prev = ms.mask_count(p.initial);
    double t = 0.0;
    for (const auto& e : p.events) {
      EXPECT_GT(e.time, t);
      t = e.time;
      EXPECT_EQ(ms.mask_count(e.state), prev + 1);
      prev = ms.mask_count(e.state);
    }
  }
}

TEST(ForwardSampling, SameSeedSamePath) {
  DensePmf q0 = build(XorSpec{3});
  Rng a(99), b(99);
  ForwardPath pa = sample_forward_path(q0, NoiseKind::Uniform, 3.0, a);
  ForwardPath pb = sample_forward_path(q0, NoiseKind::Uniform, 3.0, b);
  ASSERT_EQ(pa.events.size(), pb.events.size());
  for (std::size_t k = 0; k < pa.events.size(); ++k) {
    EXPECT_EQ(pa.events[k].time, pb.events[k].time);
    EXPECT_EQ(pa.events[k].state, pb.events[k].state);
  }
}
