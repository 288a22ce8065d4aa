// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "glimpse/error.hpp"
#include "glimpse/token_weights.hpp"
#include "oracles.hpp"

using namespace glimpse;
namespace oracle = glimpse::oracle;
using glimpse::testing::random_trace;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// A relevance matrix for one target row, rest identity.
RelevanceMatrix with_row(std::size_t n, std::size_t target, const std::vector<double>& row) {
  RelevanceMatrix r{Matrix::identity(n), target};
  for (std::size_t j = 0; j < n; ++j) r.relevance(target, j) = row[j];
  return r;
}

Matrix random_token_rel(XorShift64Star& rng, std::size_t count) {
  Matrix m(count, count);
  for (std::size_t j = 0; j < count; ++j)
    for (std::size_t i = 0; i <= j; ++i) m(j, i) = rng.uniform(0.0, 1.0);
  return m;
}

}  // namespace

TEST(Alignment, IdentityRelevanceHasNoCrossModalMass) {
  const TraceDims d{1, 1, 2, 2, 1};
  const RelevanceMatrix r{Matrix::identity(5), 4};
  EXPECT_EQ(prompt_alignment(r, d), 0.0);
  EXPECT_EQ(visual_alignment(r, d), 0.0);
}

TEST(Alignment, MeanOverPromptColumns) {
  const TraceDims d{1, 1, 1, 2, 1};
  const auto r = with_row(4, 3, {0.9, 0.2, 0.4, 1.0});
  EXPECT_NEAR(prompt_alignment(r, d), 0.3, 1e-15);
  EXPECT_NEAR(visual_alignment(r, d), 0.9, 1e-15);
}

TEST(Alignment, UniformRowGivesOneOverN) {
  const TraceDims d{1, 1, 3, 3, 2};
  const auto r = with_row(8, 6, std::vector<double>(8, 1.0 / 8.0));
  EXPECT_NEAR(prompt_alignment(r, d), 0.125, 1e-15);
  EXPECT_NEAR(visual_alignment(r, d), 0.125, 1e-15);
}

TEST(CombinedWeights, HandExample) {
  const std::vector<double> a{0.2, 0.6}, p{1.0, 1.0};
  const auto w = combined_weights(a, p);
  EXPECT_NEAR(w.values[0], 0.25, 1e-15);
  EXPECT_NEAR(w.values[1], 0.75, 1e-15);
  EXPECT_FALSE(w.degenerate);
}

TEST(CombinedWeights, ConfidenceScalesTheShare) {
  const std::vector<double> a{0.5, 0.5}, p{0.9, 0.3};
  const auto w = combined_weights(a, p);
  EXPECT_NEAR(w.values[0], 0.75, 1e-15);
  EXPECT_NEAR(w.values[1], 0.25, 1e-15);
}

TEST(CombinedWeights, AllZeroFallsBackToUniformAndFlags) {
  const std::vector<double> a{0.0, 0.0, 0.0}, p{0.5, 0.2, 0.9};
  const auto w = combined_weights(a, p);
  EXPECT_TRUE(w.degenerate);
  for (double v : w.values) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(CombinedWeights, ZeroConfidenceTokenGetsZero) {
  const std::vector<double> a{0.4, 0.4}, p{0.0, 0.7};
  const auto w = combined_weights(a, p);
  EXPECT_EQ(w.values[0], 0.0);
  EXPECT_EQ(w.values[1], 1.0);
}

TEST(CombinedWeights, LengthMismatchThrows) {
  const std::vector<double> a{0.4, 0.4}, p{0.7};
  EXPECT_THROW(combined_weights(a, p), Error);
}

TEST(JointRelevance, GeometricMean) {
  const std::vector<double> bv{0.25, 0.75}, bp{0.75, 0.25};
  const auto g = joint_relevance(bv, bp);
  EXPECT_NEAR(g[0], std::sqrt(0.1875), 1e-15);
  EXPECT_NEAR(g[0], 0.4330, 5e-5);
  EXPECT_NEAR(g[1], g[0], 1e-15);
}

TEST(JointRelevance, BoundedByCauchySchwarz) {
  XorShift64Star rng(20);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t count = 1 + rng.below(10);
    std::vector<double> a(count), b(count);
    for (auto& v : a) v = rng.uniform();
    for (auto& v : b) v = rng.uniform();
    const auto ba = combined_weights(a, std::vector<double>(count, 1.0)).values;
    const auto bb = combined_weights(b, std::vector<double>(count, 1.0)).values;
    const auto g = joint_relevance(ba, bb);
    EXPECT_LE(sum(g), 1.0 + 1e-12);
    for (double v : g) EXPECT_GE(v, 0.0);
  }
}

TEST(TokenRelevance, ReadsOwnRowAtEarlierPositions) {
  const TraceDims d{1, 1, 1, 1, 3};
  std::vector<RelevanceMatrix> r;
  for (std::size_t o = 0; o < 3; ++o) {
    RelevanceMatrix m{Matrix(5, 5), d.generated_position(o)};
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) m.relevance(i, j) = 100.0 * o + 10.0 * i + j;
    r.push_back(m);
  }
  const auto t = token_relevance(r, d);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(t(j, i), 100.0 * j + 10.0 * (2 + j) + (2 + i));
}

TEST(FlowFractions, RowsSumToOneOrZero) {
  XorShift64Star rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t count = 1 + rng.below(8);
    const auto rel = random_token_rel(rng, count);
    const auto f = flow_fractions(rel);
    for (std::size_t i = 0; i < count; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < count; ++j) {
        if (j <= i) {
          EXPECT_EQ(f(i, j), 0.0);
        }
        s += f(i, j);
      }
      if (i + 1 < count) {
        EXPECT_NEAR(s, 1.0, 1e-12);
      } else {
        EXPECT_EQ(s, 0.0);
      }
    }
  }
}

TEST(FlowRedistribute, ZeroLambdaReturnsBetaExactly) {
  XorShift64Star rng(22);
  const auto rel = random_token_rel(rng, 5);
  const std::vector<double> beta{0.1, 0.2, 0.3, 0.15, 0.25};
  EXPECT_EQ(flow_redistribute(rel, beta, 0.0, std::vector<bool>(5, true)), beta);
}

TEST(FlowRedistribute, SingleSuccessorTakesTheWholeShare) {
  // Token 0 donates to token 1 only (the only later token).
  Matrix rel(2, 2);
  rel(1, 0) = 0.7;
  const std::vector<double> beta{0.4, 0.6};
  const auto out = flow_redistribute(rel, beta, 0.5, {true, false});
  // beta' = [0.4, 0.6 + 0.5 * 0.4] / 1.2
  EXPECT_NEAR(out[0], 0.4 / 1.2, 1e-15);
  EXPECT_NEAR(out[1], 0.8 / 1.2, 1e-15);
}

TEST(FlowRedistribute, MatchesOracleOnRandomInputs) {
  XorShift64Star rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t count = 1 + rng.below(9);
    const auto rel = random_token_rel(rng, count);
    std::vector<double> raw(count);
    for (auto& v : raw) v = rng.uniform(0.01, 1.0);
    const auto beta = combined_weights(raw, std::vector<double>(count, 1.0)).values;
    std::vector<bool> donors(count);
    for (std::size_t i = 0; i < count; ++i) donors[i] = rng.uniform() < 0.5;
    const double lambda = rng.uniform();
    const auto got = flow_redistribute(rel, beta, lambda, donors);
    const auto want = oracle::flow(oracle::from(rel), beta, lambda, donors);
    EXPECT_NEAR(sum(got), 1.0, 1e-12);
    for (std::size_t t = 0; t < count; ++t) EXPECT_NEAR(got[t], want[t], 1e-12);
  }
}

TEST(FlowRedistribute, NoDonorsLeavesBetaUnchanged) {
  XorShift64Star rng(24);
  const auto rel = random_token_rel(rng, 4);
  const std::vector<double> beta{0.1, 0.2, 0.3, 0.4};
  const auto out = flow_redistribute(rel, beta, 0.8, std::vector<bool>(4, false));
  for (int t = 0; t < 4; ++t) EXPECT_NEAR(out[t], beta[t], 1e-15);
}

TEST(FlowRedistribute, RejectsLambdaOutsideUnitInterval) {
  Matrix rel(2, 2);
  const std::vector<double> beta{0.5, 0.5};
  EXPECT_THROW(flow_redistribute(rel, beta, 1.5, {true, true}), Error);
  EXPECT_THROW(flow_redistribute(rel, beta, -0.1, {true, true}), Error);
}

namespace {

struct Fixture {
  TraceBundle trace;
  std::vector<RelevanceMatrix> relevances;
};

Fixture fixture(std::uint64_t seed, TraceDims d = {3, 2, 9, 3, 5}) {
  Fixture f{random_trace(seed, d), {}};
  f.relevances = relevance_for_all_tokens(f.trace, {});
  return f;
}

}  // namespace

TEST(BuildTokenTable, SimplexInvariants) {
  for (std::uint64_t seed = 30; seed < 60; ++seed) {
    const auto f = fixture(seed);
    const auto t = build_token_table(f.trace, f.relevances, {});
    EXPECT_NEAR(sum(t.beta_visual), 1.0, 1e-12);
    EXPECT_NEAR(sum(t.beta_prompt), 1.0, 1e-12);
    EXPECT_LE(sum(t.gamma), 1.0 + 1e-12);
    ASSERT_TRUE(t.flow_applied);
    EXPECT_NEAR(sum(*t.beta_visual_flowed), 1.0, 1e-12);
    EXPECT_NEAR(sum(*t.beta_prompt_flowed), 1.0, 1e-12);
  }
}

TEST(BuildTokenTable, MatchesDirectRecomputation) {
  const auto f = fixture(61);
  const auto& d = f.trace.dims;
  const auto t = build_token_table(f.trace, f.relevances, {});
  std::vector<double> vw(d.generated), pw(d.generated);
  double vs = 0.0, ps = 0.0;
  for (std::size_t o = 0; o < d.generated; ++o) {
    const auto row = f.relevances[o].relevance.row(d.generated_position(o));
    double a = 0.0, v = 0.0;
    for (std::size_t j = 0; j < d.visual; ++j) v += row[j] / static_cast<double>(d.visual);
    for (std::size_t j = d.visual; j < d.visual + d.prompt; ++j) a += row[j] / static_cast<double>(d.prompt);
    vw[o] = f.trace.confidences[o] * a;
    pw[o] = f.trace.confidences[o] * v;
    vs += vw[o];
    ps += pw[o];
  }
  for (std::size_t o = 0; o < d.generated; ++o) {
    EXPECT_NEAR(t.beta_visual[o], vw[o] / vs, 1e-13);
    EXPECT_NEAR(t.beta_prompt[o], pw[o] / ps, 1e-13);
    EXPECT_NEAR(t.gamma[o], std::sqrt(vw[o] / vs * pw[o] / ps), 1e-13);
  }
}

TEST(BuildTokenTable, ConfidenceOffEqualsUnitConfidence) {
  auto f = fixture(62);
  TokenConfig off;
  off.use_token_confidence = false;
  const auto a = build_token_table(f.trace, f.relevances, off);
  std::fill(f.trace.confidences.begin(), f.trace.confidences.end(), 1.0);
  const auto b = build_token_table(f.trace, f.relevances, {});
  EXPECT_EQ(a.beta_visual, b.beta_visual);
  EXPECT_EQ(a.beta_prompt, b.beta_prompt);
}

TEST(BuildTokenTable, WeightingTogglesGiveConfidenceOnlyBetas) {
  const auto f = fixture(63);
  TokenConfig c;
  c.use_prompt_weighting = false;
  c.use_visual_weighting = false;
  const auto t = build_token_table(f.trace, f.relevances, c);
  const double total = std::accumulate(f.trace.confidences.begin(), f.trace.confidences.end(), 0.0);
  for (std::size_t o = 0; o < t.beta_visual.size(); ++o) {
    EXPECT_NEAR(t.beta_visual[o], f.trace.confidences[o] / total, 1e-7);
    EXPECT_EQ(t.beta_visual[o], t.beta_prompt[o]);
  }
}

TEST(BuildTokenTable, RaisingOneConfidenceRaisesItsShare) {
  auto f = fixture(64);
  const auto before = build_token_table(f.trace, f.relevances, {});
  f.trace.confidences[2] = std::min(1.0, f.trace.confidences[2] * 1.5 + 0.1);
  const auto after = build_token_table(f.trace, f.relevances, {});
  if (before.prompt_alignment[2] > 0.0) {
    EXPECT_GT(after.beta_visual[2], before.beta_visual[2]);
  }
  for (std::size_t o = 0; o < after.beta_visual.size(); ++o) {
    if (o != 2) {
      EXPECT_LE(after.beta_visual[o], before.beta_visual[o] + 1e-15);
    }
  }
}

TEST(BuildTokenTable, DropPunctuationZeroesThoseTokens) {
  auto f = fixture(65);
  const auto& d = f.trace.dims;
  f.trace.token_texts[d.generated_position(1)] = ",";
  f.trace.token_texts[d.generated_position(3)] = "...";
  TokenConfig c;
  c.drop_punctuation = true;
  const auto t = build_token_table(f.trace, f.relevances, c);
  EXPECT_EQ(t.beta_visual[1], 0.0);
  EXPECT_EQ(t.beta_visual[3], 0.0);
  EXPECT_EQ(t.gamma[1], 0.0);
  EXPECT_NEAR(sum(t.beta_visual), 1.0, 1e-12);
  const auto kept = build_token_table(f.trace, f.relevances, {});
  EXPECT_GT(kept.beta_visual[1], 0.0);
}

TEST(BuildTokenTable, FlowIsDisplayOnly) {
  const auto f = fixture(66);
  TokenConfig with, without;
  without.flow_display = false;
  const auto a = build_token_table(f.trace, f.relevances, with);
  const auto b = build_token_table(f.trace, f.relevances, without);
  EXPECT_EQ(a.beta_visual, b.beta_visual);
  EXPECT_EQ(a.gamma, b.gamma);
  EXPECT_FALSE(b.beta_visual_flowed.has_value());
  EXPECT_TRUE(a.gamma_flowed.has_value());
}

TEST(BuildTokenTable, FlowMatchesOracleWithMaskDonors) {
  const auto f = fixture(67, {2, 2, 4, 2, 6});
  const auto& d = f.trace.dims;
  const auto t = build_token_table(f.trace, f.relevances, {});
  oracle::Mat rel = oracle::zeros(d.generated, d.generated);
  for (std::size_t j = 0; j < d.generated; ++j)
    for (std::size_t i = 0; i < d.generated; ++i)
      rel[j][i] = f.relevances[j].relevance(d.generated_position(j), d.generated_position(i));
  const auto want = oracle::flow(rel, t.beta_visual, 0.5, f.trace.function_word_mask);
  for (std::size_t o = 0; o < d.generated; ++o) EXPECT_NEAR((*t.beta_visual_flowed)[o], want[o], 1e-12);
}

TEST(BuildTokenTable, WrongRelevanceCountThrows) {
  auto f = fixture(68);
  f.relevances.pop_back();
  EXPECT_THROW(build_token_table(f.trace, f.relevances, {}), Error);
}
