// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "glimpse/error.hpp"
#include "glimpse/relevance.hpp"
#include "glimpse/synth.hpp"
#include "oracles.hpp"
#include "rational.hpp"

using namespace glimpse;
namespace oracle = glimpse::oracle;
using glimpse::testing::random_trace;

namespace {

void expect_matrix_near(const Matrix& a, const Matrix& b, double tol) {
  ASSERT_TRUE(a.same_shape(b));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) EXPECT_NEAR(a(i, j), b(i, j), tol) << i << "," << j;
}

void expect_matrix_near(const Matrix& a, const oracle::Mat& b, double tol) {
  ASSERT_EQ(a.rows(), b.size());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) EXPECT_NEAR(a(i, j), b[i][j], tol) << i << "," << j;
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

Matrix random_matrix(XorShift64Star& rng, std::size_t n, double lo, double hi) {
  Matrix m(n, n);
  for (auto& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace

TEST(GradientWeightedAttention, HandExample) {
  const auto a = Matrix::from_rows({{1.0, 0.0}, {0.5, 0.5}});
  const auto g = Matrix::from_rows({{2.0, -1.0}, {-1.0, 4.0}});
  EXPECT_EQ(gradient_weighted_attention(a, g), Matrix::from_rows({{2.0, 0.0}, {0.0, 2.0}}));
}

TEST(GradientWeightedAttention, NegativeGradientsGiveZero) {
  XorShift64Star rng(1);
  const auto a = random_matrix(rng, 5, 0.0, 1.0);
  const auto g = random_matrix(rng, 5, -2.0, -0.1);
  EXPECT_EQ(gradient_weighted_attention(a, g), Matrix(5, 5));
}

TEST(GradientWeightedAttention, UnitGradientIsIdentityMap) {
  XorShift64Star rng(2);
  const auto a = random_matrix(rng, 4, 0.0, 1.0);
  Matrix ones(4, 4);
  for (auto& v : ones.data()) v = 1.0;
  EXPECT_EQ(gradient_weighted_attention(a, ones), a);
}

TEST(HeadWeights, IdenticalHeadsSplitEvenly) {
  XorShift64Star rng(3);
  const auto a = random_matrix(rng, 4, 0.0, 1.0);
  const auto g = random_matrix(rng, 4, -1.0, 1.0);
  const auto gw = gradient_weighted_attention(a, g);
  const std::vector<Matrix> weighted{gw, gw}, grads{g, g};
  const auto w = head_weights(weighted, grads, 0.5);
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_DOUBLE_EQ(w[1], 0.5);
}

TEST(HeadWeights, RatiosPointTwoAndPointFour) {
  // Head 0: sum G = 0.2, sum ReLU(g) = 1. Head 1: 0.4 and 1.
  const auto g = Matrix::from_rows({{1.0, 0.0}, {0.0, 0.0}});
  const std::vector<Matrix> weighted{Matrix::from_rows({{0.2, 0.0}, {0.0, 0.0}}),
                                     Matrix::from_rows({{0.4, 0.0}, {0.0, 0.0}})};
  const std::vector<Matrix> grads{g, g};
  const auto r = head_ratios(weighted, grads);
  EXPECT_DOUBLE_EQ(r[0], 0.2);
  EXPECT_DOUBLE_EQ(r[1], 0.4);
  const auto w = head_weights(weighted, grads, 0.5);
  const double e0 = std::exp(0.4), e1 = std::exp(0.8);
  EXPECT_NEAR(w[0], e0 / (e0 + e1), 1e-15);
  EXPECT_NEAR(w[1], e1 / (e0 + e1), 1e-15);
  EXPECT_NEAR(w[0], 0.4013, 5e-5);
  EXPECT_NEAR(w[1], 0.5987, 5e-5);
}

TEST(HeadWeights, HeadWithoutPositiveGradientHasRatioZero) {
  const auto g_neg = Matrix::from_rows({{-1.0, -2.0}, {-3.0, -1.0}});
  const auto g_pos = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const std::vector<Matrix> weighted{Matrix(2, 2), Matrix::from_rows({{0.5, 0.0}, {0.0, 0.5}})};
  const std::vector<Matrix> grads{g_neg, g_pos};
  const auto r = head_ratios(weighted, grads);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_FALSE(std::isnan(r[0]));
  const auto w = head_weights(weighted, grads, 0.5);
  EXPECT_GT(w[0], 0.0);  // still takes part in the softmax
  EXPECT_NEAR(w[0] + w[1], 1.0, 1e-15);
}

TEST(HeadWeights, ScalingOneHeadsGradientLeavesWeightsUnchanged) {
  XorShift64Star rng(4);
  std::vector<Matrix> a, g;
  for (int h = 0; h < 3; ++h) {
    a.push_back(random_matrix(rng, 5, 0.0, 1.0));
    g.push_back(random_matrix(rng, 5, -1.0, 1.0));
  }
  const auto before = fuse_layer(a, g, 0.5).head_weights;
  for (auto& v : g[1].data()) v *= 3.7;
  const auto after = fuse_layer(a, g, 0.5).head_weights;
  for (int h = 0; h < 3; ++h) EXPECT_NEAR(before[h], after[h], 1e-14);
}

TEST(FuseLayer, SingleHeadIsRowNormalizedG) {
  XorShift64Star rng(5);
  const std::vector<Matrix> a{random_matrix(rng, 4, 0.0, 1.0)};
  const std::vector<Matrix> g{random_matrix(rng, 4, -1.0, 1.0)};
  const auto f = fuse_layer(a, g, 0.5);
  EXPECT_EQ(f.head_weights, std::vector<double>{1.0});
  oracle::Mat expect = oracle::zeros(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) expect[i][j] = std::max(0.0, a[0](i, j) * g[0](i, j));
  oracle::normalize_rows_in_place(expect);
  expect_matrix_near(f.fused, expect, 1e-15);
}

TEST(FuseLayer, AllZeroStaysZero) {
  const std::vector<Matrix> a{Matrix::identity(3), Matrix::identity(3)};
  const std::vector<Matrix> g{Matrix(3, 3), Matrix(3, 3)};
  EXPECT_EQ(fuse_layer(a, g, 0.5).fused, Matrix(3, 3));
}

TEST(FuseLayer, TwoHandHeadsMatchScalarRecomputation) {
  const std::vector<Matrix> a{
      Matrix::from_rows({{1.0, 0.0, 0.0}, {0.3, 0.7, 0.0}, {0.2, 0.3, 0.5}}),
      Matrix::from_rows({{1.0, 0.0, 0.0}, {0.6, 0.4, 0.0}, {0.1, 0.1, 0.8}})};
  const std::vector<Matrix> g{
      Matrix::from_rows({{0.5, 1.0, -1.0}, {2.0, -1.0, 0.0}, {1.0, 1.0, 1.0}}),
      Matrix::from_rows({{-0.5, 0.0, 2.0}, {1.0, 3.0, 1.0}, {-1.0, 2.0, 0.5}})};
  // Head 0: G = [[.5,0,0],[.6,0,0],[.2,.3,.5]], sum G = 2.1, sum ReLU(g) = 6.5.
  // Head 1: G = [[0,0,0],[.6,1.2,0],[0,.2,.4]],  sum G = 2.4, sum ReLU(g) = 9.5.
  const double r0 = 2.1 / 6.5, r1 = 2.4 / 9.5;
  const double w0 = 1.0 / (1.0 + std::exp((r1 - r0) / 0.5)), w1 = 1.0 - w0;
  const double e[3][3] = {{0.5 * w0, 0.0, 0.0},
                          {0.6 * w0 + 0.6 * w1, 1.2 * w1, 0.0},
                          {0.2 * w0, 0.3 * w0 + 0.2 * w1, 0.5 * w0 + 0.4 * w1}};
  const auto f = fuse_layer(a, g, 0.5);
  EXPECT_NEAR(f.head_weights[0], w0, 1e-14);
  for (int i = 0; i < 3; ++i) {
    const double s = e[i][0] + e[i][1] + e[i][2];
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(f.fused(i, j), e[i][j] / s, 1e-14) << i << j;
  }
}

TEST(FuseLayer, MeanModeUsesUniformWeights) {
  XorShift64Star rng(6);
  std::vector<Matrix> a, g;
  for (int h = 0; h < 4; ++h) {
    a.push_back(random_matrix(rng, 3, 0.0, 1.0));
    g.push_back(random_matrix(rng, 3, -1.0, 1.0));
  }
  const auto f = fuse_layer(a, g, 0.5, HeadFusion::Mean);
  for (double w : f.head_weights) EXPECT_DOUBLE_EQ(w, 0.25);
}

TEST(FuseLayer, InvariantsOnRandomInputs) {
  XorShift64Star rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Matrix> a, g;
    const std::size_t heads = 1 + rng.below(4), n = 2 + rng.below(6);
    for (std::size_t h = 0; h < heads; ++h) {
      a.push_back(random_matrix(rng, n, 0.0, 1.0));
      g.push_back(random_matrix(rng, n, -1.0, 1.0));
    }
    const auto f = fuse_layer(a, g, 0.5);
    EXPECT_NEAR(sum(f.head_weights), 1.0, 1e-12);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (double v : f.fused.row(i)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_TRUE(s == 0.0 || std::abs(s - 1.0) < 1e-12) << s;
    }
  }
}

namespace {

// Trace with L layers, one head, fixed gradient magnitude per layer.
TraceBundle trace_with_layer_masses(const std::vector<float>& per_entry, std::size_t heads = 1) {
  TraceDims d{per_entry.size(), heads, 1, 1, 1};
  auto t = random_trace(1, d);
  const std::size_t nn = 9;
  for (std::size_t l = 0; l < d.layers; ++l)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t k = 0; k < nn; ++k) t.gradients[0][(l * heads + h) * nn + k] = per_entry[l];
  return t;
}

}  // namespace

TEST(LayerGradientNorms, SingleLayerIsOne) {
  const auto t = trace_with_layer_masses({0.3f});
  EXPECT_EQ(layer_gradient_norms(t, 2), std::vector<double>{1.0});
}

TEST(LayerGradientNorms, MassesThreeAndOne) {
  // 9 entries per layer: 9 * (1/3) = 3 and 9 * (1/9) = 1.
  const auto t = trace_with_layer_masses({1.0f / 3.0f, 1.0f / 9.0f});
  const auto n = layer_gradient_norms(t, 2);
  EXPECT_NEAR(n[0], 0.75, 1e-7);
  EXPECT_NEAR(n[1], 0.25, 1e-7);
}

TEST(LayerGradientNorms, OpposingHeadsCancelBeforeTheNorm) {
  TraceDims d{2, 2, 1, 1, 1};
  auto t = random_trace(2, d);
  for (std::size_t k = 0; k < 9; ++k) {
    t.gradients[0][0 * 9 + k] = 1.0f;   // layer 0 head 0
    t.gradients[0][1 * 9 + k] = -1.0f;  // layer 0 head 1
    t.gradients[0][2 * 9 + k] = 0.5f;   // layer 1 head 0
    t.gradients[0][3 * 9 + k] = 0.25f;  // layer 1 head 1
  }
  const auto n = layer_gradient_norms(t, 2);
  EXPECT_EQ(n[0], 0.0);
  EXPECT_EQ(n[1], 1.0);
}

TEST(LayerGradientNorms, RejectsNonGeneratedPosition) {
  const auto t = trace_with_layer_masses({1.0f});
  EXPECT_THROW(layer_gradient_norms(t, 0), Error);
}

TEST(DepthPrior, SingleLayer) { EXPECT_EQ(depth_prior(1, 0.2), std::vector<double>{1.0}); }

TEST(DepthPrior, TinySlopeIsUniform) {
  for (double v : depth_prior(5, 1e-9)) EXPECT_NEAR(v, 0.2, 1e-6);
}

TEST(DepthPrior, ThreeLayers) {
  const auto s = depth_prior(3, 0.2);
  const double e1 = std::exp(0.2), e2 = std::exp(0.4), e3 = std::exp(0.6), z = e1 + e2 + e3;
  EXPECT_NEAR(s[0], e1 / z, 1e-15);
  EXPECT_NEAR(s[1], e2 / z, 1e-15);
  EXPECT_NEAR(s[2], e3 / z, 1e-15);
  EXPECT_NEAR(s[0], 0.2693, 5e-5);
  EXPECT_NEAR(s[1], 0.3289, 5e-5);
  EXPECT_NEAR(s[2], 0.4018, 5e-5);
}

TEST(DepthPrior, StrictlyIncreasingAndSimplex) {
  for (std::size_t layers : {2u, 7u, 32u}) {
    const auto s = depth_prior(layers, 0.2);
    EXPECT_NEAR(sum(s), 1.0, 1e-12);
    for (std::size_t l = 1; l < layers; ++l) EXPECT_GT(s[l], s[l - 1]);
  }
  EXPECT_THROW(depth_prior(0, 0.2), Error);
  EXPECT_THROW(depth_prior(3, 0.0), Error);
}

TEST(LayerWeights, UniformInputsGiveUniformAlpha) {
  const std::vector<double> g(4, 0.25), s(4, 0.25);
  for (double a : layer_weights(g, s, {}).alpha) EXPECT_DOUBLE_EQ(a, 0.25);
}

TEST(LayerWeights, HandProducts) {
  const std::vector<double> g{0.75, 0.25}, s{0.4, 0.6};
  const auto w = layer_weights(g, s, {});
  EXPECT_NEAR(w.alpha[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(w.alpha[1], 1.0 / 3.0, 1e-15);
  EXPECT_FALSE(w.degenerate);
}

TEST(LayerWeights, BothTogglesOffIsUniform) {
  EngineConfig c;
  c.use_depth_prior = false;
  c.use_layer_relevance = false;
  const std::vector<double> g{0.9, 0.1, 0.0}, s{0.1, 0.2, 0.7};
  for (double a : layer_weights(g, s, c).alpha) EXPECT_DOUBLE_EQ(a, 1.0 / 3.0);
}

TEST(LayerWeights, DegenerateProductFallsBackToUniform) {
  const std::vector<double> g{0.0, 0.0}, s{0.5, 0.5};
  const auto w = layer_weights(g, s, {});
  EXPECT_TRUE(w.degenerate);
  EXPECT_DOUBLE_EQ(w.alpha[0], 0.5);
}

TEST(LayerWeights, NoDepthPriorEqualsExplicitUniformPrior) {
  const std::vector<double> g{0.5, 0.3, 0.2};
  EngineConfig off;
  off.use_depth_prior = false;
  const std::vector<double> uniform(3, 1.0 / 3.0), real = depth_prior(3, 0.2);
  const auto a = layer_weights(g, real, off).alpha;
  const auto b = layer_weights(g, uniform, {}).alpha;
  for (int l = 0; l < 3; ++l) EXPECT_NEAR(a[l], b[l], 1e-15);
}

TEST(RetainedLayers, CeilingWithFloor) {
  EXPECT_EQ(retained_layers(10, 1.0), 10u);
  EXPECT_EQ(retained_layers(10, 0.5), 5u);
  EXPECT_EQ(retained_layers(10, 0.55), 6u);
  EXPECT_EQ(retained_layers(5, 0.6), 3u);
  EXPECT_EQ(retained_layers(4, 0.01), 1u);
  for (std::size_t l = 1; l <= 40; ++l)
    for (double f : {0.1, 0.25, 0.3, 0.5, 0.7, 0.9, 1.0})
      EXPECT_EQ(retained_layers(l, f), oracle::kept_layers(l, f)) << l << " " << f;
}

TEST(Propagate, ZeroFusionGivesIdentity) {
  const std::vector<LayerFusion> f{{Matrix(4, 4), {1.0}}};
  LayerWeights w;
  w.alpha = {1.0};
  EXPECT_EQ(propagate(f, w, {}).relevance, Matrix::identity(4));
}

TEST(Propagate, SingleLayerIsIdentityPlusE) {
  XorShift64Star rng(8);
  auto e = random_matrix(rng, 5, 0.0, 1.0);
  normalize_rows(e);
  const std::vector<LayerFusion> f{{e, {1.0}}};
  LayerWeights w;
  w.alpha = {1.0};
  auto expect = e;
  for (std::size_t i = 0; i < 5; ++i) expect(i, i) += 1.0;
  expect_matrix_near(propagate(f, w, {}).relevance, expect, 1e-15);
}

TEST(Propagate, MatchesRationalOracleOnRandomThreeLayerStacks) {
  XorShift64Star rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<LayerFusion> f;
    std::vector<Matrix> e;
    for (int l = 0; l < 3; ++l) {
      auto m = random_matrix(rng, 6, 0.0, 1.0);
      normalize_rows(m);
      e.push_back(m);
      f.push_back({m, {}});
    }
    LayerWeights w;
    w.alpha = {rng.uniform(), rng.uniform(), rng.uniform()};
    const double s = sum(w.alpha);
    for (double& a : w.alpha) a /= s;
    const auto got = propagate(f, w, {}).relevance;
    const auto exact = oracle::rational_propagate(e, w.alpha, 3);
    for (std::size_t i = 0; i < 36; ++i) {
      EXPECT_LE(std::abs(got.data()[i] - exact.data()[i]), 1e-10 * std::max(1.0, std::abs(exact.data()[i])));
    }
  }
}

TEST(Propagate, PartialDepthRenormalizesOverRetainedLayers) {
  XorShift64Star rng(10);
  std::vector<LayerFusion> f;
  std::vector<Matrix> e;
  for (int l = 0; l < 4; ++l) {
    auto m = random_matrix(rng, 5, 0.0, 1.0);
    normalize_rows(m);
    e.push_back(m);
    f.push_back({m, {}});
  }
  LayerWeights w;
  w.alpha = {0.1, 0.2, 0.3, 0.4};
  EngineConfig c;
  c.layer_fraction = 0.5;
  const auto got = propagate(f, w, c).relevance;
  expect_matrix_near(got, oracle::rational_propagate(e, w.alpha, 2), 1e-12);
}

TEST(Propagate, LiteralRuleDoublesPerLayer) {
  XorShift64Star rng(11);
  auto e = random_matrix(rng, 3, 0.0, 1.0);
  normalize_rows(e);
  const std::vector<LayerFusion> f{{e, {}}, {e, {}}};
  LayerWeights w;
  w.alpha = {0.5, 0.5};
  EngineConfig c;
  c.update_rule = UpdateRule::Literal;
  // Each step: R <- 2R + a E R.
  oracle::Mat r = oracle::eye(3);
  const auto em = oracle::from(e);
  for (int l = 0; l < 2; ++l) {
    const auto er = oracle::product(em, r);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r[i][j] = 2.0 * r[i][j] + 0.5 * er[i][j];
  }
  expect_matrix_near(propagate(f, w, c).relevance, r, 1e-14);
}

TEST(Propagate, ShapeErrors) {
  LayerWeights w;
  w.alpha = {0.5, 0.5};
  const std::vector<LayerFusion> one{{Matrix(3, 3), {}}};
  EXPECT_THROW(propagate(one, w, {}), Error);
  const std::vector<LayerFusion> mixed{{Matrix(3, 3), {}}, {Matrix(4, 4), {}}};
  EXPECT_THROW(propagate(mixed, w, {}), Error);
}

TEST(RelevanceForToken, MatchesNaivePipeline) {
  XorShift64Star rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = glimpse::testing::random_dims(rng, 8, 4, 4);
    const auto t = random_trace(100 + trial, d);
    EngineConfig c;
    oracle::Knobs k;
    if (trial % 3 == 1) {
      c.layer_fraction = k.layer_fraction = 0.5;
      c.fusion_temperature = k.fusion_temperature = 0.3;
    }
    if (trial % 3 == 2) {
      c.use_depth_prior = k.use_depth_prior = false;
      c.depth_temperature = k.depth_temperature = 0.7;
    }
    for (std::size_t o = 0; o < d.generated; ++o) {
      const auto got = relevance_for_token(t, d.generated_position(o), c);
      EXPECT_EQ(got.target_token, d.generated_position(o));
      expect_matrix_near(got.relevance, oracle::relevance(t, o, k), 1e-12);
    }
  }
}

namespace {

SynthSpec grounded_spec(std::size_t sinks) {
  SynthSpec s;
  s.dims = {8, 4, 64, 6, 8};
  s.planted_patches = {12, 45};
  s.hallucination_rate = 0.0;
  s.attention_sinks = sinks;
  s.seed = 4;
  return s;
}

}  // namespace

TEST(RelevanceForToken, PlantedPatchWinsTheVisualRowWithoutSinks) {
  const auto s = grounded_spec(0);
  const auto t = synth_trace(s);
  for (std::size_t o = 0; o < s.dims.generated; ++o) {
    const auto r = relevance_for_token(t, s.dims.generated_position(o), {});
    const auto row = r.relevance.row(r.target_token).subspan(0, s.dims.visual);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    EXPECT_TRUE(best == 12 || best == 45) << "token " << o << " peaks at " << best;
  }
}

TEST(RelevanceForToken, SinksAsideThePlantedPatchesLead) {
  // Two attention sinks soak up raw attention; the planted patches come next.
  const auto s = grounded_spec(2);
  const auto t = synth_trace(s);
  const auto rel = relevance_for_all_tokens(t, {});
  std::vector<double> total(s.dims.visual, 0.0);
  for (const auto& r : rel)
    for (std::size_t j = 0; j < s.dims.visual; ++j) total[j] += r.relevance(r.target_token, j);
  std::vector<std::size_t> order(s.dims.visual);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return total[a] > total[b]; });
  const std::vector<std::size_t> top(order.begin(), order.begin() + 4);
  EXPECT_NE(std::find(top.begin(), top.end(), 12), top.end());
  EXPECT_NE(std::find(top.begin(), top.end(), 45), top.end());
}

TEST(RelevanceForToken, ZeroGradientsGiveIdentity) {
  auto t = random_trace(13, {3, 2, 4, 2, 2});
  for (auto& g : t.gradients) std::fill(g.begin(), g.end(), 0.0f);
  EXPECT_EQ(relevance_for_token(t, 7, {}).relevance, Matrix::identity(8));
}

TEST(RelevanceForToken, HeadOrderDoesNotMatter) {
  const auto t = random_trace(14, {2, 3, 4, 2, 2});
  auto swapped = t;
  const std::size_t nn = 64;
  auto swap_heads = [&](std::vector<float>& v) {
    for (std::size_t l = 0; l < 2; ++l)
      std::swap_ranges(v.begin() + (l * 3 + 0) * nn, v.begin() + (l * 3 + 1) * nn, v.begin() + (l * 3 + 2) * nn);
  };
  swap_heads(swapped.attention);
  for (auto& g : swapped.gradients) swap_heads(g);
  expect_matrix_near(relevance_for_token(t, 6, {}).relevance, relevance_for_token(swapped, 6, {}).relevance, 1e-13);
}

TEST(RelevanceForAllTokens, ThreadCountDoesNotChangeResults) {
  const auto t = random_trace(15, {3, 2, 6, 3, 5});
  const auto a = relevance_for_all_tokens(t, {}, 1);
  const auto b = relevance_for_all_tokens(t, {}, 3);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t o = 0; o < a.size(); ++o) EXPECT_EQ(a[o].relevance, b[o].relevance);
}

TEST(EngineConfig, RejectsBadValues) {
  EngineConfig c;
  c.fusion_temperature = 0.0;
  EXPECT_THROW(check_engine_config(c), Error);
  c = {};
  c.layer_fraction = 0.0;
  EXPECT_THROW(check_engine_config(c), Error);
  c = {};
  c.layer_fraction = 1.5;
  EXPECT_THROW(check_engine_config(c), Error);
  c = {};
  c.propagation_gain = -1.0;
  EXPECT_THROW(check_engine_config(c), Error);
  EXPECT_NO_THROW(check_engine_config({}));
}
