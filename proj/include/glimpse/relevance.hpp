// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "glimpse/matrix.hpp"
#include "glimpse/trace.hpp"

namespace glimpse {

enum class HeadFusion {
  Adaptive,  // softmax over positive-gradient expected attention
  Mean,      // uniform 1/H ("simple average" ablation)
};

enum class UpdateRule {
  Additive,  // R <- R + a E R
  Literal,   // R <- R + (I + a E) R, kept for A/B comparison only
};

struct EngineConfig {
  double fusion_temperature = 0.5;
  double depth_temperature = 0.2;
  double layer_fraction = 1.0;  // deepest ceil(fraction * L) layers are propagated
  bool use_depth_prior = true;
  bool use_layer_relevance = true;
  HeadFusion head_fusion = HeadFusion::Adaptive;
  UpdateRule update_rule = UpdateRule::Additive;
  // Multiplies every alpha during propagation. With uniform alpha, a gain of L
  // reproduces the unit-weight additive rule of the TMME baseline.
  double propagation_gain = 1.0;
};

/// Throws Error{InvalidArgument} when a field is out of range.
void check_engine_config(const EngineConfig& config);

struct LayerFusion {
  Matrix fused;                     // E, row-normalized
  std::vector<double> head_weights; // simplex over heads
};

struct LayerWeights {
  std::vector<double> grad_norms;   // normalized over layers
  std::vector<double> depth_prior;  // simplex
  std::vector<double> alpha;        // simplex
  bool degenerate = false;          // sum of g*s was zero; alpha fell back to uniform
};

struct RelevanceMatrix {
  Matrix relevance;          // N x N
  std::size_t target_token = 0;  // sequence position in the generated range
};

/// ReLU(g ⊙ A). Throws ShapeMismatch.
Matrix gradient_weighted_attention(const Matrix& attention, const Matrix& gradient);

/// Per-head expected attention under the positive-gradient distribution:
/// sum(G_h) / sum(ReLU(g_h)), or 0 when a head has no positive gradient.
std::vector<double> head_ratios(std::span<const Matrix> weighted,
                                std::span<const Matrix> gradients);

/// softmax(head_ratios / temperature).
std::vector<double> head_weights(std::span<const Matrix> weighted,
                                 std::span<const Matrix> gradients, double temperature);

/// Fuses one layer's heads into E. Throws ShapeMismatch.
LayerFusion fuse_layer(std::span<const Matrix> attention, std::span<const Matrix> gradients,
                       double temperature, HeadFusion mode = HeadFusion::Adaptive);

/// L1 norm of the head-summed gradient per layer, normalized over layers
/// (uniform when every layer is zero). `position` must be a generated token.
std::vector<double> layer_gradient_norms(const TraceBundle& trace, std::size_t position);

/// softmax(temperature * (l + 1)) over l = 0..layers-1.
std::vector<double> depth_prior(std::size_t layers, double temperature);

LayerWeights layer_weights(std::span<const double> grad_norms,
                           std::span<const double> prior, const EngineConfig& config);

/// Number of deepest layers retained for a given fraction.
std::size_t retained_layers(std::size_t layers, double fraction);

/// Identity-seeded additive propagation over the retained layers, shallow to
/// deep. Throws ShapeMismatch.
RelevanceMatrix propagate(std::span<const LayerFusion> fusions, const LayerWeights& weights,
                          const EngineConfig& config, std::size_t target_token = 0);

/// Full pipeline for one generated token (sequence position).
RelevanceMatrix relevance_for_token(const TraceBundle& trace, std::size_t position,
                                    const EngineConfig& config);

/// relevance_for_token for every generated token, in order. `jobs` > 1 runs
/// tokens on worker threads; the result is identical either way.
std::vector<RelevanceMatrix> relevance_for_all_tokens(const TraceBundle& trace,
                                                      const EngineConfig& config,
                                                      unsigned jobs = 1);

}  // namespace glimpse
