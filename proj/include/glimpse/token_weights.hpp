// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "glimpse/matrix.hpp"
#include "glimpse/relevance.hpp"
#include "glimpse/trace.hpp"

namespace glimpse {

enum class FlowDonors {
  FunctionWords,  // only mask-flagged tokens donate
  AllTokens,      // every generated token donates
};

struct TokenConfig {
  bool use_token_confidence = true;
  bool use_prompt_weighting = true;  // a_t weights the visual map
  bool use_visual_weighting = true;  // v_t weights the prompt map
  bool drop_punctuation = false;
  bool flow_display = true;
  double flow_lambda = 0.5;
  FlowDonors flow_donors = FlowDonors::FunctionWords;
};

struct SimplexWeights {
  std::vector<double> values;
  bool degenerate = false;  // every product was zero; values are uniform
};

/// Per generated token, in generation order.
struct TokenWeightTable {
  std::vector<std::size_t> positions;
  std::vector<double> prompt_alignment;  // a_t
  std::vector<double> visual_alignment;  // v_t
  std::vector<double> confidence;        // p_t as used (1 when disabled)
  std::vector<double> beta_visual;
  std::vector<double> beta_prompt;
  std::vector<double> gamma;

  // Display-only values after relevance flow; aggregation never reads these.
  bool flow_applied = false;
  double flow_lambda = 0.0;
  std::optional<std::vector<double>> beta_visual_flowed;
  std::optional<std::vector<double>> beta_prompt_flowed;
  std::optional<std::vector<double>> gamma_flowed;
};

/// Mean of the target row over prompt columns.
double prompt_alignment(const RelevanceMatrix& r, const TraceDims& dims);
/// Mean of the target row over visual columns.
double visual_alignment(const RelevanceMatrix& r, const TraceDims& dims);

/// beta_t = p_t w_t / sum_k p_k w_k; uniform (flagged) when every product is 0.
SimplexWeights combined_weights(std::span<const double> alignment,
                                std::span<const double> confidence);

/// gamma_t = sqrt(beta_v * beta_p).
std::vector<double> joint_relevance(std::span<const double> beta_visual,
                                    std::span<const double> beta_prompt);

/// T x T matrix whose (j, i) entry is R_j(pos_j, pos_i): how much generated
/// token j relies on generated token i, read from token j's own relevance.
Matrix token_relevance(std::span<const RelevanceMatrix> relevances, const TraceDims& dims);

/// Normalized influence F(i, j) = rel(j, i) / sum_{k > i} rel(k, i) for j > i;
/// rows with a zero denominator are all zero.
Matrix flow_fractions(const Matrix& token_rel);

/// beta'_t = beta_t + lambda * sum_{donor i < t} beta_i F(i, t), then L1
/// normalized. lambda == 0 returns beta unchanged.
std::vector<double> flow_redistribute(const Matrix& token_rel, std::span<const double> beta,
                                      double lambda, const std::vector<bool>& donors);

TokenWeightTable build_token_table(const TraceBundle& trace,
                                   std::span<const RelevanceMatrix> relevances,
                                   const TokenConfig& config);

}  // namespace glimpse
