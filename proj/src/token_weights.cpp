// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/token_weights.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "glimpse/error.hpp"
#include "glimpse/stopwords.hpp"

namespace glimpse {

namespace {

double row_mean(const RelevanceMatrix& r, IndexRange cols) {
  if (cols.size() == 0) return 0.0;
  const auto row = r.relevance.row(r.target_token);
  double total = 0.0;
  for (std::size_t i = cols.begin; i < cols.end; ++i) total += row[i];
  return total / static_cast<double>(cols.size());
}

}  // namespace

double prompt_alignment(const RelevanceMatrix& r, const TraceDims& dims) {
  return row_mean(r, dims.prompt_range());
}

double visual_alignment(const RelevanceMatrix& r, const TraceDims& dims) {
  return row_mean(r, dims.visual_range());
}

SimplexWeights combined_weights(std::span<const double> alignment,
                                std::span<const double> confidence) {
  if (alignment.size() != confidence.size()) {
    throw Error(ErrorCode::ShapeMismatch, "alignment and confidence lengths differ");
  }
  SimplexWeights out;
  out.values.resize(alignment.size());
  double total = 0.0;
  for (std::size_t t = 0; t < alignment.size(); ++t) {
    out.values[t] = confidence[t] * alignment[t];
    total += out.values[t];
  }
  if (!(total > 0.0)) {
    spdlog::warn("token weights degenerate (all confidence x alignment products are zero); "
                 "using uniform weights");
    const double u = alignment.empty() ? 0.0 : 1.0 / static_cast<double>(alignment.size());
    std::fill(out.values.begin(), out.values.end(), u);
    out.degenerate = true;
    return out;
  }
  for (double& v : out.values) v /= total;
  return out;
}

std::vector<double> joint_relevance(std::span<const double> beta_visual,
                                    std::span<const double> beta_prompt) {
  if (beta_visual.size() != beta_prompt.size()) {
    throw Error(ErrorCode::ShapeMismatch, "beta vectors differ in length");
  }
  std::vector<double> out(beta_visual.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = std::sqrt(beta_visual[t] * beta_prompt[t]);
  return out;
}

Matrix token_relevance(std::span<const RelevanceMatrix> relevances, const TraceDims& dims) {
  const std::size_t count = relevances.size();
  Matrix out(count, count);
  for (std::size_t j = 0; j < count; ++j) {
    const auto& r = relevances[j];
    if (r.relevance.rows() != dims.length() || r.relevance.cols() != dims.length()) {
      throw Error(ErrorCode::ShapeMismatch, "relevance matrix does not match trace dims");
    }
    const auto row = r.relevance.row(r.target_token);
    for (std::size_t i = 0; i < count; ++i) out(j, i) = row[dims.generated_position(i)];
  }
  return out;
}

Matrix flow_fractions(const Matrix& token_rel) {
  const std::size_t count = token_rel.rows();
  Matrix f(count, count);
  for (std::size_t i = 0; i < count; ++i) {
    double denom = 0.0;
    for (std::size_t k = i + 1; k < count; ++k) denom += token_rel(k, i);
    if (!(denom > 0.0)) continue;
    for (std::size_t j = i + 1; j < count; ++j) f(i, j) = token_rel(j, i) / denom;
  }
  return f;
}

std::vector<double> flow_redistribute(const Matrix& token_rel, std::span<const double> beta,
                                      double lambda, const std::vector<bool>& donors) {
  const std::size_t count = beta.size();
  if (token_rel.rows() != count || token_rel.cols() != count || donors.size() != count) {
    throw Error(ErrorCode::ShapeMismatch, "flow inputs disagree on token count");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "flow lambda must be in [0, 1]");
  }
  std::vector<double> out(beta.begin(), beta.end());
  if (lambda == 0.0) return out;

  const Matrix f = flow_fractions(token_rel);
  for (std::size_t i = 0; i < count; ++i) {
    if (!donors[i]) continue;
    for (std::size_t t = i + 1; t < count; ++t) out[t] += lambda * beta[i] * f(i, t);
  }
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (total > 0.0) {
    for (double& v : out) v /= total;
  }
  return out;
}

TokenWeightTable build_token_table(const TraceBundle& trace,
                                   std::span<const RelevanceMatrix> relevances,
                                   const TokenConfig& config) {
  const auto& d = trace.dims;
  if (relevances.size() != d.generated) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{} relevance matrices for T={}", relevances.size(), d.generated));
  }
  if (trace.confidences.size() != d.generated) {
    throw Error(ErrorCode::ShapeMismatch, "confidence count does not match T");
  }
  TokenWeightTable table;
  const std::size_t count = d.generated;
  table.positions.resize(count);
  table.prompt_alignment.resize(count);
  table.visual_alignment.resize(count);
  table.confidence.resize(count);
  for (std::size_t o = 0; o < count; ++o) {
    const auto& r = relevances[o];
    if (r.target_token != d.generated_position(o)) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("relevance {} targets position {}, expected {}", o, r.target_token,
                              d.generated_position(o)));
    }
    table.positions[o] = r.target_token;
    table.prompt_alignment[o] = prompt_alignment(r, d);
    table.visual_alignment[o] = visual_alignment(r, d);
    table.confidence[o] = config.use_token_confidence ? trace.confidences[o] : 1.0;
  }

  std::vector<double> w_visual = config.use_prompt_weighting
                                     ? table.prompt_alignment
                                     : std::vector<double>(count, 1.0);
  std::vector<double> w_prompt = config.use_visual_weighting
                                     ? table.visual_alignment
                                     : std::vector<double>(count, 1.0);
  if (config.drop_punctuation) {
    for (std::size_t o = 0; o < count; ++o) {
      if (is_punctuation(trace.token_texts.at(d.generated_position(o)))) {
        w_visual[o] = 0.0;
        w_prompt[o] = 0.0;
      }
    }
  }
  table.beta_visual = combined_weights(w_visual, table.confidence).values;
  table.beta_prompt = combined_weights(w_prompt, table.confidence).values;
  table.gamma = joint_relevance(table.beta_visual, table.beta_prompt);

  if (config.flow_display) {
    const Matrix rel = token_relevance(relevances, d);
    std::vector<bool> donors = trace.function_word_mask;
    if (config.flow_donors == FlowDonors::AllTokens) donors.assign(count, true);
    table.flow_applied = true;
    table.flow_lambda = config.flow_lambda;
    table.beta_visual_flowed = flow_redistribute(rel, table.beta_visual, config.flow_lambda, donors);
    table.beta_prompt_flowed = flow_redistribute(rel, table.beta_prompt, config.flow_lambda, donors);
    table.gamma_flowed = joint_relevance(*table.beta_visual_flowed, *table.beta_prompt_flowed);
  }
  return table;
}

}  // namespace glimpse
