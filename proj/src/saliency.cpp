// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/saliency.hpp"

#include <fmt/format.h>

#include "glimpse/error.hpp"

namespace glimpse {

std::vector<double> aggregate(std::span<const RelevanceMatrix> relevances,
                              std::span<const double> beta, IndexRange columns) {
  if (relevances.size() != beta.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{} relevance rows for {} token weights", relevances.size(), beta.size()));
  }
  std::vector<double> out(columns.size(), 0.0);
  for (std::size_t t = 0; t < relevances.size(); ++t) {
    const auto& r = relevances[t];
    if (columns.end > r.relevance.cols() || r.target_token >= r.relevance.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "aggregation columns exceed relevance matrix");
    }
    const auto row = r.relevance.row(r.target_token);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += beta[t] * row[columns.begin + i];
  }
  return out;
}

std::vector<double> aggregate(const TraceBundle& trace,
                              std::span<const RelevanceMatrix> relevances,
                              const TokenWeightTable& table, Modality modality) {
  return modality == Modality::Visual
             ? aggregate(relevances, table.beta_visual, trace.dims.visual_range())
             : aggregate(relevances, table.beta_prompt, trace.dims.prompt_range());
}

Matrix project_to_grid(std::span<const double> values, PatchGrid grid) {
  if (grid.cells() != values.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("grid {}x{} cannot hold {} values", grid.rows, grid.cols, values.size()));
  }
  Matrix out(grid.rows, grid.cols);
  std::copy(values.begin(), values.end(), out.data().begin());
  return out;
}

std::vector<double> flatten(const Matrix& grid) {
  return {grid.data().begin(), grid.data().end()};
}

SaliencyResult explain(const TraceBundle& trace, const EngineConfig& engine,
                       const TokenConfig& tokens, unsigned jobs) {
  const auto relevances = relevance_for_all_tokens(trace, engine, jobs);
  SaliencyResult result;
  result.trace_id = trace.id;
  result.tokens = build_token_table(trace, relevances, tokens);
  result.visual = project_to_grid(aggregate(trace, relevances, result.tokens, Modality::Visual),
                                  trace.patch_grid);
  result.prompt = aggregate(trace, relevances, result.tokens, Modality::Prompt);
  result.token_gamma = result.tokens.gamma;
  result.token_gamma_flowed = result.tokens.gamma_flowed;
  result.engine = engine;
  result.token_config = tokens;
  return result;
}

}  // namespace glimpse
