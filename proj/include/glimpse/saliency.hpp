// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glimpse/matrix.hpp"
#include "glimpse/relevance.hpp"
#include "glimpse/token_weights.hpp"
#include "glimpse/trace.hpp"

namespace glimpse {

enum class Modality { Visual, Prompt };

struct SaliencyResult {
  std::string trace_id;
  Matrix visual;               // patch grid, rows x cols
  std::vector<double> prompt;  // M entries
  std::vector<double> token_gamma;
  std::optional<std::vector<double>> token_gamma_flowed;
  TokenWeightTable tokens;
  EngineConfig engine;
  TokenConfig token_config;
};

/// sum_t beta_t * R_t(pos_t, columns). Throws ShapeMismatch.
std::vector<double> aggregate(std::span<const RelevanceMatrix> relevances,
                              std::span<const double> beta, IndexRange columns);

/// Holistic map for one modality using the unflowed betas in `table`.
std::vector<double> aggregate(const TraceBundle& trace,
                              std::span<const RelevanceMatrix> relevances,
                              const TokenWeightTable& table, Modality modality);

/// Row-major reshape. Throws ShapeMismatch when rows * cols != values.size().
Matrix project_to_grid(std::span<const double> values, PatchGrid grid);

std::vector<double> flatten(const Matrix& grid);

/// Relevance, token weighting and aggregation for one trace.
SaliencyResult explain(const TraceBundle& trace, const EngineConfig& engine,
                       const TokenConfig& tokens, unsigned jobs = 1);

}  // namespace glimpse
