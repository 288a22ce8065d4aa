// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "glimpse/matrix.hpp"
#include "glimpse/trace.hpp"

namespace glimpse {

// Comparison explainers, each adapted to the whole response by averaging the
// per-token maps with equal weight.

enum class BaselineType { RawAttention, Rollout, GradCamStyle, TmmeVanilla, TmmeLastK };

struct BaselineKind {
  BaselineType type = BaselineType::RawAttention;
  std::size_t last_k = 0;  // TmmeLastK only

  /// Directory / CLI name: raw, rollout, gradcam, tmme, tmme_last<k>.
  std::string name() const;
};

/// Parses "raw", "rollout", "gradcam", "tmme" (with optional last_k) or
/// "tmme_last12". Throws InvalidArgument on unknown names.
BaselineKind parse_baseline(std::string_view name, std::optional<std::size_t> last_k = {});

/// Layer- and head-mean attention from generated rows onto visual columns.
Matrix raw_attention_map(const TraceBundle& trace);

/// Rollout of row-normalized 0.5*A + 0.5*I over all layers.
Matrix attention_rollout_map(const TraceBundle& trace);

/// ReLU(head-mean(g ⊙ A)) of the final layer, per token.
Matrix grad_cam_style_map(const TraceBundle& trace);

/// Unit-weight additive propagation of head-mean ReLU(g ⊙ A) over all layers,
/// or the deepest `last_k`. Throws InvalidK when last_k is outside [1, L].
Matrix tmme_map(const TraceBundle& trace, std::optional<std::size_t> last_k = {});

Matrix baseline_map(const TraceBundle& trace, const BaselineKind& kind);

}  // namespace glimpse
