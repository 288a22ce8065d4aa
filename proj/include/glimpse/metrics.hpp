// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "glimpse/matrix.hpp"
#include "glimpse/trace.hpp"

namespace glimpse {

struct HumanAttentionMap {
  Matrix grid;
  std::size_t source_count = 1;
};

/// CSV float grid (.csv) or 8-bit PGM (.pgm). Throws MissingFile / IoFailure /
/// DegenerateInput (all-zero map).
HumanAttentionMap load_human_map(const std::filesystem::path& path,
                                 std::size_t source_count = 3);

/// Area-weighted mean pooling to the patch grid. Throws ShapeMismatch when the
/// map is smaller than the grid in either dimension.
Matrix pool_human_map(const HumanAttentionMap& map, PatchGrid grid);

/// Linear interpolation between order statistics; theta in [0, 100].
double percentile(std::span<const double> values, double theta);

/// Mean z-scored saliency (population sigma) over cells whose human value is
/// at or above the theta-th percentile. Throws ShapeMismatch,
/// DegenerateSaliency when saliency is constant.
double nss(const Matrix& saliency, const Matrix& human, double theta = 95.0);

/// Average ranks (1-based), ties share the mean rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rho with tie-averaged ranks. Throws ShapeMismatch, DegenerateInput
/// when either grid is constant or has fewer than two cells.
double spearman(const Matrix& saliency, const Matrix& human);

struct AlignmentScore {
  double nss = 0.0;
  double spearman = 0.0;
};

AlignmentScore alignment(const Matrix& saliency, const Matrix& human, double theta = 95.0);

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;  // standard error of the mean (sample sd / sqrt(n))
  std::size_t n = 0;
};

MeanStderr mean_stderr(std::span<const double> values);

struct CorpusSummary {
  MeanStderr nss;
  MeanStderr spearman;
};

/// Requires at least two samples (InvalidArgument otherwise).
CorpusSummary aggregate_corpus(std::span<const AlignmentScore> scores);

}  // namespace glimpse

namespace glimpse {

struct SignTest {
  std::size_t wins = 0;    // a > b
  std::size_t losses = 0;  // a < b
  std::size_t ties = 0;
  double p_value = 1.0;    // one-sided P(X >= wins), X ~ Binomial(wins + losses, 1/2)
};

/// Paired one-sided sign test that `a` exceeds `b`; ties are dropped.
SignTest paired_sign_test(std::span<const double> a, std::span<const double> b);

}  // namespace glimpse
