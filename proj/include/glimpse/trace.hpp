// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glimpse/matrix.hpp"

namespace glimpse {

inline constexpr const char* kTraceFormatVersion = "1";

/// Half-open range of sequence positions.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
};

/// Sequence geometry: [visual | prompt | generated], zero-based.
struct TraceDims {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t visual = 0;
  std::size_t prompt = 0;
  std::size_t generated = 0;

  std::size_t length() const noexcept { return visual + prompt + generated; }

  IndexRange visual_range() const noexcept { return {0, visual}; }
  IndexRange prompt_range() const noexcept { return {visual, visual + prompt}; }
  IndexRange generated_range() const noexcept {
    return {visual + prompt, length()};
  }

  /// Sequence position of the i-th generated token.
  std::size_t generated_position(std::size_t ordinal) const noexcept {
    return visual + prompt + ordinal;
  }

  /// Floats in one [L][H][N][N] tensor.
  std::size_t tensor_size() const noexcept {
    return layers * heads * length() * length();
  }

  friend bool operator==(const TraceDims&, const TraceDims&) = default;
};

struct PatchGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t cells() const noexcept { return rows * cols; }
  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

/// One generation episode. Immutable after construction by convention; every
/// engine operation takes it by const reference.
struct TraceBundle {
  std::string id;
  TraceDims dims;
  PatchGrid patch_grid;
  std::vector<std::string> token_texts;   // N entries
  std::vector<double> confidences;        // T entries, p_t
  std::vector<bool> function_word_mask;   // T entries
  std::optional<std::string> image_path;
  std::vector<float> attention;               // [L][H][N][N]
  std::vector<std::vector<float>> gradients;  // T x [L][H][N][N]

  std::span<const float> attention_block(std::size_t layer, std::size_t head) const;
  std::span<const float> gradient_block(std::size_t ordinal, std::size_t layer,
                                        std::size_t head) const;

  Matrix attention_matrix(std::size_t layer, std::size_t head) const;
  Matrix gradient_matrix(std::size_t ordinal, std::size_t layer, std::size_t head) const;

  friend bool operator==(const TraceBundle&, const TraceBundle&) = default;
};

struct Violation {
  std::string code;
  std::string message;
  std::string location;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

/// Reads `<dir>/manifest.json` and its float32 blobs.
/// Throws Error{MissingFile, CorruptManifest, VersionUnsupported, ShapeMismatch}.
TraceBundle load_trace(const std::filesystem::path& dir);

/// Writes the manifest and blobs, creating `dir` if needed. Throws IoFailure.
void save_trace(const TraceBundle& trace, const std::filesystem::path& dir);

/// Reports every invariant violation; never throws. `tol` bounds the
/// attention row-sum deviation from 1.
ValidationReport validate_trace(const TraceBundle& trace, double tol = 1e-4);

}  // namespace glimpse
