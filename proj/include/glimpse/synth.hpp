// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glimpse/matrix.hpp"
#include "glimpse/trace.hpp"

namespace glimpse {

/// Recipe for a planted-signal synthetic trace.
///
/// Generated tokens are either grounded (high confidence, gradients push
/// positive mass onto the planted patches) or hallucinated (low confidence,
/// gradients push onto decoy patches). Early layers carry larger, unstructured
/// gradient noise; the planted signal grows with depth. Attention is random
/// causal softmax with a few sink patches and never looks at the planted set.
struct SynthSpec {
  std::string id = "synth";
  TraceDims dims{4, 2, 16, 4, 4};
  PatchGrid grid{};  // rows = cols = 0 picks a near-square factorization of K
  std::vector<std::size_t> planted_patches;
  double signal_strength = 12.0;
  // Radius, in patches, of the object around each planted patch. The gradient
  // signal falls off as 1 / (1 + d^2 / spread^2)^2; 0 keeps it on the patch.
  double signal_spread = 1.0;
  double human_spread = 1.0;  // same profile for simulated fixations
  std::uint64_t seed = 0;

  double hallucination_rate = 0.25;
  std::size_t decoy_count = 2;
  std::size_t attention_sinks = 2;
  double deep_noise = 0.5;
  double early_noise = 2.0;
};

/// Throws Error{InvalidSpec} on an invalid recipe.
void check_synth_spec(const SynthSpec& spec);

/// Deterministic for a fixed spec; bit-identical across platforms.
TraceBundle synth_trace(const SynthSpec& spec);

/// Pixel-resolution human attention density (4x4 pixels per patch), the
/// average of three jittered annotator maps centred on the planted patches.
Matrix synth_human_map(const SynthSpec& spec, std::size_t pixels_per_patch = 4);

/// Resolved patch grid (explicit or near-square default).
PatchGrid synth_grid(const SynthSpec& spec);

/// Corpus member `index`: same recipe, fresh seed and a random planted set of
/// the same size.
SynthSpec corpus_member(const SynthSpec& base, std::size_t index);

std::string synth_spec_to_json(const SynthSpec& spec);
/// Throws Error{InvalidSpec} on malformed input.
SynthSpec synth_spec_from_json(const std::string& text);

}  // namespace glimpse
