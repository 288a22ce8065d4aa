// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "glimpse/config.hpp"
#include "glimpse/faithfulness.hpp"
#include "glimpse/matrix.hpp"
#include "glimpse/synth.hpp"
#include "glimpse/trace.hpp"

namespace glimpse {

struct CorpusEntry {
  std::filesystem::path trace_dir;
  std::filesystem::path human_map_path;  // may be empty
};

/// JSON list of {trace_dir, human_map_path}; relative paths resolve against
/// the manifest's directory. Throws MissingFile / CorruptManifest.
std::vector<CorpusEntry> load_corpus_manifest(const std::filesystem::path& path);
void save_corpus_manifest(const std::vector<CorpusEntry>& entries,
                          const std::filesystem::path& path);

/// "glimpse" or a baseline name (raw, rollout, gradcam, tmme, tmme_last<k>).
bool is_known_method(std::string_view method);

/// Patch-grid saliency for one method. `tmme` honours config.last_k.
Matrix method_saliency(const TraceBundle& trace, std::string_view method,
                       const RunConfig& config, unsigned jobs = 1);

struct FaithfulnessCurves {
  std::vector<PerturbationCurve> deletion;
  std::vector<PerturbationCurve> insertion;
};

FaithfulnessCurves evaluate_faithfulness(const TraceBundle& trace, const Matrix& saliency,
                                         ConfidenceOracle& oracle, const CurveOptions& options);

/// Reads the generating spec that `glimpse synth` leaves next to a trace.
SynthSpec load_synth_sidecar(const std::filesystem::path& trace_dir);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// stops further scheduling and is rethrown after all workers finish.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace glimpse
