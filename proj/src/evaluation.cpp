// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/evaluation.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "glimpse/baselines.hpp"
#include "glimpse/error.hpp"
#include "glimpse/saliency.hpp"

namespace glimpse {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<CorpusEntry> load_corpus_manifest(const fs::path& path) {
  const auto text = read_text(path);
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path q(p);
    return q.is_absolute() || base.empty() ? q : base / q;
  };
  std::vector<CorpusEntry> out;
  try {
    const json j = json::parse(text);
    if (!j.is_array()) throw Error(ErrorCode::CorruptManifest, "corpus manifest must be a JSON list");
    for (const auto& item : j) {
      CorpusEntry e;
      e.trace_dir = resolve(item.at("trace_dir").get<std::string>());
      if (item.contains("human_map_path") && !item["human_map_path"].is_null()) {
        e.human_map_path = resolve(item["human_map_path"].get<std::string>());
      }
      out.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest,
                fmt::format("corpus manifest {}: {}", path.string(), e.what()));
  }
  return out;
}

void save_corpus_manifest(const std::vector<CorpusEntry>& entries, const fs::path& path) {
  const auto base = path.parent_path();
  json j = json::array();
  for (const auto& e : entries) {
    auto rel = [&](const fs::path& p) {
      return (base.empty() ? p : p.lexically_relative(base)).generic_string();
    };
    j.push_back({{"trace_dir", rel(e.trace_dir)},
                 {"human_map_path", e.human_map_path.empty() ? json(nullptr) : json(rel(e.human_map_path))}});
  }
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::IoFailure, fmt::format("cannot write {}", path.string()));
}

bool is_known_method(std::string_view method) {
  if (method == "glimpse") return true;
  try {
    parse_baseline(method);
    return true;
  } catch (const Error&) {
    return false;
  }
}

Matrix method_saliency(const TraceBundle& trace, std::string_view method, const RunConfig& config,
                       unsigned jobs) {
  if (method == "glimpse") return explain(trace, config.engine, config.tokens, jobs).visual;
  const auto kind = method == "tmme" ? parse_baseline(method, config.last_k) : parse_baseline(method);
  return baseline_map(trace, kind);
}

FaithfulnessCurves evaluate_faithfulness(const TraceBundle& trace, const Matrix& saliency,
                                         ConfidenceOracle& oracle, const CurveOptions& options) {
  const auto ranking = perturbation_ranking(saliency);
  FaithfulnessCurves out;
  out.deletion = run_curves(trace.id, trace.dims.visual, ranking, PerturbationMode::Deletion, oracle, options);
  out.insertion = run_curves(trace.id, trace.dims.visual, ranking, PerturbationMode::Insertion, oracle, options);
  return out;
}

SynthSpec load_synth_sidecar(const fs::path& trace_dir) {
  return synth_spec_from_json(read_text(trace_dir / "synth.json"));
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, jobs), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mutex);
            if (!first) first = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace glimpse
