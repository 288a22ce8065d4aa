// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "glimpse/config.hpp"
#include "glimpse/error.hpp"

namespace glimpse::cli {

// Stable process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 1,   // bad input, failed validation, usage error
  kExitIo = 2,      // cannot read or write files
  kExitOracle = 3,  // confidence oracle unreachable or misbehaving
};

int exit_code(ErrorCode code) noexcept;

/// Full command line, args[0] being the program name.
int run(const std::vector<std::string>& args);

/// Human-readable (default) or JSON-lines logging on stderr.
void setup_logging(bool json, const std::string& level = "info");

namespace fs = std::filesystem;

/// Writes under out_dir/<trace_id>/.
int cmd_explain(const fs::path& trace_dir, const fs::path& out_dir, const ConfigBuilder& config);
/// Writes under out_dir/<trace_id>/baselines/<kind>/. kind "all" expands to
/// raw, rollout, gradcam, tmme and tmme_last<k>.
int cmd_baseline(const fs::path& trace_dir, const std::string& kind, const fs::path& out_dir,
                 const ConfigBuilder& config);
int cmd_eval_align(const fs::path& corpus, const std::string& method, const fs::path& out_dir,
                   const ConfigBuilder& config);
int cmd_eval_faith(const fs::path& corpus, const std::string& method, bool synthetic_oracle,
                   const fs::path& out_dir, const ConfigBuilder& config);
/// Without corpus_size: one trace under out_dir/<id>. With it: that many
/// members plus out_dir/corpus.json.
int cmd_synth(const fs::path& spec_file, const fs::path& out_dir,
              std::optional<std::size_t> corpus_size);
/// Prints the validation report as JSON to `out`.
int cmd_validate(const fs::path& trace_dir, std::ostream& out);
/// Serves the synthetic oracle for a trace dir or corpus manifest, either on
/// TCP (port 0 picks one; the bound address is printed) or over stdin/stdout.
int cmd_serve_oracle(const fs::path& source, std::uint16_t port, bool stdio);

}  // namespace glimpse::cli
