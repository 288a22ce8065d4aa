// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace glimpse {

enum class ErrorCode {
  MissingFile,
  ShapeMismatch,
  CorruptManifest,
  VersionUnsupported,
  InvalidSpec,
  IoFailure,
  DegenerateSaliency,
  DegenerateInput,
  InvalidK,
  InvalidArgument,
  OracleUnavailable,
  OracleMalformed,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a stable error code; the CLI maps codes to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace glimpse
