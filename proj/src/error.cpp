// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/error.hpp"

namespace glimpse {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::CorruptManifest: return "CorruptManifest";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::DegenerateSaliency: return "DegenerateSaliency";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OracleUnavailable: return "OracleUnavailable";
    case ErrorCode::OracleMalformed: return "OracleMalformed";
  }
  return "Unknown";
}

}  // namespace glimpse
