// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/trace.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "glimpse/error.hpp"

namespace glimpse {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "blob I/O assumes a little-endian host");

std::span<const float> TraceBundle::attention_block(std::size_t layer,
                                                    std::size_t head) const {
  const std::size_t n = dims.length();
  const std::size_t offset = (layer * dims.heads + head) * n * n;
  return std::span<const float>(attention).subspan(offset, n * n);
}

std::span<const float> TraceBundle::gradient_block(std::size_t ordinal,
                                                   std::size_t layer,
                                                   std::size_t head) const {
  const std::size_t n = dims.length();
  const std::size_t offset = (layer * dims.heads + head) * n * n;
  return std::span<const float>(gradients.at(ordinal)).subspan(offset, n * n);
}

Matrix TraceBundle::attention_matrix(std::size_t layer, std::size_t head) const {
  const std::size_t n = dims.length();
  return Matrix::from_floats(attention_block(layer, head), n, n);
}

Matrix TraceBundle::gradient_matrix(std::size_t ordinal, std::size_t layer,
                                    std::size_t head) const {
  const std::size_t n = dims.length();
  return Matrix::from_floats(gradient_block(ordinal, layer, head), n, n);
}

namespace {

std::string gradient_blob_name(std::size_t ordinal) {
  return fmt::format("grad_{:03d}.bin", ordinal);
}

std::vector<float> read_blob(const fs::path& path, std::size_t expected_floats) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::MissingFile, "missing blob: " + path.string());
  }
  const auto bytes = fs::file_size(path, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot stat " + path.string());
  if (bytes != expected_floats * sizeof(float)) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{}: expected {} bytes from manifest dims, found {}",
                            path.string(), expected_floats * sizeof(float), bytes));
  }
  std::vector<float> out(expected_floats);
  std::ifstream in(path, std::ios::binary);
  if (!in.read(reinterpret_cast<char*>(out.data()),
               static_cast<std::streamsize>(bytes))) {
    throw Error(ErrorCode::IoFailure, "short read: " + path.string());
  }
  return out;
}

void write_blob(const fs::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw Error(ErrorCode::CorruptManifest, fmt::format("manifest missing '{}'", key));
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptManifest,
                fmt::format("manifest field '{}': {}", key, e.what()));
  }
}

}  // namespace

TraceBundle load_trace(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::MissingFile, "missing manifest: " + manifest_path.string());

  json m;
  try {
    in >> m;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::CorruptManifest,
                fmt::format("{}: {}", manifest_path.string(), e.what()));
  }
  if (!m.is_object()) throw Error(ErrorCode::CorruptManifest, "manifest is not an object");

  const auto version = field<std::string>(m, "format_version");
  if (version != kTraceFormatVersion) {
    throw Error(ErrorCode::VersionUnsupported,
                fmt::format("trace format_version '{}' unsupported (reader supports '{}')",
                            version, kTraceFormatVersion));
  }

  TraceBundle t;
  t.id = field<std::string>(m, "id");
  const auto dims = field<json>(m, "dims");
  t.dims.layers = field<std::size_t>(dims, "L");
  t.dims.heads = field<std::size_t>(dims, "H");
  t.dims.visual = field<std::size_t>(dims, "K");
  t.dims.prompt = field<std::size_t>(dims, "M");
  t.dims.generated = field<std::size_t>(dims, "T");
  if (dims.contains("N") && dims["N"].get<std::size_t>() != t.dims.length()) {
    throw Error(ErrorCode::ShapeMismatch, "manifest N disagrees with K + M + T");
  }
  const auto grid = field<json>(m, "patch_grid");
  t.patch_grid.rows = field<std::size_t>(grid, "rows");
  t.patch_grid.cols = field<std::size_t>(grid, "cols");
  t.token_texts = field<std::vector<std::string>>(m, "token_texts");
  t.confidences = field<std::vector<double>>(m, "confidences");
  t.function_word_mask = field<std::vector<bool>>(m, "function_word_mask");
  if (m.contains("image_path") && !m["image_path"].is_null()) {
    t.image_path = field<std::string>(m, "image_path");
  }

  const auto blobs = field<json>(m, "blobs");
  const auto attn_name = field<std::string>(blobs, "attention");
  const auto grad_names = field<std::vector<std::string>>(blobs, "gradients");
  if (grad_names.size() != t.dims.generated) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("manifest lists {} gradient blobs for T={}", grad_names.size(),
                            t.dims.generated));
  }

  const std::size_t floats = t.dims.tensor_size();
  t.attention = read_blob(dir / attn_name, floats);
  t.gradients.reserve(grad_names.size());
  for (const auto& name : grad_names) t.gradients.push_back(read_blob(dir / name, floats));
  return t;
}

void save_trace(const TraceBundle& t, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

  json grads = json::array();
  for (std::size_t i = 0; i < t.gradients.size(); ++i) grads.push_back(gradient_blob_name(i));

  json m;
  m["format_version"] = kTraceFormatVersion;
  m["id"] = t.id;
  m["dims"] = {{"L", t.dims.layers}, {"H", t.dims.heads}, {"K", t.dims.visual},
               {"M", t.dims.prompt}, {"T", t.dims.generated}};
  m["patch_grid"] = {{"rows", t.patch_grid.rows}, {"cols", t.patch_grid.cols}};
  m["token_texts"] = t.token_texts;
  m["confidences"] = t.confidences;
  m["function_word_mask"] = t.function_word_mask;
  if (t.image_path) m["image_path"] = *t.image_path;
  m["blobs"] = {{"attention", "attn.bin"}, {"gradients", grads}};
  m["dtype"] = "float32";

  write_blob(dir / "attn.bin", t.attention);
  for (std::size_t i = 0; i < t.gradients.size(); ++i) {
    write_blob(dir / gradient_blob_name(i), t.gradients[i]);
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write manifest in " + dir.string());
  out << m.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "manifest write failed in " + dir.string());
}

ValidationReport validate_trace(const TraceBundle& t, double tol) {
  ValidationReport report;
  auto add = [&](std::string code, std::string message, std::string location = {}) {
    report.violations.push_back({std::move(code), std::move(message), std::move(location)});
  };

  const auto& d = t.dims;
  if (d.layers < 1 || d.heads < 1 || d.visual < 1 || d.prompt < 1 || d.generated < 1) {
    add("DIMS", fmt::format("all of L,H,K,M,T must be >= 1 (L={} H={} K={} M={} T={})",
                            d.layers, d.heads, d.visual, d.prompt, d.generated));
  }
  const std::size_t n = d.length();
  if (t.token_texts.size() != n) {
    add("TOKEN_COUNT", fmt::format("{} token texts for N={}", t.token_texts.size(), n));
  }
  if (t.confidences.size() != d.generated) {
    add("CONF_COUNT", fmt::format("{} confidences for T={}", t.confidences.size(), d.generated));
  }
  for (std::size_t i = 0; i < t.confidences.size(); ++i) {
    const double p = t.confidences[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      add("CONF_RANGE", fmt::format("confidence {} outside [0,1]", p), fmt::format("t={}", i));
    }
  }
  if (t.function_word_mask.size() != d.generated) {
    add("MASK_COUNT",
        fmt::format("{} mask entries for T={}", t.function_word_mask.size(), d.generated));
  }
  if (t.patch_grid.cells() != d.visual) {
    add("GRID", fmt::format("patch grid {}x{} does not cover K={}", t.patch_grid.rows,
                            t.patch_grid.cols, d.visual));
  }

  const std::size_t floats = d.tensor_size();
  const bool attention_ok = t.attention.size() == floats;
  if (!attention_ok) {
    add("ATTN_SHAPE", fmt::format("attention holds {} floats, dims need {}",
                                  t.attention.size(), floats));
  }
  if (t.gradients.size() != d.generated) {
    add("GRAD_COUNT", fmt::format("{} gradient tensors for T={}", t.gradients.size(), d.generated));
  }
  for (std::size_t i = 0; i < t.gradients.size(); ++i) {
    if (t.gradients[i].size() != floats) {
      add("GRAD_SHAPE", fmt::format("gradient tensor holds {} floats, dims need {}",
                                    t.gradients[i].size(), floats),
          fmt::format("t={}", i));
      continue;
    }
    for (float g : t.gradients[i]) {
      if (!std::isfinite(g)) {
        add("NONFINITE", "non-finite gradient value", fmt::format("t={}", i));
        break;
      }
    }
  }

  if (attention_ok && n > 0) {
    for (std::size_t l = 0; l < d.layers; ++l) {
      for (std::size_t h = 0; h < d.heads; ++h) {
        const auto block = t.attention_block(l, h);
        for (std::size_t i = 0; i < n; ++i) {
          const std::string where = fmt::format("layer={},head={},row={}", l, h, i);
          double row_sum = 0.0;
          bool causal = true;
          bool finite = true;
          bool nonneg = true;
          for (std::size_t j = 0; j < n; ++j) {
            const float a = block[i * n + j];
            if (!std::isfinite(a)) finite = false;
            if (a < 0.0f) nonneg = false;
            if (j > i && a != 0.0f) causal = false;
            row_sum += a;
          }
          if (!finite) add("NONFINITE", "non-finite attention value", where);
          if (!nonneg) add("ATTN_NEG", "negative attention value", where);
          if (!causal) add("CAUSAL", "attention to a future position", where);
          if (std::abs(row_sum - 1.0) > tol) {
            add("ROW_SUM", fmt::format("attention row sums to {:.6f}", row_sum), where);
          }
        }
      }
    }
  }
  return report;
}

}  // namespace glimpse
