// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/baselines.hpp"

#include <algorithm>
#include <charconv>

#include <fmt/format.h>

#include "glimpse/error.hpp"
#include "glimpse/saliency.hpp"

namespace glimpse {

namespace {

Matrix head_mean_attention(const TraceBundle& t, std::size_t layer) {
  const std::size_t n = t.dims.length();
  Matrix out(n, n);
  auto dst = out.data();
  const double inv = 1.0 / static_cast<double>(t.dims.heads);
  for (std::size_t h = 0; h < t.dims.heads; ++h) {
    const auto block = t.attention_block(layer, h);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += inv * block[i];
  }
  return out;
}

// head-mean ReLU(g ⊙ A) for generated token `ordinal` at `layer`.
Matrix head_mean_weighted(const TraceBundle& t, std::size_t ordinal, std::size_t layer) {
  const std::size_t n = t.dims.length();
  Matrix out(n, n);
  auto dst = out.data();
  const double inv = 1.0 / static_cast<double>(t.dims.heads);
  for (std::size_t h = 0; h < t.dims.heads; ++h) {
    const auto a = t.attention_block(layer, h);
    const auto g = t.gradient_block(ordinal, layer, h);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] += inv * std::max(0.0, static_cast<double>(g[i]) * static_cast<double>(a[i]));
    }
  }
  return out;
}

// Mean over generated tokens of the given per-token visual rows.
Matrix average_visual_rows(const TraceBundle& t, const std::vector<std::vector<double>>& rows) {
  std::vector<double> mean(t.dims.visual, 0.0);
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += inv * r[k];
  }
  return project_to_grid(mean, t.patch_grid);
}

std::vector<double> visual_part(std::span<const double> row, const TraceDims& d) {
  const auto v = d.visual_range();
  return {row.begin() + static_cast<std::ptrdiff_t>(v.begin),
          row.begin() + static_cast<std::ptrdiff_t>(v.end)};
}

}  // namespace

std::string BaselineKind::name() const {
  switch (type) {
    case BaselineType::RawAttention: return "raw";
    case BaselineType::Rollout: return "rollout";
    case BaselineType::GradCamStyle: return "gradcam";
    case BaselineType::TmmeVanilla: return "tmme";
    case BaselineType::TmmeLastK: return fmt::format("tmme_last{}", last_k);
  }
  return "unknown";
}

BaselineKind parse_baseline(std::string_view name, std::optional<std::size_t> last_k) {
  if (name == "raw") return {BaselineType::RawAttention};
  if (name == "rollout") return {BaselineType::Rollout};
  if (name == "gradcam") return {BaselineType::GradCamStyle};
  if (name == "tmme") {
    if (last_k) return {BaselineType::TmmeLastK, *last_k};
    return {BaselineType::TmmeVanilla};
  }
  constexpr std::string_view prefix = "tmme_last";
  if (name.starts_with(prefix)) {
    std::size_t k = 0;
    const auto digits = name.substr(prefix.size());
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && !digits.empty()) {
      return {BaselineType::TmmeLastK, k};
    }
  }
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown baseline '{}'", name));
}

Matrix raw_attention_map(const TraceBundle& t) {
  const auto& d = t.dims;
  Matrix mean(d.length(), d.length());
  for (std::size_t l = 0; l < d.layers; ++l) {
    const Matrix a = head_mean_attention(t, l);
    auto dst = mean.data();
    const auto src = a.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i] / static_cast<double>(d.layers);
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t o = 0; o < d.generated; ++o) {
    rows.push_back(visual_part(mean.row(d.generated_position(o)), d));
  }
  return average_visual_rows(t, rows);
}

Matrix attention_rollout_map(const TraceBundle& t) {
  const auto& d = t.dims;
  const std::size_t n = d.length();
  Matrix rollout = Matrix::identity(n);
  for (std::size_t l = 0; l < d.layers; ++l) {
    Matrix a = head_mean_attention(t, l);
    auto data = a.data();
    for (double& v : data) v *= 0.5;
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 0.5;
    normalize_rows(a);
    rollout = matmul(a, rollout);
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t o = 0; o < d.generated; ++o) {
    rows.push_back(visual_part(rollout.row(d.generated_position(o)), d));
  }
  return average_visual_rows(t, rows);
}

Matrix grad_cam_style_map(const TraceBundle& t) {
  const auto& d = t.dims;
  const std::size_t last = d.layers - 1;
  const std::size_t n = d.length();
  std::vector<std::vector<double>> rows;
  for (std::size_t o = 0; o < d.generated; ++o) {
    const std::size_t pos = d.generated_position(o);
    // ReLU after the head mean, so opposite-signed heads cancel first.
    std::vector<double> row(n, 0.0);
    for (std::size_t h = 0; h < d.heads; ++h) {
      const auto a = t.attention_block(last, h);
      const auto g = t.gradient_block(o, last, h);
      for (std::size_t j = 0; j < n; ++j) {
        row[j] += static_cast<double>(g[pos * n + j]) * static_cast<double>(a[pos * n + j]) /
                  static_cast<double>(d.heads);
      }
    }
    for (double& v : row) v = std::max(0.0, v);
    rows.push_back(visual_part(row, d));
  }
  return average_visual_rows(t, rows);
}

Matrix tmme_map(const TraceBundle& t, std::optional<std::size_t> last_k) {
  const auto& d = t.dims;
  if (last_k && (*last_k < 1 || *last_k > d.layers)) {
    throw Error(ErrorCode::InvalidK,
                fmt::format("last_k={} outside [1, {}]", *last_k, d.layers));
  }
  const std::size_t first = last_k ? d.layers - *last_k : 0;
  const std::size_t n = d.length();
  std::vector<std::vector<double>> rows;
  for (std::size_t o = 0; o < d.generated; ++o) {
    Matrix r = Matrix::identity(n);
    for (std::size_t l = first; l < d.layers; ++l) {
      Matrix e = head_mean_weighted(t, o, l);
      normalize_rows(e);
      const Matrix er = matmul(e, r);
      auto rd = r.data();
      const auto ed = er.data();
      for (std::size_t i = 0; i < rd.size(); ++i) rd[i] += ed[i];
    }
    rows.push_back(visual_part(r.row(d.generated_position(o)), d));
  }
  return average_visual_rows(t, rows);
}

Matrix baseline_map(const TraceBundle& t, const BaselineKind& kind) {
  switch (kind.type) {
    case BaselineType::RawAttention: return raw_attention_map(t);
    case BaselineType::Rollout: return attention_rollout_map(t);
    case BaselineType::GradCamStyle: return grad_cam_style_map(t);
    case BaselineType::TmmeVanilla: return tmme_map(t);
    case BaselineType::TmmeLastK: return tmme_map(t, kind.last_k);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown baseline kind");
}

}  // namespace glimpse
