// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "glimpse/matrix.hpp"
#include "glimpse/saliency.hpp"
#include "glimpse/trace.hpp"

namespace glimpse {

struct RenderOptions {
  double blur_sigma = 0.0;  // patch units; display outputs only
  double overlay_opacity = 0.5;
  std::optional<std::filesystem::path> image;  // PNG, PPM (P6) or PGM (P5)
};

/// Display-ready map: optional blur, then min-max normalization.
struct HeatmapRender {
  Matrix normalized;  // values in [0, 1]; all zero when the map is constant
  double blur_sigma = 0.0;
  double overlay_opacity = 0.5;
};

HeatmapRender make_heatmap(const Matrix& grid, const RenderOptions& options);

/// Min-max normalization; constant maps become all zeros.
Matrix normalize_for_display(const Matrix& grid);

/// Separable Gaussian blur with border renormalization.
Matrix gaussian_blur(const Matrix& grid, double sigma);

/// q = floor(255 * x) for x in [0, 1].
std::vector<std::uint8_t> quantize(const Matrix& normalized);

/// Binary P5 PGM of a normalized map.
std::string pgm_bytes(const Matrix& normalized);

/// Rows of comma-separated '%.9e' values.
std::string grid_csv(const Matrix& grid);

struct RenderReport {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
};

/// saliency.csv, saliency.pgm and (when an image is given) overlay.png.
RenderReport render_visual(const Matrix& grid, const std::filesystem::path& dir,
                           const RenderOptions& options);

/// render_visual plus prompt_saliency.csv and tokens.json.
RenderReport render(const SaliencyResult& result, const TraceBundle& trace,
                    const std::filesystem::path& dir, const RenderOptions& options);

/// RGB8 image, row-major.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Throws MissingFile / IoFailure.
RgbImage read_image(const std::filesystem::path& path);
void write_png(const RgbImage& image, const std::filesystem::path& path);

/// Bilinear upsampling of the heatmap, jet colormap, alpha blend.
RgbImage overlay(const RgbImage& image, const Matrix& normalized, double opacity);

}  // namespace glimpse
