// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <png.h>
#include <spdlog/spdlog.h>

#include "glimpse/error.hpp"

namespace glimpse {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

std::string format_value(double v) { return fmt::format("{:.9e}", v); }

// Jet colormap, piecewise linear.
std::array<double, 3> jet(double x) {
  auto channel = [x](double center) {
    return std::clamp(1.5 - std::abs(4.0 * x - center), 0.0, 1.0);
  };
  return {channel(3.0), channel(2.0), channel(1.0)};
}

std::string skip_pnm_whitespace_and_read(std::istream& in) {
  std::string token;
  while (in >> token) {
    if (token.front() == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return token;
  }
  throw Error(ErrorCode::IoFailure, "truncated PNM header");
}

RgbImage read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open image " + path.string());
  const std::string magic = skip_pnm_whitespace_and_read(in);
  if (magic != "P5" && magic != "P6") {
    throw Error(ErrorCode::IoFailure, "unsupported PNM type " + magic);
  }
  RgbImage img;
  img.width = std::stoul(skip_pnm_whitespace_and_read(in));
  img.height = std::stoul(skip_pnm_whitespace_and_read(in));
  const auto maxval = std::stoul(skip_pnm_whitespace_and_read(in));
  if (maxval != 255) throw Error(ErrorCode::IoFailure, "only 8-bit PNM images are supported");
  in.get();
  const std::size_t channels = magic == "P6" ? 3 : 1;
  std::vector<std::uint8_t> raw(img.width * img.height * channels);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw Error(ErrorCode::IoFailure, "truncated PNM data in " + path.string());
  }
  if (channels == 3) {
    img.pixels = std::move(raw);
  } else {
    img.pixels.resize(raw.size() * 3);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = raw[i];
    }
  }
  return img;
}

}  // namespace

Matrix normalize_for_display(const Matrix& grid) {
  Matrix out(grid.rows(), grid.cols());
  if (grid.empty()) return out;
  const auto [lo, hi] = std::minmax_element(grid.data().begin(), grid.data().end());
  const double span = *hi - *lo;
  if (!(span > 0.0)) return out;
  const auto src = grid.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - *lo) / span;
  return out;
}

Matrix gaussian_blur(const Matrix& grid, double sigma) {
  if (!(sigma > 0.0) || grid.empty()) return grid;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
  }
  const auto rows = static_cast<int>(grid.rows());
  const auto cols = static_cast<int>(grid.cols());
  auto pass = [&](const Matrix& src, bool horizontal) {
    Matrix dst(src.rows(), src.cols());
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        double acc = 0.0;
        double wsum = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int rr = horizontal ? r : r + k;
          const int cc = horizontal ? c + k : c;
          if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
          const double w = kernel[k + radius];
          acc += w * src(rr, cc);
          wsum += w;
        }
        dst(r, c) = acc / wsum;
      }
    }
    return dst;
  };
  return pass(pass(grid, true), false);
}

HeatmapRender make_heatmap(const Matrix& grid, const RenderOptions& options) {
  HeatmapRender out;
  out.blur_sigma = options.blur_sigma;
  out.overlay_opacity = options.overlay_opacity;
  out.normalized = normalize_for_display(gaussian_blur(grid, options.blur_sigma));
  return out;
}

std::vector<std::uint8_t> quantize(const Matrix& normalized) {
  std::vector<std::uint8_t> out(normalized.size());
  const auto src = normalized.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::floor(255.0 * std::clamp(src[i], 0.0, 1.0)));
  }
  return out;
}

std::string pgm_bytes(const Matrix& normalized) {
  std::string out = fmt::format("P5\n{} {}\n255\n", normalized.cols(), normalized.rows());
  const auto q = quantize(normalized);
  out.append(q.begin(), q.end());
  return out;
}

std::string grid_csv(const Matrix& grid) {
  std::string out;
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      if (c) out += ',';
      out += format_value(grid(r, c));
    }
    out += '\n';
  }
  return out;
}

RgbImage read_image(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::MissingFile, "image not found: " + path.string());
  }
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext != ".png") return read_pnm(path);

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::IoFailure, fmt::format("{}: {}", path.string(), image.message));
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out;
  out.width = image.width;
  out.height = image.height;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::IoFailure, fmt::format("{}: {}", path.string(), image.message));
  }
  return out;
}

void write_png(const RgbImage& img, const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoFailure, fmt::format("{}: {}", path.string(), image.message));
  }
}

RgbImage overlay(const RgbImage& image, const Matrix& normalized, double opacity) {
  RgbImage out = image;
  if (normalized.empty() || image.width == 0 || image.height == 0) return out;
  const double alpha = std::clamp(opacity, 0.0, 1.0);
  const double rows = static_cast<double>(normalized.rows());
  const double cols = static_cast<double>(normalized.cols());
  for (std::size_t y = 0; y < image.height; ++y) {
    // Sample at pixel centres in grid coordinates (cell centres at k + 0.5).
    const double gy = std::clamp((y + 0.5) * rows / image.height - 0.5, 0.0, rows - 1.0);
    const auto y0 = static_cast<std::size_t>(gy);
    const std::size_t y1 = std::min(y0 + 1, normalized.rows() - 1);
    const double fy = gy - static_cast<double>(y0);
    for (std::size_t x = 0; x < image.width; ++x) {
      const double gx = std::clamp((x + 0.5) * cols / image.width - 0.5, 0.0, cols - 1.0);
      const auto x0 = static_cast<std::size_t>(gx);
      const std::size_t x1 = std::min(x0 + 1, normalized.cols() - 1);
      const double fx = gx - static_cast<double>(x0);
      const double v = (1 - fy) * ((1 - fx) * normalized(y0, x0) + fx * normalized(y0, x1)) +
                       fy * ((1 - fx) * normalized(y1, x0) + fx * normalized(y1, x1));
      const auto color = jet(v);
      for (int ch = 0; ch < 3; ++ch) {
        auto& px = out.pixels[(y * image.width + x) * 3 + ch];
        px = static_cast<std::uint8_t>(
            std::lround((1.0 - alpha) * px + alpha * 255.0 * color[ch]));
      }
    }
  }
  return out;
}

RenderReport render_visual(const Matrix& grid, const fs::path& dir, const RenderOptions& options) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

  RenderReport report;
  write_file(dir / "saliency.csv", grid_csv(grid));
  report.written.push_back(dir / "saliency.csv");
  const auto heat = make_heatmap(grid, options);
  write_file(dir / "saliency.pgm", pgm_bytes(heat.normalized));
  report.written.push_back(dir / "saliency.pgm");

  // No image configured: the heatmap goes over a neutral canvas so every
  // trace yields the same file set. A configured but missing image skips the
  // overlay instead of hiding the problem behind a blank one.
  std::optional<RgbImage> img;
  if (options.image) {
    try {
      img = read_image(*options.image);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MissingFile) throw;
      report.warnings.push_back(fmt::format("overlay skipped: {}", e.what()));
      spdlog::warn("overlay skipped: {}", e.what());
      return report;
    }
  } else {
    constexpr std::size_t kPixelsPerPatch = 16;
    img = RgbImage{grid.cols() * kPixelsPerPatch, grid.rows() * kPixelsPerPatch, {}};
    img->pixels.assign(img->width * img->height * 3, 128);
  }
  write_png(overlay(*img, heat.normalized, heat.overlay_opacity), dir / "overlay.png");
  report.written.push_back(dir / "overlay.png");
  return report;
}

RenderReport render(const SaliencyResult& result, const TraceBundle& trace, const fs::path& dir,
                    const RenderOptions& options) {
  auto report = render_visual(result.visual, dir, options);

  std::string prompt_csv = "index,position,token,saliency\n";
  const auto prompt = trace.dims.prompt_range();
  for (std::size_t m = 0; m < result.prompt.size(); ++m) {
    const std::size_t pos = prompt.begin + m;
    prompt_csv += fmt::format("{},{},{},{}\n", m, pos,
                              nlohmann::json(trace.token_texts.at(pos)).dump(),
                              format_value(result.prompt[m]));
  }
  write_file(dir / "prompt_saliency.csv", prompt_csv);
  report.written.push_back(dir / "prompt_saliency.csv");

  const auto& tw = result.tokens;
  nlohmann::json tokens = nlohmann::json::array();
  for (std::size_t o = 0; o < tw.positions.size(); ++o) {
    nlohmann::json tok = {
        {"position", tw.positions[o]},
        {"text", trace.token_texts.at(tw.positions[o])},
        {"function_word", static_cast<bool>(trace.function_word_mask.at(o))},
        {"prompt_alignment", tw.prompt_alignment[o]},
        {"visual_alignment", tw.visual_alignment[o]},
        {"confidence", tw.confidence[o]},
        {"beta_visual", tw.beta_visual[o]},
        {"beta_prompt", tw.beta_prompt[o]},
        {"gamma", tw.gamma[o]},
    };
    if (tw.gamma_flowed) {
      tok["beta_visual_flowed"] = (*tw.beta_visual_flowed)[o];
      tok["beta_prompt_flowed"] = (*tw.beta_prompt_flowed)[o];
      tok["gamma_flowed"] = (*tw.gamma_flowed)[o];
    }
    tokens.push_back(std::move(tok));
  }
  nlohmann::json prompt_tokens = nlohmann::json::array();
  for (std::size_t m = 0; m < result.prompt.size(); ++m) {
    prompt_tokens.push_back({{"position", prompt.begin + m},
                             {"text", trace.token_texts.at(prompt.begin + m)},
                             {"saliency", result.prompt[m]}});
  }
  nlohmann::json doc = {
      {"trace_id", result.trace_id},
      {"flow_applied", tw.flow_applied},
      {"flow_lambda", tw.flow_lambda},
      {"generated", std::move(tokens)},
      {"prompt", std::move(prompt_tokens)},
  };
  write_file(dir / "tokens.json", doc.dump(2) + "\n");
  report.written.push_back(dir / "tokens.json");
  return report;
}

}  // namespace glimpse
