// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "glimpse/error.hpp"
#include "glimpse/render.hpp"
#include "glimpse/saliency.hpp"

using namespace glimpse;
using glimpse::testing::random_trace;
using glimpse::testing::slurp;
using glimpse::testing::TempDir;
namespace fs = std::filesystem;

TEST(NormalizeForDisplay, MinMax) {
  const auto n = normalize_for_display(Matrix::from_rows({{2, 4}, {3, 6}}));
  EXPECT_EQ(n, Matrix::from_rows({{0.0, 0.5}, {0.25, 1.0}}));
}

TEST(NormalizeForDisplay, ConstantMapIsZero) {
  EXPECT_EQ(normalize_for_display(Matrix(3, 3, 0.7)), Matrix(3, 3));
}

TEST(Quantize, FloorsOntoBytes) {
  const auto n = Matrix::from_rows({{0.0, 1.0}, {0.5, 0.25}});
  EXPECT_EQ(quantize(n), (std::vector<std::uint8_t>{0, 255, 127, 63}));
}

TEST(PgmBytes, HeaderAndPayload) {
  const auto bytes = pgm_bytes(Matrix::from_rows({{0.0, 1.0}, {0.5, 0.25}}));
  const std::string header = "P5\n2 2\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 4);
  EXPECT_EQ(bytes.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 0]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 1]), 255);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 2]), 127);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 3]), 63);
}

TEST(PgmBytes, WidthComesFirst) {
  EXPECT_EQ(pgm_bytes(Matrix(2, 3)).substr(0, 8), "P5\n3 2\n2");
}

TEST(GridCsv, OneLinePerRowWithFullPrecision) {
  const auto csv = grid_csv(Matrix::from_rows({{0.1, 2.0}, {-3.5, 0.0}}));
  EXPECT_EQ(csv,
            "1.000000000e-01,2.000000000e+00\n"
            "-3.500000000e+00,0.000000000e+00\n");
}

TEST(GaussianBlur, PreservesConstantsAndSpreadsSpikes) {
  EXPECT_EQ(gaussian_blur(Matrix(4, 4, 1.0), 0.0), Matrix(4, 4, 1.0));
  const auto flat = gaussian_blur(Matrix(4, 4, 2.0), 1.0);
  for (double v : flat.data()) EXPECT_NEAR(v, 2.0, 1e-12);
  Matrix spike(5, 5);
  spike(2, 2) = 1.0;
  const auto b = gaussian_blur(spike, 1.0);
  EXPECT_GT(b(2, 1), 0.0);
  EXPECT_GT(b(2, 2), b(2, 1));
  EXPECT_NEAR(b(1, 2), b(2, 1), 1e-15);
}

TEST(RenderVisual, WritesCsvPgmAndCanvasOverlay) {
  TempDir dir("render");
  const auto grid = Matrix::from_rows({{0.0, 1.0}, {0.5, 0.25}});
  const auto report = render_visual(grid, dir.path() / "out", {});
  EXPECT_TRUE(report.warnings.empty());
  EXPECT_EQ(report.written.size(), 3u);
  EXPECT_EQ(slurp(dir.path() / "out/saliency.csv"), grid_csv(grid));
  EXPECT_EQ(slurp(dir.path() / "out/saliency.pgm"), pgm_bytes(grid));
  const auto img = read_image(dir.path() / "out/overlay.png");
  EXPECT_EQ(img.width, 32u);
  EXPECT_EQ(img.height, 32u);
}

TEST(RenderVisual, MissingImageSkipsOverlayWithWarning) {
  TempDir dir("render");
  RenderOptions o;
  o.image = dir.path() / "nope.png";
  const auto report = render_visual(Matrix(2, 2, 1.0), dir.path(), o);
  ASSERT_EQ(report.warnings.size(), 1u);
  EXPECT_NE(report.warnings[0].find("overlay skipped"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir.path() / "saliency.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "saliency.pgm"));
  EXPECT_FALSE(fs::exists(dir.path() / "overlay.png"));
}

TEST(RenderVisual, OverlayUsesTheConfiguredImageSize) {
  TempDir dir("render");
  RgbImage base{10, 6, std::vector<std::uint8_t>(180, 40)};
  write_png(base, dir.path() / "img.png");
  RenderOptions o;
  o.image = dir.path() / "img.png";
  render_visual(Matrix::from_rows({{0, 1}, {1, 0}}), dir.path() / "out", o);
  const auto img = read_image(dir.path() / "out/overlay.png");
  EXPECT_EQ(img.width, 10u);
  EXPECT_EQ(img.height, 6u);
}

TEST(Png, RoundTrip) {
  TempDir dir("png");
  RgbImage img{3, 2, {}};
  for (int i = 0; i < 18; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 13));
  write_png(img, dir.path() / "a.png");
  const auto back = read_image(dir.path() / "a.png");
  EXPECT_EQ(back.width, 3u);
  EXPECT_EQ(back.pixels, img.pixels);
}

TEST(Pnm, GrayscaleExpandsToRgb) {
  TempDir dir("pnm");
  glimpse::testing::spit(dir.path() / "g.pgm", std::string("P5\n# c\n2 1\n255\n") + '\x10' + '\x20');
  const auto img = read_image(dir.path() / "g.pgm");
  EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{16, 16, 16, 32, 32, 32}));
}

TEST(Overlay, ZeroOpacityIsIdentity) {
  RgbImage img{4, 4, std::vector<std::uint8_t>(48, 77)};
  EXPECT_EQ(overlay(img, Matrix(2, 2, 1.0), 0.0).pixels, img.pixels);
}

TEST(Render, FullOutputSetIsDeterministic) {
  TempDir a("render"), b("render");
  const auto t = random_trace(70, {2, 2, 9, 3, 4});
  const auto s = explain(t, {}, {});
  render(s, t, a.path(), {});
  render(s, t, b.path(), {});
  for (const char* f : {"saliency.csv", "saliency.pgm", "overlay.png", "prompt_saliency.csv", "tokens.json"}) {
    ASSERT_TRUE(fs::exists(a.path() / f)) << f;
    EXPECT_EQ(slurp(a.path() / f), slurp(b.path() / f)) << f;
  }
  const auto prompt = slurp(a.path() / "prompt_saliency.csv");
  EXPECT_EQ(prompt.rfind("index,position,token,saliency\n", 0), 0u);
}
