// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "glimpse/rng.hpp"
#include "glimpse/trace.hpp"

namespace glimpse::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "glimpse") {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / (tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Structurally valid trace with random causal attention and random signed
/// gradients. Grid is 1 x K unless K is a perfect square.
inline TraceBundle random_trace(std::uint64_t seed, TraceDims d) {
  XorShift64Star rng(seed, 99);
  TraceBundle t;
  t.id = "rand_" + std::to_string(seed);
  t.dims = d;
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d.visual))));
  t.patch_grid = side * side == d.visual ? PatchGrid{side, side} : PatchGrid{1, d.visual};
  const std::size_t n = d.length();
  for (std::size_t i = 0; i < n; ++i) t.token_texts.push_back("tok" + std::to_string(i));
  for (std::size_t o = 0; o < d.generated; ++o) {
    t.confidences.push_back(rng.uniform(0.05, 1.0));
    t.function_word_mask.push_back(rng.uniform() < 0.4);
  }
  t.attention.assign(d.tensor_size(), 0.0f);
  for (std::size_t b = 0; b < d.layers * d.heads; ++b) {
    float* block = t.attention.data() + b * n * n;
    for (std::size_t i = 0; i < n; ++i) {
      double total = 0.0;
      std::vector<double> w(i + 1);
      for (std::size_t j = 0; j <= i; ++j) total += w[j] = rng.uniform() + 0.01;
      for (std::size_t j = 0; j <= i; ++j) block[i * n + j] = static_cast<float>(w[j] / total);
    }
  }
  t.gradients.assign(d.generated, std::vector<float>(d.tensor_size(), 0.0f));
  for (auto& g : t.gradients) {
    for (auto& v : g) v = static_cast<float>(rng.uniform(-1.0, 1.5));
  }
  return t;
}

/// Random dims within the given bounds (each >= 1).
inline TraceDims random_dims(XorShift64Star& rng, std::size_t max_n, std::size_t max_l,
                             std::size_t max_h) {
  TraceDims d;
  d.layers = 1 + rng.below(max_l);
  d.heads = 1 + rng.below(max_h);
  const std::size_t n = 3 + rng.below(max_n - 2);  // 3..max_n
  d.generated = 1 + rng.below(n - 2);
  d.prompt = 1 + rng.below(n - d.generated - 1);
  d.visual = n - d.generated - d.prompt;
  return d;
}

}  // namespace glimpse::testing
