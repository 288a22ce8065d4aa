// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "glimpse/error.hpp"

namespace glimpse {

namespace fs = std::filesystem;

namespace {

Matrix read_csv_grid(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw Error(ErrorCode::IoFailure,
                    fmt::format("{}: non-numeric cell '{}'", path.string(), cell));
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::IoFailure, path.string() + ": empty grid");
  return Matrix::from_rows(rows);
}

Matrix read_pgm_grid(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  auto next = [&]() {
    std::string tok;
    while (in >> tok) {
      if (tok.front() != '#') return tok;
      std::string rest;
      std::getline(in, rest);
    }
    throw Error(ErrorCode::IoFailure, path.string() + ": truncated PGM header");
  };
  if (next() != "P5") throw Error(ErrorCode::IoFailure, path.string() + ": expected binary PGM");
  const auto width = std::stoul(next());
  const auto height = std::stoul(next());
  if (std::stoul(next()) != 255) throw Error(ErrorCode::IoFailure, "only 8-bit PGM supported");
  in.get();
  std::vector<unsigned char> raw(width * height);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw Error(ErrorCode::IoFailure, path.string() + ": truncated PGM data");
  }
  Matrix m(height, width);
  for (std::size_t i = 0; i < raw.size(); ++i) m.data()[i] = raw[i] / 255.0;
  return m;
}

void require_same_shape(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("grid shapes differ ({}x{} vs {}x{})", a.rows(), a.cols(), b.rows(), b.cols()));
  }
}

}  // namespace

HumanAttentionMap load_human_map(const fs::path& path, std::size_t source_count) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::MissingFile, "human map not found: " + path.string());
  }
  HumanAttentionMap map;
  map.source_count = source_count;
  map.grid = path.extension() == ".pgm" ? read_pgm_grid(path) : read_csv_grid(path);
  for (double v : map.grid.data()) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::DegenerateInput, path.string() + ": human map values must be finite and >= 0");
    }
  }
  if (!(map.grid.sum() > 0.0)) {
    throw Error(ErrorCode::DegenerateInput, path.string() + ": human map is all zero");
  }
  return map;
}

Matrix pool_human_map(const HumanAttentionMap& map, PatchGrid grid) {
  const std::size_t h = map.grid.rows();
  const std::size_t w = map.grid.cols();
  if (grid.rows == 0 || grid.cols == 0 || h < grid.rows || w < grid.cols) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("cannot pool a {}x{} map into a {}x{} grid", h, w, grid.rows, grid.cols));
  }
  // Cell (r, c) covers source rows [r*h/R, (r+1)*h/R); partially covered
  // pixels contribute by overlap area.
  auto overlap = [](double lo, double hi, std::size_t px) {
    return std::max(0.0, std::min(hi, px + 1.0) - std::max(lo, static_cast<double>(px)));
  };
  Matrix out(grid.rows, grid.cols);
  const double sy = static_cast<double>(h) / grid.rows;
  const double sx = static_cast<double>(w) / grid.cols;
  for (std::size_t r = 0; r < grid.rows; ++r) {
    const double y0 = r * sy, y1 = (r + 1) * sy;
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const double x0 = c * sx, x1 = (c + 1) * sx;
      double acc = 0.0, area = 0.0;
      for (auto y = static_cast<std::size_t>(y0); y < std::min<std::size_t>(h, std::ceil(y1)); ++y) {
        const double wy = overlap(y0, y1, y);
        if (wy == 0.0) continue;
        for (auto x = static_cast<std::size_t>(x0); x < std::min<std::size_t>(w, std::ceil(x1)); ++x) {
          const double wx = overlap(x0, x1, x);
          acc += wy * wx * map.grid(y, x);
          area += wy * wx;
        }
      }
      out(r, c) = area > 0.0 ? acc / area : 0.0;
    }
  }
  return out;
}

double percentile(std::span<const double> values, double theta) {
  if (values.empty()) throw Error(ErrorCode::DegenerateInput, "percentile of an empty set");
  if (!(theta >= 0.0 && theta <= 100.0)) {
    throw Error(ErrorCode::InvalidArgument, "percentile theta must be in [0, 100]");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = theta / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (rank - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double nss(const Matrix& saliency, const Matrix& human, double theta) {
  require_same_shape(saliency, human);
  const auto s = saliency.data();
  const double n = static_cast<double>(s.size());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  const double sigma = std::sqrt(var / n);
  // Rounding can leave a tiny sigma on a constant map; test the values instead.
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  if (*lo == *hi || !(sigma > 0.0)) throw Error(ErrorCode::DegenerateSaliency, "NSS of a constant saliency map");

  const double threshold = percentile(human.data(), theta);
  double total = 0.0;
  std::size_t count = 0;
  const auto hv = human.data();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (hv[i] >= threshold) {
      total += (s[i] - mean) / sigma;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(const Matrix& saliency, const Matrix& human) {
  require_same_shape(saliency, human);
  if (saliency.size() < 2) throw Error(ErrorCode::DegenerateInput, "Spearman needs >= 2 cells");
  const auto rs = average_ranks(saliency.data());
  const auto rh = average_ranks(human.data());
  const double n = static_cast<double>(rs.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const double dx = rs[i] - mean;
    const double dy = rh[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw Error(ErrorCode::DegenerateInput, "Spearman of a constant grid");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

AlignmentScore alignment(const Matrix& saliency, const Matrix& human, double theta) {
  return {nss(saliency, human, theta), spearman(saliency, human)};
}

MeanStderr mean_stderr(std::span<const double> values) {
  MeanStderr out;
  out.n = values.size();
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

CorpusSummary aggregate_corpus(std::span<const AlignmentScore> scores) {
  if (scores.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "corpus aggregation needs at least two samples");
  }
  std::vector<double> n, s;
  for (const auto& sc : scores) {
    n.push_back(sc.nss);
    s.push_back(sc.spearman);
  }
  return {mean_stderr(n), mean_stderr(s)};
}

}  // namespace glimpse

namespace glimpse {

SignTest paired_sign_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "sign test needs paired samples");
  SignTest out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) {
      ++out.wins;
    } else if (a[i] < b[i]) {
      ++out.losses;
    } else {
      ++out.ties;
    }
  }
  const std::size_t n = out.wins + out.losses;
  // Sum binomial terms in log space to stay exact enough for n in the hundreds.
  double p = 0.0;
  for (std::size_t k = out.wins; k <= n; ++k) {
    const double log_term = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                            static_cast<double>(n) * std::log(2.0);
    p += std::exp(log_term);
  }
  out.p_value = std::min(1.0, p);
  return out;
}

}  // namespace glimpse
