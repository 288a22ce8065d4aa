// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/relevance.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "glimpse/error.hpp"

namespace glimpse {

namespace {

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  const double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> uniform(std::size_t n) {
  return std::vector<double>(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
}

void check_heads(std::span<const Matrix> a, std::span<const Matrix> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("head count mismatch ({} vs {})", a.size(), b.size()));
  }
  for (std::size_t h = 0; h < a.size(); ++h) {
    if (!a[h].same_shape(a.front()) || !b[h].same_shape(a.front())) {
      throw Error(ErrorCode::ShapeMismatch, fmt::format("head {} has a different shape", h));
    }
  }
}

}  // namespace

void check_engine_config(const EngineConfig& c) {
  if (!(c.fusion_temperature > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "fusion_temperature must be > 0");
  }
  if (!(c.depth_temperature > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "depth_temperature must be > 0");
  }
  if (!(c.layer_fraction > 0.0 && c.layer_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "layer_fraction must be in (0, 1]");
  }
  if (!(c.propagation_gain > 0.0) || !std::isfinite(c.propagation_gain)) {
    throw Error(ErrorCode::InvalidArgument, "propagation_gain must be a positive finite number");
  }
}

Matrix gradient_weighted_attention(const Matrix& attention, const Matrix& gradient) {
  if (!attention.same_shape(gradient)) {
    throw Error(ErrorCode::ShapeMismatch, "attention and gradient shapes differ");
  }
  Matrix out(attention.rows(), attention.cols());
  const auto a = attention.data();
  const auto g = gradient.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::max(0.0, g[i] * a[i]);
  return out;
}

std::vector<double> head_ratios(std::span<const Matrix> weighted,
                                std::span<const Matrix> gradients) {
  check_heads(weighted, gradients);
  std::vector<double> ratios(weighted.size());
  for (std::size_t h = 0; h < weighted.size(); ++h) {
    double positive = 0.0;
    for (double g : gradients[h].data()) positive += std::max(0.0, g);
    ratios[h] = positive > 0.0 ? weighted[h].sum() / positive : 0.0;
  }
  return ratios;
}

std::vector<double> head_weights(std::span<const Matrix> weighted,
                                 std::span<const Matrix> gradients, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be > 0");
  auto scores = head_ratios(weighted, gradients);
  for (double& s : scores) s /= temperature;
  return softmax(scores);
}

LayerFusion fuse_layer(std::span<const Matrix> attention, std::span<const Matrix> gradients,
                       double temperature, HeadFusion mode) {
  check_heads(attention, gradients);
  std::vector<Matrix> weighted;
  weighted.reserve(attention.size());
  for (std::size_t h = 0; h < attention.size(); ++h) {
    weighted.push_back(gradient_weighted_attention(attention[h], gradients[h]));
  }

  LayerFusion out;
  out.head_weights = mode == HeadFusion::Adaptive
                         ? head_weights(weighted, gradients, temperature)
                         : uniform(attention.size());
  out.fused = Matrix(attention.front().rows(), attention.front().cols());
  auto fused = out.fused.data();
  for (std::size_t h = 0; h < weighted.size(); ++h) {
    const double w = out.head_weights[h];
    const auto src = weighted[h].data();
    for (std::size_t i = 0; i < fused.size(); ++i) fused[i] += w * src[i];
  }
  normalize_rows(out.fused);
  return out;
}

std::vector<double> layer_gradient_norms(const TraceBundle& trace, std::size_t position) {
  const auto& d = trace.dims;
  if (!d.generated_range().contains(position)) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("position {} is not a generated token", position));
  }
  const std::size_t ordinal = position - d.generated_range().begin;
  const std::size_t nn = d.length() * d.length();
  std::vector<double> norms(d.layers, 0.0);
  std::vector<double> head_sum(nn);
  for (std::size_t l = 0; l < d.layers; ++l) {
    std::fill(head_sum.begin(), head_sum.end(), 0.0);
    for (std::size_t h = 0; h < d.heads; ++h) {
      const auto block = trace.gradient_block(ordinal, l, h);
      for (std::size_t i = 0; i < nn; ++i) head_sum[i] += block[i];
    }
    for (double v : head_sum) norms[l] += std::abs(v);
  }
  const double total = std::accumulate(norms.begin(), norms.end(), 0.0);
  if (total <= 0.0) return uniform(d.layers);
  for (double& v : norms) v /= total;
  return norms;
}

std::vector<double> depth_prior(std::size_t layers, double temperature) {
  if (layers == 0) throw Error(ErrorCode::InvalidArgument, "depth_prior needs L >= 1");
  if (!(temperature > 0.0)) throw Error(ErrorCode::InvalidArgument, "depth temperature must be > 0");
  std::vector<double> scores(layers);
  for (std::size_t l = 0; l < layers; ++l) scores[l] = temperature * static_cast<double>(l + 1);
  return softmax(scores);
}

LayerWeights layer_weights(std::span<const double> grad_norms, std::span<const double> prior,
                           const EngineConfig& config) {
  if (grad_norms.size() != prior.size() || grad_norms.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient norms and depth prior lengths differ");
  }
  const std::size_t layers = grad_norms.size();
  LayerWeights out;
  out.grad_norms = config.use_layer_relevance
                       ? std::vector<double>(grad_norms.begin(), grad_norms.end())
                       : uniform(layers);
  out.depth_prior = config.use_depth_prior ? std::vector<double>(prior.begin(), prior.end())
                                           : uniform(layers);
  out.alpha.resize(layers);
  double total = 0.0;
  for (std::size_t l = 0; l < layers; ++l) {
    out.alpha[l] = out.grad_norms[l] * out.depth_prior[l];
    total += out.alpha[l];
  }
  if (!(total > 0.0)) {
    spdlog::warn("layer weights degenerate (sum of g*s is zero); using uniform alpha");
    out.alpha = uniform(layers);
    out.degenerate = true;
    return out;
  }
  for (double& a : out.alpha) a /= total;
  return out;
}

std::size_t retained_layers(std::size_t layers, double fraction) {
  // The epsilon keeps e.g. 0.6 * 5 from rounding up to 4 through representation error.
  const double raw = std::ceil(fraction * static_cast<double>(layers) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, layers);
}

RelevanceMatrix propagate(std::span<const LayerFusion> fusions, const LayerWeights& weights,
                          const EngineConfig& config, std::size_t target_token) {
  if (fusions.empty() || fusions.size() != weights.alpha.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{} fusions for {} layer weights", fusions.size(), weights.alpha.size()));
  }
  const std::size_t n = fusions.front().fused.rows();
  for (const auto& f : fusions) {
    if (f.fused.rows() != n || f.fused.cols() != n) {
      throw Error(ErrorCode::ShapeMismatch, "fused attention matrices must all be N x N");
    }
  }

  const std::size_t layers = fusions.size();
  const std::size_t first = layers - retained_layers(layers, config.layer_fraction);
  double retained_mass = 0.0;
  for (std::size_t l = first; l < layers; ++l) retained_mass += weights.alpha[l];

  Matrix r = Matrix::identity(n);
  for (std::size_t l = first; l < layers; ++l) {
    const double alpha = retained_mass > 0.0
                             ? weights.alpha[l] / retained_mass
                             : 1.0 / static_cast<double>(layers - first);
    const double a = config.propagation_gain * alpha;
    Matrix er = matmul(fusions[l].fused, r);
    auto rd = r.data();
    const auto ed = er.data();
    const double keep = config.update_rule == UpdateRule::Literal ? 2.0 : 1.0;
    for (std::size_t i = 0; i < rd.size(); ++i) rd[i] = keep * rd[i] + a * ed[i];
  }
  return {std::move(r), target_token};
}

RelevanceMatrix relevance_for_token(const TraceBundle& trace, std::size_t position,
                                    const EngineConfig& config) {
  check_engine_config(config);
  const auto norms = layer_gradient_norms(trace, position);
  const auto& d = trace.dims;
  const std::size_t ordinal = position - d.generated_range().begin;

  std::vector<LayerFusion> fusions;
  fusions.reserve(d.layers);
  std::vector<Matrix> attention(d.heads);
  std::vector<Matrix> gradients(d.heads);
  for (std::size_t l = 0; l < d.layers; ++l) {
    for (std::size_t h = 0; h < d.heads; ++h) {
      attention[h] = trace.attention_matrix(l, h);
      gradients[h] = trace.gradient_matrix(ordinal, l, h);
    }
    fusions.push_back(fuse_layer(attention, gradients, config.fusion_temperature,
                                 config.head_fusion));
  }
  const auto weights =
      layer_weights(norms, depth_prior(d.layers, config.depth_temperature), config);
  return propagate(fusions, weights, config, position);
}

std::vector<RelevanceMatrix> relevance_for_all_tokens(const TraceBundle& trace,
                                                      const EngineConfig& config,
                                                      unsigned jobs) {
  const std::size_t count = trace.dims.generated;
  std::vector<RelevanceMatrix> out(count);
  auto work = [&](std::size_t o) {
    out[o] = relevance_for_token(trace, trace.dims.generated_position(o), config);
  };
  if (jobs <= 1 || count <= 1) {
    for (std::size_t o = 0; o < count; ++o) work(o);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (unsigned w = 0; w < std::min<std::size_t>(jobs, count); ++w) {
    workers.emplace_back([&] {
      for (std::size_t o = next++; o < count; o = next++) {
        try {
          work(o);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace glimpse
