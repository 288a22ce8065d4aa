// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/synth.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "glimpse/error.hpp"
#include "glimpse/rng.hpp"
#include "glimpse/stopwords.hpp"

namespace glimpse {

namespace {

// Independent RNG streams so that, e.g., the planted set never shifts the
// noise draws.
enum Stream : std::uint64_t {
  kAttention = 1,
  kGradient = 2,
  kRoles = 3,
  kText = 4,
  kHuman = 5,
  kCorpus = 6,
};

std::uint64_t stream_id(Stream s, std::uint64_t a = 0, std::uint64_t b = 0) {
  return splitmix64(splitmix64(static_cast<std::uint64_t>(s) * 0x100000001B3ull + a) ^ b);
}

constexpr const char* kPromptWords[] = {"what", "color", "is",    "the",  "object",
                                        "on",   "left",  "which", "shape", "near"};
constexpr const char* kGroundedWords[] = {"red",   "cup",  "table", "wooden", "bright",
                                          "mug",   "shelf", "blue",  "round",  "lamp"};
constexpr const char* kHallucinatedWords[] = {"noodles", "dog", "tower", "violin", "cloud"};
constexpr const char* kFunctionWords[] = {"the", "is", "of", "a", "on", "with"};

template <std::size_t N>
const char* pick(XorShift64Star& rng, const char* const (&words)[N]) {
  return words[rng.below(N)];
}

std::vector<std::size_t> distinct_patches(XorShift64Star& rng, std::size_t count,
                                          std::size_t k) {
  count = std::min(count, k);
  std::vector<std::size_t> out;
  std::set<std::size_t> seen;
  while (out.size() < count) {
    const auto p = static_cast<std::size_t>(rng.below(k));
    if (seen.insert(p).second) out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double bump(double d2, double spread) {
  if (spread <= 0.0) return d2 == 0.0 ? 1.0 : 0.0;
  const double q = 1.0 + d2 / (spread * spread);
  return 1.0 / (q * q);
}

// Per-patch signal profile: the strongest bump over the goal patches.
std::vector<double> goal_field(const std::vector<std::size_t>& goal, PatchGrid grid, double spread) {
  std::vector<double> field(grid.cells(), 0.0);
  for (std::size_t p = 0; p < field.size(); ++p) {
    for (auto q : goal) {
      const double dy = static_cast<double>(p / grid.cols) - static_cast<double>(q / grid.cols);
      const double dx = static_cast<double>(p % grid.cols) - static_cast<double>(q % grid.cols);
      field[p] = std::max(field[p], bump(dy * dy + dx * dx, spread));
    }
  }
  return field;
}

// 0 at the first layer, 1 at the last.
double depth_fraction(std::size_t layer, std::size_t layers) {
  return layers <= 1 ? 1.0 : static_cast<double>(layer) / static_cast<double>(layers - 1);
}

}  // namespace

PatchGrid synth_grid(const SynthSpec& spec) {
  if (spec.grid.rows != 0 || spec.grid.cols != 0) return spec.grid;
  const std::size_t k = spec.dims.visual;
  std::size_t rows = 1;
  for (std::size_t r = 1; r * r <= k; ++r) {
    if (k % r == 0) rows = r;
  }
  return {rows, rows == 0 ? 0 : k / rows};
}

void check_synth_spec(const SynthSpec& spec) {
  const auto& d = spec.dims;
  if (d.layers < 1 || d.heads < 1 || d.visual < 1 || d.prompt < 1 || d.generated < 1) {
    throw Error(ErrorCode::InvalidSpec, "synth spec: all of L,H,K,M,T must be >= 1");
  }
  if (synth_grid(spec).cells() != d.visual) {
    throw Error(ErrorCode::InvalidSpec, "synth spec: patch grid does not cover K");
  }
  std::set<std::size_t> seen;
  for (auto p : spec.planted_patches) {
    if (p >= d.visual) {
      throw Error(ErrorCode::InvalidSpec,
                  fmt::format("synth spec: planted patch {} outside [0, {})", p, d.visual));
    }
    if (!seen.insert(p).second) {
      throw Error(ErrorCode::InvalidSpec, fmt::format("synth spec: duplicate planted patch {}", p));
    }
  }
  if (!(spec.signal_strength >= 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "synth spec: signal_strength must be >= 0");
  }
  if (!(spec.hallucination_rate >= 0.0 && spec.hallucination_rate <= 1.0)) {
    throw Error(ErrorCode::InvalidSpec, "synth spec: hallucination_rate must be in [0,1]");
  }
  if (!(spec.signal_spread >= 0.0) || !(spec.human_spread >= 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "synth spec: spreads must be >= 0");
  }
  if (spec.deep_noise < 0.0 || spec.early_noise < 0.0) {
    throw Error(ErrorCode::InvalidSpec, "synth spec: noise scales must be >= 0");
  }
}

TraceBundle synth_trace(const SynthSpec& spec) {
  check_synth_spec(spec);
  const auto& d = spec.dims;
  const std::size_t n = d.length();
  const std::size_t nn = n * n;

  TraceBundle t;
  t.id = spec.id;
  t.dims = d;
  t.patch_grid = synth_grid(spec);

  // Attention: random causal rows, boosted on sinks and on the diagonal.
  XorShift64Star sink_rng(spec.seed, stream_id(kAttention));
  const auto sinks = distinct_patches(sink_rng, spec.attention_sinks, d.visual);
  std::vector<bool> is_sink(n, false);
  for (auto s : sinks) is_sink[s] = true;

  t.attention.assign(d.tensor_size(), 0.0f);
  std::vector<double> weights(n);
  for (std::size_t l = 0; l < d.layers; ++l) {
    for (std::size_t h = 0; h < d.heads; ++h) {
      XorShift64Star rng(spec.seed, stream_id(kAttention, l + 1, h + 1));
      float* block = t.attention.data() + (l * d.heads + h) * nn;
      for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          const double u = rng.uniform();
          double w = u * u * u * u + 0.02;
          if (is_sink[j]) w *= 25.0;
          if (j == i) w *= 4.0;
          weights[j] = w;
          total += w;
        }
        for (std::size_t j = 0; j <= i; ++j) {
          block[i * n + j] = static_cast<float>(weights[j] / total);
        }
      }
    }
  }

  // Token roles and confidences.
  XorShift64Star role_rng(spec.seed, stream_id(kRoles));
  const auto decoys = distinct_patches(role_rng, spec.decoy_count, d.visual);
  std::vector<bool> hallucinated(d.generated, false);
  for (std::size_t o = 0; o < d.generated; ++o) {
    hallucinated[o] = role_rng.uniform() < spec.hallucination_rate;
  }
  if (std::all_of(hallucinated.begin(), hallucinated.end(), [](bool b) { return b; })) {
    hallucinated[0] = false;
  }
  t.confidences.resize(d.generated);
  for (std::size_t o = 0; o < d.generated; ++o) {
    t.confidences[o] = hallucinated[o] ? role_rng.uniform(0.03, 0.25) : role_rng.uniform(0.6, 0.99);
  }

  // Token texts and the function-word mask.
  XorShift64Star text_rng(spec.seed, stream_id(kText));
  t.token_texts.reserve(n);
  for (std::size_t k = 0; k < d.visual; ++k) t.token_texts.push_back(fmt::format("<img_{}>", k));
  for (std::size_t m = 0; m < d.prompt; ++m) {
    const bool last = m + 1 == d.prompt && d.prompt > 1;
    t.token_texts.emplace_back(last ? "?" : pick(text_rng, kPromptWords));
  }
  for (std::size_t o = 0; o < d.generated; ++o) {
    const double u = text_rng.uniform();
    std::string word;
    if (hallucinated[o]) {
      word = pick(text_rng, kHallucinatedWords);
    } else if (u < 0.35) {
      word = pick(text_rng, kFunctionWords);
    } else {
      word = pick(text_rng, kGroundedWords);
    }
    t.token_texts.push_back(std::move(word));
  }
  t.function_word_mask.resize(d.generated);
  for (std::size_t o = 0; o < d.generated; ++o) {
    t.function_word_mask[o] = is_function_word(t.token_texts[d.generated_position(o)]);
  }

  // Gradients: causal noise on rows <= target, shrinking with depth, plus the
  // planted (or decoy) signal growing with depth.
  const std::size_t signal_heads = (d.heads + 1) / 2;
  const auto planted_field = goal_field(spec.planted_patches, t.patch_grid, spec.signal_spread);
  const auto decoy_field = goal_field(decoys, t.patch_grid, spec.signal_spread);
  t.gradients.resize(d.generated);
  for (std::size_t o = 0; o < d.generated; ++o) {
    const std::size_t target = d.generated_position(o);
    auto& grad = t.gradients[o];
    grad.assign(d.tensor_size(), 0.0f);
    const auto& field = hallucinated[o] ? decoy_field : planted_field;
    for (std::size_t l = 0; l < d.layers; ++l) {
      const double depth = depth_fraction(l, d.layers);
      const double noise = spec.deep_noise + (spec.early_noise - spec.deep_noise) * (1.0 - depth);
      const double signal = spec.signal_strength * depth * depth;
      for (std::size_t h = 0; h < d.heads; ++h) {
        XorShift64Star rng(spec.seed, stream_id(kGradient, o + 1, l * d.heads + h + 1));
        float* block = grad.data() + (l * d.heads + h) * nn;
        for (std::size_t i = 0; i <= target; ++i) {
          for (std::size_t j = 0; j <= i; ++j) {
            block[i * n + j] = static_cast<float>(noise * rng.normal());
          }
        }
        if (signal == 0.0) continue;
        const double head_gain = h < signal_heads ? 1.0 : 0.2;
        for (std::size_t i = d.generated_position(0); i <= target; ++i) {
          const double row_gain = i == target ? 1.0 : 0.5;
          for (std::size_t p = 0; p < d.visual; ++p) {
            if (field[p] == 0.0) continue;
            block[i * n + p] += static_cast<float>(signal * head_gain * row_gain * field[p]);
          }
        }
      }
    }
  }
  return t;
}

Matrix synth_human_map(const SynthSpec& spec, std::size_t pixels_per_patch) {
  check_synth_spec(spec);
  const auto grid = synth_grid(spec);
  const std::size_t ppp = std::max<std::size_t>(1, pixels_per_patch);
  const std::size_t height = grid.rows * ppp;
  const std::size_t width = grid.cols * ppp;
  const double sigma = std::max(spec.human_spread, 0.25) * static_cast<double>(ppp);
  const double sigma2 = sigma * sigma;

  XorShift64Star rng(spec.seed, stream_id(kHuman));
  Matrix out(height, width);
  constexpr int kAnnotators = 3;
  for (int a = 0; a < kAnnotators; ++a) {
    Matrix annot(height, width);
    for (auto p : spec.planted_patches) {
      const double half = 0.5 * static_cast<double>(ppp);
      const double cy = (static_cast<double>(p / grid.cols) + 0.5) * ppp + rng.uniform(-0.5, 0.5) * half;
      const double cx = (static_cast<double>(p % grid.cols) + 0.5) * ppp + rng.uniform(-0.5, 0.5) * half;
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double dy = static_cast<double>(y) + 0.5 - cy;
          const double dx = static_cast<double>(x) + 0.5 - cx;
          const double q = 1.0 + (dy * dy + dx * dx) / sigma2;
          annot(y, x) += 1.0 / (q * q);
        }
      }
    }
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        out(y, x) += (annot(y, x) + 0.05 * rng.uniform()) / kAnnotators;
      }
    }
  }
  return out;
}

SynthSpec corpus_member(const SynthSpec& base, std::size_t index) {
  SynthSpec s = base;
  s.id = fmt::format("{}_{:03d}", base.id, index);
  s.seed = splitmix64(base.seed ^ splitmix64(index + 1));
  XorShift64Star rng(s.seed, stream_id(kCorpus));
  const std::size_t count = base.planted_patches.empty() ? 3 : base.planted_patches.size();
  s.planted_patches = distinct_patches(rng, count, base.dims.visual);
  return s;
}

using json = nlohmann::json;

std::string synth_spec_to_json(const SynthSpec& s) {
  const auto grid = synth_grid(s);
  json j;
  j["id"] = s.id;
  j["dims"] = {{"L", s.dims.layers}, {"H", s.dims.heads}, {"K", s.dims.visual},
               {"M", s.dims.prompt}, {"T", s.dims.generated}};
  j["patch_grid"] = {{"rows", grid.rows}, {"cols", grid.cols}};
  j["planted_patches"] = s.planted_patches;
  j["signal_strength"] = s.signal_strength;
  j["signal_spread"] = s.signal_spread;
  j["human_spread"] = s.human_spread;
  j["seed"] = s.seed;
  j["hallucination_rate"] = s.hallucination_rate;
  j["decoy_count"] = s.decoy_count;
  j["attention_sinks"] = s.attention_sinks;
  j["deep_noise"] = s.deep_noise;
  j["early_noise"] = s.early_noise;
  return j.dump(2);
}

SynthSpec synth_spec_from_json(const std::string& text) {
  SynthSpec s;
  try {
    const json j = json::parse(text);
    s.id = j.value("id", s.id);
    const auto& d = j.at("dims");
    s.dims.layers = d.at("L").get<std::size_t>();
    s.dims.heads = d.at("H").get<std::size_t>();
    s.dims.visual = d.at("K").get<std::size_t>();
    s.dims.prompt = d.at("M").get<std::size_t>();
    s.dims.generated = d.at("T").get<std::size_t>();
    if (j.contains("patch_grid")) {
      s.grid.rows = j["patch_grid"].at("rows").get<std::size_t>();
      s.grid.cols = j["patch_grid"].at("cols").get<std::size_t>();
    }
    s.planted_patches = j.value("planted_patches", std::vector<std::size_t>{});
    s.signal_strength = j.value("signal_strength", s.signal_strength);
    s.signal_spread = j.value("signal_spread", s.signal_spread);
    s.human_spread = j.value("human_spread", s.human_spread);
    s.seed = j.value("seed", s.seed);
    s.hallucination_rate = j.value("hallucination_rate", s.hallucination_rate);
    s.decoy_count = j.value("decoy_count", s.decoy_count);
    s.attention_sinks = j.value("attention_sinks", s.attention_sinks);
    s.deep_noise = j.value("deep_noise", s.deep_noise);
    s.early_noise = j.value("early_noise", s.early_noise);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, fmt::format("synth spec: {}", e.what()));
  }
  check_synth_spec(s);
  return s;
}

}  // namespace glimpse
