// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

#include "glimpse/error.hpp"

namespace glimpse {

namespace {

using json = nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return std::string(s);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw Error(ErrorCode::InvalidArgument,
              fmt::format("setting '{}': '{}' is not {}", key, value, want));
}

double parse_double(std::string_view key, std::string_view raw) {
  const auto s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) bad_value(key, raw, "a number");
  return v;
}

std::size_t parse_count(std::string_view key, std::string_view raw) {
  const auto s = trim(raw);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    bad_value(key, raw, "a non-negative integer");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view raw) {
  std::string s(trim(raw));
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, raw, "a boolean");
}

std::vector<double> parse_list(std::string_view key, std::string_view raw) {
  auto s = trim(raw);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<double> out;
  while (!trim(s).empty()) {
    const auto comma = s.find(',');
    out.push_back(parse_double(key, s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, raw, "a non-empty list of numbers");
  return out;
}

struct Setting {
  const char* key;
  const char* help;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<json(const RunConfig&)> get;
};

#define GLIMPSE_NUMBER(name, field, help_text)                                        \
  Setting {                                                                           \
    name, help_text, [](RunConfig& c, std::string_view v) { c.field = parse_double(name, v); }, \
        [](const RunConfig& c) { return json(c.field); }                              \
  }
#define GLIMPSE_FLAG(name, field, help_text)                                          \
  Setting {                                                                           \
    name, help_text, [](RunConfig& c, std::string_view v) { c.field = parse_bool(name, v); }, \
        [](const RunConfig& c) { return json(c.field); }                              \
  }

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = {
      GLIMPSE_NUMBER("fusion_temperature", engine.fusion_temperature, "head-fusion softmax temperature"),
      GLIMPSE_NUMBER("depth_temperature", engine.depth_temperature, "depth-prior slope"),
      GLIMPSE_NUMBER("layer_fraction", engine.layer_fraction, "fraction of deepest layers propagated"),
      GLIMPSE_FLAG("use_depth_prior", engine.use_depth_prior, "weight layers by the depth prior"),
      GLIMPSE_FLAG("use_layer_relevance", engine.use_layer_relevance, "weight layers by gradient norm"),
      Setting{"head_fusion", "adaptive | mean",
              [](RunConfig& c, std::string_view v) {
                const auto s = unquote(v);
                if (s == "adaptive") c.engine.head_fusion = HeadFusion::Adaptive;
                else if (s == "mean") c.engine.head_fusion = HeadFusion::Mean;
                else bad_value("head_fusion", v, "adaptive or mean");
              },
              [](const RunConfig& c) {
                return json(c.engine.head_fusion == HeadFusion::Adaptive ? "adaptive" : "mean");
              }},
      Setting{"update_rule", "additive | literal",
              [](RunConfig& c, std::string_view v) {
                const auto s = unquote(v);
                if (s == "additive") c.engine.update_rule = UpdateRule::Additive;
                else if (s == "literal") c.engine.update_rule = UpdateRule::Literal;
                else bad_value("update_rule", v, "additive or literal");
              },
              [](const RunConfig& c) {
                return json(c.engine.update_rule == UpdateRule::Additive ? "additive" : "literal");
              }},
      GLIMPSE_NUMBER("propagation_gain", engine.propagation_gain, "multiplier on layer weights"),
      GLIMPSE_FLAG("use_token_confidence", tokens.use_token_confidence, "weight tokens by p_t"),
      GLIMPSE_FLAG("use_prompt_weighting", tokens.use_prompt_weighting, "prompt alignment weights the visual map"),
      GLIMPSE_FLAG("use_visual_weighting", tokens.use_visual_weighting, "visual alignment weights the prompt map"),
      GLIMPSE_FLAG("drop_punctuation", tokens.drop_punctuation, "exclude punctuation tokens"),
      GLIMPSE_FLAG("flow_display", tokens.flow_display, "report flow-adjusted token weights"),
      GLIMPSE_NUMBER("flow_lambda", tokens.flow_lambda, "relevance-flow strength"),
      Setting{"flow_donors", "function_words | all",
              [](RunConfig& c, std::string_view v) {
                const auto s = unquote(v);
                if (s == "function_words") c.tokens.flow_donors = FlowDonors::FunctionWords;
                else if (s == "all") c.tokens.flow_donors = FlowDonors::AllTokens;
                else bad_value("flow_donors", v, "function_words or all");
              },
              [](const RunConfig& c) {
                return json(c.tokens.flow_donors == FlowDonors::FunctionWords ? "function_words" : "all");
              }},
      GLIMPSE_NUMBER("blur_sigma", blur_sigma, "display blur, in patches"),
      GLIMPSE_NUMBER("overlay_opacity", overlay_opacity, "heatmap opacity on the overlay"),
      Setting{"image", "overlay image (overrides the trace manifest)",
              [](RunConfig& c, std::string_view v) {
                auto s = unquote(v);
                if (s.empty()) c.image.reset(); else c.image = std::move(s);
              },
              [](const RunConfig& c) { return c.image ? json(*c.image) : json(nullptr); }},
      GLIMPSE_NUMBER("theta", theta, "human-map percentile for NSS"),
      Setting{"levels", "perturbation levels, e.g. 0.05,0.15,0.30",
              [](RunConfig& c, std::string_view v) { c.levels = parse_list("levels", v); },
              [](const RunConfig& c) { return json(c.levels); }},
      Setting{"step_patches", "patches per curve step (default max(1, round(K*level/20)))",
              [](RunConfig& c, std::string_view v) {
                if (trim(v).empty()) c.step_patches.reset();
                else c.step_patches = parse_count("step_patches", v);
              },
              [](const RunConfig& c) { return c.step_patches ? json(*c.step_patches) : json(nullptr); }},
      Setting{"oracle", "oracle endpoint: host:port, tcp://host:port or exec:<command>",
              [](RunConfig& c, std::string_view v) { c.oracle = unquote(v); },
              [](const RunConfig& c) { return json(c.oracle); }},
      GLIMPSE_NUMBER("oracle_timeout", oracle_timeout, "seconds per oracle request"),
      Setting{"jobs", "worker threads",
              [](RunConfig& c, std::string_view v) {
                c.jobs = static_cast<unsigned>(std::max<std::size_t>(1, parse_count("jobs", v)));
              },
              [](const RunConfig& c) { return json(c.jobs); }},
      Setting{"last_k", "layers kept by the tmme baseline",
              [](RunConfig& c, std::string_view v) {
                if (trim(v).empty()) c.last_k.reset();
                else c.last_k = parse_count("last_k", v);
              },
              [](const RunConfig& c) { return c.last_k ? json(*c.last_k) : json(nullptr); }},
  };
  return table;
}

#undef GLIMPSE_NUMBER
#undef GLIMPSE_FLAG

const Setting& find_setting(std::string_view key) {
  for (const auto& s : settings()) {
    if (key == s.key) return s;
  }
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown setting '{}'", key));
}

void check_run_config(const RunConfig& c) {
  check_engine_config(c.engine);
  if (!(c.tokens.flow_lambda >= 0.0 && c.tokens.flow_lambda <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "flow_lambda must be in [0, 1]");
  }
  if (c.blur_sigma < 0.0) throw Error(ErrorCode::InvalidArgument, "blur_sigma must be >= 0");
  if (!(c.overlay_opacity >= 0.0 && c.overlay_opacity <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "overlay_opacity must be in [0, 1]");
  }
  if (!(c.theta >= 0.0 && c.theta <= 100.0)) {
    throw Error(ErrorCode::InvalidArgument, "theta must be in [0, 100]");
  }
  for (double l : c.levels) {
    if (!(l > 0.0 && l <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("level {} outside (0, 1]", l));
    }
  }
  if (c.step_patches && *c.step_patches == 0) {
    throw Error(ErrorCode::InvalidArgument, "step_patches must be >= 1");
  }
  if (!(c.oracle_timeout > 0.0)) throw Error(ErrorCode::InvalidArgument, "oracle_timeout must be > 0");
}

}  // namespace

const std::vector<SettingInfo>& setting_keys() {
  static const std::vector<SettingInfo> keys = [] {
    std::vector<SettingInfo> out;
    for (const auto& s : settings()) out.push_back({s.key, s.help});
    return out;
  }();
  return keys;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  find_setting(key).set(config, value);
}

json setting_value(const RunConfig& config, std::string_view key) {
  return find_setting(key).get(config);
}

void ConfigBuilder::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, fmt::format("cannot open config {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  file_path_ = path.string();
  load_text(ss.str(), path.string());
}

void ConfigBuilder::load_text(std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    // Strip a trailing comment unless the '#' sits inside quotes.
    bool quoted = false;
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == quote) quoted = false;
      } else if (c == '"' || c == '\'') {
        quoted = true;
        quote = c;
      } else if (c == '#') {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("{}:{}: expected 'key = value'", origin, line_no));
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    try {
      RunConfig probe;
      apply_setting(probe, key, value);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("{}:{}: {}", origin, line_no, e.what()));
    }
    file_[key] = value;
  }
}

void ConfigBuilder::set_flag(std::string_view key, std::string_view value) {
  RunConfig probe;
  apply_setting(probe, key, value);
  flags_[std::string(key)] = std::string(value);
}

RunConfig ConfigBuilder::build() const {
  RunConfig c;
  for (const auto& [k, v] : file_) apply_setting(c, k, v);
  for (const auto& [k, v] : flags_) apply_setting(c, k, v);
  check_run_config(c);
  return c;
}

json ConfigBuilder::describe() const {
  const RunConfig c = build();
  json settings_json = json::object();
  for (const auto& s : settings()) {
    const char* source = flags_.count(s.key) ? "flag" : file_.count(s.key) ? "file" : "default";
    settings_json[s.key] = {{"value", s.get(c)}, {"source", source}};
  }
  return {{"config_file", file_path_ ? json(*file_path_) : json(nullptr)},
          {"settings", std::move(settings_json)}};
}

}  // namespace glimpse
