// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "glimpse/relevance.hpp"
#include "glimpse/token_weights.hpp"

namespace glimpse {

/// Everything a command needs besides its positional inputs.
struct RunConfig {
  EngineConfig engine;
  TokenConfig tokens;
  double blur_sigma = 0.0;
  double overlay_opacity = 0.5;
  std::optional<std::string> image;  // overrides the manifest's image_path
  double theta = 95.0;
  std::vector<double> levels{0.05, 0.15, 0.30};
  std::optional<std::size_t> step_patches;
  std::string oracle;  // endpoint; empty means GLIMPSE_ORACLE or none
  double oracle_timeout = 10.0;  // seconds
  unsigned jobs = 1;
  std::optional<std::size_t> last_k;
};

enum class SettingSource { Default, File, Flag };

struct SettingInfo {
  std::string key;
  std::string help;
};

/// Every recognised key, in a stable order.
const std::vector<SettingInfo>& setting_keys();

/// Parses `value` for `key`. Throws InvalidArgument on unknown keys or bad values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Current value of one key as JSON (null for unset optionals).
nlohmann::json setting_value(const RunConfig& config, std::string_view key);

/// Resolved settings plus where each one came from.
class ConfigBuilder {
 public:
  /// Flat `key = value` lines; '#' starts a comment; blank lines ignored.
  void load_file(const std::filesystem::path& path);
  void load_text(std::string_view text, std::string_view origin = "<config>");
  void set_flag(std::string_view key, std::string_view value);

  /// Applies file values, then flag values, over the defaults.
  RunConfig build() const;
  nlohmann::json describe() const;  // {key: {value, source}}

 private:
  std::map<std::string, std::string> file_;
  std::map<std::string, std::string> flags_;
  std::optional<std::string> file_path_;
};

}  // namespace glimpse
