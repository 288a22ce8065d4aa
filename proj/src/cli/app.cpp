// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/pattern_formatter.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "glimpse/cli.hpp"

namespace glimpse::cli {

namespace {

// %j: the log message as a JSON string literal, quotes included.
class JsonMessageFlag final : public spdlog::custom_flag_formatter {
 public:
  void format(const spdlog::details::log_msg& msg, const std::tm&, spdlog::memory_buf_t& dest) override {
    const auto text = nlohmann::json(std::string(msg.payload.data(), msg.payload.size())).dump();
    dest.append(text.data(), text.data() + text.size());
  }
  std::unique_ptr<custom_flag_formatter> clone() const override {
    return std::make_unique<JsonMessageFlag>();
  }
};

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

}  // namespace

void setup_logging(bool json, const std::string& level) {
  auto logger = std::make_shared<spdlog::logger>("glimpse", std::make_shared<spdlog::sinks::stderr_sink_mt>());
  if (json) {
    auto formatter = std::make_unique<spdlog::pattern_formatter>();
    formatter->add_flag<JsonMessageFlag>('j').set_pattern(
        R"({"time":"%Y-%m-%dT%H:%M:%S.%e%z","level":"%l","msg":%j})");
    logger->set_formatter(std::move(formatter));
  } else {
    logger->set_pattern("[%l] %v");
  }
  logger->set_level(spdlog::level::from_str(level));
  spdlog::set_default_logger(std::move(logger));
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Gradient-weighted, layer-adaptive saliency for vision-language model traces"};
  app.set_version_flag("--version", "glimpse 0.1.0");
  app.require_subcommand(1);
  app.fallthrough();

  ConfigBuilder builder;
  bool log_json = false;
  std::string log_level = "info";
  std::string config_file;
  std::vector<std::string> sets;
  app.add_option("--config", config_file, "flat key = value settings file");
  app.add_option("--set", sets, "override a setting: key=value (repeatable)");
  app.add_flag("--log-json", log_json, "JSON-lines logs on stderr");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));
  auto* settings = app.add_option_group("Settings", "each overrides the same key from --config");
  std::vector<std::pair<std::string, std::string>> flag_values;
  for (const auto& key : setting_keys()) {
    settings->add_option_function<std::string>(
        dashed(key.key), [&flag_values, k = key.key](const std::string& v) { flag_values.emplace_back(k, v); },
        key.help);
  }

  std::string trace_dir, out_dir, kind, corpus, method = "glimpse", spec_file, source;
  std::optional<std::size_t> corpus_size;
  bool synthetic = false, stdio = false;
  std::uint16_t port = 0;

  auto* explain = app.add_subcommand("explain", "saliency maps and token relevance for one trace");
  explain->add_option("trace_dir", trace_dir)->required();
  explain->add_option("-o,--out", out_dir)->required();

  auto* baseline = app.add_subcommand("baseline", "baseline saliency under <out>/<trace_id>/baselines/<kind>/");
  baseline->add_option("trace_dir", trace_dir)->required();
  baseline->add_option("--kind", kind, "raw, rollout, gradcam, tmme, tmme_last<k> or all")->required();
  baseline->add_option("-o,--out", out_dir)->required();

  auto* align = app.add_subcommand("eval-align", "NSS and rank correlation against human maps");
  align->add_option("corpus", corpus, "corpus manifest")->required();
  align->add_option("--method", method, "glimpse or a baseline kind");
  align->add_option("-o,--out", out_dir)->required();

  auto* faith = app.add_subcommand("eval-faith", "deletion / insertion AUCs from a confidence oracle");
  faith->add_option("corpus", corpus, "corpus manifest")->required();
  faith->add_option("--method", method, "glimpse or a baseline kind");
  faith->add_flag("--synthetic-oracle", synthetic, "use each trace's synth.json planted patches");
  faith->add_option("-o,--out", out_dir)->required();

  auto* synth = app.add_subcommand("synth", "generate synthetic traces from a JSON spec");
  synth->add_option("spec", spec_file)->required();
  synth->add_option("-o,--out", out_dir)->required();
  synth->add_option("--corpus", corpus_size, "number of corpus members");

  auto* validate = app.add_subcommand("validate", "check a trace and print a JSON report");
  validate->add_option("trace_dir", trace_dir)->required();

  auto* serve = app.add_subcommand("serve-oracle", "serve the synthetic oracle protocol");
  serve->add_option("source", source, "trace dir or corpus manifest")->required();
  serve->add_option("--port", port, "TCP port on 127.0.0.1 (0 picks one)");
  serve->add_flag("--stdio", stdio, "answer on stdin/stdout instead of TCP");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  setup_logging(log_json, log_level);
  try {
    if (!config_file.empty()) builder.load_file(config_file);
    for (const auto& [k, v] : flag_values) builder.set_flag(k, v);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "--set expects key=value");
      builder.set_flag(s.substr(0, eq), s.substr(eq + 1));
    }
    builder.build();
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.code());
  }

  if (*explain) return cmd_explain(trace_dir, out_dir, builder);
  if (*baseline) return cmd_baseline(trace_dir, kind, out_dir, builder);
  if (*align) return cmd_eval_align(corpus, method, out_dir, builder);
  if (*faith) return cmd_eval_faith(corpus, method, synthetic, out_dir, builder);
  if (*synth) return cmd_synth(spec_file, out_dir, corpus_size);
  if (*validate) return cmd_validate(trace_dir, std::cout);
  if (*serve) return cmd_serve_oracle(source, port, stdio);
  return kExitInput;
}

}  // namespace glimpse::cli
