// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "glimpse/baselines.hpp"
#include "glimpse/cli.hpp"
#include "glimpse/evaluation.hpp"
#include "glimpse/metrics.hpp"
#include "glimpse/render.hpp"
#include "glimpse/saliency.hpp"
#include "glimpse/synth.hpp"
#include "glimpse/trace.hpp"

namespace glimpse::cli {

using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out || ec) throw Error(ErrorCode::IoFailure, fmt::format("cannot write {}", path.string()));
}

void write_run_config(const fs::path& dir, std::string_view command, json inputs,
                      const ConfigBuilder& config) {
  json doc = config.describe();
  doc["command"] = command;
  doc["inputs"] = std::move(inputs);
  doc["version"] = kVersion;
  write_text(dir / "run_config.json", doc.dump(2) + "\n");
}

// Loads and validates; validation failures are input errors.
TraceBundle load_valid_trace(const fs::path& dir) {
  auto trace = load_trace(dir);
  const auto report = validate_trace(trace);
  if (!report.ok()) {
    for (const auto& v : report.violations) {
      spdlog::error("{}: {} {} {}", dir.string(), v.code, v.message, v.location);
    }
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("trace {} failed validation ({} violations)", dir.string(),
                            report.violations.size()));
  }
  return trace;
}

RenderOptions render_options(const RunConfig& config, const TraceBundle& trace,
                             const fs::path& trace_dir) {
  RenderOptions o;
  o.blur_sigma = config.blur_sigma;
  o.overlay_opacity = config.overlay_opacity;
  if (config.image) {
    o.image = fs::path(*config.image);
  } else if (trace.image_path) {
    const fs::path p(*trace.image_path);
    o.image = p.is_absolute() ? p : trace_dir / p;
  }
  return o;
}

// Runs a command body and maps errors to exit codes.
template <typename Fn>
int guarded(std::string_view command, Fn&& body) {
  try {
    return body();
  } catch (const Error& e) {
    spdlog::error("{}: {} ({})", command, e.what(), to_string(e.code()));
    return exit_code(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}: {}", command, e.what());
    return kExitIo;
  }
}

json mean_stderr_json(std::span<const double> values) {
  const auto m = mean_stderr(values);
  return {{"mean", m.mean}, {"std_error", m.n >= 2 ? json(m.std_error) : json(nullptr)}, {"n", m.n}};
}

std::string sample_stem(std::size_t index, const std::string& id) {
  return fmt::format("{:04d}_{}", index, id);
}

std::vector<std::string> all_baseline_kinds(const RunConfig& config, const TraceBundle& trace) {
  const std::size_t k = config.last_k.value_or(std::min<std::size_t>(12, trace.dims.layers));
  return {"raw", "rollout", "gradcam", "tmme", fmt::format("tmme_last{}", k)};
}

}  // namespace

int exit_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IoFailure:
      return kExitIo;
    case ErrorCode::OracleUnavailable:
    case ErrorCode::OracleMalformed:
      return kExitOracle;
    default:
      return kExitInput;
  }
}

int cmd_explain(const fs::path& trace_dir, const fs::path& out_dir, const ConfigBuilder& builder) {
  return guarded("explain", [&] {
    const RunConfig config = builder.build();
    const auto trace = load_valid_trace(trace_dir);
    const auto result = explain(trace, config.engine, config.tokens, config.jobs);
    const auto dir = out_dir / trace.id;
    const auto report = render(result, trace, dir, render_options(config, trace, trace_dir));
    write_run_config(dir, "explain",
                     {{"trace_dir", trace_dir.string()}, {"out_dir", out_dir.string()}}, builder);
    spdlog::info("explain: {} -> {} ({} files)", trace.id, dir.string(), report.written.size() + 1);
    return int{kExitOk};
  });
}

int cmd_baseline(const fs::path& trace_dir, const std::string& kind, const fs::path& out_dir,
                 const ConfigBuilder& builder) {
  return guarded("baseline", [&] {
    const RunConfig config = builder.build();
    if (kind != "all" && !is_known_method(kind)) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("unknown baseline kind '{}' (raw, rollout, gradcam, tmme, tmme_last<k>, all)", kind));
    }
    const auto trace = load_valid_trace(trace_dir);
    const auto kinds = kind == "all" ? all_baseline_kinds(config, trace) : std::vector<std::string>{kind};
    for (const auto& k : kinds) {
      const auto parsed = k == "tmme" && kind != "all" ? parse_baseline(k, config.last_k) : parse_baseline(k);
      const auto dir = out_dir / trace.id / "baselines" / parsed.name();
      render_visual(baseline_map(trace, parsed), dir, render_options(config, trace, trace_dir));
      write_run_config(dir, "baseline",
                       {{"trace_dir", trace_dir.string()}, {"kind", parsed.name()}, {"out_dir", out_dir.string()}},
                       builder);
      spdlog::info("baseline {}: {} -> {}", parsed.name(), trace.id, dir.string());
    }
    return int{kExitOk};
  });
}

int cmd_eval_align(const fs::path& corpus, const std::string& method, const fs::path& out_dir,
                   const ConfigBuilder& builder) {
  return guarded("eval-align", [&] {
    const RunConfig config = builder.build();
    if (!is_known_method(method)) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("unknown method '{}'", method));
    }
    const auto entries = load_corpus_manifest(corpus);
    if (entries.empty()) throw Error(ErrorCode::InvalidArgument, "corpus manifest lists no samples");

    struct Sample {
      std::string id;
      std::optional<AlignmentScore> score;
      std::string skipped;
    };
    std::vector<Sample> samples(entries.size());
    parallel_for(entries.size(), config.jobs, [&](std::size_t i) {
      const auto trace = load_valid_trace(entries[i].trace_dir);
      auto& s = samples[i];
      s.id = trace.id;
      if (entries[i].human_map_path.empty() || !fs::exists(entries[i].human_map_path)) {
        s.skipped = "missing human map";
        spdlog::warn("eval-align: {}: human map {} missing; sample skipped", trace.id,
                     entries[i].human_map_path.string());
        return;
      }
      const auto human = pool_human_map(load_human_map(entries[i].human_map_path), trace.patch_grid);
      const auto saliency = method_saliency(trace, method, config);
      try {
        s.score = alignment(saliency, human, config.theta);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateSaliency && e.code() != ErrorCode::DegenerateInput) throw;
        s.skipped = e.what();
        spdlog::warn("eval-align: {}: {}; sample skipped", trace.id, e.what());
        return;
      }
      write_text(out_dir / "samples" / (sample_stem(i, s.id) + ".json"),
                 json({{"trace_id", s.id}, {"nss", s.score->nss}, {"spearman", s.score->spearman}}).dump(2) + "\n");
    });

    std::string csv = "trace_id,nss,spearman\n";
    std::vector<double> nss_values, rho_values;
    json skipped = json::array();
    for (const auto& s : samples) {
      if (!s.score) {
        skipped.push_back({{"trace_id", s.id}, {"reason", s.skipped}});
        continue;
      }
      csv += fmt::format("{},{:.17g},{:.17g}\n", s.id, s.score->nss, s.score->spearman);
      nss_values.push_back(s.score->nss);
      rho_values.push_back(s.score->spearman);
    }
    write_text(out_dir / "per_sample.csv", csv);
    const json summary = {
        {"method", method},
        {"theta", config.theta},
        {"n", nss_values.size()},
        {"skipped", skipped},
        {"nss", mean_stderr_json(nss_values)},
        {"spearman", mean_stderr_json(rho_values)},
        {"uncertainty", "standard error of the mean"},
    };
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
    write_run_config(out_dir, "eval-align",
                     {{"corpus", corpus.string()}, {"method", method}, {"out_dir", out_dir.string()}}, builder);
    if (nss_values.empty()) {
      spdlog::error("eval-align: no sample could be scored");
      return int{kExitInput};
    }
    spdlog::info("eval-align {}: n={} NSS {:.4f} rho {:.4f}", method, nss_values.size(),
                 summary["nss"]["mean"].get<double>(), summary["spearman"]["mean"].get<double>());
    return int{kExitOk};
  });
}

int cmd_eval_faith(const fs::path& corpus, const std::string& method, bool synthetic_oracle,
                   const fs::path& out_dir, const ConfigBuilder& builder) {
  return guarded("eval-faith", [&] {
    const RunConfig config = builder.build();
    if (!is_known_method(method)) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("unknown method '{}'", method));
    }
    std::string endpoint = config.oracle;
    if (!synthetic_oracle && endpoint.empty()) {
      if (const char* env = std::getenv("GLIMPSE_ORACLE")) endpoint = env;
    }
    if (!synthetic_oracle && endpoint.empty()) {
      throw Error(ErrorCode::InvalidArgument,
                  "no oracle: pass --synthetic-oracle, --oracle ENDPOINT or set GLIMPSE_ORACLE");
    }
    const auto entries = load_corpus_manifest(corpus);
    if (entries.empty()) throw Error(ErrorCode::InvalidArgument, "corpus manifest lists no samples");

    CurveOptions options;
    options.levels = config.levels;
    options.step_patches = config.step_patches;
    const auto timeout = std::chrono::milliseconds(static_cast<long long>(config.oracle_timeout * 1000.0));

    std::vector<std::string> ids(entries.size());
    std::vector<FaithfulnessCurves> curves(entries.size());
    parallel_for(entries.size(), config.jobs, [&](std::size_t i) {
      const auto trace = load_valid_trace(entries[i].trace_dir);
      ids[i] = trace.id;
      std::unique_ptr<ConfidenceOracle> oracle;
      if (synthetic_oracle) {
        const auto spec = load_synth_sidecar(entries[i].trace_dir);
        oracle = std::make_unique<SyntheticOracle>(trace.dims.visual, spec.planted_patches);
      } else {
        oracle = std::make_unique<RemoteOracle>(endpoint, timeout);
      }
      const auto saliency = method_saliency(trace, method, config);
      curves[i] = evaluate_faithfulness(trace, saliency, *oracle, options);
      std::string csv = "mode,level,count,fraction,score\n";
      for (const auto* set : {&curves[i].deletion, &curves[i].insertion}) {
        for (const auto& c : *set) {
          for (std::size_t p = 0; p < c.counts.size(); ++p) {
            csv += fmt::format("{},{},{},{:.17g},{:.17g}\n", to_string(c.mode), c.level, c.counts[p],
                               c.fractions[p], c.scores[p]);
          }
        }
      }
      write_text(out_dir / "curves" / (sample_stem(i, trace.id) + ".csv"), csv);
    });

    std::string csv = "trace_id,mode,level,auc\n";
    json deletion = json::array(), insertion = json::array();
    for (std::size_t l = 0; l < options.levels.size(); ++l) {
      std::vector<double> del, ins;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        del.push_back(curves[i].deletion[l].auc);
        ins.push_back(curves[i].insertion[l].auc);
      }
      json d = mean_stderr_json(del), in = mean_stderr_json(ins);
      d["level"] = options.levels[l];
      in["level"] = options.levels[l];
      deletion.push_back(std::move(d));
      insertion.push_back(std::move(in));
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      for (const auto* set : {&curves[i].deletion, &curves[i].insertion}) {
        for (const auto& c : *set) {
          csv += fmt::format("{},{},{},{:.17g}\n", ids[i], to_string(c.mode), c.level, c.auc);
        }
      }
    }
    write_text(out_dir / "per_sample.csv", csv);
    const json summary = {
        {"method", method},
        {"oracle", synthetic_oracle ? std::string("synthetic") : endpoint},
        {"n", entries.size()},
        {"levels", options.levels},
        {"deletion_auc", deletion},
        {"insertion_auc", insertion},
        {"uncertainty", "standard error of the mean"},
    };
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
    write_run_config(out_dir, "eval-faith",
                     {{"corpus", corpus.string()},
                      {"method", method},
                      {"synthetic_oracle", synthetic_oracle},
                      {"out_dir", out_dir.string()}},
                     builder);
    spdlog::info("eval-faith {}: n={} levels={}", method, entries.size(), options.levels.size());
    return int{kExitOk};
  });
}

int cmd_synth(const fs::path& spec_file, const fs::path& out_dir, std::optional<std::size_t> corpus_size) {
  return guarded("synth", [&] {
    std::ifstream in(spec_file, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, fmt::format("cannot open {}", spec_file.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    const SynthSpec base = synth_spec_from_json(ss.str());

    auto emit = [&](const SynthSpec& spec) {
      const auto dir = out_dir / spec.id;
      save_trace(synth_trace(spec), dir);
      write_text(dir / "synth.json", synth_spec_to_json(spec) + "\n");
      write_text(dir / "human.csv", grid_csv(synth_human_map(spec)));
      return CorpusEntry{dir, dir / "human.csv"};
    };

    if (!corpus_size) {
      emit(base);
      spdlog::info("synth: wrote {}", (out_dir / base.id).string());
      return int{kExitOk};
    }
    std::vector<CorpusEntry> entries;
    for (std::size_t i = 0; i < *corpus_size; ++i) entries.push_back(emit(corpus_member(base, i)));
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    save_corpus_manifest(entries, out_dir / "corpus.json");
    spdlog::info("synth: wrote {} traces and {}", entries.size(), (out_dir / "corpus.json").string());
    return int{kExitOk};
  });
}

int cmd_validate(const fs::path& trace_dir, std::ostream& out) {
  json doc;
  int code = kExitOk;
  try {
    const auto trace = load_trace(trace_dir);
    const auto report = validate_trace(trace);
    json violations = json::array();
    for (const auto& v : report.violations) {
      violations.push_back({{"code", v.code}, {"message", v.message}, {"location", v.location}});
    }
    doc = {{"trace_dir", trace_dir.string()}, {"trace_id", trace.id}, {"ok", report.ok()},
           {"violations", std::move(violations)}};
    if (!report.ok()) code = kExitInput;
  } catch (const Error& e) {
    doc = {{"trace_dir", trace_dir.string()},
           {"ok", false},
           {"error", {{"code", std::string(to_string(e.code()))}, {"message", e.what()}}}};
    code = exit_code(e.code());
  }
  out << doc.dump(2) << "\n";
  return code;
}

int cmd_serve_oracle(const fs::path& source, std::uint16_t port, bool stdio) {
  return guarded("serve-oracle", [&] {
    std::vector<fs::path> dirs;
    if (fs::is_directory(source)) {
      dirs.push_back(source);
    } else {
      for (const auto& e : load_corpus_manifest(source)) dirs.push_back(e.trace_dir);
    }
    auto oracles = std::make_shared<std::map<std::string, std::unique_ptr<SyntheticOracle>>>();
    for (const auto& d : dirs) {
      const auto spec = load_synth_sidecar(d);
      (*oracles)[spec.id] = std::make_unique<SyntheticOracle>(spec.dims.visual, spec.planted_patches);
    }
    OracleHandler handler = [oracles](const OracleRequest& r) {
      const auto it = oracles->find(r.trace_id);
      if (it == oracles->end()) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("unknown trace_id '{}'", r.trace_id));
      }
      return it->second->mean_log_likelihood(r);
    };

    if (stdio) {
      std::string line;
      while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        std::cout << handle_oracle_line(handler, line) << '\n' << std::flush;
      }
      return int{kExitOk};
    }

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);  // server threads inherit the mask
    OracleServer server(handler, port);
    std::cout << fmt::format("listening 127.0.0.1:{}", server.port()) << std::endl;
    spdlog::info("serve-oracle: {} traces on 127.0.0.1:{}", oracles->size(), server.port());
    int received = 0;
    sigwait(&signals, &received);
    server.stop();
    return int{kExitOk};
  });
}

}  // namespace glimpse::cli
