// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

// Python bindings. Arrays cross the boundary as NumPy copies; settings use
// the same key table as the CLI and config files.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <chrono>
#include <memory>

#include <fmt/format.h>

#include "glimpse/baselines.hpp"
#include "glimpse/cli.hpp"
#include "glimpse/config.hpp"
#include "glimpse/error.hpp"
#include "glimpse/faithfulness.hpp"
#include "glimpse/metrics.hpp"
#include "glimpse/saliency.hpp"
#include "glimpse/synth.hpp"
#include "glimpse/trace.hpp"

namespace py = pybind11;
using namespace glimpse;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_numpy(const std::vector<double>& v) {
  py::array_t<double> out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Matrix from_numpy(const Array& a) {
  if (a.ndim() != 2) throw Error(ErrorCode::ShapeMismatch, "expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

RunConfig run_config(const py::dict& settings) {
  ConfigBuilder b;
  for (const auto& [key, value] : settings) {
    b.set_flag(py::str(key).cast<std::string>(), value.is_none() ? std::string() : py::str(value).cast<std::string>());
  }
  return b.build();
}

py::dict dims_dict(const TraceDims& d) {
  py::dict out;
  out["L"] = d.layers;
  out["H"] = d.heads;
  out["K"] = d.visual;
  out["M"] = d.prompt;
  out["T"] = d.generated;
  out["N"] = d.length();
  return out;
}

py::dict curves_dict(const std::vector<PerturbationCurve>& curves) {
  py::list levels, aucs;
  for (const auto& c : curves) {
    levels.append(c.level);
    aucs.append(c.auc);
  }
  py::dict out;
  out["levels"] = levels;
  out["auc"] = aucs;
  return out;
}

}  // namespace

PYBIND11_MODULE(_glimpse, m) {
  m.doc() = "Gradient-weighted, layer-adaptive saliency for vision-language model traces";
  m.attr("__version__") = "0.1.0";

  // The module attribute keeps the type alive; the handle only borrows it.
  static py::handle glimpse_error = py::exception<Error>(m, "GlimpseError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = glimpse_error(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      py::set_error(glimpse_error, inst);
    }
  });

  py::class_<TraceBundle>(m, "Trace")
      .def_readonly("id", &TraceBundle::id)
      .def_property_readonly("dims", [](const TraceBundle& t) { return dims_dict(t.dims); })
      .def_property_readonly("patch_grid",
                             [](const TraceBundle& t) { return py::make_tuple(t.patch_grid.rows, t.patch_grid.cols); })
      .def_readonly("token_texts", &TraceBundle::token_texts)
      .def_readonly("confidences", &TraceBundle::confidences)
      .def_readonly("function_word_mask", &TraceBundle::function_word_mask)
      .def_readonly("image_path", &TraceBundle::image_path)
      .def("attention",
           [](const TraceBundle& t) {
             const auto& d = t.dims;
             py::array_t<float> out({d.layers, d.heads, d.length(), d.length()});
             std::copy(t.attention.begin(), t.attention.end(), out.mutable_data());
             return out;
           },
           "Attention tensor, shape (L, H, N, N).")
      .def("gradients",
           [](const TraceBundle& t, std::size_t ordinal) {
             const auto& d = t.dims;
             if (ordinal >= d.generated) throw py::index_error("generated token ordinal out of range");
             py::array_t<float> out({d.layers, d.heads, d.length(), d.length()});
             const auto& g = t.gradients[ordinal];
             std::copy(g.begin(), g.end(), out.mutable_data());
             return out;
           },
           py::arg("ordinal"), "Gradient tensor for one generated token, shape (L, H, N, N).")
      .def("__repr__", [](const TraceBundle& t) {
        const auto& d = t.dims;
        return fmt::format("<Trace {} L={} H={} K={} M={} T={}>", t.id, d.layers, d.heads, d.visual, d.prompt,
                           d.generated);
      });

  m.def("load_trace", &load_trace, py::arg("path"));
  m.def("save_trace", &save_trace, py::arg("trace"), py::arg("path"));
  m.def(
      "validate",
      [](const TraceBundle& t, double tol) {
        py::list out;
        for (const auto& v : validate_trace(t, tol).violations) {
          py::dict d;
          d["code"] = v.code;
          d["message"] = v.message;
          d["location"] = v.location;
          out.append(d);
        }
        return out;
      },
      py::arg("trace"), py::arg("tol") = 1e-4, "Invariant violations; an empty list means the trace is valid.");

  m.def(
      "synth_trace", [](const std::string& spec_json) { return synth_trace(synth_spec_from_json(spec_json)); },
      py::arg("spec_json"));
  m.def(
      "synth_human_map",
      [](const std::string& spec_json, std::size_t pixels_per_patch) {
        return to_numpy(synth_human_map(synth_spec_from_json(spec_json), pixels_per_patch));
      },
      py::arg("spec_json"), py::arg("pixels_per_patch") = 4);
  m.def(
      "synth_spec", [](const std::string& spec_json) { return synth_spec_to_json(synth_spec_from_json(spec_json)); },
      py::arg("spec_json"), "Normalizes a partial spec, filling defaults.");

  m.def(
      "explain",
      [](const TraceBundle& t, const py::dict& settings) {
        const auto config = run_config(settings);
        SaliencyResult r;
        {
          py::gil_scoped_release release;
          r = explain(t, config.engine, config.tokens, config.jobs);
        }
        py::dict out;
        out["visual"] = to_numpy(r.visual);
        out["prompt"] = to_numpy(r.prompt);
        out["beta_visual"] = to_numpy(r.tokens.beta_visual);
        out["beta_prompt"] = to_numpy(r.tokens.beta_prompt);
        out["gamma"] = to_numpy(r.token_gamma);
        out["gamma_flowed"] = r.token_gamma_flowed ? py::object(to_numpy(*r.token_gamma_flowed)) : py::none();
        return out;
      },
      py::arg("trace"), py::arg("settings") = py::dict());

  m.def(
      "baseline",
      [](const TraceBundle& t, const std::string& kind, std::optional<std::size_t> last_k) {
        return to_numpy(baseline_map(t, parse_baseline(kind, last_k)));
      },
      py::arg("trace"), py::arg("kind"), py::arg("last_k") = py::none());

  m.def(
      "nss", [](const Array& s, const Array& h, double theta) { return nss(from_numpy(s), from_numpy(h), theta); },
      py::arg("saliency"), py::arg("human"), py::arg("theta") = 95.0);
  m.def(
      "spearman", [](const Array& s, const Array& h) { return spearman(from_numpy(s), from_numpy(h)); },
      py::arg("saliency"), py::arg("human"));
  m.def(
      "pool_human_map",
      [](const Array& h, std::size_t rows, std::size_t cols) {
        return to_numpy(pool_human_map({from_numpy(h), 1}, {rows, cols}));
      },
      py::arg("human"), py::arg("rows"), py::arg("cols"));
  m.def(
      "paired_sign_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto s = paired_sign_test(a, b);
        py::dict out;
        out["wins"] = s.wins;
        out["losses"] = s.losses;
        out["ties"] = s.ties;
        out["p_value"] = s.p_value;
        return out;
      },
      py::arg("a"), py::arg("b"), "One-sided sign test that a exceeds b.");

  m.def(
      "faithfulness",
      [](const TraceBundle& t, const Array& saliency, std::optional<std::vector<std::size_t>> planted,
         std::optional<std::string> endpoint, std::vector<double> levels, std::optional<std::size_t> step,
         double timeout) {
        if (planted.has_value() == endpoint.has_value()) {
          throw Error(ErrorCode::InvalidArgument, "pass exactly one of planted= or endpoint=");
        }
        std::unique_ptr<ConfidenceOracle> oracle;
        if (planted) {
          oracle = std::make_unique<SyntheticOracle>(t.dims.visual, *planted);
        } else {
          oracle = std::make_unique<RemoteOracle>(*endpoint,
                                                  std::chrono::milliseconds(static_cast<long long>(timeout * 1000)));
        }
        CurveOptions opt;
        opt.levels = std::move(levels);
        opt.step_patches = step;
        const auto ranking = perturbation_ranking(from_numpy(saliency));
        std::vector<PerturbationCurve> del, ins;
        {
          py::gil_scoped_release release;
          del = run_curves(t.id, t.dims.visual, ranking, PerturbationMode::Deletion, *oracle, opt);
          ins = run_curves(t.id, t.dims.visual, ranking, PerturbationMode::Insertion, *oracle, opt);
        }
        py::dict out;
        out["deletion"] = curves_dict(del);
        out["insertion"] = curves_dict(ins);
        return out;
      },
      py::arg("trace"), py::arg("saliency"), py::kw_only(), py::arg("planted") = py::none(),
      py::arg("endpoint") = py::none(), py::arg("levels") = std::vector<double>{0.05, 0.15, 0.30},
      py::arg("step") = py::none(), py::arg("timeout") = 10.0,
      "Deletion and insertion AUCs against the synthetic oracle (planted=) or a remote one (endpoint=).");

  m.def(
      "settings",
      [] {
        py::list out;
        for (const auto& s : setting_keys()) out.append(py::make_tuple(s.key, s.help));
        return out;
      },
      "(key, help) for every setting accepted by explain() and the CLI.");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "glimpse");
        py::gil_scoped_release release;
        return glimpse::cli::run(args);
      },
      py::arg("args"), "Runs the command-line interface in-process; returns the exit code.");
}
