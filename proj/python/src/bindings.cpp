// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nadkit/codegen.hpp"
#include "nadkit/graphops.hpp"
#include "nadkit/orchestrator.hpp"
#include "nadkit/validator.hpp"

namespace py = pybind11;
using namespace nadkit;

namespace {

codegen::MacroConfig macro_of(const std::string& json) {
  return json.empty() ? codegen::MacroConfig{} : codegen::MacroConfig::from_json(json);
}

check::Role role_of(const std::string& name) {
  auto r = check::role_from_name(name);
  if (!r) throw ConfigError("unknown role '" + name + "'");
  return *r;
}

py::dict report_dict(const check::ValidationReport& rep) {
  py::list findings;
  for (const auto& f : rep.findings) {
    py::dict d;
    d["node"] = f.node;
    d["kind"] = std::string(check::finding_kind_name(f.kind));
    d["message"] = f.message;
    findings.append(d);
  }
  py::dict shapes;
  for (const auto& [i, s] : rep.inferred) shapes[py::int_(i)] = s;
  py::dict out;
  out["ok"] = rep.ok();
  out["context"] = rep.context();
  out["feedback"] = rep.feedback_json();
  out["findings"] = findings;
  out["shapes"] = shapes;
  return out;
}

}  // namespace

PYBIND11_MODULE(_nadkit, m) {
  m.doc() = "nadkit core bindings";

  static py::exception<Error> base(m, "NadkitError");
  static py::exception<ParseError> parse_error(m, "ParseError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      py::set_error(parse_error, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  py::class_<dsl::Block>(m, "Block")
      .def(py::init([](const std::string& text) { return dsl::parse_block(text); }), py::arg("text"))
      .def_property_readonly("name", &dsl::Block::name)
      .def("__len__", &dsl::Block::size)
      .def("__str__", [](const dsl::Block& b) { return dsl::print_block(b); })
      .def("__repr__", [](const dsl::Block& b) { return "<Block " + b.name() + " " + std::to_string(b.size()) + " nodes>"; })
      .def("__eq__", [](const dsl::Block& a, const dsl::Block& b) { return a == b; })
      .def("ops", [](const dsl::Block& b) {
        std::vector<std::pair<int, std::string>> out;
        for (const auto& [i, n] : b.nodes()) out.emplace_back(i, n.to_string());
        return out;
      });

  m.def("parse_block", &dsl::parse_block, py::arg("text"));
  m.def("print_block", &dsl::print_block, py::arg("block"));

  m.def(
      "validate",
      [](const dsl::Block& b, const std::string& role) { return report_dict(check::validate(b, role_of(role))); },
      py::arg("block"), py::arg("role") = "cell");
  m.def(
      "infer_shapes",
      [](const dsl::Block& b, std::int64_t B, std::int64_t C, std::int64_t dim, std::int64_t H, std::int64_t W) {
        return report_dict(check::infer_shapes(b, {B, C, dim, H, W}));
      },
      py::arg("block"), py::arg("B"), py::arg("C"), py::arg("dim"), py::arg("H"), py::arg("W"));

  m.def("is_isomorphic", &graph::is_isomorphic, py::arg("a"), py::arg("b"));
  m.def(
      "canonical_hash", [](const dsl::Block& b) { return graph::canonical_hash(b).digest; }, py::arg("block"));

  m.def(
      "count_block",
      [](const dsl::Block& b, std::int64_t B, std::int64_t C, std::int64_t dim, std::int64_t H, std::int64_t W) {
        auto r = codegen::count_block(b, {B, C, dim, H, W});
        return std::make_pair(r.params, r.macs);
      },
      py::arg("block"), py::arg("B") = 1, py::arg("C"), py::arg("dim"), py::arg("H"), py::arg("W"));
  m.def(
      "search_width",
      [](const dsl::Block& cell, const dsl::Block& stem, const dsl::Block& down, const std::string& macro) {
        return codegen::search_width(cell, stem, down, macro_of(macro));
      },
      py::arg("cell"), py::arg("stem"), py::arg("downsample"), py::arg("macro_json") = "");
  m.def(
      "assemble",
      [](const dsl::Block& cell, const dsl::Block& stem, const dsl::Block& down, int width, const std::string& macro) {
        return codegen::to_network_json(codegen::assemble(cell, stem, down, macro_of(macro), width));
      },
      py::arg("cell"), py::arg("stem"), py::arg("downsample"), py::arg("width"), py::arg("macro_json") = "");
  m.def(
      "count_network",
      [](const std::string& net) {
        auto r = codegen::count_resources(codegen::from_network_json(net));
        return std::make_pair(r.params, r.macs);
      },
      py::arg("network_json"));
  m.def(
      "emit",
      [](const std::string& net, const std::string& backend) {
        auto files = codegen::emit(codegen::from_network_json(net), backend);
        return std::map<std::string, std::string>(files.begin(), files.end());
      },
      py::arg("network_json"), py::arg("backend") = "json");
  m.def("backends", &codegen::backends);

  m.def(
      "account_cost",
      [](std::int64_t in, std::int64_t out, double in_price, double out_price) {
        return orch::account_cost(in, out, orch::Prices{in_price, out_price});
      },
      py::arg("input_tokens"), py::arg("output_tokens"), py::arg("input_per_million") = 2.50,
      py::arg("output_per_million") = 10.00);
  m.def(
      "compute_metrics",
      [](const std::vector<py::dict>& rows, double in_price, double out_price) {
        std::vector<orch::SampleOutcome> outcomes;
        for (const auto& r : rows) {
          orch::SampleOutcome o;
          o.id = r.contains("id") ? r["id"].cast<std::string>() : std::string();
          o.executable = r["executable"].cast<bool>();
          o.correct = r.contains("correct") && r["correct"].cast<bool>();
          o.input_tokens = r.contains("input_tokens") ? r["input_tokens"].cast<std::int64_t>() : 0;
          o.output_tokens = r.contains("output_tokens") ? r["output_tokens"].cast<std::int64_t>() : 0;
          outcomes.push_back(std::move(o));
        }
        return orch::compute_metrics(std::move(outcomes), orch::Prices{in_price, out_price}).to_json();
      },
      py::arg("samples"), py::arg("input_per_million") = 2.50, py::arg("output_per_million") = 10.00);

  m.def(
      "design",
      [](const std::filesystem::path& config, const std::filesystem::path& out, bool resume) {
        auto cfg = orch::RunConfig::load(config);
        if (!out.empty()) cfg.output_dir = out;
        orch::RunOptions opts;
        opts.resume = resume;
        std::optional<orch::DesignResult> out_res;
        {
          py::gil_scoped_release release;
          out_res.emplace(orch::run_design(cfg, opts));
        }
        const auto& res = *out_res;
        py::dict d;
        d["best_id"] = res.best_id;
        d["nodes"] = res.tree.size();
        d["trained"] = res.trained;
        d["iterations"] = res.iterations;
        d["exhausted"] = res.exhausted;
        d["cost"] = res.cost;
        return d;
      },
      py::arg("config"), py::arg("output_dir") = std::filesystem::path(), py::arg("resume") = false);
}
