#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qkdnet/metrics.hpp"
#include "qkdnet/qkd_layer.hpp"
#include "qkdnet/scenario.hpp"

namespace py = pybind11;
using namespace qkdnet;

namespace {

struct RunOutput {
  std::string model;
  std::uint64_t seed = 0;
  std::string fingerprint;
  std::string trace_jsonl;
  std::string report_json;
};

RunReport report_for(const RunResult& run) {
  auto rep = summarize(run.trace());
  rep.model = std::string(to_string(run.model));
  rep.seed = run.seed;
  rep.fingerprint = run.fingerprint;
  return rep;
}

RunOptions options(std::optional<std::uint64_t> seed, std::optional<std::string> model) {
  RunOptions o;
  o.seed = seed;
  if (model) o.model = model_from_string(*model);
  return o;
}

}  // namespace

PYBIND11_MODULE(_qkdnet, m) {
  m.doc() = "Multi-domain QKD network control-plane simulator";

  static py::exception<Error> error(m, "QkdnetError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(std::string(to_string(e.code())) + ": " + e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("name", &Scenario::name)
      .def_readonly("source", &Scenario::source)
      .def_readonly("seed", &Scenario::seed)
      .def_property_readonly("model", [](const Scenario& s) { return std::string(to_string(s.model)); })
      .def_property_readonly("duration_s", [](const Scenario& s) { return to_seconds(s.duration); })
      .def_property_readonly("request_count", [](const Scenario& s) { return s.requests.size(); });

  py::class_<RunOutput>(m, "RunOutput")
      .def_readonly("model", &RunOutput::model)
      .def_readonly("seed", &RunOutput::seed)
      .def_readonly("fingerprint", &RunOutput::fingerprint)
      .def_readonly("trace_jsonl", &RunOutput::trace_jsonl)
      .def_readonly("report_json", &RunOutput::report_json);

  m.def("load_scenario", &load_scenario, py::arg("path"));
  m.def("parse_scenario", &parse_scenario, py::arg("text"), py::arg("source") = "<scenario>");
  m.def("validate", &validate_scenario, py::arg("scenario"));
  m.def("fingerprint", &fingerprint, py::arg("scenario"), py::arg("seed"));
  m.def("effective_seed", &effective_seed, py::arg("scenario"), py::arg("seed") = std::nullopt);

  m.def(
      "run",
      [](const Scenario& s, std::optional<std::uint64_t> seed, std::optional<std::string> model) {
        RunResult run;
        {
          py::gil_scoped_release nogil;
          run = run_scenario(s, options(seed, model));
        }
        return RunOutput{std::string(to_string(run.model)), run.seed, run.fingerprint, write_trace(run.trace()),
                         report_to_json(report_for(run))};
      },
      py::arg("scenario"), py::arg("seed") = std::nullopt, py::arg("model") = std::nullopt);

  m.def(
      "compare",
      [](const Scenario& s, const std::string& model_a, const std::string& model_b, std::optional<std::uint64_t> seed) {
        const auto a = report_for(run_scenario(s, options(seed, model_a)));
        const auto b = report_for(run_scenario(s, options(seed, model_b)));
        return comparison_to_json(compare(a, b));
      },
      py::arg("scenario"), py::arg("model_a") = "hierarchical", py::arg("model_b") = "distributed",
      py::arg("seed") = std::nullopt);

  m.def("summarize_trace", [](const std::string& jsonl) { return report_to_json(summarize(read_trace(jsonl))); },
        py::arg("trace_jsonl"));
  m.def(
      "format_session",
      [](const std::string& jsonl, std::uint64_t request) { return format_session(read_trace(jsonl), RequestId{request}); },
      py::arg("trace_jsonl"), py::arg("request_id"));

  m.def(
      "secret_key_rate",
      [](double loss_db, std::optional<double> r0_bps, double max_loss_db) {
        RateModel model;
        if (r0_bps) model.r0_bps = *r0_bps;
        model.max_loss_db = max_loss_db;
        return secret_key_rate(model, loss_db);
      },
      py::arg("loss_db"), py::arg("r0_bps") = std::nullopt, py::arg("max_loss_db") = 30.0);
  m.def("default_r0_bps", &default_r0_bps);
}
