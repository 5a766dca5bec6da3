#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>
#include <utility>

#include "pathcurv/cli.hpp"
#include "pathcurv/errors.hpp"

namespace py = pybind11;

namespace {

pathcurv::RunConfig config_from_map(const std::map<std::string, std::string>& kv) {
  pathcurv::RunConfig rc;
  for (const auto& [k, v] : kv) rc.apply(k, v, k);
  return rc;
}

py::dict report_dict(const pathcurv::EstimateReport& r) {
  py::dict d;
  d["value"] = r.value;
  d["stderr"] = r.std_error;
  d["n"] = r.n;
  if (r.is_vector) {
    py::list vec, se;
    for (int i = 0; i < r.vec_value.n; ++i) {
      vec.append(r.vec_value[i]);
      se.append(r.vec_stderr[i]);
    }
    d["vec"] = std::move(vec);
    d["vec_stderr"] = std::move(se);
  }
  py::dict extras;
  for (const auto& kv : r.extras) extras[py::str(kv.first)] = kv.second;
  d["extras"] = std::move(extras);
  return d;
}

py::dict result_dict(const pathcurv::RunResult& res) {
  py::dict d;
  d["check_id"] = res.config.check_id;
  d["exit_code"] = res.exit_code;
  if (res.is_check) {
    d["verdict"] = res.outcome.verdict;
    d["lhs"] = report_dict(res.outcome.lhs);
    d["rhs"] = report_dict(res.outcome.rhs);
    d["margin"] = res.outcome.margin;
  } else {
    d["verdict"] = "estimate";
    d["result"] = report_dict(res.report);
  }
  d["csv"] = pathcurv::render_report(res, "csv");
  d["json"] = pathcurv::render_report(res, "json");
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Monte Carlo checks of path-space curvature inequalities on model manifolds";

  m.def(
      "run",
      [](const std::map<std::string, std::string>& config) {
        return result_dict(pathcurv::run_config(config_from_map(config)));
      },
      py::arg("config"), "Run one check or estimator from a {key: value} config.");

  m.def(
      "run_text",
      [](const std::string& text) {
        return result_dict(
            pathcurv::run_config(pathcurv::RunConfig::from_text(text, "<config>")));
      },
      py::arg("text"), "Run from 'key = value' config text, one pair per line.");

  m.def(
      "sweep",
      [](const std::map<std::string, std::string>& config) {
        const pathcurv::SweepResult sw = pathcurv::run_sweep(config_from_map(config));
        py::dict d;
        d["exit_code"] = sw.exit_code;
        d["lhs0"] = sw.lhs0;
        d["rhs0"] = sw.rhs0;
        d["margin0"] = sw.margin0;
        py::list rows;
        for (const pathcurv::RunResult& r : sw.rows) rows.append(result_dict(r));
        d["rows"] = std::move(rows);
        d["csv"] = pathcurv::render_sweep(sw, "csv");
        d["json"] = pathcurv::render_sweep(sw, "json");
        return d;
      },
      py::arg("config"), "Run the configured check once per horizon in check.T_list.");

  m.def("list_presets", &pathcurv::list_presets_text,
        "Manifold presets, functional batteries and check ids.");
  m.def("format_double", &pathcurv::format_double, py::arg("value"),
        "Shortest round-trip decimal form used in reports.");

  py::register_exception<pathcurv::ConfigError>(m, "ConfigError");
  py::register_exception<pathcurv::InconclusivePower>(m, "InconclusivePower");
  py::register_exception<pathcurv::NoBackend>(m, "NoBackend");
}
