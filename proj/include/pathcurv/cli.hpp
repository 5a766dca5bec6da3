#pragma once

// Flat dotted-key configuration, run orchestration and report emission.
// Reports are a pure function of the config: every double is printed with
// shortest round-trip formatting and every container iterates in a fixed
// order, so rerunning a config reproduces files byte for byte.

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pathcurv/estimators.hpp"
#include "pathcurv/strutil.hpp"

namespace pathcurv {

struct RunConfig {
  std::string manifold_name = "euclidean";
  int dim = 1;
  double radius = 1.0;
  double lambda = 1.0;

  double T = 0.5;
  double dt = 1e-3;
  std::uint64_t n_paths = 100000;
  int inner_paths = 1000;
  std::uint64_t seed = 20240817;

  double K1 = std::numeric_limits<double>::quiet_NaN();  // NaN: preset default
  double K2 = std::numeric_limits<double>::quiet_NaN();
  std::string mu_convention = "restart";  // restart | origin
  std::string bounds_preset = "constant";  // constant | quad_trunc (K1 is the cap)

  std::string functional_name = "coord";
  std::vector<double> times;   // explicit sample times; empty picks the battery default
  std::string params;          // comma list: coord=, eps=, bump_offset=, bump_width=, normalize=
  double cutoff_R = 0.0;       // 0 means no cutoff (T11 checks then default to 0.8)
  int cutoff_m = -1;

  std::string check_id = "RIC";  // check ids, or estimate selectors
                                 // pt | grad-bismut | grad-cyl | grad-fd
  double p = 2.0;
  double q = 2.0;
  double t0 = -1.0;
  double t1 = -1.0;
  std::vector<double> T_list;
  std::vector<double> x_coords;  // chart-0 coordinates; empty picks the preset default

  std::string format = "csv";  // csv | json
  std::string out_path;        // empty writes to stdout

  // Parses `key = value` lines; '#' comments. Unknown keys and malformed
  // values raise ConfigError with the offending line number.
  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text, const std::string& origin);
  void apply(const std::string& key, const std::string& value, const std::string& where);

  // Canonical flat key-value echo of the resolved configuration.
  std::vector<std::pair<std::string, std::string>> echo() const;
};

struct RunResult {
  bool is_check = false;
  CheckOutcome outcome;    // when is_check
  EstimateReport report;   // when !is_check
  RunConfig config;        // resolved (bounds, start point, times filled in)
  int exit_code = 0;       // holds/estimate 0, violated 2, inconclusive 3
};

// Validates, resolves defaults and dispatches to the named check or
// estimator.
RunResult run_config(const RunConfig& cfg);

// Runs the configured check once per horizon in check.T_list.
struct SweepResult {
  std::vector<RunResult> rows;
  double lhs0 = 0.0;  // linear T -> 0 extrapolations over the two smallest horizons
  double rhs0 = 0.0;
  double margin0 = 0.0;
  int exit_code = 0;
};
SweepResult run_sweep(const RunConfig& cfg);

std::string render_report(const RunResult& res, const std::string& format);
std::string render_sweep(const SweepResult& sweep, const std::string& format);

// Writes rendered content to path, or stdout when path is empty or "-".
void emit_report(const RunResult& res, const std::string& format, const std::string& path);
void emit_sweep(const SweepResult& sweep, const std::string& format, const std::string& path);

// Fixed preset and catalog listing for the list-presets subcommand.
std::string list_presets_text();

}  // namespace pathcurv
