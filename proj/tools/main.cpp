#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pathcurv/cli.hpp"
#include "pathcurv/errors.hpp"

namespace {

pathcurv::RunConfig build_config(const std::string& config_path,
                                 const std::vector<std::string>& sets) {
  pathcurv::RunConfig rc = config_path.empty() ? pathcurv::RunConfig{}
                                               : pathcurv::RunConfig::from_file(config_path);
  for (const std::string& s : sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw pathcurv::ConfigError("--set '" + s + "' is not key=value");
    rc.apply(s.substr(0, eq), s.substr(eq + 1), "--set " + s.substr(0, eq));
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"path-space curvature checks on model manifolds"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string check_id;
  std::string op;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file with key = value lines");
    sub->add_option("--set", sets, "override one config key, key=value (repeatable)");
  };

  CLI::App* check = app.add_subcommand("check", "run one inequality check");
  add_common(check);
  check->add_option("--id", check_id, "check id (see list-presets)");

  CLI::App* estimate = app.add_subcommand("estimate", "run one estimator");
  add_common(estimate);
  estimate->add_option("--op", op, "pt | grad-bismut | grad-cyl | grad-fd");

  CLI::App* sweep = app.add_subcommand("sweep", "run the configured check over check.T_list");
  add_common(sweep);

  CLI::App* presets = app.add_subcommand("list-presets", "print manifolds, batteries and checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Collapse CLI11's exit-code family: anything but --help is a usage error.
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (presets->parsed()) {
      std::cout << pathcurv::list_presets_text();
      return 0;
    }
    pathcurv::RunConfig rc = build_config(config_path, sets);
    if (check->parsed()) {
      if (!check_id.empty()) rc.check_id = check_id;
    } else if (estimate->parsed()) {
      if (!op.empty()) rc.check_id = op;
      if (rc.check_id != "pt" && rc.check_id != "grad-bismut" && rc.check_id != "grad-cyl" &&
          rc.check_id != "grad-fd")
        throw pathcurv::ConfigError("estimate needs --op pt|grad-bismut|grad-cyl|grad-fd");
    }
    if (sweep->parsed()) {
      const pathcurv::SweepResult sw = pathcurv::run_sweep(rc);
      pathcurv::emit_sweep(sw, rc.format, rc.out_path);
      return sw.exit_code;
    }
    const pathcurv::RunResult res = pathcurv::run_config(rc);
    pathcurv::emit_report(res, rc.format, rc.out_path);
    return res.exit_code;
  } catch (const pathcurv::InconclusivePower& e) {
    std::cerr << "inconclusive: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
