#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  const std::string cmd = env_prefix + PATHCURV_BIN + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> fields_of(const std::string& csv_line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : csv_line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

constexpr const char* kHeader =
    "check_id,manifold,dim,params,T,dt,n_paths,seed,lhs,lhs_stderr,rhs,rhs_stderr,margin,"
    "verdict";

}  // namespace

TEST_CASE("presets listing names the catalog") {
  const CliResult r = run_cli("list-presets");
  CHECK(r.code == 0);
  for (const char* token : {"euclidean_ou", "sphere", "hyperbolic", "two_time", "T12-2a",
                            "T11-5", "SLOPE-LOWER", "EXIT", "grad-bismut"})
    CHECK(r.out.find(token) != std::string::npos);
}

TEST_CASE("usage errors exit with the config code") {
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("frobnicate").code == 1);
  CHECK(run_cli("--help").code == 0);

  const CliResult no_op = run_cli("estimate");
  CHECK(no_op.code == 1);
  CHECK(no_op.out == "error: estimate needs --op pt|grad-bismut|grad-cyl|grad-fd\n");

  const CliResult bad_set = run_cli("check --set check.x");
  CHECK(bad_set.code == 1);
  CHECK(bad_set.out == "error: --set 'check.x' is not key=value\n");
}

TEST_CASE("config diagnostics name the offending entry") {
  const std::string cfg = temp_path("cli_diag.cfg");

  write_file(cfg, "manifold.name = euclidean\nmanifold.dim = 1\nfunctional.nam = coord\n");
  CliResult r = run_cli("check --config " + cfg);
  CHECK(r.code == 1);
  CHECK(r.out == "error: " + cfg + ":3: unknown key 'functional.nam'\n");

  write_file(cfg, "functional.params = bogus=1\n");
  r = run_cli("check --config " + cfg);
  CHECK(r.code == 1);
  CHECK(r.out == "error: functional.params: unknown entry 'bogus'\n");

  r = run_cli("check --set check.p=3");
  CHECK(r.code == 1);
  CHECK(r.out == "error: check.p must lie in [1, 2]\n");

  r = run_cli("check --set check.t0=0.2 --set check.t1=0.1 --set check.id=T12-5");
  CHECK(r.code == 1);
  CHECK(r.out == "error: check.t1 must exceed check.t0\n");

  r = run_cli("check --set output.format=yaml");
  CHECK(r.code == 1);
  CHECK(r.out == "error: output.format must be csv or json\n");

  r = run_cli("check --set manifold.name=torus");
  CHECK(r.code == 1);
  CHECK(r.out == "error: unknown manifold preset: torus\n");

  r = run_cli("check --set check.id=T12-5 --set functional.times=0.1234567");
  CHECK(r.code == 1);
  CHECK(r.out.find("time 0.1234567 is not a grid node") != std::string::npos);

  r = run_cli(
      "check --set manifold.name=hyperbolic --set manifold.dim=2 --set check.x=2,0");
  CHECK(r.code == 1);
  CHECK(r.out.find("outside chart validity") != std::string::npos);
}

TEST_CASE("minimal flat run reports a vanishing slope") {
  // All defaults: RIC on euclidean(1). Flat gradients are constant, so the
  // regression residuals vanish identically.
  const CliResult r = run_cli("check");
  REQUIRE(r.code == 0);
  const std::vector<std::string> lines = lines_of(r.out);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == kHeader);
  const std::vector<std::string> f = fields_of(lines[1]);
  REQUIRE(f.size() == 14);
  CHECK(f[0] == "RIC");
  CHECK(f[1] == "euclidean");
  CHECK(f[13] == "estimate");
  CHECK(std::abs(std::strtod(f[8].c_str(), nullptr)) <= 0.05);
}

TEST_CASE("sphere gradient inequality holds from the docs config") {
  const std::string cfg = temp_path("cli_sphere.cfg");
  write_file(cfg,
             "manifold.name = sphere\n"
             "manifold.dim = 2\n"
             "manifold.radius = 1\n"
             "bounds.K1 = 1\n"
             "bounds.K2 = 1\n"
             "functional.name = coord\n"
             "sim.T = 0.5\n"
             "sim.n_paths = 20000\n"
             "check.id = T12-2a\n");
  const CliResult r = run_cli("check --config " + cfg);
  REQUIRE(r.code == 0);
  const std::vector<std::string> lines = lines_of(r.out);
  REQUIRE(lines.size() == 2);
  const std::vector<std::string> f = fields_of(lines[1]);
  REQUIRE(f.size() == 14);
  CHECK(f[0] == "T12-2a");
  CHECK(f[3] == "r=1");
  CHECK(f[13] == "holds");
  CHECK(std::strtod(f[12].c_str(), nullptr) > 0.0);
}

TEST_CASE("slope falsification exits violated") {
  // The short-time slope limits assume Hess f(x) = 0; the linear eigenfunction
  // at the default equator start satisfies that, the chart coordinate does not.
  const CliResult r = run_cli(
      "check --set manifold.name=sphere --set manifold.dim=2 --set check.id=SLOPE-LOWER "
      "--set functional.name=eigen --set bounds.K2=1.5 --set check.T_list=0.01,0.02 "
      "--set sim.n_paths=20000");
  CHECK(r.code == 2);
  const std::vector<std::string> lines = lines_of(r.out);
  REQUIRE(lines.size() == 2);
  const std::vector<std::string> f = fields_of(lines[1]);
  CHECK(f[13] == "violated");
  CHECK(std::strtod(f[12].c_str(), nullptr) < 0.0);
}

TEST_CASE("reruns write byte-identical files") {
  const std::string cfg = temp_path("cli_rerun.cfg");
  const std::string out_a = temp_path("cli_rerun_a.csv");
  const std::string out_b = temp_path("cli_rerun_b.csv");
  write_file(cfg,
             "manifold.name = euclidean\n"
             "manifold.dim = 1\n"
             "functional.name = coord\n"
             "sim.T = 0.3\n"
             "sim.n_paths = 4000\n"
             "check.id = T12-5\n");
  REQUIRE(run_cli("check --config " + cfg + " --set output.path=" + out_a).code == 0);
  REQUIRE(run_cli("check --config " + cfg + " --set output.path=" + out_b).code == 0);
  const std::string a = read_file(out_a);
  CHECK(lines_of(a)[0] == kHeader);
  CHECK(a == read_file(out_b));
}

TEST_CASE("worker count never changes the bytes") {
  const std::string cfg = temp_path("cli_workers.cfg");
  write_file(cfg,
             "manifold.name = sphere\n"
             "manifold.dim = 2\n"
             "functional.name = coord\n"
             "sim.T = 0.2\n"
             "sim.n_paths = 6000\n"
             "check.id = T12-3\n"
             "bounds.K1 = 1\n"
             "bounds.K2 = 1\n");
  const CliResult one = run_cli("check --config " + cfg, "PATHCURV_WORKERS=1 ");
  const CliResult three = run_cli("check --config " + cfg, "PATHCURV_WORKERS=3 ");
  REQUIRE(one.code == 0);
  CHECK(one.out == three.out);
}

TEST_CASE("json echo round-trips to an identical report") {
  const std::string cfg = temp_path("cli_round.cfg");
  const std::string cfg2 = temp_path("cli_round_echo.cfg");
  write_file(cfg,
             "manifold.name = euclidean_ou\n"
             "manifold.dim = 1\n"
             "manifold.lambda = 1\n"
             "bounds.K1 = 1\n"
             "bounds.K2 = 1\n"
             "functional.name = sine\n"
             "sim.T = 0.3\n"
             "sim.n_paths = 3000\n"
             "check.id = T12-2a\n"
             "output.format = json\n");
  const CliResult first = run_cli("check --config " + cfg);
  REQUIRE(first.code == 0);

  // Rebuild a config file from the echoed key/value pairs alone.
  const std::size_t cfg_at = first.out.find("\"config\"");
  const std::size_t result_at = first.out.find("\"result\"");
  REQUIRE(cfg_at != std::string::npos);
  REQUIRE(result_at != std::string::npos);
  const std::string echo = first.out.substr(cfg_at, result_at - cfg_at);
  const std::regex pair_re("\"([^\"]+)\": \"([^\"]*)\"");
  std::string text;
  int pairs = 0;
  for (auto it = std::sregex_iterator(echo.begin(), echo.end(), pair_re);
       it != std::sregex_iterator(); ++it, ++pairs)
    text += (*it)[1].str() + " = " + (*it)[2].str() + "\n";
  CHECK(pairs == 27);
  write_file(cfg2, text);

  const CliResult second = run_cli("check --config " + cfg2);
  REQUIRE(second.code == 0);
  CHECK(first.out == second.out);
}

TEST_CASE("sweep emits one row per horizon and a summary") {
  const std::string cfg = temp_path("cli_sweep.cfg");
  write_file(cfg,
             "manifold.name = euclidean\n"
             "manifold.dim = 1\n"
             "functional.name = coord\n"
             "sim.T = 0.2\n"
             "sim.n_paths = 2000\n"
             "check.id = T12-5\n"
             "check.T_list = 0.1,0.2\n");
  const CliResult r = run_cli("sweep --config " + cfg);
  REQUIRE(r.code == 0);
  const std::vector<std::string> lines = lines_of(r.out);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == kHeader);
  CHECK(fields_of(lines[1])[4] == "0.1");
  CHECK(fields_of(lines[2])[4] == "0.2");
  const std::vector<std::string> summary = fields_of(lines[3]);
  CHECK(summary[4] == "*");
  CHECK(summary[9].empty());
  CHECK(summary[11].empty());
  CHECK(summary[13] == "estimate");
  for (int row : {1, 2}) CHECK(fields_of(lines[row])[13] == "holds");
}

TEST_CASE("estimate rows leave the inequality columns empty") {
  const std::string cfg = temp_path("cli_estimate.cfg");
  write_file(cfg,
             "manifold.name = euclidean\n"
             "manifold.dim = 2\n"
             "functional.name = coord\n"
             "sim.T = 0.25\n"
             "sim.dt = 0.005\n"
             "sim.n_paths = 400\n"
             "sim.seed = 7\n"
             "check.x = 0.3,0\n");
  for (const char* op : {"pt", "grad-bismut", "grad-cyl", "grad-fd"}) {
    const CliResult r = run_cli("estimate --op " + std::string(op) + " --config " + cfg);
    REQUIRE(r.code == 0);
    const std::vector<std::string> lines = lines_of(r.out);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == kHeader);
    const std::vector<std::string> f = fields_of(lines[1]);
    REQUIRE(f.size() == 14);
    CHECK(f[0] == op);
    CHECK(f[10].empty());
    CHECK(f[11].empty());
    CHECK(f[12].empty());
    CHECK(f[13] == "estimate");
    CHECK(std::strtod(f[8].c_str(), nullptr) == doctest::Approx(0.3).epsilon(0.5));
  }
}

TEST_CASE("doubles survive both text formats") {
  const std::string cfg = temp_path("cli_digits.cfg");
  write_file(cfg,
             "manifold.name = sphere\n"
             "manifold.dim = 2\n"
             "functional.name = coord\n"
             "sim.T = 0.3\n"
             "sim.n_paths = 2000\n"
             "check.id = T12-5\n"
             "bounds.K1 = 1\n"
             "bounds.K2 = 1\n");
  const CliResult csv = run_cli("check --config " + cfg);
  const CliResult json = run_cli("check --config " + cfg + " --set output.format=json");
  REQUIRE(csv.code == 0);
  REQUIRE(json.code == 0);

  const double lhs_csv = std::strtod(fields_of(lines_of(csv.out)[1])[8].c_str(), nullptr);
  const std::regex lhs_re("\"lhs\": \\{\\s*\"value\": ([^,\\s]+)");
  std::smatch m;
  REQUIRE(std::regex_search(json.out, m, lhs_re));
  const double lhs_json = std::strtod(m[1].str().c_str(), nullptr);
  CHECK(std::memcmp(&lhs_csv, &lhs_json, sizeof(double)) == 0);
  CHECK(lhs_csv != 0.0);
}
