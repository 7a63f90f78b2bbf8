// End-to-end tests of the installed command-line binary: exit codes, usage,
// CSV emission, validation mode, presets, and thread-count determinism.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch_dir() {
  fs::path dir = fs::temp_directory_path() / "isac_cli_tests";
  fs::create_directories(dir);
  return dir;
}

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  fs::path dir = scratch_dir();
  fs::path of = dir / ("stdout" + std::to_string(++counter) + ".txt");
  fs::path ef = dir / ("stderr" + std::to_string(counter) + ".txt");
  std::string cmd = env_prefix + (env_prefix.empty() ? "" : " ") + "\"" + ISAC_CLI_PATH + "\" " +
                    args + " > \"" + of.string() + "\" 2> \"" + ef.string() + "\"";
  int rc = std::system(cmd.c_str());
  CliResult r;
  if (rc != -1 && WIFEXITED(rc)) r.exit_code = WEXITSTATUS(rc);
  r.out = slurp(of);
  r.err = slurp(ef);
  return r;
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::path p = scratch_dir() / name;
  std::ofstream f(p, std::ios::binary);
  f << text;
  return p;
}

}  // namespace

TEST_CASE("usage and argument errors", "[cli]") {
  CliResult none = run_cli("");
  CHECK(none.exit_code == 2);
  CHECK(none.err.find("usage:") != std::string::npos);

  CliResult help = run_cli("--help");
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("usage:") != std::string::npos);
  CHECK(help.out.find("presets:") != std::string::npos);
  CHECK(help.out.find("specfun-selftest") != std::string::npos);

  CHECK(run_cli("frobnicate").exit_code == 2);
  CHECK(run_cli("run").exit_code == 2);
  CHECK(run_cli("run --badflag cfg.ini").exit_code == 2);
  CHECK(run_cli("run /no/such/file.ini").exit_code == 2);
  CHECK(run_cli("reproduce").exit_code == 2);
}

TEST_CASE("config errors are reported with their location and exit code 2", "[cli]") {
  fs::path cfg = write_config("bad_key.ini", "[network]\nwot = 1\n");
  CliResult r = run_cli("run \"" + cfg.string() + "\"");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("bad_key.ini:2") != std::string::npos);
  CHECK(r.err.find("wot") != std::string::npos);

  fs::path dom = write_config("bad_domain.ini", "[network]\nbeta = 1.5\n");
  CliResult rd = run_cli("run \"" + dom.string() + "\"");
  CHECK(rd.exit_code == 2);
  CHECK(rd.err.find("out of domain") != std::string::npos);
}

TEST_CASE("run emits the CSV contract on stdout and honors --out", "[cli]") {
  fs::path cfg = write_config("small_run.ini",
                              "[run]\n"
                              "metric = p_localizable, positioning\n"
                              "engine = analytic\n");
  CliResult r = run_cli("run \"" + cfg.string() + "\"");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("sweep_param,sweep_value,metric,engine,value,ci_half_width,n_samples,"
                   "wall_time_s") != std::string::npos);
  CHECK(r.out.find("none,,p_localizable,analytic,") != std::string::npos);
  CHECK(r.out.find("none,,positioning,analytic,") != std::string::npos);
  CHECK(r.out.find("# network.beta = ") != std::string::npos);

  fs::path outfile = scratch_dir() / "run_result.csv";
  fs::remove(outfile);
  CliResult ro = run_cli("run \"" + cfg.string() + "\" --out \"" + outfile.string() + "\"");
  REQUIRE(ro.exit_code == 0);
  CHECK(fs::exists(outfile));
  CHECK(ro.err.find("wrote 2 rows") != std::string::npos);
  CHECK(slurp(outfile).find("p_localizable") != std::string::npos);
}

TEST_CASE("unused-key warnings go to stderr and do not fail the run", "[cli]") {
  fs::path cfg = write_config("warned.ini",
                              "[network]\n"
                              "lambda_u_per_km2 = 40\n"
                              "[run]\n"
                              "metric = p_localizable\n");
  CliResult r = run_cli("run \"" + cfg.string() + "\"");
  CHECK(r.exit_code == 0);
  CHECK(r.err.find("warning:") != std::string::npos);
  CHECK(r.err.find("lambda_u_per_km2") != std::string::npos);
}

TEST_CASE("special-function self test passes", "[cli]") {
  CliResult r = run_cli("specfun-selftest");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("SELFTEST PASS") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("validate reports per-metric agreement and passes on a sane grid", "[cli]") {
  fs::path cfg = write_config("validate.ini",
                              "[run]\n"
                              "metric = p_localizable, communication_sinr\n"
                              "n_trials = 20000\n"
                              "seed = 6\n"
                              "[sweep]\n"
                              "parameter = eps2\n"
                              "values = 0.5, 1, 2\n");
  CliResult r = run_cli("validate \"" + cfg.string() + "\"");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("VALIDATION PASS") != std::string::npos);
  CHECK(r.out.find("p_localizable") != std::string::npos);
  CHECK(r.out.find("communication_sinr") != std::string::npos);
  CHECK(r.out.find("max |diff|") != std::string::npos);
}

TEST_CASE("reproduce writes the named preset artifact", "[cli]") {
  CliResult bad = run_cli("reproduce --preset unknown-figure");
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("available:") != std::string::npos);

  fs::path dir = scratch_dir() / "repro";
  fs::remove_all(dir);
  CliResult r = run_cli("reproduce --preset positioning-coverage --out \"" + dir.string() + "\"");
  REQUIRE(r.exit_code == 0);
  fs::path artifact = dir / "positioning-coverage.csv";
  REQUIRE(fs::exists(artifact));
  std::string body = slurp(artifact);
  CHECK(body.find("eps1,") != std::string::npos);        // sweep column in use
  CHECK(body.find(",analytic,") != std::string::npos);   // both engines present
  CHECK(body.find(",montecarlo,") != std::string::npos);
  // 8 sweep points x 1 metric x 2 engines = 16 data rows.
  int rows = 0;
  std::istringstream is(body);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty() && line[0] != '#' && line.rfind("sweep_param", 0) != 0) ++rows;
  CHECK(rows == 16);
}

TEST_CASE("identical runs are byte-identical across thread counts", "[cli]") {
  fs::path cfg = write_config("deterministic.ini",
                              "[run]\n"
                              "engine = both\n"
                              "metric = positioning, ergodic_crlb_localizable\n"
                              "n_trials = 4000\n"
                              "seed = 99\n"
                              "[sweep]\n"
                              "parameter = eps1\n"
                              "values = 0.5, 2\n");
  fs::path o1 = scratch_dir() / "det1.csv";
  fs::path o2 = scratch_dir() / "det2.csv";
  CliResult r1 =
      run_cli("run \"" + cfg.string() + "\" --out \"" + o1.string() + "\"", "ISAC_THREADS=1");
  CliResult r2 =
      run_cli("run \"" + cfg.string() + "\" --out \"" + o2.string() + "\"", "ISAC_THREADS=3");
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  std::string b1 = slurp(o1), b2 = slurp(o2);
  REQUIRE(!b1.empty());
  CHECK(b1 == b2);
}
