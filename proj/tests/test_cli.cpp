#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "lpvlab/cli.hpp"

using namespace lpvlab;
using namespace lpvlab::cli;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string config_path() { return std::string(LPVLAB_CONFIG_DIR) + "/example.json"; }

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("lpvlab_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

}  // namespace

TEST_CASE("hashing matches the published FNV-1a vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("the bundled config loads with the expected shapes") {
  auto cfg = load_config(config_path());
  CHECK(cfg.hash.size() == 16);
  CHECK(cfg.plant.n_x == 1);
  CHECK(cfg.plant.n_w == 2);
  CHECK(cfg.controller.n_x == 1);
  CHECK(cfg.scheduling.n_rho() == 1);
  auto clp = cfg.closed_loop();
  CHECK(clp.sys.n_x == 2);
  CHECK(clp.sys.A.eval({0.0})(0, 0) == doctest::Approx(-2.0));
  CHECK(clp.sys.A.eval({9.0})(0, 1) == doctest::Approx(23.0));
  auto wl = cfg.weighted_closed_loop();
  CHECK(wl.sys.n_x == 3);
  CHECK(cfg.analysis.xi_grid.res == std::vector<int>{121, 121});
  CHECK(cfg.analysis.alphas.size() == 10);
  CHECK(cfg.sim.reference == 0.5);
  CHECK(cfg.freq.n_points == 400);

  // the hash depends only on the file bytes
  auto again = load_config(config_path());
  CHECK(again.hash == cfg.hash);
}

TEST_CASE("config errors carry the offending field") {
  CHECK_THROWS_AS(load_config("/nonexistent/nope.json"), ConfigError);

  auto dir = fresh_dir("badcfg");
  write_file(dir / "broken.json", "{ not json");
  CHECK_THROWS_AS(load_config((dir / "broken.json").string()), ConfigError);

  json j = json::parse(slurp(config_path()));
  j.erase("plant");
  write_file(dir / "noplant.json", j.dump());
  try {
    load_config((dir / "noplant.json").string());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("plant") != std::string::npos);
  }

  json bad = json::parse(slurp(config_path()));
  bad["analysis"]["xi_res"] = {121};  // dimension mismatch with xi_box
  write_file(dir / "baddim.json", bad.dump());
  CHECK_THROWS_AS(load_config((dir / "baddim.json").string()), ConfigError);
}

TEST_CASE("stability solve emits a valid report and certificate file") {
  auto cfg = load_config(config_path());
  CmdOptions opts;
  auto dir = fresh_dir("stab");
  opts.out_dir = dir.string();
  auto rep = cmd_stability(cfg, opts);
  CHECK(rep.exit_code == 0);
  CHECK(rep.command == "stability");
  CHECK(rep.config_hash == cfg.hash);
  CHECK(validate_report_file((dir / "report.json").string(), "stability"));
  CHECK_FALSE(validate_report_file((dir / "report.json").string(), "l2gain"));

  json out = json::parse(slurp(dir / "stability.json"));
  CHECK(out.at("mode") == "solve");
  CHECK(out.at("status") == "Feasible");
  CHECK(out.at("margin").get<double>() > 0.0);
  CHECK(out.at("lambda_min_X").get<double>() > 0.0);
  REQUIRE(out.at("vertices").size() == 2);
  for (const auto& v : out.at("vertices"))
    CHECK(v.at("max_eig_lyap").get<double>() < 0.0);

  json report = json::parse(slurp(dir / "report.json"));
  CHECK_FALSE(report.contains("wall_time_s"));  // reports are bitwise reproducible
}

TEST_CASE("certificate verification accepts the known matrix and rejects junk") {
  auto cfg = load_config(config_path());
  auto dir = fresh_dir("verify");
  write_file(dir / "x_good.json", "{\"X\": [[0.6240, -0.6951], [-0.6951, 3.1187]]}");
  write_file(dir / "x_bad.json", "[[1.0, 0.0], [0.0, -1.0]]");
  write_file(dir / "x_dims.json", "[[1.0]]");

  CmdOptions opts;
  opts.out_dir = (dir / "good").string();
  opts.verify_x_path = (dir / "x_good.json").string();
  auto rep = cmd_stability(cfg, opts);
  CHECK(rep.exit_code == 0);
  json out = json::parse(slurp(dir / "good" / "stability.json"));
  CHECK(out.at("mode") == "verify");
  CHECK(out.at("valid") == true);

  opts.out_dir = (dir / "bad").string();
  opts.verify_x_path = (dir / "x_bad.json").string();
  CHECK(cmd_stability(cfg, opts).exit_code == 2);

  opts.verify_x_path = (dir / "x_dims.json").string();
  CHECK_THROWS_AS(cmd_stability(cfg, opts), ConfigError);
}

TEST_CASE("an unstable vertex turns into exit code 2") {
  auto cfg = load_config(config_path());
  cfg.plant.A.coef[0](0, 0) = 2.0;  // positive plant pole at rho = 0
  CmdOptions opts;
  opts.out_dir = fresh_dir("unstable").string();
  auto rep = cmd_stability(cfg, opts);
  CHECK(rep.exit_code == 2);
  CHECK(rep.summary == "Infeasible");
}

TEST_CASE("the gain command reports the expected band") {
  auto cfg = load_config(config_path());
  CmdOptions opts;
  auto dir = fresh_dir("gain");
  opts.out_dir = dir.string();
  auto rep = cmd_l2gain(cfg, opts);
  CHECK(rep.exit_code == 0);
  CHECK(validate_report_file((dir / "report.json").string(), "l2gain"));
  json out = json::parse(slurp(dir / "l2gain.json"));
  double gamma = out.at("gamma").get<double>();
  CHECK(gamma >= 1.69);
  CHECK(gamma <= 1.87);
  CHECK(out.at("weighted") == false);
}

TEST_CASE("simulation emits byte-exact CSV headers and verdict rows") {
  auto cfg = load_config(config_path());
  cfg.sim.horizon = 2.0;
  cfg.sim.disturbances = {0.0};
  CmdOptions opts;
  auto dir = fresh_dir("sim");
  opts.out_dir = dir.string();
  auto rep = cmd_simulate(cfg, opts);
  CHECK(rep.exit_code == 0);
  CHECK(validate_report_file((dir / "report.json").string(), "simulate"));

  std::string csv = slurp(dir / "traj_0.csv");
  CHECK(first_line(csv) == "t,xi_1,xi_2,z_1,rho_1");
  // t = 0 row: states at the origin, z = r - x = 0.5, rho = 0
  size_t nl1 = csv.find('\n');
  size_t nl2 = csv.find('\n', nl1 + 1);
  CHECK(csv.substr(nl1 + 1, nl2 - nl1 - 1) == "0,0,0,0.5,0");

  json verdicts = json::parse(slurp(dir / "verdicts.json"));
  REQUIRE(verdicts.at("runs").size() == 1);
  const auto& run = verdicts.at("runs")[0];
  CHECK(run.at("disturbance") == 0.0);
  CHECK(run.at("scheduling_inside") == true);
  CHECK(run.at("csv") == "traj_0.csv");
  CHECK(fs::exists(dir / "sim.svg"));
}

TEST_CASE("simulation runs are bitwise reproducible") {
  auto cfg = load_config(config_path());
  cfg.sim.horizon = 2.0;
  cfg.sim.disturbances = {0.0, -8.0};
  CmdOptions opts;
  auto d1 = fresh_dir("rep1");
  auto d2 = fresh_dir("rep2");
  opts.out_dir = d1.string();
  cmd_simulate(cfg, opts);
  opts.out_dir = d2.string();
  cmd_simulate(cfg, opts);
  for (const char* f : {"traj_0.csv", "traj_1.csv", "verdicts.json", "sim.svg", "report.json"})
    CHECK(slurp(d1 / f) == slurp(d2 / f));
}

TEST_CASE("a reference outside the scheduling range exits with code 2") {
  auto cfg = load_config(config_path());
  cfg.sim.horizon = 10.0;
  cfg.sim.reference = 5.0;  // steady state at x = 5 implies mu = 25 > 9
  cfg.sim.disturbances = {0.0};
  CmdOptions opts;
  opts.out_dir = fresh_dir("viol").string();
  auto rep = cmd_simulate(cfg, opts);
  CHECK(rep.exit_code == 2);
}

TEST_CASE("the set sweep emits the table, masks and flags on a coarse grid") {
  auto cfg = load_config(config_path());
  cfg.analysis.xi_grid.res = {21, 21};
  cfg.analysis.w_points = {3, 3};
  cfg.analysis.r_points = {2, 2};
  cfg.analysis.alphas = {0.1};
  CmdOptions opts;
  auto dir = fresh_dir("sets");
  opts.out_dir = dir.string();
  auto rep = cmd_sets(cfg, opts);
  CHECK(rep.exit_code == 0);
  CHECK(validate_report_file((dir / "report.json").string(), "sets"));

  std::string table = slurp(dir / "alpha_table.csv");
  CHECK(first_line(table) ==
        "alpha,s_hat_cells,xi_bar_cells,r_cells,r_subset_of_s_hat,violation_cells");

  json sets = json::parse(slurp(dir / "sets.json"));
  CHECK(sets.at("certificate").contains("gamma"));
  REQUIRE(sets.at("table").size() == 1);
  CHECK(sets.at("table")[0].at("alpha") == 0.1);

  json masks = json::parse(slurp(dir / "sets_alpha_0.json"));
  REQUIRE(masks.at("s_hat").size() == 21);
  CHECK(masks.at("s_hat")[0].get<std::string>().size() == 21);
  CHECK(fs::exists(dir / "sets_alpha_0.svg"));

  // alpha overrides must stay inside [0, 1]
  opts.alphas = std::vector<double>{1.5};
  CHECK_THROWS_AS(cmd_sets(cfg, opts), ConfigError);
}

TEST_CASE("bode output is reproducible with the documented header") {
  auto cfg = load_config(config_path());
  cfg.freq.n_points = 40;
  cfg.freq.rho_values = {0.0, 9.0};
  CmdOptions opts;
  auto d1 = fresh_dir("bode1");
  auto d2 = fresh_dir("bode2");
  opts.out_dir = d1.string();
  auto rep = cmd_bode(cfg, opts);
  CHECK(rep.exit_code == 0);
  CHECK(validate_report_file((d1 / "report.json").string(), "bode"));
  opts.out_dir = d2.string();
  cmd_bode(cfg, opts);

  std::string csv = slurp(d1 / "bode.csv");
  CHECK(first_line(csv) == "omega_rad_s,rho,channel,magnitude_db");
  CHECK(csv == slurp(d2 / "bode.csv"));
  CHECK(slurp(d1 / "bode_S.svg") == slurp(d2 / "bode_S.svg"));
  CHECK(slurp(d1 / "bode_PS.svg") == slurp(d2 / "bode_PS.svg"));
  // the shaping-bound rows use rho = -1 as a sentinel
  CHECK(csv.find(",-1,inv_We_Wr,") != std::string::npos);
  CHECK(csv.find(",-1,inv_We_Wd,") != std::string::npos);
}

TEST_CASE("the command-line front end parses, dispatches and reports usage errors") {
  auto dir = fresh_dir("cli");
  std::string cfg = config_path();
  std::string out = (dir / "run").string();
  {
    const char* argv[] = {"lpvlab", "stability", "--config", cfg.c_str(), "--out", out.c_str()};
    CHECK(run_cli(6, argv) == 0);
    CHECK(fs::exists(fs::path(out) / "stability.json"));
  }
  {
    const char* argv[] = {"lpvlab", "nonsense"};
    CHECK(run_cli(2, argv) == 1);
  }
  {
    const char* argv[] = {"lpvlab", "stability"};
    CHECK(run_cli(2, argv) == 1);  // --config is required
  }
  {
    const char* argv[] = {"lpvlab", "stability", "--config", "/missing.json"};
    CHECK(run_cli(4, argv) == 1);
  }
  {
    const char* argv[] = {"lpvlab", "--help"};
    CHECK(run_cli(2, argv) == 0);
  }
}
