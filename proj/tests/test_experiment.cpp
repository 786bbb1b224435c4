#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "adm/equilibrium.hpp"
#include "adm/experiment.hpp"
#include "doctest.h"
#include "test_util.hpp"

namespace fs = std::filesystem;

using adm::ConfigError;
using adm::ExperimentConfig;
using adm::ExperimentKind;
using adm::ExperimentResult;
using adm::parse_config_text;
using adm::run_experiment;

namespace {

std::string last_line(const std::string& text) {
  std::size_t end = text.size();
  while (end > 0 && text[end - 1] == '\n') --end;
  const std::size_t start = text.rfind('\n', end - 1);
  return text.substr(start == std::string::npos ? 0 : start + 1,
                     end - (start == std::string::npos ? 0 : start + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(pos));
      break;
    }
    cells.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return cells;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("kind names round-trip") {
  using adm::experiment_from_string;
  for (ExperimentKind kind :
       {ExperimentKind::micro_validate, ExperimentKind::mf_trajectory,
        ExperimentKind::error_decay, ExperimentKind::equilibrium_scan,
        ExperimentKind::frontier, ExperimentKind::optimal_u}) {
    const auto back = experiment_from_string(adm::to_string(kind));
    REQUIRE(back.has_value());
    CHECK(*back == kind);
  }
  CHECK_FALSE(experiment_from_string("mystery").has_value());
}

TEST_CASE("kv and json configs resolve identically") {
  const std::string kv =
      "# steady-state sweep\n"
      "experiment = frontier\n"
      "k_agents = 100\n"
      "p = 0.3\n"
      "lambda = 50\n"
      "u_values = 0.3, 0.5, 0.9\n"
      "seed = 7\n"
      "transient_check = true\n";
  const std::string json_text = R"({
    "experiment": "frontier",
    "k_agents": 100,
    "p": 0.3,
    "lambda": 50,
    "u_values": [0.3, 0.5, 0.9],
    "seed": 7,
    "transient_check": true
  })";
  const ExperimentConfig a = parse_config_text(kv);
  const ExperimentConfig b = parse_config_text(json_text);
  CHECK(adm::config_to_json(a) == adm::config_to_json(b));
  CHECK(a.u_values == std::vector<double>{0.3, 0.5, 0.9});
  CHECK(a.transient_check);
  CHECK(a.seed == 7);
}

TEST_CASE("config rejections name the offending field") {
  const std::string base =
      "experiment = mf-trajectory\nk_agents = 100\np = 0.3\nlambda = 50\n"
      "u = 0.5\nx0 = 0.25\nn0 = 4\nhorizon = 10\n";

  CHECK_THROWS_WITH_AS(parse_config_text(base + "bogus_key = 1\n"),
                       doctest::Contains("bogus_key"), ConfigError);
  try {
    parse_config_text(base + "bogus_key = 1\n");
  } catch (const ConfigError& e) {
    CHECK(e.field == "bogus_key");
  }

  // Known key, wrong experiment.
  try {
    parse_config_text(base + "x_floor = 0.9\n");
    FAIL("x_floor should not be accepted by mean-field");
  } catch (const ConfigError& e) {
    CHECK(e.field == "x_floor");
  }

  // Contradictory control specifications.
  CHECK_THROWS_AS(parse_config_text(base + "u_values = 0.5, 0.7\n"), ConfigError);

  // Duplicate key in kv form.
  CHECK_THROWS_AS(parse_config_text(base + "u = 0.6\n"), ConfigError);

  // Range sweep below the base rate is rejected for error decay.
  CHECK_THROWS_AS(
      parse_config_text("experiment = error-decay\nk_agents = 100\np = 0.3\n"
                        "lambda = 50\nu_values = 0.2, 0.5\nx0 = 0.25\nn0 = 4\n"
                        "horizon = 100\n"),
      ConfigError);

  // Out of range scalar.
  CHECK_THROWS_AS(
      parse_config_text("experiment = mf-trajectory\nk_agents = 0\np = 0.3\n"
                        "lambda = 50\nu = 0.5\nx0 = 0.25\nn0 = 4\nhorizon = 10\n"),
      ConfigError);
}

TEST_CASE("subcommand kind is enforced and fills a missing key") {
  const std::string body =
      "k_agents = 50\np = 0.3\nlambda = 10\nu = 0.5\nx0 = 0.25\nn0 = 4\nhorizon = 5\n";
  const ExperimentConfig filled =
      parse_config_text(body, ExperimentKind::mf_trajectory);
  CHECK(filled.experiment == ExperimentKind::mf_trajectory);

  CHECK_THROWS_AS(parse_config_text(body), ConfigError);
  CHECK_THROWS_AS(parse_config_text("experiment = frontier\n" + body,
                                    ExperimentKind::mf_trajectory),
                  ConfigError);
}

TEST_CASE("u range sweep expands inclusively") {
  const ExperimentConfig cfg = parse_config_text(
      "experiment = frontier\nk_agents = 100\np = 0.3\nlambda = 50\n"
      "u_min = 0.3\nu_max = 1.0\nu_step = 0.05\n");
  REQUIRE(cfg.u_values.size() == 15);
  CHECK(cfg.u_values.front() == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(cfg.u_values.back() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("mean-field run writes a trajectory that converges") {
  testutil::TempDir dir;
  ExperimentConfig cfg = parse_config_text(
      "experiment = mf-trajectory\nk_agents = 100\np = 0.3\nlambda = 50\n"
      "u = 0.5\nx0 = 0.25\nn0 = 4\nhorizon = 10000\n");
  cfg.output_path = dir.path.string();
  const ExperimentResult res = run_experiment(cfg);
  CHECK(res.exit_code == 0);

  const fs::path traj = dir.path / "trajectory_u0.5.csv";
  REQUIRE(fs::exists(traj));
  const std::string text = testutil::read_file(traj.string());
  const std::vector<std::string> cells = split_csv(last_line(text));
  REQUIRE(cells.size() >= 2);
  const double x_final = std::stod(cells[1]);

  const adm::PoissonTable table = adm::build_poisson_table(50.0, 100);
  const double x_star = adm::solve_x_star(0.5, cfg.params, table).x_star;
  CHECK(std::fabs(x_final - x_star) <= 1e-3);

  REQUIRE(fs::exists(dir.path / "summary.json"));
  REQUIRE(fs::exists(dir.path / "manifest.json"));
  const nlohmann::json summary =
      nlohmann::json::parse(testutil::read_file((dir.path / "summary.json").string()));
  REQUIRE(summary.at("points").size() == 1);
  CHECK(summary.at("points")[0].at("u") == 0.5);
  CHECK(std::fabs(summary.at("points")[0].at("x_star").get<double>() - x_star) <= 1e-12);
}

TEST_CASE("json format emits tabular columns and rows") {
  testutil::TempDir dir;
  ExperimentConfig cfg = parse_config_text(
      "experiment = equilibrium-scan\nk_agents = 50\np = 0.9\nlambda = 10\n"
      "u = 0.6\ngrid_size = 200\nformat = json\n");
  cfg.output_path = dir.path.string();
  run_experiment(cfg);

  const nlohmann::json scan_table =
      nlohmann::json::parse(testutil::read_file((dir.path / "phi_scan.json").string()));
  REQUIRE(scan_table.contains("columns"));
  REQUIRE(scan_table.contains("rows"));
  CHECK(scan_table.at("columns") == nlohmann::json({"x_grid", "phi"}));
  CHECK(scan_table.at("rows").size() == 201);

  const nlohmann::json report =
      nlohmann::json::parse(testutil::read_file((dir.path / "scan.json").string()));
  CHECK(report.at("u") == 0.6);
  CHECK(report.at("roots").size() == 1);
  CHECK(report.at("certificate").at("regime") == "contraction");
}

TEST_CASE("infeasible floor exits with code three") {
  testutil::TempDir dir;
  ExperimentConfig cfg = parse_config_text(
      "experiment = optimal-u\nk_agents = 100\np = 0.3\nlambda = 50\n"
      "x_floor = 0.9999999\n");
  cfg.output_path = dir.path.string();
  const ExperimentResult res = run_experiment(cfg);
  CHECK(res.exit_code == 3);
  const std::string report =
      testutil::read_file((dir.path / "optimal_u.json").string());
  CHECK(report.find("INFEASIBLE") != std::string::npos);
  CHECK(report.find("u_star") == std::string::npos);
}

TEST_CASE("manifest reruns reproduce every artifact byte for byte") {
  testutil::TempDir dir;
  ExperimentConfig cfg = parse_config_text(
      "experiment = micro-validate\nk_agents = 8\nlambda = 5\nu = 0.8\n"
      "horizon = 20\nruns = 5\nseed = 42\ninit = uniform\n"
      "alpha_min = 1\nalpha_max = 10\nbeta_min = 1\nbeta_max = 10\n"
      "p_min = 0.1\np_max = 0.9\n");
  cfg.output_path = dir.path.string();
  const ExperimentResult first = run_experiment(cfg);
  REQUIRE_FALSE(first.files.empty());

  std::map<std::string, std::string> snapshot;
  for (const std::string& path : first.files) snapshot[path] = testutil::read_file(path);
  REQUIRE(snapshot.count((dir.path / "manifest.json").string()) == 1);

  const std::string manifest =
      testutil::read_file((dir.path / "manifest.json").string());
  const ExperimentConfig again = parse_config_text(manifest);
  CHECK(again.output_path == cfg.output_path);
  const ExperimentResult second = run_experiment(again);

  REQUIRE(second.files.size() == first.files.size());
  for (const std::string& path : second.files) {
    REQUIRE(snapshot.count(path) == 1);
    CHECK_MESSAGE(testutil::read_file(path) == snapshot[path], path);
  }
}

TEST_CASE("frontier transient check writes its own artifact") {
  testutil::TempDir dir;
  ExperimentConfig cfg = parse_config_text(
      "experiment = frontier\nk_agents = 100\np = 0.3\nlambda = 50\n"
      "u_values = 0.5, 0.9\ntransient_check = true\n");
  cfg.output_path = dir.path.string();
  run_experiment(cfg);
  REQUIRE(fs::exists(dir.path / "frontier.csv"));
  REQUIRE(fs::exists(dir.path / "frontier_transient.csv"));
  const std::string text =
      testutil::read_file((dir.path / "frontier_transient.csv").string());
  CHECK(text.rfind("u,x_transient,throughput_transient\n", 0) == 0);
  const nlohmann::json summary =
      nlohmann::json::parse(testutil::read_file((dir.path / "summary.json").string()));
  CHECK(summary.at("x_inf_nonincreasing") == true);
  CHECK(summary.at("transient").at("horizon") == 1000);
  CHECK(summary.at("transient").at("window") == 200);
}

}  // TEST_SUITE
