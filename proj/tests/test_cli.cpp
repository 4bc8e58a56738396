#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(ITERGP_CLI_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("experiment subcommand runs a config file") {
  const fs::path dir = fs::temp_directory_path() / "itergp_cli_exp";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "config.json";
  {
    std::ofstream out(cfg);
    out << R"({
      "scenario": "matern",
      "n": 30,
      "methods": [{"kind": "exact"}, {"kind": "cggp", "m": 4}],
      "seeds": [1, 2],
      "grid": {"count": 40},
      "output_dir": ")"
        << (dir / "out").string() << R"("
    })";
  }
  CHECK(run("experiment --config " + cfg.string() + " > /dev/null 2>&1") == 0);
  CHECK(fs::exists(dir / "out" / "summary.csv"));
  CHECK(fs::exists(dir / "out" / "summary.json"));
  CHECK(fs::exists(dir / "out" / "predictions_cggp_m4.csv"));
  fs::remove_all(dir);
}

TEST_CASE("missing or invalid config exits 1") {
  CHECK(run("experiment --config /nonexistent/k.json > /dev/null 2>&1") == 1);
  const fs::path dir = fs::temp_directory_path() / "itergp_cli_bad";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "bad.json");
    out << "{ not json";
  }
  CHECK(run("experiment --config " + (dir / "bad.json").string() +
            " > /dev/null 2>&1") == 1);
  {
    std::ofstream out(dir / "schema.json");
    out << R"({"scenario": "matern", "methods": [{"kind": "warp", "m": 2}]})";
  }
  CHECK(run("experiment --config " + (dir / "schema.json").string() +
            " > /dev/null 2>&1") == 1);
  // usage error without a subcommand
  CHECK(run("> /dev/null 2>&1") == 1);
  fs::remove_all(dir);
}

TEST_CASE("fit subcommand writes predictions") {
  const fs::path dir = fs::temp_directory_path() / "itergp_cli_fit";
  fs::remove_all(dir);
  CHECK(run("fit --scenario matern --n 40 --seed 2 --method cggp --m 5 --out " +
            dir.string() + " > /dev/null 2>&1") == 0);
  CHECK(fs::exists(dir / "predictions_cggp_m5.csv"));
  const std::string pred = slurp(dir / "predictions_cggp_m5.csv");
  CHECK(pred.rfind("x,mean,var,lo,hi\n", 0) == 0);
  CHECK(run("fit --method warp > /dev/null 2>&1") == 1);
  fs::remove_all(dir);
}

TEST_CASE("diag subcommand emits a JSON report") {
  const fs::path dir = fs::temp_directory_path() / "itergp_cli_diag";
  fs::remove_all(dir);
  CHECK(run("diag --check kl --n 50 --m 5 --out " + dir.string() +
            " > /dev/null 2>&1") == 0);
  const nlohmann::json j = nlohmann::json::parse(slurp(dir / "diag.json"));
  CHECK(j.contains("kl"));
  CHECK(j["kl"]["term_logdet"].get<double>() <= 1e-10);

  CHECK(run("diag --check lanczos --n 40 --m 6 --out " + dir.string() +
            " > /dev/null 2>&1") == 0);
  const nlohmann::json l = nlohmann::json::parse(slurp(dir / "diag.json"));
  REQUIRE(l.contains("lanczos"));
  CHECK(l["lanczos"]["krylov_dim"] == 6);
  CHECK(l["lanczos"]["values"].size() == 6);
  // Ritz values of A = K/n are positive and descending
  double prev = 1e300;
  for (const auto& v : l["lanczos"]["values"]) {
    CHECK(v.get<double>() > 0.0);
    CHECK(v.get<double>() <= prev);
    prev = v.get<double>();
  }

  CHECK(run("diag --check bogus > /dev/null 2>&1") == 1);
  fs::remove_all(dir);
}

TEST_CASE("demo-inconsistency produces an increasing gap column") {
  const fs::path dir = fs::temp_directory_path() / "itergp_cli_demo";
  fs::remove_all(dir);
  CHECK(run("demo-inconsistency --quick --seeds 2 --out " + dir.string() +
            " > /dev/null 2>&1") == 0);
  std::ifstream in(dir / "inconsistency.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "n,gap");
  double prev = -1.0;
  int rows = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    const double gap = std::stod(line.substr(comma + 1));
    CHECK(gap > prev);
    prev = gap;
    ++rows;
  }
  CHECK(rows == 3);
  fs::remove_all(dir);
}

TEST_CASE("timing subcommand runs on tiny sizes") {
  const fs::path dir = fs::temp_directory_path() / "itergp_cli_timing";
  fs::remove_all(dir);
  CHECK(run("timing --sizes 50,80 --reps 1 --out " + dir.string() +
            " > /dev/null 2>&1") == 0);
  CHECK(fs::exists(dir / "timing.csv"));
  fs::remove_all(dir);
}

TEST_CASE("help exits cleanly") { CHECK(run("--help > /dev/null 2>&1") == 0); }
