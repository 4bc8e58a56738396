#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "itergp/experiments.hpp"
#include "itergp/serialization.hpp"

using namespace itergp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// summary.csv with the wall_ms column blanked out (timings are the one
// permitted nondeterminism)
std::string strip_wall(const std::string& csv) {
  std::stringstream in(csv), out;
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.rfind(',');
    out << line.substr(0, pos) << '\n';
  }
  return out.str();
}

ExperimentConfig small_config(const std::string& outdir) {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::MaternStudy;
  cfg.n = 40;
  cfg.seeds = {1, 2};
  MethodSpec exact;
  exact.kind = MethodSpec::Kind::Exact;
  MethodSpec ev{MethodSpec::Kind::EVGP, 5, 0, V0Choice::DataY};
  MethodSpec lgp{MethodSpec::Kind::LGP, 5, 5, V0Choice::DataY};
  MethodSpec cggp{MethodSpec::Kind::CGGP, 5, 0, V0Choice::DataY};
  cfg.methods = {exact, ev, lgp, cggp};
  cfg.grid.count = 50;
  cfg.output_dir = outdir;
  return cfg;
}

}  // namespace

TEST_CASE("generate_data is deterministic and matches the stated truths") {
  const Dataset a = generate_data(Scenario::MaternStudy, 100, 7);
  const Dataset b = generate_data(Scenario::MaternStudy, 100, 7);
  CHECK((a.X - b.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.Y - b.Y).cwiseAbs().maxCoeff() == 0.0);

  const Dataset c = generate_data(Scenario::MaternStudy, 100, 8);
  CHECK((a.Y - c.Y).cwiseAbs().maxCoeff() > 0.0);

  CHECK(scenario_truth(Scenario::MaternStudy, 0.4) ==
        doctest::Approx(-0.38073).epsilon(1e-4));
  CHECK(scenario_truth(Scenario::SqExpStudy, 1.5) ==
        doctest::Approx(2.08114).epsilon(1e-4));
  CHECK(a.sigma == 0.2);
  for (Index i = 0; i < 100; ++i) {
    CHECK(a.X(i, 0) >= 0.0);
    CHECK(a.X(i, 0) <= 1.0);
  }

  CHECK_THROWS_AS(generate_data(Scenario::TimingStudy, 10, 1),
                  std::invalid_argument);
}

TEST_CASE("scenario kernels") {
  const KernelSpec m = scenario_kernel(Scenario::MaternStudy, 3000);
  CHECK(std::get<MaternKernel>(m.variant()).alpha == 0.6);
  const KernelSpec s = scenario_kernel(Scenario::SqExpStudy, 5000);
  const double b = std::get<SqExpKernel>(s.variant()).bandwidth;
  CHECK(b == doctest::Approx(4.0 * std::pow(5000.0, -1.0 / 2.6)).epsilon(1e-12));
}

TEST_CASE("experiment sweep produces complete reports and files") {
  const fs::path dir = fs::temp_directory_path() / "itergp_test_exp";
  fs::remove_all(dir);
  const ExperimentConfig cfg = small_config(dir.string());
  const ExperimentReport report = run_experiment(cfg);

  CHECK(report.resolved_n == 40);
  REQUIRE(report.cells.size() == 8);  // 2 seeds x 4 methods
  for (const auto& cell : report.cells) {
    CHECK(cell.error.empty());
    CHECK(std::isfinite(cell.mse));
    CHECK(cell.mse < 1.0);
    CHECK(std::isfinite(cell.kl));  // n <= kl_cap
    CHECK(cell.kl >= -1e-8);
    CHECK(cell.mean_bandwidth > 0.0);
  }
  REQUIRE(report.aggregates.size() == 4);
  for (const auto& agg : report.aggregates) CHECK(agg.cells_ok == 2);

  // exact fits no worse than the m=5 approximations on average
  CHECK(report.aggregates[0].mse_mean <= report.aggregates[3].mse_mean + 1e-6);

  CHECK(fs::exists(dir / "summary.csv"));
  CHECK(fs::exists(dir / "summary.json"));
  for (const char* name : {"exact", "evgp_m5", "lgp_m5", "cggp_m5"})
    CHECK(fs::exists(dir / (std::string("predictions_") + name + ".csv")));

  const std::string csv = slurp(dir / "summary.csv");
  CHECK(csv.rfind("method,m,seed,mse,kl,mean_bandwidth,wall_ms\n", 0) == 0);
  const std::string pred = slurp(dir / "predictions_exact.csv");
  CHECK(pred.rfind("x,mean,var,lo,hi\n", 0) == 0);

  const Json summary = Json::parse(slurp(dir / "summary.json"));
  CHECK(summary["cells"].size() == 8);
  CHECK(summary["aggregates"].size() == 4);
  fs::remove_all(dir);
}

TEST_CASE("experiment output is deterministic") {
  const fs::path d1 = fs::temp_directory_path() / "itergp_det1";
  const fs::path d2 = fs::temp_directory_path() / "itergp_det2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  ExperimentConfig cfg = small_config(d1.string());
  cfg.n = 25;
  cfg.methods.resize(3);  // exact, evgp, lgp
  run_experiment(cfg);
  cfg.output_dir = d2.string();
  run_experiment(cfg);

  CHECK(slurp(d1 / "predictions_exact.csv") == slurp(d2 / "predictions_exact.csv"));
  CHECK(slurp(d1 / "predictions_lgp_m5.csv") == slurp(d2 / "predictions_lgp_m5.csv"));
  CHECK(strip_wall(slurp(d1 / "summary.csv")) ==
        strip_wall(slurp(d2 / "summary.csv")));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("exact mse is unaffected by which approximations run alongside") {
  ExperimentConfig alone;
  alone.scenario = Scenario::MaternStudy;
  alone.n = 30;
  alone.seeds = {4};
  MethodSpec exact;
  exact.kind = MethodSpec::Kind::Exact;
  alone.methods = {exact};

  ExperimentConfig crowd = alone;
  crowd.methods.push_back({MethodSpec::Kind::CGGP, 4, 0, V0Choice::DataY});
  crowd.methods.push_back({MethodSpec::Kind::EVGP, 6, 0, V0Choice::DataY});

  const double a = run_experiment(alone).cells[0].mse;
  const double b = run_experiment(crowd).cells[0].mse;
  CHECK(a == b);
}

TEST_CASE("lgp and cggp cells coincide at the figure-1 setting") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::MaternStudy;
  cfg.n = 10;
  cfg.seeds = {1};
  cfg.grid.count = 64;
  MethodSpec lgp{MethodSpec::Kind::LGP, 5, 5, V0Choice::DataY};
  MethodSpec cggp{MethodSpec::Kind::CGGP, 5, 0, V0Choice::DataY};
  cfg.methods = {lgp, cggp};
  const fs::path dir = fs::temp_directory_path() / "itergp_fig1";
  fs::remove_all(dir);
  cfg.output_dir = dir.string();
  const ExperimentReport rep = run_experiment(cfg);
  CHECK(rep.cells[0].error.empty());
  CHECK(rep.cells[1].error.empty());
  CHECK(std::abs(rep.cells[0].mse - rep.cells[1].mse) <= 1e-8);

  // grids agree line by line within 1e-8
  std::ifstream a(dir / "predictions_lgp_m5.csv"), b(dir / "predictions_cggp_m5.csv");
  std::string la, lb;
  std::getline(a, la);
  std::getline(b, lb);
  while (std::getline(a, la) && std::getline(b, lb)) {
    std::stringstream sa(la), sb(lb);
    std::string ta, tb;
    while (std::getline(sa, ta, ',') && std::getline(sb, tb, ','))
      CHECK(std::abs(std::stod(ta) - std::stod(tb)) <= 1e-8);
  }
  fs::remove_all(dir);
}

TEST_CASE("lgp with a gaussian start vector runs and stays deterministic") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::MaternStudy;
  cfg.n = 30;
  cfg.seeds = {1};
  cfg.methods = {{MethodSpec::Kind::LGP, 4, 12, V0Choice::GaussianZ}};
  const ExperimentReport a = run_experiment(cfg);
  const ExperimentReport b = run_experiment(cfg);
  REQUIRE(a.cells[0].error.empty());
  CHECK(a.cells[0].mse == b.cells[0].mse);
  CHECK(a.cells[0].mse < 1.0);

  // a different seed draws a different start vector
  cfg.seeds = {2};
  const ExperimentReport c = run_experiment(cfg);
  CHECK(c.cells[0].mse != a.cells[0].mse);
}

TEST_CASE("failing cells carry explicit error records") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::MaternStudy;
  cfg.n = 20;
  cfg.seeds = {1, 2};
  MethodSpec lgp{MethodSpec::Kind::LGP, 2, 50, V0Choice::DataY};  // m_tilde > n
  MethodSpec exact;
  exact.kind = MethodSpec::Kind::Exact;
  cfg.methods = {exact, lgp};
  const ExperimentReport rep = run_experiment(cfg);
  REQUIRE(rep.cells.size() == 4);
  CHECK(rep.cells[0].error.empty());
  CHECK(!rep.cells[1].error.empty());
  CHECK(rep.cells[1].method == "lgp_m2");
  // one failing cell does not abort the sweep
  CHECK(rep.cells[2].error.empty());
  CHECK(rep.aggregates[1].cells_ok == 0);
}

TEST_CASE("config validation") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::MaternStudy;
  cfg.n = 10;
  cfg.seeds = {};
  MethodSpec exact;
  cfg.methods = {exact};
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  cfg.seeds = {1};
  cfg.methods.clear();
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  cfg.methods = {{MethodSpec::Kind::CGGP, 50, 0, V0Choice::DataY}};  // m > n
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}

TEST_CASE("quick mode shrinks the sample size") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::MaternStudy;
  cfg.quick = true;
  cfg.seeds = {1};
  MethodSpec exact;
  cfg.methods = {exact};
  cfg.kl_cap = 0;  // skip the KL work
  const ExperimentReport rep = run_experiment(cfg);
  CHECK(rep.resolved_n == 600);
  CHECK(std::isnan(rep.cells[0].kl));
}

TEST_CASE("experiment config JSON round trip") {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::SqExpStudy;
  cfg.n = 123;
  cfg.seeds = {3, 5};
  cfg.methods = {{MethodSpec::Kind::LGP, 7, 9, V0Choice::GaussianZ},
                 {MethodSpec::Kind::CGGP, 4, 0, V0Choice::DataY}};
  cfg.kl_cap = 77;
  cfg.threads = 2;
  const ExperimentConfig back =
      experiment_config_from_json(experiment_config_json(cfg));
  CHECK(back.scenario == Scenario::SqExpStudy);
  CHECK(back.n == 123);
  CHECK(back.seeds == cfg.seeds);
  CHECK(back.methods[0].kind == MethodSpec::Kind::LGP);
  CHECK(back.methods[0].m == 7);
  CHECK(back.methods[0].m_tilde == 9);
  CHECK(back.methods[0].v0 == V0Choice::GaussianZ);
  CHECK(back.kl_cap == 77);
  CHECK(back.threads == 2);

  CHECK_THROWS(experiment_config_from_json(Json{{"scenario", "nope"}}));
}

TEST_CASE("loglog slope recovers exact power laws") {
  const std::vector<Index> sizes{100, 200, 400, 800};
  std::vector<double> cubic, quad;
  for (const Index n : sizes) {
    cubic.push_back(2.5e-9 * std::pow(double(n), 3.0));
    quad.push_back(1e-7 * std::pow(double(n), 2.0));
  }
  CHECK(fit_loglog_slope(sizes, cubic) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(fit_loglog_slope(sizes, quad) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(fit_loglog_slope({100}, {1.0}), std::invalid_argument);
}

TEST_CASE("timing harness plumbing") {
  const fs::path dir = fs::temp_directory_path() / "itergp_timing";
  fs::remove_all(dir);
  const TimingReport rep =
      timing_harness({60, 90, 140}, 0.6, 1, (dir / "timing.csv").string());
  REQUIRE(rep.rows.size() == 6);
  for (const auto& row : rep.rows) {
    CHECK(row.median_ms >= 0.0);
    CHECK(std::isfinite(row.median_ms));
  }
  CHECK(std::isfinite(rep.slope_exact));
  CHECK(std::isfinite(rep.slope_cggp));
  const std::string csv = slurp(dir / "timing.csv");
  CHECK(csv.rfind("n,method,m,median_ms,reps,under_resolved\n", 0) == 0);
  CHECK_THROWS_AS(timing_harness({100, 50}, 0.6, 1, ""), std::invalid_argument);
  fs::remove_all(dir);
}

TEST_CASE("multithreaded sweep matches the single-threaded one") {
  ExperimentConfig cfg = small_config("");
  cfg.n = 25;
  cfg.seeds = {1, 2, 3, 4};
  const ExperimentReport serial = run_experiment(cfg);
  cfg.threads = 4;
  const ExperimentReport parallel = run_experiment(cfg);
  REQUIRE(serial.cells.size() == parallel.cells.size());
  for (std::size_t i = 0; i < serial.cells.size(); ++i) {
    CHECK(serial.cells[i].mse == parallel.cells[i].mse);
    CHECK(serial.cells[i].mean_bandwidth == parallel.cells[i].mean_bandwidth);
  }
}
