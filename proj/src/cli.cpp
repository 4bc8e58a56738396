#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "itergp/diagnostics.hpp"
#include "itergp/experiments.hpp"
#include "itergp/posterior.hpp"
#include "itergp/rng.hpp"
#include "itergp/serialization.hpp"

namespace itergp {
namespace {

constexpr const char* kConfigSchema = R"(experiment config JSON schema:
{
  "scenario": "matern" | "sqexp",
  "n": <int, optional; scenario default when omitted>,
  "methods": [
    {"kind": "exact"},
    {"kind": "evgp", "m": <int>},
    {"kind": "lgp",  "m": <int>, "m_tilde": <int, optional>, "v0": "y"|"z"},
    {"kind": "cggp", "m": <int>}
  ],
  "seeds": [<int>, ...]            (default 1..10),
  "grid": {"count": <int>, "lo": <float>, "hi": <float>}   (optional),
  "output_dir": "<path>",
  "kl_cap": <int, default 2000>,
  "threads": <int, default 1>,
  "quick": <bool, default false>
}
)";

int resolve_threads(int cli_threads) {
  if (cli_threads > 0) return cli_threads;
  if (const char* env = std::getenv("ITERGP_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

std::vector<Index> parse_sizes(const std::string& csv) {
  std::vector<Index> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string tok =
        csv.substr(pos, comma == std::string::npos ? csv.npos : comma - pos);
    out.push_back(static_cast<Index>(std::stoll(tok)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

int run_fit(const std::string& scenario_name, Index n, std::uint64_t seed,
            const std::string& method_name, Index m, const std::string& out_dir,
            const std::string& format, int threads) {
  ExperimentConfig cfg;
  cfg.scenario = scenario_name == "sqexp" ? Scenario::SqExpStudy
                                          : Scenario::MaternStudy;
  if (scenario_name != "matern" && scenario_name != "sqexp") {
    std::cerr << "fit: scenario must be matern or sqexp\n";
    return 1;
  }
  cfg.n = n;
  cfg.seeds = {seed};
  cfg.threads = threads;
  MethodSpec ms;
  if (method_name == "exact")
    ms.kind = MethodSpec::Kind::Exact;
  else if (method_name == "evgp")
    ms.kind = MethodSpec::Kind::EVGP;
  else if (method_name == "lgp")
    ms.kind = MethodSpec::Kind::LGP;
  else if (method_name == "cggp")
    ms.kind = MethodSpec::Kind::CGGP;
  else {
    std::cerr << "fit: method must be exact|evgp|lgp|cggp\n";
    return 1;
  }
  ms.m = m;
  cfg.methods = {ms};
  cfg.output_dir = out_dir;

  const ExperimentReport report = run_experiment(cfg);
  if (!report.cells.empty() && !report.cells.front().error.empty()) {
    std::cerr << "fit: " << report.cells.front().error << "\n";
    return 2;
  }
  if (format == "json")
    std::cout << experiment_report_json(report).dump(2) << "\n";
  else
    std::cout << "method=" << report.cells.front().method
              << " mse=" << report.cells.front().mse
              << " wall_ms=" << report.cells.front().wall_ms << "\n";
  return 0;
}

int run_diag(Index n, Index m, Index num_seeds, const std::string& out_dir,
             const std::string& check) {
  Json out;
  if (check == "kl" || check == "all") {
    // KL decomposition report on a small Matern instance with a CG policy.
    const Dataset data = generate_data(Scenario::MaternStudy, n, 1);
    const KernelSpec spec = scenario_kernel(Scenario::MaternStudy, n);
    const Matrix K = kernel_matrix(spec, data.X);
    Matrix ks = K;
    ks.diagonal().array() += data.sigma2();
    const CgResult cg = cg_solve(matvec_of(ks), data.Y, m, 0.0);
    const KLReport rep = kl_decomposition(
        K, data.sigma2(), closed_form_C_cg(cg.directions, cg.etas, cg.steps),
        data.Y);
    out["kl"] = Json{{"term_trace", rep.term_trace},
                     {"term_quadratic", rep.term_quadratic},
                     {"term_logdet", rep.term_logdet},
                     {"total", rep.total},
                     {"direct", rep.direct},
                     {"regularized", rep.regularized}};
  }
  if (check == "lanczos" || check == "all") {
    // Ritz values of A = K/n on a small Matern instance
    const Dataset data = generate_data(Scenario::MaternStudy, n, 1);
    const KernelSpec spec = scenario_kernel(Scenario::MaternStudy, n);
    const Matrix K = kernel_matrix(spec, data.X);
    const double inv_n = 1.0 / static_cast<double>(n);
    const LanczosResult lan = lanczos(
        [&K, inv_n](const Vector& v) { return Vector(K * v * inv_n); },
        data.Y.normalized(), std::min<Index>(n, m));
    out["lanczos"] = lanczos_result_json(lan, /*include_vectors=*/false);
  }
  if (check == "perturbation" || check == "all") {
    const KernelSpec series = KernelSpec::series_polynomial(1.0, 1.0, 1, 1024);
    const std::vector<Index> sizes = n >= 500
                                         ? std::vector<Index>{n / 4, n / 2, n}
                                         : std::vector<Index>{125, 250, 500};
    const PerturbationSweep sweep =
        relative_perturbation_sweep(series, m, num_seeds, sizes);
    Json j;
    j["sizes"] = sweep.sizes;
    j["medians"] = sweep.medians;
    out["perturbation"] = std::move(j);
  }
  if (check == "trace" || check == "all") {
    const KernelSpec series = KernelSpec::series_polynomial(
        1.0, 1.0, 1, default_series_truncation(n));
    std::vector<std::uint64_t> seeds;
    for (Index s = 1; s <= num_seeds; ++s)
      seeds.push_back(static_cast<std::uint64_t>(s));
    const PartialTraceReport rep = partial_trace_check(series, n, m, seeds);
    out["partial_trace"] = Json{{"empirical_mean", rep.empirical_mean},
                                {"empirical_se", rep.empirical_se},
                                {"population_tail", rep.population_tail},
                                {"seeds", seeds.size()}};
  }
  if (out.empty()) {
    std::cerr << "diag: check must be kl|lanczos|perturbation|trace|all\n";
    return 1;
  }
  if (out_dir.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(std::filesystem::path(out_dir) / "diag.json");
    f << out.dump(2) << "\n";
    std::cout << "wrote " << (std::filesystem::path(out_dir) / "diag.json").string()
              << "\n";
  }
  return 0;
}

int run_demo_inconsistency(const std::vector<Index>& sizes, Index num_seeds,
                           const std::string& out_dir) {
  namespace fs = std::filesystem;
  const std::vector<double> gaps = inconsistency_sweep(sizes, num_seeds);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "inconsistency.csv");
    out << "n,gap\n";
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", gaps[i]);
      out << sizes[i] << ',' << buf << '\n';
    }
  }
  for (std::size_t i = 0; i < sizes.size(); ++i)
    std::cout << "n=" << sizes[i] << " gap=" << gaps[i] << "\n";
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"Iterative Gaussian-process approximation toolkit"};
  app.require_subcommand(1);

  // fit
  auto* fit = app.add_subcommand("fit", "fit one dataset with one method");
  std::string fit_scenario = "matern", fit_method = "exact", fit_out = "out";
  std::string format = "csv";
  Index fit_n = 200, fit_m = 0;
  std::uint64_t seed = 1;
  int threads = 0;
  fit->add_option("--scenario", fit_scenario, "matern|sqexp");
  fit->add_option("--n", fit_n, "sample size");
  fit->add_option("--seed", seed, "seed");
  fit->add_option("--method", fit_method, "exact|evgp|lgp|cggp");
  fit->add_option("--m", fit_m, "iterations for approximate methods");
  fit->add_option("--out", fit_out, "output directory");
  fit->add_option("--format", format, "csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
  fit->add_option("--threads", threads, "worker threads");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a config-driven sweep");
  std::string config_path, exp_out;
  bool quick = false;
  exp->add_option("--config", config_path, "config JSON path")->required();
  exp->add_option("--out", exp_out, "override output directory");
  exp->add_option("--threads", threads, "worker threads");
  exp->add_flag("--quick", quick, "desk-scale sample sizes");

  // timing
  auto* timing = app.add_subcommand("timing", "log-log complexity comparison");
  std::string sizes_csv = "1000,1414,2000,2828,4000,5657,8000";
  std::string timing_out = "out";
  Index reps = 3;
  double alpha = 0.6;
  timing->add_option("--sizes", sizes_csv, "comma-separated n values");
  timing->add_option("--reps", reps, "repetitions per size");
  timing->add_option("--alpha", alpha, "Matern regularity");
  timing->add_option("--out", timing_out, "output directory");

  // diag
  auto* diag = app.add_subcommand("diag", "KL / perturbation / trace reports");
  std::string diag_check = "all", diag_out;
  Index diag_n = 200, diag_m = 10, diag_seeds = 20;
  diag->add_option("--check", diag_check, "kl|lanczos|perturbation|trace|all");
  diag->add_option("--n", diag_n, "instance size");
  diag->add_option("--m", diag_m, "iterations / eigenvalue count");
  diag->add_option("--seeds", diag_seeds, "number of seeds");
  diag->add_option("--out", diag_out, "output directory (stdout when empty)");

  // demo-inconsistency
  auto* demo = app.add_subcommand("demo-inconsistency",
                                  "n-sweep of the shifted-policy gap");
  std::string demo_sizes = "100,200,400,800,1600";
  std::string demo_out = "out";
  Index demo_seeds = 5;
  bool demo_quick = false;
  demo->add_option("--sizes", demo_sizes, "comma-separated n values");
  demo->add_option("--seeds", demo_seeds, "seeds averaged per size");
  demo->add_option("--out", demo_out, "output directory");
  demo->add_flag("--quick", demo_quick, "small sweep {50,100,200}");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed())
      return run_fit(fit_scenario, fit_n, seed, fit_method, fit_m, fit_out,
                     format, resolve_threads(threads));
    if (exp->parsed()) {
      std::ifstream in(config_path);
      if (!in) {
        std::cerr << "experiment: cannot open config '" << config_path << "'\n"
                  << kConfigSchema;
        return 1;
      }
      Json j;
      try {
        j = Json::parse(in);
      } catch (const std::exception& e) {
        std::cerr << "experiment: bad config JSON: " << e.what() << "\n"
                  << kConfigSchema;
        return 1;
      }
      ExperimentConfig cfg;
      try {
        cfg = experiment_config_from_json(j);
      } catch (const std::exception& e) {
        std::cerr << "experiment: invalid config: " << e.what() << "\n"
                  << kConfigSchema;
        return 1;
      }
      if (!exp_out.empty()) cfg.output_dir = exp_out;
      if (quick) cfg.quick = true;
      cfg.threads = resolve_threads(threads > 0 ? threads : cfg.threads);
      const ExperimentReport report = run_experiment(cfg);
      Index failed = 0;
      for (const auto& cell : report.cells)
        if (!cell.error.empty()) ++failed;
      for (const auto& agg : report.aggregates)
        std::cout << agg.method << " mse_mean=" << agg.mse_mean
                  << " mse_sd=" << agg.mse_sd << " kl_mean=" << agg.kl_mean
                  << " bandwidth=" << agg.bandwidth_mean
                  << " wall_ms_median=" << agg.wall_ms_median << "\n";
      if (failed == static_cast<Index>(report.cells.size())) return 2;
      return 0;
    }
    if (timing->parsed()) {
      const TimingReport rep = timing_harness(
          parse_sizes(sizes_csv), alpha, reps,
          (std::filesystem::path(timing_out) / "timing.csv").string());
      std::cout << "slope_exact=" << rep.slope_exact
                << " slope_cggp=" << rep.slope_cggp << "\n";
      return 0;
    }
    if (diag->parsed())
      return run_diag(diag_n, diag_m, diag_seeds, diag_out, diag_check);
    if (demo->parsed()) {
      const std::vector<Index> sizes =
          demo_quick ? std::vector<Index>{50, 100, 200} : parse_sizes(demo_sizes);
      return run_demo_inconsistency(sizes, demo_seeds, demo_out);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace itergp
