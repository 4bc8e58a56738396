#include "itergp/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "itergp/diagnostics.hpp"
#include "itergp/posterior.hpp"
#include "itergp/rng.hpp"
#include "itergp/serialization.hpp"

namespace itergp {
namespace {

double wall_ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

// Full-precision decimal so reruns are byte-identical.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  if (v.empty()) return 0.0;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

Index resolve_n(const ExperimentConfig& cfg) {
  if (cfg.n > 0 && !cfg.quick) return cfg.n;
  if (cfg.quick)
    return cfg.scenario == Scenario::SqExpStudy ? 1000 : 600;
  return cfg.scenario == Scenario::SqExpStudy ? 5000 : 3000;
}

Index resolve_m_tilde(const MethodSpec& ms, Index n) {
  if (ms.m_tilde > 0) return ms.m_tilde;  // explicit override, validated downstream
  const Index by_log = static_cast<Index>(
      std::ceil(static_cast<double>(ms.m) * std::log(static_cast<double>(n))));
  return std::min(n, std::max(ms.m, by_log));
}

struct SeedWork {
  std::shared_ptr<Dataset> data;
  Matrix K;
  Matrix Ksigma;
  std::shared_ptr<Eigen::LLT<Matrix>> llt;   // K_sigma factor
  Vector w_exact;
  std::shared_ptr<EigenSystem> eig;          // of A = K/n, only when needed
};

bool needs_eig(const std::vector<MethodSpec>& methods) {
  for (const auto& m : methods)
    if (m.kind == MethodSpec::Kind::EVGP) return true;
  return false;
}

}  // namespace

std::string MethodSpec::label() const {
  switch (kind) {
    case Kind::Exact:
      return "exact";
    case Kind::EVGP:
      return "evgp_m" + std::to_string(m);
    case Kind::LGP:
      return "lgp_m" + std::to_string(m);
    case Kind::CGGP:
      return "cggp_m" + std::to_string(m);
  }
  return "unknown";
}

double scenario_truth(Scenario scenario, double x) {
  switch (scenario) {
    case Scenario::MaternStudy:
      return std::pow(std::abs(x - 0.4), 0.6) - std::pow(std::abs(x - 0.2), 0.6);
    case Scenario::SqExpStudy:
      return std::pow(std::abs(x + 1.0), 0.8) - std::pow(std::abs(x - 1.5), 0.8);
    default:
      throw std::invalid_argument("scenario has no truth function");
  }
}

KernelSpec scenario_kernel(Scenario scenario, Index n) {
  switch (scenario) {
    case Scenario::MaternStudy:
      return KernelSpec::matern(0.6);
    case Scenario::SqExpStudy: {
      const double beta = 0.8;
      const double b =
          4.0 * std::pow(static_cast<double>(n), -1.0 / (1.0 + 2.0 * beta));
      return KernelSpec::sqexp(b);
    }
    default:
      throw std::invalid_argument("scenario has no kernel");
  }
}

double scenario_sigma(Scenario scenario) {
  if (scenario == Scenario::MaternStudy || scenario == Scenario::SqExpStudy)
    return 0.2;
  throw std::invalid_argument("scenario has no noise level");
}

GridSpec scenario_grid(Scenario scenario) {
  GridSpec g;
  g.automatic = false;
  if (scenario == Scenario::SqExpStudy) {
    g.lo = -3.0;
    g.hi = 3.0;
  } else {
    g.lo = 0.0;
    g.hi = 1.0;
  }
  return g;
}

Dataset generate_data(Scenario scenario, Index n, std::uint64_t seed) {
  const char* name = nullptr;
  switch (scenario) {
    case Scenario::MaternStudy:
      name = "matern-study";
      break;
    case Scenario::SqExpStudy:
      name = "sqexp-study";
      break;
    default:
      throw std::invalid_argument("generate_data: unknown scenario");
  }
  if (n < 1) throw std::invalid_argument("generate_data: n must be >= 1");

  CounterRng design(name, static_cast<std::uint64_t>(n), seed,
                    CounterRng::kStreamDesign);
  CounterRng noise(name, static_cast<std::uint64_t>(n), seed,
                   CounterRng::kStreamNoise);

  Dataset data;
  data.X.resize(n, 1);
  data.Y.resize(n);
  data.sigma = scenario_sigma(scenario);
  for (Index i = 0; i < n; ++i) {
    data.X(i, 0) = scenario == Scenario::MaternStudy ? design.next_uniform()
                                                     : design.next_normal();
    data.Y(i) = scenario_truth(scenario, data.X(i, 0)) +
                data.sigma * noise.next_normal();
  }
  data.truth = [scenario](const Eigen::Ref<const Vector>& x) {
    return scenario_truth(scenario, x(0));
  };
  return data;
}

namespace {

SeedWork prepare_seed(const ExperimentConfig& cfg, Index n, std::uint64_t seed) {
  SeedWork w;
  w.data = std::make_shared<Dataset>(generate_data(cfg.scenario, n, seed));
  const KernelSpec spec = scenario_kernel(cfg.scenario, n);
  w.K = kernel_matrix(spec, w.data->X, cfg.threads);
  w.Ksigma = w.K;
  w.Ksigma.diagonal().array() += w.data->sigma2();
  w.llt = std::make_shared<Eigen::LLT<Matrix>>(w.Ksigma);
  if (w.llt->info() != Eigen::Success)
    throw std::runtime_error("experiment: K_sigma factorization failed");
  w.w_exact = w.llt->solve(w.data->Y);
  if (needs_eig(cfg.methods))
    w.eig = std::make_shared<EigenSystem>(
        dense_eig(w.K / static_cast<double>(n)));
  return w;
}

struct FittedCell {
  GPPosterior post;
  double wall_ms = 0.0;
  Index m = 0;
};

FittedCell fit_method(const ExperimentConfig& cfg, const SeedWork& work,
                      const MethodSpec& ms, Index n, std::uint64_t seed) {
  const KernelSpec spec = scenario_kernel(cfg.scenario, n);
  const auto t0 = std::chrono::steady_clock::now();
  switch (ms.kind) {
    case MethodSpec::Kind::Exact: {
      GPPosterior post{work.data, spec, work.data->sigma2(), work.w_exact,
                       ExactSolve{*work.llt}};
      return {std::move(post), wall_ms_since(t0), n};
    }
    case MethodSpec::Kind::EVGP: {
      const LowRankPrecision c =
          closed_form_C_ev(*work.eig, ms.m, work.data->sigma2(), n);
      GPPosterior post = approx_posterior(work.data, spec, c);
      return {std::move(post), wall_ms_since(t0), ms.m};
    }
    case MethodSpec::Kind::LGP: {
      Vector v0;
      if (ms.v0 == V0Choice::DataY) {
        v0 = work.data->Y.normalized();
      } else {
        CounterRng rng("lanczos-v0", static_cast<std::uint64_t>(n), seed,
                       CounterRng::kStreamLanczosInit);
        v0.resize(n);
        for (Index i = 0; i < n; ++i) v0(i) = rng.next_normal();
        v0.normalize();
      }
      const Index mt = resolve_m_tilde(ms, n);
      const double inv_n = 1.0 / static_cast<double>(n);
      const LanczosResult lan = lanczos(
          [&work, inv_n](const Vector& v) { return Vector(work.K * v * inv_n); },
          v0, mt);
      const IterGPState state = run_itergp(matvec_of(work.Ksigma), work.data->Y,
                                           policy_lanczos(lan, ms.m), ms.m);
      GPPosterior post = approx_posterior(work.data, spec, state);
      return {std::move(post), wall_ms_since(t0), ms.m};
    }
    case MethodSpec::Kind::CGGP: {
      const CgResult cg =
          cg_solve(matvec_of(work.Ksigma), work.data->Y, ms.m, cfg.cg_tol);
      const LowRankPrecision c =
          closed_form_C_cg(cg.directions, cg.etas, cg.steps);
      GPPosterior post = approx_posterior(work.data, spec, c);
      return {std::move(post), wall_ms_since(t0), ms.m};
    }
  }
  throw std::logic_error("unreachable method kind");
}

CellResult evaluate_cell(const ExperimentConfig& cfg, const SeedWork& work,
                         const MethodSpec& ms, Index n, std::uint64_t seed,
                         const Matrix& grid,
                         std::vector<PredictPoint>* grid_out) {
  CellResult cell;
  cell.method = ms.label();
  cell.m = ms.kind == MethodSpec::Kind::Exact ? n : ms.m;
  cell.seed = seed;
  FittedCell fit = fit_method(cfg, work, ms, n, seed);
  cell.wall_ms = fit.wall_ms;

  // MSE against f0 at the design points: mean(X_i) = (K w)_i
  Vector f0(n);
  for (Index i = 0; i < n; ++i) f0(i) = scenario_truth(cfg.scenario, work.data->X(i, 0));
  cell.mse = mse(work.K * fit.post.weights, f0);

  const auto band = credible_band(fit.post, grid, 0.95);
  double bw = 0.0;
  for (const auto& b : band) bw += b.upper - b.lower;
  cell.mean_bandwidth = bw / static_cast<double>(band.size());

  if (grid_out != nullptr) *grid_out = predict(fit.post, grid);

  if (n <= cfg.kl_cap) {
    if (ms.kind == MethodSpec::Kind::Exact) {
      cell.kl = 0.0;
    } else {
      const auto& c = std::get<LowRankPrecision>(fit.post.precision);
      cell.kl = kl_decomposition(work.K, work.data->sigma2(), c, work.data->Y)
                    .direct;
    }
  } else {
    cell.kl = std::numeric_limits<double>::quiet_NaN();
  }
  return cell;
}

void write_predictions_csv(const std::string& path, const Matrix& grid,
                           const std::vector<PredictPoint>& pts, double z) {
  std::ofstream out(path);
  out << "x,mean,var,lo,hi\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double hw = z * std::sqrt(pts[i].variance);
    out << fmt(grid(static_cast<Index>(i), 0)) << ',' << fmt(pts[i].mean) << ','
        << fmt(pts[i].variance) << ',' << fmt(pts[i].mean - hw) << ','
        << fmt(pts[i].mean + hw) << '\n';
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  ExperimentConfig cfg = config;
  if (cfg.seeds.empty()) throw std::invalid_argument("experiment: seeds empty");
  if (cfg.methods.empty()) throw std::invalid_argument("experiment: no methods");
  const Index n = resolve_n(cfg);
  for (const auto& ms : cfg.methods)
    if (ms.kind != MethodSpec::Kind::Exact && (ms.m < 1 || ms.m > n))
      throw std::invalid_argument("experiment: method m out of range");

  GridSpec grid_spec = cfg.grid.automatic ? scenario_grid(cfg.scenario) : cfg.grid;
  Matrix grid(grid_spec.count, 1);
  for (Index i = 0; i < grid_spec.count; ++i)
    grid(i, 0) = grid_spec.lo + (grid_spec.hi - grid_spec.lo) *
                                    static_cast<double>(i) /
                                    static_cast<double>(grid_spec.count - 1);

  ExperimentReport report;
  report.config = cfg;
  report.resolved_n = n;
  const std::size_t n_methods = cfg.methods.size();
  report.cells.resize(cfg.seeds.size() * n_methods);
  std::vector<std::vector<PredictPoint>> first_seed_preds(n_methods);

  // Seeds run concurrently; methods within a seed share the kernel matrix and
  // the exact factorization. Results land in fixed slots so aggregation is a
  // deterministic ordered fold.
  std::atomic<std::size_t> next_seed{0};
  const int pool = std::max(1, std::min<int>(cfg.threads,
                                             static_cast<int>(cfg.seeds.size())));
  auto worker = [&]() {
    while (true) {
      const std::size_t si = next_seed.fetch_add(1);
      if (si >= cfg.seeds.size()) return;
      const std::uint64_t seed = cfg.seeds[si];
      SeedWork work;
      std::string seed_error;
      try {
        work = prepare_seed(cfg, n, seed);
      } catch (const std::exception& e) {
        seed_error = e.what();
      }
      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        CellResult& cell = report.cells[si * n_methods + mi];
        if (!seed_error.empty()) {
          cell.method = cfg.methods[mi].label();
          cell.m = cfg.methods[mi].m;
          cell.seed = seed;
          cell.error = seed_error;
          continue;
        }
        try {
          std::vector<PredictPoint> preds;
          cell = evaluate_cell(cfg, work, cfg.methods[mi], n, seed, grid,
                               si == 0 ? &preds : nullptr);
          if (si == 0) first_seed_preds[mi] = std::move(preds);
        } catch (const std::exception& e) {
          cell.method = cfg.methods[mi].label();
          cell.m = cfg.methods[mi].m;
          cell.seed = seed;
          cell.error = e.what();
        }
      }
    }
  };
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < pool; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  // Aggregate over seeds, method by method.
  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    MethodAggregate agg;
    agg.method = cfg.methods[mi].label();
    agg.m = cfg.methods[mi].m;
    std::vector<double> mses, walls;
    double klsum = 0.0, bwsum = 0.0;
    Index klcount = 0;
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      const CellResult& cell = report.cells[si * n_methods + mi];
      if (!cell.error.empty()) continue;
      mses.push_back(cell.mse);
      walls.push_back(cell.wall_ms);
      bwsum += cell.mean_bandwidth;
      if (std::isfinite(cell.kl)) {
        klsum += cell.kl;
        ++klcount;
      }
    }
    agg.cells_ok = static_cast<Index>(mses.size());
    if (!mses.empty()) {
      for (double v : mses) agg.mse_mean += v;
      agg.mse_mean /= static_cast<double>(mses.size());
      double var = 0.0;
      for (double v : mses) var += (v - agg.mse_mean) * (v - agg.mse_mean);
      agg.mse_sd = mses.size() > 1
                       ? std::sqrt(var / static_cast<double>(mses.size() - 1))
                       : 0.0;
      agg.bandwidth_mean = bwsum / static_cast<double>(mses.size());
      agg.wall_ms_median = median_of(walls);
      agg.kl_mean = klcount > 0 ? klsum / static_cast<double>(klcount)
                                : std::numeric_limits<double>::quiet_NaN();
    }
    report.aggregates.push_back(std::move(agg));
  }

  if (!cfg.output_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    {
      std::ofstream out(fs::path(cfg.output_dir) / "summary.csv");
      out << "method,m,seed,mse,kl,mean_bandwidth,wall_ms\n";
      for (const auto& cell : report.cells)
        out << cell.method << ',' << cell.m << ',' << cell.seed << ','
            << fmt(cell.mse) << ',' << fmt(cell.kl) << ','
            << fmt(cell.mean_bandwidth) << ',' << fmt(cell.wall_ms) << '\n';
    }
    const double z = normal_quantile_two_sided(0.95);
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      if (first_seed_preds[mi].empty()) continue;
      write_predictions_csv(
          (fs::path(cfg.output_dir) /
           ("predictions_" + cfg.methods[mi].label() + ".csv"))
              .string(),
          grid, first_seed_preds[mi], z);
    }
    std::ofstream out(fs::path(cfg.output_dir) / "summary.json");
    out << experiment_report_json(report).dump(2) << '\n';
  }
  return report;
}

double fit_loglog_slope(const std::vector<Index>& sizes,
                        const std::vector<double>& times) {
  if (sizes.size() != times.size() || sizes.size() < 2)
    throw std::invalid_argument("fit_loglog_slope: need >= 2 points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double k = static_cast<double>(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double x = std::log(static_cast<double>(sizes[i]));
    const double y = std::log(times[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

TimingReport timing_harness(const std::vector<Index>& sizes, double matern_alpha,
                            Index repetitions, const std::string& out_csv) {
  if (sizes.size() < 2) throw std::invalid_argument("timing: need >= 2 sizes");
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1])
      throw std::invalid_argument("timing: sizes must ascend");
  if (repetitions < 1) throw std::invalid_argument("timing: repetitions >= 1");

  TimingReport report;
  std::vector<double> t_exact, t_cggp;
  for (const Index n : sizes) {
    const Dataset data = generate_data(Scenario::MaternStudy, n, 1);
    const KernelSpec spec = KernelSpec::matern(matern_alpha);
    Matrix ksigma = kernel_matrix(spec, data.X);
    ksigma.diagonal().array() += data.sigma2();
    const Index m = static_cast<Index>(std::ceil(
        2.0 * std::pow(static_cast<double>(n), 1.0 / (2.0 * matern_alpha + 1.0))));

    std::vector<double> ex, cg;
    for (Index r = 0; r < repetitions; ++r) {
      {
        const auto t0 = std::chrono::steady_clock::now();
        Matrix work = ksigma;
        Eigen::LLT<Matrix> llt(work);
        volatile double sink = llt.solve(data.Y).sum();
        (void)sink;
        ex.push_back(wall_ms_since(t0));
      }
      {
        const auto t0 = std::chrono::steady_clock::now();
        const CgResult res = cg_solve(matvec_of(ksigma), data.Y, std::min(m, n), 0.0);
        volatile double sink = res.w.sum();
        (void)sink;
        cg.push_back(wall_ms_since(t0));
      }
    }
    const double med_ex = median_of(ex);
    const double med_cg = median_of(cg);
    report.rows.push_back({n, "exact", n, med_ex, repetitions, med_ex < 1.0});
    report.rows.push_back({n, "cggp", m, med_cg, repetitions, med_cg < 1.0});
    t_exact.push_back(med_ex);
    t_cggp.push_back(med_cg);
  }
  report.slope_exact = fit_loglog_slope(sizes, t_exact);
  report.slope_cggp = fit_loglog_slope(sizes, t_cggp);

  if (!out_csv.empty()) {
    std::filesystem::create_directories(
        std::filesystem::path(out_csv).parent_path());
    std::ofstream out(out_csv);
    out << "n,method,m,median_ms,reps,under_resolved\n";
    for (const auto& row : report.rows)
      out << row.n << ',' << row.method << ',' << row.m << ','
          << fmt(row.median_ms) << ',' << row.reps << ','
          << (row.under_resolved ? 1 : 0) << '\n';
  }
  return report;
}

}  // namespace itergp
