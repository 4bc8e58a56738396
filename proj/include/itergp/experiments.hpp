#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "itergp/kernels.hpp"

namespace itergp {

enum class Scenario { MaternStudy, SqExpStudy, InconsistencyDemo, TimingStudy, Custom };

enum class V0Choice { DataY, GaussianZ };

struct MethodSpec {
  enum class Kind { Exact, EVGP, LGP, CGGP };
  Kind kind = Kind::Exact;
  Index m = 0;
  Index m_tilde = 0;  // LGP only; 0 resolves to min(n, ceil(m log n))
  V0Choice v0 = V0Choice::DataY;

  std::string label() const;
};

struct GridSpec {
  Index count = 400;
  double lo = 0.0;
  double hi = 1.0;
  bool automatic = true;  // take the scenario's default range
};

struct ExperimentConfig {
  Scenario scenario = Scenario::MaternStudy;
  Index n = 0;  // 0 resolves to the scenario default
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds;
  GridSpec grid;
  std::string output_dir;
  // KL against the exact posterior is dense linear algebra; cells with
  // n > kl_cap record NaN instead of paying the n^3 cost.
  Index kl_cap = 2000;
  int threads = 1;
  bool quick = false;  // shrink n to the desk-scale defaults
  double cg_tol = 0.0;
};

struct CellResult {
  std::string method;
  Index m = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double kl = 0.0;
  double mean_bandwidth = 0.0;
  double wall_ms = 0.0;
  std::string error;  // empty on success
};

struct MethodAggregate {
  std::string method;
  Index m = 0;
  double mse_mean = 0.0;
  double mse_sd = 0.0;
  double kl_mean = 0.0;
  double bandwidth_mean = 0.0;
  double wall_ms_median = 0.0;
  Index cells_ok = 0;
};

struct ExperimentReport {
  ExperimentConfig config;
  Index resolved_n = 0;
  std::vector<CellResult> cells;        // seed-major, method-minor order
  std::vector<MethodAggregate> aggregates;
};

double scenario_truth(Scenario scenario, double x);
KernelSpec scenario_kernel(Scenario scenario, Index n);
double scenario_sigma(Scenario scenario);
GridSpec scenario_grid(Scenario scenario);

// Deterministic for fixed (scenario, n, seed): the design and noise streams
// are independent counter-based generators.
Dataset generate_data(Scenario scenario, Index n, std::uint64_t seed);

// Fits every (seed, method) cell, computes design-point MSE against f0, KL to
// the exact posterior (when n <= kl_cap) and credible-band widths on the
// grid, then aggregates across seeds. Writes CSV/JSON when output_dir is set.
ExperimentReport run_experiment(const ExperimentConfig& config);

struct TimingRow {
  Index n = 0;
  std::string method;
  Index m = 0;
  double median_ms = 0.0;
  Index reps = 0;
  bool under_resolved = false;  // medians below 1 ms
};

struct TimingReport {
  std::vector<TimingRow> rows;
  double slope_exact = 0.0;
  double slope_cggp = 0.0;
};

// Times the fit path only (factorize + representer solve vs. m CG steps with
// m = ceil(2 n^{1/(2 alpha + 1)})); kernel assembly is O(n^2) work common to
// both methods and is excluded so the measured exponents match the solver
// complexities.
TimingReport timing_harness(const std::vector<Index>& sizes, double matern_alpha,
                            Index repetitions, const std::string& out_csv);

// Ordinary least squares slope of log(time) against log(n).
double fit_loglog_slope(const std::vector<Index>& sizes,
                        const std::vector<double>& times);

int cli_main(const std::vector<std::string>& args);

}  // namespace itergp
