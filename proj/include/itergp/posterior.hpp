#pragma once

#include <Eigen/Cholesky>
#include <memory>
#include <stdexcept>
#include <variant>
#include <vector>

#include "itergp/itergp.hpp"
#include "itergp/kernels.hpp"

namespace itergp {

// A predictive variance below -1e-6 k(x,x) signals numerical corruption;
// small negative values inside that band are clamped to zero.
class NegativeVarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExactSolve {
  Eigen::LLT<Matrix> llt;  // factorization of K + sigma^2 I
};

// Evaluatable posterior: mean(x) = k(X,x)^T w with w the representer weights
// (exact) or their iterative estimate C_m Y; covariance replaces K_sigma^{-1}
// by C_m in the low-rank case, which adds the PSD computational uncertainty.
struct GPPosterior {
  std::shared_ptr<const Dataset> data;
  KernelSpec spec;
  double sigma2 = 0.0;
  Vector weights;
  std::variant<ExactSolve, LowRankPrecision> precision;

  bool is_exact() const { return std::holds_alternative<ExactSolve>(precision); }
  Vector precision_apply(const Eigen::Ref<const Vector>& v) const;
};

// Dense-factorization posterior; guarded at n <= 20000.
GPPosterior exact_posterior(std::shared_ptr<const Dataset> data,
                            const KernelSpec& spec);

GPPosterior approx_posterior(std::shared_ptr<const Dataset> data,
                             const KernelSpec& spec, const IterGPState& state);
GPPosterior approx_posterior(std::shared_ptr<const Dataset> data,
                             const KernelSpec& spec,
                             const LowRankPrecision& precision);

struct PredictPoint {
  double mean = 0.0;
  double variance = 0.0;
};

std::vector<PredictPoint> predict(const GPPosterior& post,
                                  const Eigen::Ref<const Matrix>& xs);

struct BandPoint {
  double lower = 0.0;
  double upper = 0.0;
};

// mean +- z(level) sqrt(variance) with the two-sided standard-normal quantile.
std::vector<BandPoint> credible_band(const GPPosterior& post,
                                     const Eigen::Ref<const Matrix>& grid,
                                     double level);

// z(0.95) = 1.959964 is pinned; other levels go through a rational
// approximation of the normal quantile.
double normal_quantile_two_sided(double level);

}  // namespace itergp
