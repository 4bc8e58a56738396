#include "itergp/posterior.hpp"

#include <cmath>
#include <iostream>

namespace itergp {
namespace {

// Acklam's rational approximation of the standard normal quantile,
// |relative error| < 1.2e-9 on (0, 1).
double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile_two_sided(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("credible level must lie in (0, 1)");
  if (level == 0.95) return 1.959964;
  return normal_quantile(0.5 * (1.0 + level));
}

Vector GPPosterior::precision_apply(const Eigen::Ref<const Vector>& v) const {
  if (const auto* ex = std::get_if<ExactSolve>(&precision))
    return ex->llt.solve(v);
  return std::get<LowRankPrecision>(precision).apply(v);
}

GPPosterior exact_posterior(std::shared_ptr<const Dataset> data,
                            const KernelSpec& spec) {
  data->validate();
  const Index n = data->n();
  if (n > 20000)
    throw std::invalid_argument("exact_posterior: n exceeds dense guard (20000)");

  Matrix ks = kernel_matrix(spec, data->X);
  ks.diagonal().array() += data->sigma2();
  ExactSolve solve;
  solve.llt.compute(ks);
  if (solve.llt.info() != Eigen::Success) {
    const double pivot = Eigen::LDLT<Matrix>(ks).vectorD().minCoeff();
    throw std::runtime_error(
        "exact_posterior: factorization of K_sigma failed, smallest pivot " +
        std::to_string(pivot));
  }

  const double s2 = data->sigma2();
  Vector w = solve.llt.solve(data->Y);
  return GPPosterior{std::move(data), spec, s2, std::move(w), std::move(solve)};
}

GPPosterior approx_posterior(std::shared_ptr<const Dataset> data,
                             const KernelSpec& spec, const IterGPState& state) {
  data->validate();
  if (state.m > 0 && state.D.rows() != data->n())
    throw std::invalid_argument("approx_posterior: state dimension mismatch");
  const double s2 = data->sigma2();
  Vector w = state.m > 0 ? state.w : Vector::Zero(data->n());
  return GPPosterior{std::move(data), spec, s2, std::move(w), state.precision()};
}

GPPosterior approx_posterior(std::shared_ptr<const Dataset> data,
                             const KernelSpec& spec,
                             const LowRankPrecision& precision) {
  data->validate();
  if (precision.rank() > 0 && precision.columns.rows() != data->n())
    throw std::invalid_argument("approx_posterior: precision dimension mismatch");
  const double s2 = data->sigma2();
  Vector w = precision.rank() > 0 ? precision.apply(data->Y)
                                  : Vector::Zero(data->n());
  return GPPosterior{std::move(data), spec, s2, std::move(w), precision};
}

std::vector<PredictPoint> predict(const GPPosterior& post,
                                  const Eigen::Ref<const Matrix>& xs) {
  const Index p = xs.rows();
  std::vector<PredictPoint> out(static_cast<std::size_t>(p));
  Index warned = 0;
  for (Index i = 0; i < p; ++i) {
    const Vector kx = kernel_cross(post.spec, post.data->X, xs.row(i));
    const double kxx = kernel_eval(post.spec, xs.row(i), xs.row(i));
    const double mean = kx.dot(post.weights);
    double var = kxx - kx.dot(post.precision_apply(kx));
    if (var < -1e-6 * kxx)
      throw NegativeVarianceError(
          "predict: variance " + std::to_string(var) +
          " below -1e-6 k(x,x); numerical corruption");
    if (var < 0.0) {
      if (var < -1e-8 * kxx) ++warned;
      var = 0.0;
    }
    out[static_cast<std::size_t>(i)] = PredictPoint{mean, var};
  }
  if (warned > 0)
    std::cerr << "[itergp] predict: clamped " << warned
              << " negative variance(s) beyond 1e-8 k(x,x)\n";
  return out;
}

std::vector<BandPoint> credible_band(const GPPosterior& post,
                                     const Eigen::Ref<const Matrix>& grid,
                                     double level) {
  const double z = normal_quantile_two_sided(level);
  const auto pts = predict(post, grid);
  std::vector<BandPoint> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double hw = z * std::sqrt(pts[i].variance);
    out[i] = BandPoint{pts[i].mean - hw, pts[i].mean + hw};
  }
  return out;
}

}  // namespace itergp
