#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "itergp/core.hpp"

namespace itergp {

// Matern covariance in the parametrization
//   k(r) = (Gamma(a) 2^{a-1})^{-1} (sqrt(2a) r)^a K_a(sqrt(2a) r),
// with K_a the modified Bessel function of the second kind, so k(0) = 1.
struct MaternKernel {
  double alpha;
};

// k(x, y) = exp(-|x - y|^2 / b^2)
struct SqExpKernel {
  double bandwidth;
};

enum class SeriesDecay { Polynomial, Exponential };

// Truncated random-series kernel k(x, y) = sum_{j<=J} lambda_j phi_j(x) phi_j(y)
// over the tensor cosine basis on [0,1]^d, with known population eigenvalues
//   Polynomial:  lambda_j = tau^2 j^{-1 - 2 alpha / d}
//   Exponential: lambda_j = exp(-tau j^{1/d})
struct SeriesKernel {
  SeriesDecay decay;
  double alpha = 0.0;  // Polynomial only
  double tau = 0.0;
  int dimension = 1;
  Index truncation = 0;
  // Linearly ordered tensor multi-indices; empty when dimension == 1.
  std::vector<std::vector<int>> basis_index;
};

class KernelSpec {
 public:
  using Variant = std::variant<MaternKernel, SqExpKernel, SeriesKernel>;

  static KernelSpec matern(double alpha);
  static KernelSpec sqexp(double bandwidth);
  static KernelSpec series_polynomial(double alpha, double tau, int dimension,
                                      Index truncation);
  static KernelSpec series_exponential(double tau, int dimension,
                                       Index truncation);

  const Variant& variant() const { return variant_; }
  bool is_series() const;
  // Series kernels fix the point dimension; stationary kernels accept any.
  std::optional<int> declared_dimension() const;

 private:
  explicit KernelSpec(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

// J = max(4 n, 1024); keeps the series truncation error below solver
// tolerances at desk scale.
Index default_series_truncation(Index n);

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y);

// Dense kernel matrix K[i][j] = k(X_i, X_j). No jitter is added; callers
// regularize explicitly via K + sigma^2 I. Row blocks may be assembled in
// parallel; each entry is an independent evaluation so the result is
// bit-identical for any thread count.
Matrix kernel_matrix(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X,
                     int threads = 1);

Vector kernel_cross(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X,
                    const Eigen::Ref<const Vector>& x);

// Population eigenvalues lambda_1 > ... > lambda_count of a series kernel.
Vector population_eigenvalues(const KernelSpec& spec, Index count);

// Phi with Phi[i][j] = phi_j(X_i); defined for series kernels only.
Matrix series_feature_matrix(const KernelSpec& spec,
                             const Eigen::Ref<const Matrix>& X);

// B = Phi diag(sqrt(lambda)), so K = B B^T. The n x J factor gives O(nJ)
// matvecs for the spectral routines without forming K.
Matrix series_low_rank_factor(const KernelSpec& spec,
                              const Eigen::Ref<const Matrix>& X);

struct Dataset {
  Matrix X;  // n x d design points, one row per point
  Vector Y;
  double sigma = 0.0;
  std::function<double(const Eigen::Ref<const Vector>&)> truth;  // optional f0

  Index n() const { return X.rows(); }
  int dim() const { return static_cast<int>(X.cols()); }
  double sigma2() const { return sigma * sigma; }
  void validate() const;
};

// Column-vector convenience for one-dimensional designs.
Matrix design_from_vector(const Eigen::Ref<const Vector>& x);

}  // namespace itergp
