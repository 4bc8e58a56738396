#include "itergp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace itergp {
namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_finite(const Eigen::Ref<const Vector>& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string("non-finite ") + what);
}

// Normalized Matern value at scaled distance z = sqrt(2 alpha) r. The
// parametrization is 0/0 at z = 0; the removable singularity evaluates to 1,
// and for tiny z the leading series term replaces the Bessel product:
//   k(z) = 1 - Gamma(1-a)/Gamma(1+a) (z/2)^{2a} + O(z^2),  0 < a < 1.
double matern_normalized(double alpha, double z) {
  if (z == 0.0) return 1.0;
  if (z < 1e-12) {
    if (alpha < 1.0) {
      const double u = std::pow(0.5 * z, 2.0 * alpha);
      return 1.0 - std::tgamma(1.0 - alpha) / std::tgamma(1.0 + alpha) * u;
    }
    return 1.0;  // correction is O(z^2) here
  }
  if (z > 705.0) return 0.0;  // e^{-z} underflows
  const double norm = std::tgamma(alpha) * std::pow(2.0, alpha - 1.0);
  const double val = std::pow(z, alpha) * std::cyl_bessel_k(alpha, z) / norm;
  if (!std::isfinite(val)) {
    // K_a overflowed at small z for large alpha; the limit is 1.
    return 1.0;
  }
  return val;
}

// One-dimensional cosine basis on [0,1]: phi_1 = 1, phi_j(t) = sqrt(2) cos(pi (j-1) t).
double cosine_phi(int j, double t) {
  if (j == 1) return 1.0;
  return M_SQRT2 * std::cos(M_PI * static_cast<double>(j - 1) * t);
}

double series_phi(const SeriesKernel& s, Index j,
                  const Eigen::Ref<const Vector>& x) {
  if (s.dimension == 1) return cosine_phi(static_cast<int>(j) + 1, x(0));
  const auto& idx = s.basis_index[static_cast<std::size_t>(j)];
  double v = 1.0;
  for (int k = 0; k < s.dimension; ++k) v *= cosine_phi(idx[k], x(k));
  return v;
}

double series_lambda(const SeriesKernel& s, Index j) {
  const double jj = static_cast<double>(j + 1);
  const double d = static_cast<double>(s.dimension);
  if (s.decay == SeriesDecay::Polynomial)
    return s.tau * s.tau * std::pow(jj, -1.0 - 2.0 * s.alpha / d);
  return std::exp(-s.tau * std::pow(jj, 1.0 / d));
}

// Tensor multi-indices in [1..M]^d ordered by (max, sum, lex), truncated to J.
std::vector<std::vector<int>> build_basis_index(int d, Index J) {
  const int M =
      static_cast<int>(std::ceil(std::pow(static_cast<double>(J), 1.0 / d))) + 1;
  std::vector<std::vector<int>> all;
  std::vector<int> cur(static_cast<std::size_t>(d), 1);
  while (true) {
    all.push_back(cur);
    int k = d - 1;
    while (k >= 0 && cur[static_cast<std::size_t>(k)] == M) {
      cur[static_cast<std::size_t>(k)] = 1;
      --k;
    }
    if (k < 0) break;
    ++cur[static_cast<std::size_t>(k)];
  }
  std::sort(all.begin(), all.end(),
            [](const std::vector<int>& a, const std::vector<int>& b) {
              const int ma = *std::max_element(a.begin(), a.end());
              const int mb = *std::max_element(b.begin(), b.end());
              if (ma != mb) return ma < mb;
              const int sa = std::accumulate(a.begin(), a.end(), 0);
              const int sb = std::accumulate(b.begin(), b.end(), 0);
              if (sa != sb) return sa < sb;
              return a < b;
            });
  all.resize(static_cast<std::size_t>(J));
  return all;
}

void check_point_dim(const KernelSpec& spec, Index dim) {
  if (auto d = spec.declared_dimension(); d && *d != dim)
    throw std::invalid_argument("point dimension does not match kernel spec");
}

// Static row partition; entries are pure so results do not depend on the
// thread count.
void parallel_rows(Index n, int threads, const std::function<void(Index)>& row) {
  if (threads <= 1 || n < 64) {
    for (Index i = 0; i < n; ++i) row(i);
    return;
  }
  const int t = std::min<int>(threads, static_cast<int>(n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(t));
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      for (Index i = w; i < n; i += t) row(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

KernelSpec KernelSpec::matern(double alpha) {
  require(alpha > 0.0 && std::isfinite(alpha), "matern: alpha must be positive");
  return KernelSpec(MaternKernel{alpha});
}

KernelSpec KernelSpec::sqexp(double bandwidth) {
  require(bandwidth > 0.0 && std::isfinite(bandwidth),
          "sqexp: bandwidth must be positive");
  return KernelSpec(SqExpKernel{bandwidth});
}

KernelSpec KernelSpec::series_polynomial(double alpha, double tau, int dimension,
                                         Index truncation) {
  require(alpha > 0.0 && tau > 0.0, "series: hyperparameters must be positive");
  require(dimension >= 1, "series: dimension must be >= 1");
  require(truncation >= 1, "series: truncation J must be >= 1");
  SeriesKernel s{SeriesDecay::Polynomial, alpha, tau, dimension, truncation, {}};
  if (dimension > 1) s.basis_index = build_basis_index(dimension, truncation);
  return KernelSpec(std::move(s));
}

KernelSpec KernelSpec::series_exponential(double tau, int dimension,
                                          Index truncation) {
  require(tau > 0.0, "series: tau must be positive");
  require(dimension >= 1, "series: dimension must be >= 1");
  require(truncation >= 1, "series: truncation J must be >= 1");
  SeriesKernel s{SeriesDecay::Exponential, 0.0, tau, dimension, truncation, {}};
  if (dimension > 1) s.basis_index = build_basis_index(dimension, truncation);
  return KernelSpec(std::move(s));
}

bool KernelSpec::is_series() const {
  return std::holds_alternative<SeriesKernel>(variant_);
}

std::optional<int> KernelSpec::declared_dimension() const {
  if (const auto* s = std::get_if<SeriesKernel>(&variant_)) return s->dimension;
  return std::nullopt;
}

Index default_series_truncation(Index n) { return std::max<Index>(4 * n, 1024); }

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y) {
  require(x.size() == y.size(), "kernel_eval: point dimensions differ");
  check_finite(x, "point");
  check_finite(y, "point");
  check_point_dim(spec, x.size());
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, MaternKernel>) {
          const double r = (x - y).norm();
          return matern_normalized(k.alpha, std::sqrt(2.0 * k.alpha) * r);
        } else if constexpr (std::is_same_v<T, SqExpKernel>) {
          const double r2 = (x - y).squaredNorm();
          return std::exp(-r2 / (k.bandwidth * k.bandwidth));
        } else {
          double acc = 0.0;
          for (Index j = 0; j < k.truncation; ++j) {
            // product of the two basis values first, so swapping x and y
            // reproduces the same floating-point path
            const double basis = series_phi(k, j, x) * series_phi(k, j, y);
            acc += series_lambda(k, j) * basis;
          }
          return acc;
        }
      },
      spec.variant());
}

Matrix kernel_matrix(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X,
                     int threads) {
  const Index n = X.rows();
  require(n >= 1, "kernel_matrix: need at least one point");
  check_point_dim(spec, X.cols());
  if (!X.allFinite()) throw std::invalid_argument("non-finite design point");

  Matrix K(n, n);
  if (spec.is_series()) {
    const Matrix B = series_low_rank_factor(spec, X);
    K.setZero();
    K.selfadjointView<Eigen::Lower>().rankUpdate(B);
    K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
    return K;
  }
  parallel_rows(n, threads, [&](Index i) {
    for (Index j = i; j < n; ++j) {
      const double v = kernel_eval(spec, X.row(i), X.row(j));
      K(i, j) = v;
      K(j, i) = v;
    }
  });
  return K;
}

Vector kernel_cross(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X,
                    const Eigen::Ref<const Vector>& x) {
  require(X.cols() == x.size(), "kernel_cross: point dimension mismatch");
  const Index n = X.rows();
  Vector out(n);
  for (Index i = 0; i < n; ++i) out(i) = kernel_eval(spec, X.row(i), x);
  return out;
}

Vector population_eigenvalues(const KernelSpec& spec, Index count) {
  const auto* s = std::get_if<SeriesKernel>(&spec.variant());
  if (s == nullptr)
    throw std::invalid_argument("population_eigenvalues: series kernels only");
  require(count >= 1 && count <= s->truncation,
          "population_eigenvalues: count must be in [1, J]");
  Vector lam(count);
  for (Index j = 0; j < count; ++j) lam(j) = series_lambda(*s, j);
  return lam;
}

Matrix series_feature_matrix(const KernelSpec& spec,
                             const Eigen::Ref<const Matrix>& X) {
  const auto* s = std::get_if<SeriesKernel>(&spec.variant());
  if (s == nullptr)
    throw std::invalid_argument("series_feature_matrix: series kernels only");
  check_point_dim(spec, X.cols());
  const Index n = X.rows();
  Matrix phi(n, s->truncation);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < s->truncation; ++j)
      phi(i, j) = series_phi(*s, j, X.row(i));
  return phi;
}

Matrix series_low_rank_factor(const KernelSpec& spec,
                              const Eigen::Ref<const Matrix>& X) {
  Matrix b = series_feature_matrix(spec, X);
  const Vector lam = population_eigenvalues(
      spec, std::get<SeriesKernel>(spec.variant()).truncation);
  b.array().rowwise() *= lam.array().sqrt().transpose();
  return b;
}

void Dataset::validate() const {
  require(X.rows() >= 1, "dataset: n must be >= 1");
  require(X.rows() == Y.size(), "dataset: X and Y lengths differ");
  require(sigma > 0.0, "dataset: sigma must be positive");
  if (!X.allFinite() || !Y.allFinite())
    throw std::invalid_argument("dataset: non-finite data");
}

Matrix design_from_vector(const Eigen::Ref<const Vector>& x) {
  Matrix X(x.size(), 1);
  X.col(0) = x;
  return X;
}

}  // namespace itergp
