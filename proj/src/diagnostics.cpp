#include "itergp/diagnostics.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "itergp/rng.hpp"

namespace itergp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Pinv {
  Matrix inverse;      // pseudo-inverse on the retained subspace
  double logdet = 0.0; // over retained eigenvalues
  Index rank = 0;
  bool regularized = false;
  Matrix basis;        // retained eigenvectors (only filled when regularized)
};

// LLT when the matrix allows it, otherwise an eigendecomposition with the
// relative cutoff 1e-12 * trace.
Pinv factor_psd(const Eigen::Ref<const Matrix>& m) {
  Pinv out;
  const Index n = m.rows();
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) {
    out.inverse = llt.solve(Matrix::Identity(n, n));
    out.logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    out.rank = n;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const double cutoff = 1e-12 * std::max(m.trace(), 0.0);
  const Vector& ev = es.eigenvalues();
  std::vector<Index> keep;
  for (Index i = 0; i < n; ++i)
    if (ev(i) > cutoff) keep.push_back(i);
  out.regularized = true;
  out.rank = static_cast<Index>(keep.size());
  out.basis.resize(n, out.rank);
  Vector inv_ev(out.rank);
  for (Index k = 0; k < out.rank; ++k) {
    out.basis.col(k) = es.eigenvectors().col(keep[static_cast<std::size_t>(k)]);
    const double lam = ev(keep[static_cast<std::size_t>(k)]);
    inv_ev(k) = 1.0 / lam;
    out.logdet += std::log(lam);
  }
  out.inverse = out.basis * inv_ev.asDiagonal() * out.basis.transpose();
  return out;
}

double logdet_psd(const Eigen::Ref<const Matrix>& m, double cutoff_scale) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success)
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const double cutoff = 1e-12 * std::max(cutoff_scale, 0.0);
  double acc = 0.0;
  for (Index i = 0; i < m.rows(); ++i)
    if (es.eigenvalues()(i) > cutoff) acc += std::log(es.eigenvalues()(i));
  return acc;
}

}  // namespace

KlDetail kl_gaussians_detailed(const Eigen::Ref<const Vector>& mu1,
                               const Eigen::Ref<const Matrix>& cov1,
                               const Eigen::Ref<const Vector>& mu2,
                               const Eigen::Ref<const Matrix>& cov2) {
  const Index n = mu1.size();
  if (mu2.size() != n || cov1.rows() != n || cov1.cols() != n ||
      cov2.rows() != n || cov2.cols() != n)
    throw std::invalid_argument("kl_gaussians: dimension mismatch");

  const Pinv f2 = factor_psd(cov2);
  KlDetail out;
  out.regularized = f2.regularized;
  out.rank = f2.rank;
  const Vector dmu = mu1 - mu2;

  // KL is nonnegative; rounding can leave a ~1e-16 negative residue
  auto clamp_roundoff = [](double v, double scale) {
    return (v < 0.0 && v >= -1e-10 * std::max(1.0, scale)) ? 0.0 : v;
  };

  if (!f2.regularized) {
    const double tr = (f2.inverse * cov1).trace();
    const double quad = dmu.dot(f2.inverse * dmu);
    const double ld1 = logdet_psd(cov1, cov1.trace());
    out.value = 0.5 * (tr - static_cast<double>(n) + quad + f2.logdet - ld1);
    out.value = clamp_roundoff(out.value, tr);
    return out;
  }

  // Restrict both Gaussians to the retained subspace of cov2.
  const Matrix& v = f2.basis;
  const Matrix c1r = v.transpose() * cov1 * v;
  const Matrix c2r = v.transpose() * cov2 * v;
  const Vector dr = v.transpose() * dmu;
  Eigen::LLT<Matrix> llt2(c2r);
  const double tr = (llt2.solve(c1r)).trace();
  const double quad = dr.dot(llt2.solve(dr));
  const double ld2 = 2.0 * llt2.matrixLLT().diagonal().array().log().sum();
  const double ld1 = logdet_psd(c1r, c1r.trace());
  out.value = 0.5 * (tr - static_cast<double>(f2.rank) + quad + ld2 - ld1);
  out.value = clamp_roundoff(out.value, tr);
  return out;
}

double kl_gaussians(const Eigen::Ref<const Vector>& mu1,
                    const Eigen::Ref<const Matrix>& cov1,
                    const Eigen::Ref<const Vector>& mu2,
                    const Eigen::Ref<const Matrix>& cov2) {
  return kl_gaussians_detailed(mu1, cov1, mu2, cov2).value;
}

KLReport kl_decomposition(const Eigen::Ref<const Matrix>& K, double sigma2,
                          const LowRankPrecision& c,
                          const Eigen::Ref<const Vector>& y) {
  const Index n = K.rows();
  if (n > 3000)
    throw std::invalid_argument("kl_decomposition: n exceeds dense guard (3000)");
  if (y.size() != n) throw std::invalid_argument("kl_decomposition: bad y");

  Matrix ks = K;
  ks.diagonal().array() += sigma2;
  const Eigen::LLT<Matrix> llt(ks);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("kl_decomposition: K_sigma not positive definite");

  const Matrix ksinv_k = llt.solve(K);
  Matrix s2 = K - K * ksinv_k;  // mathematical uncertainty at design points
  s2 = 0.5 * (s2 + s2.transpose()).eval();
  Matrix s1 = K - K * c.apply_matrix(K);  // combined uncertainty
  s1 = 0.5 * (s1 + s1.transpose()).eval();

  const Pinv f2 = factor_psd(s2);

  KLReport rep;
  rep.regularized = f2.regularized;
  rep.term_trace = (f2.inverse * s1).trace() - static_cast<double>(f2.rank);
  const Vector g = K * (llt.solve(y) - c.apply(y));  // K (Ksigma^{-1} - C_m) y
  rep.term_quadratic = g.dot(f2.inverse * g);
  rep.term_logdet = f2.logdet - logdet_psd(s1, s1.trace());
  rep.total = 0.5 * (rep.term_trace + rep.term_quadratic + rep.term_logdet);

  const Vector mu1 = K * c.apply(y);
  const Vector mu2 = K * llt.solve(y);
  rep.direct = kl_gaussians(mu1, s1, mu2, s2);
  return rep;
}

double mse(const Eigen::Ref<const Vector>& mean_values,
           const Eigen::Ref<const Vector>& truth_values) {
  if (mean_values.size() != truth_values.size())
    throw std::invalid_argument("mse: length mismatch");
  return (mean_values - truth_values).squaredNorm() /
         static_cast<double>(mean_values.size());
}

double projector_hs_distance(const Eigen::Ref<const Vector>& u,
                             const Eigen::Ref<const Vector>& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("projector_hs_distance: dimension mismatch");
  if (std::abs(u.norm() - 1.0) > 1e-8 || std::abs(v.norm() - 1.0) > 1e-8)
    throw std::invalid_argument("projector_hs_distance: inputs must be unit");
  const double c = u.dot(v);
  return std::sqrt(std::max(0.0, 2.0 * (1.0 - c * c)));
}

double relative_eig_error(const Eigen::Ref<const Vector>& empirical,
                          const Eigen::Ref<const Vector>& population,
                          Index upto) {
  if (upto > empirical.size() || upto > population.size() || upto < 1)
    throw std::invalid_argument("relative_eig_error: bad range");
  double worst = 0.0;
  for (Index i = 0; i < upto; ++i) {
    if (population(i) == 0.0)
      throw std::invalid_argument("relative_eig_error: zero population value");
    worst = std::max(worst, std::abs(empirical(i) - population(i)) / population(i));
  }
  return worst;
}

double relative_rank(const Eigen::Ref<const Vector>& population, Index i) {
  const Index len = population.size();
  if (i < 0 || i >= len || len < 2)
    throw std::invalid_argument("relative_rank: bad index or sequence");
  double acc = 0.0;
  for (Index k = 0; k < len; ++k) {
    if (k == i) continue;
    const double gap = std::abs(population(i) - population(k));
    if (gap == 0.0) return kInf;
    acc += population(k) / gap;
  }
  double gap = kInf;
  if (i > 0) gap = std::min(gap, population(i - 1) - population(i));
  if (i + 1 < len) gap = std::min(gap, population(i) - population(i + 1));
  if (gap <= 0.0) return kInf;
  return acc + population(i) / gap;
}

InconsistencyGap inconsistency_gap(const Eigen::Ref<const Matrix>& K,
                                   double sigma2,
                                   const Eigen::Ref<const Vector>& y,
                                   const EigenSystem& eig) {
  const Index n = K.rows();
  if (n < 2) throw std::invalid_argument("inconsistency_gap: need n >= 2");

  const double mu1 = static_cast<double>(n) * eig.values(0);
  const double c1 = eig.vectors.col(0).dot(y);
  InconsistencyGap out;
  out.closed_form = mu1 * c1 * c1 / ((mu1 + sigma2) * (mu1 + sigma2));

  // shifted policies u_2, ..., u_n for m = n - 1 steps
  Matrix ks = K;
  ks.diagonal().array() += sigma2;
  const IterGPState state = run_itergp(
      matvec_of(ks), y, policy_custom(eig.vectors.rightCols(n - 1)), n - 1);
  const Vector coeff = Eigen::LLT<Matrix>(ks).solve(y) - state.w;
  out.direct = coeff.dot(K * coeff);
  return out;
}

Vector series_empirical_eigenvalues(const KernelSpec& series,
                                    const Eigen::Ref<const Matrix>& X, Index m,
                                    std::uint64_t seed) {
  const Index n = X.rows();
  const Matrix b = series_low_rank_factor(series, X);
  const double inv_n = 1.0 / static_cast<double>(n);
  const MatVec matvec = [&b, inv_n](const Vector& v) {
    return Vector(b * (b.transpose() * v) * inv_n);
  };
  CounterRng rng("series-eig-v0", static_cast<std::uint64_t>(n), seed,
                 CounterRng::kStreamLanczosInit);
  Vector v0(n);
  for (Index i = 0; i < n; ++i) v0(i) = rng.next_normal();
  v0.normalize();
  const Index mt = std::min<Index>(n, std::max<Index>(4 * m, m + 30));
  const LanczosResult lan = lanczos(matvec, v0, mt);
  return lan.values.head(m);
}

PartialTraceReport partial_trace_check(const KernelSpec& series, Index n, Index m,
                                       const std::vector<std::uint64_t>& seeds) {
  const auto* sk = std::get_if<SeriesKernel>(&series.variant());
  if (sk == nullptr)
    throw std::invalid_argument("partial_trace_check: series kernels only");
  if (m < 0 || seeds.empty())
    throw std::invalid_argument("partial_trace_check: bad arguments");

  const Vector lam = population_eigenvalues(series, sk->truncation);
  PartialTraceReport rep;
  rep.population_tail = m < sk->truncation
                            ? lam.tail(sk->truncation - m).sum()
                            : 0.0;

  for (const std::uint64_t seed : seeds) {
    CounterRng rng("partial-trace", static_cast<std::uint64_t>(n), seed,
                   CounterRng::kStreamDesign);
    Matrix X(n, sk->dimension);
    for (Index i = 0; i < n; ++i)
      for (int dcol = 0; dcol < sk->dimension; ++dcol)
        X(i, dcol) = rng.next_uniform();

    double tail = 0.0;
    if (m < n) {
      const Matrix b = series_low_rank_factor(series, X);
      const double total = b.squaredNorm() / static_cast<double>(n);  // tr(A)
      if (m == 0) {
        tail = total;
      } else {
        const Vector top = series_empirical_eigenvalues(series, X, m, seed);
        tail = total - top.sum();
      }
    }
    rep.per_seed.push_back(tail);
  }

  const double s = static_cast<double>(rep.per_seed.size());
  for (double t : rep.per_seed) rep.empirical_mean += t;
  rep.empirical_mean /= s;
  double var = 0.0;
  for (double t : rep.per_seed) var += (t - rep.empirical_mean) * (t - rep.empirical_mean);
  rep.empirical_se = rep.per_seed.size() > 1
                         ? std::sqrt(var / (s - 1.0) / s)
                         : 0.0;
  return rep;
}

std::vector<double> inconsistency_sweep(const std::vector<Index>& sizes,
                                        Index num_seeds) {
  if (num_seeds < 1)
    throw std::invalid_argument("inconsistency_sweep: need seeds >= 1");
  const KernelSpec spec = KernelSpec::matern(0.6);
  const double sigma = 0.2;

  std::vector<double> gaps;
  for (const Index n : sizes) {
    double acc = 0.0;
    for (Index s = 1; s <= num_seeds; ++s) {
      CounterRng design("inconsistency", static_cast<std::uint64_t>(n),
                        static_cast<std::uint64_t>(s), CounterRng::kStreamDesign);
      CounterRng noise("inconsistency", static_cast<std::uint64_t>(n),
                       static_cast<std::uint64_t>(s), CounterRng::kStreamNoise);
      Matrix X(n, 1);
      for (Index i = 0; i < n; ++i) X(i, 0) = design.next_uniform();
      const Matrix K = kernel_matrix(spec, X);
      const EigenSystem eig = dense_eig(K / static_cast<double>(n));
      Vector y = static_cast<double>(n) * eig.vectors.col(0);
      for (Index i = 0; i < n; ++i) y(i) += sigma * noise.next_normal();
      acc += inconsistency_gap(K, sigma * sigma, y, eig).closed_form;
    }
    gaps.push_back(acc / static_cast<double>(num_seeds));
  }
  return gaps;
}

PerturbationSweep relative_perturbation_sweep(const KernelSpec& series_template,
                                              Index m, Index num_seeds,
                                              const std::vector<Index>& sizes) {
  const auto* sk = std::get_if<SeriesKernel>(&series_template.variant());
  if (sk == nullptr)
    throw std::invalid_argument("relative_perturbation_sweep: series kernels only");

  PerturbationSweep sweep;
  sweep.sizes = sizes;
  for (const Index n : sizes) {
    const Index j = default_series_truncation(n);
    const KernelSpec spec =
        sk->decay == SeriesDecay::Polynomial
            ? KernelSpec::series_polynomial(sk->alpha, sk->tau, sk->dimension, j)
            : KernelSpec::series_exponential(sk->tau, sk->dimension, j);
    const Vector pop = population_eigenvalues(spec, m);

    std::vector<double> errs;
    for (Index seed = 0; seed < num_seeds; ++seed) {
      CounterRng rng("perturbation", static_cast<std::uint64_t>(n),
                     static_cast<std::uint64_t>(seed + 1),
                     CounterRng::kStreamDesign);
      Matrix X(n, sk->dimension);
      for (Index i = 0; i < n; ++i)
        for (int dcol = 0; dcol < sk->dimension; ++dcol)
          X(i, dcol) = rng.next_uniform();
      const Vector emp = series_empirical_eigenvalues(
          spec, X, m, static_cast<std::uint64_t>(seed + 1));
      errs.push_back(relative_eig_error(emp, pop, m));
    }
    std::vector<double> sorted = errs;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    const double med = sorted.size() % 2 == 1
                           ? sorted[h]
                           : 0.5 * (sorted[h - 1] + sorted[h]);
    sweep.medians.push_back(med);
    sweep.per_seed.push_back(std::move(errs));
  }
  return sweep;
}

}  // namespace itergp
