#include "itergp/spectral.hpp"

#include <cmath>
#include <limits>

namespace itergp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void normalize_sign(Matrix& u) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index imax = 0;
    u.col(j).cwiseAbs().maxCoeff(&imax);
    if (u(imax, j) < 0.0) u.col(j) = -u.col(j);
  }
}

void check_unit(const Eigen::Ref<const Vector>& v0) {
  if (std::abs(v0.norm() - 1.0) > 1e-8)
    throw std::invalid_argument("v0 must have unit norm");
}

double acute_tan(const Eigen::Ref<const Vector>& u,
                 const Eigen::Ref<const Vector>& v0) {
  const double c = std::abs(u.dot(v0));
  if (c < 1e-14) return -1.0;  // angle ~ pi/2, <u, v0> = 0 precondition fails
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  return s / c;
}

// Builds the basis and keeps the products A v_k; lanczos reuses them for the
// projected matrix.
Matrix krylov_with_products(const MatVec& matvec,
                            const Eigen::Ref<const Vector>& v0, Index m_tilde,
                            Matrix* products) {
  check_unit(v0);
  const Index n = v0.size();
  if (m_tilde < 1 || m_tilde > n)
    throw std::invalid_argument("krylov_basis: need 1 <= m_tilde <= n");

  Matrix v(n, m_tilde);
  v.col(0) = v0;
  if (products != nullptr) products->resize(n, m_tilde);
  for (Index k = 0; k < m_tilde; ++k) {
    Vector av = matvec(v.col(k));
    if (av.size() != n) throw std::invalid_argument("matvec changed dimension");
    if (products != nullptr) products->col(k) = av;
    if (k + 1 == m_tilde) break;
    const double norm0 = av.norm();
    // two Gram-Schmidt passes against all previous columns
    for (int pass = 0; pass < 2; ++pass)
      for (Index j = 0; j <= k; ++j) av -= v.col(j).dot(av) * v.col(j);
    const double norm1 = av.norm();
    if (norm1 <= 1e-12 * std::max(norm0, 1e-300))
      throw BreakdownError("krylov_basis: degenerate Krylov space", k + 1);
    v.col(k + 1) = av / norm1;
  }
  return v;
}

}  // namespace

EigenSystem dense_eig(const Eigen::Ref<const Matrix>& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("dense_eig: not square");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("dense_eig: input not symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("dense_eig: eigensolver did not converge");

  const Index n = M.rows();
  EigenSystem out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  normalize_sign(out.vectors);
  (void)n;
  return out;
}

Matrix krylov_basis(const MatVec& matvec, const Eigen::Ref<const Vector>& v0,
                    Index m_tilde) {
  return krylov_with_products(matvec, v0, m_tilde, nullptr);
}

LanczosResult lanczos(const MatVec& matvec, const Eigen::Ref<const Vector>& v0,
                      Index m_tilde) {
  Matrix av;
  const Matrix v = krylov_with_products(matvec, v0, m_tilde, &av);

  Matrix t = v.transpose() * av;
  t = 0.5 * (t + t.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(t);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("lanczos: projected eigensolver did not converge");

  LanczosResult out;
  out.values = es.eigenvalues().reverse();
  out.vectors = v * Matrix(es.eigenvectors().rowwise().reverse());
  normalize_sign(out.vectors);
  out.krylov_dim = m_tilde;
  out.v0 = v0;
  return out;
}

CgResult cg_solve(const MatVec& ksigma, const Eigen::Ref<const Vector>& y,
                  Index max_steps, double tol, bool reorthogonalize) {
  const Index n = y.size();
  if (max_steps < 0 || max_steps > n)
    throw std::invalid_argument("cg_solve: need 0 <= m <= n");

  CgResult out;
  out.w = Vector::Zero(n);
  out.directions.resize(n, max_steps);
  out.etas.resize(max_steps);

  Vector r = y;  // r_j = y - K_sigma w_j = -grad rho(w_j)
  Vector d = r;
  double rr = r.squaredNorm();
  const double stop = tol * y.norm();
  std::vector<double> resnorms{std::sqrt(rr)};

  // Orthonormal history of the residuals. Each new residual is
  // reorthogonalized against it; a no-op in exact arithmetic (CG residuals
  // are mutually orthogonal), but it keeps the recorded directions
  // K_sigma-conjugate once Ritz values start converging, where the bare
  // three-term recurrence loses conjugacy and the precision factors with it.
  Matrix rbasis(n, reorthogonalize ? max_steps : 0);
  Index nr = 0;
  if (reorthogonalize && max_steps > 0 && rr > 0.0)
    rbasis.col(nr++) = r / std::sqrt(rr);

  Index j = 0;
  for (; j < max_steps; ++j) {
    if (std::sqrt(rr) <= stop) break;
    const Vector kd = ksigma(d);
    const double eta = d.dot(kd);
    if (eta <= 1e-14 * d.squaredNorm())
      throw BreakdownError("cg_solve: loss of positive definiteness", j);
    out.directions.col(j) = d;
    out.etas(j) = eta;
    const double alpha = rr / eta;
    out.w += alpha * d;
    r -= alpha * kd;
    if (reorthogonalize) {
      for (int pass = 0; pass < 2 && nr > 0; ++pass)
        r -= rbasis.leftCols(nr) * (rbasis.leftCols(nr).transpose() * r);
    }
    const double rr_new = r.squaredNorm();
    resnorms.push_back(std::sqrt(rr_new));
    if (reorthogonalize && j + 1 < max_steps && nr < max_steps && rr_new > 0.0)
      rbasis.col(nr++) = r / std::sqrt(rr_new);
    d = r + (rr_new / rr) * d;
    rr = rr_new;
  }
  out.steps = j;
  out.directions.conservativeResize(n, j);
  out.etas.conservativeResize(j);
  out.residual_norms =
      Eigen::Map<const Vector>(resnorms.data(), static_cast<Index>(resnorms.size()));
  return out;
}

double chebyshev_T(long l, double x) {
  if (l < 0) throw std::invalid_argument("chebyshev_T: negative degree");
  if (l == 0) return 1.0;
  if (x >= 1.0) return std::cosh(static_cast<double>(l) * std::acosh(x));
  if (x <= -1.0) {
    const double v = std::cosh(static_cast<double>(l) * std::acosh(-x));
    return (l % 2 == 0) ? v : -v;
  }
  double tprev = 1.0, t = x;
  for (long k = 2; k <= l; ++k) {
    const double tnext = 2.0 * x * t - tprev;
    tprev = t;
    t = tnext;
  }
  return t;
}

// Shared constants of the two Chebyshev-based Lanczos bounds; all indices
// 0-based. Returns false when a precondition of the bound fails, +inf
// components when an eigengap inside a constant vanishes.
namespace {
struct BoundTerms {
  bool ok = false;
  double tan_angle = 0.0;
  double cheb = 0.0;      // T_{mt - i - p}(gamma_i), 1-based exponent
  double kappa_ip = 0.0;  // prod_{j=i+1}^{i+p} (lhat_j - lhat_n) / (lhat_i - lhat_j)
};

BoundTerms bound_terms(Index i, Index p, const EigenSystem& eig,
                       const LanczosResult& lan,
                       const Eigen::Ref<const Vector>& v0) {
  BoundTerms t;
  const Index n = eig.n();
  const Index mt = lan.krylov_dim;
  if (i < 0 || p < 0 || i >= mt || mt > n) return t;
  if (p > mt - i - 1) return t;  // 1-based: p <= mt - i

  t.tan_angle = acute_tan(eig.vectors.col(i), v0);
  if (t.tan_angle < 0.0) return t;

  const double lam_n = eig.values(n - 1);
  const double lam_i = eig.values(i);

  t.kappa_ip = 1.0;
  for (Index j = i + 1; j <= i + p; ++j) {
    const double den = lam_i - eig.values(j);
    if (den <= 0.0) {
      t.kappa_ip = kInf;
      break;
    }
    t.kappa_ip *= (eig.values(j) - lam_n) / den;
  }

  double gamma = kInf;
  if (i + p + 1 < n) {
    const double den = eig.values(i + p + 1) - lam_n;
    gamma = den > 0.0 ? 1.0 + 2.0 * (lam_i - eig.values(i + p + 1)) / den : kInf;
  }
  const long cheb_deg = static_cast<long>(mt - (i + 1) - p);
  t.cheb = std::isinf(gamma) ? kInf : chebyshev_T(cheb_deg, gamma);
  t.ok = true;
  return t;
}
}  // namespace

SpectralBound lanczos_eigenvalue_bound(Index i, Index p, const EigenSystem& eig,
                                       const LanczosResult& lan,
                                       const Eigen::Ref<const Vector>& v0) {
  SpectralBound out;
  const BoundTerms t = bound_terms(i, p, eig, lan, v0);
  if (!t.ok) return out;
  // precondition for i > 1 (1-based): tilde-lambda_{i-1} > hat-lambda_i
  if (i >= 1 && !(lan.values(i - 1) > eig.values(i))) return out;

  double kappa_tilde = 1.0;
  const double lam_n = eig.values(eig.n() - 1);
  for (Index j = 0; j < i; ++j) {
    const double den = lan.values(j) - eig.values(i);
    if (den <= 0.0) return out;
    kappa_tilde *= (lan.values(j) - lam_n) / den;
  }

  out.applicable = true;
  if (std::isinf(t.kappa_ip) || std::isinf(kappa_tilde) || t.cheb == 0.0) {
    out.value = kInf;
    return out;
  }
  const double q = kappa_tilde * t.kappa_ip * t.tan_angle / t.cheb;
  out.value = (eig.values(i) - lam_n) * q * q;
  return out;
}

SpectralBound lanczos_eigenvector_bound(Index i, Index p, const EigenSystem& eig,
                                        const LanczosResult& lan,
                                        const Eigen::Ref<const Vector>& v0) {
  SpectralBound out;
  const BoundTerms t = bound_terms(i, p, eig, lan, v0);
  if (!t.ok) return out;

  const double lam_i = eig.values(i);
  const double lam_n = eig.values(eig.n() - 1);

  // Ritz value closest to hat-lambda_i and the separation from the rest.
  Index jstar = 0;
  (lan.values.array() - lam_i).abs().minCoeff(&jstar);
  const double lstar = lan.values(jstar);
  double delta = kInf;
  for (Index j = 0; j < lan.krylov_dim; ++j) {
    if (lan.values(j) == lstar) continue;
    delta = std::min(delta, std::abs(lam_i - lan.values(j)));
  }

  double kappa = 1.0;
  for (Index j = 0; j < i; ++j) {
    const double den = eig.values(j) - lam_i;
    if (den <= 0.0) {
      kappa = kInf;
      break;
    }
    kappa *= (eig.values(j) - lam_n) / den;
  }

  out.applicable = true;
  out.ritz_index = jstar;
  if (std::isinf(kappa) || std::isinf(t.kappa_ip) || t.cheb == 0.0 ||
      delta == 0.0) {
    out.value = kInf;
    return out;
  }
  const double amplify = 1.0 + eig.values(0) / delta;
  const double q = kappa * t.kappa_ip * t.tan_angle / t.cheb;
  out.value = amplify * q * q;
  return out;
}

}  // namespace itergp
