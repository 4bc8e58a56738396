#pragma once

#include <stdexcept>
#include <string>

#include "itergp/core.hpp"

namespace itergp {

// Raised when a Krylov candidate degenerates or a CG step loses positive
// definiteness; `achieved_dim` is the dimension reached before failure.
class BreakdownError : public std::runtime_error {
 public:
  BreakdownError(const std::string& what, Index achieved)
      : std::runtime_error(what), achieved_dim(achieved) {}
  Index achieved_dim;
};

// Spectral decomposition of the normalized kernel matrix A = K / n (or any
// symmetric matrix): values descending, vectors orthonormal columns with the
// largest-magnitude entry of each column positive.
struct EigenSystem {
  Vector values;
  Matrix vectors;
  Index n() const { return values.size(); }
};

// Ritz pairs of A restricted to the Krylov space K_mt = span{v0, Av0, ...}.
struct LanczosResult {
  Vector values;    // descending, same scale as A
  Matrix vectors;   // n x krylov_dim, orthonormal, span K_mt
  Index krylov_dim = 0;
  Vector v0;
};

EigenSystem dense_eig(const Eigen::Ref<const Matrix>& M);

// Orthonormal basis of span{v0, Av0, ..., A^{mt-1} v0} by Gram-Schmidt with
// one full reorthogonalization pass per column. Throws BreakdownError when a
// candidate column drops below 1e-12 of its pre-orthogonalization norm.
Matrix krylov_basis(const MatVec& matvec, const Eigen::Ref<const Vector>& v0,
                    Index m_tilde);

// Eigenpairs of V^T A V lifted by V.
LanczosResult lanczos(const MatVec& matvec, const Eigen::Ref<const Vector>& v0,
                      Index m_tilde);

struct CgResult {
  Vector w;               // iterate after `steps` steps
  Matrix directions;      // conjugate directions d_j, one column per step
  Vector etas;            // d_j^T K_sigma d_j
  Vector residual_norms;  // |grad rho(w_j)| = |K_sigma w_j - Y|, j = 0..steps
  Index steps = 0;
};

// Conjugate gradients on K_sigma w = y starting from w_0 = 0, stopping after
// max_steps steps or once |grad rho(w_j)| <= tol |y|. By default each residual
// is reorthogonalized against the residual history, which leaves the iterates
// untouched in exact arithmetic but preserves the pairwise conjugacy of the
// recorded directions once Ritz values converge; the precision factors built
// from the directions depend on it. reorthogonalize = false gives the bare
// three-term recurrence, whose directions lose conjugacy on fast-decaying
// kernel spectra.
CgResult cg_solve(const MatVec& ksigma, const Eigen::Ref<const Vector>& y,
                  Index max_steps, double tol, bool reorthogonalize = true);

// Chebyshev polynomial of the first kind; hyperbolic closed form for |x| >= 1
// (overflows saturate to +inf rather than corrupting a recurrence).
double chebyshev_T(long l, double x);

struct SpectralBound {
  bool applicable = false;
  double value = 0.0;
  Index ritz_index = -1;  // eigenvector bound: the Ritz pair closest to hat-lambda_i
};

// Upper bound on hat-lambda_i - tilde-lambda_i (indices 0-based, p >= 0
// Chebyshev slack). Not applicable when the bound's preconditions fail;
// vanishing eigengaps inside the constants report value = +inf.
SpectralBound lanczos_eigenvalue_bound(Index i, Index p, const EigenSystem& eig,
                                       const LanczosResult& lan,
                                       const Eigen::Ref<const Vector>& v0);

// Upper bound on sin^2 between hat-u_i and the closest Ritz vector; the chosen
// Ritz index is returned so callers can evaluate the realized angle.
SpectralBound lanczos_eigenvector_bound(Index i, Index p, const EigenSystem& eig,
                                        const LanczosResult& lan,
                                        const Eigen::Ref<const Vector>& v0);

}  // namespace itergp
