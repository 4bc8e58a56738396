#pragma once

#include <stdexcept>
#include <string>

#include "itergp/core.hpp"
#include "itergp/spectral.hpp"

namespace itergp {

// The updating scheme is only well defined for linearly independent policies;
// a dependent action is rejected rather than silently skipped.
class DependentPolicyError : public std::runtime_error {
 public:
  DependentPolicyError(const std::string& what, Index failing_index)
      : std::runtime_error(what), index(failing_index) {}
  Index index;
};

// C = columns diag(weights) columns^T, applied in O(n m) without ever
// materializing the n x n matrix.
struct LowRankPrecision {
  Matrix columns;
  Vector weights;

  Index rank() const { return columns.cols(); }
  Vector apply(const Eigen::Ref<const Vector>& x) const;
  Matrix apply_matrix(const Eigen::Ref<const Matrix>& x) const;
  Matrix dense(Index n) const;
};

enum class PolicyTag { EV, Lanczos, CG, Custom };

// Finite stream of actions, yielded in column order.
struct PolicySource {
  PolicyTag tag = PolicyTag::Custom;
  Matrix actions;
  Index count() const { return actions.cols(); }
};

PolicySource policy_ev(const EigenSystem& eig, Index m);
PolicySource policy_lanczos(const LanczosResult& lan, Index m);
PolicySource policy_cg(const CgResult& cg, Index m);
PolicySource policy_custom(Matrix actions);

// Accumulated state of the Bayesian updating scheme: search directions D,
// normalizers eta and representer-weight estimate w = C_m Y. Steps are
// append-only; prior columns never change.
struct IterGPState {
  Index m = 0;
  Matrix D;
  Vector etas;
  Vector w;
  PolicyTag policy_tag = PolicyTag::Custom;

  static IterGPState zero(Index n, PolicyTag tag = PolicyTag::Custom);
  LowRankPrecision precision() const;  // C_m = sum_j eta_j^{-1} d_j d_j^T
};

// One update: d = (I - C_{m-1} K_sigma) s, eta = s^T K_sigma d,
// C_m = C_{m-1} + eta^{-1} d d^T, w_m = w_{m-1} + eta^{-1} d d^T y.
// Throws DependentPolicyError when eta <= 1e-12 s^T K_sigma s.
IterGPState itergp_step(const IterGPState& state,
                        const Eigen::Ref<const Vector>& s, const MatVec& ksigma,
                        const Eigen::Ref<const Vector>& y);

IterGPState run_itergp(const MatVec& ksigma, const Eigen::Ref<const Vector>& y,
                       const PolicySource& policy, Index m);

// C_m^EV = sum_{j<=m} (mu_j + sigma^2)^{-1} u_j u_j^T, mu_j = n lambda_j(A).
LowRankPrecision closed_form_C_ev(const EigenSystem& eig, Index m, double sigma2,
                                  Index n);

// C_m^L with Ritz values/vectors in place of the empirical eigenpairs.
LowRankPrecision closed_form_C_lanczos(const LanczosResult& lan, Index m,
                                       double sigma2, Index n);

// C_m^CG = sum_{j<=m} eta_j^{-1} d_j d_j^T from recorded CG directions.
LowRankPrecision closed_form_C_cg(const Eigen::Ref<const Matrix>& directions,
                                  const Eigen::Ref<const Vector>& etas, Index m);

// Variational solution for inducing variables U_j = <u_j, F(X)> built from the
// first m empirical eigenvectors, plus the induced moments of F at the design
// points.
struct VbSolution {
  Vector mu_star;
  Matrix sigma_star;
  Vector design_mean;
  Matrix design_cov;
};

VbSolution vb_titsias(const Eigen::Ref<const Matrix>& K,
                      const Eigen::Ref<const Vector>& y, double sigma2,
                      const EigenSystem& eig, Index m);

}  // namespace itergp
