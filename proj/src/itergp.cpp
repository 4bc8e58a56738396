#include "itergp/itergp.hpp"

#include <Eigen/Cholesky>

namespace itergp {

Vector LowRankPrecision::apply(const Eigen::Ref<const Vector>& x) const {
  if (rank() == 0) return Vector::Zero(x.size());
  return columns * (weights.asDiagonal() * (columns.transpose() * x));
}

Matrix LowRankPrecision::apply_matrix(const Eigen::Ref<const Matrix>& x) const {
  if (rank() == 0) return Matrix::Zero(x.rows(), x.cols());
  return columns * (weights.asDiagonal() * (columns.transpose() * x));
}

Matrix LowRankPrecision::dense(Index n) const {
  if (rank() == 0) return Matrix::Zero(n, n);
  if (columns.rows() != n)
    throw std::invalid_argument("LowRankPrecision: dimension mismatch");
  Matrix c = Matrix::Zero(n, n);
  c.selfadjointView<Eigen::Lower>().rankUpdate(
      columns * weights.array().sqrt().matrix().asDiagonal());
  c.triangularView<Eigen::StrictlyUpper>() = c.transpose();
  return c;
}

PolicySource policy_ev(const EigenSystem& eig, Index m) {
  if (m > eig.n()) throw std::invalid_argument("policy_ev: m exceeds n");
  return PolicySource{PolicyTag::EV, eig.vectors.leftCols(m)};
}

PolicySource policy_lanczos(const LanczosResult& lan, Index m) {
  if (m > lan.krylov_dim)
    throw std::invalid_argument("policy_lanczos: m exceeds Krylov dimension");
  return PolicySource{PolicyTag::Lanczos, lan.vectors.leftCols(m)};
}

PolicySource policy_cg(const CgResult& cg, Index m) {
  if (m > cg.steps)
    throw std::invalid_argument("policy_cg: m exceeds recorded CG steps");
  return PolicySource{PolicyTag::CG, cg.directions.leftCols(m)};
}

PolicySource policy_custom(Matrix actions) {
  return PolicySource{PolicyTag::Custom, std::move(actions)};
}

IterGPState IterGPState::zero(Index n, PolicyTag tag) {
  IterGPState s;
  s.m = 0;
  s.D.resize(n, 0);
  s.etas.resize(0);
  s.w = Vector::Zero(n);
  s.policy_tag = tag;
  return s;
}

LowRankPrecision IterGPState::precision() const {
  return LowRankPrecision{D, etas.cwiseInverse()};
}

namespace {

// Single update against the columns accumulated so far; eta = s^T K_sigma d
// falls out of one matvec since t = K_sigma s and K_sigma (I - C K_sigma) is
// symmetric.
void step_into(const Eigen::Ref<const Matrix>& D,
               const Eigen::Ref<const Vector>& etas, Index m,
               const Eigen::Ref<const Vector>& s, const MatVec& ksigma,
               Vector& d_out, double& eta_out) {
  const Vector t = ksigma(s);
  d_out = s;
  if (m > 0)
    d_out -= D.leftCols(m) *
             (D.leftCols(m).transpose() * t).cwiseQuotient(etas.head(m));
  eta_out = t.dot(d_out);
  const double scale = t.dot(s);
  if (!(eta_out > 1e-12 * scale))
    throw DependentPolicyError(
        "itergp: action lies in the span of previous policies", m);
}

}  // namespace

IterGPState itergp_step(const IterGPState& state,
                        const Eigen::Ref<const Vector>& s, const MatVec& ksigma,
                        const Eigen::Ref<const Vector>& y) {
  Vector d;
  double eta = 0.0;
  step_into(state.D, state.etas, state.m, s, ksigma, d, eta);

  IterGPState next;
  next.m = state.m + 1;
  next.D.resize(s.size(), next.m);
  next.D.leftCols(state.m) = state.D;
  next.D.col(state.m) = d;
  next.etas.resize(next.m);
  next.etas.head(state.m) = state.etas;
  next.etas(state.m) = eta;
  next.w = state.w + (d.dot(y) / eta) * d;
  next.policy_tag = state.policy_tag;
  return next;
}

IterGPState run_itergp(const MatVec& ksigma, const Eigen::Ref<const Vector>& y,
                       const PolicySource& policy, Index m) {
  const Index n = y.size();
  if (m < 0 || m > n) throw std::invalid_argument("run_itergp: need 0 <= m <= n");
  if (m > policy.count())
    throw std::invalid_argument("run_itergp: policy exhausted before m actions");

  IterGPState state;
  state.m = 0;
  state.D.resize(n, m);
  state.etas.resize(m);
  state.w = Vector::Zero(n);
  state.policy_tag = policy.tag;

  Vector d;
  double eta = 0.0;
  for (Index j = 0; j < m; ++j) {
    step_into(state.D, state.etas, j, policy.actions.col(j), ksigma, d, eta);
    state.D.col(j) = d;
    state.etas(j) = eta;
    state.w += (d.dot(y) / eta) * d;
    state.m = j + 1;
  }
  return state;
}

LowRankPrecision closed_form_C_ev(const EigenSystem& eig, Index m, double sigma2,
                                  Index n) {
  if (m > eig.n()) throw std::invalid_argument("closed_form_C_ev: m exceeds n");
  const Vector mu = static_cast<double>(n) * eig.values.head(m);
  return LowRankPrecision{eig.vectors.leftCols(m),
                          (mu.array() + sigma2).inverse().matrix()};
}

LowRankPrecision closed_form_C_lanczos(const LanczosResult& lan, Index m,
                                       double sigma2, Index n) {
  if (m > lan.krylov_dim)
    throw std::invalid_argument("closed_form_C_lanczos: m exceeds Krylov dim");
  const Vector mu = static_cast<double>(n) * lan.values.head(m);
  return LowRankPrecision{lan.vectors.leftCols(m),
                          (mu.array() + sigma2).inverse().matrix()};
}

LowRankPrecision closed_form_C_cg(const Eigen::Ref<const Matrix>& directions,
                                  const Eigen::Ref<const Vector>& etas, Index m) {
  if (m > directions.cols())
    throw std::invalid_argument("closed_form_C_cg: m exceeds recorded steps");
  return LowRankPrecision{directions.leftCols(m),
                          etas.head(m).cwiseInverse()};
}

VbSolution vb_titsias(const Eigen::Ref<const Matrix>& K,
                      const Eigen::Ref<const Vector>& y, double sigma2,
                      const EigenSystem& eig, Index m) {
  const Index n = K.rows();
  if (m < 1 || m > n) throw std::invalid_argument("vb_titsias: need 1 <= m <= n");

  const Vector mu_hat = static_cast<double>(n) * eig.values.head(m);
  if (!(mu_hat(m - 1) > 1e-12 * std::max(mu_hat(0), 1.0)))
    throw std::invalid_argument(
        "vb_titsias: singular K_uu (vanishing empirical eigenvalue)");

  const Matrix u = eig.vectors.leftCols(m);
  const Matrix k_uf = mu_hat.asDiagonal() * u.transpose();  // m x n
  const Matrix k_uu = Matrix(mu_hat.asDiagonal());

  // M = sigma^{-2} K_uf K_fu + K_uu; mu* = sigma^{-2} K_uu M^{-1} K_uf y
  const Matrix mmat = k_uf * k_uf.transpose() / sigma2 + k_uu;
  const Eigen::LDLT<Matrix> mfac(mmat);

  VbSolution out;
  out.mu_star = k_uu * mfac.solve(k_uf * y) / sigma2;
  out.sigma_star = k_uu * mfac.solve(k_uu);

  // F | U moments integrated against N(mu*, Sigma*)
  const Matrix kuuinv_kuf = mu_hat.cwiseInverse().asDiagonal() * k_uf;  // m x n
  out.design_mean = kuuinv_kuf.transpose() * out.mu_star;
  out.design_cov = K - k_uf.transpose() * kuuinv_kuf +
                   kuuinv_kuf.transpose() * out.sigma_star * kuuinv_kuf;
  out.design_cov = 0.5 * (out.design_cov + out.design_cov.transpose()).eval();
  return out;
}

}  // namespace itergp
