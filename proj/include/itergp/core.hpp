#pragma once

#include <Eigen/Dense>
#include <functional>

namespace itergp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Abstraction over v -> A v so that Krylov routines never need the dense
// matrix itself (series kernels go through their low-rank factor instead).
using MatVec = std::function<Vector(const Vector&)>;

// The referenced matrix must outlive the returned closure.
inline MatVec matvec_of(const Matrix& m) {
  return [&m](const Vector& v) { return Vector(m * v); };
}

inline MatVec matvec_of_shifted(const Matrix& m, double shift) {
  return [&m, shift](const Vector& v) { return Vector(m * v + shift * v); };
}

}  // namespace itergp
