#pragma once

// Forward-mode automatic differentiation over arrays: every quantity carries
// its value vector together with the sparse Jacobian with respect to the
// global unknown vector. Linear operators (discretisation matrices) act on
// both parts; elementwise nonlinearities apply the chain rule row by row.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <vector>

namespace fracthm {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;
using Index = Eigen::Index;

namespace ad {

class AdArray {
 public:
  AdArray() = default;
  AdArray(Vec val, SpMat jac);

  /// Value without dependence on the unknowns.
  static AdArray constant(Vec val, Index num_dofs);
  static AdArray constant(Index size, double value, Index num_dofs);
  /// The unknowns x[offset, offset + n) as an independent variable.
  static AdArray variable(const Vec& x, Index offset, Index n);

  Index size() const { return val_.size(); }
  Index num_dofs() const { return jac_.cols(); }
  const Vec& val() const { return val_; }
  const SpMat& jac() const { return jac_; }

  AdArray& operator+=(const AdArray& other);
  AdArray& operator-=(const AdArray& other);

 private:
  Vec val_;
  SpMat jac_;
};

AdArray operator+(const AdArray& a, const AdArray& b);
AdArray operator-(const AdArray& a, const AdArray& b);
AdArray operator-(const AdArray& a);
AdArray operator+(const AdArray& a, const Vec& b);
AdArray operator-(const AdArray& a, const Vec& b);
AdArray operator*(double s, const AdArray& a);
/// Linear operator applied to an array: (M v, M J).
AdArray operator*(const SpMat& m, const AdArray& a);

/// Elementwise product.
AdArray times(const AdArray& a, const AdArray& b);
AdArray times(const Vec& a, const AdArray& b);
/// Elementwise quotient a / b.
AdArray divide(const AdArray& a, const AdArray& b);
AdArray pow(const AdArray& a, double exponent);
/// Elementwise max(a, floor); the derivative follows the active branch.
AdArray max(const AdArray& a, double floor);

/// Stacks arrays vertically in the given order.
AdArray concat(const std::vector<AdArray>& parts);

/// Rows of `jac` scaled by `s` (diag(s) * jac).
SpMat scale_rows(const SpMat& jac, const Vec& s);

}  // namespace ad
}  // namespace fracthm
