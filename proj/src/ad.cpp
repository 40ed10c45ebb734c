#include "fracthm/ad.hpp"

#include <cassert>
#include <cmath>

namespace fracthm::ad {

AdArray::AdArray(Vec val, SpMat jac) : val_(std::move(val)), jac_(std::move(jac)) {
  assert(val_.size() == jac_.rows());
}

AdArray AdArray::constant(Vec val, Index num_dofs) {
  SpMat jac(val.size(), num_dofs);
  return AdArray(std::move(val), std::move(jac));
}

AdArray AdArray::constant(Index size, double value, Index num_dofs) {
  return constant(Vec::Constant(size, value), num_dofs);
}

AdArray AdArray::variable(const Vec& x, Index offset, Index n) {
  SpMat jac(n, x.size());
  jac.reserve(Eigen::VectorXi::Ones(n));
  for (Index i = 0; i < n; ++i) jac.insert(i, offset + i) = 1.0;
  jac.makeCompressed();
  return AdArray(x.segment(offset, n), std::move(jac));
}

AdArray& AdArray::operator+=(const AdArray& other) {
  val_ += other.val_;
  jac_ += other.jac_;
  return *this;
}

AdArray& AdArray::operator-=(const AdArray& other) {
  val_ -= other.val_;
  jac_ -= other.jac_;
  return *this;
}

AdArray operator+(const AdArray& a, const AdArray& b) {
  return AdArray(a.val() + b.val(), a.jac() + b.jac());
}

AdArray operator-(const AdArray& a, const AdArray& b) {
  return AdArray(a.val() - b.val(), a.jac() - b.jac());
}

AdArray operator-(const AdArray& a) { return AdArray(-a.val(), -a.jac()); }

AdArray operator+(const AdArray& a, const Vec& b) { return AdArray(a.val() + b, a.jac()); }

AdArray operator-(const AdArray& a, const Vec& b) { return AdArray(a.val() - b, a.jac()); }

AdArray operator*(double s, const AdArray& a) { return AdArray(s * a.val(), s * a.jac()); }

AdArray operator*(const SpMat& m, const AdArray& a) {
  SpMat jac = m * a.jac();
  return AdArray(m * a.val(), std::move(jac));
}

SpMat scale_rows(const SpMat& jac, const Vec& s) {
  SpMat out = jac;
  for (Index r = 0; r < out.outerSize(); ++r)
    for (SpMat::InnerIterator it(out, r); it; ++it) it.valueRef() *= s[r];
  return out;
}

AdArray times(const AdArray& a, const AdArray& b) {
  return AdArray(a.val().cwiseProduct(b.val()),
                 scale_rows(b.jac(), a.val()) + scale_rows(a.jac(), b.val()));
}

AdArray times(const Vec& a, const AdArray& b) {
  return AdArray(a.cwiseProduct(b.val()), scale_rows(b.jac(), a));
}

AdArray divide(const AdArray& a, const AdArray& b) {
  const Vec inv = b.val().cwiseInverse();
  const Vec q = a.val().cwiseProduct(inv);
  // d(a/b) = da/b - a db / b^2
  return AdArray(q, scale_rows(a.jac(), inv) - scale_rows(b.jac(), q.cwiseProduct(inv)));
}

AdArray pow(const AdArray& a, double exponent) {
  Vec val(a.size()), d(a.size());
  for (Index i = 0; i < a.size(); ++i) {
    val[i] = std::pow(a.val()[i], exponent);
    d[i] = exponent * std::pow(a.val()[i], exponent - 1.0);
  }
  return AdArray(val, scale_rows(a.jac(), d));
}

AdArray max(const AdArray& a, double floor) {
  Vec val(a.size()), d(a.size());
  for (Index i = 0; i < a.size(); ++i) {
    const bool active = a.val()[i] >= floor;
    val[i] = active ? a.val()[i] : floor;
    d[i] = active ? 1.0 : 0.0;
  }
  return AdArray(val, scale_rows(a.jac(), d));
}

AdArray concat(const std::vector<AdArray>& parts) {
  Index rows = 0, nnz = 0, cols = 0;
  for (const auto& p : parts) {
    rows += p.size();
    nnz += p.jac().nonZeros();
    cols = std::max(cols, p.num_dofs());
  }
  Vec val(rows);
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(nnz));
  Index offset = 0;
  for (const auto& p : parts) {
    val.segment(offset, p.size()) = p.val();
    for (Index r = 0; r < p.jac().outerSize(); ++r)
      for (SpMat::InnerIterator it(p.jac(), r); it; ++it)
        trip.emplace_back(offset + r, it.col(), it.value());
    offset += p.size();
  }
  SpMat jac(rows, cols);
  jac.setFromTriplets(trip.begin(), trip.end());
  return AdArray(std::move(val), std::move(jac));
}

}  // namespace fracthm::ad
