#pragma once

#include <concepts>
#include <stdexcept>

#include "robustpr/types.hpp"

namespace robustpr {

/// Matrix-free view of a measurement ensemble {a_i}. The solver only ever
/// needs these five operations, so CDP-sized problems never materialize an
/// m-by-n matrix.
///
///   inner_products(x)        -> (a_i^T x)_i               (signed)
///   apply(x)                 -> (|a_i^T x|)_i             (the amplitude map)
///   row_inner(i, x)          ->  a_i^T x
///   adjoint_weighted(w)      -> (1/m) sum_i w_i a_i
///   quadratic_form_apply(d,v)-> (1/m) sum_i d_i (a_i^T v) a_i
template <typename Op>
concept MeasurementOperator =
    requires(const Op& op, const Vector& v, const Vector& w, Index i) {
      { op.rows() } -> std::convertible_to<Index>;
      { op.cols() } -> std::convertible_to<Index>;
      { op.inner_products(v) } -> std::convertible_to<Vector>;
      { op.apply(v) } -> std::convertible_to<Vector>;
      { op.row_inner(i, v) } -> std::convertible_to<double>;
      { op.adjoint_weighted(w) } -> std::convertible_to<Vector>;
      { op.quadratic_form_apply(w, v) } -> std::convertible_to<Vector>;
    };

/// Dense real ensemble, rows stored contiguously. Does not own the matrix;
/// the ensemble (or test fixture) it was built from must outlive it.
class DenseOperator {
 public:
  explicit DenseOperator(const RowMatrix& rows) : a_(&rows) {}

  Index rows() const { return a_->rows(); }
  Index cols() const { return a_->cols(); }

  double row_inner(Index i, const Vector& x) const {
    if (x.size() != cols()) throw std::invalid_argument("row_inner: x has wrong dimension");
    return a_->row(i).dot(x);
  }

  // Per-row dots rather than a GEMV so that apply(x)[i] is bit-identical to
  // |row_inner(i, x)| and the summation order is pinned.
  Vector inner_products(const Vector& x) const {
    if (x.size() != cols()) throw std::invalid_argument("inner_products: x has wrong dimension");
    Vector t(rows());
    for (Index i = 0; i < rows(); ++i) t[i] = a_->row(i).dot(x);
    return t;
  }

  Vector apply(const Vector& x) const { return inner_products(x).cwiseAbs(); }

  Vector adjoint_weighted(const Vector& w) const {
    if (w.size() != rows()) throw std::invalid_argument("adjoint_weighted: w has wrong dimension");
    Vector acc = Vector::Zero(cols());
    for (Index i = 0; i < rows(); ++i) acc.noalias() += w[i] * a_->row(i).transpose();
    return acc / static_cast<double>(rows());
  }

  Vector quadratic_form_apply(const Vector& d, const Vector& v) const {
    if (d.size() != rows()) throw std::invalid_argument("quadratic_form_apply: d has wrong dimension");
    if (v.size() != cols()) throw std::invalid_argument("quadratic_form_apply: v has wrong dimension");
    Vector acc = Vector::Zero(cols());
    for (Index i = 0; i < rows(); ++i) {
      const double c = d[i] * a_->row(i).dot(v);
      acc.noalias() += c * a_->row(i).transpose();
    }
    return acc / static_cast<double>(rows());
  }

 private:
  const RowMatrix* a_;
};

static_assert(MeasurementOperator<DenseOperator>);

}  // namespace robustpr
