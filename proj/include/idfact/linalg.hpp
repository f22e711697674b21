#pragma once

// Dense/sparse real matrices, column access, operator norms and the
// elementary Gram-based norm bounds.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "idfact/errors.hpp"

namespace idfact {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

inline constexpr double kDefaultRelTol = 1e-10;
inline constexpr int kPowerIterationBudget = 10000;

//
// IndexSet
//

/// Strictly increasing set of zero-based column indices.
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::initializer_list<Index> idx) : IndexSet(std::vector<Index>(idx)) {}
  explicit IndexSet(std::vector<Index> idx) : idx_(std::move(idx)) {
    for (std::size_t k = 0; k < idx_.size(); ++k) {
      if (idx_[k] < 0) throw DimensionError("IndexSet: negative index");
      if (k > 0 && idx_[k] <= idx_[k - 1])
        throw DimensionError("IndexSet: indices must be strictly increasing");
    }
  }

  static IndexSet from_unsorted(std::vector<Index> idx) {
    std::sort(idx.begin(), idx.end());
    return IndexSet(std::move(idx));
  }

  std::size_t size() const noexcept { return idx_.size(); }
  bool empty() const noexcept { return idx_.empty(); }
  Index operator[](std::size_t k) const { return idx_[k]; }
  auto begin() const noexcept { return idx_.begin(); }
  auto end() const noexcept { return idx_.end(); }
  const std::vector<Index>& indices() const noexcept { return idx_; }

  bool contains(Index i) const { return std::binary_search(idx_.begin(), idx_.end(), i); }

  bool disjoint(const IndexSet& other) const {
    for (Index i : idx_)
      if (other.contains(i)) return false;
    return true;
  }

  IndexSet united(const IndexSet& other) const {
    std::vector<Index> out;
    std::set_union(idx_.begin(), idx_.end(), other.idx_.begin(), other.idx_.end(),
                   std::back_inserter(out));
    return IndexSet(std::move(out));
  }

  void check_width(Index width) const {
    if (!idx_.empty() && idx_.back() >= width)
      throw DimensionError("IndexSet: index " + std::to_string(idx_.back()) +
                           " outside matrix width " + std::to_string(width));
  }

  bool operator==(const IndexSet&) const = default;

 private:
  std::vector<Index> idx_;
};

//
// column access
//
// Algorithms only touch A through its columns.  Dense and sparse Eigen
// matrices are supported here; matrix_path.hpp adds path slices A(t).
//

inline double column_dot(const Matrix& a, Index i, Index j) { return a.col(i).dot(a.col(j)); }
inline double column_dot(const SparseMatrix& a, Index i, Index j) {
  return a.col(i).dot(a.col(j));
}

/// The vector (<a_i, a_j>)_j.
inline Vector column_products(const Matrix& a, Index i) { return a.transpose() * a.col(i); }
inline Vector column_products(const SparseMatrix& a, Index i) {
  Vector ai = Vector::Zero(a.rows());
  for (SparseMatrix::InnerIterator it(a, i); it; ++it) ai[it.row()] = it.value();
  return a.transpose() * ai;
}

inline Vector column_squared_norms(const Matrix& a) {
  return a.colwise().squaredNorm().transpose();
}
inline Vector column_squared_norms(const SparseMatrix& a) {
  Vector out(a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(a, j); it; ++it) s += it.value() * it.value();
    out[j] = s;
  }
  return out;
}

/// out += alpha * a_j
inline void column_axpy(const Matrix& a, Index j, double alpha, Eigen::Ref<Vector> out) {
  out.noalias() += alpha * a.col(j);
}
inline void column_axpy(const SparseMatrix& a, Index j, double alpha, Eigen::Ref<Vector> out) {
  for (SparseMatrix::InnerIterator it(a, j); it; ++it) out[it.row()] += alpha * it.value();
}

/// (<a_j, b_j>)_j for two matrices of equal shape.
inline Vector column_cross_dots(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b).colwise().sum().transpose();
}
inline Vector column_cross_dots(const SparseMatrix& a, const SparseMatrix& b) {
  Vector out(a.cols());
  for (Index j = 0; j < a.cols(); ++j) out[j] = a.col(j).dot(b.col(j));
  return out;
}

template <class M>
concept ColumnSource = requires(const M& a, Index i, Index j, double alpha, Vector& out) {
  { a.rows() } -> std::convertible_to<Index>;
  { a.cols() } -> std::convertible_to<Index>;
  { column_dot(a, i, j) } -> std::convertible_to<double>;
  { column_products(a, i) } -> std::convertible_to<Vector>;
  { column_squared_norms(a) } -> std::convertible_to<Vector>;
  column_axpy(a, j, alpha, Eigen::Ref<Vector>(out));
};

template <ColumnSource M>
Vector column_vector(const M& a, Index j) {
  Vector v = Vector::Zero(a.rows());
  column_axpy(a, j, 1.0, v);
  return v;
}

template <ColumnSource M>
double column_norm(const M& a, Index j) {
  return std::sqrt(column_dot(a, j, j));
}

template <ColumnSource M>
double min_column_norm(const M& a) {
  return std::sqrt(std::max(0.0, column_squared_norms(a).minCoeff()));
}

/// A * R, touching only the columns of A selected by nonzero entries of R.
template <ColumnSource M>
Matrix times_right(const M& a, const Matrix& r) {
  if (r.rows() != a.cols())
    throw DimensionError("times_right: R has " + std::to_string(r.rows()) +
                         " rows, A has " + std::to_string(a.cols()) + " columns");
  Matrix out = Matrix::Zero(a.rows(), r.cols());
  for (Index k = 0; k < r.cols(); ++k)
    for (Index j = 0; j < r.rows(); ++j)
      if (r(j, k) != 0.0) column_axpy(a, j, r(j, k), out.col(k));
  return out;
}

//
// inner products and Gram statistics
//

inline double inner(const Vector& x, const Vector& y) {
  if (x.size() != y.size())
    throw DimensionError("inner: lengths " + std::to_string(x.size()) + " and " +
                         std::to_string(y.size()));
  return x.dot(y);
}

/// Lambda (max column norm), lambda (max off-diagonal |<a_i,a_j>|),
/// d (max |entry|), Delta (max | ||a_i||^2 - 1 |), theta (min column norm).
struct GramStats {
  double capital_lambda = 0.0;
  double small_lambda = 0.0;
  double max_entry = 0.0;
  double delta_dev = 0.0;
  double theta = 0.0;
};

template <ColumnSource M>
GramStats gram_stats(const M& a, const IndexSet& cols) {
  if (cols.empty()) throw DimensionError("gram_stats: empty column set");
  cols.check_width(a.cols());
  GramStats s;
  s.theta = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < cols.size(); ++p) {
    const Index i = cols[p];
    const double sq = column_dot(a, i, i);
    s.capital_lambda = std::max(s.capital_lambda, std::sqrt(sq));
    s.theta = std::min(s.theta, std::sqrt(sq));
    s.delta_dev = std::max(s.delta_dev, std::abs(sq - 1.0));
    s.max_entry = std::max(s.max_entry, column_vector(a, i).cwiseAbs().maxCoeff());
    for (std::size_t q = p + 1; q < cols.size(); ++q)
      s.small_lambda = std::max(s.small_lambda, std::abs(column_dot(a, i, cols[q])));
  }
  return s;
}

inline IndexSet all_columns(Index n) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  return IndexSet(std::move(idx));
}

inline GramStats gram_stats(const Matrix& a) {
  if (a.cols() == 0) throw DimensionError("gram_stats: empty column set");
  const Matrix g = a.transpose() * a;
  GramStats s;
  s.max_entry = a.cwiseAbs().maxCoeff();
  s.theta = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < g.rows(); ++i) {
    s.capital_lambda = std::max(s.capital_lambda, std::sqrt(g(i, i)));
    s.theta = std::min(s.theta, std::sqrt(g(i, i)));
    s.delta_dev = std::max(s.delta_dev, std::abs(g(i, i) - 1.0));
    for (Index j = i + 1; j < g.cols(); ++j)
      s.small_lambda = std::max(s.small_lambda, std::abs(g(i, j)));
  }
  return s;
}

//
// operator norm
//

namespace detail {

// Below this Gram size the top eigenvalue is taken from a dense
// symmetric eigensolver; above it, power iteration.
inline constexpr Index kDirectEigenLimit = 512;

inline double top_eigenvalue_psd(const Matrix& g) {
  if (g.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

inline Vector power_start(Index dim) {
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = 1.0 + 0.1 * std::sin(1.7 * static_cast<double>(i + 1));
  return v.normalized();
}

// Dominant eigenvalue of a PSD operator by power iteration with a
// Rayleigh-quotient stopping rule.
template <class ApplyFn>
double power_iteration_psd(Index dim, ApplyFn&& apply, double rel_tol, int budget) {
  Vector v = power_start(dim);
  double previous = -1.0;
  for (int it = 0; it < budget; ++it) {
    Vector w = apply(v);
    const double rq = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    if (previous >= 0.0 && std::abs(rq - previous) <= rel_tol * std::abs(rq)) return rq;
    previous = rq;
    v = w / wn;
  }
  throw ConvergenceError("power iteration did not converge within " + std::to_string(budget) +
                         " iterations");
}

}  // namespace detail

/// Largest singular value by power iteration on the smaller Gram matrix.
inline double power_iteration_norm(const Matrix& a, double rel_tol = kDefaultRelTol,
                                   int budget = kPowerIterationBudget) {
  if (a.rows() <= a.cols()) {
    return std::sqrt(std::max(0.0, detail::power_iteration_psd(
                                       a.rows(), [&](const Vector& v) -> Vector { return a * (a.transpose() * v); },
                                       rel_tol, budget)));
  }
  return std::sqrt(std::max(0.0, detail::power_iteration_psd(
                                     a.cols(), [&](const Vector& v) -> Vector { return a.transpose() * (a * v); },
                                     rel_tol, budget)));
}

inline double power_iteration_norm(const SparseMatrix& a, double rel_tol = kDefaultRelTol,
                                   int budget = kPowerIterationBudget) {
  return std::sqrt(std::max(0.0, detail::power_iteration_psd(
                                     a.cols(), [&](const Vector& v) -> Vector { return a.transpose() * (a * v); },
                                     rel_tol, budget)));
}

/// ||A|| = sup ||Ax|| over unit x.
inline double operator_norm(const Matrix& a, double rel_tol = kDefaultRelTol) {
  if (!(rel_tol > 0.0)) throw std::invalid_argument("operator_norm: rel_tol must be positive");
  if (a.size() == 0) return 0.0;
  if (std::min(a.rows(), a.cols()) <= detail::kDirectEigenLimit) {
    const Matrix g = a.rows() <= a.cols() ? Matrix(a * a.transpose()) : Matrix(a.transpose() * a);
    return std::sqrt(detail::top_eigenvalue_psd(g));
  }
  return power_iteration_norm(a, rel_tol);
}

/// Sparse operator norm.  The row/column incidence graph is split into
/// connected components; each independent block is normed densely.
inline double operator_norm(const SparseMatrix& a, double rel_tol = kDefaultRelTol) {
  if (!(rel_tol > 0.0)) throw std::invalid_argument("operator_norm: rel_tol must be positive");
  const Index m = a.rows(), n = a.cols();
  std::vector<Index> parent(static_cast<std::size_t>(m + n));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (Index j = 0; j < n; ++j)
    for (SparseMatrix::InnerIterator it(a, j); it; ++it)
      if (it.value() != 0.0) parent[find(it.row())] = find(m + j);

  std::vector<std::vector<Index>> comp_cols(static_cast<std::size_t>(m + n));
  std::vector<Index> local_row(static_cast<std::size_t>(m), -1);
  std::vector<Index> comp_rows(static_cast<std::size_t>(m + n), 0);
  for (Index i = 0; i < m; ++i) local_row[i] = comp_rows[find(i)]++;
  for (Index j = 0; j < n; ++j) comp_cols[find(m + j)].push_back(j);

  double best = 0.0;
  for (Index c = 0; c < m + n; ++c) {
    const auto& cols = comp_cols[c];
    if (cols.empty() || comp_rows[c] == 0) continue;
    const Index r = comp_rows[c];
    const Index k = static_cast<Index>(cols.size());
    if (std::min(r, k) > detail::kDirectEigenLimit || r * k > (Index{1} << 24))
      return power_iteration_norm(a, rel_tol);
    Matrix block = Matrix::Zero(r, k);
    for (Index q = 0; q < k; ++q)
      for (SparseMatrix::InnerIterator it(a, cols[q]); it; ++it)
        block(local_row[it.row()], q) = it.value();
    best = std::max(best, operator_norm(block, rel_tol));
  }
  return best;
}

//
// norm upper bounds
//

/// (Lambda^2 + (n-1) lambda)^{1/2}.
inline double norm_bound_gram(const Matrix& a) {
  const GramStats s = gram_stats(a);
  return std::sqrt(s.capital_lambda * s.capital_lambda +
                   static_cast<double>(a.cols() - 1) * s.small_lambda);
}

/// d (m n)^{1/2}.
inline double norm_bound_entries(const Matrix& a) {
  const double d = a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
  return d * std::sqrt(static_cast<double>(a.rows()) * static_cast<double>(a.cols()));
}

/// n max{lambda, Delta}, dominating ||A^T A - I_n||.
inline double gram_deviation_bound(const Matrix& a) {
  const GramStats s = gram_stats(a);
  return static_cast<double>(a.cols()) * std::max(s.small_lambda, s.delta_dev);
}

inline Matrix identity(Index n) { return Matrix::Identity(n, n); }

}  // namespace idfact
