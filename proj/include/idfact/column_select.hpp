#pragma once

// Counting-based selection of almost-orthogonal column families.
//
// B_i^eps = { j : |<a_i, a_j>| >= eps } has at most ||A||^4 / eps^2
// elements, so a greedy scan that discards the B-sets of chosen columns
// always finds n columns once N >= n / eps^2 (and 5n / eps^2 for the
// disjoint extension).

#include <cmath>
#include <string>
#include <vector>

#include "idfact/linalg.hpp"

namespace idfact {

struct SelectionParams {
  Index n = 1;
  double epsilon = 0.0;
  // When false the counting preconditions are not enforced; exhaustion
  // is still reported.  Used by forced-rank runs on structured inputs.
  bool check_counting = true;
};

namespace detail {

// Borderline tolerance on counting thresholds.
inline constexpr double kCountingSlack = 1e-12;

inline void check_selection_params(Index width, const SelectionParams& p, double size_factor) {
  if (p.n < 1) throw InfeasibleError("selection: family size must be >= 1");
  if (!(p.epsilon > 0.0)) throw InfeasibleError("selection: epsilon must be positive");
  if (!p.check_counting || p.n == 1) return;
  const double eps_limit = 1.0 / std::sqrt(static_cast<double>(p.n - 1));
  if (p.epsilon >= eps_limit + kCountingSlack)
    throw InfeasibleError("selection: epsilon " + std::to_string(p.epsilon) +
                          " >= 1/(n-1)^{1/2} = " + std::to_string(eps_limit));
  const double need = size_factor * static_cast<double>(p.n) / (p.epsilon * p.epsilon);
  if (static_cast<double>(width) < need * (1.0 - kCountingSlack))
    throw InfeasibleError("selection: N = " + std::to_string(width) + " < " +
                          std::to_string(size_factor) + " n/eps^2 = " + std::to_string(need));
}

// Greedy scan: lowest admissible index first; each pick excludes itself
// and its B^eps set.
template <ColumnSource M>
IndexSet greedy_pick(const M& a, Index n, double eps, std::vector<char> excluded) {
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(n));
  Index next = 0;
  while (static_cast<Index>(chosen.size()) < n) {
    while (next < a.cols() && excluded[next]) ++next;
    if (next >= a.cols())
      throw InfeasibleError("selection exhausted after " + std::to_string(chosen.size()) + " of " +
                            std::to_string(n) + " columns (eps = " + std::to_string(eps) + ")");
    const Index i = next;
    chosen.push_back(i);
    excluded[i] = 1;
    if (static_cast<Index>(chosen.size()) == n) break;
    const Vector prod = column_products(a, i);
    for (Index j = 0; j < a.cols(); ++j)
      if (std::abs(prod[j]) >= eps) excluded[j] = 1;
  }
  return IndexSet(std::move(chosen));
}

}  // namespace detail

template <ColumnSource M>
IndexSet big_inner_set(const M& a, Index i, double epsilon) {
  if (i < 0 || i >= a.cols())
    throw DimensionError("big_inner_set: column " + std::to_string(i) + " out of range");
  if (!(epsilon > 0.0)) throw std::invalid_argument("big_inner_set: epsilon must be positive");
  const Vector prod = column_products(a, i);
  std::vector<Index> out;
  for (Index j = 0; j < a.cols(); ++j)
    if (std::abs(prod[j]) >= epsilon) out.push_back(j);
  return IndexSet(std::move(out));
}

/// n columns with pairwise |<a_i, a_j>| < eps.  ||A|| <= 1 is the caller's
/// responsibility.
template <ColumnSource M>
IndexSet select_almost_orthogonal(const M& a, const SelectionParams& p) {
  detail::check_selection_params(a.cols(), p, 1.0);
  if (p.n == 1) return IndexSet{0};
  return detail::greedy_pick(a, p.n, p.epsilon, std::vector<char>(static_cast<std::size_t>(a.cols()), 0));
}

/// n columns, disjoint from f1 and f2, almost orthogonal to each other and
/// to every column of f1 and f2.
template <ColumnSource M>
IndexSet select_disjoint_extension(const M& a, const SelectionParams& p, const IndexSet& f1,
                                   const IndexSet& f2) {
  detail::check_selection_params(a.cols(), p, 5.0);
  if (static_cast<Index>(f1.size()) != p.n || static_cast<Index>(f2.size()) != p.n)
    throw DimensionError("select_disjoint_extension: both families must have n elements");
  f1.check_width(a.cols());
  f2.check_width(a.cols());
  std::vector<char> excluded(static_cast<std::size_t>(a.cols()), 0);
  for (Index i : f1.united(f2)) {
    excluded[i] = 1;
    const Vector prod = column_products(a, i);
    for (Index j = 0; j < a.cols(); ++j)
      if (std::abs(prod[j]) >= p.epsilon) excluded[j] = 1;
  }
  return detail::greedy_pick(a, p.n, p.epsilon, std::move(excluded));
}

}  // namespace idfact
