#pragma once

// Factoring I_n through a single matrix: L A R = I_n with ||L|| ||R|| <= 2/theta.
//
// R_(A,F) has columns e_{i_k} / ||a_{i_k}||, L_(A,F) = (A R_(A,F))^T.  For an
// almost-orthogonal F the product L_(A,F) A R_(A,F) is within 1/4 of I_n and
// multiplying L by its inverse makes the factorization exact.

#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "idfact/column_select.hpp"
#include "idfact/linalg.hpp"

namespace idfact {

inline constexpr double kDefaultTol = 1e-9;
inline constexpr double kNormSlack = 1e-9;

struct FactorPair {
  Matrix left;   // n x N
  Matrix right;  // N x n
  Index n = 0;
  IndexSet family;
  bool corrected = false;
};

struct StaticCertificate {
  double dev = 0.0;
  double norm_L = 0.0;
  double norm_R = 0.0;
  double product = 0.0;
  double theta = 0.0;
  double budget = 0.0;
  bool pass = false;
  IndexSet family;
};

/// C and Delta of the correction step: ||LAR - I|| <= C < 1 and
/// ||L|| ||R|| <= Delta give an exact factorization with product Delta/(1-C).
struct CorrectionBudget {
  double c_dev = 0.0;
  double norm_budget = 0.0;

  CorrectionBudget(double c, double delta) : c_dev(c), norm_budget(delta) {
    if (!(c >= 0.0 && c < 1.0)) throw std::invalid_argument("CorrectionBudget: C must lie in [0,1)");
    if (!(delta >= 0.0)) throw std::invalid_argument("CorrectionBudget: Delta must be >= 0");
  }
  double corrected_budget() const { return norm_budget / (1.0 - c_dev); }
};

/// A-priori bounds on ||R||, ||L|| and ||LAR - I||.
struct FactorEstimates {
  double right_bound = 0.0;
  double left_bound = 0.0;
  double deviation_bound = 0.0;
};

template <ColumnSource M>
Matrix build_R(const M& a, const IndexSet& f) {
  f.check_width(a.cols());
  Matrix r = Matrix::Zero(a.cols(), static_cast<Index>(f.size()));
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double nrm = column_norm(a, f[k]);
    if (!(nrm > 0.0))
      throw HypothesisError("build_R: column " + std::to_string(f[k] + 1) + " has zero norm");
    r(f[k], static_cast<Index>(k)) = 1.0 / nrm;
  }
  return r;
}

template <ColumnSource M>
Matrix build_L(const M& a, const IndexSet& f) {
  return times_right(a, build_R(a, f)).transpose();
}

/// (theta^{-1}, 1 + (n-1)^{1/2} eps^{1/2} / theta, n eps / theta^2), with theta
/// and eps taken over the columns in f.
template <ColumnSource M>
FactorEstimates factor_estimates(const M& a, const IndexSet& f) {
  const GramStats s = gram_stats(a, f);
  const double n = static_cast<double>(f.size());
  const double eps = s.small_lambda;
  return {1.0 / s.theta, 1.0 + std::sqrt((n - 1.0) * eps) / s.theta,
          n * eps / (s.theta * s.theta)};
}

/// S^{-1} for ||S - I|| < 1, by LU with partial pivoting.  Throws when
/// the deviation reaches 1 or exceeds c_hint; the returned inverse is
/// checked against the Neumann bound 1/(1 - ||S - I||).
inline Matrix invert_near_identity(const Matrix& s, double c_hint = 1.0) {
  if (s.rows() != s.cols()) throw DimensionError("invert_near_identity: S must be square");
  const Index n = s.rows();
  const double c = operator_norm(s - identity(n));
  if (!(c < 1.0))
    throw DivergenceError("invert_near_identity: ||S - I|| = " + std::to_string(c) + " >= 1");
  if (c > c_hint + kNormSlack)
    throw DivergenceError("invert_near_identity: ||S - I|| = " + std::to_string(c) +
                          " exceeds budget " + std::to_string(c_hint));
  Matrix inv = s.partialPivLu().inverse();
  const double inv_norm = operator_norm(inv);
  if (inv_norm > 1.0 / (1.0 - c) + kNormSlack)
    throw DivergenceError("invert_near_identity: ||S^-1|| = " + std::to_string(inv_norm) +
                          " above Neumann bound");
  return inv;
}

/// L~ = (L A R)^{-1} L, given the n x n product S = L A R.
inline Matrix correct_left(const Matrix& left, const Matrix& lar, double c_hint = 1.0) {
  return invert_near_identity(lar, c_hint) * left;
}

namespace detail {
// Guards floor() against products that land a rounding error below an integer.
inline constexpr double kRankSlack = 1e-9;

inline void check_theta(double theta) {
  if (!(theta > 0.0 && theta <= 1.0 + kNormSlack))
    throw HypothesisError("theta = " + std::to_string(theta) + " outside (0, 1]");
}
}  // namespace detail

/// floor((1/5) theta^{4/3} N^{1/3}); 0 means no guaranteed n >= 1.
inline Index max_rank(Index N, double theta) {
  detail::check_theta(theta);
  const double v = std::pow(theta, 4.0 / 3.0) * std::cbrt(static_cast<double>(N)) / 5.0;
  return static_cast<Index>(std::floor(v + detail::kRankSlack));
}

/// floor((1/12) theta^{4/3} N^{1/3}), the continuous regime.
inline Index max_rank_continuous(Index N, double theta) {
  detail::check_theta(theta);
  const double v = std::pow(theta, 4.0 / 3.0) * std::cbrt(static_cast<double>(N)) / 12.0;
  return static_cast<Index>(std::floor(v + detail::kRankSlack));
}

/// eps = theta^2 / (9 (n-1)): makes (n-1)^{1/2} eps^{1/2} / theta = 1/3.
inline double static_epsilon(double theta, Index n) {
  return theta * theta / (9.0 * static_cast<double>(n - 1));
}

/// eps = theta^2 / (18 n): makes (2n)^{1/2} eps^{1/2} / theta = 1/3.
inline double continuous_epsilon(double theta, Index n) {
  return theta * theta / (18.0 * static_cast<double>(n));
}

/// diag(1, theta, ..., theta): no factorization with n >= 2 beats 1/theta.
inline Matrix witness_lower_bound(Index N, double theta) {
  if (N < 2) throw std::invalid_argument("witness_lower_bound: N must be >= 2");
  detail::check_theta(theta);
  Matrix a = Matrix::Zero(N, N);
  a(0, 0) = 1.0;
  for (Index i = 1; i < N; ++i) a(i, i) = theta;
  return a;
}

/// Recomputes ||LAR - I|| and ||L|| ||R|| from the matrices alone.
template <ColumnSource M>
StaticCertificate verify_static(const M& a, const FactorPair& pair, double theta,
                                double tol = kDefaultTol) {
  const Matrix& l = pair.left;
  const Matrix& r = pair.right;
  if (l.cols() != a.rows() || r.rows() != a.cols() || l.rows() != r.cols())
    throw DimensionError("verify_static: L is " + std::to_string(l.rows()) + "x" +
                         std::to_string(l.cols()) + ", R is " + std::to_string(r.rows()) + "x" +
                         std::to_string(r.cols()) + ", A is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()));
  StaticCertificate c;
  c.family = pair.family;
  const Matrix lar = l * times_right(a, r);
  c.dev = operator_norm(lar - identity(l.rows()));
  c.norm_L = operator_norm(l);
  c.norm_R = operator_norm(r);
  c.product = c.norm_L * c.norm_R;
  c.theta = theta;
  c.budget = 2.0 / theta;
  c.pass = c.dev <= tol && c.product <= c.budget + tol;
  return c;
}

struct FactorOptions {
  std::optional<Index> n;  // empty: automatic rank
  double tol = kDefaultTol;
  // Skip the rank bound and the counting preconditions (the factorization
  // is still certified).  Only meaningful with an explicit n.
  bool force_rank = false;
};

namespace detail {

template <ColumnSource M>
FactorPair factor_normalized(const M& a, Index n, double theta, bool force) {
  FactorPair pair;
  pair.n = n;
  if (n == 1) {
    pair.family = IndexSet{0};
    pair.right = build_R(a, pair.family);
    pair.left = build_L(a, pair.family);
    return pair;
  }
  const double eps = static_epsilon(theta, n);
  pair.family = select_almost_orthogonal(a, SelectionParams{n, eps, !force});
  pair.right = build_R(a, pair.family);
  const Matrix l0 = build_L(a, pair.family);
  // L0 A R0 = L0 L0^T since L0 = (A R0)^T.
  pair.left = correct_left(l0, l0 * l0.transpose(), force ? 1.0 : 0.25);
  pair.corrected = true;
  return pair;
}

}  // namespace detail

/// L A R = I_n with ||L|| ||R|| <= 2/theta for ||A|| <= 1 and
/// n <= (1/5) theta^{4/3} N^{1/3}.  Automatic rank uses that bound and
/// falls back to n = 1, which needs only theta > 0.
template <ColumnSource M>
std::pair<FactorPair, StaticCertificate> factor_identity(const M& a, const FactorOptions& opt = {}) {
  if (a.rows() != a.cols()) throw DimensionError("factor_identity: A must be square");
  const double norm = operator_norm(a);
  if (norm > 1.0 + kNormSlack)
    throw HypothesisError("hypothesis (i) ||A|| <= 1 fails: ||A|| = " + std::to_string(norm));
  const double theta = min_column_norm(a);
  if (!(theta > 0.0))
    throw HypothesisError("hypothesis (ii) theta = min ||a_i|| > 0 fails: theta = 0");
  const Index bound = max_rank(a.cols(), std::min(theta, 1.0));
  Index n = opt.n.value_or(std::max<Index>(bound, 1));
  if (n < 1) throw HypothesisError("requested n must be >= 1");
  if (n > 1 && n > bound && !opt.force_rank)
    throw HypothesisError("n = " + std::to_string(n) + " exceeds (1/5) theta^{4/3} N^{1/3} bound " +
                          std::to_string(bound));
  FactorPair pair = detail::factor_normalized(a, n, theta, opt.force_rank);
  StaticCertificate cert = verify_static(a, pair, theta, opt.tol);
  return {std::move(pair), std::move(cert)};
}

/// Same for arbitrary ||A||: factors A/||A|| and rescales L; the budget
/// becomes 2 ||A|| / theta.
template <class M>
std::pair<FactorPair, StaticCertificate> scaled_factor(const M& a, const FactorOptions& opt = {}) {
  const double norm = operator_norm(a);
  if (!(norm > 0.0)) throw HypothesisError("scaled_factor: zero matrix");
  const M scaled = a / norm;
  auto [pair, inner_cert] = factor_identity(scaled, opt);
  pair.left /= norm;
  const double theta = min_column_norm(a);
  // 2 ||A|| / theta = 2 / (theta / ||A||)
  StaticCertificate cert = verify_static(a, pair, theta / norm, opt.tol);
  cert.theta = theta;
  return {std::move(pair), std::move(cert)};
}

}  // namespace idfact
