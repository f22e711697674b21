#pragma once

// Continuous factorization of I_n through a matrix path A(t).
//
// The domain is cut at nodes t_0 < ... < t_M.  Interval m carries a family
// F_m that stays almost orthogonal on all of [t_{m-1}, t_m]; each interior
// node carries a bridge family G_m, disjoint from F_m and F_{m+1}, that is
// almost orthogonal to both on a window [s_m, u_m].  R(t) is R_(A(t),F) away
// from windows and a square-root blend towards G_m inside them:
//
//   [u_{m-1}, s_m]  R_(A(t),F_m)
//   [s_m, t_m]      blend(F_m, G_m), lambda falling 1 -> 0
//   [t_m, u_m]      blend(F_{m+1}, G_m), lambda rising 0 -> 1
//
// L(t) = (A(t) R(t))^T, and the exact factor is (L A R)^{-1} L, computed
// on demand.  Every strict inequality the plan relies on is certified from
// the exact per-segment quadratics of the path.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "idfact/column_select.hpp"
#include "idfact/linalg.hpp"
#include "idfact/matrix_path.hpp"
#include "idfact/static_factor.hpp"

namespace idfact {

struct CoverOptions {
  double selection_margin = 0.5;  // families are selected at margin * eps
  double resolution = 1e-6;       // node resolution, relative to the domain length
  double window_fraction = 0.9;   // share of each neighbouring interval a window may use
};

struct CoverPlan {
  Index n = 0;
  double epsilon = 0.0;
  double theta = 0.0;
  std::vector<double> nodes;                   // t_0 .. t_M
  std::vector<IndexSet> families;              // F_1 .. F_M
  std::vector<IndexSet> bridges;               // G_1 .. G_{M-1}
  std::vector<std::pair<double, double>> windows;  // (s_m, u_m)

  Index intervals() const { return static_cast<Index>(families.size()); }
};

enum class Phase { A, B, C };

/// Where t falls in a plan.  For phase A `family` indexes F; for B and C
/// `node` is the interior node m (1-based, as in t_m) and lambda the tent value.
struct Region {
  Phase phase = Phase::A;
  Index family = 0;
  Index node = 0;
  double lambda = 1.0;
};

//
// blending
//

namespace detail {

inline void check_blend_sets(Index width, const IndexSet& f1, const IndexSet& f2, double lambda) {
  if (f1.size() != f2.size())
    throw DimensionError("blend: families of sizes " + std::to_string(f1.size()) + " and " +
                         std::to_string(f2.size()));
  if (f1.empty()) throw DimensionError("blend: empty families");
  if (!f1.disjoint(f2)) throw DimensionError("blend: families overlap");
  f1.check_width(width);
  f2.check_width(width);
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("blend: lambda = " + std::to_string(lambda) + " outside [0, 1]");
}

// Relative agreement demanded between the two forms of the blended L.
inline constexpr double kBlendAgreement = 1e-12;

}  // namespace detail

/// lambda^{1/2} R_(A,F1) + (1 - lambda)^{1/2} R_(A,F2).
template <ColumnSource M>
Matrix blend_R(const M& a, const IndexSet& f1, const IndexSet& f2, double lambda) {
  detail::check_blend_sets(a.cols(), f1, f2, lambda);
  if (lambda == 1.0) return build_R(a, f1);
  if (lambda == 0.0) return build_R(a, f2);
  return std::sqrt(lambda) * build_R(a, f1) + std::sqrt(1.0 - lambda) * build_R(a, f2);
}

/// lambda^{1/2} L_(A,F1) + (1 - lambda)^{1/2} L_(A,F2), checked against (A blend_R)^T.
template <ColumnSource M>
Matrix blend_L(const M& a, const IndexSet& f1, const IndexSet& f2, double lambda) {
  detail::check_blend_sets(a.cols(), f1, f2, lambda);
  Matrix l;
  if (lambda == 1.0) {
    l = build_L(a, f1);
  } else if (lambda == 0.0) {
    l = build_L(a, f2);
  } else {
    l = std::sqrt(lambda) * build_L(a, f1) + std::sqrt(1.0 - lambda) * build_L(a, f2);
  }
  const Matrix direct = times_right(a, blend_R(a, f1, f2, lambda)).transpose();
  const double scale = std::max(1.0, direct.cwiseAbs().maxCoeff());
  if ((l - direct).cwiseAbs().maxCoeff() > detail::kBlendAgreement * scale)
    throw Error("blend_L: mixed L differs from (A R)^T");
  return l;
}

/// (theta^{-1}, 1 + (2n)^{1/2} eps^{1/2} / theta, 2 n eps / theta^2).
inline FactorEstimates blend_estimates_from(double theta, double eps, Index n) {
  const double nn = static_cast<double>(n);
  return {1.0 / theta, 1.0 + std::sqrt(2.0 * nn * eps) / theta, 2.0 * nn * eps / (theta * theta)};
}

/// The same triple with theta and eps measured over F1 u F2.
template <ColumnSource M>
FactorEstimates blend_estimates(const M& a, const IndexSet& f1, const IndexSet& f2) {
  detail::check_blend_sets(a.cols(), f1, f2, 0.5);
  const GramStats s = gram_stats(a, f1.united(f2));
  return blend_estimates_from(s.theta, s.small_lambda, static_cast<Index>(f1.size()));
}

//
// exact certification over parameter ranges
//

namespace detail {

using PairList = std::vector<std::pair<Index, Index>>;

inline PairList pairs_within(const IndexSet& f) {
  PairList out;
  for (std::size_t p = 0; p < f.size(); ++p)
    for (std::size_t q = p + 1; q < f.size(); ++q) out.emplace_back(f[p], f[q]);
  return out;
}

// Pairs of condition (d): i in G, j in G u F_m u F_{m+1}, i != j.
inline PairList bridge_pairs(const IndexSet& g, const IndexSet& f1, const IndexSet& f2) {
  PairList out = pairs_within(g);
  for (Index i : g)
    for (Index j : f1.united(f2)) out.emplace_back(i, j);
  return out;
}

template <class Frame>
std::vector<Quadratic> segment_quadratics(const MatrixPath<Frame>& path, Index k, const PairList& pairs) {
  std::vector<Quadratic> qs;
  qs.reserve(pairs.size());
  for (const auto& [i, j] : pairs) qs.push_back(path.inner_quadratic(k, i, j));
  return qs;
}

// |q| < eps on the local range [s0, s1]; reports the first offending pair.
inline bool below(const std::vector<Quadratic>& qs, double s0, double s1, double eps,
                  std::size_t* bad = nullptr) {
  for (std::size_t p = 0; p < qs.size(); ++p) {
    const SegmentExtrema e = qs[p].extrema(s0, s1);
    if (!(e.hi < eps && e.lo > -eps)) {
      if (bad) *bad = p;
      return false;
    }
  }
  return true;
}

// Largest x in [from, limit] (direction +1) or smallest x in [limit, from]
// (direction -1) such that every pair stays strictly below eps on the range
// between from and x.  Bisection stops at half the resolution.
template <class Frame>
double extend(const MatrixPath<Frame>& path, const PairList& pairs, double from, double limit,
              double eps, double resolution, int direction) {
  if (pairs.empty()) return limit;
  const auto& bp = path.breakpoints();
  Index k = path.segment_of(from);
  if (direction < 0 && k > 0 && from == bp[k]) --k;
  double certified = from;
  bool first = true;
  while (true) {
    const auto qs = segment_quadratics(path, k, pairs);
    const double near = first ? from : (direction > 0 ? bp[k] : bp[k + 1]);
    const double far = direction > 0 ? std::min(limit, bp[k + 1]) : std::max(limit, bp[k]);
    auto ok = [&](double x) {
      const double s0 = path.local(k, std::min(near, x));
      const double s1 = path.local(k, std::max(near, x));
      return below(qs, s0, s1, eps);
    };
    if (first && !ok(from)) return from;
    first = false;
    if (ok(far)) {
      certified = far;
      if (far == limit) return certified;
      k += direction;
      continue;
    }
    double good = near, bad = far;
    while (std::abs(bad - good) > 0.5 * resolution) {
      const double mid = 0.5 * (good + bad);
      if (mid == good || mid == bad) break;
      (ok(mid) ? good : bad) = mid;
    }
    return good;
  }
}

template <class Frame>
bool certify_range(const MatrixPath<Frame>& path, const PairList& pairs, double from, double to,
                   double eps, std::string* why = nullptr) {
  if (pairs.empty()) return true;
  const auto& bp = path.breakpoints();
  for (Index k = path.segment_of(from); k < path.segments(); ++k) {
    const double a = std::max(from, bp[k]);
    const double b = std::min(to, bp[k + 1]);
    if (a > b) break;
    const auto qs = segment_quadratics(path, k, pairs);
    std::size_t bad = 0;
    if (!below(qs, path.local(k, a), path.local(k, b), eps, &bad)) {
      if (why)
        *why = "columns " + std::to_string(pairs[bad].first + 1) + "," +
               std::to_string(pairs[bad].second + 1) + " reach eps on segment " +
               std::to_string(k + 1) + " within [" + std::to_string(a) + ", " + std::to_string(b) + "]";
      return false;
    }
    if (b >= to) break;
  }
  return true;
}

inline std::string describe_pair_at(double t, const std::pair<Index, Index>& p) {
  return "at t = " + std::to_string(t) + " (columns " + std::to_string(p.first + 1) + "," +
         std::to_string(p.second + 1) + ")";
}

}  // namespace detail

//
// cover construction
//

/// Nodes and per-interval families with |<a_i(t), a_j(t)>| < eps for all
/// i != j in F_m and t in [t_{m-1}, t_m].
template <class Frame>
void build_cover(const MatrixPath<Frame>& path, Index n, double eps, CoverPlan& plan,
                 const CoverOptions& opt = {}) {
  const double res = opt.resolution * (path.end() - path.start());
  const SelectionParams sel{n, opt.selection_margin * eps, true};
  plan.n = n;
  plan.epsilon = eps;
  plan.nodes = {path.start()};
  plan.families.clear();
  double tau = path.start();
  while (tau < path.end()) {
    IndexSet f = select_almost_orthogonal(path.at(tau), sel);
    const auto pairs = detail::pairs_within(f);
    const double x = detail::extend(path, pairs, tau, path.end(), eps, res, +1);
    if (x < path.end() && x - tau < res) {
      std::string where = "at t = " + std::to_string(tau);
      for (const auto& p : pairs) {
        const auto ext = path.inner_extrema_on(path.segment_of(tau), p.first, p.second, tau,
                                               std::min(path.end(), tau + res));
        if (!(ext.abs_max() < eps)) {
          where = detail::describe_pair_at(tau, p);
          break;
        }
      }
      throw StallError("build_cover: certified extent below node resolution " + where, tau);
    }
    plan.nodes.push_back(x);
    plan.families.push_back(std::move(f));
    tau = x;
  }
}

/// Bridge families at interior nodes and windows (s_m, u_m) on which
/// condition (d) holds, kept inside the window_fraction share of the
/// neighbouring intervals so that windows interleave.
template <class Frame>
void build_bridges(const MatrixPath<Frame>& path, CoverPlan& plan, const CoverOptions& opt = {}) {
  const double res = opt.resolution * (path.end() - path.start());
  const Index n = plan.n;
  const double N = static_cast<double>(path.dimension());
  const double eps = plan.epsilon;
  const double eps_b = std::max(opt.selection_margin * eps, std::sqrt(5.0 * static_cast<double>(n) / N) * (1.0 + 1e-9));
  if (plan.intervals() > 1 && !(eps_b < eps))
    throw InfeasibleError("build_bridges: no bridge threshold below eps = " + std::to_string(eps) +
                          " satisfies N >= 5n/eps^2");
  plan.bridges.clear();
  plan.windows.clear();
  const double half = 0.5 * opt.window_fraction;
  for (Index m = 1; m < plan.intervals(); ++m) {
    const double tm = plan.nodes[m];
    const IndexSet& f_left = plan.families[m - 1];
    const IndexSet& f_right = plan.families[m];
    IndexSet g = select_disjoint_extension(path.at(tm), SelectionParams{n, eps_b, true}, f_left, f_right);
    const auto pairs = detail::bridge_pairs(g, f_left, f_right);
    const double reach_r = half * (plan.nodes[m + 1] - tm);
    const double reach_l = half * (tm - plan.nodes[m - 1]);
    const double u = detail::extend(path, pairs, tm, tm + reach_r, eps, res, +1);
    const double s = detail::extend(path, pairs, tm, tm - reach_l, eps, res, -1);
    if (!(u > tm) || !(s < tm) || u - tm < std::min(res, reach_r) || tm - s < std::min(res, reach_l))
      throw StallError("build_bridges: window around t = " + std::to_string(tm) +
                           " below node resolution",
                       tm);
    plan.bridges.push_back(std::move(g));
    plan.windows.emplace_back(s, u);
  }
}

/// Single-interval plan for n = 1: R(t) = e_1 / ||a_1(t)||.
inline CoverPlan rank_one_plan(double start, double end, double theta) {
  CoverPlan plan;
  plan.n = 1;
  plan.epsilon = 0.0;
  plan.theta = theta;
  plan.nodes = {start, end};
  plan.families = {IndexSet{0}};
  return plan;
}

//
// evaluation
//

/// Phase, family or node, and tent value lambda_m(t).
inline Region locate(const CoverPlan& plan, double t) {
  if (!(t >= plan.nodes.front() && t <= plan.nodes.back()))
    throw std::out_of_range("locate: t = " + std::to_string(t) + " outside plan domain");
  // First window whose right end is >= t.
  auto it = std::lower_bound(plan.windows.begin(), plan.windows.end(), t,
                             [](const std::pair<double, double>& w, double x) { return w.second < x; });
  const Index w = static_cast<Index>(it - plan.windows.begin());
  if (it == plan.windows.end() || t < it->first) return Region{Phase::A, w, 0, 1.0};
  const Index m = w + 1;
  const double s = it->first, u = it->second, tm = plan.nodes[m];
  if (t <= tm) return Region{Phase::B, 0, m, (tm - t) / (tm - s)};
  return Region{Phase::C, 0, m, (t - tm) / (u - tm)};
}

/// A(t) R(t) and R(t) for the uncorrected factor; L(t) = (A(t) R(t))^T.
struct RawFactors {
  Matrix right;
  Matrix ar;
  Matrix left() const { return ar.transpose(); }
};

template <class Frame>
RawFactors raw_factor_at(const CoverPlan& plan, const MatrixPath<Frame>& path, double t) {
  const auto slice = path.at(t);
  const Region r = locate(plan, t);
  RawFactors out;
  switch (r.phase) {
    case Phase::A:
      out.right = build_R(slice, plan.families[r.family]);
      break;
    case Phase::B:
      out.right = blend_R(slice, plan.families[r.node - 1], plan.bridges[r.node - 1], r.lambda);
      break;
    case Phase::C:
      out.right = blend_R(slice, plan.families[r.node], plan.bridges[r.node - 1], r.lambda);
      break;
  }
  out.ar = times_right(slice, out.right);
  return out;
}

/// R(t) by an explicit case formula, ignoring where t lies: phase A uses
/// F_{index+1}; B and C use the interior node index with weight lambda.
template <class Frame>
Matrix case_right(const CoverPlan& plan, const MatrixPath<Frame>& path, double t, Phase phase, Index index,
                  double lambda) {
  const auto slice = path.at(t);
  switch (phase) {
    case Phase::A:
      return build_R(slice, plan.families.at(index));
    case Phase::B:
      return blend_R(slice, plan.families.at(index - 1), plan.bridges.at(index - 1), lambda);
    case Phase::C:
      return blend_R(slice, plan.families.at(index), plan.bridges.at(index - 1), lambda);
  }
  throw std::logic_error("case_right: unknown phase");
}

/// Largest entrywise difference, over every interior node, between the two
/// case formulas meeting at s_m, t_m and u_m (R and L = (A R)^T both).
template <class Frame>
double stitch_gap(const CoverPlan& plan, const MatrixPath<Frame>& path) {
  double worst = 0.0;
  auto compare = [&](double t, const Matrix& r1, const Matrix& r2) {
    const auto slice = path.at(t);
    worst = std::max({worst, (r1 - r2).cwiseAbs().maxCoeff(),
                      (times_right(slice, r1) - times_right(slice, r2)).cwiseAbs().maxCoeff()});
  };
  for (Index m = 1; m < plan.intervals(); ++m) {
    const auto [s, u] = plan.windows[m - 1];
    const double tm = plan.nodes[m];
    const Region rs = locate(plan, s), rt = locate(plan, tm), ru = locate(plan, u);
    compare(s, case_right(plan, path, s, Phase::A, m - 1, 1.0), case_right(plan, path, s, Phase::B, m, rs.lambda));
    compare(tm, case_right(plan, path, tm, Phase::B, m, rt.lambda), case_right(plan, path, tm, Phase::C, m, 0.0));
    compare(u, case_right(plan, path, u, Phase::C, m, ru.lambda), case_right(plan, path, u, Phase::A, m, 1.0));
  }
  return worst;
}

struct PointFactors {
  Matrix left;      // (L A R)^{-1} L
  Matrix right;
  Matrix raw_left;  // L = (A R)^T
  Matrix ar;
};

/// Raw deviation allowed before correction in the continuous construction.
inline constexpr double kRawDeviationBudget = 0.25;

template <class Frame>
PointFactors corrected_factor_at(const CoverPlan& plan, const MatrixPath<Frame>& path, double t) {
  RawFactors raw = raw_factor_at(plan, path, t);
  PointFactors out;
  out.raw_left = raw.left();
  // L A R = (A R)^T (A R)
  const Matrix s = raw.ar.transpose() * raw.ar;
  try {
    out.left = correct_left(out.raw_left, s, plan.n == 1 ? 1.0 : kRawDeviationBudget);
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string("internal inconsistency at t = ") + std::to_string(t) +
                          ": certified plan gives " + e.what());
  }
  out.right = std::move(raw.right);
  out.ar = std::move(raw.ar);
  return out;
}

template <class Frame = Matrix>
struct FactorPath {
  std::shared_ptr<const MatrixPath<Frame>> path;
  CoverPlan plan;

  Index n() const { return plan.n; }
  RawFactors raw_at(double t) const { return raw_factor_at(plan, *path, t); }
  PointFactors at(double t) const { return corrected_factor_at(plan, *path, t); }
};

//
// verification
//

struct PlanCheck {
  bool ok = true;
  std::string reason;
};

/// Structure, interleaving, disjointness, and exact recertification of
/// conditions (b) and (d) against the path.
template <class Frame>
PlanCheck check_plan(const MatrixPath<Frame>& path, const CoverPlan& plan) {
  auto fail = [](std::string why) { return PlanCheck{false, std::move(why)}; };
  const Index M = plan.intervals();
  const Index N = path.dimension();
  if (M < 1) return fail("plan has no intervals");
  if (plan.n < 1) return fail("n must be >= 1");
  if (static_cast<Index>(plan.nodes.size()) != M + 1) return fail("node count does not match families");
  if (static_cast<Index>(plan.bridges.size()) != M - 1 || static_cast<Index>(plan.windows.size()) != M - 1)
    return fail("bridge or window count does not match interior nodes");
  if (plan.nodes.front() != path.start() || plan.nodes.back() != path.end())
    return fail("nodes do not span the path domain");
  for (Index m = 1; m <= M; ++m)
    if (!(plan.nodes[m] > plan.nodes[m - 1])) return fail("nodes not strictly increasing");
  for (Index m = 0; m < M; ++m) {
    const IndexSet& f = plan.families[m];
    if (static_cast<Index>(f.size()) != plan.n) return fail("family F" + std::to_string(m + 1) + " has wrong size");
    if (!f.empty() && f.indices().back() >= N) return fail("family F" + std::to_string(m + 1) + " index out of range");
  }
  if (plan.n > 1 && !(plan.epsilon > 0.0)) return fail("epsilon must be positive");
  if (plan.n > 1 && plan.epsilon > continuous_epsilon(plan.theta, plan.n) * (1.0 + 1e-12))
    return fail("epsilon exceeds theta^2/(18n)");
  double prev_u = plan.nodes.front();
  for (Index m = 1; m < M; ++m) {
    const auto [s, u] = plan.windows[m - 1];
    if (!(prev_u < s && s < plan.nodes[m] && plan.nodes[m] < u && u < plan.nodes[m + 1]))
      return fail("windows do not interleave at t_" + std::to_string(m));
    prev_u = u;
    const IndexSet& g = plan.bridges[m - 1];
    if (static_cast<Index>(g.size()) != plan.n) return fail("bridge G" + std::to_string(m) + " has wrong size");
    if (!g.empty() && g.indices().back() >= N) return fail("bridge G" + std::to_string(m) + " index out of range");
    if (!g.disjoint(plan.families[m - 1]) || !g.disjoint(plan.families[m]))
      return fail("bridge G" + std::to_string(m) + " meets F" + std::to_string(m) + " or F" +
                  std::to_string(m + 1));
  }
  std::string why;
  for (Index m = 0; m < M; ++m)
    if (!detail::certify_range(path, detail::pairs_within(plan.families[m]), plan.nodes[m],
                               plan.nodes[m + 1], plan.epsilon, &why))
      return fail("condition (b) fails for F" + std::to_string(m + 1) + ": " + why);
  for (Index m = 1; m < M; ++m) {
    const auto pairs = detail::bridge_pairs(plan.bridges[m - 1], plan.families[m - 1], plan.families[m]);
    if (!detail::certify_range(path, pairs, plan.windows[m - 1].first, plan.windows[m - 1].second,
                               plan.epsilon, &why))
      return fail("condition (d) fails for G" + std::to_string(m) + ": " + why);
  }
  return {};
}

/// s_m, t_m, u_m for every interior node and the midpoint of every interval.
inline std::vector<double> critical_points(const CoverPlan& plan) {
  std::vector<double> out;
  for (Index m = 0; m < plan.intervals(); ++m) {
    out.push_back(0.5 * (plan.nodes[m] + plan.nodes[m + 1]));
    if (m + 1 < plan.intervals()) {
      out.push_back(plan.windows[m].first);
      out.push_back(plan.nodes[m + 1]);
      out.push_back(plan.windows[m].second);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct FactorSample {
  double t = 0.0;
  Matrix left;
  Matrix right;
};

template <class Frame>
std::vector<FactorSample> critical_samples(const FactorPath<Frame>& fp) {
  std::vector<FactorSample> out;
  for (double t : critical_points(fp.plan)) {
    PointFactors pf = fp.at(t);
    out.push_back({t, std::move(pf.left), std::move(pf.right)});
  }
  return out;
}

struct PathCertificate {
  Index grid = 0;
  double max_dev = 0.0;
  double max_product = 0.0;
  double max_raw_dev = 0.0;
  double max_raw_product = 0.0;
  double max_jump = 0.0;
  double worst_t = 0.0;
  double theta = 0.0;
  double budget = 0.0;
  Index n = 0;
  Index intervals = 0;
  bool plan_ok = true;
  bool samples_ok = true;
  bool pass = false;
  std::string reason;
  std::vector<double> nodes;
  std::vector<std::pair<double, double>> windows;
};

/// Uniform grid of grid_count points, plus nodes, window ends and breakpoints.
template <class Frame>
std::vector<double> verification_grid(const MatrixPath<Frame>& path, const CoverPlan& plan, Index grid_count) {
  if (grid_count < 2) throw std::invalid_argument("verification grid needs at least 2 points");
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(grid_count) + plan.nodes.size() + 2 * plan.windows.size() +
            path.breakpoints().size());
  const double a = path.start(), b = path.end();
  for (Index k = 0; k < grid_count; ++k)
    g.push_back(k + 1 == grid_count ? b : a + (b - a) * static_cast<double>(k) / static_cast<double>(grid_count - 1));
  g.insert(g.end(), plan.nodes.begin(), plan.nodes.end());
  for (const auto& [s, u] : plan.windows) {
    g.push_back(s);
    g.push_back(u);
  }
  g.insert(g.end(), path.breakpoints().begin(), path.breakpoints().end());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

/// Largest entrywise disagreement between stored samples and re-evaluation.
template <class Frame>
double sample_disagreement(const FactorPath<Frame>& fp, const std::vector<FactorSample>& samples) {
  double worst = 0.0;
  for (const FactorSample& s : samples) {
    const PointFactors pf = fp.at(s.t);
    if (s.left.rows() != pf.left.rows() || s.left.cols() != pf.left.cols() ||
        s.right.rows() != pf.right.rows() || s.right.cols() != pf.right.cols())
      return std::numeric_limits<double>::infinity();
    worst = std::max({worst, (s.left - pf.left).cwiseAbs().maxCoeff(),
                      (s.right - pf.right).cwiseAbs().maxCoeff()});
  }
  return worst;
}

/// Re-derives everything from the path and the plan: plan certification,
/// then ||L~ A R - I||, ||L~|| ||R|| and the raw-phase quantities on the
/// grid, the largest adjacent change of L~ and R, and agreement with any
/// stored samples.
template <class Frame>
PathCertificate verify_path(const FactorPath<Frame>& fp, Index grid_count, double tol = kDefaultTol,
                            const std::vector<FactorSample>* samples = nullptr) {
  const MatrixPath<Frame>& path = *fp.path;
  PathCertificate c;
  c.n = fp.plan.n;
  c.intervals = fp.plan.intervals();
  c.nodes = fp.plan.nodes;
  c.windows = fp.plan.windows;
  c.theta = path_theta(path);
  c.budget = 2.0 / c.theta;
  const PlanCheck pc = check_plan(path, fp.plan);
  c.plan_ok = pc.ok && fp.plan.theta <= c.theta * (1.0 + 1e-12);
  if (!pc.ok) c.reason = pc.reason;
  else if (!c.plan_ok) c.reason = "plan theta exceeds path theta";
  if (!c.plan_ok) return c;

  const std::vector<double> grid = verification_grid(path, fp.plan, grid_count);
  c.grid = static_cast<Index>(grid.size());
  const Matrix eye = identity(fp.plan.n);
  Matrix prev_l, prev_r;
  double worst_score = -1.0;
  for (double t : grid) {
    PointFactors pf;
    try {
      pf = fp.at(t);
    } catch (const DivergenceError& e) {
      c.reason = e.what();
      c.worst_t = t;
      c.max_dev = std::numeric_limits<double>::infinity();
      return c;
    }
    const double raw_dev = operator_norm(Matrix(pf.raw_left * pf.ar - eye));
    const double norm_r = operator_norm(pf.right);
    const double raw_product = operator_norm(pf.raw_left) * norm_r;
    const double dev = operator_norm(Matrix(pf.left * pf.ar - eye));
    const double product = operator_norm(pf.left) * norm_r;
    c.max_raw_dev = std::max(c.max_raw_dev, raw_dev);
    c.max_raw_product = std::max(c.max_raw_product, raw_product);
    c.max_dev = std::max(c.max_dev, dev);
    c.max_product = std::max(c.max_product, product);
    const double score = std::max(dev / tol, product - c.budget);
    if (score > worst_score) {
      worst_score = score;
      c.worst_t = t;
    }
    if (prev_l.size() != 0)
      c.max_jump = std::max({c.max_jump, operator_norm(Matrix(pf.left - prev_l)),
                             operator_norm(Matrix(pf.right - prev_r))});
    prev_l = std::move(pf.left);
    prev_r = std::move(pf.right);
  }
  if (samples) {
    const double d = sample_disagreement(fp, *samples);
    c.samples_ok = d <= tol;
    if (!c.samples_ok) c.reason = "stored samples disagree with the plan by " + std::to_string(d);
  }
  c.pass = c.plan_ok && c.samples_ok && c.max_dev <= tol && c.max_product <= c.budget + tol;
  if (!c.pass && c.reason.empty()) c.reason = "certificate bounds violated near t = " + std::to_string(c.worst_t);
  return c;
}

struct PathFactorOptions {
  std::optional<Index> n;
  double tol = kDefaultTol;
  Index grid = 4001;
  bool force_rank = false;
  CoverOptions cover;
};

/// Plan for n <= (1/12) theta^{4/3} N^{1/3}, eps = theta^2/(18n), on a path
/// with ||A(t)|| <= 1 and theta = inf ||a_i(t)|| > 0.
template <class Frame>
FactorPath<Frame> plan_path(std::shared_ptr<const MatrixPath<Frame>> path, const PathFactorOptions& opt = {}) {
  const double norm = path_norm_bound(*path);
  if (norm > 1.0 + kNormSlack)
    throw HypothesisError("hypothesis (i) ||A(t)|| <= 1 fails: frame norm " + std::to_string(norm));
  const double theta = path_theta(*path);
  if (!(theta > 0.0))
    throw HypothesisError("hypothesis (ii) theta = inf ||a_i(t)|| > 0 fails: theta = 0");
  const Index N = path->dimension();
  const Index bound = max_rank_continuous(N, std::min(theta, 1.0));
  const Index n = opt.n.value_or(std::max<Index>(bound, 1));
  if (n < 1) throw HypothesisError("requested n must be >= 1");
  if (n > 1 && n > bound && !opt.force_rank)
    throw HypothesisError("n = " + std::to_string(n) + " exceeds (1/12) theta^{4/3} N^{1/3} bound " +
                          std::to_string(bound));
  FactorPath<Frame> fp{path, {}};
  if (n == 1) {
    fp.plan = rank_one_plan(path->start(), path->end(), theta);
    return fp;
  }
  const double eps = continuous_epsilon(theta, n);
  const double need = 5.0 * static_cast<double>(n) / (eps * eps);
  if (static_cast<double>(N) < need * (1.0 - detail::kCountingSlack))
    throw InfeasibleError("N = " + std::to_string(N) + " < 5n/eps^2 = " + std::to_string(need));
  fp.plan.theta = theta;
  build_cover(*path, n, eps, fp.plan, opt.cover);
  build_bridges(*path, fp.plan, opt.cover);
  return fp;
}

template <class Frame>
std::pair<FactorPath<Frame>, PathCertificate> factor_path(std::shared_ptr<const MatrixPath<Frame>> path,
                                                          const PathFactorOptions& opt = {}) {
  FactorPath<Frame> fp = plan_path(std::move(path), opt);
  PathCertificate cert = verify_path(fp, opt.grid, opt.tol);
  return {std::move(fp), std::move(cert)};
}

}  // namespace idfact
