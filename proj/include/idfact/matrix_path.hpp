#pragma once

// Continuous matrix functions A(t) on [t_0, t_K], affine between frames.
//
// On a segment [t_k, t_{k+1}] with local parameter s = (t - t_k)/h every
// <a_i(t), a_j(t)> is the quadratic
//   g00 (1-s)^2 + (g01 + g10) s (1-s) + g11 s^2,   gab = <a_i^(k+a), a_j^(k+b)>,
// so strict inequalities on it are certified exactly from three
// candidate points.  ||A(t)|| is convex along the segment, so frame norms
// bound it everywhere.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "idfact/linalg.hpp"

namespace idfact {

struct SegmentExtrema {
  double lo = 0.0;
  double hi = 0.0;
  double abs_max() const { return std::max(std::abs(lo), std::abs(hi)); }
};

/// c0 + c1 s + c2 s^2
struct Quadratic {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;

  static Quadratic from_bernstein(double g00, double cross, double g11) {
    return {g00, cross - 2.0 * g00, g00 + g11 - cross};
  }
  double operator()(double s) const { return c0 + s * (c1 + s * c2); }

  /// Exact extrema over [s0, s1]: both ends and the interior vertex.
  SegmentExtrema extrema(double s0, double s1) const {
    const double f0 = (*this)(s0), f1 = (*this)(s1);
    SegmentExtrema e{std::min(f0, f1), std::max(f0, f1)};
    if (c2 != 0.0) {
      const double v = -c1 / (2.0 * c2);
      if (v > s0 && v < s1) {
        const double fv = (*this)(v);
        e.lo = std::min(e.lo, fv);
        e.hi = std::max(e.hi, fv);
      }
    }
    return e;
  }
};

template <class Frame>
class PathSlice;

template <class Frame = Matrix>
class MatrixPath {
 public:
  MatrixPath(std::vector<double> breakpoints, std::vector<Frame> frames)
      : breakpoints_(std::move(breakpoints)), frames_(std::move(frames)) {
    if (breakpoints_.size() < 2) throw DimensionError("MatrixPath: need at least two breakpoints");
    if (frames_.size() != breakpoints_.size())
      throw DimensionError("MatrixPath: " + std::to_string(frames_.size()) + " frames for " +
                           std::to_string(breakpoints_.size()) + " breakpoints");
    for (std::size_t k = 1; k < breakpoints_.size(); ++k)
      if (!(breakpoints_[k] > breakpoints_[k - 1]))
        throw DimensionError("MatrixPath: breakpoints must be strictly increasing");
    const Index n = frames_.front().rows();
    for (const Frame& f : frames_)
      if (f.rows() != n || f.cols() != n)
        throw DimensionError("MatrixPath: all frames must be " + std::to_string(n) + "x" +
                             std::to_string(n));
  }

  Index dimension() const { return frames_.front().rows(); }
  Index segments() const { return static_cast<Index>(frames_.size()) - 1; }
  double start() const { return breakpoints_.front(); }
  double end() const { return breakpoints_.back(); }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<Frame>& frames() const { return frames_; }
  const Frame& frame(Index k) const { return frames_[static_cast<std::size_t>(k)]; }

  void check_domain(double t) const {
    if (!(t >= start() && t <= end()))
      throw std::out_of_range("MatrixPath: t = " + std::to_string(t) + " outside [" +
                              std::to_string(start()) + ", " + std::to_string(end()) + "]");
  }

  /// Segment k with t in [t_k, t_{k+1}] (the last segment owns t_K).
  Index segment_of(double t) const {
    check_domain(t);
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    Index k = static_cast<Index>(it - breakpoints_.begin()) - 1;
    return std::clamp<Index>(k, 0, segments() - 1);
  }

  double seg_length(Index k) const { return breakpoints_[k + 1] - breakpoints_[k]; }

  /// Local parameter of t on segment k.
  double local(Index k, double t) const { return (t - breakpoints_[k]) / seg_length(k); }

  /// Interpolation weights (w0, w1) of frames k and k+1 at t; exact at breakpoints.
  std::pair<double, double> weights(Index k, double t) const {
    if (t == breakpoints_[k]) return {1.0, 0.0};
    if (t == breakpoints_[k + 1]) return {0.0, 1.0};
    const double h = seg_length(k);
    return {(breakpoints_[k + 1] - t) / h, (t - breakpoints_[k]) / h};
  }

  Frame eval(double t) const {
    const Index k = segment_of(t);
    const auto [w0, w1] = weights(k, t);
    if (w1 == 0.0) return frames_[k];
    if (w0 == 0.0) return frames_[k + 1];
    return Frame(w0 * frames_[k] + w1 * frames_[k + 1]);
  }

  PathSlice<Frame> at(double t) const;

  /// <a_i(t), a_j(t)> on segment k as a quadratic in the local parameter.
  Quadratic inner_quadratic(Index k, Index i, Index j) const {
    check_column(i);
    check_column(j);
    const Frame& a = frames_[k];
    const Frame& b = frames_[k + 1];
    return Quadratic::from_bernstein(column_dot(a, i, j),
                                     cross_dot(a, i, b, j) + cross_dot(b, i, a, j),
                                     column_dot(b, i, j));
  }

  /// Extrema of <a_i(t), a_j(t)> for t in [from, to] inside segment k.
  SegmentExtrema inner_extrema_on(Index k, Index i, Index j, double from, double to) const {
    return inner_quadratic(k, i, j).extrema(local(k, from), local(k, to));
  }

  void check_column(Index i) const {
    if (i < 0 || i >= dimension())
      throw DimensionError("MatrixPath: column " + std::to_string(i) + " out of range");
  }

 private:
  static double cross_dot(const Frame& a, Index i, const Frame& b, Index j) {
    return a.col(i).dot(b.col(j));
  }

  std::vector<double> breakpoints_;
  std::vector<Frame> frames_;
};

/// A(t) viewed through its columns, without forming the matrix.
template <class Frame>
class PathSlice {
 public:
  PathSlice(const Frame& a, const Frame& b, double w0, double w1) : a_(&a), b_(&b), w0_(w0), w1_(w1) {}

  Index rows() const { return a_->rows(); }
  Index cols() const { return a_->cols(); }
  double w0() const { return w0_; }
  double w1() const { return w1_; }
  const Frame& left() const { return *a_; }
  const Frame& right() const { return *b_; }

 private:
  const Frame* a_;
  const Frame* b_;
  double w0_, w1_;
};

template <class Frame>
PathSlice<Frame> MatrixPath<Frame>::at(double t) const {
  const Index k = segment_of(t);
  const auto [w0, w1] = weights(k, t);
  return PathSlice<Frame>(frames_[k], frames_[k + 1], w0, w1);
}

template <class Frame>
void column_axpy(const PathSlice<Frame>& s, Index j, double alpha, Eigen::Ref<Vector> out) {
  if (s.w0() != 0.0) column_axpy(s.left(), j, alpha * s.w0(), out);
  if (s.w1() != 0.0) column_axpy(s.right(), j, alpha * s.w1(), out);
}

template <class Frame>
double column_dot(const PathSlice<Frame>& s, Index i, Index j) {
  if (s.w1() == 0.0) return column_dot(s.left(), i, j);
  if (s.w0() == 0.0) return column_dot(s.right(), i, j);
  const Frame& a = s.left();
  const Frame& b = s.right();
  return s.w0() * s.w0() * column_dot(a, i, j) +
         s.w0() * s.w1() * (a.col(i).dot(b.col(j)) + b.col(i).dot(a.col(j))) +
         s.w1() * s.w1() * column_dot(b, i, j);
}

template <class Frame>
Vector column_products(const PathSlice<Frame>& s, Index i) {
  if (s.w1() == 0.0) return column_products(s.left(), i);
  if (s.w0() == 0.0) return column_products(s.right(), i);
  const Vector ai = column_vector(s, i);
  return s.w0() * (s.left().transpose() * ai) + s.w1() * (s.right().transpose() * ai);
}

template <class Frame>
Vector column_squared_norms(const PathSlice<Frame>& s) {
  if (s.w1() == 0.0) return column_squared_norms(s.left());
  if (s.w0() == 0.0) return column_squared_norms(s.right());
  return s.w0() * s.w0() * column_squared_norms(s.left()) +
         2.0 * s.w0() * s.w1() * column_cross_dots(s.left(), s.right()) +
         s.w1() * s.w1() * column_squared_norms(s.right());
}

/// Exact extrema of t -> <a_i(t), a_j(t)> over segment seg.
template <class Frame>
SegmentExtrema segment_inner_extrema(const MatrixPath<Frame>& path, Index seg, Index i, Index j) {
  if (seg < 0 || seg >= path.segments())
    throw DimensionError("segment_inner_extrema: segment " + std::to_string(seg) + " out of range");
  return path.inner_quadratic(seg, i, j).extrema(0.0, 1.0);
}

/// Exact minimum of ||a_i(t)|| over segment seg.
template <class Frame>
double segment_min_colnorm(const MatrixPath<Frame>& path, Index seg, Index i) {
  if (seg < 0 || seg >= path.segments())
    throw DimensionError("segment_min_colnorm: segment " + std::to_string(seg) + " out of range");
  return std::sqrt(std::max(0.0, path.inner_quadratic(seg, i, i).extrema(0.0, 1.0).lo));
}

/// inf over t and i of ||a_i(t)||.
template <class Frame>
double path_theta(const MatrixPath<Frame>& path) {
  double best = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < path.segments(); ++k) {
    const Frame& a = path.frame(k);
    const Frame& b = path.frame(k + 1);
    const Vector na = column_squared_norms(a);
    const Vector nb = column_squared_norms(b);
    const Vector cross = column_cross_dots(a, b);
    for (Index i = 0; i < a.cols(); ++i) {
      const Quadratic q = Quadratic::from_bernstein(na[i], 2.0 * cross[i], nb[i]);
      best = std::min(best, q.extrema(0.0, 1.0).lo);
    }
  }
  return std::sqrt(std::max(0.0, best));
}

/// max_k ||A_k||, a bound on ||A(t)|| for every t.
template <class Frame>
double path_norm_bound(const MatrixPath<Frame>& path, double rel_tol = kDefaultRelTol) {
  double best = 0.0;
  for (const Frame& f : path.frames()) best = std::max(best, operator_norm(f, rel_tol));
  return best;
}

}  // namespace idfact
