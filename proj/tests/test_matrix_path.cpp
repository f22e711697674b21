#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "idfact/ensemble.hpp"
#include "idfact/io.hpp"
#include "idfact/matrix_path.hpp"
#include "oracles.hpp"

using namespace idfact;

namespace {

MatrixPath<Matrix> random_path(Index n, Index segments, std::mt19937_64& rng) {
  std::vector<Matrix> frames;
  for (Index k = 0; k <= segments; ++k) frames.push_back(gaussian_matrix(n, n, rng) / std::sqrt(4.0 * n));
  std::vector<double> t{0.0};
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (Index k = 0; k < segments; ++k) t.push_back(t.back() + u(rng));
  return MatrixPath<Matrix>(t, frames);
}

// Entry (r, c) of A(t) by scalar interpolation of the two bracketing frames.
double entry_oracle(const MatrixPath<Matrix>& p, double t, Index r, Index c) {
  const auto& bp = p.breakpoints();
  std::size_t k = 0;
  while (k + 2 < bp.size() && t > bp[k + 1]) ++k;
  const double s = (t - bp[k]) / (bp[k + 1] - bp[k]);
  return (1.0 - s) * p.frame(static_cast<Index>(k))(r, c) + s * p.frame(static_cast<Index>(k) + 1)(r, c);
}

Matrix eval_oracle(const MatrixPath<Matrix>& p, double t) {
  const Index n = p.dimension();
  Matrix m(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) m(r, c) = entry_oracle(p, t, r, c);
  return m;
}

double sampled_inner(const MatrixPath<Matrix>& p, double t, Index i, Index j) {
  const Index n = p.dimension();
  std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    x[r] = entry_oracle(p, t, r, i);
    y[r] = entry_oracle(p, t, r, j);
  }
  return oracle::naive_dot(x, y);
}

std::vector<double> grid_on(double a, double b, int count) {
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) g[k] = a + (b - a) * k / (count - 1);
  g.back() = b;
  return g;
}

MatrixPath<Matrix> two_frames(const Matrix& a0, const Matrix& a1) { return MatrixPath<Matrix>({0.0, 1.0}, {a0, a1}); }

}  // namespace

TEST(MatrixPath, ConstructionChecks) {
  EXPECT_THROW(MatrixPath<Matrix>({0.0}, {identity(2)}), DimensionError);
  EXPECT_THROW(MatrixPath<Matrix>({0.0, 1.0}, {identity(2)}), DimensionError);
  EXPECT_THROW(MatrixPath<Matrix>({0.0, 0.0}, {identity(2), identity(2)}), DimensionError);
  EXPECT_THROW(MatrixPath<Matrix>({0.0, 1.0}, {identity(2), identity(3)}), DimensionError);
  EXPECT_THROW(MatrixPath<Matrix>({0.0, 1.0}, {identity(2), Matrix::Zero(2, 3)}), DimensionError);
  const auto p = two_frames(identity(2), identity(2));
  EXPECT_THROW(p.eval(1.5), std::out_of_range);
  EXPECT_THROW(p.eval(-0.1), std::out_of_range);
}

TEST(Eval, ConstantPath) {
  std::mt19937_64 rng(51);
  const Matrix a = gaussian_matrix(4, 4, rng);
  const auto p = constant_path(a, 3);
  for (double t : {0.0, 0.1, 1.0 / 3.0, 0.5, 1.0})
    EXPECT_LE((p.eval(t) - a).cwiseAbs().maxCoeff(), 4 * std::numeric_limits<double>::epsilon());
  EXPECT_EQ(p.eval(p.breakpoints()[1]), a);
}

TEST(Eval, ZeroToIdentityMidpoint) {
  EXPECT_EQ(two_frames(Matrix::Zero(3, 3), identity(3)).eval(0.5), 0.5 * identity(3));
}

TEST(Eval, BreakpointsReturnFramesExactly) {
  std::mt19937_64 rng(52);
  const auto p = random_path(5, 4, rng);
  for (Index k = 0; k <= 4; ++k) EXPECT_EQ(p.eval(p.breakpoints()[k]), p.frame(k));
}

TEST(Eval, MatchesScalarInterpolation) {
  std::mt19937_64 rng(53);
  const auto p = random_path(5, 1, rng);
  for (double t : grid_on(p.start(), p.end(), 1000))
    EXPECT_LE((p.eval(t) - eval_oracle(p, t)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PathSlice, ColumnOperationsMatchEvaluatedMatrix) {
  std::mt19937_64 rng(54);
  const auto p = random_path(6, 3, rng);
  for (double t : grid_on(p.start(), p.end(), 37)) {
    const Matrix m = p.eval(t);
    const auto s = p.at(t);
    EXPECT_LE((column_squared_norms(s) - column_squared_norms(m)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((column_products(s, 2) - column_products(m, 2)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(column_dot(s, 1, 4), column_dot(m, 1, 4), 1e-14);
    Vector acc = Vector::Zero(6);
    column_axpy(s, 3, 2.0, acc);
    EXPECT_LE((acc - 2.0 * m.col(3)).cwiseAbs().maxCoeff(), 1e-14);
    const Matrix r = Matrix::Identity(6, 2);
    EXPECT_LE((times_right(s, r) - m * r).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Quadratic, BernsteinForm) {
  // (1-s)^2 + 6 s(1-s) + 9 s^2 = (1 + 2s)^2
  const Quadratic q = Quadratic::from_bernstein(1.0, 6.0, 9.0);
  for (double s : {0.0, 0.25, 0.5, 1.0}) EXPECT_NEAR(q(s), (1 + 2 * s) * (1 + 2 * s), 1e-15);
  const SegmentExtrema e = Quadratic{0.0, -1.0, 1.0}.extrema(0.0, 1.0);
  EXPECT_DOUBLE_EQ(e.lo, -0.25);
  EXPECT_DOUBLE_EQ(e.hi, 0.0);
  EXPECT_DOUBLE_EQ(e.abs_max(), 0.25);
}

TEST(SegmentInnerExtrema, ConstantPath) {
  std::mt19937_64 rng(55);
  const Matrix a = gaussian_matrix(4, 4, rng);
  const SegmentExtrema e = segment_inner_extrema(constant_path(a), 0, 1, 2);
  EXPECT_NEAR(e.lo, a.col(1).dot(a.col(2)), 1e-14);
  EXPECT_NEAR(e.hi, a.col(1).dot(a.col(2)), 1e-14);
}

TEST(SegmentInnerExtrema, OrthogonalMovingColumns) {
  // a_0(t) = (t, 0), a_1(t) = (0, 1 - t)
  Matrix a0 = Matrix::Zero(2, 2), a1 = Matrix::Zero(2, 2);
  a0(1, 1) = 1.0;
  a1(0, 0) = 1.0;
  const SegmentExtrema e = segment_inner_extrema(two_frames(a0, a1), 0, 0, 1);
  EXPECT_EQ(e.lo, 0.0);
  EXPECT_EQ(e.hi, 0.0);
  EXPECT_THROW(segment_inner_extrema(two_frames(a0, a1), 1, 0, 1), DimensionError);
}

TEST(SegmentInnerExtrema, BracketDenseSamples) {
  std::mt19937_64 rng(56);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_path(5, 1, rng);
    const Index i = trial % 5, j = (trial * 3 + 1) % 5;
    const SegmentExtrema e = segment_inner_extrema(p, 0, i, j);
    double lo = INFINITY, hi = -INFINITY;
    for (double t : grid_on(p.start(), p.end(), 10000)) {
      const double v = sampled_inner(p, t, i, j);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    EXPECT_LE(e.lo, lo + 1e-15);
    EXPECT_GE(e.hi, hi - 1e-15);
    // grid spacing 1e-4 on a quadratic: sampled extrema are within O(1e-8)
    EXPECT_NEAR(e.lo, lo, 1e-7);
    EXPECT_NEAR(e.hi, hi, 1e-7);
  }
}

TEST(SegmentInnerExtrema, VertexOnGridIsTight) {
  // inner product of a_0(t) = (1 - 2t, 0) with itself has its vertex at the grid point 1/2
  Matrix a0 = Matrix::Zero(2, 2), a1 = Matrix::Zero(2, 2);
  a0(0, 0) = 1.0;
  a1(0, 0) = -1.0;
  const auto p = two_frames(a0, a1);
  const SegmentExtrema e = segment_inner_extrema(p, 0, 0, 0);
  EXPECT_NEAR(e.lo, 0.0, 1e-12);
  EXPECT_NEAR(e.hi, 1.0, 1e-12);
}

TEST(SegmentMinColnorm, Examples) {
  Matrix a0 = Matrix::Zero(2, 2), a1 = Matrix::Zero(2, 2);
  a0(0, 0) = 1.0;
  a1(0, 0) = -1.0;
  a0(1, 1) = a1(1, 1) = 0.5;
  const auto p = two_frames(a0, a1);
  EXPECT_EQ(segment_min_colnorm(p, 0, 0), 0.0);
  EXPECT_NEAR(segment_min_colnorm(p, 0, 1), 0.5, 1e-15);
  EXPECT_EQ(path_theta(p), 0.0);
  EXPECT_NEAR(segment_min_colnorm(constant_path(Matrix(0.7 * identity(3))), 0, 2), 0.7, 1e-15);
}

TEST(SegmentMinColnorm, MatchesDenseSamples) {
  std::mt19937_64 rng(57);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_path(4, 1, rng);
    const Index i = trial % 4;
    double lo = INFINITY;
    for (double t : grid_on(p.start(), p.end(), 10000)) lo = std::min(lo, std::sqrt(sampled_inner(p, t, i, i)));
    const double got = segment_min_colnorm(p, 0, i);
    EXPECT_LE(got, lo + 1e-15);
    EXPECT_NEAR(got, lo, 1e-7);
  }
}

TEST(PathTheta, ConstantIdentity) { EXPECT_EQ(path_theta(constant_path(identity(5), 4)), 1.0); }

TEST(PathTheta, MatchesDenseGridMinimum) {
  std::mt19937_64 rng(58);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_path(4, 3, rng);
    double lo = INFINITY;
    for (double t : grid_on(p.start(), p.end(), 20000)) {
      const Matrix m = eval_oracle(p, t);
      for (Index i = 0; i < 4; ++i) lo = std::min(lo, m.col(i).norm());
    }
    const double got = path_theta(p);
    EXPECT_LE(got, lo + 1e-15);
    EXPECT_NEAR(got, lo, 1e-6);
  }
}

TEST(PathNormBound, Examples) {
  EXPECT_NEAR(path_norm_bound(constant_path(Matrix(0.8 * identity(3)))), 0.8, 1e-14);
  const auto p = two_frames(Matrix::Zero(3, 3), identity(3));
  EXPECT_NEAR(path_norm_bound(p), 1.0, 1e-14);
  for (double t : grid_on(0.0, 1.0, 11)) EXPECT_NEAR(oracle::operator_norm(p.eval(t)), t, 1e-12);
}

TEST(PathNormBound, DominatesSampledNorms) {
  std::mt19937_64 rng(59);
  const auto p = random_path(5, 4, rng);
  const double bound = path_norm_bound(p);
  for (double t : grid_on(p.start(), p.end(), 2000)) EXPECT_LE(oracle::operator_norm(eval_oracle(p, t)), bound * (1 + 1e-10));
}

TEST(Continuity, NormAndEntryDifferencesAreEquivalent) {
  // For N x N matrices: max |entry| <= ||.|| <= N max |entry|.
  std::mt19937_64 rng(60);
  const auto p = random_path(6, 5, rng);
  std::uniform_real_distribution<double> u(p.start(), p.end());
  for (int trial = 0; trial < 300; ++trial) {
    const double t0 = u(rng);
    const double t = std::clamp(t0 + 1e-3 * (u(rng) - p.start()), p.start(), p.end());
    const Matrix d = p.eval(t) - p.eval(t0);
    const double entry = d.cwiseAbs().maxCoeff();
    const double nrm = oracle::operator_norm(d);
    EXPECT_LE(entry, nrm * (1 + 1e-12) + 1e-300);
    EXPECT_LE(nrm, 6.0 * entry * (1 + 1e-12) + 1e-300);
  }
}

TEST(PathIo, MinimalFile) {
  std::istringstream in("2 1\n0 1\n\n1 0\n0 1\n\n0 0\n0 0\n");
  const auto p = read_path(in);
  EXPECT_EQ(p.segments(), 1);
  EXPECT_EQ(p.frame(0), identity(2));
  EXPECT_EQ(p.frame(1), Matrix::Zero(2, 2));
}

TEST(PathIo, DecreasingBreakpointsRejectedWithLine) {
  std::istringstream in("2 2\n\n0 1 0.5\n");
  try {
    read_path(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(PathIo, RoundTrip) {
  std::mt19937_64 rng(61);
  const auto p = random_path(4, 3, rng);
  std::stringstream s;
  write_path(s, p);
  const auto q = read_path(s);
  EXPECT_EQ(q.breakpoints(), p.breakpoints());
  for (Index k = 0; k <= 3; ++k) EXPECT_EQ(q.frame(k), p.frame(k));
}
