#pragma once

// Seeded random instances.
//
// Orthogonal factors are block diagonal with independent Haar-distributed
// blocks (Gaussian block, Householder QR, sign-fixed R diagonal).  With
// block >= N this is a plain Haar matrix; smaller blocks keep large N
// within memory while preserving exact orthogonality.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/QR>

#include "idfact/linalg.hpp"
#include "idfact/matrix_path.hpp"

namespace idfact {

using Rng = std::mt19937_64;

inline Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  return m;
}

inline Matrix haar_orthogonal(Index n, Rng& rng) {
  const Matrix g = gaussian_matrix(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix& r = qr.matrixQR();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// Diagonal blocks of a block-diagonal matrix, in order.
struct BlockDiagonal {
  std::vector<Matrix> blocks;

  Index dimension() const {
    Index n = 0;
    for (const Matrix& b : blocks) n += b.rows();
    return n;
  }

  SparseMatrix sparse() const {
    const Index n = dimension();
    std::vector<Eigen::Triplet<double>> trip;
    Index off = 0;
    for (const Matrix& b : blocks) {
      for (Index j = 0; j < b.cols(); ++j)
        for (Index i = 0; i < b.rows(); ++i)
          if (b(i, j) != 0.0) trip.emplace_back(off + i, off + j, b(i, j));
      off += b.rows();
    }
    SparseMatrix s(n, n);
    s.setFromTriplets(trip.begin(), trip.end());
    s.makeCompressed();
    return s;
  }

  Matrix dense() const { return Matrix(sparse()); }
};

inline BlockDiagonal block_haar(Index N, Index block, Rng& rng) {
  if (N < 1 || block < 1) throw std::invalid_argument("block_haar: sizes must be positive");
  BlockDiagonal q;
  for (Index off = 0; off < N; off += block) q.blocks.push_back(haar_orthogonal(std::min(block, N - off), rng));
  return q;
}

/// A = Q D with D = diag(d_j), d_j uniform in [theta, 1] and one d_j equal
/// to theta: ||A|| <= 1 and min ||a_j|| = theta exactly.
inline SparseMatrix bench_instance(Index N, double theta, Rng& rng, Index block = 128) {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("bench_instance: theta outside (0, 1]");
  BlockDiagonal q = block_haar(N, block, rng);
  std::uniform_real_distribution<double> u(theta, 1.0);
  std::vector<double> d(static_cast<std::size_t>(N));
  for (double& x : d) x = u(rng);
  d[std::uniform_int_distribution<std::size_t>(0, d.size() - 1)(rng)] = theta;
  Index off = 0;
  for (Matrix& b : q.blocks) {
    for (Index j = 0; j < b.cols(); ++j) b.col(j) *= d[static_cast<std::size_t>(off + j)];
    off += b.cols();
  }
  return q.sparse();
}

/// I + (spread / sqrt(N)) G scaled to norm one: dense, with every pair of
/// columns slightly correlated.
inline Matrix generic_instance(Index N, Rng& rng, double spread = 0.05) {
  Matrix c = Matrix::Identity(N, N) + (spread / std::sqrt(static_cast<double>(N))) * gaussian_matrix(N, N, rng);
  return c / operator_norm(c);
}

inline std::vector<double> uniform_breakpoints(Index segments) {
  std::vector<double> t(static_cast<std::size_t>(segments + 1));
  for (Index k = 0; k <= segments; ++k) t[k] = static_cast<double>(k) / static_cast<double>(segments);
  t.back() = 1.0;
  return t;
}

/// Largest rotation angle whose chord keeps column norms >= theta: the
/// midpoint of unit vectors at angle phi has norm cos(phi/2).
inline double max_rotation_angle(double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("max_rotation_angle: theta outside (0, 1]");
  return std::acos(std::clamp(2.0 * theta * theta - 1.0, -1.0, 1.0));
}

/// Rotates disjoint random row pairs of every block by angles with
/// |phi| in [phi_max/2, phi_max].
inline void rotate_rows(BlockDiagonal& q, double phi_max, Rng& rng) {
  std::uniform_real_distribution<double> mag(0.5 * phi_max, phi_max);
  std::bernoulli_distribution sign(0.5);
  for (Matrix& b : q.blocks) {
    std::vector<Index> rows(static_cast<std::size_t>(b.rows()));
    std::iota(rows.begin(), rows.end(), Index{0});
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t p = 0; p + 1 < rows.size(); p += 2) {
      const double phi = (sign(rng) ? 1.0 : -1.0) * mag(rng);
      const double c = std::cos(phi), s = std::sin(phi);
      const Vector x = b.row(rows[p]).transpose();
      const Vector y = b.row(rows[p + 1]).transpose();
      b.row(rows[p]) = (c * x - s * y).transpose();
      b.row(rows[p + 1]) = (s * x + c * y).transpose();
    }
  }
}

/// A(t) = Q_k at t = k/K, Q_{k+1} = G_k Q_k with G_k random block Givens
/// rotations.  Frames are orthogonal, so ||A(t)|| <= 1 everywhere, and
/// path_theta >= theta; theta = 1 gives a constant path.
inline MatrixPath<SparseMatrix> rotation_path_sparse(Index N, double theta, Index segments, Rng& rng,
                                                     Index block = 8) {
  if (segments < 1) throw std::invalid_argument("rotation_path: need at least one segment");
  const double phi_max = max_rotation_angle(theta);
  BlockDiagonal q = block_haar(N, block, rng);
  std::vector<SparseMatrix> frames;
  frames.reserve(static_cast<std::size_t>(segments + 1));
  frames.push_back(q.sparse());
  for (Index k = 0; k < segments; ++k) {
    if (phi_max > 0.0) rotate_rows(q, phi_max, rng);
    frames.push_back(q.sparse());
  }
  return MatrixPath<SparseMatrix>(uniform_breakpoints(segments), std::move(frames));
}

inline MatrixPath<Matrix> rotation_path(Index N, double theta, Index segments, Rng& rng, Index block) {
  const auto sp = rotation_path_sparse(N, theta, segments, rng, block);
  std::vector<Matrix> frames;
  for (const SparseMatrix& f : sp.frames()) frames.emplace_back(f);
  return MatrixPath<Matrix>(sp.breakpoints(), std::move(frames));
}

template <class Frame>
MatrixPath<Frame> constant_path(const Frame& a, Index segments = 1) {
  return MatrixPath<Frame>(uniform_breakpoints(segments),
                           std::vector<Frame>(static_cast<std::size_t>(segments + 1), a));
}

}  // namespace idfact
