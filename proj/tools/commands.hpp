#pragma once

// Subcommand bodies for the idfact tool.  Each returns an exit code and
// prints exactly one key=value summary line to `out`.
//
//   0  certificate passes
//   1  usage, I/O or parse error
//   2  hypothesis violated, selection infeasible, cover stalled
//   3  certificate fails

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "idfact/idfact.hpp"

namespace idfact::cli {

enum Exit : int { kPass = 0, kUsage = 1, kHypothesis = 2, kCertificate = 3 };

struct RunConfig {
  std::string input;
  std::string prefix = "out";
  std::optional<Index> n;
  double tol = kDefaultTol;
  Index grid = 4001;
  std::uint64_t seed = 1;
  bool rescale = false;
  bool force_rank = false;
  double theta = 1.0;
  Index N = 0;
  std::string sweep;
  Index count = 20;
  std::string kind = "random";
  Index segments = 10;
  Index block = 0;
  bool timing = true;
};

struct Summary {
  KeyValues kv;
  void add(const std::string& k, const std::string& v) { kv.emplace_back(k, v); }
  void add(const std::string& k, double v) { kv.emplace_back(k, format_real(v)); }
  void add(const std::string& k, Index v) { kv.emplace_back(k, std::to_string(v)); }
  void print(std::ostream& out) const {
    for (std::size_t i = 0; i < kv.size(); ++i) out << (i ? " " : "") << kv[i].first << '=' << kv[i].second;
    out << '\n';
  }
};

inline void check_config(const RunConfig& c) {
  if (!(c.tol > 0.0)) throw std::invalid_argument("--tol must be positive");
  if (c.grid < 2) throw std::invalid_argument("--grid must be at least 2");
  if (c.n && *c.n < 1) throw std::invalid_argument("--n must be at least 1");
}

inline void require_input(const RunConfig& c) {
  if (c.input.empty()) throw std::invalid_argument("--input is required");
}

inline std::string status(bool pass) { return pass ? "pass" : "fail"; }

//
// static
//

inline int cmd_factor(const RunConfig& c, std::ostream& out) {
  require_input(c);
  const Matrix a = read_file(c.input, read_matrix);
  FactorOptions opt{c.n, c.tol, c.force_rank};
  auto [pair, cert] = c.rescale ? scaled_factor(a, opt) : factor_identity(a, opt);
  write_file_atomic(c.prefix + ".L.txt", [&](std::ostream& o) { write_matrix(o, pair.left); });
  write_file_atomic(c.prefix + ".R.txt", [&](std::ostream& o) { write_matrix(o, pair.right); });
  write_file_atomic(c.prefix + ".cert", [&](std::ostream& o) { write_kv(o, to_kv(cert)); });
  Summary s;
  s.add("status", status(cert.pass));
  s.add("command", "factor");
  s.add("n", pair.n);
  const KeyValues ckv = to_kv(cert);
  s.kv.insert(s.kv.end(), ckv.begin(), ckv.end());
  s.print(out);
  return cert.pass ? kPass : kCertificate;
}

/// Recomputes the certificate from A, L and R alone.  The budget is
/// 2 max(1, ||A||) / theta with theta = min ||a_i||.
inline int cmd_verify(const RunConfig& c, std::ostream& out) {
  require_input(c);
  const Matrix a = read_file(c.input, read_matrix);
  FactorPair pair;
  pair.left = read_file(c.prefix + ".L.txt", read_matrix);
  pair.right = read_file(c.prefix + ".R.txt", read_matrix);
  if (a.rows() != a.cols()) throw DimensionError("A must be square");
  const double theta = min_column_norm(a);
  if (!(theta > 0.0)) throw HypothesisError("hypothesis (ii) theta = min ||a_i|| > 0 fails: theta = 0");
  const double scale = std::max(1.0, operator_norm(a));
  StaticCertificate cert = verify_static(a, pair, theta / scale, c.tol);
  cert.theta = theta;
  Summary s;
  s.add("status", status(cert.pass));
  s.add("command", "verify");
  s.add("n", pair.left.rows());
  for (const auto& kv : to_kv(cert))
    if (kv.first != "F") s.kv.push_back(kv);
  s.print(out);
  return cert.pass ? kPass : kCertificate;
}

inline int cmd_witness(const RunConfig& c, std::ostream& out) {
  if (c.N < 2) throw std::invalid_argument("--N must be at least 2");
  const Matrix a = witness_lower_bound(c.N, c.theta);
  write_file_atomic(c.prefix + ".A.txt", [&](std::ostream& o) { write_matrix(o, a); });
  Summary s;
  s.add("command", "witness");
  s.add("N", c.N);
  s.add("theta", c.theta);
  s.add("lower", 1.0 / c.theta);
  s.add("budget", 2.0 / c.theta);
  if (!c.n || *c.n < 2) {
    s.kv.insert(s.kv.begin(), {"status", "pass"});
    s.print(out);
    return kPass;
  }
  FactorOptions opt{c.n, c.tol, true};
  auto [pair, cert] = factor_identity(a, opt);
  write_file_atomic(c.prefix + ".L.txt", [&](std::ostream& o) { write_matrix(o, pair.left); });
  write_file_atomic(c.prefix + ".R.txt", [&](std::ostream& o) { write_matrix(o, pair.right); });
  const bool pass = cert.dev <= c.tol && cert.product >= 1.0 / c.theta - c.tol &&
                    cert.product <= 2.0 / c.theta + c.tol;
  s.kv.insert(s.kv.begin(), {"status", status(pass)});
  s.add("n", pair.n);
  s.add("dev", cert.dev);
  s.add("product", cert.product);
  s.print(out);
  return pass ? kPass : kCertificate;
}

inline int cmd_bounds(const RunConfig& c, std::ostream& out) {
  if (c.N < 1) throw std::invalid_argument("--N must be at least 1");
  if (!(c.theta > 0.0 && c.theta <= 1.0)) throw std::invalid_argument("--theta must lie in (0, 1]");
  Summary s;
  s.add("status", "pass");
  s.add("command", "bounds");
  s.add("N", c.N);
  s.add("theta", c.theta);
  s.add("static", max_rank(c.N, c.theta));
  s.add("continuous", max_rank_continuous(c.N, c.theta));
  // theta^2 N with the unknown absolute constant set to 1 for display only.
  s.add("bt_rate_c1", c.theta * c.theta * static_cast<double>(c.N));
  s.print(out);
  return kPass;
}

struct SweepCell {
  Index N;
  double theta;
};

inline std::vector<SweepCell> parse_sweep(const std::string& text) {
  std::vector<SweepCell> cells;
  if (text.empty()) {
    for (Index N : {125, 1000, 8000})
      for (double th : {0.25, 0.5, 1.0}) cells.push_back({N, th});
    return cells;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("--sweep entries look like N:theta, got '" + item + "'");
    const long long N = detail::parse_int(item.substr(0, colon), 0);
    const double th = detail::parse_real(item.substr(colon + 1), 0);
    if (N < 2 || !(th > 0.0 && th <= 1.0)) throw std::invalid_argument("--sweep entry out of range: '" + item + "'");
    cells.push_back({static_cast<Index>(N), th});
  }
  if (cells.empty()) throw std::invalid_argument("--sweep is empty");
  return cells;
}

inline Rng instance_rng(std::uint64_t seed, std::size_t cell, Index k) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(cell), static_cast<std::uint32_t>(k)};
  return Rng(seq);
}

/// CSV header: N,theta,n,dev,product,millis.  Instances are A = Q D with
/// block-Haar Q (blocks of 128) and D uniform in [theta, 1].
inline int cmd_bench(const RunConfig& c, std::ostream& out) {
  if (c.count < 1) throw std::invalid_argument("--count must be at least 1");
  const auto cells = parse_sweep(c.sweep);
  const Index block = c.block > 0 ? c.block : 128;
  bool all = true;
  Index rows = 0;
  write_file_atomic(c.prefix + ".csv", [&](std::ostream& o) {
    o << "N,theta,n,dev,product,millis\n";
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      for (Index k = 0; k < c.count; ++k) {
        Rng rng = instance_rng(c.seed, ci, k);
        const SparseMatrix a = bench_instance(cells[ci].N, cells[ci].theta, rng, block);
        const auto t0 = std::chrono::steady_clock::now();
        auto [pair, cert] = factor_identity(a, FactorOptions{std::nullopt, c.tol, false});
        const auto t1 = std::chrono::steady_clock::now();
        const double ms = c.timing ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
        all = all && cert.pass;
        o << cells[ci].N << ',' << format_real(cells[ci].theta) << ',' << pair.n << ',' << format_real(cert.dev)
          << ',' << format_real(cert.product) << ',' << format_real(ms) << '\n';
        ++rows;
      }
    }
  });
  Summary s;
  s.add("status", status(all));
  s.add("command", "bench");
  s.add("rows", rows);
  s.add("csv", c.prefix + ".csv");
  s.print(out);
  return all ? kPass : kCertificate;
}

//
// paths
//

inline MatrixPath<Matrix> generate_path(const RunConfig& c) {
  if (c.N < 2) throw std::invalid_argument("--N must be at least 2");
  if (c.segments < 1) throw std::invalid_argument("--segments must be at least 1");
  if (!(c.theta > 0.0 && c.theta <= 1.0)) throw std::invalid_argument("--theta must lie in (0, 1]");
  Rng rng(c.seed);
  if (c.kind == "constant") {
    // Q D with one column at norm theta.
    Matrix a = Matrix(bench_instance(c.N, c.theta, rng, c.block > 0 ? c.block : c.N));
    return MatrixPath<Matrix>({0.0, 1.0}, {a, a});
  }
  if (c.kind == "rotation") {
    // e_1, e_2 turning in their plane, phi_max per segment.
    const double phi = max_rotation_angle(c.theta);
    std::vector<Matrix> frames;
    for (Index k = 0; k <= c.segments; ++k) {
      Matrix a = Matrix::Identity(c.N, c.N);
      const double ang = phi * static_cast<double>(k);
      a(0, 0) = std::cos(ang);
      a(1, 0) = std::sin(ang);
      a(0, 1) = -std::sin(ang);
      a(1, 1) = std::cos(ang);
      frames.push_back(std::move(a));
    }
    return MatrixPath<Matrix>(uniform_breakpoints(c.segments), std::move(frames));
  }
  if (c.kind == "random") return rotation_path(c.N, c.theta, c.segments, rng, c.block > 0 ? c.block : c.N);
  throw std::invalid_argument("--kind must be constant, rotation or random");
}

inline int cmd_gen_path(const RunConfig& c, std::ostream& out) {
  const MatrixPath<Matrix> p = generate_path(c);
  const double norm = path_norm_bound(p);
  const double theta = path_theta(p);
  write_file_atomic(c.prefix + ".path.txt", [&](std::ostream& o) { write_path(o, p); });
  const bool ok = norm <= 1.0 + kNormSlack && theta >= c.theta - 1e-9;
  Summary s;
  s.add("status", status(ok));
  s.add("command", "gen-path");
  s.add("kind", c.kind);
  s.add("N", p.dimension());
  s.add("segments", p.segments());
  s.add("norm_bound", norm);
  s.add("theta", theta);
  s.add("path", c.prefix + ".path.txt");
  s.print(out);
  return ok ? kPass : kCertificate;
}

inline std::shared_ptr<const MatrixPath<Matrix>> load_path(const RunConfig& c) {
  require_input(c);
  MatrixPath<Matrix> p = read_file(c.input, read_path);
  if (c.rescale) {
    const double norm = path_norm_bound(p);
    if (!(norm > 0.0)) throw HypothesisError("cannot rescale a zero path");
    std::vector<Matrix> frames;
    for (const Matrix& f : p.frames()) frames.push_back(f / norm);
    p = MatrixPath<Matrix>(p.breakpoints(), std::move(frames));
  }
  return std::make_shared<const MatrixPath<Matrix>>(std::move(p));
}

inline void add_path_summary(Summary& s, const PathCertificate& cert) {
  for (const auto& kv : to_kv(cert))
    if (kv.first != "nodes" && kv.first != "windows") s.kv.push_back(kv);
}

inline int cmd_factor_path(const RunConfig& c, std::ostream& out) {
  auto path = load_path(c);
  PathFactorOptions opt;
  opt.n = c.n;
  opt.tol = c.tol;
  opt.grid = c.grid;
  opt.force_rank = c.force_rank;
  auto [fp, cert] = factor_path(path, opt);
  const auto samples = critical_samples(fp);
  write_file_atomic(c.prefix + ".plan", [&](std::ostream& o) { write_plan(o, fp.plan); });
  write_file_atomic(c.prefix + ".samples", [&](std::ostream& o) { write_samples(o, samples, fp.n(), path->dimension()); });
  write_file_atomic(c.prefix + ".cert", [&](std::ostream& o) { write_kv(o, to_kv(cert)); });
  Summary s;
  s.add("status", status(cert.pass));
  s.add("command", "factor-path");
  add_path_summary(s, cert);
  s.print(out);
  return cert.pass ? kPass : kCertificate;
}

/// Re-derives the certificate from the path and the plan, and compares any
/// stored samples against re-evaluation.
inline int cmd_verify_path(const RunConfig& c, std::ostream& out) {
  auto path = load_path(c);
  FactorPath<Matrix> fp{path, read_file(c.prefix + ".plan", read_plan)};
  std::optional<std::vector<FactorSample>> samples;
  if (std::filesystem::exists(c.prefix + ".samples")) samples = read_file(c.prefix + ".samples", read_samples);
  const PathCertificate cert = verify_path(fp, c.grid, c.tol, samples ? &*samples : nullptr);
  Summary s;
  s.add("status", status(cert.pass));
  s.add("command", "verify-path");
  add_path_summary(s, cert);
  if (!cert.pass) s.add("reason", "\"" + cert.reason + "\"");
  s.print(out);
  return cert.pass ? kPass : kCertificate;
}

}  // namespace idfact::cli
