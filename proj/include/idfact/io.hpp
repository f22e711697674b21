#pragma once

// Text formats.
//
//   matrix   "R C", then R lines of C reals
//   path     "N K", the K+1 breakpoints, then K+1 N x N blocks separated by blank lines
//   kv       key=value per line (certificates, plans)
//   samples  "samples S n N", then per sample "t <t>", "L <nnz>", "R <nnz>"
//            each followed by nnz lines "i j v"
//
// Reals are written with 17 significant digits so reading them back is
// exact.  Indices in files are 1-based.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "idfact/continuous_factor.hpp"
#include "idfact/linalg.hpp"
#include "idfact/matrix_path.hpp"
#include "idfact/static_factor.hpp"

namespace idfact {

inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::size_t line() const { return line_; }

  bool next(std::string& out) {
    if (!std::getline(in_, out)) return false;
    ++line_;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  }

  // Next line that is not blank.
  std::string next_nonblank(const char* what) {
    std::string s;
    while (next(s))
      if (s.find_first_not_of(" \t") != std::string::npos) return s;
    throw ParseError(std::string("unexpected end of input, expected ") + what, line_ + 1);
  }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_real(std::string_view tok, std::size_t line) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError("not a real number: '" + std::string(tok) + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + std::string(tok) + "'", line);
  return v;
}

inline long long parse_int(std::string_view tok, std::size_t line) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError("not an integer: '" + std::string(tok) + "'", line);
  return v;
}

inline std::pair<Index, Index> parse_shape(LineReader& r, const char* what) {
  const std::string s = r.next_nonblank(what);
  const auto tok = split_ws(s);
  if (tok.size() != 2) throw ParseError(std::string("expected two integers for ") + what, r.line());
  const long long a = parse_int(tok[0], r.line()), b = parse_int(tok[1], r.line());
  if (a < 1 || b < 1) throw ParseError(std::string(what) + " must be positive", r.line());
  return {static_cast<Index>(a), static_cast<Index>(b)};
}

inline void read_rows(LineReader& r, Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    const std::string s = r.next_nonblank("matrix row");
    const auto tok = split_ws(s);
    if (static_cast<Index>(tok.size()) != m.cols())
      throw ParseError("expected " + std::to_string(m.cols()) + " entries, found " + std::to_string(tok.size()),
                       r.line());
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = parse_real(tok[j], r.line());
  }
}

inline void write_rows(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_real(m(i, j));
    }
    out << '\n';
  }
}

}  // namespace detail

//
// matrices
//

inline Matrix read_matrix(std::istream& in) {
  detail::LineReader r(in);
  const auto [rows, cols] = detail::parse_shape(r, "matrix shape");
  Matrix m(rows, cols);
  detail::read_rows(r, m);
  std::string rest;
  while (r.next(rest))
    if (rest.find_first_not_of(" \t") != std::string::npos) throw ParseError("trailing data after matrix", r.line());
  return m;
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  detail::write_rows(out, m);
}

//
// paths
//

inline MatrixPath<Matrix> read_path(std::istream& in) {
  detail::LineReader r(in);
  const auto [n, k] = detail::parse_shape(r, "path header N K");
  const std::string bl = r.next_nonblank("breakpoints");
  const auto tok = detail::split_ws(bl);
  if (static_cast<Index>(tok.size()) != k + 1)
    throw ParseError("expected " + std::to_string(k + 1) + " breakpoints, found " + std::to_string(tok.size()),
                     r.line());
  std::vector<double> t;
  for (const auto& s : tok) {
    t.push_back(detail::parse_real(s, r.line()));
    if (t.size() > 1 && !(t.back() > t[t.size() - 2]))
      throw ParseError("breakpoints must be strictly increasing", r.line());
  }
  std::vector<Matrix> frames;
  for (Index f = 0; f <= k; ++f) {
    Matrix m(n, n);
    detail::read_rows(r, m);
    frames.push_back(std::move(m));
  }
  std::string rest;
  while (r.next(rest))
    if (rest.find_first_not_of(" \t") != std::string::npos) throw ParseError("trailing data after path", r.line());
  return MatrixPath<Matrix>(std::move(t), std::move(frames));
}

inline void write_path(std::ostream& out, const MatrixPath<Matrix>& p) {
  out << p.dimension() << ' ' << p.segments() << '\n';
  for (std::size_t k = 0; k < p.breakpoints().size(); ++k) {
    if (k) out << ' ';
    out << format_real(p.breakpoints()[k]);
  }
  out << '\n';
  for (std::size_t k = 0; k < p.frames().size(); ++k) {
    out << '\n';
    detail::write_rows(out, p.frames()[k]);
  }
}

//
// key=value records
//

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline void write_kv(std::ostream& out, const KeyValues& kv) {
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

/// Keys map to (value, line).  Blank lines and '#' comments are skipped.
inline std::map<std::string, std::pair<std::string, std::size_t>> read_kv(std::istream& in) {
  std::map<std::string, std::pair<std::string, std::size_t>> out;
  detail::LineReader r(in);
  std::string s;
  while (r.next(s)) {
    if (s.find_first_not_of(" \t") == std::string::npos || s[s.find_first_not_of(" \t")] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("expected key=value", r.line());
    if (!out.emplace(s.substr(0, eq), std::make_pair(s.substr(eq + 1), r.line())).second)
      throw ParseError("duplicate key '" + s.substr(0, eq) + "'", r.line());
  }
  return out;
}

inline std::string join_indices(const IndexSet& f) {
  std::string s;
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (k) s += ',';
    s += std::to_string(f[k] + 1);
  }
  return s;
}

inline std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ',';
    s += format_real(v[k]);
  }
  return s;
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  if (s.empty()) return out;
  std::size_t i = 0;
  while (true) {
    const std::size_t j = s.find(',', i);
    out.push_back(s.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i));
    if (j == std::string_view::npos) break;
    i = j + 1;
  }
  return out;
}

inline IndexSet parse_indices(const std::string& s, std::size_t line) {
  std::vector<Index> idx;
  for (auto tok : split_commas(s)) {
    const long long v = parse_int(tok, line);
    if (v < 1) throw ParseError("indices are 1-based", line);
    idx.push_back(static_cast<Index>(v - 1));
  }
  try {
    return IndexSet(std::move(idx));
  } catch (const DimensionError& e) {
    throw ParseError(e.what(), line);
  }
}

inline std::vector<double> parse_reals(const std::string& s, std::size_t line) {
  std::vector<double> out;
  for (auto tok : split_commas(s)) out.push_back(parse_real(tok, line));
  return out;
}

}  // namespace detail

inline KeyValues to_kv(const StaticCertificate& c) {
  return {{"dev", format_real(c.dev)},       {"norm_L", format_real(c.norm_L)},
          {"norm_R", format_real(c.norm_R)}, {"product", format_real(c.product)},
          {"theta", format_real(c.theta)},   {"budget", format_real(c.budget)},
          {"pass", c.pass ? "1" : "0"},      {"F", join_indices(c.family)}};
}

inline KeyValues to_kv(const PathCertificate& c) {
  std::vector<double> w;
  for (const auto& [s, u] : c.windows) {
    w.push_back(s);
    w.push_back(u);
  }
  return {{"dev", format_real(c.max_dev)},
          {"product", format_real(c.max_product)},
          {"raw_dev", format_real(c.max_raw_dev)},
          {"raw_product", format_real(c.max_raw_product)},
          {"theta", format_real(c.theta)},
          {"budget", format_real(c.budget)},
          {"n", std::to_string(c.n)},
          {"intervals", std::to_string(c.intervals)},
          {"max_jump", format_real(c.max_jump)},
          {"worst_t", format_real(c.worst_t)},
          {"grid", std::to_string(c.grid)},
          {"plan_ok", c.plan_ok ? "1" : "0"},
          {"samples_ok", c.samples_ok ? "1" : "0"},
          {"pass", c.pass ? "1" : "0"},
          {"nodes", join_reals(c.nodes)},
          {"windows", join_reals(w)}};
}

//
// plans
//

inline void write_plan(std::ostream& out, const CoverPlan& p) {
  out << "n=" << p.n << '\n';
  out << "epsilon=" << format_real(p.epsilon) << '\n';
  out << "theta=" << format_real(p.theta) << '\n';
  out << "nodes=" << join_reals(p.nodes) << '\n';
  for (std::size_t m = 0; m < p.families.size(); ++m) out << 'F' << m + 1 << '=' << join_indices(p.families[m]) << '\n';
  for (std::size_t m = 0; m < p.bridges.size(); ++m) out << 'G' << m + 1 << '=' << join_indices(p.bridges[m]) << '\n';
  for (std::size_t m = 0; m < p.windows.size(); ++m)
    out << 'W' << m + 1 << '=' << format_real(p.windows[m].first) << ',' << format_real(p.windows[m].second) << '\n';
}

inline CoverPlan read_plan(std::istream& in) {
  auto kv = read_kv(in);
  auto take = [&](const std::string& key) -> std::pair<std::string, std::size_t> {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("missing key '" + key + "'", 0);
    auto v = std::move(it->second);
    kv.erase(it);
    return v;
  };
  CoverPlan p;
  {
    auto [v, line] = take("n");
    p.n = static_cast<Index>(detail::parse_int(v, line));
    if (p.n < 1) throw ParseError("n must be >= 1", line);
  }
  {
    auto [v, line] = take("epsilon");
    p.epsilon = detail::parse_real(v, line);
  }
  {
    auto [v, line] = take("theta");
    p.theta = detail::parse_real(v, line);
  }
  {
    auto [v, line] = take("nodes");
    p.nodes = detail::parse_reals(v, line);
    if (p.nodes.size() < 2) throw ParseError("need at least two nodes", line);
  }
  const std::size_t M = p.nodes.size() - 1;
  for (std::size_t m = 1; m <= M; ++m) {
    auto [v, line] = take("F" + std::to_string(m));
    p.families.push_back(detail::parse_indices(v, line));
  }
  for (std::size_t m = 1; m < M; ++m) {
    auto [v, line] = take("G" + std::to_string(m));
    p.bridges.push_back(detail::parse_indices(v, line));
    auto [w, wline] = take("W" + std::to_string(m));
    const auto r = detail::parse_reals(w, wline);
    if (r.size() != 2) throw ParseError("window needs two values", wline);
    p.windows.emplace_back(r[0], r[1]);
  }
  if (!kv.empty()) throw ParseError("unexpected key '" + kv.begin()->first + "'", kv.begin()->second.second);
  return p;
}

//
// samples
//

namespace detail {

inline void write_sparse_entries(std::ostream& out, char tag, const Matrix& m) {
  Index nnz = 0;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) nnz += m(i, j) != 0.0;
  out << tag << ' ' << nnz << '\n';
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (m(i, j) != 0.0) out << i + 1 << ' ' << j + 1 << ' ' << format_real(m(i, j)) << '\n';
}

inline Matrix read_sparse_entries(LineReader& r, char tag, Index rows, Index cols) {
  const std::string head = r.next_nonblank("entry block");
  const auto tok = split_ws(head);
  if (tok.size() != 2 || tok[0] != std::string_view(&tag, 1))
    throw ParseError(std::string("expected '") + tag + " <count>'", r.line());
  const long long nnz = parse_int(tok[1], r.line());
  if (nnz < 0 || nnz > static_cast<long long>(rows) * cols) throw ParseError("bad entry count", r.line());
  Matrix m = Matrix::Zero(rows, cols);
  for (long long e = 0; e < nnz; ++e) {
    const std::string s = r.next_nonblank("entry");
    const auto t = split_ws(s);
    if (t.size() != 3) throw ParseError("expected 'i j value'", r.line());
    const long long i = parse_int(t[0], r.line()), j = parse_int(t[1], r.line());
    if (i < 1 || i > rows || j < 1 || j > cols) throw ParseError("entry index out of range", r.line());
    m(i - 1, j - 1) = parse_real(t[2], r.line());
  }
  return m;
}

}  // namespace detail

inline void write_samples(std::ostream& out, const std::vector<FactorSample>& samples, Index n, Index N) {
  out << "samples " << samples.size() << ' ' << n << ' ' << N << '\n';
  for (const FactorSample& s : samples) {
    out << "t " << format_real(s.t) << '\n';
    detail::write_sparse_entries(out, 'L', s.left);
    detail::write_sparse_entries(out, 'R', s.right);
  }
}

inline std::vector<FactorSample> read_samples(std::istream& in) {
  detail::LineReader r(in);
  const std::string head = r.next_nonblank("samples header");
  const auto tok = detail::split_ws(head);
  if (tok.size() != 4 || tok[0] != "samples") throw ParseError("expected 'samples S n N'", r.line());
  const long long count = detail::parse_int(tok[1], r.line());
  const long long n = detail::parse_int(tok[2], r.line());
  const long long N = detail::parse_int(tok[3], r.line());
  if (count < 0 || n < 1 || N < 1) throw ParseError("bad samples header", r.line());
  std::vector<FactorSample> out;
  for (long long k = 0; k < count; ++k) {
    const std::string ts = r.next_nonblank("sample time");
    const auto tt = detail::split_ws(ts);
    if (tt.size() != 2 || tt[0] != "t") throw ParseError("expected 't <value>'", r.line());
    FactorSample s;
    s.t = detail::parse_real(tt[1], r.line());
    s.left = detail::read_sparse_entries(r, 'L', static_cast<Index>(n), static_cast<Index>(N));
    s.right = detail::read_sparse_entries(r, 'R', static_cast<Index>(N), static_cast<Index>(n));
    out.push_back(std::move(s));
  }
  return out;
}

//
// files
//

template <class Reader>
auto read_file(const std::string& path, Reader&& reader) {
  std::ifstream in(path);
  if (!in) throw std::system_error(errno, std::generic_category(), "cannot open " + path);
  try {
    return reader(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.message(), e.line());
  }
}

/// Writes through a temporary in the same directory and renames it into place.
template <class Writer>
void write_file_atomic(const std::string& path, Writer&& writer) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::system_error(errno, std::generic_category(), "cannot write " + tmp);
    writer(out);
    out.flush();
    if (!out) throw std::system_error(errno, std::generic_category(), "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace idfact
