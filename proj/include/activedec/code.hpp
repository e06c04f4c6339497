#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "activedec/errors.hpp"
#include "activedec/word.hpp"

namespace activedec {

/// One Tanner-graph edge: check `check` touches variable `var`.
struct Edge {
  std::size_t check;
  std::size_t var;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// A binary linear code given by its parity-check matrix.
///
/// Edges are numbered row-major (by check, then by variable), and the
/// adjacency lists hold edge indices so that per-edge message arrays can be
/// addressed from either side of the graph. Immutable after construction.
class CodeSpec {
 public:
  /// `h` is row-major, `checks` x `n`, entries 0/1. K is derived from the
  /// GF(2) rank of H, so redundant rows are allowed.
  CodeSpec(std::string name, std::size_t checks, std::size_t n, std::vector<std::uint8_t> h,
           std::size_t t_h = 0)
      : name_(std::move(name)), m_(checks), n_(n), t_h_(t_h), h_(std::move(h)) {
    if (m_ == 0 || n_ == 0) throw std::invalid_argument("parity-check matrix is empty");
    if (h_.size() != m_ * n_) throw std::invalid_argument("parity-check matrix has wrong size");
    for (auto b : h_)
      if (b > 1) throw std::invalid_argument("parity-check matrix entries must be 0 or 1");

    check_edges_.resize(m_);
    var_edges_.resize(n_);
    for (std::size_t c = 0; c < m_; ++c) {
      for (std::size_t v = 0; v < n_; ++v) {
        if (!h_[c * n_ + v]) continue;
        check_edges_[c].push_back(edges_.size());
        var_edges_[v].push_back(edges_.size());
        edges_.push_back({c, v});
      }
    }
    for (std::size_t c = 0; c < m_; ++c)
      if (check_edges_[c].empty())
        throw std::invalid_argument("parity-check row " + std::to_string(c) + " is all zero");
    for (std::size_t v = 0; v < n_; ++v)
      if (var_edges_[v].empty())
        throw std::invalid_argument("parity-check column " + std::to_string(v) + " is all zero");

    k_ = n_ - gf2_rank();
    if (k_ == 0) throw std::invalid_argument("code has dimension 0");
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t checks() const noexcept { return m_; }
  double rate() const noexcept { return static_cast<double>(k_) / static_cast<double>(n_); }
  std::size_t t_h() const noexcept { return t_h_; }

  std::uint8_t h(std::size_t check, std::size_t var) const { return h_[check * n_ + var]; }
  const std::vector<std::uint8_t>& matrix() const noexcept { return h_; }

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  /// Edge indices incident to variable v, ascending.
  const std::vector<std::size_t>& var_edges(std::size_t v) const { return var_edges_[v]; }
  /// Edge indices incident to check c, ascending.
  const std::vector<std::size_t>& check_edges(std::size_t c) const { return check_edges_[c]; }

  /// FNV-1a over the dimensions and matrix; identifies H inside weight files.
  std::uint64_t checksum() const noexcept {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto mix = [&](std::uint64_t x) {
      for (int i = 0; i < 8; ++i) {
        hash ^= (x >> (8 * i)) & 0xff;
        hash *= 0x100000001b3ULL;
      }
    };
    mix(m_);
    mix(n_);
    for (auto b : h_) mix(b);
    return hash;
  }

 private:
  std::size_t gf2_rank() const {
    std::vector<std::vector<std::uint8_t>> rows(m_);
    for (std::size_t c = 0; c < m_; ++c) rows[c].assign(h_.begin() + c * n_, h_.begin() + (c + 1) * n_);
    std::size_t rank = 0;
    for (std::size_t col = 0; col < n_ && rank < m_; ++col) {
      auto pivot = std::find_if(rows.begin() + rank, rows.end(), [&](auto& r) { return r[col] != 0; });
      if (pivot == rows.end()) continue;
      std::swap(*pivot, rows[rank]);
      for (std::size_t r = 0; r < m_; ++r) {
        if (r == rank || !rows[r][col]) continue;
        for (std::size_t j = col; j < n_; ++j) rows[r][j] ^= rows[rank][j];
      }
      ++rank;
    }
    return rank;
  }

  std::string name_;
  std::size_t m_;
  std::size_t n_;
  std::size_t k_ = 0;
  std::size_t t_h_;
  std::vector<std::uint8_t> h_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> var_edges_;
  std::vector<std::vector<std::size_t>> check_edges_;
};

namespace detail {

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

/// Reads the next non-blank line as a list of non-negative integers.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : lines_(split_lines(text)) {}

  std::vector<std::size_t> next(const char* what) {
    skip_blank();
    if (pos_ >= lines_.size()) throw ParseError(lines_.size(), std::string("unexpected end of input, expected ") + what);
    line_no_ = pos_ + 1;
    std::istringstream in(lines_[pos_++]);
    std::vector<std::size_t> out;
    std::string tok;
    while (in >> tok) {
      std::size_t value = 0;
      std::size_t used = 0;
      try {
        if (tok.front() == '-') throw std::invalid_argument(tok);
        value = std::stoul(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw ParseError(line_no_, "invalid integer '" + tok + "' in " + what);
      out.push_back(value);
    }
    return out;
  }

  bool at_end() {
    skip_blank();
    return pos_ >= lines_.size();
  }

  std::size_t line() const noexcept { return line_no_; }
  std::size_t peek_line() const noexcept { return pos_ + 1; }

 private:
  void skip_blank() {
    while (pos_ < lines_.size() && lines_[pos_].find_first_not_of(" \t") == std::string::npos) ++pos_;
  }

  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

}  // namespace detail

/// Parses MacKay's alist layout:
///
///     N M
///     max_col_weight max_row_weight
///     col weights (N values)
///     row weights (M values)
///     N lines of 1-based check indices per column (0-padded)
///     M lines of 1-based variable indices per row (0-padded)
///
/// H is built from the column lists and the row lists are cross-checked.
inline CodeSpec parse_alist(std::string_view text, std::string name = "code", std::size_t t_h = 0) {
  detail::LineReader in(text);

  auto header = in.next("header 'N M'");
  if (header.size() != 2) throw ParseError(in.line(), "header must be 'N M'");
  const std::size_t n = header[0], m = header[1];
  if (n == 0 || m == 0) throw ParseError(in.line(), "N and M must be positive");

  auto maxw = in.next("maximum degrees");
  if (maxw.size() != 2) throw ParseError(in.line(), "expected 'max_col_weight max_row_weight'");

  auto col_w = in.next("column weights");
  if (col_w.size() != n)
    throw ParseError(in.line(), "expected " + std::to_string(n) + " column weights, got " + std::to_string(col_w.size()));
  for (auto w : col_w)
    if (w > maxw[0]) throw ParseError(in.line(), "column weight exceeds declared maximum");
  auto row_w = in.next("row weights");
  if (row_w.size() != m)
    throw ParseError(in.line(), "expected " + std::to_string(m) + " row weights, got " + std::to_string(row_w.size()));
  for (auto w : row_w)
    if (w > maxw[1]) throw ParseError(in.line(), "row weight exceeds declared maximum");

  // Each index list must hold exactly `degree` non-zero entries, optionally
  // followed by zero padding.
  auto read_list = [&](const char* what, std::size_t degree, std::size_t bound) {
    auto list = in.next(what);
    std::vector<std::size_t> idx;
    std::size_t i = 0;
    for (; i < list.size() && list[i] != 0; ++i) {
      if (list[i] > bound)
        throw ParseError(in.line(), std::string(what) + " index " + std::to_string(list[i]) + " out of range 1.." +
                                        std::to_string(bound));
      idx.push_back(list[i] - 1);
    }
    for (; i < list.size(); ++i)
      if (list[i] != 0) throw ParseError(in.line(), std::string(what) + " has non-zero entry after padding");
    if (idx.size() != degree)
      throw ParseError(in.line(), std::string(what) + " has " + std::to_string(idx.size()) + " entries, expected degree " +
                                      std::to_string(degree));
    return idx;
  };

  std::vector<std::uint8_t> h(m * n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    for (auto c : read_list("column list", col_w[v], m)) {
      if (h[c * n + v]) throw ParseError(in.line(), "duplicate entry in column list");
      h[c * n + v] = 1;
    }
  }
  for (std::size_t c = 0; c < m; ++c) {
    auto vars = read_list("row list", row_w[c], n);
    std::vector<std::uint8_t> seen(n, 0);
    for (auto v : vars) {
      if (!h[c * n + v]) throw ParseError(in.line(), "row list disagrees with column lists at (" + std::to_string(c + 1) +
                                                        ", " + std::to_string(v + 1) + ")");
      seen[v] = 1;
    }
    for (std::size_t v = 0; v < n; ++v)
      if (h[c * n + v] && !seen[v])
        throw ParseError(in.line(), "row list for check " + std::to_string(c + 1) + " misses variable " +
                                        std::to_string(v + 1) + " present in column lists");
  }
  if (!in.at_end()) throw ParseError(in.peek_line(), "unexpected trailing content after row lists");

  try {
    return CodeSpec(std::move(name), m, n, std::move(h), t_h);
  } catch (const std::invalid_argument& e) {
    throw ParseError(0, e.what());
  }
}

/// Dense fallback: first line "M N", then M lines of N space-separated 0/1.
inline CodeSpec parse_dense(std::string_view text, std::string name = "code", std::size_t t_h = 0) {
  detail::LineReader in(text);
  auto header = in.next("header 'M N'");
  if (header.size() != 2) throw ParseError(in.line(), "header must be 'M N'");
  const std::size_t m = header[0], n = header[1];
  if (n == 0 || m == 0) throw ParseError(in.line(), "M and N must be positive");
  std::vector<std::uint8_t> h;
  h.reserve(m * n);
  for (std::size_t c = 0; c < m; ++c) {
    auto row = in.next("matrix row");
    if (row.size() != n)
      throw ParseError(in.line(), "row has " + std::to_string(row.size()) + " entries, expected " + std::to_string(n));
    for (auto b : row) {
      if (b > 1) throw ParseError(in.line(), "matrix entries must be 0 or 1");
      h.push_back(static_cast<std::uint8_t>(b));
    }
  }
  if (!in.at_end()) throw ParseError(in.peek_line(), "unexpected trailing content after matrix rows");
  try {
    return CodeSpec(std::move(name), m, n, std::move(h), t_h);
  } catch (const std::invalid_argument& e) {
    throw ParseError(0, e.what());
  }
}

inline std::string to_alist(const CodeSpec& code) {
  std::size_t max_col = 0, max_row = 0;
  for (std::size_t v = 0; v < code.n(); ++v) max_col = std::max(max_col, code.var_edges(v).size());
  for (std::size_t c = 0; c < code.checks(); ++c) max_row = std::max(max_row, code.check_edges(c).size());

  std::ostringstream out;
  out << code.n() << ' ' << code.checks() << '\n' << max_col << ' ' << max_row << '\n';
  for (std::size_t v = 0; v < code.n(); ++v) out << (v ? " " : "") << code.var_edges(v).size();
  out << '\n';
  for (std::size_t c = 0; c < code.checks(); ++c) out << (c ? " " : "") << code.check_edges(c).size();
  out << '\n';
  for (std::size_t v = 0; v < code.n(); ++v) {
    const auto& es = code.var_edges(v);
    for (std::size_t i = 0; i < max_col; ++i)
      out << (i ? " " : "") << (i < es.size() ? code.edges()[es[i]].check + 1 : 0);
    out << '\n';
  }
  for (std::size_t c = 0; c < code.checks(); ++c) {
    const auto& es = code.check_edges(c);
    for (std::size_t i = 0; i < max_row; ++i)
      out << (i ? " " : "") << (i < es.size() ? code.edges()[es[i]].var + 1 : 0);
    out << '\n';
  }
  return out.str();
}

enum class MatrixFormat { kAlist, kDense };

inline CodeSpec load_code(const std::string& path, MatrixFormat format, std::string name, std::size_t t_h) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open code file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return format == MatrixFormat::kAlist ? parse_alist(buf.str(), std::move(name), t_h)
                                        : parse_dense(buf.str(), std::move(name), t_h);
}

/// Syndrome H·wᵀ over GF(2), one entry per check.
inline BitWord syndrome(const CodeSpec& code, const BitWord& word) {
  if (word.size() != code.n())
    throw std::invalid_argument("syndrome: word length " + std::to_string(word.size()) + " != N " +
                                std::to_string(code.n()));
  BitWord s(code.checks());
  for (std::size_t c = 0; c < code.checks(); ++c) {
    std::uint8_t acc = 0;
    for (auto e : code.check_edges(c)) acc ^= word[code.edges()[e].var];
    s[c] = acc;
  }
  return s;
}

inline bool is_codeword(const CodeSpec& code, const BitWord& word) {
  if (word.size() != code.n()) throw std::invalid_argument("is_codeword: length mismatch");
  for (std::size_t c = 0; c < code.checks(); ++c) {
    std::uint8_t acc = 0;
    for (auto e : code.check_edges(c)) acc ^= word[code.edges()[e].var];
    if (acc) return false;
  }
  return true;
}

inline std::size_t hamming_distance(const BitWord& a, const BitWord& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
  return d;
}

inline std::size_t weight(const BitWord& a) {
  std::size_t d = 0;
  for (auto b : a) d += b;
  return d;
}

/// Small reference codes used in tests and examples.
namespace codes {

/// Single parity check: one row of n ones. t_H = 0 (d_min = 2).
inline CodeSpec single_parity_check(std::size_t n) {
  return CodeSpec("spc" + std::to_string(n), 1, n, std::vector<std::uint8_t>(n, 1), 0);
}

/// Repetition code as a chain of n-1 two-bit checks (a cycle-free Tanner graph).
inline CodeSpec repetition(std::size_t n) {
  std::vector<std::uint8_t> h((n - 1) * n, 0);
  for (std::size_t r = 0; r + 1 < n; ++r) h[r * n + r] = h[r * n + r + 1] = 1;
  return CodeSpec("rep" + std::to_string(n), n - 1, n, std::move(h), (n - 1) / 2);
}

/// Hamming(7,4): column j is the binary expansion of j+1.
inline CodeSpec hamming74() {
  std::vector<std::uint8_t> h(3 * 7);
  for (std::size_t v = 0; v < 7; ++v)
    for (std::size_t r = 0; r < 3; ++r) h[r * 7 + v] = ((v + 1) >> r) & 1;
  return CodeSpec("hamming_7_4", 3, 7, std::move(h), 1);
}

}  // namespace codes

}  // namespace activedec
