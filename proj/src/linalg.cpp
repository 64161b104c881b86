#include "tropmod/linalg.hpp"

#include <algorithm>
#include <stdexcept>

namespace tropmod {

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1;
  return m;
}

Mat Mat::from_columns(int rows, const std::vector<Vec>& cols) {
  Mat m(rows, static_cast<int>(cols.size()));
  for (int c = 0; c < m.cols; ++c) {
    if (static_cast<int>(cols[c].size()) != rows) throw std::invalid_argument("column size mismatch");
    for (int r = 0; r < rows; ++r) m.at(r, c) = cols[c][r];
  }
  return m;
}

Mat Mat::from_rows(const std::vector<Vec>& rows_in, int cols_hint) {
  int cols = cols_hint;
  for (const Vec& r : rows_in) cols = std::max(cols, static_cast<int>(r.size()));
  Mat m(static_cast<int>(rows_in.size()), cols);
  for (int r = 0; r < m.rows; ++r) {
    if (static_cast<int>(rows_in[r].size()) != cols) throw std::invalid_argument("row size mismatch");
    for (int c = 0; c < cols; ++c) m.at(r, c) = rows_in[r][c];
  }
  return m;
}

Vec Mat::column(int c) const {
  Vec v(rows);
  for (int r = 0; r < rows; ++r) v[r] = at(r, c);
  return v;
}

Vec Mat::row(int r) const {
  Vec v(cols);
  for (int c = 0; c < cols; ++c) v[c] = at(r, c);
  return v;
}

Mat Mat::transpose() const {
  Mat t(cols, rows);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) t.at(c, r) = at(r, c);
  return t;
}

Mat mat_mul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw std::invalid_argument("mat_mul shape mismatch");
  Mat m(a.rows, b.cols);
  for (int r = 0; r < a.rows; ++r)
    for (int k = 0; k < a.cols; ++k) {
      const Int& x = a.at(r, k);
      if (x == 0) continue;
      for (int c = 0; c < b.cols; ++c) m.at(r, c) += x * b.at(k, c);
    }
  return m;
}

Vec mat_apply(const Mat& m, const Vec& v) {
  if (static_cast<int>(v.size()) != m.cols) throw std::invalid_argument("mat_apply shape mismatch");
  Vec out(m.rows, Int(0));
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out[r] += m.at(r, c) * v[c];
  return out;
}

QVec mat_apply_q(const Mat& m, const QVec& v) {
  if (static_cast<int>(v.size()) != m.cols) throw std::invalid_argument("mat_apply_q shape mismatch");
  QVec out(m.rows, Rat(0));
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out[r] += Rat(m.at(r, c)) * v[c];
  return out;
}

namespace {

// Row echelon over Q, in place; returns pivot columns.
std::vector<int> q_row_reduce(std::vector<QVec>& m) {
  std::vector<int> pivots;
  if (m.empty()) return pivots;
  int rows = static_cast<int>(m.size());
  int cols = static_cast<int>(m[0].size());
  int r = 0;
  for (int c = 0; c < cols && r < rows; ++c) {
    int p = -1;
    for (int i = r; i < rows; ++i) {
      if (m[i][c] != 0) {
        p = i;
        break;
      }
    }
    if (p < 0) continue;
    std::swap(m[r], m[p]);
    Rat inv = m[r][c];
    for (int j = c; j < cols; ++j) m[r][j] /= inv;
    for (int i = 0; i < rows; ++i) {
      if (i == r || m[i][c] == 0) continue;
      Rat f = m[i][c];
      for (int j = c; j < cols; ++j) m[i][j] -= f * m[r][j];
    }
    pivots.push_back(c);
    ++r;
  }
  return pivots;
}

}  // namespace

int rank(const Mat& m) {
  std::vector<QVec> q(m.rows, QVec(m.cols));
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) q[r][c] = Rat(m.at(r, c));
  return static_cast<int>(q_row_reduce(q).size());
}

Int det(const Mat& m) {
  if (m.rows != m.cols) throw std::invalid_argument("det: not square");
  int n = m.rows;
  if (n == 0) return 1;
  // Bareiss fraction-free elimination.
  std::vector<std::vector<Int>> a(n, std::vector<Int>(n));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a[r][c] = m.at(r, c);
  Int prev = 1;
  int sign = 1;
  for (int k = 0; k < n - 1; ++k) {
    if (a[k][k] == 0) {
      int p = -1;
      for (int i = k + 1; i < n; ++i) {
        if (a[i][k] != 0) {
          p = i;
          break;
        }
      }
      if (p < 0) return 0;
      std::swap(a[k], a[p]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i) {
      for (int j = k + 1; j < n; ++j) {
        a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
      }
      a[i][k] = 0;
    }
    prev = a[k][k];
  }
  return sign > 0 ? a[n - 1][n - 1] : -a[n - 1][n - 1];
}

std::vector<Vec> kernel_basis(const Mat& m) {
  int n = m.cols;
  // Column reduction with unimodular operations, tracked in V.
  std::vector<Vec> w(n, Vec(m.rows));  // columns of m
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < m.rows; ++r) w[c][r] = m.at(r, c);
  std::vector<Vec> v(n, Vec(n, Int(0)));
  for (int i = 0; i < n; ++i) v[i][i] = 1;

  int frontier = 0;
  for (int r = 0; r < m.rows && frontier < n; ++r) {
    while (true) {
      int best = -1;
      for (int c = frontier; c < n; ++c) {
        if (w[c][r] == 0) continue;
        if (best < 0) {
          best = c;
        } else {
          Int x = w[c][r] < 0 ? -w[c][r] : w[c][r];
          Int y = w[best][r] < 0 ? -w[best][r] : w[best][r];
          if (x < y) best = c;
        }
      }
      if (best < 0) break;  // row r already clear on the frontier block
      std::swap(w[frontier], w[best]);
      std::swap(v[frontier], v[best]);
      bool reduced_all = true;
      for (int c = frontier + 1; c < n; ++c) {
        if (w[c][r] == 0) continue;
        Int q = w[c][r] / w[frontier][r];
        if (q != 0) {
          for (int i = 0; i < m.rows; ++i) w[c][i] -= q * w[frontier][i];
          for (int i = 0; i < n; ++i) v[c][i] -= q * v[frontier][i];
        }
        if (w[c][r] != 0) reduced_all = false;
      }
      if (reduced_all) {
        ++frontier;
        break;
      }
    }
  }
  std::vector<Vec> basis;
  for (int c = frontier; c < n; ++c) {
    bool zero = true;
    for (int r = 0; r < m.rows; ++r) {
      if (w[c][r] != 0) {
        zero = false;
        break;
      }
    }
    if (!zero) throw std::logic_error("kernel_basis: nonzero trailing column");
    Vec k = v[c];
    // Normalize sign: first nonzero entry positive.
    for (const Int& x : k) {
      if (x != 0) {
        if (x < 0)
          for (Int& y : k) y = -y;
        break;
      }
    }
    basis.push_back(std::move(k));
  }
  std::sort(basis.begin(), basis.end(), lex_less);
  return basis;
}

std::vector<Vec> saturation_basis(const std::vector<Vec>& rows, int n) {
  Mat b = Mat::from_rows(rows, n);
  std::vector<Vec> k = kernel_basis(b);      // orthogonal complement lattice
  Mat kt = Mat::from_rows(k, n);             // each kernel vector as a row
  return kernel_basis(kt);                   // double complement = saturation
}

std::optional<QVec> solve_rational(const Mat& m, const QVec& b) {
  if (static_cast<int>(b.size()) != m.rows) throw std::invalid_argument("solve_rational shape");
  std::vector<QVec> aug(m.rows, QVec(m.cols + 1));
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) aug[r][c] = Rat(m.at(r, c));
    aug[r][m.cols] = b[r];
  }
  std::vector<int> pivots = q_row_reduce(aug);
  // Inconsistent iff a pivot lands in the augmented column.
  if (!pivots.empty() && pivots.back() == m.cols) return std::nullopt;
  QVec x(m.cols, Rat(0));
  for (size_t i = 0; i < pivots.size(); ++i) x[pivots[i]] = aug[i][m.cols];
  return x;
}

std::optional<Vec> solve_unique_integer(const Mat& m, const Vec& b) {
  QVec bq(b.size());
  for (size_t i = 0; i < b.size(); ++i) bq[i] = Rat(b[i]);
  auto x = solve_rational(m, bq);
  if (!x) return std::nullopt;
  if (!kernel_basis(m).empty()) throw std::logic_error("solve_unique_integer: matrix not injective");
  Vec out(m.cols);
  for (int i = 0; i < m.cols; ++i) {
    if (denominator((*x)[i]) != 1) return std::nullopt;
    out[i] = numerator((*x)[i]);
  }
  return out;
}

std::optional<Mat> solve_unique_integer_mat(const Mat& m, const Mat& b) {
  if (m.rows != b.rows) throw std::invalid_argument("solve_unique_integer_mat shape");
  Mat x(m.cols, b.cols);
  for (int c = 0; c < b.cols; ++c) {
    auto col = solve_unique_integer(m, b.column(c));
    if (!col) return std::nullopt;
    for (int r = 0; r < m.cols; ++r) x.at(r, c) = (*col)[r];
  }
  return x;
}

bool is_unimodular(const Mat& m) {
  if (m.rows != m.cols) return false;
  Int d = det(m);
  return d == 1 || d == -1;
}

}  // namespace tropmod
