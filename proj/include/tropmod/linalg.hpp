#pragma once

#include <optional>
#include <vector>

#include "tropmod/numeric.hpp"

namespace tropmod {

// Dense integer matrix, row-major. Zero-sized dimensions are legal (maps to
// or from the rank-0 lattice).
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<Int> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, Int(0)) {}

  Int& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  const Int& at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

  static Mat identity(int n);
  static Mat from_columns(int rows, const std::vector<Vec>& cols);
  static Mat from_rows(const std::vector<Vec>& rows_in, int cols_hint);

  Vec column(int c) const;
  Vec row(int r) const;
  Mat transpose() const;

  bool operator==(const Mat& o) const { return rows == o.rows && cols == o.cols && a == o.a; }
  bool operator!=(const Mat& o) const { return !(*this == o); }
};

Mat mat_mul(const Mat& a, const Mat& b);
Vec mat_apply(const Mat& m, const Vec& v);
QVec mat_apply_q(const Mat& m, const QVec& v);

int rank(const Mat& m);
Int det(const Mat& m);  // square matrices only

// Basis of { x in Z^cols : m x = 0 }. The result spans a saturated sublattice
// (direct summand), so rational kernel membership implies integral membership.
std::vector<Vec> kernel_basis(const Mat& m);

// Basis of the saturation of the sublattice of Z^n spanned by the given rows:
// (span_Q(rows) intersect Z^n).
std::vector<Vec> saturation_basis(const std::vector<Vec>& rows, int n);

// One rational solution of m x = b, free variables set to 0; nullopt if
// inconsistent.
std::optional<QVec> solve_rational(const Mat& m, const QVec& b);

// Unique integer solution of m x = b for injective m; nullopt if there is no
// integral solution or the system is inconsistent. Throws if m has nontrivial
// kernel (the caller relied on uniqueness).
std::optional<Vec> solve_unique_integer(const Mat& m, const Vec& b);

// Column-wise solve: find integer X with m X = b (m injective).
std::optional<Mat> solve_unique_integer_mat(const Mat& m, const Mat& b);

bool is_unimodular(const Mat& m);

}  // namespace tropmod
