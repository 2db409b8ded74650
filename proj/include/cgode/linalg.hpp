#pragma once

// Small dense vectors and matrices at working precision. Dimensions here
// are ODE state dimensions (N <= a few) and per-interval stage counts, so
// everything is unblocked and allocation is left to the caller where it
// matters (hot solver loops reuse buffers).

#include <span>
#include <stdexcept>
#include <vector>

#include "cgode/precision.hpp"

namespace cgode {

template <class R>
using Vec = std::vector<R>;

template <class R>
class Mat {
 public:
  Mat() : rows_(0), cols_(0) {}
  Mat(int rows, int cols, const R& fill)
      : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  R& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
  const R& operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }
  std::vector<R>& data() { return a_; }
  const std::vector<R>& data() const { return a_; }

 private:
  int rows_, cols_;
  std::vector<R> a_;
};

template <class R>
R dot(std::span<const R> a, std::span<const R> b) {
  R s = a[0] * b[0];
  for (size_t i = 1; i < a.size(); ++i) fma_add(s, a[i], b[i]);
  return s;
}

template <class R>
R norm2(std::span<const R> v) {
  R s = v[0] * v[0];
  for (size_t i = 1; i < v.size(); ++i) fma_add(s, v[i], v[i]);
  return sqrt(s);
}

template <class R>
R norm2(const Vec<R>& v) {
  return norm2(std::span<const R>(v.data(), v.size()));
}

template <class R>
R max_abs(std::span<const R> v) {
  R m = abs(v[0]);
  for (size_t i = 1; i < v.size(); ++i) {
    R a = abs(v[i]);
    if (a > m) m = a;
  }
  return m;
}

template <class R>
R max_abs(const Vec<R>& v) {
  return max_abs(std::span<const R>(v.data(), v.size()));
}

// y <- A x
template <class R>
void mat_vec(const Mat<R>& A, std::span<const R> x, std::span<R> y) {
  for (int i = 0; i < A.rows(); ++i) {
    y[i] = A(i, 0) * x[0];
    for (int j = 1; j < A.cols(); ++j) fma_add(y[i], A(i, j), x[j]);
  }
}

// y <- A^T x
template <class R>
void mat_tvec(const Mat<R>& A, std::span<const R> x, std::span<R> y) {
  for (int j = 0; j < A.cols(); ++j) {
    y[j] = A(0, j) * x[0];
    for (int i = 1; i < A.rows(); ++i) fma_add(y[j], A(i, j), x[i]);
  }
}

// In-place LU with partial pivoting; piv records row swaps.
template <class R>
void lu_factor(Mat<R>& A, std::vector<int>& piv) {
  const int n = A.rows();
  if (A.cols() != n) throw std::invalid_argument("lu_factor: square matrix required");
  piv.resize(n);
  for (int k = 0; k < n; ++k) {
    int p = k;
    R best = abs(A(k, k));
    for (int i = k + 1; i < n; ++i) {
      R a = abs(A(i, k));
      if (a > best) { best = a; p = i; }
    }
    if (is_zero(best)) throw std::runtime_error("lu_factor: singular matrix");
    piv[k] = p;
    if (p != k)
      for (int j = 0; j < n; ++j) std::swap(A(k, j), A(p, j));
    for (int i = k + 1; i < n; ++i) {
      A(i, k) /= A(k, k);
      const R& l = A(i, k);
      for (int j = k + 1; j < n; ++j) {
        R t = l * A(k, j);
        A(i, j) -= t;
      }
    }
  }
}

template <class R>
void lu_solve(const Mat<R>& LU, const std::vector<int>& piv, std::span<R> b) {
  const int n = LU.rows();
  for (int k = 0; k < n; ++k)
    if (piv[k] != k) std::swap(b[k], b[piv[k]]);
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) {
      R t = LU(i, j) * b[j];
      b[i] -= t;
    }
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) {
      R t = LU(i, j) * b[j];
      b[i] -= t;
    }
    b[i] /= LU(i, i);
  }
}

// exp(tA) by scaling-and-squaring with a Taylor series summed until terms
// fall below the working precision. Adequate for the small systems used as
// analytic oracles.
template <class R, class Ctx>
Mat<R> expm(const Mat<R>& A, const R& t, const Ctx& ctx) {
  const int n = A.rows();
  if (A.cols() != n) throw std::invalid_argument("expm: square matrix required");

  // row-sum norm of tA
  R anorm = ctx.zero();
  for (int i = 0; i < n; ++i) {
    R s = ctx.zero();
    for (int j = 0; j < n; ++j) s += abs(A(i, j));
    if (s > anorm) anorm = s;
  }
  anorm *= abs(t);

  int squarings = 0;
  R quarter = ctx.one() / 4;
  R scale = ctx.one();
  while (anorm * scale > quarter && squarings < 400) {
    scale /= 2;
    ++squarings;
  }

  Mat<R> X(n, n, ctx.zero());  // scaled tA
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) X(i, j) = A(i, j) * t * scale;

  Mat<R> result(n, n, ctx.zero());
  for (int i = 0; i < n; ++i) result(i, i) = ctx.one();
  Mat<R> term = result;  // X^k / k!
  R tol = ctx.eps() / 2;

  for (long k = 1; k < 1000; ++k) {
    // term <- term * X / k
    Mat<R> next(n, n, ctx.zero());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        R s = ctx.zero();
        for (int l = 0; l < n; ++l) fma_add(s, term(i, l), X(l, j));
        next(i, j) = s / k;
      }
    term = next;
    R tn = ctx.zero();
    for (auto& v : term.data()) {
      R a = abs(v);
      if (a > tn) tn = a;
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) result(i, j) += term(i, j);
    if (tn < tol) break;
  }

  for (int s = 0; s < squarings; ++s) {
    Mat<R> sq(n, n, ctx.zero());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        R acc = ctx.zero();
        for (int l = 0; l < n; ++l) fma_add(acc, result(i, l), result(l, j));
        sq(i, j) = acc;
      }
    result = sq;
  }
  return result;
}

}  // namespace cgode
