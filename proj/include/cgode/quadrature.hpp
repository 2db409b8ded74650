#pragma once

// Gauss-Legendre quadrature on the reference interval [0,1], computed at
// working precision, plus composite integration of time functions.

#include <functional>
#include <stdexcept>
#include <vector>

#include "cgode/basis.hpp"
#include "cgode/precision.hpp"

namespace cgode {

template <class R>
struct QuadratureRule {
  std::vector<R> points;   // in (0,1)
  std::vector<R> weights;  // sum to 1
  int exactness = 0;       // exact for polynomials up to this degree

  int count() const { return static_cast<int>(points.size()); }
};

// n-point Gauss-Legendre rule on [0,1]; exact for degree <= 2n-1.
template <class Ctx>
QuadratureRule<real_of<Ctx>> gauss_legendre(int n, const Ctx& ctx) {
  using R = real_of<Ctx>;
  if (n < 1) throw std::invalid_argument("gauss_legendre: need n >= 1");
  QuadratureRule<R> rule;
  rule.exactness = 2 * n - 1;
  rule.points.reserve(n);
  rule.weights.reserve(n);
  for (auto& x : detail::legendre_roots(n, ctx)) {
    R d = ctx.zero();
    detail::legendre(n, x, ctx, nullptr, &d);
    // weight on [-1,1] is 2 / ((1-x^2) P_n'(x)^2); halved for [0,1]
    R w = 2 / ((ctx.one() - x * x) * d * d);
    rule.points.push_back((x + 1) / 2);
    rule.weights.push_back(w / 2);
  }
  return rule;
}

// Composite integration of a scalar-valued time function over [a,b].
template <class R, class Fn, class Ctx>
R integrate(Fn&& v, const R& a, const R& b, const QuadratureRule<R>& rule,
            const Ctx& ctx, long subintervals = 1) {
  if (!(a < b)) throw std::invalid_argument("integrate: requires a < b");
  if (subintervals < 1) throw std::invalid_argument("integrate: subintervals >= 1");
  R h = (b - a) / subintervals;
  R total = ctx.zero();
  for (long s = 0; s < subintervals; ++s) {
    R left = a + h * s;
    R piece = ctx.zero();
    for (int i = 0; i < rule.count(); ++i) {
      R t = left + rule.points[i] * h;
      fma_add(piece, rule.weights[i], v(t));
    }
    total += piece * h;
  }
  return total;
}

// Vector-valued variant: accumulates into out (resized by caller).
template <class R, class Fn, class Ctx>
void integrate_vec(Fn&& v, const R& a, const R& b, const QuadratureRule<R>& rule,
                   const Ctx& ctx, std::vector<R>& out, long subintervals = 1) {
  if (!(a < b)) throw std::invalid_argument("integrate: requires a < b");
  R h = (b - a) / subintervals;
  for (auto& o : out) o = ctx.zero();
  std::vector<R> sample(out.size(), ctx.zero());
  for (long s = 0; s < subintervals; ++s) {
    R left = a + h * s;
    for (int i = 0; i < rule.count(); ++i) {
      R t = left + rule.points[i] * h;
      v(t, sample);
      R wh = rule.weights[i] * h;
      for (size_t c = 0; c < out.size(); ++c) fma_add(out[c], wh, sample[c]);
    }
  }
}

}  // namespace cgode
