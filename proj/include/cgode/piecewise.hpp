#pragma once

// Piecewise polynomial functions on a partition: per-interval nodal values
// on a reference basis, evaluable anywhere in [0,T] with a left-continuous
// convention at interval endpoints. This is the common storage behind the
// numerical trajectory, the dual solution and the interpolation operator pi.

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cgode/basis.hpp"
#include "cgode/partition.hpp"
#include "cgode/precision.hpp"

namespace cgode {

template <class R>
class PiecewisePoly {
 public:
  PiecewisePoly() = default;

  PiecewisePoly(Partition<R> part, BasisSpec<R> basis, int dim)
      : part_(std::move(part)), basis_(std::move(basis)), dim_(dim) {
    values_.resize(static_cast<size_t>(part_.intervals()) * basis_.count() * dim_);
  }

  const Partition<R>& partition() const { return part_; }
  const BasisSpec<R>& basis() const { return basis_; }
  int dim() const { return dim_; }
  int degree() const { return basis_.degree; }

  // nodal value block for (interval m, node k): dim components
  std::span<R> node_values(long m, int k) {
    return {values_.data() + offset(m, k), static_cast<size_t>(dim_)};
  }
  std::span<const R> node_values(long m, int k) const {
    return {values_.data() + offset(m, k), static_cast<size_t>(dim_)};
  }

  // u(t); at shared endpoints the left interval wins
  template <class Ctx>
  void eval(const R& t, std::span<R> out, const Ctx& ctx) const {
    long m = part_.locate(t);
    eval_local(m, to_local(m, t), out, ctx);
  }

  // d^order/dt^order at t; orders above the degree are exactly zero
  template <class Ctx>
  void eval_derivative(const R& t, int order, std::span<R> out, const Ctx& ctx) const {
    if (order < 0) throw std::invalid_argument("eval_derivative: order >= 0");
    if (order > degree()) {
      for (int c = 0; c < dim_; ++c) out[c] = ctx.zero();
      return;
    }
    long m = part_.locate(t);
    eval_derivative_local(m, to_local(m, t), order, out, ctx);
  }

  // value at local coordinate s in [0,1] of interval m
  template <class Ctx>
  void eval_local(long m, const R& s, std::span<R> out, const Ctx& ctx) const {
    const int n = basis_.count();
    std::vector<R> lam(n, ctx.zero());
    basis_.eval_all(s, std::span<R>(lam.data(), lam.size()), ctx);
    for (int c = 0; c < dim_; ++c) out[c] = ctx.zero();
    for (int k = 0; k < n; ++k) {
      auto vals = node_values(m, k);
      for (int c = 0; c < dim_; ++c) fma_add(out[c], lam[k], vals[c]);
    }
  }

  template <class Ctx>
  void eval_derivative_local(long m, const R& s, int order, std::span<R> out, const Ctx& ctx) const {
    const int n = basis_.count();
    if (order > degree()) {
      for (int c = 0; c < dim_; ++c) out[c] = ctx.zero();
      return;
    }
    // nodal values of the derivative polynomial via repeated application of
    // the differentiation matrix, then barycentric evaluation
    std::vector<R> work(static_cast<size_t>(n) * dim_, ctx.zero());
    for (int k = 0; k < n; ++k) {
      auto vals = node_values(m, k);
      for (int c = 0; c < dim_; ++c) work[static_cast<size_t>(k) * dim_ + c] = vals[c];
    }
    std::vector<R> next(work.size(), ctx.zero());
    R dt = part_.dt(m);
    for (int o = 0; o < order; ++o) {
      for (int j = 0; j < n; ++j)
        for (int c = 0; c < dim_; ++c) {
          R acc = ctx.zero();
          for (int k = 0; k < n; ++k)
            fma_add(acc, basis_.diff(j, k), work[static_cast<size_t>(k) * dim_ + c]);
          next[static_cast<size_t>(j) * dim_ + c] = acc / dt;
        }
      std::swap(work, next);
    }
    std::vector<R> lam(n, ctx.zero());
    basis_.eval_all(s, std::span<R>(lam.data(), lam.size()), ctx);
    for (int c = 0; c < dim_; ++c) out[c] = ctx.zero();
    for (int k = 0; k < n; ++k)
      for (int c = 0; c < dim_; ++c)
        fma_add(out[c], lam[k], work[static_cast<size_t>(k) * dim_ + c]);
  }

  // [U]_{m} = U(t_m^+) - U(t_m^-) for m = 1..M-1 written as interval index:
  // jump at the left end of interval m (m >= 1), plus jump(0) against a
  // supplied left limit if any. For m = 0 the jump is defined as zero.
  template <class Ctx>
  void jump(long m, std::span<R> out, const Ctx& ctx) const {
    if (m == 0) {
      for (int c = 0; c < dim_; ++c) out[c] = ctx.zero();
      return;
    }
    // value at tau=0 of interval m minus value at tau=1 of interval m-1
    std::vector<R> right_limit(dim_, ctx.zero());
    std::vector<R> left_limit(dim_, ctx.zero());
    eval_local(m, ctx.zero(), std::span<R>(right_limit.data(), dim_), ctx);
    eval_local(m - 1, ctx.one(), std::span<R>(left_limit.data(), dim_), ctx);
    for (int c = 0; c < dim_; ++c) out[c] = right_limit[c] - left_limit[c];
  }

  R to_local(long m, const R& t) const { return (t - part_.node(m)) / part_.dt(m); }

  std::vector<R>& raw_values() { return values_; }
  const std::vector<R>& raw_values() const { return values_; }

 private:
  size_t offset(long m, int k) const {
    return (static_cast<size_t>(m) * basis_.count() + k) * dim_;
  }

  Partition<R> part_;
  BasisSpec<R> basis_;
  int dim_ = 0;
  std::vector<R> values_;
};

// The interpolation operator pi onto piecewise polynomials of degree p:
// (pi v)(t) = sum_k v(t_{m-1} + tau_k dt_m) lambda_k((t - t_{m-1}) / dt_m).
template <class Ctx, class Fn>
PiecewisePoly<real_of<Ctx>> interpolate_pi(Fn&& v, const Partition<real_of<Ctx>>& part,
                                           const BasisSpec<real_of<Ctx>>& basis, int dim,
                                           const Ctx& ctx) {
  using R = real_of<Ctx>;
  PiecewisePoly<R> out(part, basis, dim);
  std::vector<R> sample(dim, ctx.zero());
  for (long m = 0; m < part.intervals(); ++m) {
    R dt = part.dt(m);
    for (int k = 0; k < basis.count(); ++k) {
      R t = part.node(m) + basis.nodes[k] * dt;
      v(t, std::span<R>(sample.data(), sample.size()));
      auto dst = out.node_values(m, k);
      for (int c = 0; c < dim; ++c) dst[c] = sample[c];
    }
  }
  return out;
}

}  // namespace cgode
