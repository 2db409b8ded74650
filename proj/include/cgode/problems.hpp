#pragma once

// IVP definitions: right-hand side, analytic Jacobian, initial data. The
// two benchmark systems (Lorenz, van der Pol) carry hand-written Jacobians;
// linear systems double as analytic oracles with closed-form solution and
// dual via the matrix exponential.

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

#include "cgode/linalg.hpp"
#include "cgode/precision.hpp"

namespace cgode {

template <class R>
struct ProblemDef {
  int dim = 0;
  std::string label;
  Vec<R> u0;
  // f(t, u, out) and df/du(t, u, out); both must be pure
  std::function<void(const R&, std::span<const R>, std::span<R>)> f;
  std::function<void(const R&, std::span<const R>, Mat<R>&)> jacobian;
};

// Lorenz system, sigma = 10, b = 8/3, r = 28, u(0) = (1,0,0).
template <class Ctx>
ProblemDef<real_of<Ctx>> lorenz(const Ctx& ctx) {
  using R = real_of<Ctx>;
  ProblemDef<R> p;
  p.dim = 3;
  p.label = "lorenz";
  p.u0 = {ctx.one(), ctx.zero(), ctx.zero()};
  R sigma = ctx.make(10L);
  R r = ctx.make(28L);
  R b = ctx.make(8L) / 3;
  p.f = [sigma, r, b](const R&, std::span<const R> u, std::span<R> out) {
    out[0] = sigma * (u[1] - u[0]);
    out[1] = r * u[0] - u[1] - u[0] * u[2];
    out[2] = u[0] * u[1] - b * u[2];
  };
  R zero = ctx.zero(), one = ctx.one();
  p.jacobian = [sigma, r, b, zero, one](const R&, std::span<const R> u, Mat<R>& J) {
    J(0, 0) = -sigma; J(0, 1) = sigma;      J(0, 2) = zero;
    J(1, 0) = r - u[2]; J(1, 1) = -one;     J(1, 2) = -u[0];
    J(2, 0) = u[1];   J(2, 1) = u[0];       J(2, 2) = -b;
  };
  return p;
}

// Van der Pol oscillator as a first-order system, u(0) = (2,0).
template <class Ctx>
ProblemDef<real_of<Ctx>> van_der_pol(const real_of<Ctx>& mu, const Ctx& ctx) {
  using R = real_of<Ctx>;
  if (!(mu > 0)) throw std::invalid_argument("van_der_pol: mu must be positive");
  ProblemDef<R> p;
  p.dim = 2;
  p.label = "vanderpol";
  p.u0 = {ctx.make(2L), ctx.zero()};
  R zero = ctx.zero(), one = ctx.one();
  p.f = [mu, one](const R&, std::span<const R> u, std::span<R> out) {
    out[0] = u[1];
    out[1] = mu * (one - u[0] * u[0]) * u[1] - u[0];
  };
  p.jacobian = [mu, zero, one](const R&, std::span<const R> u, Mat<R>& J) {
    J(0, 0) = zero;                            J(0, 1) = one;
    J(1, 0) = -2 * mu * u[0] * u[1] - one;     J(1, 1) = mu * (one - u[0] * u[0]);
  };
  return p;
}

// Linear autonomous test problem u' = Au with exact solution and dual.
template <class R>
struct AnalyticProblem {
  ProblemDef<R> def;
  Mat<R> A;
  // u(t) = exp(tA) u0
  std::function<void(const R&, std::span<R>)> exact;
  // z(t) = exp(A^T (T - t)) z_T
  std::function<void(const R&, const R&, std::span<const R>, std::span<R>)> exact_dual;
};

template <class Ctx>
AnalyticProblem<real_of<Ctx>> linear_test(const Mat<real_of<Ctx>>& A,
                                          const Vec<real_of<Ctx>>& u0, const Ctx& ctx) {
  using R = real_of<Ctx>;
  const int n = A.rows();
  if (A.cols() != n || static_cast<int>(u0.size()) != n)
    throw std::invalid_argument("linear_test: dimension mismatch");

  AnalyticProblem<R> ap;
  ap.A = A;
  ap.def.dim = n;
  ap.def.label = "linear";
  ap.def.u0 = u0;
  auto Ap = std::make_shared<Mat<R>>(A);
  ap.def.f = [Ap](const R&, std::span<const R> u, std::span<R> out) {
    mat_vec(*Ap, u, out);
  };
  ap.def.jacobian = [Ap](const R&, std::span<const R>, Mat<R>& J) { J = *Ap; };

  Ctx c = ctx;
  Vec<R> u0c = u0;
  ap.exact = [Ap, u0c, c](const R& t, std::span<R> out) {
    Mat<R> E = expm(*Ap, t, c);
    mat_vec(E, std::span<const R>(u0c.data(), u0c.size()), out);
  };
  ap.exact_dual = [Ap, c](const R& T, const R& t, std::span<const R> zT, std::span<R> out) {
    Mat<R> E = expm(*Ap, T - t, c);  // exp((T-t) A)
    mat_tvec(E, zT, out);            // exp(A^T (T-t)) z_T
  };
  return ap;
}

}  // namespace cgode
