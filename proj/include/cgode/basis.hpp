#pragma once

// Lagrange nodal bases {lambda_k} for P^p([0,1]) on Lobatto, Gauss or
// uniform reference nodes, computed at working precision.
//
// Nodes are found by Newton iteration on the relevant Legendre polynomial
// (interior Lobatto nodes are the roots of P'_p, Gauss nodes the roots of
// P_n), seeded from double-precision Chebyshev estimates and polished at
// full precision. Evaluation goes through the barycentric form, which is
// stable for the degrees used here; monomial coefficients are kept as well
// since lambda_k(0) and analytic differentiation are needed downstream.

#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "cgode/linalg.hpp"
#include "cgode/precision.hpp"

namespace cgode {

enum class NodeFamily { lobatto, gauss, uniform };

inline const char* to_string(NodeFamily f) {
  switch (f) {
    case NodeFamily::lobatto: return "lobatto";
    case NodeFamily::gauss: return "gauss";
    case NodeFamily::uniform: return "uniform";
  }
  return "?";
}

inline NodeFamily node_family_from_string(const std::string& s) {
  if (s == "lobatto") return NodeFamily::lobatto;
  if (s == "gauss") return NodeFamily::gauss;
  if (s == "uniform") return NodeFamily::uniform;
  throw std::invalid_argument("unknown node family '" + s + "'");
}

namespace detail {

// Legendre P_n(x), P'_n(x) on [-1,1] by the three-term recurrence.
template <class R, class Ctx>
void legendre(int n, const R& x, const Ctx& ctx, std::type_identity_t<R>* value,
              std::type_identity_t<R>* deriv, std::type_identity_t<R>* deriv2 = nullptr) {
  R p0 = ctx.one(), p1 = x;
  if (n == 0) { p1 = p0; p0 = ctx.zero(); }
  for (int k = 2; k <= n; ++k) {
    R p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  // p1 = P_n, p0 = P_{n-1}
  if (value) *value = p1;
  R one_minus_x2 = ctx.one() - x * x;
  if (deriv) {
    // (1-x^2) P'_n = n (P_{n-1} - x P_n)
    *deriv = n * (p0 - x * p1) / one_minus_x2;
  }
  if (deriv2) {
    // (1-x^2) P''_n = 2x P'_n - n(n+1) P_n
    R d = n * (p0 - x * p1) / one_minus_x2;
    *deriv2 = (2 * x * d - static_cast<long>(n) * (n + 1) * p1) / one_minus_x2;
  }
}

// Roots of P_n on (-1,1), ascending, refined to working precision.
template <class Ctx>
std::vector<real_of<Ctx>> legendre_roots(int n, const Ctx& ctx) {
  using R = real_of<Ctx>;
  std::vector<R> roots;
  roots.reserve(n);
  R tol = ctx.eps() * 4;
  for (int i = 0; i < n; ++i) {
    double guess = -std::cos(M_PI * (i + 0.75) / (n + 0.5));
    R x = ctx.make(guess);
    for (int it = 0; it < 200; ++it) {
      R v = ctx.zero(), d = ctx.zero();
      legendre(n, x, ctx, &v, &d);
      R dx = v / d;
      x -= dx;
      if (abs(dx) <= tol * (ctx.one() + abs(x))) break;
    }
    roots.push_back(x);
  }
  return roots;
}

// Interior Lobatto nodes for p+1 total nodes: roots of P'_p on (-1,1).
template <class Ctx>
std::vector<real_of<Ctx>> lobatto_interior(int p, const Ctx& ctx) {
  using R = real_of<Ctx>;
  std::vector<R> roots;
  if (p < 2) return roots;
  roots.reserve(p - 1);
  R tol = ctx.eps() * 4;
  for (int i = 1; i < p; ++i) {
    double guess = -std::cos(M_PI * i / p);
    R x = ctx.make(guess);
    for (int it = 0; it < 200; ++it) {
      R d = ctx.zero(), d2 = ctx.zero();
      legendre(p, x, ctx, nullptr, &d, &d2);
      R dx = d / d2;
      x -= dx;
      if (abs(dx) <= tol * (ctx.one() + abs(x))) break;
    }
    roots.push_back(x);
  }
  return roots;
}

}  // namespace detail

template <class R>
struct BasisSpec {
  int degree = 0;
  NodeFamily family = NodeFamily::lobatto;
  std::vector<R> nodes;                 // tau_0 < ... < tau_p in [0,1]
  std::vector<R> bary;                  // barycentric weights
  std::vector<std::vector<R>> coeffs;   // lambda_k monomial coefficients, ascending degree
  std::vector<R> lambda_at_zero;        // lambda_k(0)
  Mat<R> diff;                          // D(j,k) = lambda_k'(tau_j)

  int count() const { return degree + 1; }

  // lambda_k(s) for all k (barycentric; exact unit vector on a node hit)
  template <class Ctx>
  void eval_all(const R& s, std::span<R> out, const Ctx& ctx) const {
    const int n = count();
    for (int k = 0; k < n; ++k)
      if (s == nodes[k]) {
        for (int j = 0; j < n; ++j) out[j] = ctx.zero();
        out[k] = ctx.one();
        return;
      }
    R denom = ctx.zero();
    for (int k = 0; k < n; ++k) {
      out[k] = bary[k] / (s - nodes[k]);
      denom += out[k];
    }
    for (int k = 0; k < n; ++k) out[k] /= denom;
  }

  // Horner evaluation of the coefficient form (used by invariant tests)
  template <class Ctx>
  R eval_coeff(int k, const R& s, const Ctx& ctx) const {
    R acc = ctx.zero();
    for (int j = degree; j >= 0; --j) acc = acc * s + coeffs[k][j];
    return acc;
  }
};

// Lagrange nodal basis for P^p([0,1]).
//
// lobatto: endpoints + roots of P'_p (requires p >= 1),
// gauss:   Gauss-Legendre nodes mapped to (0,1),
// uniform: k/p for p >= 1; the degenerate p = 0 basis sits at 1/2 for both
//          gauss and uniform (a single midpoint node).
template <class Ctx>
BasisSpec<real_of<Ctx>> lagrange_basis(int p, NodeFamily family, const Ctx& ctx) {
  using R = real_of<Ctx>;
  if (p < 0) throw std::invalid_argument("lagrange_basis: degree must be >= 0");
  if (family == NodeFamily::lobatto && p < 1)
    throw std::invalid_argument("lagrange_basis: lobatto requires degree >= 1");

  BasisSpec<R> b;
  b.degree = p;
  b.family = family;
  const int n = p + 1;
  b.nodes.reserve(n);

  switch (family) {
    case NodeFamily::lobatto: {
      b.nodes.push_back(ctx.zero());
      for (auto& x : detail::lobatto_interior(p, ctx))
        b.nodes.push_back((x + 1) / 2);
      b.nodes.push_back(ctx.one());
      break;
    }
    case NodeFamily::gauss: {
      if (p == 0) {
        b.nodes.push_back(ctx.one() / 2);
      } else {
        for (auto& x : detail::legendre_roots(n, ctx))
          b.nodes.push_back((x + 1) / 2);
      }
      break;
    }
    case NodeFamily::uniform: {
      if (p == 0) {
        b.nodes.push_back(ctx.one() / 2);
      } else {
        for (int k = 0; k <= p; ++k) b.nodes.push_back(ctx.make(static_cast<long>(k)) / p);
      }
      break;
    }
  }

  // barycentric weights w_k = 1 / prod_{j != k}(tau_k - tau_j)
  b.bary.assign(n, ctx.one());
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      if (j != k) b.bary[k] /= (b.nodes[k] - b.nodes[j]);

  // monomial coefficients by synthetic division of the master polynomial
  // prod_j (s - tau_j)
  std::vector<R> master(n + 1, ctx.zero());
  master[0] = ctx.one();
  int deg = 0;
  for (int j = 0; j < n; ++j) {
    // multiply by (s - tau_j)
    for (int d = deg + 1; d >= 1; --d) {
      R t = master[d - 1] - master[d] * b.nodes[j];
      master[d] = t;
    }
    master[0] = -master[0] * b.nodes[j];
    ++deg;
  }
  // master stored ascending: master[d] is the s^d coefficient
  b.coeffs.assign(n, std::vector<R>(n, ctx.zero()));
  for (int k = 0; k < n; ++k) {
    // divide master by (s - tau_k): quotient ascending via reverse Horner
    std::vector<R> q(n, ctx.zero());
    R carry = master[n];
    for (int d = n - 1; d >= 0; --d) {
      q[d] = carry;
      carry = master[d] + carry * b.nodes[k];
    }
    for (int d = 0; d < n; ++d) b.coeffs[k][d] = q[d] * b.bary[k];
  }

  b.lambda_at_zero.reserve(n);
  {
    std::vector<R> at0(n, ctx.zero());
    b.eval_all(ctx.zero(), std::span<R>(at0.data(), at0.size()), ctx);
    for (auto& v : at0) b.lambda_at_zero.push_back(v);
  }

  // differentiation matrix D(j,k) = lambda_k'(tau_j)
  b.diff = Mat<R>(n, n, ctx.zero());
  for (int j = 0; j < n; ++j) {
    R diag = ctx.zero();
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      b.diff(j, k) = (b.bary[k] / b.bary[j]) / (b.nodes[j] - b.nodes[k]);
      diag -= b.diff(j, k);
    }
    b.diff(j, j) = diag;
  }
  return b;
}

}  // namespace cgode
