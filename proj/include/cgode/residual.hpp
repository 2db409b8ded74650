#pragma once

// Residual measurement for piecewise-smooth trajectories:
//   continuous residual  R(t) = U'(t) - f(U(t), t),
//   interval jumps       [U]_{m-1},
//   discrete residuals   Rbar_k^m = lambda_k(0) [U]_{m-1}
//                                 + int lambda_k((t-t_{m-1})/dt_m) R(t) dt.
//
// For a converged cG(q) trajectory with test degree p <= q-1 and exact
// quadrature the discrete residual vanishes up to the iteration tolerance
// and round-off; it is the round-off probe of the error estimate.

#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgode/cg_solver.hpp"
#include "cgode/linalg.hpp"
#include "cgode/quadrature.hpp"

namespace cgode {

template <class R>
struct ResidualData {
  int p = 0;
  BasisSpec<R> basis;       // testing basis (degree p)
  QuadratureRule<R> rule;   // rule used for the integral term

  struct Interval {
    R t_left{}, dt{};
    R jump_norm{};                  // ||[U]_{m-1}||
    R max_R{};                      // max ||R|| on the sampling grid
    std::vector<R> rbar;            // (p+1) x N components
    std::vector<R> rbar_norms;      // ||Rbar_k^m|| for k = 0..p
  };
  std::vector<Interval> intervals;
  int dim = 0;

  template <class Ctx>
  R max_rbar_norm(const Ctx& ctx) const {
    R m = ctx.zero();
    for (const auto& iv : intervals)
      for (const auto& v : iv.rbar_norms)
        if (v > m) m = v;
    return m;
  }

  // max_{k,m} ||dt_m^{-1} Rbar_k^m||
  template <class Ctx>
  R max_rbar_over_dt(const Ctx& ctx) const {
    R m = ctx.zero();
    for (const auto& iv : intervals)
      for (const auto& v : iv.rbar_norms) {
        R s = v / iv.dt;
        if (s > m) m = s;
      }
    return m;
  }

  // max_m dt^{p+1} (||[U]||/dt + max||R||)  (the Theorem-2 E_G residual)
  template <class Ctx>
  R max_disc_term(const Ctx& ctx) const {
    R m = ctx.zero();
    for (const auto& iv : intervals) {
      R v = pow_int(iv.dt, p + 1) * (iv.jump_norm / iv.dt + iv.max_R);
      if (v > m) m = v;
    }
    return m;
  }
};

// U'(t) - f(U(t), t) at a point (one-sided limits at breakpoints follow the
// trajectory's left-continuous convention).
template <class Ctx>
Vec<real_of<Ctx>> continuous_residual(const Trajectory<real_of<Ctx>>& traj,
                                      const ProblemDef<real_of<Ctx>>& problem,
                                      const real_of<Ctx>& t, const Ctx& ctx) {
  using R = real_of<Ctx>;
  const int N = traj.poly.dim();
  Vec<R> du(N, ctx.zero()), u(N, ctx.zero()), fu(N, ctx.zero());
  traj.poly.eval_derivative(t, 1, std::span<R>(du.data(), N), ctx);
  traj.poly.eval(t, std::span<R>(u.data(), N), ctx);
  problem.f(t, std::span<const R>(u.data(), N), std::span<R>(fu.data(), N));
  for (int c = 0; c < N; ++c) du[c] -= fu[c];
  return du;
}

// Number of max-||R|| sampling points per interval (fixed 4(q+1) grid).
inline int residual_sample_count(int q) { return 4 * (q + 1); }

template <class Ctx>
ResidualData<real_of<Ctx>> discrete_residual(const Trajectory<real_of<Ctx>>& traj,
                                             const ProblemDef<real_of<Ctx>>& problem,
                                             const BasisSpec<real_of<Ctx>>& basis,
                                             const QuadratureRule<real_of<Ctx>>& rule,
                                             const Ctx& ctx) {
  using R = real_of<Ctx>;
  const int p = basis.degree;
  const int q = traj.q;
  if (rule.exactness < p + q)
    throw std::invalid_argument("discrete_residual: quadrature rule must be exact to degree >= p+q");

  ResidualData<R> out;
  out.p = p;
  out.basis = basis;
  out.rule = rule;
  out.dim = traj.poly.dim();
  const int N = out.dim;
  const auto& part = traj.partition();
  out.intervals.resize(part.intervals());

  std::vector<R> lam(p + 1, ctx.zero());
  Vec<R> jump(N, ctx.zero()), du(N, ctx.zero()), u(N, ctx.zero()), fu(N, ctx.zero());
  const int nsamp = residual_sample_count(q);

  for (long m = 0; m < part.intervals(); ++m) {
    auto& iv = out.intervals[m];
    iv.t_left = part.node(m);
    iv.dt = part.dt(m);
    iv.rbar.assign(static_cast<size_t>(p + 1) * N, ctx.zero());

    traj.poly.jump(m, std::span<R>(jump.data(), N), ctx);
    iv.jump_norm = norm2(jump);

    // jump term lambda_k(0) [U]_{m-1}
    for (int k = 0; k <= p; ++k)
      for (int c = 0; c < N; ++c)
        fma_add(iv.rbar[static_cast<size_t>(k) * N + c], basis.lambda_at_zero[k], jump[c]);

    // integral term by quadrature in the local coordinate
    for (int n = 0; n < rule.count(); ++n) {
      const R& s = rule.points[n];
      traj.poly.eval_derivative_local(m, s, 1, std::span<R>(du.data(), N), ctx);
      traj.poly.eval_local(m, s, std::span<R>(u.data(), N), ctx);
      R t = iv.t_left + s * iv.dt;
      problem.f(t, std::span<const R>(u.data(), N), std::span<R>(fu.data(), N));
      for (int c = 0; c < N; ++c) du[c] -= fu[c];
      basis.eval_all(s, std::span<R>(lam.data(), lam.size()), ctx);
      R wdt = rule.weights[n] * iv.dt;
      for (int k = 0; k <= p; ++k) {
        R wl = wdt * lam[k];
        for (int c = 0; c < N; ++c)
          fma_add(iv.rbar[static_cast<size_t>(k) * N + c], wl, du[c]);
      }
    }

    iv.rbar_norms.reserve(p + 1);
    for (int k = 0; k <= p; ++k)
      iv.rbar_norms.push_back(
          norm2(std::span<const R>(iv.rbar.data() + static_cast<size_t>(k) * N, N)));

    // sampled max ||R|| on the fixed interior grid
    iv.max_R = ctx.zero();
    for (int j = 0; j < nsamp; ++j) {
      R s = (2 * ctx.make(static_cast<long>(j)) + 1) / (2L * nsamp);
      traj.poly.eval_derivative_local(m, s, 1, std::span<R>(du.data(), N), ctx);
      traj.poly.eval_local(m, s, std::span<R>(u.data(), N), ctx);
      R t = iv.t_left + s * iv.dt;
      problem.f(t, std::span<const R>(u.data(), N), std::span<R>(fu.data(), N));
      for (int c = 0; c < N; ++c) du[c] -= fu[c];
      R nr = norm2(du);
      if (nr > iv.max_R) iv.max_R = nr;
    }
  }
  return out;
}

template <class Ctx>
ResidualData<real_of<Ctx>> discrete_residual(const Trajectory<real_of<Ctx>>& traj,
                                             const ProblemDef<real_of<Ctx>>& problem,
                                             int p, const Ctx& ctx) {
  // default testing basis: Lobatto for p >= 1, midpoint Gauss for p = 0;
  // default rule integrates polynomial right-hand sides of degree <= 3
  // exactly (2q+2 points covers p+3q for both benchmark systems)
  auto basis = lagrange_basis(p, p >= 1 ? NodeFamily::lobatto : NodeFamily::gauss, ctx);
  auto rule = gauss_legendre(2 * traj.q + 2, ctx);
  return discrete_residual(traj, problem, basis, rule, ctx);
}

template <class R>
struct ResidualCeiling {
  R ceiling{};     // eps_mach * sqrt(N)
  R measured{};    // max ||Rbar||
  bool exceeded = false;
};

// The Cauchy-Schwarz ceiling max ||Rbar|| <= eps sqrt(N); exceeding it
// flags a solver tolerance looser than machine precision.
template <class Ctx>
ResidualCeiling<real_of<Ctx>> residual_ceiling(const ResidualData<real_of<Ctx>>& data,
                                               const Ctx& ctx, int N) {
  ResidualCeiling<real_of<Ctx>> out;
  out.ceiling = ctx.eps() * sqrt(ctx.make(static_cast<long>(N)));
  out.measured = data.max_rbar_norm(ctx);
  out.exceeded = out.measured > out.ceiling;
  return out;
}

// CSV export: m, t_m, dt_m, ||[U]||, max_k ||Rbar_k^m||, sampled max ||R||
template <class R>
void write_residual_csv(const ResidualData<R>& data, std::ostream& os) {
  os << "m,t_m,dt_m,jump_norm,max_rbar_norm,max_R\n";
  long m = 0;
  for (const auto& iv : data.intervals) {
    R mx = iv.rbar_norms.front();
    for (const auto& v : iv.rbar_norms)
      if (v > mx) mx = v;
    os << m << ',' << to_string(to_double(iv.t_left + iv.dt)) << ','
       << to_string(to_double(iv.dt)) << ',' << to_string(to_double(iv.jump_norm)) << ','
       << to_string(to_double(mx)) << ',' << to_string(to_double(iv.max_R)) << "\n";
    ++m;
  }
}

template <class R>
void write_residual_csv(const ResidualData<R>& data, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_residual_csv(data, os);
}

}  // namespace cgode
