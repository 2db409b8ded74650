#pragma once

// Assembly of the a-posteriori machinery: the error representation
//
//   <z_T, U(T)-u(T)> = <z(0), U(0)-u(0)> + sum_m <z(t_{m-1}), [U]_{m-1}>
//                      + int_0^T <z, R> dt,
//
// the three-term bound E = E_D + E_G + E_C with stability factors, the
// deterministic dt^-1 ceiling, the RMS dt^-1/2 law, the quadrature term
// E_Q, and the derived predictions (optimal step size, computability
// horizon).
//
// Interpolation constants are never invented: alongside the "modulo C_p"
// classical forms, constant-free sharp forms straight out of the proof are
// reported (per-interval dual-weighted sums for E_G, the penultimate-line
// node sum for E_C, and the exact model identity for the RMS).

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgode/adjoint.hpp"
#include "cgode/cg_solver.hpp"
#include "cgode/residual.hpp"

namespace cgode {

// Right-hand side of the error representation, evaluated by quadrature.
// The data term needs the exact initial value; omitting it asserts
// U(0) = u(0) and contributes zero.
template <class Ctx>
real_of<Ctx> error_representation(const Trajectory<real_of<Ctx>>& traj,
                                  const DualSolution<real_of<Ctx>>& dual,
                                  const ProblemDef<real_of<Ctx>>& problem,
                                  const QuadratureRule<real_of<Ctx>>& rule, const Ctx& ctx,
                                  const Vec<real_of<Ctx>>* u0_exact = nullptr) {
  using R = real_of<Ctx>;
  const auto& part = traj.partition();
  if (!(dual.horizon() == part.right()))
    throw std::invalid_argument("error_representation: dual and trajectory horizons differ");
  const int N = traj.poly.dim();

  Vec<R> z(N, ctx.zero()), work(N, ctx.zero()), u(N, ctx.zero()), du(N, ctx.zero()), fu(N, ctx.zero());
  R total = ctx.zero();

  // data term
  dual.eval(part.left(), std::span<R>(z.data(), N), ctx);
  if (u0_exact) {
    auto u0 = traj.poly.node_values(0, 0);
    for (int c = 0; c < N; ++c) work[c] = u0[c] - (*u0_exact)[c];
    total += dot(std::span<const R>(z.data(), N), std::span<const R>(work.data(), N));
  }

  for (long m = 0; m < part.intervals(); ++m) {
    const R a = part.node(m);
    const R dt = part.dt(m);

    // jump term <z(t_{m-1}), [U]_{m-1}>
    traj.poly.jump(m, std::span<R>(work.data(), N), ctx);
    bool any = false;
    for (int c = 0; c < N; ++c)
      if (!is_zero(work[c])) { any = true; break; }
    if (any) {
      dual.eval(a, std::span<R>(z.data(), N), ctx);
      total += dot(std::span<const R>(z.data(), N), std::span<const R>(work.data(), N));
    }

    // residual term int <z, R>
    R acc = ctx.zero();
    for (int n = 0; n < rule.count(); ++n) {
      const R& s = rule.points[n];
      R t = a + s * dt;
      traj.poly.eval_derivative_local(m, s, 1, std::span<R>(du.data(), N), ctx);
      traj.poly.eval_local(m, s, std::span<R>(u.data(), N), ctx);
      problem.f(t, std::span<const R>(u.data(), N), std::span<R>(fu.data(), N));
      dual.eval(t, std::span<R>(z.data(), N), ctx);
      R inner = ctx.zero();
      for (int c = 0; c < N; ++c) fma_add(inner, z[c], du[c] - fu[c]);
      fma_add(acc, rule.weights[n], inner);
    }
    fma_add(total, dt, acc);
  }
  return total;
}

template <class R>
struct ErrorBreakdown {
  // bounds (sharp = constant-free forms from the proof; modC = classical
  // stability-factor forms with the interpolation constant set to 1)
  R E_D{};
  R E_G_sharp{}, E_G_modC{};
  R E_C_sharp{};        // node_sum * max ||dt^-1 Rbar|| (measured residuals)
  R E_C_ceiling{};      // S_C * eps sqrt(N) / min dt   (Corollary, modulo C_p')
  R E_C_worst_model{};  // eps * sum_{m,k,i} |z_i|      (worst-case model, sharp)
  R E_C_rms{};          // S_C2 * eps / sqrt(min dt)    (Theorem 3, modulo C_p')
  R E_C_rms_sharp{};    // eps * sqrt(sum z_i^2)        (model identity, exact)
  R E_Q{};
  R total{};            // E_D + E_G_sharp + E_C_sharp (+ E_Q if set)

  // inputs
  R data_err{}, eps{}, min_dt{};
  R max_disc_term{};     // max_m dt^{p+1}(||[U]||/dt + max||R||)
  R max_rbar_over_dt{};  // max ||dt^-1 Rbar||
  int N = 0, p = 0;
  StabilityFactors<R> factors;
};

template <class Ctx>
ErrorBreakdown<real_of<Ctx>> assemble_bounds(const StabilityFactors<real_of<Ctx>>& sf,
                                             const ResidualData<real_of<Ctx>>& res,
                                             const real_of<Ctx>& data_err, const Ctx& ctx,
                                             const Partition<real_of<Ctx>>& part, int p) {
  using R = real_of<Ctx>;
  if (sf.p != p || res.p != p)
    throw std::invalid_argument("assemble_bounds: inconsistent testing degree p");
  if (sf.intervals != part.intervals() ||
      sf.intervals != static_cast<long>(res.intervals.size()))
    throw std::invalid_argument("assemble_bounds: partition/data size mismatch");
  if (sf.node_z.empty())
    throw std::invalid_argument("assemble_bounds: missing dual nodal values for the sharp sum");

  ErrorBreakdown<R> bd;
  bd.N = sf.dim;
  bd.p = p;
  bd.factors = sf;
  bd.data_err = data_err;
  bd.eps = ctx.eps();
  bd.min_dt = part.min_dt();
  bd.max_disc_term = res.max_disc_term(ctx);
  bd.max_rbar_over_dt = res.max_rbar_over_dt(ctx);

  bd.E_D = sf.S_D * data_err;

  // E_G: sharp per-interval Hoelder sum and the classical S_G form
  bd.E_G_sharp = ctx.zero();
  for (long m = 0; m < sf.intervals; ++m) {
    fma_add(bd.E_G_sharp, sf.gap[m], res.intervals[m].jump_norm);
    fma_add(bd.E_G_sharp, sf.interp_l1[m], res.intervals[m].max_R);
  }
  bd.E_G_modC = sf.S_G * bd.max_disc_term;

  // E_C: proof's penultimate line with measured residuals, plus the model
  // ceilings
  bd.E_C_sharp = sf.node_sum * bd.max_rbar_over_dt;
  R rootN = sqrt(ctx.make(static_cast<long>(sf.dim)));
  bd.E_C_ceiling = sf.S_C * bd.eps * rootN / bd.min_dt;
  bd.E_C_worst_model = bd.eps * sf.node_abs_sum;
  bd.E_C_rms = sf.S_C2 * bd.eps / sqrt(bd.min_dt);
  bd.E_C_rms_sharp = bd.eps * sqrt(sf.node_sq_sum);

  bd.E_Q = ctx.zero();
  bd.total = bd.E_D + bd.E_G_sharp + bd.E_C_sharp;
  return bd;
}

// E_Q = S_Q * max ||pi f - f|| with the max sampled on the residual grid.
template <class Ctx>
real_of<Ctx> estimate_quadrature_error(const DualSolution<real_of<Ctx>>& dual,
                                       const ProblemDef<real_of<Ctx>>& problem,
                                       const Trajectory<real_of<Ctx>>& traj,
                                       const BasisSpec<real_of<Ctx>>& basis,
                                       const QuadratureRule<real_of<Ctx>>& rule, const Ctx& ctx) {
  using R = real_of<Ctx>;
  const auto& part = traj.partition();
  const int N = traj.poly.dim();

  // g(t) = f(U(t), t) and its degree-p interpolant
  auto g = [&](const R& t, std::span<R> out) {
    Vec<R> u(N, ctx.zero());
    traj.poly.eval(t, std::span<R>(u.data(), N), ctx);
    problem.f(t, std::span<const R>(u.data(), N), out);
  };
  PiecewisePoly<R> pif = interpolate_pi(g, part, basis, N, ctx);

  R maxdev = ctx.zero();
  Vec<R> fv(N, ctx.zero()), pv(N, ctx.zero());
  const int nsamp = residual_sample_count(traj.q);
  for (long m = 0; m < part.intervals(); ++m) {
    const R a = part.node(m);
    const R dt = part.dt(m);
    for (int j = 0; j < nsamp; ++j) {
      R s = (2 * ctx.make(static_cast<long>(j)) + 1) / (2L * nsamp);
      R t = a + s * dt;
      g(t, std::span<R>(fv.data(), N));
      pif.eval_local(m, s, std::span<R>(pv.data(), N), ctx);
      for (int c = 0; c < N; ++c) pv[c] -= fv[c];
      R d = norm2(pv);
      if (d > maxdev) maxdev = d;
    }
  }

  // S_Q = int ||z|| dt over the primal partition
  R SQ = ctx.zero();
  Vec<R> z(N, ctx.zero());
  for (long m = 0; m < part.intervals(); ++m) {
    const R a = part.node(m);
    const R dt = part.dt(m);
    R acc = ctx.zero();
    for (int n = 0; n < rule.count(); ++n) {
      R t = a + rule.points[n] * dt;
      dual.eval(t, std::span<R>(z.data(), N), ctx);
      fma_add(acc, rule.weights[n], norm2(z));
    }
    fma_add(SQ, dt, acc);
  }
  return SQ * maxdev;
}

// Optimal step size dt ~ eps^{1/(2q + 1/2)} balancing dt^{2q} against
// eps dt^{-1/2}.
template <class R>
R predict_optimal_dt(int q, const R& eps) {
  if (q < 1) throw std::invalid_argument("predict_optimal_dt: q >= 1");
  R e = eps;  // eps^{2/(4q+1)}
  R expn = (e - e + 2) / (4 * q + 1);  // 2/(4q+1) at eps's precision
  return pow(e, expn);
}

template <class Ctx>
real_of<Ctx> predict_optimal_dt(int q, const Ctx& ctx) {
  return predict_optimal_dt(q, ctx.eps());
}

// Computability horizon T ~ n_mach / rate for stability growth
// S(T) ~ 10^{rate T}; n_mach is the requested decimal digit count.
template <class Ctx>
real_of<Ctx> predict_computability(const Ctx& ctx, const real_of<Ctx>& growth_rate) {
  if (!(growth_rate > 0))
    throw std::invalid_argument("predict_computability: growth rate must be positive");
  return ctx.make(static_cast<long>(ctx.digits())) / growth_rate;
}

template <class R>
nlohmann::json breakdown_to_json(const ErrorBreakdown<R>& bd) {
  nlohmann::json j;
  auto put = [&](const char* key, const R& v) {
    j["bounds"][key] = to_string(v);
    j["bounds_f64"][key] = to_double(v);
  };
  put("E_D", bd.E_D);
  put("E_G_sharp", bd.E_G_sharp);
  put("E_G_modC", bd.E_G_modC);
  put("E_C_sharp", bd.E_C_sharp);
  put("E_C_ceiling", bd.E_C_ceiling);
  put("E_C_worst_model", bd.E_C_worst_model);
  put("E_C_rms", bd.E_C_rms);
  put("E_C_rms_sharp", bd.E_C_rms_sharp);
  put("E_Q", bd.E_Q);
  put("total", bd.total);
  j["inputs"] = {
      {"data_err", to_string(bd.data_err)},
      {"eps_mach", to_string(bd.eps)},
      {"min_dt", to_string(bd.min_dt)},
      {"max_disc_term", to_string(bd.max_disc_term)},
      {"max_rbar_over_dt", to_string(bd.max_rbar_over_dt)},
      {"N", bd.N},
      {"p", bd.p},
  };
  j["factors"] = {
      {"S_D", to_string(bd.factors.S_D)},   {"S_G", to_string(bd.factors.S_G)},
      {"S_C", to_string(bd.factors.S_C)},   {"S_C2", to_string(bd.factors.S_C2)},
      {"S_Q", to_string(bd.factors.S_Q)},   {"node_sum", to_string(bd.factors.node_sum)},
  };
  j["factors_f64"] = {
      {"S_D", to_double(bd.factors.S_D)},   {"S_G", to_double(bd.factors.S_G)},
      {"S_C", to_double(bd.factors.S_C)},   {"S_C2", to_double(bd.factors.S_C2)},
      {"S_Q", to_double(bd.factors.S_Q)},   {"node_sum", to_double(bd.factors.node_sum)},
  };
  return j;
}

}  // namespace cgode
