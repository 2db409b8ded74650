#pragma once

// The dual (linearised adjoint) problem
//
//   -z'(t) = Abar^T(t) z(t),  t in [0,T),   z(T) = z_T,
//
// solved backward along a stored primal trajectory as a continuous
// piecewise polynomial of degree q_dual, plus the stability factors
//
//   S_D = ||z(0)||,  S_G = int ||z^(p+1)||,  S_C = int ||pi z||,
//   S_C2 = (int ||pi z||^2)^(1/2),  S_Q = int ||z||.
//
// Abar is the Jacobian of f averaged between the numerical and the exact
// solution; since the exact solution is unknown the default policy
// evaluates df/du along U alone, and a segment-quadrature policy against a
// finer reference trajectory is available.

#include <fstream>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cgode/cg_solver.hpp"
#include "cgode/linalg.hpp"
#include "cgode/piecewise.hpp"
#include "cgode/problems.hpp"
#include "cgode/quadrature.hpp"

namespace cgode {

enum class JacobianPolicy { along_U, segment_quadrature };

// Abar(t): along_U returns df/du(U(t), t); segment_quadrature integrates
// df/du(s U(t) + (1-s) u_ref(t), t) over s in [0,1] by Gauss quadrature.
template <class Ctx>
Mat<real_of<Ctx>> averaged_jacobian(const Trajectory<real_of<Ctx>>& traj,
                                    const ProblemDef<real_of<Ctx>>& problem,
                                    const real_of<Ctx>& t, JacobianPolicy policy,
                                    const Ctx& ctx,
                                    const Trajectory<real_of<Ctx>>* reference = nullptr,
                                    int s_points = 8) {
  using R = real_of<Ctx>;
  const int N = problem.dim;
  Mat<R> J(N, N, ctx.zero());
  Vec<R> u(N, ctx.zero());
  traj.poly.eval(t, std::span<R>(u.data(), N), ctx);

  if (policy == JacobianPolicy::along_U) {
    problem.jacobian(t, std::span<const R>(u.data(), N), J);
    return J;
  }
  if (!reference)
    throw std::invalid_argument("averaged_jacobian: segment_quadrature needs a reference trajectory");

  Vec<R> uref(N, ctx.zero()), useg(N, ctx.zero());
  reference->poly.eval(t, std::span<R>(uref.data(), N), ctx);
  auto rule = gauss_legendre(s_points, ctx);
  Mat<R> Js(N, N, ctx.zero());
  for (int n = 0; n < rule.count(); ++n) {
    const R& s = rule.points[n];
    for (int c = 0; c < N; ++c) useg[c] = s * u[c] + (ctx.one() - s) * uref[c];
    problem.jacobian(t, std::span<const R>(useg.data(), N), Js);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) fma_add(J(i, j), rule.weights[n], Js(i, j));
  }
  return J;
}

template <class R>
struct DualConfig {
  int q_dual = 3;
  int refine = 1;               // dual subintervals per primal interval
  JacobianPolicy policy = JacobianPolicy::along_U;
  int quad_points = 0;          // 0: q_dual + q_primal + 1
  long end_interval = -1;       // restrict horizon to primal node(end_interval); -1: full
  const Trajectory<R>* reference = nullptr;
};

template <class R>
struct DualSolution {
  PiecewisePoly<R> poly;        // piecewise polynomial dual (possibly refined partition)
  Vec<R> z_T;
  JacobianPolicy policy = JacobianPolicy::along_U;
  int q_dual = 3;
  bool analytic = false;
  // exact closure when the dual is known in closed form (linear problems)
  std::function<void(const R&, std::span<R>)> exact;

  const R& horizon() const { return poly.partition().right(); }
  int dim() const { return poly.dim(); }

  template <class Ctx>
  void eval(const R& t, std::span<R> out, const Ctx& ctx) const {
    if (analytic) { exact(t, out); return; }
    poly.eval(t, out, ctx);
  }
  template <class Ctx>
  Vec<R> eval(const R& t, const Ctx& ctx) const {
    Vec<R> out(dim(), ctx.zero());
    eval(t, std::span<R>(out.data(), out.size()), ctx);
    return out;
  }
};

// Backward cG(q_dual) solve of the dual along traj. Linear per-interval
// systems; a singular system reports its interval index.
template <class Ctx>
DualSolution<real_of<Ctx>> solve_dual(const Trajectory<real_of<Ctx>>& traj,
                                      const ProblemDef<real_of<Ctx>>& problem,
                                      const Vec<real_of<Ctx>>& z_T,
                                      const DualConfig<real_of<Ctx>>& cfg, const Ctx& ctx) {
  using R = real_of<Ctx>;
  const int N = problem.dim;
  if (static_cast<int>(z_T.size()) != N)
    throw std::invalid_argument("solve_dual: z_T dimension mismatch");
  if (cfg.q_dual < 1) throw std::invalid_argument("solve_dual: q_dual >= 1");
  if (cfg.refine < 1) throw std::invalid_argument("solve_dual: refine >= 1");
  if (cfg.policy == JacobianPolicy::segment_quadrature && !cfg.reference)
    throw std::invalid_argument("solve_dual: segment_quadrature needs a reference trajectory");

  const auto& ppart = traj.partition();
  long m_end = cfg.end_interval < 0 ? ppart.intervals() : cfg.end_interval;
  if (m_end < 1 || m_end > ppart.intervals())
    throw std::invalid_argument("solve_dual: bad horizon interval");

  // dual partition: primal nodes [0..m_end], each interval split cfg.refine ways
  std::vector<R> dnodes;
  dnodes.reserve(m_end * cfg.refine + 1);
  for (long m = 0; m < m_end; ++m) {
    const R& a = ppart.node(m);
    R h = ppart.dt(m) / cfg.refine;
    for (int j = 0; j < cfg.refine; ++j) dnodes.push_back(a + h * j);
  }
  dnodes.push_back(ppart.node(m_end));
  Partition<R> dpart(std::move(dnodes));

  const int qd = cfg.q_dual;
  auto basis = lagrange_basis(qd, NodeFamily::lobatto, ctx);
  int nq = cfg.quad_points > 0 ? cfg.quad_points : qd + traj.q + 1;
  auto rule = gauss_legendre(nq, ctx);

  // B_{jk} = int psi_j lambda_k' (exact via qd-point Gauss)
  auto brule = gauss_legendre(std::max(qd, 1), ctx);
  Mat<R> Bfull(qd, qd + 1, ctx.zero());
  {
    std::vector<R> lam(qd + 1, ctx.zero());
    for (int n = 0; n < brule.count(); ++n) {
      const R& s = brule.points[n];
      R x = 2 * s - 1;
      // shifted Legendre values P_0..P_{qd-1}
      std::vector<R> psi;
      psi.reserve(qd);
      R p0 = ctx.one();
      psi.push_back(p0);
      if (qd > 1) {
        R p1 = x;
        psi.push_back(p1);
        for (int k = 2; k < qd; ++k) {
          R p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          psi.push_back(p2);
          p0 = p1;
          p1 = p2;
        }
      }
      for (int k = 0; k <= qd; ++k) {
        R acc = ctx.zero();
        for (int d = basis.degree; d >= 1; --d) acc = acc * s + basis.coeffs[k][d] * d;
        for (int j = 0; j < qd; ++j) fma_add(Bfull(j, k), brule.weights[n] * psi[j], acc);
      }
    }
  }

  // psi_j and lambda_k at the quadrature points
  Mat<R> psi_q(nq, qd, ctx.zero());
  Mat<R> lam_q(nq, qd + 1, ctx.zero());
  {
    std::vector<R> lam(qd + 1, ctx.zero());
    for (int n = 0; n < nq; ++n) {
      R x = 2 * rule.points[n] - 1;
      R p0 = ctx.one();
      psi_q(n, 0) = p0;
      if (qd > 1) {
        R p1 = x;
        psi_q(n, 1) = p1;
        for (int k = 2; k < qd; ++k) {
          R p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          psi_q(n, k) = p2;
          p0 = p1;
          p1 = p2;
        }
      }
      basis.eval_all(rule.points[n], std::span<R>(lam.data(), lam.size()), ctx);
      for (int k = 0; k <= qd; ++k) lam_q(n, k) = lam[k];
    }
  }

  DualSolution<R> dual;
  dual.z_T = z_T;
  dual.policy = cfg.policy;
  dual.q_dual = qd;
  dual.poly = PiecewisePoly<R>(dpart, basis, N);

  const int dim = qd * N;
  Mat<R> M(dim, dim, ctx.zero());
  std::vector<R> rhs(dim, ctx.zero());
  std::vector<int> piv;
  Vec<R> z_right = z_T;
  std::vector<Mat<R>> An(nq, Mat<R>(N, N, ctx.zero()));

  for (long d = dpart.intervals() - 1; d >= 0; --d) {
    const R a = dpart.node(d);
    const R h = dpart.dt(d);

    for (int n = 0; n < nq; ++n) {
      R tn = a + rule.points[n] * h;
      An[n] = averaged_jacobian(traj, problem, tn, cfg.policy, ctx, cfg.reference);
    }

    // assemble M and rhs
    for (int i = 0; i < dim; ++i) {
      rhs[i] = ctx.zero();
      for (int j = 0; j < dim; ++j) M(i, j) = ctx.zero();
    }
    for (int j = 0; j < qd; ++j)
      for (int k = 0; k < qd; ++k)
        for (int c = 0; c < N; ++c) M(j * N + c, k * N + c) = Bfull(j, k);
    for (int j = 0; j < qd; ++j)
      for (int c = 0; c < N; ++c) {
        R acc = Bfull(j, qd) * z_right[c];
        rhs[j * N + c] = -acc;
      }
    for (int n = 0; n < nq; ++n) {
      for (int j = 0; j < qd; ++j) {
        R wj = h * rule.weights[n] * psi_q(n, j);
        for (int k = 0; k <= qd; ++k) {
          R wjk = wj * lam_q(n, k);
          // block += wjk * An^T; columns k == qd fold into the rhs
          if (k < qd) {
            for (int ci = 0; ci < N; ++ci)
              for (int cj = 0; cj < N; ++cj)
                fma_add(M(j * N + ci, k * N + cj), wjk, An[n](cj, ci));
          } else {
            for (int ci = 0; ci < N; ++ci) {
              R acc = ctx.zero();
              for (int cj = 0; cj < N; ++cj) fma_add(acc, An[n](cj, ci), z_right[cj]);
              R t = wjk * acc;
              rhs[j * N + ci] -= t;
            }
          }
        }
      }
    }

    try {
      lu_factor(M, piv);
    } catch (const std::runtime_error&) {
      throw std::runtime_error("solve_dual: singular system on interval " + std::to_string(d));
    }
    lu_solve(M, piv, std::span<R>(rhs.data(), rhs.size()));

    for (int k = 0; k < qd; ++k) {
      auto dst = dual.poly.node_values(d, k);
      for (int c = 0; c < N; ++c) dst[c] = rhs[k * N + c];
    }
    auto last = dual.poly.node_values(d, qd);
    for (int c = 0; c < N; ++c) last[c] = z_right[c];
    for (int c = 0; c < N; ++c) z_right[c] = rhs[c];  // z at tau_0 continues leftward
  }
  return dual;
}

// Analytic dual for linear problems: exact closure for evaluation plus a
// high-degree interpolant backing derivative-based factors.
template <class Ctx>
DualSolution<real_of<Ctx>> make_analytic_dual(const AnalyticProblem<real_of<Ctx>>& ap,
                                              const real_of<Ctx>& T,
                                              const Vec<real_of<Ctx>>& z_T,
                                              const Partition<real_of<Ctx>>& part, int q_dual,
                                              const Ctx& ctx) {
  using R = real_of<Ctx>;
  DualSolution<R> dual;
  dual.z_T = z_T;
  dual.q_dual = q_dual;
  dual.analytic = true;
  auto ap_dual = ap.exact_dual;
  Vec<R> zT = z_T;
  R Tc = T;
  dual.exact = [ap_dual, zT, Tc](const R& t, std::span<R> out) {
    ap_dual(Tc, t, std::span<const R>(zT.data(), zT.size()), out);
  };
  auto basis = lagrange_basis(q_dual, NodeFamily::lobatto, ctx);
  dual.poly = interpolate_pi([&dual](const R& t, std::span<R> out) { dual.exact(t, out); },
                             part, basis, static_cast<int>(z_T.size()), ctx);
  return dual;
}

template <class R>
struct StabilityFactors {
  R S_D{}, S_G{}, S_C{}, S_C2{}, S_Q{};
  // proof-sharp node sums over the testing nodes (m, k):
  R node_sum{};      // sum_m dt_m sum_k ||z(node)||
  R node_abs_sum{};  // sum_{m,k,i} |z_i(node)|        (worst-case model)
  R node_sq_sum{};   // sum_{m,k,i} z_i(node)^2        (RMS model, exact)
  // per primal interval, for the sharp E_G assembly:
  std::vector<R> interp_l1;  // int_m ||z - pi z|| dt
  std::vector<R> gap;        // ||z(t_{m-1}) - pi z(t_{m-1}^+)||
  // dual values at the testing nodes, flattened (m, k, component)
  std::vector<R> node_z;
  int p = 0;
  int dim = 0;
  long intervals = 0;
  // profiles at primal partition nodes t_0..t_M
  std::vector<R> profile_t, profile_znorm, profile_SG, profile_SC, profile_SC2;
};

// Stability factors of the error estimate for testing degree p = basis.degree.
// The dual must carry polynomial degree >= p+1, otherwise z^(p+1) of the
// stored polynomial is identically zero and S_G degenerates.
template <class Ctx>
StabilityFactors<real_of<Ctx>> stability_factors(const DualSolution<real_of<Ctx>>& dual,
                                                 const BasisSpec<real_of<Ctx>>& basis,
                                                 const QuadratureRule<real_of<Ctx>>& rule,
                                                 const Partition<real_of<Ctx>>& part,
                                                 const Ctx& ctx) {
  using R = real_of<Ctx>;
  const int p = basis.degree;
  if (dual.q_dual < p + 1)
    throw std::invalid_argument("stability_factors: dual degree must be >= p+1");
  const int N = dual.dim();

  StabilityFactors<R> sf;
  sf.p = p;
  sf.dim = N;
  sf.intervals = part.intervals();
  sf.interp_l1.reserve(part.intervals());
  sf.gap.reserve(part.intervals());
  sf.node_z.reserve(static_cast<size_t>(part.intervals()) * (p + 1) * N);

  sf.S_G = ctx.zero();
  sf.S_C = ctx.zero();
  sf.S_Q = ctx.zero();
  sf.node_sum = ctx.zero();
  sf.node_abs_sum = ctx.zero();
  sf.node_sq_sum = ctx.zero();
  R SC2_acc = ctx.zero();

  Vec<R> z0(N, ctx.zero());
  dual.eval(part.left(), std::span<R>(z0.data(), N), ctx);
  sf.S_D = norm2(z0);

  sf.profile_t.push_back(part.left());
  sf.profile_znorm.push_back(sf.S_D);
  sf.profile_SG.push_back(ctx.zero());
  sf.profile_SC.push_back(ctx.zero());
  sf.profile_SC2.push_back(ctx.zero());

  std::vector<R> lam(p + 1, ctx.zero());
  Vec<R> zv(N, ctx.zero()), pz(N, ctx.zero()), dz(N, ctx.zero());

  for (long m = 0; m < part.intervals(); ++m) {
    const R a = part.node(m);
    const R dt = part.dt(m);

    // dual values at the testing nodes of this interval; pi z is their
    // nodal interpolant
    std::vector<R> znodes(static_cast<size_t>(p + 1) * N, ctx.zero());
    for (int k = 0; k <= p; ++k) {
      R tk = a + basis.nodes[k] * dt;
      dual.eval(tk, std::span<R>(znodes.data() + static_cast<size_t>(k) * N, N), ctx);
    }
    R nsum = ctx.zero();
    for (int k = 0; k <= p; ++k) {
      std::span<const R> zk(znodes.data() + static_cast<size_t>(k) * N, N);
      R nz = norm2(zk);
      nsum += nz;
      for (int c = 0; c < N; ++c) {
        sf.node_abs_sum += abs(zk[c]);
        fma_add(sf.node_sq_sum, zk[c], zk[c]);
      }
    }
    fma_add(sf.node_sum, dt, nsum);
    for (auto& v : znodes) sf.node_z.push_back(v);

    auto eval_pz = [&](const R& s, std::span<R> out) {
      basis.eval_all(s, std::span<R>(lam.data(), lam.size()), ctx);
      for (int c = 0; c < N; ++c) out[c] = ctx.zero();
      for (int k = 0; k <= p; ++k)
        for (int c = 0; c < N; ++c)
          fma_add(out[c], lam[k], znodes[static_cast<size_t>(k) * N + c]);
    };

    // gap at the left endpoint: ||z(t_{m-1}) - pi z(t_{m-1}^+)||
    dual.eval(a, std::span<R>(zv.data(), N), ctx);
    eval_pz(ctx.zero(), std::span<R>(pz.data(), N));
    for (int c = 0; c < N; ++c) pz[c] -= zv[c];
    sf.gap.push_back(norm2(pz));

    // quadrature over the interval: S_C, S_C2, S_Q, S_G, interp L1
    R sc = ctx.zero(), sc2 = ctx.zero(), sq = ctx.zero(), sg = ctx.zero(), il1 = ctx.zero();
    for (int n = 0; n < rule.count(); ++n) {
      const R& s = rule.points[n];
      R t = a + s * dt;
      R w = rule.weights[n] * dt;
      eval_pz(s, std::span<R>(pz.data(), N));
      R npz = norm2(pz);
      fma_add(sc, w, npz);
      fma_add(sc2, w, npz * npz);
      dual.eval(t, std::span<R>(zv.data(), N), ctx);
      fma_add(sq, w, norm2(zv));
      for (int c = 0; c < N; ++c) zv[c] -= pz[c];
      fma_add(il1, w, norm2(zv));
      dual.poly.eval_derivative(t, p + 1, std::span<R>(dz.data(), N), ctx);
      fma_add(sg, w, norm2(dz));
    }
    sf.S_C += sc;
    SC2_acc += sc2;
    sf.S_Q += sq;
    sf.S_G += sg;
    sf.interp_l1.push_back(il1);

    sf.profile_t.push_back(part.node(m + 1));
    dual.eval(part.node(m + 1), std::span<R>(zv.data(), N), ctx);
    sf.profile_znorm.push_back(norm2(zv));
    sf.profile_SG.push_back(sf.S_G);
    sf.profile_SC.push_back(sf.S_C);
    sf.profile_SC2.push_back(sqrt(SC2_acc));
  }
  sf.S_C2 = sqrt(SC2_acc);
  return sf;
}

// CSV export of the running profiles: t, ||z(t)||, S_G(t), S_C(t), S_C2(t)
// as prefix integrals over [0,t], plus the terminal-anchored window
// S_C - S_C(t) (= integral over [t,T]) for growth plots.
template <class R>
void write_stability_csv(const StabilityFactors<R>& sf, std::ostream& os) {
  os << "t,z_norm,S_G,S_C,S_C2,S_C_window\n";
  for (size_t j = 0; j < sf.profile_t.size(); ++j) {
    os << to_string(to_double(sf.profile_t[j])) << ',' << to_string(to_double(sf.profile_znorm[j]))
       << ',' << to_string(to_double(sf.profile_SG[j])) << ','
       << to_string(to_double(sf.profile_SC[j])) << ',' << to_string(to_double(sf.profile_SC2[j]))
       << ',' << to_string(to_double(sf.S_C - sf.profile_SC[j])) << "\n";
  }
}

template <class R>
void write_stability_csv(const StabilityFactors<R>& sf, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_stability_csv(sf, os);
}

}  // namespace cgode
