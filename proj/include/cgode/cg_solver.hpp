#pragma once

// The cG(q) time stepper: on each interval the continuous piecewise
// polynomial of degree q whose residual is orthogonal to P^{q-1}, i.e.
//
//   int_{t_{m-1}}^{t_m} v (U' - f(U, .)) dt = 0   for all v in P^{q-1},
//
// with the right-hand side integral approximated by an n-point Gauss rule
// (n = ceil((2q+3)/2) by default, which integrates polynomial right-hand
// sides of the two benchmark problems exactly).
//
// Writing U on interval m in the Lobatto nodal basis with U_0 fixed by
// continuity, the Galerkin conditions reduce to the nodal update
//
//   U_k = U(t_{m-1}) + dt sum_n W_{kn} f(U(s_n), .),
//
// where W = B^{-1} C, B_{jk} = int psi_j lambda_k', C_{jn} = w_n psi_j(s_n),
// and psi_j are shifted Legendre test polynomials. The nodal system is
// solved by fixed-point iteration, switching to a Newton iteration with the
// analytic Jacobian after a configurable number of sweeps.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgode/basis.hpp"
#include "cgode/linalg.hpp"
#include "cgode/partition.hpp"
#include "cgode/piecewise.hpp"
#include "cgode/problems.hpp"
#include "cgode/quadrature.hpp"

namespace cgode {

template <class R>
struct SolverConfig {
  int q = 1;
  R dt{};                 // uniform step; ignored when an explicit partition is given
  R tol_fp{};             // iteration tolerance; zero means 10*eps_mach
  int max_fp_iters = 5;   // fixed-point sweeps before switching to Newton
  int max_newton_iters = 80;
  bool enable_newton = true;
  int quad_points = 0;    // 0 means ceil((2q+3)/2)
  NodeFamily trial_family = NodeFamily::lobatto;
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(long interval, int iterations, const std::string& hint)
      : std::runtime_error("cG solve did not converge on interval " +
                           std::to_string(interval) + " after " +
                           std::to_string(iterations) + " iterations; " + hint),
        interval(interval),
        iterations(iterations) {}
  long interval;
  int iterations;
};

template <class R>
struct Trajectory {
  PiecewisePoly<R> poly;
  std::string problem_label;
  int q = 1;
  int digits = 0;
  std::string backend;

  const Partition<R>& partition() const { return poly.partition(); }

  template <class Ctx>
  Vec<R> evaluate(const R& t, const Ctx& ctx) const {
    Vec<R> out(poly.dim(), ctx.zero());
    poly.eval(t, std::span<R>(out.data(), out.size()), ctx);
    return out;
  }
  template <class Ctx>
  Vec<R> evaluate_derivative(const R& t, int order, const Ctx& ctx) const {
    Vec<R> out(poly.dim(), ctx.zero());
    poly.eval_derivative(t, order, std::span<R>(out.data(), out.size()), ctx);
    return out;
  }
};

// Per-solve machinery reused across intervals; also the unit the resumable
// file writer drives one interval at a time.
template <class Ctx>
class CgStepper {
 public:
  using R = real_of<Ctx>;

  CgStepper(const ProblemDef<R>& problem, const SolverConfig<R>& config, const Ctx& ctx)
      : ctx_(ctx), problem_(problem), config_(config) {
    if (config.q < 1) throw std::invalid_argument("cG: q must be >= 1");
    q_ = config.q;
    N_ = problem.dim;
    nq_ = config.quad_points > 0 ? config.quad_points : q_ + 2;
    tol_ = is_zero(config.tol_fp) ? ctx.eps() * 10 : config.tol_fp;

    trial_ = lagrange_basis(q_, config.trial_family, ctx);
    rule_ = gauss_legendre(nq_, ctx);

    // test values psi_j(s_n) (shifted Legendre) and lambda derivatives
    // B_{jk} = int psi_j lambda_k' by q-point Gauss (exact: degree 2q-2)
    auto brule = gauss_legendre(std::max(q_, 1), ctx);
    Mat<R> Bfull(q_, q_ + 1, ctx.zero());
    for (int n = 0; n < brule.count(); ++n) {
      const R& s = brule.points[n];
      R x = 2 * s - 1;
      std::vector<R> psi = legendre_values(x, q_ - 1);
      for (int k = 0; k <= q_; ++k) {
        R dl = lambda_deriv(k, s);
        for (int j = 0; j < q_; ++j) fma_add(Bfull(j, k), brule.weights[n] * psi[j], dl);
      }
    }
    Mat<R> B(q_, q_, ctx.zero());
    for (int j = 0; j < q_; ++j)
      for (int k = 1; k <= q_; ++k) B(j, k - 1) = Bfull(j, k);
    std::vector<int> piv;
    lu_factor(B, piv);

    // W = B^{-1} C with C_{jn} = w_n psi_j(s_n)
    W_ = Mat<R>(q_, nq_, ctx.zero());
    for (int n = 0; n < nq_; ++n) {
      R x = 2 * rule_.points[n] - 1;
      std::vector<R> psi = legendre_values(x, q_ - 1);
      std::vector<R> col(q_, ctx.zero());
      for (int j = 0; j < q_; ++j) col[j] = rule_.weights[n] * psi[j];
      lu_solve(B, piv, std::span<R>(col.data(), col.size()));
      for (int k = 0; k < q_; ++k) W_(k, n) = col[k];
    }

    // lambda_l(s_n) for the quadrature-point evaluation of U
    lam_ = Mat<R>(nq_, q_ + 1, ctx.zero());
    std::vector<R> lrow(q_ + 1, ctx.zero());
    for (int n = 0; n < nq_; ++n) {
      trial_.eval_all(rule_.points[n], std::span<R>(lrow.data(), lrow.size()), ctx);
      for (int l = 0; l <= q_; ++l) lam_(n, l) = lrow[l];
    }

    // workspaces
    V_.assign(static_cast<size_t>(q_) * N_, ctx.zero());
    Vnew_.assign(V_.size(), ctx.zero());
    fvals_.assign(static_cast<size_t>(nq_) * N_, ctx.zero());
    uq_.assign(N_, ctx.zero());
    J_ = Mat<R>(N_, N_, ctx.zero());
    G_.assign(V_.size(), ctx.zero());
    NJ_ = Mat<R>(static_cast<int>(V_.size()), static_cast<int>(V_.size()), ctx.zero());
  }

  const BasisSpec<R>& trial_basis() const { return trial_; }
  const R& tolerance() const { return tol_; }
  int quad_count() const { return nq_; }

  // Solve one interval [t_left, t_left+dt] from u_left; writes the q+1 nodal
  // value blocks (node 0 is u_left itself) into the provided span
  // (length (q+1)*N). Returns iterations used.
  int step(long m, const R& t_left, const R& dt, std::span<const R> u_left, std::span<R> nodes_out) {
    const R one = ctx_.one();
    R u_scale = max_abs(u_left);

    for (auto& v : V_) v = ctx_.zero();  // constant extrapolation start

    R best_update = ctx_.zero();
    bool have_best = false;
    int stagnant = 0;
    int it = 0;
    bool newton_mode = false;

    while (true) {
      ++it;
      if (it > config_.max_newton_iters + config_.max_fp_iters)
        throw NonConvergence(m, it - 1, "consider reducing dt");

      eval_f_at_quadrature(t_left, dt, u_left);

      R update = ctx_.zero();
      if (!newton_mode) {
        // V_k <- dt sum_n W_{kn} f_n
        for (int k = 0; k < q_; ++k)
          for (int c = 0; c < N_; ++c) {
            R acc = ctx_.zero();
            for (int n = 0; n < nq_; ++n) fma_add(acc, W_(k, n), fvals_[static_cast<size_t>(n) * N_ + c]);
            acc *= dt;
            size_t idx = static_cast<size_t>(k) * N_ + c;
            R d = abs(acc - V_[idx]);
            if (d > update) update = d;
            Vnew_[idx] = acc;
          }
        std::swap(V_, Vnew_);
      } else {
        newton_update(t_left, dt, u_left, update);
      }

      // track the solution magnitude for the relative tolerance
      R umax = u_scale;
      for (size_t i = 0; i < V_.size(); ++i) {
        R a = abs(V_[i]);
        // nodal value magnitude is |u_left + V|; bound it by the parts
        if (a + u_scale > umax) umax = a + u_scale;
      }

      R threshold = tol_ * (one + umax);
      if (update <= threshold) break;

      if (!is_finite(update)) throw NonConvergence(m, it, "iteration diverged (non-finite update)");

      if (have_best && update > best_update * 2 && !newton_mode) {
        // fixed point diverging; rescue with Newton right away
        if (config_.enable_newton) { newton_mode = true; have_best = false; continue; }
        throw NonConvergence(m, it, "fixed-point iteration diverging and Newton disabled; reduce dt");
      }
      if (!have_best || update < best_update) {
        best_update = update;
        have_best = true;
        stagnant = 0;
      } else if (++stagnant >= 3) {
        // round-off noise floor: accept if we are within 10x of tolerance
        if (update <= threshold * 10) break;
        throw NonConvergence(m, it, "stagnated above tolerance; reduce dt or raise tol");
      }
      if (!newton_mode && it >= config_.max_fp_iters && config_.enable_newton) {
        newton_mode = true;
        have_best = false;
        stagnant = 0;
      }
    }

    for (int c = 0; c < N_; ++c) nodes_out[c] = u_left[c];
    for (int k = 1; k <= q_; ++k)
      for (int c = 0; c < N_; ++c)
        nodes_out[static_cast<size_t>(k) * N_ + c] =
            u_left[c] + V_[(static_cast<size_t>(k) - 1) * N_ + c];
    return it;
  }

 private:
  // f at every quadrature point of the current iterate
  void eval_f_at_quadrature(const R& t_left, const R& dt, std::span<const R> u_left) {
    for (int n = 0; n < nq_; ++n) {
      for (int c = 0; c < N_; ++c) {
        R acc = u_left[c];
        for (int l = 1; l <= q_; ++l)
          fma_add(acc, lam_(n, l), V_[(static_cast<size_t>(l) - 1) * N_ + c]);
        uq_[c] = acc;
      }
      R tn = t_left + rule_.points[n] * dt;
      problem_.f(tn, std::span<const R>(uq_.data(), uq_.size()),
                 std::span<R>(fvals_.data() + static_cast<size_t>(n) * N_, N_));
    }
  }

  void newton_update(const R& t_left, const R& dt, std::span<const R> u_left, R& update) {
    const int dim = q_ * N_;
    // G_k = V_k - dt sum_n W_{kn} f_n
    for (int k = 0; k < q_; ++k)
      for (int c = 0; c < N_; ++c) {
        size_t idx = static_cast<size_t>(k) * N_ + c;
        R acc = ctx_.zero();
        for (int n = 0; n < nq_; ++n) fma_add(acc, W_(k, n), fvals_[static_cast<size_t>(n) * N_ + c]);
        G_[idx] = V_[idx] - dt * acc;
      }
    // NJ = I - dt sum_n W_{kn} lambda_l(s_n) Jf(s_n)
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) NJ_(i, j) = ctx_.zero();
    for (int i = 0; i < dim; ++i) NJ_(i, i) = ctx_.one();
    for (int n = 0; n < nq_; ++n) {
      for (int c = 0; c < N_; ++c) {
        R acc = u_left[c];
        for (int l = 1; l <= q_; ++l)
          fma_add(acc, lam_(n, l), V_[(static_cast<size_t>(l) - 1) * N_ + c]);
        uq_[c] = acc;
      }
      R tn = t_left + rule_.points[n] * dt;
      problem_.jacobian(tn, std::span<const R>(uq_.data(), uq_.size()), J_);
      for (int k = 0; k < q_; ++k) {
        R wk = dt * W_(k, n);
        for (int l = 1; l <= q_; ++l) {
          R wl = wk * lam_(n, l);
          for (int ci = 0; ci < N_; ++ci)
            for (int cj = 0; cj < N_; ++cj) {
              R t = wl * J_(ci, cj);
              NJ_(k * N_ + ci, (l - 1) * N_ + cj) -= t;
            }
        }
      }
    }
    Mat<R> LU = NJ_;
    std::vector<int> piv;
    lu_factor(LU, piv);
    for (int i = 0; i < dim; ++i) G_[i] = -G_[i];
    lu_solve(LU, piv, std::span<R>(G_.data(), G_.size()));
    update = ctx_.zero();
    for (int i = 0; i < dim; ++i) {
      R a = abs(G_[i]);
      if (a > update) update = a;
      V_[i] += G_[i];
    }
  }

  // P_0..P_deg at x in [-1,1]
  std::vector<R> legendre_values(const R& x, int deg) const {
    std::vector<R> out;
    out.reserve(deg + 1);
    R p0 = ctx_.one();
    out.push_back(p0);
    if (deg == 0) return out;
    R p1 = x;
    out.push_back(p1);
    for (int k = 2; k <= deg; ++k) {
      R p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      out.push_back(p2);
      p0 = p1;
      p1 = p2;
    }
    return out;
  }

  R lambda_deriv(int k, const R& s) const {
    // Horner on the derivative of the coefficient form
    R acc = ctx_.zero();
    for (int d = trial_.degree; d >= 1; --d) acc = acc * s + trial_.coeffs[k][d] * d;
    return acc;
  }

  Ctx ctx_;
  const ProblemDef<R>& problem_;
  SolverConfig<R> config_;
  int q_ = 1, N_ = 1, nq_ = 3;
  R tol_{};
  BasisSpec<R> trial_;
  QuadratureRule<R> rule_;
  Mat<R> W_, lam_;
  // workspaces
  std::vector<R> V_, Vnew_, fvals_, uq_, G_;
  Mat<R> J_, NJ_;
};

template <class Ctx>
Trajectory<real_of<Ctx>> solve_cg(const ProblemDef<real_of<Ctx>>& problem,
                                  const SolverConfig<real_of<Ctx>>& config,
                                  const Partition<real_of<Ctx>>& part, const Ctx& ctx) {
  using R = real_of<Ctx>;
  CgStepper<Ctx> stepper(problem, config, ctx);

  Trajectory<R> traj;
  traj.problem_label = problem.label;
  traj.q = config.q;
  traj.digits = ctx.digits();
  traj.backend = Ctx::backend_name();
  traj.poly = PiecewisePoly<R>(part, stepper.trial_basis(), problem.dim);

  std::vector<R> nodes(static_cast<size_t>(config.q + 1) * problem.dim, ctx.zero());
  Vec<R> u_left = problem.u0;
  for (long m = 0; m < part.intervals(); ++m) {
    stepper.step(m, part.node(m), part.dt(m), std::span<const R>(u_left.data(), u_left.size()),
                 std::span<R>(nodes.data(), nodes.size()));
    for (int k = 0; k <= config.q; ++k) {
      auto dst = traj.poly.node_values(m, k);
      for (int c = 0; c < problem.dim; ++c) dst[c] = nodes[static_cast<size_t>(k) * problem.dim + c];
    }
    for (int c = 0; c < problem.dim; ++c)
      u_left[c] = nodes[static_cast<size_t>(config.q) * problem.dim + c];
  }
  return traj;
}

template <class Ctx>
Trajectory<real_of<Ctx>> solve_cg(const ProblemDef<real_of<Ctx>>& problem,
                                  const SolverConfig<real_of<Ctx>>& config,
                                  const real_of<Ctx>& T, const Ctx& ctx) {
  using R = real_of<Ctx>;
  if (!(T > 0)) throw std::invalid_argument("solve_cg: T must be positive");
  if (!(config.dt > 0)) throw std::invalid_argument("solve_cg: dt must be positive");
  long M = static_cast<long>(to_double(T / config.dt) + 0.5);
  if (M < 1) M = 1;
  return solve_cg(problem, config, Partition<R>::uniform(T, M, ctx), ctx);
}

}  // namespace cgode
