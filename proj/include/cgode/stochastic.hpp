#pragma once

// Monte-Carlo validation of the random round-off model: the discrete
// residual components are replaced by independent +-eps signs,
//
//   E_C = eps sum_{m,k,i} z_i(t_{m-1} + tau_k dt_m) x_{mki},
//
// and the sample RMS is compared against the exact model identity
// E[E_C^2] = eps^2 sum z_i^2 and the Theorem-3 bound S_C2 eps / sqrt(dt).
// Noise is injected at the discrete-residual level only; real-arithmetic
// round-off is exercised separately by hardware-precision solver runs.
//
// Simulation runs in binary64: the model is validated statistically, not
// at working precision. Trials draw independent substreams from
// (seed, trial index) through a SplitMix64 finalizer, so results do not
// depend on scheduling.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cgode/adjoint.hpp"
#include "cgode/fit.hpp"

namespace cgode {

struct SplitMix64 {
  uint64_t state;
  explicit SplitMix64(uint64_t seed) : state(seed) {}
  uint64_t next() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  // uniform in [0,1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline uint64_t mix64(uint64_t x) {
  x ^= x >> 30; x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27; x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

inline SplitMix64 trial_stream(uint64_t seed, uint64_t trial) {
  return SplitMix64(mix64(seed ^ mix64(trial * 0x9E3779B97F4A7C15ull + 1)));
}

struct NoiseModel {
  double eps = 1e-16;
  uint64_t seed = 0;
  double rho = 0.0;  // AR(1) sign correlation; 0 = i.i.d. signs
};

struct McResult {
  std::vector<double> samples;  // per-trial E_C
  double rms = 0;
  double mean_abs = 0;
  double variance = 0;  // sample variance (about zero mean of the model)
};

// Per-trial E_C = eps sum_j w_j x_j over a flattened weight array
// (dual values at all (m, k) nodes, all components).
inline McResult simulate_ec(const std::vector<double>& dual_weights, const NoiseModel& noise,
                            long trials) {
  if (trials < 1) throw std::invalid_argument("simulate_ec: trials >= 1");
  McResult out;
  out.samples.reserve(trials);
  const double keep_prob = (1.0 + noise.rho) / 2.0;
  double sum_sq = 0, sum_abs = 0;
  for (long t = 0; t < trials; ++t) {
    SplitMix64 g = trial_stream(noise.seed, static_cast<uint64_t>(t));
    double acc = 0;
    int sign = (g.next() >> 63) ? 1 : -1;
    bool first = true;
    for (double w : dual_weights) {
      if (!first) {
        if (noise.rho == 0.0) {
          sign = (g.next() >> 63) ? 1 : -1;
        } else if (g.uniform() >= keep_prob) {
          sign = -sign;
        }
      }
      first = false;
      acc += sign > 0 ? w : -w;
    }
    acc *= noise.eps;
    out.samples.push_back(acc);
    sum_sq += acc * acc;
    sum_abs += std::fabs(acc);
  }
  out.rms = std::sqrt(sum_sq / trials);
  out.mean_abs = sum_abs / trials;
  out.variance = sum_sq / trials;
  return out;
}

// Dual values at the testing nodes of a partition, flattened to binary64.
template <class Ctx>
std::vector<double> dual_node_weights(const DualSolution<real_of<Ctx>>& dual,
                                      const Partition<real_of<Ctx>>& part,
                                      const BasisSpec<real_of<Ctx>>& basis, const Ctx& ctx) {
  using R = real_of<Ctx>;
  const int N = dual.dim();
  std::vector<double> w;
  w.reserve(static_cast<size_t>(part.intervals()) * basis.count() * N);
  Vec<R> z(N, ctx.zero());
  for (long m = 0; m < part.intervals(); ++m) {
    for (int k = 0; k < basis.count(); ++k) {
      R t = part.node(m) + basis.nodes[k] * part.dt(m);
      dual.eval(t, std::span<R>(z.data(), N), ctx);
      for (int c = 0; c < N; ++c) w.push_back(to_double(z[c]));
    }
  }
  return w;
}

struct RmsSweepRow {
  double dt = 0;
  double rms_empirical = 0;
  double rms_model_exact = 0;  // eps sqrt(sum z_i^2)
  double bound = 0;            // S_C2 eps / sqrt(dt)
};

struct RmsSweepResult {
  std::vector<RmsSweepRow> rows;
  double slope = 0;  // log-log slope of empirical RMS vs dt
};

// RMS scaling in dt: for each uniform step size, evaluate the dual at the
// testing nodes of that partition, simulate, and compare against the exact
// model RMS and the S_C2-based bound.
template <class Ctx>
RmsSweepResult rms_scaling_sweep(const DualSolution<real_of<Ctx>>& dual,
                                 const BasisSpec<real_of<Ctx>>& basis,
                                 const std::vector<double>& dts, const real_of<Ctx>& T,
                                 const NoiseModel& noise, long trials, const Ctx& ctx) {
  using R = real_of<Ctx>;
  if (dts.size() < 3) throw std::invalid_argument("rms_scaling_sweep: need >= 3 step sizes");
  RmsSweepResult out;
  auto qrule = gauss_legendre(basis.degree + 1, ctx);  // exact for ||pi z||^2

  for (double dt : dts) {
    long M = static_cast<long>(to_double(T) / dt + 0.5);
    if (M < 1) M = 1;
    auto part = Partition<R>::uniform(T, M, ctx);
    auto weights = dual_node_weights(dual, part, basis, ctx);
    auto mc = simulate_ec(weights, noise, trials);

    double wsq = 0;
    for (double w : weights) wsq += w * w;

    // S_C2 on this partition
    R sc2 = ctx.zero();
    const int N = dual.dim();
    std::vector<R> lam(basis.count(), ctx.zero());
    Vec<R> zn(N, ctx.zero());
    std::vector<R> znod(static_cast<size_t>(basis.count()) * N, ctx.zero());
    for (long m = 0; m < part.intervals(); ++m) {
      const R a = part.node(m);
      const R h = part.dt(m);
      for (int k = 0; k < basis.count(); ++k) {
        R tk = a + basis.nodes[k] * h;
        dual.eval(tk, std::span<R>(znod.data() + static_cast<size_t>(k) * N, N), ctx);
      }
      R acc = ctx.zero();
      for (int n = 0; n < qrule.count(); ++n) {
        basis.eval_all(qrule.points[n], std::span<R>(lam.data(), lam.size()), ctx);
        for (int c = 0; c < N; ++c) {
          zn[c] = ctx.zero();
          for (int k = 0; k < basis.count(); ++k)
            fma_add(zn[c], lam[k], znod[static_cast<size_t>(k) * N + c]);
        }
        R nn = ctx.zero();
        for (int c = 0; c < N; ++c) fma_add(nn, zn[c], zn[c]);
        fma_add(acc, qrule.weights[n], nn);
      }
      fma_add(sc2, h, acc);
    }

    RmsSweepRow row;
    row.dt = dt;
    row.rms_empirical = mc.rms;
    row.rms_model_exact = noise.eps * std::sqrt(wsq);
    row.bound = to_double(sqrt(sc2)) * noise.eps / std::sqrt(to_double(part.min_dt()));
    out.rows.push_back(row);
  }

  std::vector<double> xs, ys;
  for (const auto& r : out.rows) {
    xs.push_back(r.dt);
    ys.push_back(r.rms_empirical);
  }
  out.slope = fit_loglog(xs, ys).slope;
  return out;
}

// Empirical E[|sum of M +-1 steps|].
inline double random_walk_expectation(long M, long trials, uint64_t seed) {
  if (M < 1) throw std::invalid_argument("random_walk_expectation: M >= 1");
  if (trials < 1) throw std::invalid_argument("random_walk_expectation: trials >= 1");
  double acc = 0;
  for (long t = 0; t < trials; ++t) {
    SplitMix64 g = trial_stream(seed, static_cast<uint64_t>(t));
    long pos = 0;
    long i = 0;
    while (i + 64 <= M) {
      uint64_t bits = g.next();
      pos += 2 * static_cast<long>(__builtin_popcountll(bits)) - 64;
      i += 64;
    }
    for (; i < M; ++i) pos += (g.next() >> 63) ? 1 : -1;
    acc += std::fabs(static_cast<double>(pos));
  }
  return acc / trials;
}

// Exact E[|walk|] by enumeration of all 2^M sign sequences (M <= 24).
inline double random_walk_mean_abs_exact(int M) {
  if (M < 1 || M > 24) throw std::invalid_argument("random_walk_mean_abs_exact: 1 <= M <= 24");
  const uint64_t total = 1ull << M;
  uint64_t acc = 0;
  for (uint64_t mask = 0; mask < total; ++mask) {
    int ones = __builtin_popcountll(mask);
    int pos = 2 * ones - M;
    acc += static_cast<uint64_t>(pos < 0 ? -pos : pos);
  }
  return static_cast<double>(acc) / static_cast<double>(total);
}

}  // namespace cgode
