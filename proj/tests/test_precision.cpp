#include <catch2/catch_amalgamated.hpp>

#include "cgode/linalg.hpp"
#include "cgode/precision.hpp"

using namespace cgode;

TEST_CASE("context construction and unit roundoff") {
  CHECK_THROWS_AS(PrecisionContext(0), std::invalid_argument);
  CHECK_THROWS_AS(PrecisionContext(-3), std::invalid_argument);

  // eps_mach <= 10^{1-digits}
  PrecisionContext c16(16);
  CHECK(c16.eps() <= c16.make("1e-15"));

  PrecisionContext c1(1);
  CHECK(c1.eps() <= c1.one());

  // 420 requested digits deliver eps below 2.26e-424
  PrecisionContext c420(420);
  CHECK(c420.bits() >= 1408);
  CHECK(c420.eps() <= c420.make("2.26e-424"));

  PrecisionContext c64(64);
  CHECK(c64.eps() <= c64.make("1e-63"));

  NativeContext nat;
  CHECK(nat.eps() == std::ldexp(1.0, -53));
}

TEST_CASE("decimal round trip is identity") {
  PrecisionContext ctx(37);
  uint64_t state = 12345;
  auto next = [&state]() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  for (int i = 0; i < 200; ++i) {
    double mant = static_cast<double>(next() >> 11) * 0x1.0p-53 * 2 - 1;
    int expo = static_cast<int>(next() % 41) - 20;
    MpReal x = ctx.make(mant) * pow_int(ctx.make(10L), expo);
    MpReal back = ctx.make(to_string(x));
    CHECK(back == x);
  }
  CHECK(to_string(ctx.zero()) == "0");
}

TEST_CASE("arithmetic is correctly rounded against a higher-precision oracle") {
  PrecisionContext lo(24);
  PrecisionContext hi(48);
  uint64_t state = 99;
  auto next = [&state]() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  auto rnd = [&]() { return static_cast<double>(next() >> 11) * 0x1.0p-53 * 4 - 2; };
  for (int i = 0; i < 300; ++i) {
    double a = rnd(), b = rnd();
    if (b == 0) continue;
    MpReal xa = lo.make(a), xb = lo.make(b);
    MpReal ya = hi.make(a), yb = hi.make(b);
    auto check_op = [&](const MpReal& lo_res, const MpReal& hi_res) {
      // |fl(a op b) - (a op b)| <= eps |a op b|
      MpReal err = abs(hi.make(to_string(lo_res)) - hi_res);
      CHECK(err <= lo.eps() * abs(hi_res) + hi.eps());
    };
    check_op(xa + xb, ya + yb);
    check_op(xa - xb, ya - yb);
    check_op(xa * xb, ya * yb);
    check_op(xa / xb, ya / yb);
  }
}

TEST_CASE("determinism: identical operation sequences give identical bits") {
  auto run = []() {
    PrecisionContext ctx(50);
    MpReal acc = ctx.one();
    for (int i = 1; i <= 100; ++i) {
      acc = acc * i + sqrt(ctx.make(static_cast<long>(i)));
      acc /= (ctx.make(3L) / 7 + i);
    }
    return to_string(acc);
  };
  CHECK(run() == run());
}

TEST_CASE("mixing precisions is an error, not a promotion") {
  PrecisionContext a(20), b(40);
  MpReal x = a.one(), y = b.one();
  CHECK_THROWS_AS(x + y, precision_mismatch);
  CHECK_THROWS_AS(x * y, precision_mismatch);
  // comparisons are exact and allowed
  CHECK(x == y);
}

TEST_CASE("euclidean norm") {
  PrecisionContext ctx(32);
  Vec<MpReal> zero3 = {ctx.zero(), ctx.zero(), ctx.zero()};
  CHECK(is_zero(norm2(zero3)));

  Vec<MpReal> v34 = {ctx.make(3L), ctx.make(4L)};
  CHECK(norm2(v34) == ctx.make(5L));

  // ||(1,...,1)|| = sqrt(N)
  for (int n : {2, 5, 17}) {
    Vec<MpReal> ones(n, ctx.one());
    MpReal err = abs(norm2(ones) - sqrt(ctx.make(static_cast<long>(n))));
    CHECK(err <= ctx.eps() * 4);
  }
}

TEST_CASE("lu solve round trip") {
  PrecisionContext ctx(32);
  Mat<MpReal> A(3, 3, ctx.zero());
  A(0, 0) = ctx.make(2L); A(0, 1) = ctx.make(1L);  A(0, 2) = ctx.make(-1L);
  A(1, 0) = ctx.make(1L); A(1, 1) = ctx.make(3L);  A(1, 2) = ctx.make(2L);
  A(2, 0) = ctx.make(-1L); A(2, 1) = ctx.zero();   A(2, 2) = ctx.make(4L);
  Vec<MpReal> x = {ctx.make(1L), ctx.make(-2L), ctx.make(3L)};
  Vec<MpReal> b(3, ctx.zero());
  mat_vec(A, std::span<const MpReal>(x.data(), 3), std::span<MpReal>(b.data(), 3));
  Mat<MpReal> LU = A;
  std::vector<int> piv;
  lu_factor(LU, piv);
  lu_solve(LU, piv, std::span<MpReal>(b.data(), 3));
  for (int i = 0; i < 3; ++i) CHECK(abs(b[i] - x[i]) <= ctx.eps() * 32);
}

TEST_CASE("matrix exponential against scalar values") {
  PrecisionContext ctx(48);
  Mat<MpReal> A(1, 1, ctx.zero());
  A(0, 0) = ctx.make(-1L);
  Mat<MpReal> E = expm(A, ctx.one(), ctx);
  MpReal expected = exp(ctx.make(-1L));
  CHECK(abs(E(0, 0) - expected) <= ctx.eps() * abs(expected) * 16);

  // rotation is norm preserving
  Mat<MpReal> Rot(2, 2, ctx.zero());
  Rot(0, 1) = ctx.one();
  Rot(1, 0) = ctx.make(-1L);
  Mat<MpReal> ERot = expm(Rot, ctx.make("0.7"), ctx);
  Vec<MpReal> v = {ctx.one(), ctx.zero()};
  Vec<MpReal> w(2, ctx.zero());
  mat_vec(ERot, std::span<const MpReal>(v.data(), 2), std::span<MpReal>(w.data(), 2));
  CHECK(abs(norm2(w) - ctx.one()) <= ctx.eps() * 64);
}
