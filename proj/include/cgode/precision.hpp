#pragma once

// Arbitrary-precision real scalars on top of MPFR, plus the precision
// contexts that every other component is parameterized over.
//
// Two interchangeable context types exist:
//   PrecisionContext — MPFR at a binary precision derived from a requested
//                      decimal digit count (see bits_for_digits),
//   NativeContext    — IEEE binary64, used for hardware-precision (16-digit)
//                      experiments where MPFR would be orders of magnitude
//                      too slow.
// All arithmetic is round-to-nearest-even. Mixing scalars of different
// precision in one operation throws precision_mismatch; there is no silent
// promotion.

#include <mpfr.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace cgode {

class precision_mismatch : public std::logic_error {
 public:
  explicit precision_mismatch(const std::string& what) : std::logic_error(what) {}
};

class MpReal {
 public:
  MpReal() { mpfr_init2(v_, MPFR_PREC_MIN); mpfr_set_zero(v_, 1); }
  explicit MpReal(mpfr_prec_t prec) { mpfr_init2(v_, prec); mpfr_set_zero(v_, 1); }

  MpReal(const MpReal& o) {
    mpfr_init2(v_, mpfr_get_prec(o.v_));
    mpfr_set(v_, o.v_, MPFR_RNDN);
  }
  MpReal(MpReal&& o) noexcept {
    mpfr_init2(v_, MPFR_PREC_MIN);
    mpfr_swap(v_, o.v_);
  }
  MpReal& operator=(const MpReal& o) {
    if (this != &o) {
      mpfr_set_prec(v_, mpfr_get_prec(o.v_));
      mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    return *this;
  }
  MpReal& operator=(MpReal&& o) noexcept {
    if (this != &o) mpfr_swap(v_, o.v_);
    return *this;
  }
  ~MpReal() { mpfr_clear(v_); }

  mpfr_prec_t prec() const { return mpfr_get_prec(v_); }
  mpfr_ptr raw() { return v_; }
  mpfr_srcptr raw() const { return v_; }

  int sign() const { return mpfr_sgn(v_); }
  bool is_zero() const { return mpfr_zero_p(v_) != 0; }
  bool is_finite() const { return mpfr_number_p(v_) != 0; }

  // -- arithmetic (checked: both operands must share one precision) --

  friend MpReal operator+(const MpReal& a, const MpReal& b) {
    MpReal r(a.matched(b));
    mpfr_add(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend MpReal operator-(const MpReal& a, const MpReal& b) {
    MpReal r(a.matched(b));
    mpfr_sub(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend MpReal operator*(const MpReal& a, const MpReal& b) {
    MpReal r(a.matched(b));
    mpfr_mul(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  friend MpReal operator/(const MpReal& a, const MpReal& b) {
    MpReal r(a.matched(b));
    mpfr_div(r.v_, a.v_, b.v_, MPFR_RNDN);
    return r;
  }
  MpReal operator-() const {
    MpReal r(prec());
    mpfr_neg(r.v_, v_, MPFR_RNDN);
    return r;
  }

  MpReal& operator+=(const MpReal& o) { matched(o); mpfr_add(v_, v_, o.v_, MPFR_RNDN); return *this; }
  MpReal& operator-=(const MpReal& o) { matched(o); mpfr_sub(v_, v_, o.v_, MPFR_RNDN); return *this; }
  MpReal& operator*=(const MpReal& o) { matched(o); mpfr_mul(v_, v_, o.v_, MPFR_RNDN); return *this; }
  MpReal& operator/=(const MpReal& o) { matched(o); mpfr_div(v_, v_, o.v_, MPFR_RNDN); return *this; }

  // Exact integer operands are always permitted (no context is needed to
  // represent them; the result keeps the scalar's precision).
  friend MpReal operator+(const MpReal& a, long b) { MpReal r(a.prec()); mpfr_add_si(r.v_, a.v_, b, MPFR_RNDN); return r; }
  friend MpReal operator-(const MpReal& a, long b) { MpReal r(a.prec()); mpfr_sub_si(r.v_, a.v_, b, MPFR_RNDN); return r; }
  friend MpReal operator*(const MpReal& a, long b) { MpReal r(a.prec()); mpfr_mul_si(r.v_, a.v_, b, MPFR_RNDN); return r; }
  friend MpReal operator/(const MpReal& a, long b) { MpReal r(a.prec()); mpfr_div_si(r.v_, a.v_, b, MPFR_RNDN); return r; }
  friend MpReal operator+(long b, const MpReal& a) { return a + b; }
  friend MpReal operator*(long b, const MpReal& a) { return a * b; }
  friend MpReal operator-(long b, const MpReal& a) { MpReal r(a.prec()); mpfr_si_sub(r.v_, b, a.v_, MPFR_RNDN); return r; }
  friend MpReal operator/(long b, const MpReal& a) { MpReal r(a.prec()); mpfr_si_div(r.v_, b, a.v_, MPFR_RNDN); return r; }
  MpReal& operator+=(long b) { mpfr_add_si(v_, v_, b, MPFR_RNDN); return *this; }
  MpReal& operator-=(long b) { mpfr_sub_si(v_, v_, b, MPFR_RNDN); return *this; }
  MpReal& operator*=(long b) { mpfr_mul_si(v_, v_, b, MPFR_RNDN); return *this; }
  MpReal& operator/=(long b) { mpfr_div_si(v_, v_, b, MPFR_RNDN); return *this; }

  // -- comparisons (exact, no rounding; any precisions may be compared) --
  friend bool operator==(const MpReal& a, const MpReal& b) { return mpfr_equal_p(a.v_, b.v_) != 0; }
  friend bool operator!=(const MpReal& a, const MpReal& b) { return mpfr_equal_p(a.v_, b.v_) == 0; }
  friend bool operator<(const MpReal& a, const MpReal& b) { return mpfr_less_p(a.v_, b.v_) != 0; }
  friend bool operator<=(const MpReal& a, const MpReal& b) { return mpfr_lessequal_p(a.v_, b.v_) != 0; }
  friend bool operator>(const MpReal& a, const MpReal& b) { return mpfr_greater_p(a.v_, b.v_) != 0; }
  friend bool operator>=(const MpReal& a, const MpReal& b) { return mpfr_greaterequal_p(a.v_, b.v_) != 0; }
  friend bool operator==(const MpReal& a, long b) { return mpfr_cmp_si(a.v_, b) == 0; }
  friend bool operator<(const MpReal& a, long b) { return mpfr_cmp_si(a.v_, b) < 0; }
  friend bool operator>(const MpReal& a, long b) { return mpfr_cmp_si(a.v_, b) > 0; }
  friend bool operator<=(const MpReal& a, long b) { return mpfr_cmp_si(a.v_, b) <= 0; }
  friend bool operator>=(const MpReal& a, long b) { return mpfr_cmp_si(a.v_, b) >= 0; }

 private:
  MpReal matched(const MpReal& o) const {
    if (prec() != o.prec())
      throw precision_mismatch("operands carry different precisions (" +
                               std::to_string(prec()) + " vs " +
                               std::to_string(o.prec()) + " bits)");
    return MpReal(prec());
  }
  mpfr_t v_;
};

inline MpReal sqrt(const MpReal& x) { MpReal r(x.prec()); mpfr_sqrt(r.raw(), x.raw(), MPFR_RNDN); return r; }
inline MpReal abs(const MpReal& x) { MpReal r(x.prec()); mpfr_abs(r.raw(), x.raw(), MPFR_RNDN); return r; }
inline MpReal exp(const MpReal& x) { MpReal r(x.prec()); mpfr_exp(r.raw(), x.raw(), MPFR_RNDN); return r; }
inline MpReal log(const MpReal& x) { MpReal r(x.prec()); mpfr_log(r.raw(), x.raw(), MPFR_RNDN); return r; }
inline MpReal log10(const MpReal& x) { MpReal r(x.prec()); mpfr_log10(r.raw(), x.raw(), MPFR_RNDN); return r; }
inline MpReal sin(const MpReal& x) { MpReal r(x.prec()); mpfr_sin(r.raw(), x.raw(), MPFR_RNDN); return r; }
inline MpReal cos(const MpReal& x) { MpReal r(x.prec()); mpfr_cos(r.raw(), x.raw(), MPFR_RNDN); return r; }
inline MpReal pow_int(const MpReal& x, long e) { MpReal r(x.prec()); mpfr_pow_si(r.raw(), x.raw(), e, MPFR_RNDN); return r; }
inline MpReal pow(const MpReal& x, const MpReal& e) {
  MpReal r(x.prec());
  mpfr_pow(r.raw(), x.raw(), e.raw(), MPFR_RNDN);
  return r;
}
// acc <- acc + a*b with a single rounding
inline void fma_add(MpReal& acc, const MpReal& a, const MpReal& b) {
  mpfr_fma(acc.raw(), a.raw(), b.raw(), acc.raw(), MPFR_RNDN);
}
inline double to_double(const MpReal& x) { return mpfr_get_d(x.raw(), MPFR_RNDN); }
inline bool is_zero(const MpReal& x) { return x.is_zero(); }
inline bool is_finite(const MpReal& x) { return x.is_finite(); }

// Shortest decimal string that parses back to the identical value
// (scientific notation, explicit sign on the exponent).
inline std::string to_string(const MpReal& x) {
  if (x.is_zero()) return "0";
  mpfr_exp_t e;
  char* s = mpfr_get_str(nullptr, &e, 10, 0, x.raw(), MPFR_RNDN);
  std::string digits(s);
  mpfr_free_str(s);
  std::string sign;
  if (digits[0] == '-') {
    sign = "-";
    digits.erase(0, 1);
  }
  // digits are 0.d1d2... * 10^e; rewrite as d1.d2... * 10^(e-1)
  std::string out = sign + digits.substr(0, 1);
  if (digits.size() > 1) out += "." + digits.substr(1);
  long ee = static_cast<long>(e) - 1;
  out += "e";
  if (ee >= 0) out += "+";
  out += std::to_string(ee);
  return out;
}

// double overloads so templated code can use the same vocabulary
inline double sqrt(double x) { return std::sqrt(x); }
inline double abs(double x) { return std::fabs(x); }
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double log10(double x) { return std::log10(x); }
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double pow_int(double x, long e) { return std::pow(x, static_cast<double>(e)); }
inline double pow(double x, double e) { return std::pow(x, e); }
inline void fma_add(double& acc, double a, double b) { acc = std::fma(a, b, acc); }
inline double to_double(double x) { return x; }
inline bool is_zero(double x) { return x == 0.0; }
inline bool is_finite(double x) { return std::isfinite(x); }
inline std::string to_string(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// MPFR context at a precision derived from a requested decimal digit count.
//
// The mapping quantizes to whole 64-bit limbs the way GMP allocates:
//   bits(d) = 64 * ceil(ceil(d * log2 10) / 64)
// so the delivered precision is somewhat higher than requested (420 digits
// -> 1408 bits, unit roundoff 1.41e-424). eps_mach is the unit roundoff
// 2^-bits of the delivered binary precision, not of the decimal request.
class PrecisionContext {
 public:
  using Real = MpReal;

  explicit PrecisionContext(int digits) : digits_(digits) {
    if (digits < 1) throw std::invalid_argument("PrecisionContext: digits must be >= 1");
    bits_ = bits_for_digits(digits);
  }

  static long bits_for_digits(int digits) {
    long raw = static_cast<long>(std::ceil(static_cast<long double>(digits) *
                                           3.32192809488736234787L));
    return 64 * ((raw + 63) / 64);
  }

  int digits() const { return digits_; }
  long bits() const { return bits_; }

  MpReal make(long v) const {
    MpReal r(bits_);
    mpfr_set_si(r.raw(), v, MPFR_RNDN);
    return r;
  }
  MpReal make(int v) const { return make(static_cast<long>(v)); }
  MpReal make(double v) const {
    MpReal r(bits_);
    mpfr_set_d(r.raw(), v, MPFR_RNDN);
    return r;
  }
  MpReal make(std::string_view s) const {
    MpReal r(bits_);
    if (mpfr_set_str(r.raw(), std::string(s).c_str(), 10, MPFR_RNDN) != 0)
      throw std::invalid_argument("PrecisionContext: unparsable decimal '" + std::string(s) + "'");
    return r;
  }
  MpReal zero() const { return make(0L); }
  MpReal one() const { return make(1L); }

  // unit roundoff of the delivered binary precision
  MpReal eps() const {
    MpReal r(bits_);
    mpfr_set_ui_2exp(r.raw(), 1, -bits_, MPFR_RNDN);
    return r;
  }
  double log10_eps() const { return -static_cast<double>(bits_) * 0.30102999566398119521; }

  std::string describe() const {
    return "mpfr(digits=" + std::to_string(digits_) + ", bits=" + std::to_string(bits_) + ")";
  }
  static constexpr const char* backend_name() { return "mpfr"; }

 private:
  int digits_;
  long bits_;
};

// IEEE binary64 context: the hardware-precision lane for 16-digit runs.
struct NativeContext {
  using Real = double;

  int digits() const { return 16; }
  long bits() const { return 53; }
  double make(long v) const { return static_cast<double>(v); }
  double make(int v) const { return static_cast<double>(v); }
  double make(double v) const { return v; }
  double make(std::string_view s) const { return std::stod(std::string(s)); }
  double zero() const { return 0.0; }
  double one() const { return 1.0; }
  double eps() const { return std::ldexp(1.0, -53); }
  double log10_eps() const { return -53 * 0.30102999566398119521; }
  std::string describe() const { return "native(binary64)"; }
  static constexpr const char* backend_name() { return "native"; }
};

template <class Ctx>
using real_of = typename Ctx::Real;

}  // namespace cgode
