#pragma once
// Thin RAII value type over mpfr_t. Precision is per-object; in-place
// arithmetic rounds into the destination's precision (MPFR semantics).
// Hot loops in the engine use raw() and the mpfr_* API directly.

#include <mpfr.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace selfavg {

class BigFloat {
  public:
    BigFloat() { mpfr_init2(v_, 64); mpfr_set_zero(v_, 1); }
    explicit BigFloat(mpfr_prec_t prec) {
        mpfr_init2(v_, prec);
        mpfr_set_zero(v_, 1);
    }
    BigFloat(double x, mpfr_prec_t prec) {
        mpfr_init2(v_, prec);
        mpfr_set_d(v_, x, MPFR_RNDN);
    }

    BigFloat(const BigFloat& o) {
        mpfr_init2(v_, mpfr_get_prec(o.v_));
        mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    BigFloat(BigFloat&& o) noexcept {
        v_[0] = o.v_[0];
        o.v_[0]._mpfr_d = nullptr; // mark stolen
    }
    BigFloat& operator=(const BigFloat& o) {
        if (this != &o) {
            if (mpfr_get_prec(v_) != mpfr_get_prec(o.v_))
                mpfr_set_prec(v_, mpfr_get_prec(o.v_));
            mpfr_set(v_, o.v_, MPFR_RNDN);
        }
        return *this;
    }
    BigFloat& operator=(BigFloat&& o) noexcept {
        if (this != &o) {
            if (v_[0]._mpfr_d != nullptr) mpfr_clear(v_);
            v_[0] = o.v_[0];
            o.v_[0]._mpfr_d = nullptr;
        }
        return *this;
    }
    ~BigFloat() {
        if (v_[0]._mpfr_d != nullptr) mpfr_clear(v_);
    }

    mpfr_ptr raw() { return v_; }
    mpfr_srcptr raw() const { return v_; }

    mpfr_prec_t prec() const { return mpfr_get_prec(v_); }
    // Destroys the value (sets to NaN per MPFR; we reset to 0).
    void set_prec(mpfr_prec_t prec) {
        mpfr_set_prec(v_, prec);
        mpfr_set_zero(v_, 1);
    }

    BigFloat& operator=(double x) { mpfr_set_d(v_, x, MPFR_RNDN); return *this; }
    BigFloat& operator=(long x) { mpfr_set_si(v_, x, MPFR_RNDN); return *this; }
    void set_ui(unsigned long x) { mpfr_set_ui(v_, x, MPFR_RNDN); }

    double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
    bool is_zero() const { return mpfr_zero_p(v_) != 0; }
    bool is_nan() const { return mpfr_nan_p(v_) != 0; }
    int sign() const { return mpfr_sgn(v_); }

    BigFloat& operator+=(const BigFloat& o) { mpfr_add(v_, v_, o.v_, MPFR_RNDN); return *this; }
    BigFloat& operator-=(const BigFloat& o) { mpfr_sub(v_, v_, o.v_, MPFR_RNDN); return *this; }
    BigFloat& operator*=(const BigFloat& o) { mpfr_mul(v_, v_, o.v_, MPFR_RNDN); return *this; }
    BigFloat& operator/=(const BigFloat& o) { mpfr_div(v_, v_, o.v_, MPFR_RNDN); return *this; }
    BigFloat& operator+=(double x) { mpfr_add_d(v_, v_, x, MPFR_RNDN); return *this; }
    BigFloat& operator-=(double x) { mpfr_sub_d(v_, v_, x, MPFR_RNDN); return *this; }
    BigFloat& operator*=(double x) { mpfr_mul_d(v_, v_, x, MPFR_RNDN); return *this; }
    BigFloat& operator/=(double x) { mpfr_div_d(v_, v_, x, MPFR_RNDN); return *this; }

    void negate() { mpfr_neg(v_, v_, MPFR_RNDN); }
    void abs_inplace() { mpfr_abs(v_, v_, MPFR_RNDN); }

    int cmp(const BigFloat& o) const { return mpfr_cmp(v_, o.v_); }
    int cmp(double x) const { return mpfr_cmp_d(v_, x); }
    bool operator<(const BigFloat& o) const { return cmp(o) < 0; }
    bool operator<=(const BigFloat& o) const { return cmp(o) <= 0; }
    bool operator>(const BigFloat& o) const { return cmp(o) > 0; }
    bool operator>=(const BigFloat& o) const { return cmp(o) >= 0; }
    bool operator==(const BigFloat& o) const { return cmp(o) == 0; }

    // Exact round-trip representation ("0x1.8p+1" style).
    std::string to_hex() const {
        char* s = nullptr;
        mpfr_asprintf(&s, "%Ra", v_);
        std::string out(s);
        mpfr_free_str(s);
        return out;
    }
    static BigFloat from_hex(const std::string& s, mpfr_prec_t prec) {
        BigFloat r(prec);
        if (mpfr_set_str(r.v_, s.c_str(), 0, MPFR_RNDN) != 0 && r.is_nan())
            throw std::invalid_argument("BigFloat: unparseable literal: " + s);
        return r;
    }

    std::string to_decimal(int significant_digits = 17) const {
        char* s = nullptr;
        mpfr_asprintf(&s, "%.*Rg", significant_digits, v_);
        std::string out(s);
        mpfr_free_str(s);
        return out;
    }

    // log2 |x|, -inf-ish for zero; used for residual reporting.
    double log2_abs() const {
        if (mpfr_zero_p(v_)) return -1e300;
        long e = 0;
        double m = mpfr_get_d_2exp(&e, v_, MPFR_RNDN);
        return std::log2(std::abs(m)) + static_cast<double>(e);
    }

  private:
    mpfr_t v_;
};

inline BigFloat abs_diff(const BigFloat& a, const BigFloat& b, mpfr_prec_t prec) {
    BigFloat d(prec);
    mpfr_sub(d.raw(), a.raw(), b.raw(), MPFR_RNDN);
    mpfr_abs(d.raw(), d.raw(), MPFR_RNDN);
    return d;
}

} // namespace selfavg
