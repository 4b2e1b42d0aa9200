// Elements of Q_p at a fixed number of significant digits.
#pragma once

#include "padyn/arith.hpp"

#include <json.hpp>

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace padyn {

inline constexpr int kDefaultPrecision = 64;

class PadicNumber {
public:
    // Zero, known exactly (no absolute-precision bound).
    static PadicNumber zero(long p, int precision = kDefaultPrecision) {
        require_prime(p);
        PadicNumber z;
        z.p_ = p;
        z.prec_ = precision;
        z.exact_ = Rational(0);
        return z;
    }

    static PadicNumber from_rational(const Rational& q, long p, int precision = kDefaultPrecision) {
        require_prime(p);
        if (precision < 1) throw InputError("precision must be >= 1");
        if (q == 0) return zero(p, precision);
        PadicNumber x;
        x.p_ = p;
        x.prec_ = precision;
        int v = vp(q, p);
        x.val_ = v;
        Rational u = q / rpow(p, v);
        x.unit_ = residue(u, p, precision);
        x.exact_ = q;
        return x;
    }

    // p^valuation * unit, unit taken modulo p^precision (must be prime to p).
    static PadicNumber from_parts(long p, int valuation, const Int& unit, int precision) {
        require_prime(p);
        if (precision < 1) throw InputError("precision must be >= 1");
        PadicNumber x;
        x.p_ = p;
        x.prec_ = precision;
        x.val_ = valuation;
        x.unit_ = mod(unit, ipow(p, precision));
        if (mod(x.unit_, Int(p)) == 0) throw InputError("from_parts: unit divisible by p");
        return x;
    }

    static PadicNumber from_digits(long p, int valuation, const std::vector<int>& digits) {
        require_prime(p);
        if (digits.empty()) throw InputError("from_digits: empty digit list");
        Int u = 0, pk = 1;
        for (int d : digits) {
            if (d < 0 || d >= p) throw InputError("digit out of range");
            u += pk * d;
            pk *= p;
        }
        return from_parts(p, valuation, u, static_cast<int>(digits.size()));
    }

    // Zero known only modulo p^abs.
    static PadicNumber approximate_zero(long p, int abs, int precision) {
        PadicNumber z = zero(p, precision);
        z.exact_.reset();
        z.zero_abs_ = abs;
        return z;
    }

    long prime() const { return p_; }
    bool is_zero() const { return !val_.has_value(); }
    std::optional<int> valuation() const { return val_; }
    int precision() const { return prec_; }
    const Int& unit() const { return unit_; }
    const std::optional<Rational>& exact() const { return exact_; }

    // Exponent n with the value known modulo p^n.
    int absolute_precision() const {
        if (val_) return *val_ + prec_;
        if (zero_abs_) return *zero_abs_;
        return std::numeric_limits<int>::max();
    }

    std::vector<int> digits() const {
        std::vector<int> out;
        if (is_zero()) return out;
        Int u = unit_;
        Int pz = p_;
        for (int i = 0; i < prec_; ++i) {
            Int d = mod(u, pz);
            out.push_back(static_cast<int>(d.get_si()));
            u = (u - d) / pz;
        }
        return out;
    }

    // The rational p^v * unit (the truncation carried by the digits).
    Rational truncated_value() const {
        if (is_zero()) return 0;
        return Rational(unit_) * rpow(p_, *val_);
    }

    // Best rational to use downstream: exact if retained, else the truncation.
    Rational value_hint() const { return exact_ ? *exact_ : truncated_value(); }

    PadicNumber operator-() const {
        if (is_zero()) return *this;
        PadicNumber r = *this;
        r.unit_ = mod(-unit_, ipow(p_, prec_));
        if (exact_) r.exact_ = -*exact_;
        return r;
    }

    friend PadicNumber operator+(const PadicNumber& x, const PadicNumber& y) {
        same_prime(x, y);
        if (x.is_zero() && !x.zero_abs_) return y.with_exact_sum(x);
        if (y.is_zero() && !y.zero_abs_) return x.with_exact_sum(y);
        long p = x.p_;
        int A = std::min(x.absolute_precision(), y.absolute_precision());
        int prec_out = std::max(x.prec_, y.prec_);
        std::optional<Rational> ex;
        if (x.exact_ && y.exact_) ex = *x.exact_ + *y.exact_;
        if (x.is_zero() || y.is_zero()) {
            // One side is an approximate zero: the other survives, capped at A.
            const PadicNumber& nz = x.is_zero() ? y : x;
            if (nz.is_zero() || *nz.val_ >= A) {
                PadicNumber z = approximate_zero(p, A, prec_out);
                z.exact_ = ex;
                return z;
            }
            PadicNumber r = nz;
            r.prec_ = std::min(nz.prec_, A - *nz.val_);
            r.unit_ = mod(r.unit_, ipow(p, r.prec_));
            r.exact_ = ex;
            return r;
        }
        int v = std::min(*x.val_, *y.val_);
        if (A <= v) {
            PadicNumber z = approximate_zero(p, A, prec_out);
            z.exact_ = ex;
            return z;
        }
        Int m = ipow(p, A - v);
        Int s = x.unit_ * ipow(p, *x.val_ - v) + y.unit_ * ipow(p, *y.val_ - v);
        s = mod(s, m);
        if (s == 0) {
            PadicNumber z = approximate_zero(p, A, prec_out);
            z.exact_ = ex;
            if (ex && *ex == 0) z.zero_abs_.reset();
            return z;
        }
        int w = vp(s, p);
        PadicNumber r;
        r.p_ = p;
        r.val_ = v + w;
        r.prec_ = A - v - w;
        r.unit_ = mod(s / ipow(p, w), ipow(p, r.prec_));
        r.exact_ = ex;
        return r;
    }

    friend PadicNumber operator-(const PadicNumber& x, const PadicNumber& y) { return x + (-y); }

    friend PadicNumber operator*(const PadicNumber& x, const PadicNumber& y) {
        same_prime(x, y);
        long p = x.p_;
        std::optional<Rational> ex;
        if (x.exact_ && y.exact_) ex = *x.exact_ * *y.exact_;
        if (x.is_zero() || y.is_zero()) {
            const PadicNumber& z = x.is_zero() ? x : y;
            const PadicNumber& o = x.is_zero() ? y : x;
            if (!z.zero_abs_) return zero(p, std::max(x.prec_, y.prec_));
            // (0 mod p^A) * o is zero mod p^(A + v(o)).
            int shift = o.is_zero() ? (o.zero_abs_ ? *o.zero_abs_ : 0) : *o.val_;
            PadicNumber r = approximate_zero(p, *z.zero_abs_ + shift, std::max(x.prec_, y.prec_));
            r.exact_ = ex;
            return r;
        }
        PadicNumber r;
        r.p_ = p;
        r.val_ = *x.val_ + *y.val_;
        r.prec_ = std::min(x.prec_, y.prec_);
        r.unit_ = mod(x.unit_ * y.unit_, ipow(p, r.prec_));
        r.exact_ = ex;
        return r;
    }

    friend PadicNumber operator/(const PadicNumber& x, const PadicNumber& y) {
        same_prime(x, y);
        if (y.is_zero()) throw std::domain_error("p-adic division by zero");
        long p = x.p_;
        std::optional<Rational> ex;
        if (x.exact_ && y.exact_) ex = *x.exact_ / *y.exact_;
        if (x.is_zero()) {
            if (!x.zero_abs_) return zero(p, std::max(x.prec_, y.prec_));
            PadicNumber r = approximate_zero(p, *x.zero_abs_ - *y.val_, std::max(x.prec_, y.prec_));
            r.exact_ = ex;
            return r;
        }
        PadicNumber r;
        r.p_ = p;
        r.val_ = *x.val_ - *y.val_;
        r.prec_ = std::min(x.prec_, y.prec_);
        Int m = ipow(p, r.prec_);
        r.unit_ = mod(x.unit_ * inv_mod(y.unit_, m), m);
        r.exact_ = ex;
        return r;
    }

    PadicNumber pow(unsigned n) const {
        PadicNumber r = from_rational(1, p_, prec_);
        PadicNumber b = *this;
        while (n) {
            if (n & 1u) r = r * b;
            b = b * b;
            n >>= 1u;
        }
        return r;
    }

    // Text form "p^v * (d0 + d1*p + d2*p^2 + ... + O(p^n))"; zero is "0 + O(p^n)" or "0".
    std::string to_text() const {
        std::ostringstream os;
        if (is_zero()) {
            if (zero_abs_)
                os << "0 + O(" << p_ << "^" << *zero_abs_ << ")";
            else
                os << "0 [p=" << p_ << ", prec=" << prec_ << "]";
            return os.str();
        }
        os << p_ << "^" << *val_ << " * (";
        auto ds = digits();
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (i) os << " + ";
            os << ds[i];
            if (i == 1) os << "*" << p_;
            if (i >= 2) os << "*" << p_ << "^" << i;
        }
        os << " + O(" << p_ << "^" << prec_ << "))";
        return os.str();
    }

    static PadicNumber from_text(const std::string& s) {
        // Zero forms.
        if (s.rfind("0 + O(", 0) == 0) {
            long p;
            int a;
            if (std::sscanf(s.c_str(), "0 + O(%ld^%d)", &p, &a) != 2) throw InputError("bad p-adic text");
            return approximate_zero(p, a, std::max(a, 1));
        }
        if (s.rfind("0 [p=", 0) == 0) {
            long p;
            int prec;
            if (std::sscanf(s.c_str(), "0 [p=%ld, prec=%d]", &p, &prec) != 2) throw InputError("bad p-adic text");
            return zero(p, prec);
        }
        long p;
        int v;
        int consumed = 0;
        if (std::sscanf(s.c_str(), "%ld^%d * (%n", &p, &v, &consumed) != 2 || consumed == 0)
            throw InputError("bad p-adic text: " + s);
        std::string body = s.substr(static_cast<std::size_t>(consumed));
        auto terms = split(body, '+');
        std::vector<int> ds;
        int prec = -1;
        for (auto& t : terms) {
            std::string w;
            for (char ch : t)
                if (ch != ' ') w.push_back(ch);
            if (w.rfind("O(", 0) == 0) {
                long pp;
                if (std::sscanf(w.c_str(), "O(%ld^%d))", &pp, &prec) != 2 || pp != p)
                    throw InputError("bad precision term in p-adic text");
                continue;
            }
            auto star = w.find('*');
            ds.push_back(std::stoi(w.substr(0, star)));
        }
        if (prec != static_cast<int>(ds.size())) throw InputError("digit count does not match precision");
        return from_digits(p, v, ds);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["p"] = p_;
        if (is_zero())
            j["valuation"] = nullptr;
        else
            j["valuation"] = *val_;
        j["digits"] = digits();
        j["precision"] = prec_;
        return j;
    }

    static PadicNumber from_json(const nlohmann::json& j) {
        long p = j.at("p").get<long>();
        int prec = j.at("precision").get<int>();
        if (j.at("valuation").is_null()) return zero(p, prec);
        auto ds = j.at("digits").get<std::vector<int>>();
        if (static_cast<int>(ds.size()) != prec) throw InputError("digit count does not match precision");
        return from_digits(p, j.at("valuation").get<int>(), ds);
    }

private:
    static void same_prime(const PadicNumber& x, const PadicNumber& y) {
        if (x.p_ != y.p_) throw std::invalid_argument("prime mismatch");
    }
    PadicNumber with_exact_sum(const PadicNumber& exact_zero) const {
        PadicNumber r = *this;
        if (r.exact_ && exact_zero.exact_) r.exact_ = *r.exact_ + *exact_zero.exact_;
        else r.exact_.reset();
        return r;
    }

    long p_ = 2;
    std::optional<int> val_;
    Int unit_ = 0;
    int prec_ = kDefaultPrecision;
    std::optional<int> zero_abs_;
    std::optional<Rational> exact_;
};

// v_p(x - y) >= n, decided only from guaranteed digits.
inline bool equal_to_precision(const PadicNumber& x, const PadicNumber& y, int n) {
    PadicNumber d = x - y;
    if (d.is_zero()) return d.absolute_precision() >= n;
    return *d.valuation() >= n;
}

// u must be a unit; decided mod p (odd p) or mod 8 (p = 2).
inline bool is_quadratic_residue(const Int& u, long p) {
    require_prime(p);
    if (p == 2) {
        if (mod(u, Int(2)) == 0) throw InputError("not a unit");
        return mod(u, Int(8)) == 1;
    }
    Int r = mod(u, Int(p));
    if (r == 0) throw InputError("not a unit");
    Int e;
    mpz_powm_ui(e.get_mpz_t(), r.get_mpz_t(), static_cast<unsigned long>((p - 1) / 2), Int(p).get_mpz_t());
    return e == 1;
}

inline bool is_quadratic_residue(long u, long p) { return is_quadratic_residue(Int(u), p); }

// Square root in Q_p, normalised so that its digit string is the
// lexicographically smaller of the two roots (smaller leading digit for odd p).
inline std::optional<PadicNumber> sqrt_in_qp(const PadicNumber& a) {
    long p = a.prime();
    if (a.is_zero()) return a;
    int v = *a.valuation();
    if (v % 2 != 0) return std::nullopt;
    const Int& u = a.unit();
    int N = a.precision();
    if (p == 2 && N < 3) throw InputError("sqrt over Q_2 needs at least 3 significant digits");
    if (!is_quadratic_residue(u, p)) return std::nullopt;

    Int r;
    int out_prec;
    if (p != 2) {
        Int pz = p;
        Int u0 = mod(u, pz);
        long r0 = 1;
        while (mod(Int(r0) * r0 - u0, pz) != 0) ++r0;
        r = r0;
        // Newton: r <- r - (r^2 - u) / (2r), doubling correct digits each step.
        int k = 1;
        while (k < N) {
            k = std::min(2 * k, N);
            Int m = ipow(p, k);
            r = mod(r - (r * r - u) * inv_mod(2 * r, m), m);
        }
        out_prec = N;
        Int m = ipow(p, out_prec);
        Int other = mod(-r, m);
        if (mod(other, pz) < mod(r, pz)) r = other;
    } else {
        // Bitwise lift: r^2 = u mod 2^N fixes r modulo 2^(N-1).
        r = 1;
        for (int k = 3; k < N; ++k) {
            Int t = r * r - u;
            Int q = t / ipow(2, k);
            if (mod(t, ipow(2, k)) != 0) throw std::logic_error("sqrt lift invariant broken");
            if (mod(q, Int(2)) != 0) r += ipow(2, k - 1);
        }
        out_prec = N - 1;
        Int m = ipow(2, out_prec);
        r = mod(r, m);
        if (out_prec >= 2 && mod(r, Int(4)) == 3) r = mod(-r, m);
    }
    PadicNumber root = PadicNumber::from_parts(p, v / 2, r, out_prec);
    if (a.exact()) {
        const Rational& q = *a.exact();
        Int nn = q.get_num(), dd = q.get_den();
        if (nn > 0 && mpz_perfect_square_p(nn.get_mpz_t()) && mpz_perfect_square_p(dd.get_mpz_t())) {
            Rational s(sqrt(nn), sqrt(dd));
            for (const Rational& cand : {s, Rational(-s)}) {
                PadicNumber c = PadicNumber::from_rational(cand, p, out_prec);
                if (c.unit() == root.unit()) return c;
            }
        }
    }
    return root;
}

}  // namespace padyn
