// Exact integer / rational helpers shared by every module.
#pragma once

#include <gmpxx.h>

#include <cctype>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace padyn {

using Int = mpz_class;
using Rational = mpq_class;

// Error taxonomy. The CLI maps each class to a stable exit code.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct RefusalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct OracleError : std::logic_error {
    using std::logic_error::logic_error;
};

inline bool is_prime(long p) {
    if (p < 2) return false;
    for (long q = 2; q * q <= p; ++q)
        if (p % q == 0) return false;
    return true;
}

inline void require_prime(long p) {
    if (!is_prime(p)) throw InputError("not a prime: " + std::to_string(p));
}

inline Int ipow(long p, int k) {
    if (k < 0) throw std::invalid_argument("ipow: negative exponent");
    Int r;
    mpz_ui_pow_ui(r.get_mpz_t(), static_cast<unsigned long>(p), static_cast<unsigned long>(k));
    return r;
}

// n / d in lowest terms; the two-argument mpq_class constructor does not reduce.
inline Rational frac(const Int& n, const Int& d) {
    if (d == 0) throw std::domain_error("zero denominator");
    Rational q(n, d);
    q.canonicalize();
    return q;
}

inline Rational rpow(long p, int k) {
    return k >= 0 ? Rational(ipow(p, k)) : Rational(Int(1), ipow(p, -k));
}

// v_p of a nonzero integer.
inline int vp(const Int& n, long p) {
    if (n == 0) throw std::invalid_argument("vp(0)");
    Int pz = p;
    return static_cast<int>(mpz_remove(Int().get_mpz_t(), n.get_mpz_t(), pz.get_mpz_t()));
}

inline int vp(const Rational& q, long p) {
    if (q == 0) throw std::invalid_argument("vp(0)");
    return vp(q.get_num(), p) - vp(q.get_den(), p);
}

inline std::optional<int> vp_opt(const Rational& q, long p) {
    if (q == 0) return std::nullopt;
    return vp(q, p);
}

// Part of n prime to p.
inline Int strip(const Int& n, long p) {
    Int r;
    Int pz = p;
    mpz_remove(r.get_mpz_t(), n.get_mpz_t(), pz.get_mpz_t());
    return r;
}

inline Int mod(const Int& a, const Int& m) {
    Int r;
    mpz_mod(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t());
    return r;
}

inline Int inv_mod(const Int& a, const Int& m) {
    Int r;
    if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t()) == 0)
        throw std::domain_error("inv_mod: not invertible");
    return r;
}

// Residue in [0, p^k) of a rational with v_p(q) >= 0.
inline Int residue(const Rational& q, long p, int k) {
    Int m = ipow(p, k);
    if (k == 0) return 0;
    if (q == 0) return 0;
    if (vp(q.get_den(), p) > 0) throw std::domain_error("residue: non-integral rational");
    return mod(q.get_num() * inv_mod(q.get_den(), m), m);
}

// The rational t = T / p^s with 0 <= T < p^(m+s), s = max(0, -v_p(q)),
// satisfying v_p(q - t) >= m. This is the canonical truncation used as a
// ball centre.
inline Rational truncate(const Rational& q, long p, int m) {
    if (q == 0) return 0;
    int v = vp(q, p);
    if (v >= m) return 0;
    int s = v < 0 ? -v : 0;
    Rational scaled = q * Rational(ipow(p, s));
    Int T = residue(scaled, p, m + s);
    Rational t(T, ipow(p, s));
    t.canonicalize();
    return t;
}

inline std::string to_string(const Rational& q) {
    Rational c = q;
    c.canonicalize();
    return c.get_str();
}

// Accepts "n" or "n/m" (optional leading sign, decimal digits only).
inline Rational parse_rational(std::string_view s) {
    std::string t;
    for (char ch : s)
        if (!std::isspace(static_cast<unsigned char>(ch))) t.push_back(ch);
    auto digits_ok = [](std::string_view w, bool allow_sign) {
        if (w.empty()) return false;
        std::size_t i = 0;
        if (allow_sign && (w[0] == '-' || w[0] == '+')) i = 1;
        if (i == w.size()) return false;
        for (; i < w.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(w[i]))) return false;
        return true;
    };
    auto slash = t.find('/');
    std::string num = t.substr(0, slash);
    std::string den = slash == std::string::npos ? "1" : t.substr(slash + 1);
    if (!digits_ok(num, true) || !digits_ok(den, false))
        throw InputError("malformed rational: '" + std::string(s) + "'");
    if (num[0] == '+') num = num.substr(1);
    Int n(num), d(den);
    if (d == 0) throw InputError("zero denominator in '" + std::string(s) + "'");
    Rational q(n, d);
    q.canonicalize();
    return q;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

// Floor division for ints (toward -infinity).
constexpr int floor_div(int a, int b) {
    return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
}

}  // namespace padyn
