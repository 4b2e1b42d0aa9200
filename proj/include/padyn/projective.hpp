// Points of P^1, the chordal metric, homographic maps and exact disk transport.
#pragma once

#include "padyn/arith.hpp"
#include "padyn/quadratic.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <type_traits>

namespace padyn {

// A point of P^1(F): finite value or infinity ([x:1] or [1:0]).
template <class F>
struct ProjPoint {
    std::optional<F> x;

    static ProjPoint infinity() { return {}; }
    static ProjPoint finite(F v) { return {std::move(v)}; }
    bool is_infinity() const { return !x.has_value(); }
    const F& value() const { return *x; }

    friend bool operator==(const ProjPoint& P, const ProjPoint& Q) {
        if (P.is_infinity() || Q.is_infinity()) return P.is_infinity() == Q.is_infinity();
        return *P.x == *Q.x;
    }
};

using QPoint = ProjPoint<Rational>;

inline bool is_zero(const Rational& q) { return q == 0; }
inline bool is_zero(const QuadNumber& q) { return q.is_zero(); }
inline bool is_zero(const ExtElement& q) { return q.is_zero(); }

// [[a, b], [c, d]] acting by x -> (a x + b) / (c x + d).
template <class F>
struct Mobius {
    F a, b, c, d;

    F det() const { return a * d - b * c; }

    ProjPoint<F> apply(const ProjPoint<F>& P) const {
        if (P.is_infinity()) {
            if (is_zero(c)) return ProjPoint<F>::infinity();
            return ProjPoint<F>::finite(a / c);
        }
        const F& x = P.value();
        F den = c * x + d;
        if (is_zero(den)) return ProjPoint<F>::infinity();
        return ProjPoint<F>::finite((a * x + b) / den);
    }

    // (this o other)(x) = this(other(x))
    Mobius compose(const Mobius& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
    // Adjugate: the inverse up to the scalar det.
    Mobius invert() const { return {d, -b, -c, a}; }
};

// phi(x) = (a x + b) / (c x + d) over Q, viewed over Q_p.
struct HomographicMap {
    Rational a, b, c, d;
    long p = 2;

    HomographicMap() = default;
    HomographicMap(Rational a_, Rational b_, Rational c_, Rational d_, long p_)
        : a(std::move(a_)), b(std::move(b_)), c(std::move(c_)), d(std::move(d_)), p(p_) {
        require_prime(p);
        if (det() == 0) throw InputError("singular map: ad - bc = 0");
    }

    static HomographicMap parse(const std::string& literal, long p) {
        auto parts = split(literal, ',');
        if (parts.size() != 4) throw InputError("map literal must be a,b,c,d: '" + literal + "'");
        return {parse_rational(parts[0]), parse_rational(parts[1]), parse_rational(parts[2]), parse_rational(parts[3]), p};
    }

    Rational det() const { return a * d - b * c; }
    Rational delta() const { return (d - a) * (d - a) + 4 * b * c; }
    Rational trace() const { return a + d; }
    Mobius<Rational> mobius() const { return {a, b, c, d}; }

    bool is_identity() const { return b == 0 && c == 0 && a == d; }

    QPoint apply(const QPoint& P) const { return mobius().apply(P); }
    QPoint apply(const Rational& x) const { return apply(QPoint::finite(x)); }

    HomographicMap compose(const HomographicMap& o) const {
        if (o.p != p) throw std::invalid_argument("prime mismatch");
        auto m = mobius().compose(o.mobius());
        return {m.a, m.b, m.c, m.d, p};
    }
    HomographicMap invert() const {
        auto m = mobius().invert();
        return {m.a, m.b, m.c, m.d, p};
    }
    // Same element of PGL(2): proportional matrices.
    bool same_projective(const HomographicMap& o) const {
        return a * o.b == b * o.a && a * o.c == c * o.a && a * o.d == d * o.a && b * o.c == c * o.b &&
               b * o.d == d * o.b && c * o.d == d * o.c;
    }

    std::string literal() const { return to_string(a) + "," + to_string(b) + "," + to_string(c) + "," + to_string(d); }

    nlohmann::json to_json() const {
        return {{"a", to_string(a)}, {"b", to_string(b)}, {"c", to_string(c)}, {"d", to_string(d)}, {"p", p}};
    }
    static HomographicMap from_json(const nlohmann::json& j) {
        return {parse_rational(j.at("a").get<std::string>()), parse_rational(j.at("b").get<std::string>()),
                parse_rational(j.at("c").get<std::string>()), parse_rational(j.at("d").get<std::string>()),
                j.at("p").get<long>()};
    }
};

// Chordal distance, as p^(twice_exp/2) or exactly zero.
struct ChordalValue {
    bool zero = false;
    int twice_exp = 0;
    friend bool operator==(const ChordalValue& x, const ChordalValue& y) {
        return x.zero == y.zero && (x.zero || x.twice_exp == y.twice_exp);
    }
};

// Larger-or-equal comparison of chordal values.
inline bool chordal_leq(const ChordalValue& x, const ChordalValue& y) {
    if (x.zero) return true;
    if (y.zero) return false;
    return x.twice_exp <= y.twice_exp;
}

template <class F>
ChordalValue chordal_distance(const ProjPoint<F>& P, const ProjPoint<F>& Q, long p) {
    if (P.is_infinity() && Q.is_infinity()) return {true, 0};
    if (P.is_infinity() || Q.is_infinity()) {
        const F& z = P.is_infinity() ? Q.value() : P.value();
        auto hv = half_val(z, p);
        if (!hv || *hv >= 0) return {false, 0};
        return {false, *hv};  // 1/|z|
    }
    F diff = P.value() - Q.value();
    auto hd = half_val(diff, p);
    if (!hd) return {true, 0};
    auto h1 = half_val(P.value(), p), h2 = half_val(Q.value(), p);
    int big1 = (h1 && *h1 < 0) ? -*h1 : 0;
    int big2 = (h2 && *h2 < 0) ? -*h2 : 0;
    return {false, -*hd - big1 - big2};
}

// ---------------------------------------------------------------------------
// Disk membership and equality.

template <class F>
bool disk_contains(const Disk<F>& D, const ProjPoint<F>& P, long p) {
    bool in_closed;
    if (P.is_infinity()) {
        in_closed = false;
    } else {
        auto hv = half_val(P.value() - D.center, p);
        in_closed = !hv || *hv >= -D.twice_exp;
    }
    return D.closed() ? in_closed : !in_closed;
}

template <class F>
bool disk_equal(const Disk<F>& x, const Disk<F>& y, long p) {
    if (x.kind != y.kind || x.twice_exp != y.twice_exp) return false;
    auto hv = half_val(x.center - y.center, p);
    return !hv || *hv >= -x.twice_exp;
}

// Closed disk x contained in closed disk y.
template <class F>
bool disk_subset(const Disk<F>& x, const Disk<F>& y, long p) {
    if (!x.closed() || !y.closed()) throw std::invalid_argument("disk_subset expects closed disks");
    if (x.twice_exp > y.twice_exp) return false;
    auto hv = half_val(x.center - y.center, p);
    return !hv || *hv >= -y.twice_exp;
}

namespace detail {

template <class F>
Disk<F> translate(const Disk<F>& D, const std::type_identity_t<F>& t) {
    Disk<F> r = D;
    r.center = D.center + t;
    return r;
}

template <class F>
Disk<F> scale(const Disk<F>& D, const std::type_identity_t<F>& k, long p) {
    Disk<F> r = D;
    r.center = D.center * k;
    r.twice_exp = D.twice_exp - *half_val(k, p);
    return r;
}

// Image under x -> 1/x.
template <class F>
Disk<F> invert(const Disk<F>& D, long p, const std::type_identity_t<F>& zero_like) {
    auto hv = half_val(D.center, p);
    bool contains_zero = !hv || -*hv <= D.twice_exp;
    Disk<F> r;
    if (contains_zero) {
        // 1/D(0,r) is P^1 minus the open disk of radius 1/r.
        r = Disk<F>{zero_like, -D.twice_exp - D.step, DiskKind::complement, D.step};
    } else {
        r = Disk<F>{zero_like, D.twice_exp + 2 * *hv, DiskKind::closed, D.step};
        r.center = (D.center - D.center) + (D.center / (D.center * D.center));
    }
    if (!D.closed()) r = r.complemented();
    return r;
}

}  // namespace detail

// Exact image of a disk (or complement) under a Mobius map, through the
// factorisation translation -> inversion -> scaling -> translation.
template <class F>
Disk<F> image_of_disk(const Mobius<F>& M, const Disk<F>& D, long p) {
    if (is_zero(M.det())) throw InputError("singular map");
    F zero_like = D.center - D.center;
    if (is_zero(M.c)) {
        F alpha = M.a / M.d;
        F beta = M.b / M.d;
        return detail::translate(detail::scale(D, alpha, p), beta);
    }
    F shift_in = M.d / M.c, shift_out = M.a / M.c;
    F k = (M.b * M.c - M.a * M.d) / (M.c * M.c);
    Disk<F> r = detail::translate(D, shift_in);
    r = detail::invert(r, p, zero_like);
    r = detail::scale(r, k, p);
    return detail::translate(r, shift_out);
}

inline Disk<Rational> qp_ball(const Rational& center, int radius_exp, DiskKind kind = DiskKind::closed) {
    // radius p^radius_exp
    return {center, 2 * radius_exp, kind, 2};
}

inline Disk<Rational> image_of_disk(const HomographicMap& phi, const Disk<Rational>& D) {
    return image_of_disk(phi.mobius(), D, phi.p);
}

}  // namespace padyn
