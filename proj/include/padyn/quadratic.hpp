// Quadratic extensions K = Q_p(sqrt d): canonical radicands, elements,
// the pi-valuation through the norm, distances to Q_p and sub-disk counts.
#pragma once

#include "padyn/arith.hpp"
#include "padyn/padic.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace padyn {

// ---------------------------------------------------------------------------
// Exact numbers a + b*sqrt(D) in the number field Q(sqrt D), D a non-square
// integer. Used wherever exactness matters (fixed points, lambda, disk
// centres); p-adic information is read off the norm.
struct QuadNumber {
    Rational a = 0, b = 0;
    Int D = 0;

    QuadNumber() = default;
    QuadNumber(Rational a_, Rational b_, Int D_) : a(std::move(a_)), b(std::move(b_)), D(std::move(D_)) {}
    static QuadNumber rational(const Rational& q, const Int& D) { return {q, 0, D}; }

    bool is_zero() const { return a == 0 && b == 0; }
    bool is_rational() const { return b == 0; }
    Rational norm() const { return a * a - Rational(D) * b * b; }
    Rational trace() const { return 2 * a; }
    QuadNumber conj() const { return {a, -b, D}; }

    friend QuadNumber operator+(const QuadNumber& x, const QuadNumber& y) { return {x.a + y.a, x.b + y.b, pick(x, y)}; }
    friend QuadNumber operator-(const QuadNumber& x, const QuadNumber& y) { return {x.a - y.a, x.b - y.b, pick(x, y)}; }
    QuadNumber operator-() const { return {-a, -b, D}; }
    friend QuadNumber operator*(const QuadNumber& x, const QuadNumber& y) {
        Int D = pick(x, y);
        return {x.a * y.a + Rational(D) * x.b * y.b, x.a * y.b + x.b * y.a, D};
    }
    friend QuadNumber operator/(const QuadNumber& x, const QuadNumber& y) {
        Rational n = y.norm();
        if (n == 0) throw std::domain_error("division by zero in Q(sqrt D)");
        QuadNumber t = x * y.conj();
        return {t.a / n, t.b / n, t.D};
    }
    friend bool operator==(const QuadNumber& x, const QuadNumber& y) { return x.a == y.a && x.b == y.b; }
    friend bool operator!=(const QuadNumber& x, const QuadNumber& y) { return !(x == y); }

    QuadNumber pow(unsigned long n) const {
        QuadNumber r{1, 0, D}, base = *this;
        while (n) {
            if (n & 1ul) r = r * base;
            base = base * base;
            n >>= 1ul;
        }
        return r;
    }

    std::string to_string() const {
        if (b == 0) return padyn::to_string(a);
        std::string s = a == 0 ? "" : padyn::to_string(a) + (b > 0 ? "+" : "");
        return s + padyn::to_string(b) + "*sqrt(" + D.get_str() + ")";
    }

private:
    static const Int& pick(const QuadNumber& x, const QuadNumber& y) {
        if (x.D != 0 && y.D != 0 && x.D != y.D) throw std::invalid_argument("radicand mismatch");
        return x.D != 0 ? x.D : y.D;
    }
};

// Twice the p-adic valuation, read from the norm. Only meaningful when
// sqrt(D) is not in Q_p (the norm then has even-or-odd valuation 2*v_p(x)).
inline std::optional<int> half_val(const QuadNumber& x, long p) {
    if (x.is_zero()) return std::nullopt;
    if (x.b == 0) return 2 * vp(x.a, p);
    return vp(x.norm(), p);
}

inline std::optional<int> half_val(const Rational& x, long p) {
    if (x == 0) return std::nullopt;
    return 2 * vp(x, p);
}

// ---------------------------------------------------------------------------
enum class UniformizerKind { p, sqrt_d, one_plus_sqrt_d };

inline const char* to_string(UniformizerKind k) {
    switch (k) {
        case UniformizerKind::p: return "p";
        case UniformizerKind::sqrt_d: return "sqrt_d";
        case UniformizerKind::one_plus_sqrt_d: return "one_plus_sqrt_d";
    }
    return "?";
}

inline long least_nonresidue(long p) {
    if (p == 2) throw InputError("least non-residue is defined for odd p");
    for (long n = 2; n < p; ++n)
        if (!is_quadratic_residue(n, p)) return n;
    throw std::logic_error("no non-residue found");
}

struct CanonicalRadicand {
    long p = 3;
    long cls = 0;  // the canonical d
    long np = 0;   // N_p for odd p, 0 for p = 2
    int e = 1;
    int f = 2;
    UniformizerKind uniformizer = UniformizerKind::p;

    bool ramified() const { return e == 2; }

    static CanonicalRadicand make(long p, long cls) {
        require_prime(p);
        CanonicalRadicand r;
        r.p = p;
        r.cls = cls;
        if (p == 2) {
            static const long allowed[] = {-1, 2, -2, 3, -3, 6, -6};
            bool ok = false;
            for (long a : allowed) ok = ok || a == cls;
            if (!ok) throw InputError("not a canonical class for p=2: " + std::to_string(cls));
            r.e = cls == -3 ? 1 : 2;
            r.uniformizer = cls == -3 ? UniformizerKind::p
                            : (cls == -1 || cls == 3) ? UniformizerKind::one_plus_sqrt_d
                                                      : UniformizerKind::sqrt_d;
        } else {
            r.np = least_nonresidue(p);
            if (cls != r.np && cls != p && cls != p * r.np)
                throw InputError("not a canonical class for p=" + std::to_string(p) + ": " + std::to_string(cls));
            r.e = cls == r.np ? 1 : 2;
            r.uniformizer = r.e == 1 ? UniformizerKind::p : UniformizerKind::sqrt_d;
        }
        r.f = 2 / r.e;
        return r;
    }

    static std::vector<CanonicalRadicand> all(long p) {
        std::vector<CanonicalRadicand> out;
        if (p == 2) {
            for (long c : {-1L, 2L, -2L, 3L, -3L, 6L, -6L}) out.push_back(make(2, c));
        } else {
            long n = least_nonresidue(p);
            for (long c : {n, p, p * n}) out.push_back(make(p, c));
        }
        return out;
    }

    friend bool operator==(const CanonicalRadicand& x, const CanonicalRadicand& y) { return x.p == y.p && x.cls == y.cls; }

    nlohmann::json to_json() const {
        return {{"p", p}, {"class", cls}, {"e", e}, {"f", f}, {"uniformizer", padyn::to_string(uniformizer)}};
    }
};

// Result of reducing a radicand: either sqrt(Delta) in Q_p, or
// Delta = scale^2 * cls * w with w a unit square in Z_p and unit_root = sqrt(w).
struct RadicandInfo {
    bool square = false;
    std::optional<PadicNumber> root;  // sqrt(Delta) when square
    CanonicalRadicand rad;
    Rational scale = 1;
    std::optional<PadicNumber> unit_root;
};

inline RadicandInfo canonicalize_radicand(const Rational& delta, long p, int precision = kDefaultPrecision) {
    require_prime(p);
    if (delta == 0) throw InputError("canonicalize_radicand: zero radicand");
    RadicandInfo info;
    PadicNumber dp = PadicNumber::from_rational(delta, p, precision);
    if (auto r = sqrt_in_qp(dp)) {
        info.square = true;
        info.root = *r;
        return info;
    }
    int v = vp(delta, p);
    Rational w = delta / rpow(p, v);  // unit
    long cls;
    if (p == 2) {
        long w8 = residue(w, 2, 3).get_si();
        if (v % 2 == 0) {
            cls = w8 == 3 ? 3 : w8 == 5 ? -3 : -1;  // w8 == 1 was a square
        } else {
            cls = w8 == 1 ? 2 : w8 == 3 ? 6 : w8 == 5 ? -6 : -2;
        }
    } else {
        long n = least_nonresidue(p);
        bool qr = is_quadratic_residue(residue(w, p, 1), p);
        if (v % 2 == 0)
            cls = n;  // qr would have been a square
        else
            cls = qr ? p : p * n;
        (void)qr;
    }
    info.rad = CanonicalRadicand::make(p, cls);
    int half = floor_div(v, 2);
    info.scale = rpow(p, half);
    Rational unit_sq = delta / (info.scale * info.scale * Rational(cls));
    auto ur = sqrt_in_qp(PadicNumber::from_rational(unit_sq, p, precision));
    if (!ur || *ur->valuation() != 0) throw std::logic_error("radicand reduction left a non-square unit");
    info.unit_root = *ur;
    return info;
}

// ---------------------------------------------------------------------------
// u + v*sqrt(d) with p-adic coordinates on the basis {1, sqrt d}.
class ExtElement {
public:
    ExtElement(CanonicalRadicand rad, PadicNumber u, PadicNumber v) : rad_(rad), u_(std::move(u)), v_(std::move(v)) {
        if (u_.prime() != rad_.p || v_.prime() != rad_.p) throw std::invalid_argument("prime mismatch");
    }
    static ExtElement from_rationals(const CanonicalRadicand& rad, const Rational& u, const Rational& v,
                                     int precision = kDefaultPrecision) {
        return {rad, PadicNumber::from_rational(u, rad.p, precision), PadicNumber::from_rational(v, rad.p, precision)};
    }

    const CanonicalRadicand& radicand() const { return rad_; }
    const PadicNumber& u() const { return u_; }
    const PadicNumber& v() const { return v_; }
    long prime() const { return rad_.p; }

    PadicNumber d_padic() const { return PadicNumber::from_rational(rad_.cls, rad_.p, std::max(u_.precision(), v_.precision())); }
    PadicNumber norm() const { return u_ * u_ - d_padic() * v_ * v_; }
    PadicNumber trace() const { return u_ + u_; }
    ExtElement conjugate() const { return {rad_, u_, -v_}; }
    bool is_zero() const { return u_.is_zero() && v_.is_zero(); }
    bool in_qp() const { return v_.is_zero(); }

    friend ExtElement operator+(const ExtElement& x, const ExtElement& y) { check(x, y); return {x.rad_, x.u_ + y.u_, x.v_ + y.v_}; }
    friend ExtElement operator-(const ExtElement& x, const ExtElement& y) { check(x, y); return {x.rad_, x.u_ - y.u_, x.v_ - y.v_}; }
    ExtElement operator-() const { return {rad_, -u_, -v_}; }
    friend ExtElement operator*(const ExtElement& x, const ExtElement& y) {
        check(x, y);
        PadicNumber d = x.d_padic();
        return {x.rad_, x.u_ * y.u_ + d * x.v_ * y.v_, x.u_ * y.v_ + x.v_ * y.u_};
    }
    friend ExtElement operator/(const ExtElement& x, const ExtElement& y) {
        check(x, y);
        PadicNumber n = y.norm();
        if (n.is_zero()) throw std::domain_error("division by zero in K");
        ExtElement t = x * y.conjugate();
        return {x.rad_, t.u_ / n, t.v_ / n};
    }
    ExtElement pow(unsigned n) const {
        ExtElement r = from_rationals(rad_, 1, 0, std::max(u_.precision(), v_.precision()));
        ExtElement b = *this;
        while (n) {
            if (n & 1u) r = r * b;
            b = b * b;
            n >>= 1u;
        }
        return r;
    }

    // v_pi(x) = (e/2) * v_p(Norm x).
    std::optional<int> v_pi() const {
        if (is_zero()) return std::nullopt;
        PadicNumber n = norm();
        if (n.is_zero()) throw std::domain_error("v_pi: norm vanished to working precision");
        int vn = *n.valuation();
        return rad_.e * vn / 2;
    }
    // Twice the p-adic valuation (|x| = p^(-half_val/2)).
    std::optional<int> half_val() const {
        auto w = v_pi();
        if (!w) return std::nullopt;
        return 2 * *w / rad_.e;
    }

    nlohmann::json to_json() const {
        return {{"radicand", rad_.to_json()}, {"u", u_.to_json()}, {"v", v_.to_json()}};
    }

private:
    static void check(const ExtElement& x, const ExtElement& y) {
        if (!(x.rad_ == y.rad_)) throw std::invalid_argument("radicand mismatch");
    }
    CanonicalRadicand rad_;
    PadicNumber u_, v_;
};

inline std::optional<int> half_val(const ExtElement& x, long /*p*/) { return x.half_val(); }

// Embedding of Q(sqrt D) into K = Q_p(sqrt D), written on the canonical basis.
struct QuadEmbedding {
    long p;
    Int D;
    RadicandInfo info;
    int precision;

    static QuadEmbedding make(const Int& D, long p, int precision = kDefaultPrecision) {
        QuadEmbedding e{p, D, canonicalize_radicand(Rational(D), p, precision), precision};
        if (e.info.square) throw InputError("sqrt(D) lies in Q_p; no quadratic extension");
        return e;
    }
    ExtElement operator()(const QuadNumber& x) const {
        PadicNumber a = PadicNumber::from_rational(x.a, p, precision);
        PadicNumber sb = PadicNumber::from_rational(x.b * info.scale, p, precision);
        PadicNumber v = x.b == 0 ? PadicNumber::zero(p, precision) : sb * *info.unit_root;
        return {info.rad, a, v};
    }
};

// ---------------------------------------------------------------------------
// Distance of an element of K to Q_p, as an exact power p^(twice_exp/2).
struct DistanceToQp {
    bool rational_point = false;
    int twice_exp = 0;
};

// Scaling of d(sqrt x, Q_p) relative to |sqrt x| for the canonical class,
// in twice-exponent units.
inline int class_distance_shift(const CanonicalRadicand& rad) {
    if (rad.p != 2) return 0;
    if (rad.cls == -3) return -2;
    if (rad.cls == -1 || rad.cls == 3) return -1;
    return 0;
}

inline DistanceToQp distance_to_qp(const ExtElement& x) {
    if (x.v().is_zero()) return {true, 0};
    const auto& rad = x.radicand();
    // |v sqrt d| = p^(-(2 v_p(v) + v_p(d))/2)
    int twice = -(2 * *x.v().valuation() + vp(Rational(rad.cls), rad.p));
    return {false, twice + class_distance_shift(rad)};
}

inline DistanceToQp distance_to_qp(const QuadNumber& x, const CanonicalRadicand& rad) {
    if (x.b == 0) return {true, 0};
    int twice = -(2 * vp(x.b, rad.p) + vp(Rational(x.D), rad.p));
    return {false, twice + class_distance_shift(rad)};
}

// ---------------------------------------------------------------------------
enum class DiskKind { closed, complement };

inline const char* to_string(DiskKind k) { return k == DiskKind::closed ? "closed_disk" : "complement_of_closed_disk"; }

// A closed disk D(center, p^(twice_exp/2)) or its complement in P^1.
// step is the spacing of the value group in twice-exponent units
// (2 for Q_p and unramified K, 1 for ramified K).
template <class F>
struct Disk {
    F center;
    int twice_exp = 0;
    DiskKind kind = DiskKind::closed;
    int step = 2;

    bool closed() const { return kind == DiskKind::closed; }
    Disk complemented() const {
        Disk d = *this;
        d.kind = closed() ? DiskKind::complement : DiskKind::closed;
        return d;
    }
};

// Rounds a radius down into the value group.
inline int round_radius(int twice_exp, int step) { return step * floor_div(twice_exp, step); }

using ExtDisk = Disk<ExtElement>;

inline nlohmann::json radius_json(int twice_exp) {
    int num = twice_exp, den = 2;
    if (num % 2 == 0) {
        num /= 2;
        den = 1;
    }
    return {{"radius_exponent_num", num}, {"radius_exponent_den", den}};
}

inline nlohmann::json to_json(const ExtDisk& d) {
    nlohmann::json j = radius_json(d.twice_exp);
    j["center"] = d.center.to_json();
    j["kind"] = to_string(d.kind);
    return j;
}

// ---------------------------------------------------------------------------
// Splitting a closed disk meeting Q_p into the next level of sub-disks.
struct SubdiskCount {
    int total = 0;
    int meeting = 0;
    std::vector<ExtElement> meeting_centers;
    std::vector<ExtElement> other_centers;
    int sub_twice_exp = 0;
};

inline ExtElement uniformizer(const CanonicalRadicand& rad, int precision = kDefaultPrecision) {
    switch (rad.uniformizer) {
        case UniformizerKind::p: return ExtElement::from_rationals(rad, rad.p, 0, precision);
        case UniformizerKind::sqrt_d: return ExtElement::from_rationals(rad, 0, 1, precision);
        case UniformizerKind::one_plus_sqrt_d: return ExtElement::from_rationals(rad, 1, 1, precision);
    }
    throw std::logic_error("unknown uniformizer");
}

// Representatives of the residue field O_K / pi.
inline std::vector<ExtElement> residue_representatives(const CanonicalRadicand& rad, int precision = kDefaultPrecision) {
    std::vector<ExtElement> reps;
    long p = rad.p;
    if (rad.e == 2) {
        for (long t = 0; t < p; ++t) reps.push_back(ExtElement::from_rationals(rad, t, 0, precision));
        return reps;
    }
    for (long y = 0; y < p; ++y)
        for (long x = 0; x < p; ++x) {
            if (p == 2)  // O_K = Z_2[(1 + sqrt(-3)) / 2]
                reps.push_back(ExtElement::from_rationals(rad, Rational(x) + frac(y, 2), frac(y, 2), precision));
            else
                reps.push_back(ExtElement::from_rationals(rad, x, y, precision));
        }
    return reps;
}

inline SubdiskCount count_subdisks_meeting_qp(const ExtDisk& disk) {
    if (!disk.closed()) throw InputError("count_subdisks_meeting_qp expects a closed disk");
    const auto& rad = disk.center.radicand();
    int prec = std::max(disk.center.u().precision(), disk.center.v().precision());
    DistanceToQp dc = distance_to_qp(disk.center);
    if (!dc.rational_point && dc.twice_exp > disk.twice_exp) throw InputError("disk does not meet Q_p");
    if (rad.e == 1 && disk.twice_exp % 2 != 0) throw InputError("radius outside the value group");
    // rho has |rho| = radius; the sub-disks are centre + rho * t, t over residues.
    ExtElement pi = uniformizer(rad, prec);
    int m = -disk.twice_exp * rad.e / 2;  // radius = |pi|^m
    ExtElement one = ExtElement::from_rationals(rad, 1, 0, prec);
    ExtElement rho = m >= 0 ? pi.pow(static_cast<unsigned>(m)) : one / pi.pow(static_cast<unsigned>(-m));
    SubdiskCount out;
    out.sub_twice_exp = disk.twice_exp - 2 / rad.e;
    for (const auto& t : residue_representatives(rad, prec)) {
        ExtElement c = disk.center + rho * t;
        DistanceToQp d = distance_to_qp(c);
        ++out.total;
        if (d.rational_point || d.twice_exp <= out.sub_twice_exp) {
            ++out.meeting;
            out.meeting_centers.push_back(c);
        } else {
            out.other_centers.push_back(c);
        }
    }
    return out;
}

}  // namespace padyn
