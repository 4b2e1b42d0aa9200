// Invariant measures: the PGL(2,Z_p)-type measures mu_hat (vertex) and
// mu_bar (edge) on P^1(Q_p), the normalised sigma on atlas components,
// exact invariance checks and a chart-Haar extension for Case I/II.
#pragma once

#include "padyn/arith.hpp"
#include "padyn/complex.hpp"
#include "padyn/decomposer.hpp"
#include "padyn/projective.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace padyn {

enum class MeasureKind { mu_hat, mu_bar };

inline const char* to_string(MeasureKind k) { return k == MeasureKind::mu_hat ? "mu_hat" : "mu_bar"; }

inline MeasureKind measure_for(ComplexKind k) { return k == ComplexKind::vertex ? MeasureKind::mu_hat : MeasureKind::mu_bar; }

// Haar masses (mu0 of D cap Z_p, mu0 of 1/(D \ Z_p)) of a closed Q_p disk.
struct HaarSplit {
    Rational inner = 0, outer = 0;
};

inline HaarSplit haar_split(const Disk<Rational>& D, long p) {
    if (!D.closed()) throw std::invalid_argument("haar_split expects a closed disk");
    if (D.twice_exp % 2 != 0) throw InputError("radius is not an integral power of p");
    int m = -D.twice_exp / 2;  // radius p^-m
    auto va = vp_opt(D.center, p);
    bool contains_zero = !va || *va >= m;
    HaarSplit s;
    if (contains_zero || *va >= 0) {
        if (m >= 0) {
            s.inner = rpow(p, -m);
        } else {
            s.inner = 1;
            s.outer = rpow(p, -1) - rpow(p, m - 1);
        }
        return s;
    }
    // disjoint from Z_p: 1/D = D(1/a, p^(-m + 2 v(a)))
    s.outer = rpow(p, -m + 2 * *va);
    return s;
}

inline Rational measure_of(MeasureKind kind, const Disk<Rational>& D, long p) {
    if (!D.closed()) return 1 - measure_of(kind, D.complemented(), p);
    HaarSplit s = haar_split(D, p);
    if (kind == MeasureKind::mu_hat) return frac(p, p + 1) * (s.inner + s.outer);
    return s.inner / 2 + frac(p, 2) * s.outer;
}

inline Rational mu_hat(const Disk<Rational>& D, long p) { return measure_of(MeasureKind::mu_hat, D, p); }
inline Rational mu_bar(const Disk<Rational>& D, long p) { return measure_of(MeasureKind::mu_bar, D, p); }

// sigma_i(A) = mu(h^-1 A) / mu(h^-1 B_i). Throws InputError unless A lies in B_i.
inline Rational sigma(const CaseIIIAtlas& A, int component, const Disk<Rational>& cell) {
    const long p = A.p();
    if (component < 0 || component >= static_cast<int>(A.components.size()))
        throw InputError("component index out of range: " + std::to_string(component));
    Disk<Rational> pre = image_of_disk(A.H.h_inv(), cell, p);
    Rational total = Rational(Int(std::to_string(A.components[component].size()))) / Rational(Int(std::to_string(A.K->size())));
    // Fast path: pre lies inside the single cell holding its centre (or infinity).
    std::uint64_t home = A.K->locate(pre.closed() ? QPoint::finite(pre.center) : QPoint::infinity());
    DiskRelation rel = disk_relation(pre, A.K->disk(home), p);
    if (rel == DiskRelation::first_inside || rel == DiskRelation::equal) {
        if (A.component_of[home] != component)
            throw InputError("cell " + ball_text(cell, p) + " is not contained in component " + std::to_string(component));
        return measure_of(measure_for(A.complex_kind), pre, p) / total;
    }
    for (std::uint64_t id = 0; id < A.K->size(); ++id) {
        if (A.component_of[id] == component) continue;
        if (disk_relation(A.K->disk(id), pre, p) != DiskRelation::disjoint)
            throw InputError("cell " + ball_text(cell, p) + " is not contained in component " + std::to_string(component));
    }
    return measure_of(measure_for(A.complex_kind), pre, p) / total;
}

struct InvarianceReport {
    bool ok = true;
    std::uint64_t checked = 0;
    std::string failure;
    nlohmann::json to_json() const { return {{"ok", ok}, {"checked", checked}, {"failure", failure}}; }
};

// sigma_i(phi^-1 C) == sigma_i(C) for every atlas cell C, with phi^-1 C
// computed by exact disk transport.
inline InvarianceReport check_invariance(const CaseIIIAtlas& A) {
    const long p = A.p();
    InvarianceReport r;
    Mobius<Rational> inv = A.cls.phi.mobius().invert();
    for (std::size_t i = 0; i < A.components.size(); ++i) {
        for (auto id : A.components[i]) {
            Disk<Rational> C = A.cell_disk(id);
            Disk<Rational> pre = image_of_disk(inv, C, p);
            Rational s1 = sigma(A, static_cast<int>(i), C), s0 = sigma(A, static_cast<int>(i), pre);
            ++r.checked;
            if (s1 != s0) {
                r.ok = false;
                r.failure = "sigma(" + ball_text(pre, p) + ") = " + to_string(s0) + " but sigma(" + ball_text(C, p) + ") = " + to_string(s1);
                return r;
            }
        }
    }
    return r;
}

// Invariance of an arbitrary weight table on atlas cells: w(phi^-1 C) = w(C),
// and the weights of each component sum to 1.
inline InvarianceReport check_weight_invariance(const CaseIIIAtlas& A, const std::vector<Rational>& weight) {
    InvarianceReport r;
    if (weight.size() != A.K->size()) throw InputError("weight table size mismatch");
    std::vector<std::uint64_t> prev(A.next.size());
    for (std::uint64_t id = 0; id < A.next.size(); ++id) prev[A.next[id]] = id;
    for (std::size_t i = 0; i < A.components.size(); ++i) {
        Rational sum = 0;
        for (auto id : A.components[i]) {
            sum += weight[id];
            ++r.checked;
            if (weight[prev[id]] != weight[id]) {
                r.ok = false;
                r.failure = "weight of " + ball_text(A.cell_disk(prev[id]), A.p()) + " differs from its image " + ball_text(A.cell_disk(id), A.p());
                return r;
            }
        }
        if (sum != 1) {
            r.ok = false;
            r.failure = "component " + std::to_string(i) + " weights sum to " + to_string(sum);
            return r;
        }
    }
    return r;
}

inline std::vector<Rational> sigma_weights(const CaseIIIAtlas& A) {
    std::vector<Rational> w(A.K->size());
    for (std::size_t i = 0; i < A.components.size(); ++i)
        for (auto id : A.components[i]) w[id] = sigma(A, static_cast<int>(i), A.cell_disk(id));
    return w;
}

// ---------------------------------------------------------------------------
// Extension beyond Case III: normalised Haar measure read in the linearising
// chart. For Case I the component of x is the ball D(g(x), |alpha|) in
// g = 1/(x - x0); for a generic multiplier map it is the union of the balls
// lambda^i g(x) (1 + p^v0 Z_p), i < delta.

namespace detail {

inline Rational haar(const Disk<Rational>& D, long p) { return rpow(p, D.twice_exp / 2); }

inline Rational haar_meet(const Disk<Rational>& X, const Disk<Rational>& Y, long p) {
    switch (disk_relation(X, Y, p)) {
        case DiskRelation::disjoint: return 0;
        case DiskRelation::first_inside:
        case DiskRelation::equal: return haar(X, p);
        case DiskRelation::second_inside: return haar(Y, p);
        default: break;
    }
    throw InputError("chart image is not a bounded disk");
}

inline std::vector<Disk<Rational>> chart_component(const Classification& C, const QPoint& x, Mobius<Rational>& g) {
    const long p = C.p();
    std::vector<Disk<Rational>> balls;
    if (C.tag == CaseTag::case_i) {
        g = {0, 1, 1, -*C.x0};
        QPoint y = g.apply(x);
        if (y.is_infinity()) throw InputError("the fixed point is its own component");
        balls.push_back({y.value(), -2 * vp(*C.alpha, p), DiskKind::closed, 2});
        return balls;
    }
    if (!C.mult || C.mult->subcase != "generic") throw RefusalError("chart measure needs a Case I map or a generic multiplier map");
    const MultiplierData& M = *C.mult;
    Rational x1 = M.x1 ? M.x1->value_hint() : Rational(0), x2 = M.x2 ? M.x2->value_hint() : Rational(0);
    if (M.x1) g = {1, -x2, 1, -x1};
    else g = {1, -x2, 0, 1};
    QPoint y = g.apply(x);
    if (y.is_infinity() || y.value() == 0) throw InputError("a fixed point is its own component");
    Rational lam = M.lambda.value_hint(), z = y.value();
    int k = vp(z, p);
    for (int i = 0; i < M.delta_order; ++i) {
        balls.push_back({z, 2 * (-k - M.v0), DiskKind::closed, 2});
        z = truncate(z * lam, p, k + M.v0 + 1);
    }
    return balls;
}

}  // namespace detail

inline Rational chart_sigma(const Classification& C, const QPoint& x, const Disk<Rational>& A) {
    const long p = C.p();
    Mobius<Rational> g{1, 0, 0, 1};
    auto balls = detail::chart_component(C, x, g);
    Disk<Rational> gA = image_of_disk(g, A, p);
    Rational total = 0, hit = 0;
    for (const auto& b : balls) {
        total += detail::haar(b, p);
        if (gA.closed()) {
            hit += detail::haar_meet(b, gA, p);
        } else {
            // complement: mass of b outside the removed disk
            hit += detail::haar(b, p) - detail::haar_meet(b, gA.complemented(), p);
        }
    }
    return hit / total;
}

}  // namespace padyn
