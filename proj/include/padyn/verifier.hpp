// Orbits with precision accounting, minimality certificates on quotients,
// and brute-force oracles independent of the closed-form counts.
#pragma once

#include "padyn/arith.hpp"
#include "padyn/complex.hpp"
#include "padyn/decomposer.hpp"
#include "padyn/measure.hpp"
#include "padyn/padic.hpp"
#include "padyn/projective.hpp"

#include <json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace padyn {

inline constexpr std::uint64_t kDefaultOrbitBudget = 100000;

struct PrecisionEvent {
    std::uint64_t step;
    int before, after;
    std::string reason;
    nlohmann::json to_json() const { return {{"step", step}, {"precision_before", before}, {"precision_after", after}, {"reason", reason}}; }
};

struct OrbitTrace {
    std::vector<ProjPoint<PadicNumber>> points;
    std::vector<PrecisionEvent> events;
    std::vector<std::set<std::uint64_t>> visited_cells;  // per level 1..L, branch complex cells
    std::uint64_t unresolved_points = 0;                // points whose digits could not decide a cell
    bool truncated = false;

    nlohmann::json to_json(long p) const {
        nlohmann::json pts = nlohmann::json::array();
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& P = points[i];
            nlohmann::json e;
            if (P.is_infinity()) {
                e["value"] = "infinity";
            } else {
                const PadicNumber& x = P.value();
                if (x.exact()) e["value"] = to_string(*x.exact());
                e["padic"] = x.to_text();
                // a known rational value is exact whatever the digit expansion carries
                e["absolute_precision"] = x.exact() || x.absolute_precision() == std::numeric_limits<int>::max()
                                              ? nlohmann::json("exact")
                                              : nlohmann::json(x.absolute_precision());
            }
            pts.push_back(e);
        }
        nlohmann::json ev = nlohmann::json::array();
        for (const auto& x : events) ev.push_back(x.to_json());
        (void)p;
        nlohmann::json vc = nlohmann::json::array();
        for (std::size_t m = 0; m < visited_cells.size(); ++m)
            vc.push_back({{"level", m + 1}, {"cells", std::vector<std::uint64_t>(visited_cells[m].begin(), visited_cells[m].end())}});
        return {{"points", pts}, {"precision_events", ev}, {"truncated", truncated}, {"visited_cells", vc},
                {"unresolved_points", unresolved_points}};
    }
};

namespace detail {

inline int relative_precision(const ProjPoint<PadicNumber>& P) {
    if (P.is_infinity()) return std::numeric_limits<int>::max();
    const PadicNumber& x = P.value();
    if (x.exact()) return std::numeric_limits<int>::max();
    return x.is_zero() ? 0 : x.precision();
}

inline bool oversized(const PadicNumber& x) {
    if (!x.exact()) return false;
    return mpz_sizeinbase(x.exact()->get_num().get_mpz_t(), 2) + mpz_sizeinbase(x.exact()->get_den().get_mpz_t(), 2) > 512;
}

inline PadicNumber forget_exact(const PadicNumber& x) {
    if (x.is_zero()) return PadicNumber::approximate_zero(x.prime(), x.precision(), x.precision());
    return PadicNumber::from_parts(x.prime(), *x.valuation(), x.unit(), x.precision());
}

// Cell of a p-adic point in h^-1 coordinates, if its known digits decide it.
inline std::optional<std::uint64_t> locate_padic(const CellComplex& K, const Conjugator& H, const ProjPoint<PadicNumber>& P) {
    if (P.is_infinity()) return K.locate(H.h_inv().apply(QPoint::infinity()));
    const PadicNumber& x = P.value();
    if (x.exact()) return K.locate(H.h_inv().apply(QPoint::finite(*x.exact())));
    const long p = K.prime();
    // Margin covering the rescale by eta, the shift, and inversion of large values.
    int need = K.level() + 2 + std::abs(vp(H.eta, p)) + std::max(0, -vp_opt(H.shift, p).value_or(0));
    if (!x.is_zero()) need += std::max(0, -2 * *x.valuation());
    if (x.absolute_precision() < need) return std::nullopt;
    return K.locate(H.h_inv().apply(QPoint::finite(x.truncated_value())));
}

}  // namespace detail

inline OrbitTrace orbit(const HomographicMap& phi, const QPoint& start, std::uint64_t steps, int precision = kDefaultPrecision,
                        const Classification* cls = nullptr, int cell_levels = 0, std::uint64_t budget = kDefaultOrbitBudget) {
    if (precision < 8) throw InputError("precision must be >= 8");
    if (steps > budget) throw BudgetError("orbit of " + std::to_string(steps) + " steps exceeds the budget " + std::to_string(budget));
    const long p = phi.p;
    auto lift = [&](const Rational& q) { return PadicNumber::from_rational(q, p, precision); };
    PadicNumber A = lift(phi.a), B = lift(phi.b), C = lift(phi.c), D = lift(phi.d);
    OrbitTrace T;
    ProjPoint<PadicNumber> x = start.is_infinity() ? ProjPoint<PadicNumber>::infinity() : ProjPoint<PadicNumber>::finite(lift(start.value()));
    T.points.push_back(x);
    for (std::uint64_t s = 1; s <= steps; ++s) {
        ProjPoint<PadicNumber> y;
        if (x.is_infinity()) {
            y = phi.c == 0 ? ProjPoint<PadicNumber>::infinity() : ProjPoint<PadicNumber>::finite(A / C);
        } else {
            PadicNumber den = C * x.value() + D;
            if (den.is_zero()) {
                if (!den.exact()) {
                    T.events.push_back({s, detail::relative_precision(x), 0, "precision exhausted at the pole -d/c"});
                    T.truncated = true;
                    break;
                }
                y = ProjPoint<PadicNumber>::infinity();
            } else {
                PadicNumber num = A * x.value() + B;
                y = ProjPoint<PadicNumber>::finite(num / den);
                if (*den.valuation() > 0 && !den.exact()) {
                    int before = detail::relative_precision(x), after = detail::relative_precision(y);
                    if (after < before) T.events.push_back({s, before, after, "pole proximity"});
                }
            }
        }
        if (!y.is_infinity() && detail::oversized(y.value())) y = ProjPoint<PadicNumber>::finite(detail::forget_exact(y.value()));
        if (!y.is_infinity() && !y.value().exact() && y.value().is_zero()) {
            T.events.push_back({s, detail::relative_precision(x), 0, "value indistinguishable from zero"});
            T.points.push_back(y);
            T.truncated = true;
            break;
        }
        T.points.push_back(y);
        x = y;
    }
    if (cls && cell_levels > 0) {
        if (cls->tag != CaseTag::case_iii || !cls->branch) throw RefusalError("visited cells need a generic Case III map");
        Conjugator H = conjugator(*cls);
        ComplexKind kind = branch_info(*cls->branch).complex;
        for (int m = 1; m <= cell_levels; ++m) {
            CellComplex K(p, m, kind);
            std::set<std::uint64_t> seen;
            for (const auto& P : T.points) {
                auto id = detail::locate_padic(K, H, P);
                if (id) seen.insert(*id);
                else if (m == cell_levels) ++T.unresolved_points;
            }
            T.visited_cells.push_back(std::move(seen));
        }
    }
    return T;
}

// ---------------------------------------------------------------------------
// Minimality certificate: the ancestors of a component at every level up to
// n_max form one closed cycle of the induced map.

struct Certificate {
    int component = 0;
    std::vector<int> levels;
    std::vector<std::uint64_t> lengths;
    bool ok = true;
    std::string failure;
    nlohmann::json to_json() const {
        return {{"component", component}, {"levels", levels}, {"cycle_lengths", lengths}, {"ok", ok}, {"failure", failure}};
    }
};

inline Certificate verify_minimal_on_quotients(const CaseIIIAtlas& A, int component, int n_max, std::uint64_t budget = kDefaultCellBudget) {
    if (n_max < A.level) throw InputError("certificate level below the atlas level");
    Certificate cert;
    cert.component = component;
    const long p = A.p();
    Mobius<Rational> psi = conjugated_map(A.cls, A.H);
    IntMatrix M = IntMatrix::from(psi);
    // Cells of the component at n_max: descendants of its atlas-level cells.
    std::vector<CellComplex> Ks;
    for (int m = 1; m <= n_max; ++m) Ks.emplace_back(p, m, A.complex_kind, budget);
    std::set<std::uint64_t> top;
    {
        // cells at level n_max whose ancestor at the atlas level is in the component
        const CellComplex& Kt = Ks[n_max - 1];
        for (std::uint64_t id = 0; id < Kt.size(); ++id) {
            std::uint64_t a = id;
            for (int m = n_max; m > A.level; --m) a = Ks[m - 1].parent(a, Ks[m - 2]);
            if (A.component_of[a] == component) top.insert(id);
        }
    }
    std::set<std::uint64_t> cur = top;
    for (int m = n_max; m >= 1; --m) {
        const CellComplex& K = Ks[m - 1];
        auto next = induced_cell_map(K, M);
        std::uint64_t start = *cur.begin(), x = start, len = 0;
        do {
            if (!cur.count(x)) {
                cert.ok = false;
                cert.failure = "level " + std::to_string(m) + ": the component is not closed under the map";
                break;
            }
            x = next[x];
            ++len;
        } while (x != start && len <= cur.size());
        if (cert.ok && len != cur.size()) {
            cert.ok = false;
            cert.failure = "level " + std::to_string(m) + ": " + std::to_string(cur.size()) + " cells split into several cycles";
        }
        cert.levels.insert(cert.levels.begin(), m);
        cert.lengths.insert(cert.lengths.begin(), len);
        if (!cert.ok) break;
        if (m > 1) {
            std::set<std::uint64_t> up;
            for (auto id : cur) up.insert(K.parent(id, Ks[m - 2]));
            cur = std::move(up);
        }
    }
    // Lengths must be k p^i with a common k.
    if (cert.ok) {
        std::uint64_t k = cert.lengths.front();
        for (auto L : cert.lengths) {
            std::uint64_t r = L;
            while (r > k && r % static_cast<std::uint64_t>(p) == 0) r /= static_cast<std::uint64_t>(p);
            if (r != k) {
                cert.ok = false;
                cert.failure = "cycle length " + std::to_string(L) + " is not k*p^i";
            }
        }
    }
    return cert;
}

// ---------------------------------------------------------------------------
// Brute-force decomposition: cycle counts of the induced permutation on the
// branch complex, level by level, with no use of the closed-form count.

struct BruteLevel {
    int level;
    std::uint64_t cells;
    std::uint64_t cycles;
    std::vector<std::uint64_t> cycle_lengths;  // sorted
};

inline std::vector<BruteLevel> brute_force_decompose(const Classification& C, int max_level, bool check_transport = false,
                                                     std::uint64_t budget = kDefaultCellBudget) {
    if (C.tag != CaseTag::case_iii || !C.branch) throw RefusalError("brute-force decomposition needs a generic Case III map");
    Conjugator H = conjugator(C);
    ComplexKind kind = branch_info(*C.branch).complex;
    std::vector<BruteLevel> out;
    for (int n = 1; n <= max_level; ++n) {
        CellComplex K(C.p(), n, kind, budget);
        auto r = case_iii_level(C, H, K, check_transport);
        BruteLevel b{n, K.size(), r.cycles.size(), {}};
        for (const auto& c : r.cycles) b.cycle_lengths.push_back(c.size());
        std::sort(b.cycle_lengths.begin(), b.cycle_lengths.end());
        out.push_back(std::move(b));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sphere census for Case I and II maps preserving the standard vertex complex:
// level-n cells grouped by the sphere of the linearising chart they lie on,
// with the number of cell cycles per sphere.

struct SphereCensus {
    std::string group;  // "sphere", "far", "fixed"
    int m = 0;
    std::uint64_t cells = 0, cycles = 0;
    bool resolved = true;
    std::optional<Int> predicted;
    nlohmann::json to_json() const {
        return {{"group", group}, {"m", m}, {"cells", cells}, {"cycles", cycles}, {"resolved", resolved},
                {"predicted", predicted ? nlohmann::json(predicted->get_str()) : nlohmann::json(nullptr)}};
    }
};

inline std::vector<SphereCensus> sphere_census(const Classification& C, int n, std::uint64_t budget = kDefaultCellBudget) {
    const long p = C.p();
    bool case_i = C.tag == CaseTag::case_i;
    if (!case_i && !(C.tag == CaseTag::case_ii && C.mult && C.mult->subcase == "generic"))
        throw RefusalError("sphere census needs a Case I map or a generic Case II map");
    CellComplex K(p, n, ComplexKind::vertex, budget);
    auto next = induced_cell_map(K, IntMatrix::from(C.phi.mobius()));
    Mobius<Rational> g{1, 0, 0, 1};
    int comp_twice = 0;
    if (case_i) {
        g = {0, 1, 1, -*C.x0};
    } else {
        const MultiplierData& M = *C.mult;
        g = {1, -M.x2->value_hint(), 1, -M.x1->value_hint()};
    }
    std::map<std::pair<std::string, int>, SphereCensus> groups;
    std::vector<std::pair<std::string, int>> key_of(K.size());
    for (std::uint64_t id = 0; id < K.size(); ++id) {
        Disk<Rational> E = image_of_disk(g, K.disk(id), p);
        std::pair<std::string, int> key;
        bool resolved = true;
        auto hc = vp_opt(E.center, p);
        bool has_zero = E.closed() && (!hc || 2 * *hc >= -E.twice_exp);
        if (!E.closed()) {
            key = {"fixed", 1};
            resolved = false;
        } else if (has_zero || (case_i && *hc >= vp(*C.alpha, p))) {
            if (case_i) {
                key = {"far", 0};
                comp_twice = -2 * vp(*C.alpha, p);
                resolved = E.twice_exp <= comp_twice;
            } else {
                key = {"fixed", 2};
                resolved = false;
            }
        } else {
            int m = *hc;
            key = {"sphere", m};
            int limit = case_i ? -2 * vp(*C.alpha, p) : -2 * (m + C.mult->v0);
            resolved = E.twice_exp <= limit;
        }
        key_of[id] = key;
        auto& G = groups[key];
        G.group = key.first;
        G.m = key.second;
        G.cells++;
        G.resolved = G.resolved && resolved;
    }
    for (const auto& cyc : permutation_cycles(next)) {
        auto key = key_of[cyc[0]];
        for (auto id : cyc)
            if (key_of[id] != key) throw OracleError("a cell cycle crosses chart spheres: the grouping is not invariant");
        groups[key].cycles++;
    }
    std::vector<SphereCensus> out;
    for (auto& [key, G] : groups) {
        if (G.group == "far") G.predicted = Int(1);
        if (G.group == "sphere") G.predicted = case_i ? case_i_sphere(C, G.m).components : case_ii_sphere_count(*C.mult);
        out.push_back(G);
    }
    return out;
}

}  // namespace padyn
