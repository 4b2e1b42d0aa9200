// Classification of homographic maps and minimal decomposition of P^1(Q_p).
#pragma once

#include "padyn/arith.hpp"
#include "padyn/complex.hpp"
#include "padyn/padic.hpp"
#include "padyn/projective.hpp"
#include "padyn/quadratic.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace padyn {

enum class CaseTag { affine_delegate, case_i, case_ii, case_iii };

inline const char* to_string(CaseTag c) {
    switch (c) {
        case CaseTag::affine_delegate: return "affine_delegate";
        case CaseTag::case_i: return "case_i";
        case CaseTag::case_ii: return "case_ii";
        case CaseTag::case_iii: return "case_iii";
    }
    return "?";
}

// Case III branches: prime, radicand class and the comparison of |a+d| with |sqrt Delta|.
enum class Branch {
    odd_unramified,
    odd_ramified_trace_large,
    odd_ramified_trace_small,
    dyadic_minus3,
    dyadic_pm2_trace_large,
    dyadic_pm2_trace_small,
    dyadic_m1_trace_equal,
    dyadic_m1_trace_large,
    dyadic_m1_trace_small,
};

struct BranchInfo {
    Branch branch;
    const char* name;
    const char* valuation_label;  // the governing valuation V
    const char* count_formula;
    ComplexKind complex;
    int eta_offset;     // |eta| = r0 * p^(eta_offset/2)
    bool dyadic_shift;  // shift by 2^(v_2 sqrt Delta) / 2c
};

inline const BranchInfo& branch_info(Branch b) {
    static const BranchInfo table[] = {
        {Branch::odd_unramified, "odd_unramified", "v_p(lambda^ell-1)", "(p+1)p^(V-1)/ell", ComplexKind::vertex, 0, false},
        {Branch::odd_ramified_trace_large, "odd_ramified_trace_large", "v_pi(lambda^p-1)", "2p^((V-3)/2)", ComplexKind::edge, -1, false},
        {Branch::odd_ramified_trace_small, "odd_ramified_trace_small", "v_pi(lambda^p+1)", "p^((V-3)/2)", ComplexKind::edge, -1, false},
        {Branch::dyadic_minus3, "dyadic_minus3", "v_2(lambda^(2 ell)-1)", "3*2^(V-2)/ell", ComplexKind::vertex, 0, true},
        {Branch::dyadic_pm2_trace_large, "dyadic_pm2_trace_large", "v_pi(lambda-1)", "2^((V-1)/2)", ComplexKind::edge, 1, false},
        {Branch::dyadic_pm2_trace_small, "dyadic_pm2_trace_small", "v_pi(lambda+1)", "2^((V-1)/2)", ComplexKind::edge, 1, false},
        {Branch::dyadic_m1_trace_equal, "dyadic_m1_trace_equal", "v_pi(lambda^2+1)", "2^((V-2)/2)", ComplexKind::edge, 0, true},
        {Branch::dyadic_m1_trace_large, "dyadic_m1_trace_large", "v_pi(lambda-1)", "2^(V/2)", ComplexKind::edge, 0, true},
        {Branch::dyadic_m1_trace_small, "dyadic_m1_trace_small", "v_pi(lambda+1)", "2^(V/2)", ComplexKind::edge, 0, true},
    };
    return table[static_cast<int>(b)];
}

struct ComponentCount {
    bool infinite = false;
    Int value = 0;
    nlohmann::json to_json() const {
        if (infinite) return "infinitely many";
        return value.fits_slong_p() ? nlohmann::json(value.get_si()) : nlohmann::json(value.get_str());
    }
};

// Data specific to hyperbolic-type (Case II and affine multiplication) maps.
struct MultiplierData {
    std::optional<PadicNumber> x1, x2;  // nullopt means infinity
    PadicNumber lambda = PadicNumber::zero(2);
    int lambda_val = 0;                  // v_p(lambda)
    std::optional<int> finite_order;
    int delta_order = 0;                 // least n with v_p(lambda^n - 1) >= s_p
    int v0 = 0;
    std::string subcase;                 // attracting_x1, attracting_x2, finite_order, generic
};

struct Classification {
    HomographicMap phi;
    CaseTag tag = CaseTag::case_iii;
    std::string subcase;
    Rational delta;

    // Case I / affine translation.
    std::optional<Rational> x0;      // nullopt with tag affine_delegate means x0 = infinity
    std::optional<Rational> alpha;   // translation amount in the chart g

    std::optional<MultiplierData> mult;

    // Case III.
    std::optional<CanonicalRadicand> rad;
    QuadNumber sqrt_delta, x1, x2, lambda;
    int ell = 0;
    std::optional<int> finite_order;
    std::optional<Branch> branch;
    int V = 0;
    std::string v_label;  // e.g. v_3(lambda^4-1)
    int trace_cmp = 0;  // sign of (|a+d| - |sqrt Delta|)
    int r0_twice = 0;   // |x1 - x2| = p^(r0_twice/2)

    long p() const { return phi.p; }
    bool periodic() const { return finite_order.has_value() || (mult && mult->finite_order); }
};

namespace detail {

inline bool rational_square(const Rational& q) {
    return q >= 0 && mpz_perfect_square_p(q.get_num().get_mpz_t()) && mpz_perfect_square_p(q.get_den().get_mpz_t());
}

inline Rational rational_sqrt(const Rational& q) {
    Int n, d;
    mpz_sqrt(n.get_mpz_t(), q.get_num().get_mpz_t());
    mpz_sqrt(d.get_mpz_t(), q.get_den().get_mpz_t());
    return frac(n, d);
}

// v_pi of an element of the quadratic field K = Q_p(sqrt D).
inline std::optional<int> v_pi(const QuadNumber& x, long p, int e) {
    auto hv = half_val(x, p);
    if (!hv) return std::nullopt;
    if ((*hv * e) % 2 != 0) throw OracleError("odd normalized valuation in an unramified field");
    return *hv * e / 2;
}

inline int v_pi_required(const QuadNumber& x, long p, int e, const char* what) {
    auto v = v_pi(x, p, e);
    if (!v) throw OracleError(std::string(what) + " vanishes exactly");
    return *v;
}

inline MultiplierData multiplier_data(std::optional<PadicNumber> x1, std::optional<PadicNumber> x2, const PadicNumber& lambda,
                                      const std::optional<Rational>& exact_lambda) {
    MultiplierData m;
    m.x1 = std::move(x1);
    m.x2 = std::move(x2);
    m.lambda = lambda;
    long p = lambda.prime();
    if (lambda.is_zero()) throw OracleError("zero multiplier");
    m.lambda_val = *lambda.valuation();
    if (m.lambda_val != 0) {
        m.subcase = m.lambda_val > 0 ? "attracting_x2" : "attracting_x1";
        return m;
    }
    if (exact_lambda) {
        for (int n : {1, 2}) {
            Rational t = 1;
            for (int i = 0; i < n; ++i) t *= *exact_lambda;
            if (t == 1) {
                m.finite_order = n;
                m.subcase = "finite_order";
                return m;
            }
        }
    }
    int sp = p == 2 ? 2 : 1;
    PadicNumber one = PadicNumber::from_rational(1, p, lambda.precision());
    for (int n = 1; n <= std::max<long>(2, p - 1); ++n) {
        PadicNumber d = lambda.pow(n) - one;
        int v = d.is_zero() ? d.absolute_precision() : *d.valuation();
        if (v >= sp) {
            if (d.is_zero()) throw RefusalError("multiplier is a root of unity to working precision (possibly finite order)");
            m.delta_order = n;
            m.v0 = v;
            m.subcase = "generic";
            return m;
        }
    }
    throw OracleError("no power of the multiplier is 1 mod p^s");
}

}  // namespace detail

inline Classification classify(const HomographicMap& phi, int root_sign = 1) {
    if (root_sign != 1 && root_sign != -1) throw std::invalid_argument("root_sign must be +-1");
    if (phi.is_identity()) throw RefusalError("identity map: phi^n = id for every n, no minimal decomposition");
    const long p = phi.p;
    Classification C;
    C.phi = phi;
    C.delta = phi.delta();
    const Rational &a = phi.a, &b = phi.b, &c = phi.c, &d = phi.d;
    const Rational t = a + d;

    if (c == 0) {
        C.tag = CaseTag::affine_delegate;
        Rational al = a / d, be = b / d;
        if (al == 1) {
            C.subcase = "translation";
            C.alpha = be;
            return C;
        }
        C.subcase = "multiplication";
        Rational xs = be / (1 - al);
        C.mult = detail::multiplier_data(std::nullopt, PadicNumber::from_rational(xs, p), PadicNumber::from_rational(al, p), al);
        C.mult->subcase = C.mult->subcase;
        return C;
    }

    if (C.delta == 0) {
        C.tag = CaseTag::case_i;
        C.subcase = "parabolic";
        C.x0 = (a - d) / (2 * c);
        C.alpha = 2 * c / t;
        return C;
    }

    RadicandInfo info = canonicalize_radicand(C.delta, p);
    if (info.square) {
        C.tag = CaseTag::case_ii;
        std::optional<Rational> exact_root;
        PadicNumber root = *info.root;
        if (detail::rational_square(C.delta)) {
            exact_root = detail::rational_sqrt(C.delta);
            root = PadicNumber::from_rational(*exact_root, p);
        }
        if (root_sign < 0) root = -root;
        if (exact_root && root_sign < 0) exact_root = -*exact_root;
        // Label the fixed points so that x1 has the smaller text form; the
        // report then does not depend on which square root was taken.
        {
            auto key = [](const PadicNumber& x) { return x.exact() ? to_string(*x.exact()) : x.to_text(); };
            PadicNumber A0 = PadicNumber::from_rational(a - d, p), c0 = PadicNumber::from_rational(2 * c, p);
            std::string k1, k2;
            if (exact_root) {
                k1 = to_string((a - d + *exact_root) / (2 * c));
                k2 = to_string((a - d - *exact_root) / (2 * c));
            } else {
                k1 = key((A0 + root) / c0);
                k2 = key((A0 - root) / c0);
            }
            if (k2 < k1) {
                root = -root;
                if (exact_root) exact_root = -*exact_root;
            }
        }
        PadicNumber A = PadicNumber::from_rational(a - d, p), T = PadicNumber::from_rational(t, p);
        PadicNumber c2 = PadicNumber::from_rational(2 * c, p);
        PadicNumber x1 = (A + root) / c2, x2 = (A - root) / c2;
        PadicNumber lam = (T + root) / (T - root);
        std::optional<Rational> lam_exact;
        if (exact_root) lam_exact = (t + *exact_root) / (t - *exact_root);
        if (exact_root) {
            x1 = PadicNumber::from_rational((a - d + *exact_root) / (2 * c), p);
            x2 = PadicNumber::from_rational((a - d - *exact_root) / (2 * c), p);
            lam = PadicNumber::from_rational(*lam_exact, p);
        }
        C.mult = detail::multiplier_data(x1, x2, lam, lam_exact);
        C.subcase = C.mult->subcase;
        return C;
    }

    // Case III: work in Q(sqrt D) with D = num * den, sqrt Delta = sqrt D / den.
    C.tag = CaseTag::case_iii;
    C.rad = info.rad;
    const auto& R = *C.rad;
    Int D = C.delta.get_num() * C.delta.get_den();
    C.sqrt_delta = QuadNumber(0, Rational(root_sign) / Rational(C.delta.get_den()), D);
    QuadNumber qa = QuadNumber::rational(a - d, D), qt = QuadNumber::rational(t, D);
    QuadNumber c2 = QuadNumber::rational(2 * c, D);
    C.x1 = (qa + C.sqrt_delta) / c2;
    C.x2 = (qa - C.sqrt_delta) / c2;
    C.lambda = (qt + C.sqrt_delta) / (qt - C.sqrt_delta);
    const QuadNumber one = QuadNumber::rational(1, D);

    C.r0_twice = -vp(C.delta, p) + 2 * vp(c, p);
    if (t == 0) C.trace_cmp = -1;
    else {
        int tv = 2 * vp(t, p), sv = vp(C.delta, p);
        C.trace_cmp = tv < sv ? 1 : tv > sv ? -1 : 0;
    }

    for (int n : {1, 2, 3, 4, 6}) {
        if (C.lambda.pow(n) == one) {
            C.finite_order = n;
            break;
        }
    }
    if (half_val(C.lambda, p).value_or(1) != 0) throw OracleError("Case III multiplier is not a unit");

    // ell: order of lambda in the residue field.
    long qf = 1;
    for (int i = 0; i < R.f; ++i) qf *= p;
    for (long j = 1; j <= qf; ++j) {
        auto v = detail::v_pi(C.lambda.pow(j) - one, p, R.e);
        if (!v || *v > 0) {
            C.ell = static_cast<int>(j);
            break;
        }
    }
    if (C.ell == 0) throw OracleError("no power of lambda reduces to 1");

    if (C.finite_order) {
        C.subcase = "finite_order";
        return C;
    }
    C.subcase = "generic";

    auto vpi = [&](const QuadNumber& x, const char* what) { return detail::v_pi_required(x, p, R.e, what); };
    if (p != 2) {
        if (!R.ramified()) {
            C.branch = Branch::odd_unramified;
            C.V = vpi(C.lambda.pow(C.ell) - one, "lambda^ell - 1");
            C.v_label = "v_" + std::to_string(p) + "(lambda^" + std::to_string(C.ell) + "-1)";
        } else if (C.trace_cmp > 0) {
            C.branch = Branch::odd_ramified_trace_large;
            C.V = vpi(C.lambda.pow(p) - one, "lambda^p - 1");
            C.v_label = "v_pi(lambda^" + std::to_string(p) + "-1)";
        } else {
            C.branch = Branch::odd_ramified_trace_small;
            C.V = vpi(C.lambda.pow(p) + one, "lambda^p + 1");
            C.v_label = "v_pi(lambda^" + std::to_string(p) + "+1)";
        }
    } else if (R.cls == -3) {
        C.branch = Branch::dyadic_minus3;
        auto hv = half_val(C.lambda.pow(2 * C.ell) - one, p);
        if (!hv) throw OracleError("lambda^(2 ell) = 1");
        C.V = *hv / 2;
        C.v_label = "v_2(lambda^" + std::to_string(2 * C.ell) + "-1)";
    } else if (R.cls == 2 || R.cls == -2 || R.cls == 6 || R.cls == -6) {
        if (C.trace_cmp > 0) {
            C.branch = Branch::dyadic_pm2_trace_large;
            C.V = vpi(C.lambda - one, "lambda - 1");
            C.v_label = "v_pi(lambda-1)";
        } else {
            C.branch = Branch::dyadic_pm2_trace_small;
            C.V = vpi(C.lambda + one, "lambda + 1");
            C.v_label = "v_pi(lambda+1)";
        }
    } else {
        if (C.trace_cmp == 0) {
            C.branch = Branch::dyadic_m1_trace_equal;
            C.V = vpi(C.lambda * C.lambda + one, "lambda^2 + 1");
            C.v_label = "v_pi(lambda^2+1)";
        } else if (C.trace_cmp > 0) {
            C.branch = Branch::dyadic_m1_trace_large;
            C.V = vpi(C.lambda - one, "lambda - 1");
            C.v_label = "v_pi(lambda-1)";
        } else {
            C.branch = Branch::dyadic_m1_trace_small;
            C.V = vpi(C.lambda + one, "lambda + 1");
            C.v_label = "v_pi(lambda+1)";
        }
    }
    return C;
}

namespace detail {

inline Int exact_count(const Int& numer, const Int& denom) {
    if (denom == 0 || numer % denom != 0) throw OracleError("closed-form component count is not an integer");
    return numer / denom;
}

inline Int pow_checked(long p, int k) {
    if (k < 0) throw OracleError("closed-form component count has a negative exponent");
    return ipow(p, k);
}

inline int half_exponent(int x) {
    if (x % 2 != 0) throw OracleError("closed-form component count has a non-integral exponent");
    return x / 2;
}

}  // namespace detail

inline ComponentCount minimal_count(const Classification& C) {
    ComponentCount out;
    if (C.tag != CaseTag::case_iii || C.periodic() || !C.branch) {
        out.infinite = true;
        return out;
    }
    const long p = C.p();
    const int V = C.V, ell = C.ell;
    switch (*C.branch) {
        case Branch::odd_unramified:
            out.value = detail::exact_count(Int(p + 1) * detail::pow_checked(p, V - 1), ell);
            break;
        case Branch::odd_ramified_trace_large:
            out.value = 2 * detail::pow_checked(p, detail::half_exponent(V - 3));
            break;
        case Branch::odd_ramified_trace_small:
            out.value = detail::pow_checked(p, detail::half_exponent(V - 3));
            break;
        case Branch::dyadic_minus3:
            out.value = detail::exact_count(3 * detail::pow_checked(2, V - 2), ell);
            break;
        case Branch::dyadic_pm2_trace_large:
        case Branch::dyadic_pm2_trace_small:
            out.value = detail::pow_checked(2, detail::half_exponent(V - 1));
            break;
        case Branch::dyadic_m1_trace_equal:
            out.value = detail::pow_checked(2, detail::half_exponent(V - 2));
            break;
        case Branch::dyadic_m1_trace_large:
        case Branch::dyadic_m1_trace_small:
            out.value = detail::pow_checked(2, detail::half_exponent(V));
            break;
    }
    if (out.value <= 0) throw OracleError("closed-form component count is not positive");
    return out;
}

// Cycle lengths k, k p, k p^2, ... along the tower of quotients.
inline int odometer_base(const Classification& C) {
    if (!C.branch) return 0;
    switch (*C.branch) {
        case Branch::odd_unramified:
        case Branch::dyadic_minus3: return C.ell;
        case Branch::odd_ramified_trace_small: return 2;
        default: return 1;
    }
}

inline const char* measure_tag(const Classification& C) {
    if (!C.branch) return nullptr;
    return branch_info(*C.branch).complex == ComplexKind::vertex ? "mu_hat" : "mu_bar";
}

// h(y) = eta*y + s conjugating phi to psi = h^-1 phi h, which permutes the
// cells of the branch's standard complex.
struct Conjugator {
    Rational eta, shift;
    Mobius<Rational> h() const { return {eta, shift, 0, 1}; }
    Mobius<Rational> h_inv() const { return {1, -shift, 0, eta}; }
    nlohmann::json to_json() const { return {{"eta", to_string(eta)}, {"shift", to_string(shift)}}; }
};

inline Conjugator conjugator(const Classification& C) {
    if (!C.branch) throw std::logic_error("conjugator requires a generic Case III classification");
    const BranchInfo& bi = branch_info(*C.branch);
    const long p = C.p();
    int te = C.r0_twice + bi.eta_offset;
    if (te % 2 != 0) throw OracleError("conjugator scale is not an integral power of p");
    Conjugator H;
    H.eta = rpow(p, -te / 2);
    const Rational &a = C.phi.a, &c = C.phi.c, &d = C.phi.d;
    Rational num = a - d;
    if (bi.dyadic_shift) {
        int w = vp(C.delta, 2);
        if (w % 2 != 0) throw OracleError("dyadic shift needs an even valuation of Delta");
        num -= rpow(2, w / 2);
    }
    H.shift = num / (2 * c);
    return H;
}

inline Mobius<Rational> conjugated_map(const Classification& C, const Conjugator& H) {
    return H.h_inv().compose(C.phi.mobius()).compose(H.h());
}

// ---------------------------------------------------------------------------
// Case III atlas.

struct LevelScan {
    int level;
    std::uint64_t cells;
    std::uint64_t cycles;
};

class CaseIIIAtlas {
public:
    Classification cls;
    Conjugator H;
    ComplexKind complex_kind = ComplexKind::vertex;
    ComponentCount count;
    int stabilization_level = 0;
    std::vector<LevelScan> scan;
    int level = 0;
    std::optional<CellComplex> K;
    std::vector<std::uint64_t> next;               // psi on level cells
    std::vector<std::vector<std::uint64_t>> components;  // each in cycle order
    std::vector<int> component_of;

    long p() const { return cls.p(); }

    // Atlas cell in the original coordinate.
    Disk<Rational> cell_disk(std::uint64_t id) const {
        return canonical_disk(image_of_disk(H.h(), K->disk(id), p()), p());
    }

    std::uint64_t locate(const QPoint& x) const { return K->locate(H.h_inv().apply(x)); }

    int component_index(const QPoint& x) const { return component_of[locate(x)]; }

    std::vector<Disk<Rational>> component_cells(int i) const {
        std::vector<Disk<Rational>> out;
        for (auto id : components[i]) out.push_back(cell_disk(id));
        return out;
    }

    // Sorted balls of one component, original coordinate.
    std::vector<Disk<Rational>> sorted_cells(int i) const {
        std::vector<Disk<Rational>> cells = component_cells(i);
        std::sort(cells.begin(), cells.end(), cell_less);
        return cells;
    }

    nlohmann::json balls_json() const {
        nlohmann::json comps = nlohmann::json::array();
        for (std::size_t i = 0; i < components.size(); ++i) {
            nlohmann::json balls = nlohmann::json::array();
            for (const auto& d : sorted_cells(static_cast<int>(i))) balls.push_back(ball_json(d, p()));
            comps.push_back(balls);
        }
        return comps;
    }

    nlohmann::json info_json() const {
        std::vector<std::uint64_t> lengths;
        for (const auto& c : components) lengths.push_back(c.size());
        nlohmann::json sc = nlohmann::json::array();
        for (const auto& s : scan) sc.push_back({{"level", s.level}, {"cells", s.cells}, {"cycles", s.cycles}});
        return {{"level", level},
                {"complex", K->describe()},
                {"conjugator", H.to_json()},
                {"stabilization_level", stabilization_level},
                {"scan", sc},
                {"cycle_lengths", lengths}};
    }

    static bool cell_less(const Disk<Rational>& x, const Disk<Rational>& y) {
        if (x.closed() != y.closed()) return !x.closed();
        if (x.center != y.center) return x.center < y.center;
        return x.twice_exp < y.twice_exp;
    }
};

struct LevelCyclesResult {
    std::vector<std::uint64_t> next;
    std::vector<std::vector<std::uint64_t>> cycles;
};

inline LevelCyclesResult case_iii_level(const Classification& C, const Conjugator& H, const CellComplex& K, bool check_transport = false) {
    Mobius<Rational> psi = conjugated_map(C, H);
    LevelCyclesResult r;
    r.next = induced_cell_map(K, IntMatrix::from(psi));
    if (check_transport && !transport_agrees(K, psi, r.next))
        throw OracleError("disk transport disagrees with centre location at level " + std::to_string(K.level()));
    r.cycles = permutation_cycles(r.next);
    return r;
}

inline int stabilization_bound(const Classification& C) {
    int e = C.rad ? C.rad->e : 1;
    return (C.V + e - 1) / e + 2;
}

// Smallest level at which the level-n cycles realise the closed-form count.
inline std::pair<int, std::vector<LevelScan>> find_stabilization(const Classification& C, std::uint64_t budget = kDefaultCellBudget) {
    Conjugator H = conjugator(C);
    ComplexKind kind = branch_info(*C.branch).complex;
    Int want = minimal_count(C).value;
    std::vector<LevelScan> scan;
    int bound = stabilization_bound(C);
    for (int n = 1; n <= bound; ++n) {
        CellComplex K(C.p(), n, kind, budget);
        auto r = case_iii_level(C, H, K);
        scan.push_back({n, K.size(), r.cycles.size()});
        Int got(std::to_string(r.cycles.size()));
        if (got > want)
            throw OracleError("level " + std::to_string(n) + " has " + got.get_str() + " cycles, more than the closed form " + want.get_str());
        if (got == want) return {n, scan};
    }
    throw OracleError("cycle count never reached the closed form " + want.get_str() + " by level " + std::to_string(bound));
}

inline CaseIIIAtlas component_atlas(const Classification& C, std::optional<int> level = std::nullopt,
                                    std::uint64_t budget = kDefaultCellBudget) {
    if (C.tag != CaseTag::case_iii) throw RefusalError(std::string("no finite atlas for ") + to_string(C.tag) + " maps");
    if (C.periodic()) throw RefusalError("periodic map (phi^" + std::to_string(*C.finite_order) + " = id): no minimal decomposition");
    CaseIIIAtlas A;
    A.cls = C;
    A.H = conjugator(C);
    A.complex_kind = branch_info(*C.branch).complex;
    A.count = minimal_count(C);
    auto [stab, scan] = find_stabilization(C, budget);
    A.stabilization_level = stab;
    A.scan = scan;
    int n = level.value_or(stab);
    if (n < stab)
        throw InputError("insufficient level " + std::to_string(n) + ": components separate only from level " + std::to_string(stab));
    A.level = n;
    A.K.emplace(C.p(), n, A.complex_kind, budget);
    auto r = case_iii_level(C, A.H, *A.K);
    if (Int(std::to_string(r.cycles.size())) != A.count.value)
        throw OracleError("level " + std::to_string(n) + " cycle count " + std::to_string(r.cycles.size()) + " differs from the closed form " +
                          A.count.value.get_str());
    A.next = std::move(r.next);
    // Canonical order: by the smallest atlas cell of each component.
    std::vector<std::pair<Disk<Rational>, std::size_t>> firsts;
    for (std::size_t i = 0; i < r.cycles.size(); ++i) {
        Disk<Rational> best = A.cell_disk(r.cycles[i][0]);
        for (auto id : r.cycles[i]) {
            Disk<Rational> dk = A.cell_disk(id);
            if (CaseIIIAtlas::cell_less(dk, best)) best = dk;
        }
        firsts.emplace_back(best, i);
    }
    std::sort(firsts.begin(), firsts.end(), [](const auto& x, const auto& y) { return CaseIIIAtlas::cell_less(x.first, y.first); });
    A.component_of.assign(A.K->size(), -1);
    for (const auto& [dk, i] : firsts) {
        int idx = static_cast<int>(A.components.size());
        A.components.push_back(r.cycles[i]);
        for (auto id : r.cycles[i]) A.component_of[id] = idx;
    }
    return A;
}

// ---------------------------------------------------------------------------
// Case I and II structure.

struct SphereInfo {
    int m;             // sphere |x - x0| = p^m (Case I) or |g(x)| = p^m (Case II)
    Int components;
    int component_radius_exp;  // each component is a disk of radius p^this (Case I, original coordinate)
};

inline Rational case_i_chart(const Classification& C, const Rational& x) { return 1 / (x - *C.x0); }

// Components on S(x0, p^m) for m < v(alpha).
inline SphereInfo case_i_sphere(const Classification& C, int m) {
    const long p = C.p();
    int va = vp(*C.alpha, p);
    if (m >= va) throw InputError("sphere radius must be below |alpha|^-1 scale: m < " + std::to_string(va));
    return {m, Int(p - 1) * ipow(p, va - m - 1), 2 * m - va};
}

inline Int case_ii_sphere_count(const MultiplierData& M) {
    long p = M.lambda.prime();
    Int n = Int(p - 1) * ipow(p, M.v0 - 1);
    if (n % M.delta_order != 0) throw OracleError("per-sphere count is not an integer");
    return n / M.delta_order;
}

// g(x) = (x - x2)/(x - x1), linearising a multiplier map to y -> lambda y.
inline std::optional<PadicNumber> multiplier_chart(const MultiplierData& M, const QPoint& x, long p) {
    auto xp = [&](const Rational& q) { return PadicNumber::from_rational(q, p); };
    if (x.is_infinity()) {
        if (!M.x1) return std::nullopt;  // x1 = infinity is the pole of g
        return PadicNumber::from_rational(1, p);
    }
    PadicNumber X = xp(x.value());
    PadicNumber num = M.x2 ? X - *M.x2 : PadicNumber::from_rational(1, p);
    if (!M.x1) return num;
    PadicNumber den = X - *M.x1;
    if (den.is_zero()) return std::nullopt;
    return num / den;
}

// ---------------------------------------------------------------------------
// Same component.

inline bool same_component(const Classification& C, const QPoint& x, const QPoint& y, std::optional<int> level = std::nullopt) {
    const long p = C.p();
    if (x == y) return true;
    if (C.tag == CaseTag::case_iii) {
        if (C.periodic()) {
            QPoint z = x;
            for (int i = 0; i < *C.finite_order; ++i) {
                z = C.phi.apply(z);
                if (z == y) return true;
            }
            return false;
        }
        CaseIIIAtlas A = component_atlas(C, level);
        return A.component_index(x) == A.component_index(y);
    }
    if (C.tag == CaseTag::case_i) {
        QPoint x0 = QPoint::finite(*C.x0);
        if (x == x0 || y == x0) return false;
        auto g = [&](const QPoint& z) { return z.is_infinity() ? Rational(0) : case_i_chart(C, z.value()); };
        Rational diff = g(x) - g(y);
        return diff == 0 || vp(diff, p) >= vp(*C.alpha, p);
    }
    if (C.tag == CaseTag::affine_delegate && C.subcase == "translation") {
        if (x.is_infinity() || y.is_infinity()) return false;
        Rational diff = x.value() - y.value();
        return vp(diff, p) >= vp(*C.alpha, p);
    }
    const MultiplierData& M = *C.mult;
    if (M.subcase == "attracting_x1" || M.subcase == "attracting_x2") return false;
    if (M.finite_order) {
        QPoint z = x;
        for (int i = 0; i < *M.finite_order; ++i) {
            z = C.phi.apply(z);
            if (z == y) return true;
        }
        return false;
    }
    auto gx = multiplier_chart(M, x, p), gy = multiplier_chart(M, y, p);
    if (!gx || !gy || gx->is_zero() || gy->is_zero()) return false;
    if (*gx->valuation() != *gy->valuation()) return false;
    PadicNumber q = *gx / *gy;
    Int mod_n = ipow(p, M.v0);
    Int r = mod(q.unit(), mod_n);
    Int l = mod(M.lambda.unit(), mod_n);
    Int z = 1;
    for (int i = 0; i < M.delta_order; ++i) {
        if (z == r) return true;
        z = mod(z * l, mod_n);
    }
    return false;
}

// ---------------------------------------------------------------------------
// Report.

inline nlohmann::json lambda_profile_json(const Classification& C) {
    const long p = C.p();
    nlohmann::json j;
    if (C.tag == CaseTag::case_iii) {
        j["radicand"] = C.rad->to_json();
        // Reported with x1 the lexicographically smaller fixed point, so the
        // profile does not depend on the sign chosen for sqrt(Delta).
        bool swap = C.x2.to_string() < C.x1.to_string();
        QuadNumber f1 = swap ? C.x2 : C.x1, f2 = swap ? C.x1 : C.x2;
        QuadNumber lam = swap ? QuadNumber::rational(1, C.lambda.D) / C.lambda : C.lambda;
        j["fixed_points"] = {f1.to_string(), f2.to_string()};
        j["lambda"] = lam.to_string();
        j["ell"] = C.ell;
        j["trace_vs_root"] = C.trace_cmp > 0 ? ">" : C.trace_cmp < 0 ? "<" : "=";
        if (C.finite_order) j["finite_order"] = *C.finite_order;
        if (C.branch) {
            const BranchInfo& bi = branch_info(*C.branch);
            j["branch"] = bi.name;
            j["valuations"] = {{C.v_label, C.V}};
            j["count_formula"] = bi.count_formula;
        }
    } else if (C.tag == CaseTag::case_i) {
        j["fixed_point"] = to_string(*C.x0);
        j["alpha"] = to_string(*C.alpha);
        j["v_alpha"] = vp(*C.alpha, p);
    } else if (C.mult) {
        const MultiplierData& M = *C.mult;
        auto pt = [](const std::optional<PadicNumber>& x) -> nlohmann::json {
            if (!x) return "infinity";
            return x->exact() ? nlohmann::json(to_string(*x->exact())) : nlohmann::json(x->to_text());
        };
        j["fixed_points"] = {pt(M.x1), pt(M.x2)};
        j["lambda"] = M.lambda.exact() ? nlohmann::json(to_string(*M.lambda.exact())) : nlohmann::json(M.lambda.to_text());
        j["v_lambda"] = M.lambda_val;
        if (M.finite_order) j["finite_order"] = *M.finite_order;
        if (M.subcase == "generic") {
            j["delta"] = M.delta_order;
            j["v0"] = M.v0;
            j["per_sphere_count"] = case_ii_sphere_count(M).get_si();
        }
    } else {
        j["translation"] = to_string(*C.alpha);
        j["v_translation"] = vp(*C.alpha, p);
    }
    return j;
}

inline nlohmann::json decomposition_report(const Classification& C, const CaseIIIAtlas* atlas = nullptr) {
    nlohmann::json j;
    j["map"] = C.phi.literal();
    j["p"] = C.p();
    j["case"] = to_string(C.tag);
    j["subcase"] = C.periodic() ? "finite_order" : C.subcase;
    j["lambda_profile"] = lambda_profile_json(C);
    j["count"] = minimal_count(C).to_json();
    if (C.tag == CaseTag::case_iii && C.branch) {
        int k = odometer_base(C);
        j["odometer"] = {{"base", k}, {"ratio", C.p()}, {"lengths", {k, k * C.p(), k * C.p() * C.p()}}};
        j["minimal"] = minimal_count(C).value == 1;
        j["measure_tag"] = measure_tag(C);
        j["conjugator"] = conjugator(C).to_json();
        j["complex"] = to_string(branch_info(*C.branch).complex);
    } else {
        j["odometer"] = nullptr;
        j["measure_tag"] = (C.tag == CaseTag::case_iii || C.periodic()) ? nlohmann::json(nullptr) : nlohmann::json("chart_haar_extension");
    }
    if (C.periodic()) j["count"] = "infinitely many";
    if (atlas) {
        j["atlas"] = atlas->balls_json();
        j["atlas_info"] = atlas->info_json();
    } else {
        j["atlas"] = nullptr;
    }
    return j;
}

}  // namespace padyn
