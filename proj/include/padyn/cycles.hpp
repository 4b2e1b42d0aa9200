// Finite-quotient dynamics on O_K / pi^n: cycle enumeration, the (a_n, b_n)
// linearisation data, lifting of cycles and the type (l, E) of multiplications.
#pragma once

#include "padyn/arith.hpp"
#include "padyn/padic.hpp"
#include "padyn/quadratic.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <climits>
#include <cstdint>
#include <map>
#include <unordered_map>
#include <string>
#include <vector>

namespace padyn {

inline constexpr std::uint64_t kDefaultCosetBudget = 1u << 20;

// x0 + x1 * beta, coordinates reduced modulo p^W.
struct OK {
    std::uint64_t c0 = 0, c1 = 0;
    friend bool operator==(const OK&, const OK&) = default;
};

// O_K for K = Q_p (deg 1) or a quadratic extension, on an integral basis
// {1, beta} with beta^2 = T beta - N. For ramified K, beta is the uniformizer.
class OKRing {
public:
    long p = 2;
    int e = 1, f = 1, deg = 1;
    int W = 0;  // working precision in p-digits
    std::uint64_t M = 0;
    std::uint64_t T = 0, N = 0;  // residues mod M
    std::optional<CanonicalRadicand> rad;

    static int max_digits(long p) {
        int W = 0;
        unsigned __int128 m = 1;
        while (m * static_cast<unsigned __int128>(p) <= (static_cast<unsigned __int128>(1) << 62)) {
            m *= static_cast<unsigned>(p);
            ++W;
        }
        return W;
    }

    static OKRing rational(long p) {
        require_prime(p);
        OKRing R;
        R.p = p;
        R.init_modulus();
        return R;
    }

    static OKRing of(const CanonicalRadicand& rad) {
        OKRing R;
        R.p = rad.p;
        R.e = rad.e;
        R.f = rad.f;
        R.deg = 2;
        R.rad = rad;
        R.init_modulus();
        long T = 0, N = 0;
        if (rad.p == 2 && rad.cls == -3) {
            T = 1, N = 1;  // omega = (1 + sqrt(-3)) / 2
        } else if (rad.uniformizer == UniformizerKind::one_plus_sqrt_d) {
            T = 2, N = 1 - rad.cls;  // pi = 1 + sqrt(d)
        } else {
            T = 0, N = -rad.cls;  // beta = sqrt(d)
        }
        R.T = R.from_long(T);
        R.N = R.from_long(N);
        return R;
    }

    std::string name() const {
        if (deg == 1) return "Q_" + std::to_string(p);
        return "Q_" + std::to_string(p) + "(sqrt(" + std::to_string(rad->cls) + "))";
    }

    // ---- arithmetic mod p^W
    std::uint64_t from_long(long v) const {
        long long m = static_cast<long long>(M);
        long long r = static_cast<long long>(v) % m;
        if (r < 0) r += m;
        return static_cast<std::uint64_t>(r);
    }
    std::uint64_t from_int(const Int& v) const { return mod(v, Int(std::to_string(M))).get_ui(); }
    std::uint64_t madd(std::uint64_t a, std::uint64_t b) const { return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) + b) % M); }
    std::uint64_t msub(std::uint64_t a, std::uint64_t b) const { return a >= b ? a - b : a + (M - b); }
    std::uint64_t mmul(std::uint64_t a, std::uint64_t b) const { return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % M); }

    OK make(long a, long b = 0) const { return {from_long(a), deg == 2 ? from_long(b) : 0}; }
    OK zero() const { return {0, 0}; }
    OK one() const { return {1 % M, 0}; }
    OK add(const OK& x, const OK& y) const { return {madd(x.c0, y.c0), madd(x.c1, y.c1)}; }
    OK sub(const OK& x, const OK& y) const { return {msub(x.c0, y.c0), msub(x.c1, y.c1)}; }
    OK neg(const OK& x) const { return sub(zero(), x); }
    OK mul(const OK& x, const OK& y) const {
        if (deg == 1) return {mmul(x.c0, y.c0), 0};
        std::uint64_t t = mmul(x.c1, y.c1);
        std::uint64_t r0 = msub(mmul(x.c0, y.c0), mmul(N, t));
        std::uint64_t r1 = madd(madd(mmul(x.c0, y.c1), mmul(x.c1, y.c0)), mmul(T, t));
        return {r0, r1};
    }
    OK pow(OK x, std::uint64_t n) const {
        OK r = one();
        while (n) {
            if (n & 1u) r = mul(r, x);
            x = mul(x, x);
            n >>= 1u;
        }
        return r;
    }

    // Digits of precision in pi-units.
    int pi_precision() const { return e * W; }

    int vp_coord(std::uint64_t c) const {
        if (c == 0) return W;
        int v = 0;
        while (c % static_cast<std::uint64_t>(p) == 0) {
            c /= static_cast<std::uint64_t>(p);
            ++v;
        }
        return v;
    }
    // v_pi, capped at pi_precision() for elements vanishing to working precision.
    int val(const OK& x) const {
        if (deg == 1) return vp_coord(x.c0);
        if (e == 1) return std::min(vp_coord(x.c0), vp_coord(x.c1));
        return std::min(2 * vp_coord(x.c0), 2 * vp_coord(x.c1) + 1);
    }
    bool is_unit(const OK& x) const { return val(x) == 0; }

    OK uniformizer() const {
        if (e == 2) return {0, 1};
        return make(p, 0);
    }

    // x / pi for x in pi O_K. The top p-digit of the result is not meaningful.
    OK div_pi(const OK& x) const {
        auto P = static_cast<std::uint64_t>(p);
        if (e == 1) {
            if (x.c0 % P || x.c1 % P) throw std::logic_error("div_pi: not divisible");
            return {x.c0 / P, x.c1 / P};
        }
        if (x.c0 % P) throw std::logic_error("div_pi: not divisible");
        // 1/pi = (T - pi)/N and N = p * (N/p) with N/p a unit.
        std::uint64_t Np = N / P;
        std::uint64_t q = mmul(x.c0 / P, inverse(Np));
        return {madd(mmul(q, T), x.c1), msub(0, q)};
    }
    OK div_pi_pow(OK x, int n) const {
        for (int i = 0; i < n; ++i) x = div_pi(x);
        return x;
    }

    std::uint64_t inverse(std::uint64_t u) const {
        Int r = inv_mod(Int(std::to_string(u)), Int(std::to_string(M)));
        return r.get_ui();
    }
    OK inverse(const OK& x) const {
        if (!is_unit(x)) throw std::domain_error("inverse of a non-unit");
        if (deg == 1) return {inverse(x.c0), 0};
        // x * conj(x) = Norm(x); conj(beta) = T - beta.
        OK cj{madd(x.c0, mmul(x.c1, T)), msub(0, x.c1)};
        OK n = mul(x, cj);
        return mul(cj, OK{inverse(n.c0), 0});
    }

    // ---- quotients O_K / pi^n
    std::array<int, 2> key_digits(int n) const {
        if (deg == 1) return {n, 0};
        if (e == 1) return {n, n};
        return {(n + 1) / 2, n / 2};
    }
    std::uint64_t pw(int k) const {
        std::uint64_t r = 1;
        for (int i = 0; i < k; ++i) r *= static_cast<std::uint64_t>(p);
        return r;
    }
    // Number of cosets of pi^n O_K (as a 128-bit count to detect overflow).
    unsigned __int128 quotient_size(int n) const {
        auto kd = key_digits(n);
        unsigned __int128 s = 1;
        for (int i = 0; i < kd[0] + kd[1]; ++i) s *= static_cast<unsigned>(p);
        return s;
    }
    std::uint64_t key(const OK& x, int n) const {
        auto kd = key_digits(n);
        std::uint64_t m0 = pw(kd[0]), m1 = pw(kd[1]);
        return x.c0 % m0 + m0 * (x.c1 % m1);
    }
    OK rep(std::uint64_t k, int n) const {
        auto kd = key_digits(n);
        std::uint64_t m0 = pw(kd[0]);
        return {k % m0, k / m0};
    }
    // Residue field index, in [0, p^f).
    std::uint64_t residue(const OK& x) const { return key(x, 1); }
    std::uint64_t residue_size() const { return pw(f); }
    // Representatives of O_K / pi (digit set C).
    std::vector<OK> digits() const {
        std::vector<OK> out;
        for (std::uint64_t k = 0; k < residue_size(); ++k) out.push_back(rep(k, 1));
        return out;
    }
    // Multiplicative order of a unit residue in the residue field.
    int residue_order(const OK& x) const {
        if (residue(x) == 0) throw std::domain_error("residue_order of zero");
        OK r1 = rep(residue(x), 1);
        OK y = r1;
        for (int k = 1; k <= static_cast<int>(residue_size()); ++k) {
            if (residue(y) == 1) return k;
            y = mul(y, r1);
        }
        throw std::logic_error("residue order not found");
    }

    // ---- conversions
    std::uint64_t coord_from_padic(const PadicNumber& x) const {
        if (x.is_zero()) {
            if (x.absolute_precision() < W) throw std::domain_error("coordinate known to fewer than W digits");
            return 0;
        }
        if (*x.valuation() < 0) throw std::domain_error("element is not integral");
        if (x.absolute_precision() < W) throw std::domain_error("coordinate known to fewer than W digits");
        return from_int(x.unit() * ipow(p, *x.valuation()));
    }
    std::uint64_t coord_from_rational(const Rational& q) const {
        if (q == 0) return 0;
        return from_int(padyn::residue(q, p, W));
    }
    OK from_rational(const Rational& q) const { return {coord_from_rational(q), 0}; }

    OK from_ext(const ExtElement& x) const {
        if (deg == 1) throw std::invalid_argument("from_ext on Q_p");
        if (!(x.radicand() == *rad)) throw std::invalid_argument("radicand mismatch");
        const PadicNumber &u = x.u(), &v = x.v();
        if (p == 2 && rad->cls == -3) {  // u + v sqrt(-3) = (u - v) + 2v omega
            return {coord_from_padic(u - v), coord_from_padic(v + v)};
        }
        if (rad->uniformizer == UniformizerKind::one_plus_sqrt_d) return {coord_from_padic(u - v), coord_from_padic(v)};
        return {coord_from_padic(u), coord_from_padic(v)};
    }

    nlohmann::json to_json(const OK& x) const {
        if (deg == 1) return std::to_string(x.c0);
        return nlohmann::json::array({std::to_string(x.c0), std::to_string(x.c1)});
    }
    nlohmann::json coset_json(const OK& x, int n) const {
        OK r = rep(key(x, n), n);
        if (deg == 1) return r.c0;
        return nlohmann::json::array({r.c0, r.c1});
    }
    nlohmann::json describe() const {
        nlohmann::json j{{"field", name()}, {"p", p}, {"e", e}, {"f", f}, {"working_digits", W}};
        if (deg == 2) j["basis"] = (p == 2 && rad->cls == -3) ? "1, (1+sqrt(-3))/2"
                                   : rad->uniformizer == UniformizerKind::one_plus_sqrt_d ? "1, 1+sqrt(d)"
                                                                                          : "1, sqrt(d)";
        return j;
    }

private:
    void init_modulus() {
        W = max_digits(p);
        M = pw(W);
    }
};

// ---------------------------------------------------------------------------
// Polynomial self-maps of O_K with integral coefficients; affine maps and
// multiplications are the instances the theory needs.
struct PolyMap {
    std::vector<OK> coeffs;  // coeffs[i] * x^i

    static PolyMap multiplication(const OK& alpha) { return {{OK{}, alpha}}; }
    static PolyMap affine(const OK& alpha, const OK& beta) { return {{beta, alpha}}; }

    OK apply(const OKRing& R, const OK& x) const {
        OK r = R.zero();
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) r = R.add(R.mul(r, x), *it);
        return r;
    }
    OK derivative(const OKRing& R, const OK& x) const {
        OK r = R.zero();
        for (std::size_t i = coeffs.size(); i-- > 1;) r = R.add(R.mul(r, x), R.mul(R.make(static_cast<long>(i)), coeffs[i]));
        return r;
    }
    OK iterate(const OKRing& R, OK x, std::uint64_t k) const {
        for (std::uint64_t i = 0; i < k; ++i) x = apply(R, x);
        return x;
    }
    // (F^k)'(x) by the chain rule.
    OK iterate_derivative(const OKRing& R, OK x, std::uint64_t k) const {
        OK d = R.one();
        for (std::uint64_t i = 0; i < k; ++i) {
            d = R.mul(d, derivative(R, x));
            x = apply(R, x);
        }
        return d;
    }
    nlohmann::json to_json(const OKRing& R) const {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& c : coeffs) j.push_back(R.to_json(c));
        return j;
    }
};

enum class Domain { whole, units };

enum class CycleClass { grows, splits, grows_tails, partially_splits };

inline const char* to_string(CycleClass c) {
    switch (c) {
        case CycleClass::grows: return "grows";
        case CycleClass::splits: return "splits";
        case CycleClass::grows_tails: return "grows_tails";
        case CycleClass::partially_splits: return "partially_splits";
    }
    return "?";
}

struct CycleRecord {
    int level = 0;
    std::vector<std::uint64_t> keys;  // cosets in orbit order, starting at the minimal key
    std::uint64_t a_res = 0;          // a_n mod pi, residue index
    std::uint64_t b_res = 0;          // b_n mod pi, residue index
    bool b_meaningful = false;        // a_n = 1 mod pi
    CycleClass cls = CycleClass::splits;
    // For grows_tails / partially_splits: the level n+1 coset of the periodic lift.
    std::optional<std::uint64_t> periodic_lift_key;

    std::size_t length() const { return keys.size(); }
};

// Full-precision a_n(x), b_n(x) at a representative x of a k-cycle at level n.
struct Linearization {
    OK a, b;
};

inline Linearization linearization_at(const OKRing& R, const PolyMap& F, const OK& x, std::size_t k, int n) {
    OK G = F.iterate(R, x, k);
    OK diff = R.sub(G, x);
    if (R.val(diff) < n) throw OracleError("linearization: point is not k-periodic at level n");
    return {F.iterate_derivative(R, x, k), R.div_pi_pow(diff, n)};
}

inline CycleClass classify_linearization(const OKRing& R, const OK& a, const OK& b) {
    std::uint64_t ar = R.residue(a);
    if (ar == 1) return R.residue(b) == 0 ? CycleClass::splits : CycleClass::grows;
    if (ar == 0) return CycleClass::grows_tails;
    return CycleClass::partially_splits;
}

namespace detail {

inline void require_level_precision(const OKRing& R, int n) {
    // b_{n+1} and the recurrences need about 2n + 2 pi-digits.
    if (2 * n + 4 > R.pi_precision()) throw BudgetError("level " + std::to_string(n) + " exceeds working precision of " + R.name());
}

inline CycleRecord make_record(const OKRing& R, const PolyMap& F, std::vector<std::uint64_t> keys, int n) {
    CycleRecord c;
    c.level = n;
    c.keys = std::move(keys);
    OK x = R.rep(c.keys.front(), n);
    Linearization L = linearization_at(R, F, x, c.length(), n);
    c.a_res = R.residue(L.a);
    c.b_res = R.residue(L.b);
    c.cls = classify_linearization(R, L.a, L.b);
    c.b_meaningful = c.cls == CycleClass::grows || c.cls == CycleClass::splits;
    if (c.cls == CycleClass::grows_tails || c.cls == CycleClass::partially_splits) {
        // Fixed point of t -> b + a t on the residue field.
        OK pin = R.pow(R.uniformizer(), static_cast<std::uint64_t>(n));
        for (const OK& t : R.digits()) {
            OK img = R.add(L.b, R.mul(L.a, t));
            if (R.residue(img) == R.residue(t)) {
                c.periodic_lift_key = R.key(R.add(x, R.mul(pin, t)), n + 1);
                break;
            }
        }
    }
    return c;
}

// Cycles of a functional graph given as next[] over the index set `nodes`.
template <class Next>
std::vector<std::vector<std::uint64_t>> functional_cycles(const std::vector<std::uint64_t>& nodes, Next&& next_of) {
    std::unordered_map<std::uint64_t, int> state;  // 1 = on stack, 2 = done
    state.reserve(nodes.size() * 2);
    std::vector<std::vector<std::uint64_t>> cycles;
    std::vector<std::uint64_t> path;
    for (std::uint64_t s : nodes) {
        if (state.count(s)) continue;
        path.clear();
        std::uint64_t x = s;
        while (!state.count(x)) {
            state[x] = 1;
            path.push_back(x);
            x = next_of(x);
        }
        if (state[x] == 1) {
            auto it = std::find(path.begin(), path.end(), x);
            std::vector<std::uint64_t> cyc(it, path.end());
            auto mn = std::min_element(cyc.begin(), cyc.end());
            std::rotate(cyc.begin(), mn, cyc.end());
            cycles.push_back(std::move(cyc));
        }
        for (auto y : path) state[y] = 2;
    }
    std::sort(cycles.begin(), cycles.end(), [](const auto& u, const auto& v) { return u.front() < v.front(); });
    return cycles;
}

}  // namespace detail

struct LevelCycles {
    int level = 0;
    std::uint64_t domain_size = 0;
    std::uint64_t tail_points = 0;
    std::vector<CycleRecord> cycles;
};

// Complete cycle decomposition of F_n on the domain (O_K or U) modulo pi^n.
inline LevelCycles cycles_at_level(const OKRing& R, const PolyMap& F, int n, Domain dom = Domain::whole,
                                   std::uint64_t budget = kDefaultCosetBudget) {
    if (n < 1) throw InputError("level must be >= 1");
    detail::require_level_precision(R, n);
    if (R.quotient_size(n) > budget) throw BudgetError("quotient O_K/pi^" + std::to_string(n) + " exceeds coset budget");
    auto size = static_cast<std::uint64_t>(R.quotient_size(n));
    std::vector<std::uint64_t> nodes;
    nodes.reserve(size);
    for (std::uint64_t k = 0; k < size; ++k)
        if (dom == Domain::whole || R.is_unit(R.rep(k, n))) nodes.push_back(k);
    std::vector<std::uint64_t> next(size, 0);
    for (auto k : nodes) {
        OK y = F.apply(R, R.rep(k, n));
        if (dom == Domain::units && !R.is_unit(y)) throw InputError("domain not invariant: a unit maps outside U");
        next[k] = R.key(y, n);
    }
    LevelCycles out;
    out.level = n;
    out.domain_size = nodes.size();
    std::uint64_t on_cycles = 0;
    for (auto& cyc : detail::functional_cycles(nodes, [&](std::uint64_t x) { return next[x]; })) {
        on_cycles += cyc.size();
        out.cycles.push_back(detail::make_record(R, F, std::move(cyc), n));
    }
    out.tail_points = out.domain_size - on_cycles;
    return out;
}

inline std::pair<std::uint64_t, std::uint64_t> an_bn(const OKRing& R, const PolyMap& F, const CycleRecord& c) {
    Linearization L = linearization_at(R, F, R.rep(c.keys.front(), c.level), c.length(), c.level);
    return {R.residue(L.a), R.residue(L.b)};
}

struct LiftReport {
    std::vector<CycleRecord> lifts;
    std::uint64_t tail_points = 0;
    bool recurrence_ok = true;   // a_{n+1}, pi b_{n+1} agree with the recurrences mod pi^n
    bool structure_ok = true;    // lift lengths match the classification
    bool persistence_ok = true;  // a_n = 1 or 0 mod pi is inherited
    bool mass_ok = true;         // coset mass is conserved
    bool b_constant = true;      // b_n mod pi constant on the first coset when a_n = 1
    int predicted_b_checked = 0; // lifts where b_{n+1} mod pi was predicted (n >= 2)
    std::vector<std::string> notes;

    bool ok() const { return recurrence_ok && structure_ok && persistence_ok && mass_ok && b_constant; }
};

inline LiftReport lift_cycles(const OKRing& R, const PolyMap& F, const CycleRecord& c) {
    const int n = c.level;
    detail::require_level_precision(R, n + 1);
    const std::size_t k = c.length();
    OK pin = R.pow(R.uniformizer(), static_cast<std::uint64_t>(n));
    LiftReport rep;

    // X = union of x_i + pi^n t over the cycle.
    std::vector<std::uint64_t> nodes;
    std::unordered_map<std::uint64_t, std::uint64_t> next;
    std::unordered_map<std::uint64_t, std::uint64_t> parent;  // level n+1 key -> level n key
    for (auto key : c.keys) {
        OK x = R.rep(key, n);
        for (const OK& t : R.digits()) {
            std::uint64_t kk = R.key(R.add(x, R.mul(pin, t)), n + 1);
            nodes.push_back(kk);
            parent[kk] = key;
        }
    }
    std::sort(nodes.begin(), nodes.end());
    for (auto kk : nodes) {
        std::uint64_t img = R.key(F.apply(R, R.rep(kk, n + 1)), n + 1);
        if (!parent.count(img)) throw OracleError("lift set is not invariant");
        next[kk] = img;
    }
    std::uint64_t on_cycles = 0;
    for (auto& cyc : detail::functional_cycles(nodes, [&](std::uint64_t x) { return next.at(x); })) {
        on_cycles += cyc.size();
        rep.lifts.push_back(detail::make_record(R, F, std::move(cyc), n + 1));
    }
    rep.tail_points = nodes.size() - on_cycles;

    // Recurrences, at the first point of each lift.
    for (const auto& L : rep.lifts) {
        if (L.length() % k != 0) {
            rep.structure_ok = false;
            rep.notes.push_back("lift length not a multiple of the parent length");
            continue;
        }
        std::uint64_t r = L.length() / k;
        OK y = R.rep(L.keys.front(), n + 1);
        OK x = R.rep(parent.at(L.keys.front()), n);
        Linearization lin = linearization_at(R, F, x, k, n);
        OK t = R.div_pi_pow(R.sub(y, x), n);
        OK ar = R.pow(lin.a, r);
        OK geo = R.zero(), ap = R.one();
        for (std::uint64_t i = 0; i < r; ++i) {
            geo = R.add(geo, ap);
            ap = R.mul(ap, lin.a);
        }
        OK predicted = R.add(R.mul(t, R.sub(ar, R.one())), R.mul(lin.b, geo));  // pi * b_{n+1}
        OK direct = R.div_pi_pow(R.sub(F.iterate(R, y, k * r), y), n);
        OK a_direct = F.iterate_derivative(R, y, k * r);
        if (R.val(R.sub(direct, predicted)) < n || R.val(R.sub(a_direct, ar)) < n) {
            rep.recurrence_ok = false;
            rep.notes.push_back("recurrence mismatch at lift of length " + std::to_string(L.length()));
        }
        if (n >= 2) {
            if (R.val(predicted) < 1) {
                rep.recurrence_ok = false;
                rep.notes.push_back("predicted pi*b_{n+1} not divisible by pi");
            } else if (R.residue(R.div_pi(predicted)) != L.b_res) {
                rep.recurrence_ok = false;
                rep.notes.push_back("predicted b_{n+1} mod pi differs from recomputation");
            } else {
                ++rep.predicted_b_checked;
            }
        }
        if (R.residue(ar) != L.a_res) {
            rep.recurrence_ok = false;
            rep.notes.push_back("predicted a_{n+1} mod pi differs from recomputation");
        }
        if (c.cls == CycleClass::grows || c.cls == CycleClass::splits) rep.persistence_ok &= L.a_res == R.residue(R.one());
        if (c.cls == CycleClass::grows_tails) rep.persistence_ok &= L.a_res == 0;
    }

    // Lift structure predicted by the classification.
    const std::uint64_t q = R.residue_size();
    std::map<std::size_t, std::uint64_t> hist;
    for (const auto& L : rep.lifts) ++hist[L.length()];
    std::map<std::size_t, std::uint64_t> expect;
    switch (c.cls) {
        case CycleClass::grows: expect[k * static_cast<std::size_t>(R.p)] = q / static_cast<std::uint64_t>(R.p); break;
        case CycleClass::splits: expect[k] = q; break;
        case CycleClass::grows_tails: expect[k] = 1; break;
        case CycleClass::partially_splits: {
            OK a = R.rep(c.a_res, 1);
            int ell = R.residue_order(a);
            expect[k] = 1;
            expect[k * static_cast<std::size_t>(ell)] += (q - 1) / static_cast<std::uint64_t>(ell);
            break;
        }
    }
    if (hist != expect) {
        rep.structure_ok = false;
        rep.notes.push_back(std::string("lift structure differs from the ") + to_string(c.cls) + " rule");
    }
    if (c.cls == CycleClass::grows_tails || c.cls == CycleClass::partially_splits) {
        bool found = false;
        for (const auto& L : rep.lifts)
            if (L.length() == k && std::find(L.keys.begin(), L.keys.end(), *c.periodic_lift_key) != L.keys.end()) found = true;
        if (!found) {
            rep.structure_ok = false;
            rep.notes.push_back("recorded periodic coset is not on the length-k lift");
        }
    }

    // Mass: sum of lift lengths * mu(level n+1 coset) + tails = k * mu(level n coset).
    Rational cell_next(Int(1), Int(std::to_string(static_cast<std::uint64_t>(R.quotient_size(n + 1)))));
    Rational cell_here(Int(1), Int(std::to_string(static_cast<std::uint64_t>(R.quotient_size(n)))));
    Rational mass = 0;
    for (const auto& L : rep.lifts) mass += Rational(static_cast<long>(L.length())) * cell_next;
    mass += Rational(static_cast<long>(rep.tail_points)) * cell_next;
    rep.mass_ok = mass == Rational(static_cast<long>(k)) * cell_here;
    if (c.cls != CycleClass::grows_tails && c.cls != CycleClass::partially_splits && rep.tail_points != 0) rep.mass_ok = false;

    // b_n mod pi constant on the coset of x_1 when a_n = 1.
    if (c.b_meaningful) {
        OK x = R.rep(c.keys.front(), n);
        for (const OK& t : R.digits()) {
            OK xt = R.add(x, R.mul(pin, R.mul(pin, t)));  // same level-n coset, different lift
            OK xs = R.add(x, R.mul(pin, t));
            for (const OK& z : {xt, xs}) {
                Linearization Lz = linearization_at(R, F, z, k, n);
                if (R.residue(Lz.b) != c.b_res) rep.b_constant = false;
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Type (l, E) of x -> alpha x on U.
struct MultiplicationType {
    int ell = 0;
    std::vector<int> V;  // V_i = v_pi(alpha^(l p^i) - 1)
    std::vector<int> E;  // E_i = V_i - V_{i-1}, i >= 1
    int tail = 0;        // eventual constant value of E
    int start_level = 0; // V_0
    Int clopen_count = 0;

    // Cycle length of alpha on U / pi^n.
    Int cycle_length(long p, int n) const {
        int j = 0;
        for (int v : V)
            if (v < n) ++j;
        if (!V.empty() && V.back() < n) throw BudgetError("cycle_length: level beyond computed type vector");
        return Int(ell) * ipow(p, j);
    }

    nlohmann::json to_json() const {
        return {{"ell", ell}, {"V", V}, {"E", E}, {"tail", tail}, {"start_level", start_level}, {"clopen_count", clopen_count.get_str()}};
    }
};

inline MultiplicationType multiplication_type(const OKRing& R, const OK& alpha) {
    if (!R.is_unit(alpha)) throw InputError("multiplication_type: alpha is not a unit");
    MultiplicationType mt;
    mt.ell = R.residue_order(alpha);
    OK a = R.pow(alpha, static_cast<std::uint64_t>(mt.ell));
    const int cap = R.pi_precision() - 2;
    auto v_of = [&](const OK& x) {
        int v = R.val(R.sub(x, R.one()));
        if (v >= cap) throw RefusalError("alpha is a root of unity to working precision");
        return v;
    };
    mt.V.push_back(v_of(a));
    // Stop after two consecutive entries equal e, beyond V_2; one extra entry for p = 2, e = 2.
    for (int i = 1; i < 16; ++i) {
        a = R.pow(a, static_cast<std::uint64_t>(R.p));
        mt.V.push_back(v_of(a));
        mt.E.push_back(mt.V[i] - mt.V[i - 1]);
        int need = (R.p == 2 && R.e == 2) ? 3 : 2;
        if (i >= need + 1 && mt.E[i - 1] == R.e && mt.E[i - 2] == R.e) break;
    }
    mt.tail = mt.E.back();
    mt.start_level = mt.V[0];
    Int q = ipow(R.p, R.f);
    mt.clopen_count = (q - 1) * ipow(R.p, (mt.V[0] - 1) * R.f) / mt.ell;
    return mt;
}

struct MultiplicationCheck {
    bool ok = true;
    int max_level = 0;
    std::vector<std::pair<int, std::uint64_t>> observed;  // (level, cycle length) where uniform
    std::vector<std::string> notes;
};

// Exhaustive cycle structure of x -> alpha x on U / pi^n, n <= start_level + extra.
inline MultiplicationCheck check_multiplication_type(const OKRing& R, const OK& alpha, const MultiplicationType& mt,
                                                     int extra = 3, std::uint64_t budget = kDefaultCosetBudget) {
    MultiplicationCheck chk;
    chk.max_level = mt.start_level + extra;
    PolyMap F = PolyMap::multiplication(alpha);
    for (int n = 1; n <= chk.max_level; ++n) {
        LevelCycles lc = cycles_at_level(R, F, n, Domain::units, budget);
        Int expect_len = mt.cycle_length(R.p, n);
        std::uint64_t len = lc.cycles.front().length();
        for (const auto& c : lc.cycles)
            if (c.length() != len) {
                chk.ok = false;
                chk.notes.push_back("non-uniform cycle lengths at level " + std::to_string(n));
            }
        if (Int(std::to_string(len)) != expect_len) {
            chk.ok = false;
            chk.notes.push_back("level " + std::to_string(n) + ": observed length " + std::to_string(len) + ", predicted " + expect_len.get_str());
        }
        if (n == mt.start_level && Int(std::to_string(lc.cycles.size())) != mt.clopen_count) {
            chk.ok = false;
            chk.notes.push_back("clopen count mismatch at the start level");
        }
        if (lc.tail_points != 0) chk.ok = false;
        chk.observed.emplace_back(n, len);
    }
    return chk;
}

inline nlohmann::json cycles_json(const OKRing& R, const LevelCycles& lc) {
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : lc.cycles) {
        nlohmann::json reps = nlohmann::json::array();
        for (auto k : c.keys) reps.push_back(R.coset_json(R.rep(k, lc.level), lc.level));
        nlohmann::json b = c.b_meaningful ? nlohmann::json(R.coset_json(R.rep(c.b_res, 1), 1)) : nlohmann::json(nullptr);
        cs.push_back({{"length", c.length()}, {"representatives", reps}, {"a_n", R.coset_json(R.rep(c.a_res, 1), 1)}, {"b_n", b}, {"class", to_string(c.cls)}});
    }
    return {{"level", lc.level}, {"cycles", cs}};
}

}  // namespace padyn
