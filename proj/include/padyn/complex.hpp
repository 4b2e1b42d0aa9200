// Level-n cell complexes of P^1(Q_p) and the permutations that homographic
// maps with good reduction induce on them.
//
// vertex complex: balls at distance n from the Gauss point of Z_p, i.e.
//   Z cells  D(i, p^-n), 0 <= i < p^n, and
//   far cells {x : 1/x in D(p j, p^-n)}, 0 <= j < p^(n-1)        (p^n + p^(n-1) cells)
// edge complex: balls at distance n from the edge Z_p | P^1 \ Z_p, i.e.
//   Z cells  D(i, p^-n), and
//   far cells {x : 1/x in D(p j, p^-(n+1))}, 0 <= j < p^n          (2 p^n cells)
// Far cell 0 contains infinity.
#pragma once

#include "padyn/arith.hpp"
#include "padyn/projective.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace padyn {

enum class ComplexKind { vertex, edge };

inline const char* to_string(ComplexKind k) { return k == ComplexKind::vertex ? "vertex" : "edge"; }

inline constexpr std::uint64_t kDefaultCellBudget = 1000000;

// Worker threads for cell enumeration; results do not depend on it.
inline int& worker_threads() {
    static int n = 1;
    return n;
}

// Primitive integral matrix proportional to a rational Mobius map.
struct IntMatrix {
    Int A, B, C, D;

    static IntMatrix from(const Mobius<Rational>& M) {
        Int l = 1;
        for (const Rational* q : {&M.a, &M.b, &M.c, &M.d}) l = lcm(l, q->get_den());
        Int e[4];
        int k = 0;
        for (const Rational* q : {&M.a, &M.b, &M.c, &M.d}) e[k++] = q->get_num() * (l / q->get_den());
        Int g = 0;
        for (auto& x : e) g = gcd(g, x);
        for (auto& x : e) x /= g;
        return {e[0], e[1], e[2], e[3]};
    }
    Int det() const { return A * D - B * C; }
};

class CellComplex {
public:
    CellComplex(long p, int n, ComplexKind kind, std::uint64_t budget = kDefaultCellBudget) : p_(p), n_(n), kind_(kind) {
        require_prime(p);
        if (n < 1) throw InputError("complex level must be >= 1");
        Int z = ipow(p, n);
        Int far = kind == ComplexKind::vertex ? ipow(p, n - 1) : z;
        if (z + far > Int(std::to_string(budget))) throw BudgetError("level " + std::to_string(n) + " complex exceeds the cell budget");
        z_ = z.get_ui();
        far_ = far.get_ui();
    }

    long prime() const { return p_; }
    int level() const { return n_; }
    ComplexKind kind() const { return kind_; }
    std::uint64_t size() const { return z_ + far_; }
    std::uint64_t z_count() const { return z_; }
    bool is_far(std::uint64_t id) const { return id >= z_; }
    std::uint64_t infinity_cell() const { return z_; }

    // Homogeneous integral centre [y0 : y1].
    std::pair<Int, Int> center(std::uint64_t id) const {
        if (id < z_) return {Int(std::to_string(id)), 1};
        std::uint64_t j = id - z_;
        return {1, Int(p_) * Int(std::to_string(j))};
    }

    QPoint center_point(std::uint64_t id) const {
        auto [y0, y1] = center(id);
        if (y1 == 0) return QPoint::infinity();
        return QPoint::finite(frac(y0, y1));
    }

    // Modulus used to read off the far-cell index from w = 1/x.
    Int far_modulus() const { return kind_ == ComplexKind::vertex ? ipow(p_, n_) : ipow(p_, n_ + 1); }

    std::uint64_t locate(const QPoint& P) const {
        if (P.is_infinity()) return z_;
        const Rational& x = P.value();
        if (x == 0) return 0;
        if (vp(x, p_) >= 0) return residue(x, p_, n_).get_ui();
        Rational w = 1 / x;
        Int r = residue(w, p_, kind_ == ComplexKind::vertex ? n_ : n_ + 1);
        return z_ + Int(r / p_).get_ui();
    }

    // The cell as a disk (or complement) in these coordinates.
    Disk<Rational> disk(std::uint64_t id) const {
        if (id < z_) return {Rational(Int(std::to_string(id))), -2 * n_, DiskKind::closed, 2};
        std::uint64_t j = id - z_;
        int w_exp = kind_ == ComplexKind::vertex ? n_ : n_ + 1;  // 1/x in D(p j, p^-w_exp)
        if (j == 0) return {Rational(0), 2 * (w_exp - 1), DiskKind::complement, 2};
        Mobius<Rational> inv{0, 1, 1, 0};
        return image_of_disk(inv, Disk<Rational>{Rational(p_) * Rational(Int(std::to_string(j))), -2 * w_exp, DiskKind::closed, 2}, p_);
    }

    // Index of the level n-1 cell containing this one.
    std::uint64_t parent(std::uint64_t id, const CellComplex& up) const {
        if (up.n_ != n_ - 1 || up.kind_ != kind_) throw std::invalid_argument("parent: complex mismatch");
        if (id < z_) return id % up.z_;
        return up.z_ + (id - z_) % up.far_;
    }

    nlohmann::json describe() const {
        return {{"kind", to_string(kind_)}, {"level", n_}, {"cells", size()}};
    }

private:
    long p_;
    int n_;
    ComplexKind kind_;
    std::uint64_t z_ = 0, far_ = 0;
};

namespace detail {

using i128 = __int128;

inline int v_i128(i128 x, long p, int cap) {
    int v = 0;
    while (v < cap && x % p == 0) {
        x /= p;
        ++v;
    }
    return v;
}

inline std::int64_t inv_mod_i64(std::int64_t a, std::int64_t m) {
    std::int64_t g = m, x = 0, x1 = 1, a1 = ((a % m) + m) % m;
    std::int64_t b = a1;
    while (b) {
        std::int64_t q = g / b;
        std::int64_t t = g - q * b;
        g = b;
        b = t;
        t = x - q * x1;
        x = x1;
        x1 = t;
    }
    if (g != 1) throw std::domain_error("inv_mod_i64: not invertible");
    return ((x % m) + m) % m;
}

inline bool fits_fast(const IntMatrix& M, long p, int n) {
    auto small = [](const Int& x) { return mpz_sizeinbase(x.get_mpz_t(), 2) <= 40; };
    Int bound = ipow(p, n + 2);
    return small(M.A) && small(M.B) && small(M.C) && small(M.D) && mpz_sizeinbase(bound.get_mpz_t(), 2) <= 40;
}

}  // namespace detail

// next[id] = cell containing the image of the cell centre. Throws OracleError
// when the induced map is not a permutation (the complex is not invariant).
inline std::vector<std::uint64_t> induced_cell_map(const CellComplex& K, const IntMatrix& M) {
    using detail::i128;
    const long p = K.prime();
    const int n = K.level();
    const std::uint64_t N = K.size();
    std::vector<std::uint64_t> next(N);
    if (detail::fits_fast(M, p, n)) {
        const i128 A = M.A.get_si(), B = M.B.get_si(), C = M.C.get_si(), D = M.D.get_si();
        const std::int64_t mz = static_cast<std::int64_t>(K.z_count());
        const std::int64_t mf = K.far_modulus().get_si();
        const int cap = 200;
        auto run = [&](std::uint64_t lo, std::uint64_t hi) {
        for (std::uint64_t id = lo; id < hi; ++id) {
            i128 y0, y1;
            if (id < K.z_count()) {
                y0 = static_cast<i128>(id);
                y1 = 1;
            } else {
                y0 = 1;
                y1 = static_cast<i128>(p) * static_cast<i128>(id - K.z_count());
            }
            i128 X = A * y0 + B * y1, Y = C * y0 + D * y1;
            std::uint64_t out;
            if (Y == 0) {
                out = K.z_count();
            } else {
                int vY = detail::v_i128(Y, p, cap);
                int vX = X == 0 ? cap : detail::v_i128(X, p, cap);
                if (vX >= vY) {
                    i128 pv = 1;
                    for (int i = 0; i < vY; ++i) pv *= p;
                    i128 Xs = X / pv, Ys = Y / pv;
                    std::int64_t xr = static_cast<std::int64_t>(((Xs % mz) + mz) % mz);
                    std::int64_t yr = static_cast<std::int64_t>(((Ys % mz) + mz) % mz);
                    out = static_cast<std::uint64_t>(static_cast<i128>(xr) * detail::inv_mod_i64(yr, mz) % mz);
                } else {
                    i128 pv = 1;
                    for (int i = 0; i < vX; ++i) pv *= p;
                    i128 Xs = X / pv, Ys = Y / pv;
                    std::int64_t xr = static_cast<std::int64_t>(((Xs % mf) + mf) % mf);
                    std::int64_t yr = static_cast<std::int64_t>(((Ys % mf) + mf) % mf);
                    std::int64_t w = static_cast<std::int64_t>(static_cast<i128>(yr) * detail::inv_mod_i64(xr, mf) % mf);
                    out = K.z_count() + static_cast<std::uint64_t>(w / p);
                }
            }
            next[id] = out;
        }
        };
        int T = std::max(1, worker_threads());
        if (T == 1 || N < 4096) {
            run(0, N);
        } else {
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errs(T);
            std::uint64_t chunk = (N + T - 1) / T;
            for (int t = 0; t < T; ++t) {
                std::uint64_t lo = std::min<std::uint64_t>(N, chunk * t), hi = std::min<std::uint64_t>(N, lo + chunk);
                pool.emplace_back([&, lo, hi, t] {
                    try {
                        run(lo, hi);
                    } catch (...) {
                        errs[t] = std::current_exception();
                    }
                });
            }
            for (auto& th : pool) th.join();
            for (auto& e : errs)
                if (e) std::rethrow_exception(e);
        }
    } else {
        Mobius<Rational> R{Rational(M.A), Rational(M.B), Rational(M.C), Rational(M.D)};
        for (std::uint64_t id = 0; id < N; ++id) next[id] = K.locate(R.apply(K.center_point(id)));
    }
    std::vector<char> hit(N, 0);
    for (auto t : next) {
        if (hit[t]) throw OracleError("induced cell map is not a bijection at level " + std::to_string(n) + ": the " +
                                      to_string(K.kind()) + " complex is not invariant");
        hit[t] = 1;
    }
    return next;
}

// Disk transport check: the exact image of every cell equals the located cell.
inline bool transport_agrees(const CellComplex& K, const Mobius<Rational>& M, const std::vector<std::uint64_t>& next) {
    for (std::uint64_t id = 0; id < K.size(); ++id)
        if (!disk_equal(image_of_disk(M, K.disk(id), K.prime()), K.disk(next[id]), K.prime())) return false;
    return true;
}

inline std::vector<std::vector<std::uint64_t>> permutation_cycles(const std::vector<std::uint64_t>& next) {
    std::vector<char> seen(next.size(), 0);
    std::vector<std::vector<std::uint64_t>> out;
    for (std::uint64_t s = 0; s < next.size(); ++s) {
        if (seen[s]) continue;
        std::vector<std::uint64_t> cyc;
        for (std::uint64_t x = s; !seen[x]; x = next[x]) {
            seen[x] = 1;
            cyc.push_back(x);
        }
        out.push_back(std::move(cyc));
    }
    return out;
}

// Relation between two P^1 disks (closed disks or complements).
enum class DiskRelation { disjoint, first_inside, second_inside, equal, overlap };

inline DiskRelation disk_relation(const Disk<Rational>& X, const Disk<Rational>& Y, long p) {
    auto closed_rel = [p](const Disk<Rational>& a, const Disk<Rational>& b) {
        // closed vs closed: disjoint or nested
        auto hv = half_val(Rational(a.center - b.center), p);
        int big = std::max(a.twice_exp, b.twice_exp);
        bool meet = !hv || *hv >= -big;
        if (!meet) return DiskRelation::disjoint;
        if (a.twice_exp == b.twice_exp) return DiskRelation::equal;
        return a.twice_exp < b.twice_exp ? DiskRelation::first_inside : DiskRelation::second_inside;
    };
    if (X.closed() && Y.closed()) return closed_rel(X, Y);
    if (!X.closed() && !Y.closed()) {
        // P \ A vs P \ B: P\A inside P\B iff B inside A.
        switch (closed_rel(X.complemented(), Y.complemented())) {
            case DiskRelation::equal: return DiskRelation::equal;
            case DiskRelation::first_inside: return DiskRelation::second_inside;
            case DiskRelation::second_inside: return DiskRelation::first_inside;
            default: return DiskRelation::overlap;
        }
    }
    bool swapped = !X.closed();
    const Disk<Rational>& A = swapped ? Y : X;           // closed
    const Disk<Rational> Bc = (swapped ? X : Y).complemented();  // P \ B = Bc
    DiskRelation r = closed_rel(A, Bc);
    DiskRelation res;
    if (r == DiskRelation::disjoint) res = DiskRelation::first_inside;  // A inside P \ Bc
    else if (r == DiskRelation::first_inside || r == DiskRelation::equal) res = DiskRelation::disjoint;
    else res = DiskRelation::overlap;
    if (swapped && res == DiskRelation::first_inside) res = DiskRelation::second_inside;
    return res;
}

// Canonical form of a Q_p disk: centre reduced to its shortest p-adic truncation.
inline Disk<Rational> canonical_disk(const Disk<Rational>& D, long p) {
    Disk<Rational> r = D;
    if (D.twice_exp % 2 != 0) throw std::invalid_argument("Q_p disk with a radius outside p^Z");
    r.center = truncate(D.center, p, -D.twice_exp / 2);
    return r;
}

inline nlohmann::json ball_json(const Disk<Rational>& D, long p) {
    Disk<Rational> c = canonical_disk(D, p);
    return {{"center", to_string(c.center)}, {"radius_exp", c.twice_exp / 2}, {"kind", to_string(c.kind)}};
}

inline std::string ball_text(const Disk<Rational>& D, long p) {
    Disk<Rational> c = canonical_disk(D, p);
    std::string r = "D(" + to_string(c.center) + ", " + std::to_string(p) + "^" + std::to_string(c.twice_exp / 2) + ")";
    return c.closed() ? r : "P1 \\ " + r;
}

}  // namespace padyn
