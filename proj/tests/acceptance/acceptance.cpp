// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include "padyn/cycles.hpp"
#include "padyn/measure.hpp"
#include "padyn/verifier.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace padyn;
using nlohmann::json;

namespace {

struct Outcome {
    bool ok = true;
    std::ostringstream detail;
    void fail(const std::string& why) {
        if (ok) detail.str("");
        ok = false;
        detail << why << "; ";
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json load_corpus() {
    std::ifstream f(std::string(PADYN_FIXTURES) + "/corpus.json");
    if (!f) throw std::runtime_error("corpus fixture missing");
    return json::parse(f);
}

Classification cls(const std::string& map, long p) { return classify(HomographicMap::parse(map, p)); }

// Ball D(center, radius) with the radius given as a rational power of p.
Disk<Rational> ball(const char* center, const char* radius, long p) {
    Rational r = parse_rational(radius);
    if (r != rpow(p, vp(r, p))) throw std::invalid_argument("radius is not a power of p");
    return qp_ball(parse_rational(center), vp(r, p));
}

bool atlas_has(const CaseIIIAtlas& A, int comp, const Disk<Rational>& D) {
    for (const auto& c : A.component_cells(comp))
        if (disk_equal(c, D, A.p())) return true;
    return false;
}

// --- 1 -------------------------------------------------------------------
void criterion1(Outcome& o) {
    auto t0 = std::chrono::steady_clock::now();
    auto C = cls("0,1,1,1", 3);
    auto A = component_atlas(C);
    json r = decomposition_report(C, &A);
    if (C.tag != CaseTag::case_iii || C.rad->ramified()) o.fail("not Case III unramified");
    if (C.ell != 4) o.fail("ell = " + std::to_string(C.ell));
    if (C.V != 1 || C.v_label != "v_3(lambda^4-1)") o.fail("V = " + std::to_string(C.V));
    if (minimal_count(C).value != 1 || r["minimal"] != true) o.fail("not minimal");
    if (odometer_base(C) != 4 || r["odometer"]["ratio"] != 3) o.fail("odometer");
    if (std::string(measure_tag(C)) != "mu_hat") o.fail("measure");
    double dt = seconds_since(t0);
    if (dt >= 1.0) o.fail("runtime " + std::to_string(dt) + " s");
    if (o.ok) o.detail << "Case III unramified, ell=4, v_3(lambda^4-1)=1, count 1, odometer (4,12,36,...), mu_hat in " << dt << " s";
}

// --- 2 -------------------------------------------------------------------
void criterion2(Outcome& o) {
    auto t0 = std::chrono::steady_clock::now();
    const long p = 2;
    auto C = cls("0,1,1,1", p);
    if (!C.rad || C.rad->cls != -3) o.fail("radicand class");
    if (C.ell != 3) o.fail("ell = " + std::to_string(C.ell));
    if (C.V != 3 || C.v_label != "v_2(lambda^6-1)") o.fail("V = " + std::to_string(C.V));
    if (minimal_count(C).value != 2) o.fail("count");
    if (odometer_base(C) != 3) o.fail("odometer base");
    auto A = component_atlas(C, 3);
    if (A.components.size() != 2) {
        o.fail("atlas has " + std::to_string(A.components.size()) + " components");
        return;
    }
    int b1 = A.component_index(QPoint::finite(0)), b2 = 1 - b1;
    // Unambiguous balls of the printed lists.
    for (auto [c, r] : std::vector<std::pair<const char*, const char*>>{{"0", "1/8"}, {"1", "1/8"}, {"2/3", "1/8"}, {"3/5", "1/8"}})
        if (!atlas_has(A, b1, ball(c, r, p))) o.fail(std::string("B_1 lacks D(") + c + "," + r + ")");
    if (!atlas_has(A, b1, ball("3/5", "4", p).complemented())) o.fail("B_1 lacks P1 \\ D(3/5,4)");
    for (auto [c, r] : std::vector<std::pair<const char*, const char*>>{{"2", "1/8"}, {"1/3", "1/8"}, {"3/4", "2"}, {"4/7", "1/8"}})
        if (!atlas_has(A, b2, ball(c, r, p))) o.fail(std::string("B_2 lacks D(") + c + "," + r + ")");
    // The printed D(1/2,1) holds 3/2, which lies in B_2; the B_1 ball there is D(1/2,1/2).
    if (A.component_index(QPoint::finite(Rational(3, 2))) != b2 || !atlas_has(A, b1, ball("1/2", "1/2", p)))
        o.fail("D(1/2,1) anomaly not as recorded");
    // The printed D(1/11,1/8) repeats D(1/3,1/8).
    if (!disk_equal(ball("1/11", "1/8", p), ball("1/3", "1/8", p), p)) o.fail("D(1/11,1/8) anomaly not as recorded");
    // The printed D(18/11,1) is Z_2 and meets both components.
    if (!disk_equal(ball("18/11", "1", p), qp_ball(0, 0), p) || A.component_index(QPoint::finite(2)) == A.component_index(QPoint::finite(0)))
        o.fail("D(18/11,1) anomaly not as recorded");
    double dt = seconds_since(t0);
    if (dt >= 1.0) o.fail("runtime " + std::to_string(dt) + " s");
    if (o.ok)
        o.detail << "class -3, ell=3, v_2(lambda^6-1)=3, count 2, odometer (3,6,12,...); 9 printed balls matched, "
                 << "3 printed anomalies confirmed (D(1/2,1), D(1/11,1/8), D(18/11,1)) in " << dt << " s";
}

// --- 3 -------------------------------------------------------------------
void criterion3(Outcome& o, const json& corpus) {
    auto t0 = std::chrono::steady_clock::now();
    std::set<std::string> branches;
    std::set<long> primes;
    int n = 0;
    for (const auto& e : corpus["maps"]) {
        long p = e["p"];
        std::string m = e["map"];
        auto C = cls(m, p);
        if (!C.branch) {
            o.fail(m + " p=" + std::to_string(p) + " is not generic Case III");
            continue;
        }
        branches.insert(branch_info(*C.branch).name);
        primes.insert(p);
        Int want = minimal_count(C).value;
        if (json(want.get_si()) != e["count"]) o.fail(m + ": fixture count differs from closed form");
        int s = e["stabilization_level"];
        auto brute = brute_force_decompose(C, s + 1, true);
        for (int lvl : {s, s + 1})
            if (Int(std::to_string(brute[lvl - 1].cycles)) != want) {
                std::ostringstream w;
                w << "p=" << p << " map " << m << " branch " << branch_info(*C.branch).name << ": brute force " << brute[lvl - 1].cycles
                  << " cycles at level " << lvl << " but closed form " << want.get_str();
                o.fail(w.str());
            }
        ++n;
    }
    double dt = seconds_since(t0);
    if (n < 40) o.fail("corpus has only " + std::to_string(n) + " maps");
    if (branches.size() != 9) o.fail("corpus covers " + std::to_string(branches.size()) + " of 9 branches");
    if (primes != std::set<long>{2, 3, 5, 7}) o.fail("corpus misses a prime");
    if (dt >= 120) o.fail("runtime " + std::to_string(dt) + " s");
    if (o.ok) o.detail << n << " maps, 9 branches, p in {2,3,5,7}; counts agree at stabilization and one level deeper in " << dt << " s";
}

// --- 4 -------------------------------------------------------------------
std::vector<OKRing> test_rings(const std::vector<long>& primes) {
    std::vector<OKRing> rings;
    for (long p : primes) {
        rings.push_back(OKRing::rational(p));
        for (const auto& rad : CanonicalRadicand::all(p)) rings.push_back(OKRing::of(rad));
    }
    return rings;
}

OK random_element(std::mt19937_64& rng, const OKRing& R) {
    std::uniform_int_distribution<long> d(-50, 50);
    return R.make(d(rng), d(rng));
}

void criterion4(Outcome& o) {
    std::mt19937_64 rng(4);
    auto rings = test_rings({2, 3, 5});
    int cycles = 0, ramified = 0, unramified = 0, predicted_b = 0;
    std::map<std::string, int> classes;
    std::uniform_int_distribution<int> pick_ring(0, static_cast<int>(rings.size()) - 1), deg(1, 2), coin(0, 3);
    while (cycles < 200) {
        const OKRing& R = rings[pick_ring(rng)];
        int n = R.residue_size() > 10 ? 1 + coin(rng) % 2 : 1 + coin(rng) % 3;
        PolyMap F;
        // affine maps with a unit slope give grows/splits; quadratics add tails
        if (coin(rng) < 2) {
            OK a = random_element(rng, R);
            while (!R.is_unit(a)) a = random_element(rng, R);
            F = PolyMap::affine(a, random_element(rng, R));
        } else {
            F = PolyMap{{random_element(rng, R), random_element(rng, R), random_element(rng, R)}};
            if (deg(rng) == 2) F.coeffs.push_back(random_element(rng, R));
        }
        auto lc = cycles_at_level(R, F, n);
        std::uniform_int_distribution<std::size_t> which(0, lc.cycles.size() - 1);
        const auto& c = lc.cycles[which(rng)];
        auto rep = lift_cycles(R, F, c);
        if (!rep.ok()) {
            o.fail(R.name() + " level " + std::to_string(n) + " " + to_string(c.cls) + ": " + (rep.notes.empty() ? "?" : rep.notes.front()));
            return;
        }
        ++cycles;
        predicted_b += rep.predicted_b_checked;
        (R.e == 2 ? ramified : unramified)++;
        classes[to_string(c.cls)]++;
    }
    if (ramified == 0 || unramified == 0) o.fail("field mix");
    if (o.ok) {
        o.detail << cycles << " cycles (" << unramified << " over unramified/Q_p rings, " << ramified << " ramified); classes";
        for (auto& [k, v] : classes) o.detail << " " << k << "=" << v;
        o.detail << "; recurrences, lift structure and coset mass exact, " << predicted_b << " b_{n+1} predictions checked";
    }
}

// --- 5 -------------------------------------------------------------------
void criterion5(Outcome& o) {
    std::mt19937_64 rng(5);
    auto rings = test_rings({2, 3, 5});
    const std::uint64_t cap = 1u << 20;  // largest O / pi^n enumerated per check
    int fields = 0, total = 0, skipped = 0;
    for (const auto& R : rings) {
        int done = 0, attempts = 0;
        while (done < 50 && attempts < 5000) {
            ++attempts;
            OK a = random_element(rng, R);
            if (!R.is_unit(a)) continue;
            MultiplicationType mt;
            try {
                mt = multiplication_type(R, a);
            } catch (const RefusalError&) {
                continue;  // root of unity
            }
            if (R.quotient_size(mt.start_level + 3) > cap) {
                ++skipped;
                continue;
            }
            auto chk = check_multiplication_type(R, a, mt, 3, cap);
            if (!chk.ok) {
                o.fail(R.name() + ": " + (chk.notes.empty() ? "?" : chk.notes.front()));
                return;
            }
            ++done;
        }
        if (done < 50) o.fail(R.name() + ": only " + std::to_string(done) + " units within the enumeration cap");
        total += done;
        ++fields;
    }
    if (o.ok)
        o.detail << total << " units over " << fields << " fields (Q_p and every quadratic extension, p in {2,3,5}); (ell, E, clopen count) exact up to start_level+3; "
                 << skipped << " sampled units skipped as U/pi^(V0+3) exceeds 2^20 cosets";
}

// --- 6 -------------------------------------------------------------------
// max over a grid of a in Q_p of v_p(N(x - a)); N(x - a) = (u - a)^2 - d v^2.
int grid_oracle(const Rational& u, const Rational& v, long d, long p) {
    int vv = vp(v, p) + (vp(Rational(d), p) + 1) / 2;
    // a beyond p^-m0 from u only moves x - a away; the grid is finer than the distance
    int m0 = vv - (p == 2 ? 2 : 1), L = p == 2 ? 5 : 4;
    Rational base = truncate(u, p, m0 + L + 4);
    int best = std::numeric_limits<int>::min();
    Int span = ipow(p, L);
    for (Int c = 0; c < span; ++c) {
        Rational a = base + Rational(c) * rpow(p, m0);
        Rational w = u - a;
        best = std::max(best, vp(w * w - Rational(d) * v * v, p));
    }
    return best;
}

void criterion6(Outcome& o) {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<long> num(-500, 500), den(1, 60);
    int classes = 0, checked = 0;
    for (long p : {2L, 3L, 5L, 7L}) {
        for (const auto& rad : CanonicalRadicand::all(p)) {
            ++classes;
            for (int i = 0; i < 100; ++i) {
                Rational u(num(rng), den(rng)), v(num(rng), den(rng));
                u.canonicalize();
                v.canonicalize();
                if (v == 0) v = 1;
                auto D = distance_to_qp(ExtElement::from_rationals(rad, u, v));
                auto Dq = distance_to_qp(QuadNumber(u, v, Int(rad.cls)), rad);
                int oracle = grid_oracle(u, v, rad.cls, p);
                if (D.rational_point || -D.twice_exp != oracle || Dq.twice_exp != D.twice_exp) {
                    std::ostringstream w;
                    w << "p=" << p << " d=" << rad.cls << " x=" << to_string(u) << "+" << to_string(v) << "*sqrt(d): formula p^(" << D.twice_exp
                      << "/2), grid p^(" << -oracle << "/2)";
                    o.fail(w.str());
                    return;
                }
                ++checked;
            }
        }
    }
    if (o.ok) o.detail << checked << " elements over " << classes << " canonical classes (p in {2,3,5,7}) match the grid minimum exactly";
}

// --- 7 -------------------------------------------------------------------
bool brute_square(const Int& u, long p) {
    Int m = p == 2 ? Int(32) : ipow(p, 3);
    Int t = mod(u, m);
    for (Int x = 0; x < m; ++x)
        if (mod(x * x - t, m) == 0) return true;
    return false;
}

void criterion7(Outcome& o) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<long> big(1, 1000000000L);
    std::uniform_int_distribution<int> shift(0, 3);
    const int prec = 40;
    int qr = 0, nqr = 0;
    for (long p : {2L, 3L, 5L, 7L}) {
        int got_qr = 0, got_nqr = 0;
        while (got_qr < 200 || got_nqr < 200) {
            Int u = big(rng);
            if (mod(u, Int(p)) == 0) continue;
            bool residue = is_quadratic_residue(u, p);
            if ((residue && got_qr >= 200) || (!residue && got_nqr >= 200)) continue;
            int k = shift(rng);
            Rational a = Rational(u) * rpow(p, 2 * k);
            auto r = sqrt_in_qp(PadicNumber::from_rational(a, p, prec));
            bool oracle = brute_square(u, p);
            if (oracle != residue) {
                o.fail("mod-p^k oracle disagrees with the residue test at u=" + u.get_str());
                return;
            }
            if (residue) {
                if (!r) {
                    o.fail("p=" + std::to_string(p) + ": no root for residue " + to_string(a));
                    return;
                }
                Rational s = r->truncated_value();
                int v = vp(s * s - a, p);
                if (v < 2 * k + prec) {
                    o.fail("p=" + std::to_string(p) + ": v_p(sqrt^2 - a) = " + std::to_string(v) + " < " + std::to_string(2 * k + prec));
                    return;
                }
                ++got_qr;
            } else {
                if (r) {
                    o.fail("p=" + std::to_string(p) + ": root returned for non-residue " + to_string(a));
                    return;
                }
                ++got_nqr;
            }
        }
        qr += got_qr;
        nqr += got_nqr;
    }
    if (o.ok)
        o.detail << qr << " residues with v_p(sqrt^2 - a) >= v_p(a) + " << prec << ", " << nqr
                 << " non-residues absent; mod p^3 / mod 2^5 exhaustive oracle concurs";
}

// --- 8 -------------------------------------------------------------------
void criterion8(Outcome& o, const json& corpus) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::pair<std::string, long>> maps{{"0,1,1,1", 3}, {"0,1,1,1", 2}};
    for (const auto& e : corpus["maps"]) maps.emplace_back(e["map"], e["p"]);
    std::uint64_t cells = 0;
    int atlases = 0, corrupt_detected = 0;
    std::mt19937_64 rng(8);
    for (const auto& [m, p] : maps) {
        auto C = cls(m, p);
        auto A0 = component_atlas(C);
        for (int lvl = A0.stabilization_level; lvl <= 6; ++lvl) {
            std::uint64_t size = CellComplex(p, 1, A0.complex_kind).size() * static_cast<std::uint64_t>(ipow(p, lvl - 1).get_ui());
            if (size > 300000) break;  // stays within the cell budget; deeper p = 7 levels are skipped
            auto A = component_atlas(C, lvl);
            auto r = check_invariance(A);
            if (!r.ok) {
                o.fail(m + " p=" + std::to_string(p) + " level " + std::to_string(lvl) + ": " + r.failure);
                return;
            }
            cells += r.checked;
            ++atlases;
            if (lvl == A0.stabilization_level) {
                // move mass between the first two cells of a random component
                auto w = sigma_weights(A);
                std::uniform_int_distribution<std::size_t> pick(0, A.components.size() - 1);
                const auto& comp = A.components[pick(rng)];
                if (comp.size() < 2) continue;
                w[comp[0]] += w[comp[1]] / 3;
                w[comp[1]] -= w[comp[1]] / 3;
                if (check_weight_invariance(A, w).ok) {
                    o.fail(m + ": corrupted weights passed");
                    return;
                }
                ++corrupt_detected;
            }
        }
    }
    // Haar weight on every cell including the complement cell, Example 1 at level 2: invariant
    // only if it matches mu_hat; a Z_p-concentrated weight is caught.
    {
        auto A = component_atlas(cls("0,1,1,1", 3), 2);
        std::vector<Rational> w(A.K->size(), 0);
        for (std::uint64_t id = 0; id < A.K->size(); ++id) w[id] = A.K->is_far(id) ? Rational(0) : Rational(1, 9);
        if (check_weight_invariance(A, w).ok) o.fail("Z_3 Haar weights passed");
        else ++corrupt_detected;
    }
    if (o.ok)
        o.detail << atlases << " atlases (" << maps.size() << " maps, levels stabilization..6, up to 3e5 cells), " << cells
                 << " cells with zero residual; " << corrupt_detected << " corrupted weight vectors detected in " << seconds_since(t0) << " s";
}

// --- 9 -------------------------------------------------------------------
void criterion9(Outcome& o) {
    std::ostringstream d;
    for (auto [m, p] : std::vector<std::pair<const char*, long>>{{"3,-1,1,1", 3}, {"2,0,1,1", 3}}) {
        auto C = cls(m, p);
        auto rows = sphere_census(C, 5);
        int resolved = 0;
        d << m << ":";
        for (const auto& r : rows) {
            if (!r.resolved || !r.predicted) continue;
            ++resolved;
            if (Int(std::to_string(r.cycles)) != *r.predicted) {
                o.fail(std::string(m) + " " + r.group + " m=" + std::to_string(r.m) + ": " + std::to_string(r.cycles) + " cycles, predicted " +
                       r.predicted->get_str());
                return;
            }
            if (r.group == "sphere") d << " S(m=" << r.m << ")=" << r.cycles;
        }
        if (resolved < 2) o.fail(std::string(m) + ": fewer than two resolved spheres at level 5");
        d << "; ";
    }
    if (o.ok) o.detail << "level 5 quotient cycles match the per-sphere counts: " << d.str();
}

// --- 10 ------------------------------------------------------------------
void criterion10(Outcome& o, const json& corpus) {
    std::vector<std::pair<std::string, long>> maps{{"0,1,1,1", 3}, {"0,1,1,1", 2}};
    for (const auto& e : corpus["maps"]) maps.emplace_back(e["map"], e["p"]);
    int comps = 0;
    std::string ex1, ex2;
    for (const auto& [m, p] : maps) {
        auto C = cls(m, p);
        auto A = component_atlas(C);
        std::uint64_t k = static_cast<std::uint64_t>(odometer_base(C));
        for (std::size_t i = 0; i < A.components.size(); ++i) {
            auto cert = verify_minimal_on_quotients(A, static_cast<int>(i), 5);
            if (!cert.ok) {
                o.fail(m + " p=" + std::to_string(p) + " component " + std::to_string(i) + ": " + cert.failure);
                return;
            }
            // every length is k p^j; from the separating level on, each step multiplies by p
            for (std::size_t j = 0; j < cert.lengths.size(); ++j) {
                std::uint64_t L = cert.lengths[j];
                while (L > k && L % static_cast<std::uint64_t>(p) == 0) L /= static_cast<std::uint64_t>(p);
                if (L != k) o.fail(m + ": length " + std::to_string(cert.lengths[j]) + " is not " + std::to_string(k) + "*p^j");
                if (cert.levels[j] > A.stabilization_level && cert.lengths[j] != cert.lengths[j - 1] * static_cast<std::uint64_t>(p))
                    o.fail(m + ": length does not grow by p above the separating level");
            }
            std::ostringstream s;
            for (auto L : cert.lengths) s << L << ",";
            if (m == "0,1,1,1" && p == 3) ex1 = s.str();
            if (m == "0,1,1,1" && p == 2 && i == 0) ex2 = s.str();
            ++comps;
        }
    }
    if (o.ok) o.detail << comps << " components certified single-cycle up to level 5; Example 1 lengths " << ex1 << " Example 2 B_1 lengths " << ex2;
}

}  // namespace

int main() {
    json corpus;
    try {
        corpus = load_corpus();
    } catch (const std::exception& e) {
        std::cout << "cannot load corpus: " << e.what() << "\n";
        return 1;
    }
    std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"Example 1 end-to-end", criterion1},
        {"Example 2 end-to-end", criterion2},
        {"closed-form count vs brute force on the frozen corpus", [&](Outcome& o) { criterion3(o, corpus); }},
        {"cycle-engine recurrences on 200 random cycles", criterion4},
        {"multiplication_type vs exhaustive cycles", criterion5},
        {"distance_to_qp vs grid oracle", criterion6},
        {"square roots vs exhaustive oracle", criterion7},
        {"measure invariance and corruption detection", [&](Outcome& o) { criterion8(o, corpus); }},
        {"Case I/II sphere counts at level 5", criterion9},
        {"minimality certificates up to level 5", [&](Outcome& o) { criterion10(o, corpus); }},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        std::cout << "criterion " << i + 1 << " " << (o.ok ? "PASS" : "FAIL") << " [" << criteria[i].first << "] " << o.detail.str() << std::endl;
        failures += !o.ok;
    }
    std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all 10 criteria passed") << std::endl;
    return failures ? 1 : 0;
}
