// padyn: minimal decompositions of homographic maps on P^1(Q_p).
#include "padyn/decomposer.hpp"
#include "padyn/measure.hpp"
#include "padyn/verifier.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <iostream>
#include <sstream>

using namespace padyn;
using nlohmann::json;

namespace {

constexpr int kExitInput = 2, kExitRefusal = 3, kExitBudget = 4, kExitOracle = 5;

struct RunConfig {
    long p = 0;
    std::string map;
    int precision = kDefaultPrecision;
    std::uint64_t budget = kDefaultCellBudget;
    std::uint64_t orbit_budget = kDefaultOrbitBudget;
    int threads = 1;
    std::string json_out;
};

std::uint64_t env_budget(const char* name, std::uint64_t fallback) {
    const char* v = std::getenv(name);
    if (!v || !*v) return fallback;
    char* end = nullptr;
    unsigned long long x = std::strtoull(v, &end, 10);
    if (*end != '\0' || x == 0) throw InputError(std::string(name) + " must be a positive integer");
    return x;
}

void emit_json(const RunConfig& cfg, const json& j) {
    if (cfg.json_out.empty()) return;
    std::string text = j.dump(2) + "\n";
    if (cfg.json_out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(cfg.json_out, std::ios::binary);
    if (!f) throw InputError("cannot write " + cfg.json_out);
    f << text;
}

bool text_mode(const RunConfig& cfg) { return cfg.json_out != "-"; }

HomographicMap load_map(const RunConfig& cfg) {
    if (cfg.precision < 8) throw InputError("precision must be >= 8");
    if (cfg.budget == 0 || cfg.orbit_budget == 0) throw InputError("budgets must be positive");
    if (cfg.threads < 1) throw InputError("threads must be >= 1");
    worker_threads() = cfg.threads;
    return HomographicMap::parse(cfg.map, cfg.p);
}

std::string superscript_list(long k, long p) {
    std::ostringstream s;
    s << "(" << k << "," << k * p << "," << k * p * p << ",...)";
    return s.str();
}

std::string case_summary(const Classification& C) {
    std::ostringstream s;
    switch (C.tag) {
        case CaseTag::case_iii: {
            s << "Case III ";
            if (C.p() == 2) s << "(sqrt " << C.rad->cls << ")";
            else s << (C.rad->ramified() ? "ramified" : "unramified");
            if (C.periodic()) {
                s << "; periodic (phi^" << *C.finite_order << " = id)";
                return s.str();
            }
            Int n = minimal_count(C).value;
            if (n == 1) s << "; MINIMAL";
            else s << "; " << n.get_str() << " components";
            s << "; odometer " << superscript_list(odometer_base(C), C.p());
            s << "; measure " << (std::string(measure_tag(C)) == "mu_hat" ? "mu_hat" : "mu_bar");
            return s.str();
        }
        case CaseTag::case_i:
            s << "Case I (parabolic, x0 = " << to_string(*C.x0) << ", alpha = " << to_string(*C.alpha)
              << "); infinitely many components";
            return s.str();
        case CaseTag::case_ii:
            s << "Case II (" << C.subcase << "); ";
            s << (C.subcase == "generic" ? "infinitely many components, " + case_ii_sphere_count(*C.mult).get_str() + " per sphere"
                                         : std::string("no non-trivial minimal components"));
            return s.str();
        case CaseTag::affine_delegate:
            s << "affine map (" << C.subcase << "); infinitely many components";
            return s.str();
    }
    return "?";
}

int cmd_analyze(const RunConfig& cfg, std::optional<int> level) {
    HomographicMap phi = load_map(cfg);
    Classification C = classify(phi);
    std::optional<CaseIIIAtlas> A;
    if (level) A = component_atlas(C, *level, cfg.budget);
    json j = decomposition_report(C, A ? &*A : nullptr);
    if (text_mode(cfg)) {
        std::cout << case_summary(C) << "\n";
        if (C.tag == CaseTag::case_iii && C.branch) {
            std::cout << "lambda = " << C.lambda.to_string() << ", ell = " << C.ell << ", " << C.v_label << " = " << C.V << "\n";
        }
        if (A) std::cout << "components separate at level " << A->stabilization_level << "\n";
    }
    emit_json(cfg, j);
    return 0;
}

int cmd_decompose(const RunConfig& cfg, std::optional<int> level) {
    HomographicMap phi = load_map(cfg);
    Classification C = classify(phi);
    CaseIIIAtlas A = component_atlas(C, level, cfg.budget);
    if (text_mode(cfg)) {
        std::cout << case_summary(C) << "\n";
        std::cout << "level " << A.level << " (" << to_string(A.complex_kind) << " complex, " << A.K->size() << " cells)\n";
        for (std::size_t i = 0; i < A.components.size(); ++i) {
            std::cout << "B_" << i + 1 << " =";
            bool first = true;
            for (const auto& d : A.sorted_cells(static_cast<int>(i))) {
                std::cout << (first ? " " : " u ") << ball_text(d, C.p());
                first = false;
            }
            std::cout << "\n";
        }
    }
    emit_json(cfg, decomposition_report(C, &A));
    return 0;
}

QPoint parse_point(const std::string& s) {
    if (s == "inf" || s == "infinity") return QPoint::infinity();
    return QPoint::finite(parse_rational(s));
}

int cmd_orbit(const RunConfig& cfg, const std::string& x0, std::uint64_t steps, int levels) {
    HomographicMap phi = load_map(cfg);
    std::optional<Classification> C;
    if (levels > 0) C = classify(phi);
    OrbitTrace T = orbit(phi, parse_point(x0), steps, cfg.precision, C ? &*C : nullptr, levels, cfg.orbit_budget);
    if (text_mode(cfg)) {
        std::size_t shown = std::min<std::size_t>(T.points.size(), 32);
        for (std::size_t i = 0; i < shown; ++i) {
            const auto& P = T.points[i];
            std::cout << i << ": ";
            if (P.is_infinity()) std::cout << "infinity";
            else if (P.value().exact()) std::cout << to_string(*P.value().exact());
            else std::cout << P.value().to_text();
            std::cout << "\n";
        }
        if (shown < T.points.size()) std::cout << "... " << T.points.size() - shown << " more points\n";
        std::cout << T.events.size() << " precision events\n";
        for (std::size_t m = 0; m < T.visited_cells.size(); ++m)
            std::cout << "level " << m + 1 << ": " << T.visited_cells[m].size() << " cells visited\n";
    }
    json j = T.to_json(phi.p);
    j["map"] = phi.literal();
    j["p"] = phi.p;
    emit_json(cfg, j);
    return 0;
}

// "center,radius": radius an exact power of p, e.g. 1, 1/9, 3.
Disk<Rational> parse_cell(const std::string& s, long p, bool complement) {
    auto parts = split(s, ',');
    if (parts.size() != 2) throw InputError("cell must be center,radius: '" + s + "'");
    Rational c = parse_rational(parts[0]), r = parse_rational(parts[1]);
    if (r <= 0) throw InputError("cell radius must be positive");
    int k = vp(r, p);
    if (r != rpow(p, k)) throw InputError("cell radius must be an integral power of p");
    return qp_ball(c, k, complement ? DiskKind::complement : DiskKind::closed);
}

int cmd_measure(const RunConfig& cfg, const std::string& cell, bool complement, const std::string& kind, std::optional<int> level) {
    HomographicMap phi = load_map(cfg);
    Disk<Rational> D = parse_cell(cell, phi.p, complement);
    Rational value;
    if (kind == "mu_hat") {
        value = mu_hat(D, phi.p);
    } else if (kind == "mu_bar") {
        value = mu_bar(D, phi.p);
    } else if (kind.rfind("sigma:", 0) == 0) {
        int i;
        try {
            i = std::stoi(kind.substr(6));
        } catch (...) {
            throw InputError("sigma kind must be sigma:<component index>");
        }
        Classification C = classify(phi);
        CaseIIIAtlas A = component_atlas(C, level, cfg.budget);
        value = sigma(A, i, D);
    } else if (kind.rfind("chart:", 0) == 0) {
        Classification C = classify(phi);
        value = chart_sigma(C, parse_point(kind.substr(6)), D);
    } else {
        throw InputError("unknown measure kind '" + kind + "'");
    }
    if (text_mode(cfg)) std::cout << to_string(value) << "\n";
    emit_json(cfg, {{"cell", ball_json(D, phi.p)},
                    {"kind", kind},
                    {"value", {{"num", value.get_num().get_str()}, {"den", value.get_den().get_str()}}}});
    return 0;
}

int cmd_verify(const RunConfig& cfg, int level) {
    HomographicMap phi = load_map(cfg);
    Classification C = classify(phi);
    json j;
    j["map"] = phi.literal();
    j["p"] = phi.p;
    j["case"] = to_string(C.tag);
    bool ok = true;
    if (C.tag == CaseTag::case_iii && C.branch) {
        Int want = minimal_count(C).value;
        CaseIIIAtlas A = component_atlas(C, std::nullopt, cfg.budget);
        if (level < A.stabilization_level)
            throw InputError("insufficient level " + std::to_string(level) + ": components separate only from level " +
                             std::to_string(A.stabilization_level));
        auto brute = brute_force_decompose(C, level, false, cfg.budget);
        json bl = json::array();
        for (const auto& b : brute) {
            bool agree = b.level < A.stabilization_level || Int(std::to_string(b.cycles)) == want;
            ok = ok && agree;
            bl.push_back({{"level", b.level}, {"cells", b.cells}, {"cycles", b.cycles}, {"agrees", agree}});
        }
        j["closed_form_count"] = want.get_str();
        j["brute_force"] = bl;
        CaseIIIAtlas At = component_atlas(C, level, cfg.budget);
        json certs = json::array();
        for (std::size_t i = 0; i < At.components.size(); ++i) {
            Certificate c = verify_minimal_on_quotients(At, static_cast<int>(i), level, cfg.budget);
            ok = ok && c.ok;
            certs.push_back(c.to_json());
        }
        j["certificates"] = certs;
        InvarianceReport inv = check_invariance(At);
        ok = ok && inv.ok;
        j["invariance"] = inv.to_json();
    } else if (C.tag == CaseTag::case_i || (C.tag == CaseTag::case_ii && C.subcase == "generic")) {
        json rows = json::array();
        for (const auto& s : sphere_census(C, level, cfg.budget)) {
            if (s.resolved && s.predicted && *s.predicted != Int(std::to_string(s.cycles))) ok = false;
            rows.push_back(s.to_json());
        }
        j["sphere_census"] = rows;
    } else {
        throw RefusalError(std::string("nothing to verify for ") + case_summary(C));
    }
    j["ok"] = ok;
    if (text_mode(cfg)) std::cout << (ok ? "verified" : "DISAGREEMENT") << ": " << case_summary(C) << " up to level " << level << "\n";
    emit_json(cfg, j);
    if (!ok) throw OracleError("closed form and brute force disagree");
    return 0;
}

// Rejection sampling over coefficients in [-9, 9], bucketed by Case III branch.
int cmd_corpus(const RunConfig& cfg, std::uint64_t seed, int per_bucket) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> coef(-9, 9);
    std::map<std::pair<std::string, long>, int> quota;
    std::set<std::string> seen;
    json maps = json::array();
    auto wanted = [&](const std::string& br, long p) {
        if (br.rfind("dyadic", 0) == 0) return p == 2 ? 2 * per_bucket : 0;
        return p == 2 ? 0 : per_bucket;
    };
    for (std::uint64_t it = 0; it < 2000000; ++it) {
        long p = std::vector<long>{2, 3, 5, 7}[it % 4];
        int a = coef(rng), b = coef(rng), c = coef(rng), d = coef(rng);
        if (c == 0 || a * d - b * c == 0) continue;
        int g = std::gcd(std::gcd(std::abs(a), std::abs(b)), std::gcd(std::abs(c), std::abs(d)));
        int sgn = c < 0 ? -1 : 1;
        a = a / g * sgn, b = b / g * sgn, c = c / g * sgn, d = d / g * sgn;
        HomographicMap phi(a, b, c, d, p);
        std::string key = std::to_string(p) + ":" + phi.literal();
        if (seen.count(key)) continue;
        seen.insert(key);
        Classification C;
        try {
            C = classify(phi);
        } catch (const std::exception&) {
            continue;
        }
        if (C.tag != CaseTag::case_iii || !C.branch) continue;
        std::string br = branch_info(*C.branch).name;
        if (quota[{br, p}] >= wanted(br, p)) continue;
        try {
            auto bound = stabilization_bound(C);
            CellComplex probe(p, bound + 1, branch_info(*C.branch).complex, cfg.budget);
            CaseIIIAtlas A = component_atlas(C, std::nullopt, cfg.budget);
            if (A.stabilization_level > 6) continue;
            maps.push_back({{"p", p},
                            {"map", phi.literal()},
                            {"branch", br},
                            {"count", minimal_count(C).to_json()},
                            {"V", C.V},
                            {"ell", C.ell},
                            {"odometer_base", odometer_base(C)},
                            {"stabilization_level", A.stabilization_level}});
            quota[{br, p}]++;
        } catch (const BudgetError&) {
            continue;
        }
        bool done = true;
        for (int bi = 0; bi < 9; ++bi)
            for (long q : {2L, 3L, 5L, 7L}) {
                std::string nm = branch_info(static_cast<Branch>(bi)).name;
                if (quota[{nm, q}] < wanted(nm, q)) done = false;
            }
        if (done) break;
    }
    json out = {{"seed", seed}, {"per_bucket", per_bucket}, {"maps", maps}};
    if (text_mode(cfg)) std::cout << maps.size() << " maps\n";
    emit_json(cfg, out);
    return 0;
}

void common(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--p", cfg.p, "prime")->required();
    sub->add_option("--map", cfg.map, "map literal a,b,c,d (rationals n or n/m)")->required();
    sub->add_option("--precision", cfg.precision, "p-adic working precision (>= 8)");
    sub->add_option("--budget", cfg.budget, "cell budget (default from PADYN_BUDGET or 1000000)");
    sub->add_option("--threads", cfg.threads, "worker threads for cell enumeration");
    sub->add_option("--json", cfg.json_out, "write the JSON report to this file ('-' for stdout only)");
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    try {
        cfg.budget = env_budget("PADYN_BUDGET", kDefaultCellBudget);
        cfg.orbit_budget = env_budget("PADYN_ORBIT_BUDGET", kDefaultOrbitBudget);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    CLI::App app{"Minimal decompositions of homographic maps on P^1(Q_p)"};
    app.require_subcommand(1);

    std::optional<int> level;
    auto* an = app.add_subcommand("analyze", "classify the map and count minimal components");
    common(an, cfg);
    an->add_option("--level", level, "also build the atlas at this level");

    auto* de = app.add_subcommand("decompose", "component atlas at a level");
    common(de, cfg);
    de->add_option("--level", level, "atlas level (default: stabilization level)");

    std::string x0 = "0";
    std::uint64_t steps = 10;
    int levels = 0;
    auto* orb = app.add_subcommand("orbit", "orbit trace with precision accounting");
    common(orb, cfg);
    orb->add_option("--x0", x0, "start point (rational or inf)");
    orb->add_option("--steps", steps, "number of steps");
    orb->add_option("--levels", levels, "record visited cells on levels 1..L");

    std::string cell, kind = "mu_hat";
    bool complement = false;
    auto* me = app.add_subcommand("measure", "measure of a ball");
    common(me, cfg);
    me->add_option("--cell", cell, "center,radius with radius a power of p")->required();
    me->add_flag("--complement", complement, "use the complement of the ball");
    me->add_option("--kind", kind, "mu_hat | mu_bar | sigma:i | chart:x");
    me->add_option("--level", level, "atlas level for sigma");

    int vlevel = 4;
    auto* ve = app.add_subcommand("verify", "check closed forms against brute force");
    common(ve, cfg);
    ve->add_option("--level", vlevel, "deepest level to check");

    std::uint64_t seed = 20261016;
    int per_bucket = 2;
    auto* co = app.add_subcommand("corpus", "sample a Case III test corpus covering every branch");
    co->add_option("--seed", seed, "sampling seed");
    co->add_option("--per-bucket", per_bucket, "maps per (branch, prime); dyadic branches get twice this");
    co->add_option("--budget", cfg.budget, "cell budget");
    co->add_option("--json", cfg.json_out, "output file ('-' for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInput;
    }

    try {
        if (*an) return cmd_analyze(cfg, level);
        if (*de) return cmd_decompose(cfg, level);
        if (*orb) return cmd_orbit(cfg, x0, steps, levels);
        if (*me) return cmd_measure(cfg, cell, complement, kind, level);
        if (*ve) return cmd_verify(cfg, vlevel);
        if (*co) return cmd_corpus(cfg, seed, per_bucket);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const RefusalError& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return kExitRefusal;
    } catch (const BudgetError& e) {
        std::cerr << "budget: " << e.what() << "\n";
        return kExitBudget;
    } catch (const OracleError& e) {
        std::cerr << "oracle disagreement: " << e.what() << "\n";
        return kExitOracle;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
