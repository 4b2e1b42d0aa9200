#include "padyn/verifier.hpp"

#include <gtest/gtest.h>

using namespace padyn;

namespace {
Classification cls(const char* map, long p) { return classify(HomographicMap::parse(map, p)); }
}  // namespace

TEST(Orbit, Example1FirstSteps) {
    auto phi = HomographicMap::parse("0,1,1,1", 3);
    auto T = orbit(phi, QPoint::finite(0), 4);
    ASSERT_EQ(T.points.size(), 5u);
    std::vector<Rational> want{0, 1, Rational(1, 2), Rational(2, 3), Rational(3, 5)};
    for (std::size_t i = 0; i < want.size(); ++i) {
        ASSERT_FALSE(T.points[i].is_infinity());
        ASSERT_TRUE(T.points[i].value().exact().has_value());
        EXPECT_EQ(*T.points[i].value().exact(), want[i]);
    }
    EXPECT_TRUE(T.events.empty());
    EXPECT_FALSE(T.truncated);
}

TEST(Orbit, ThroughThePole) {
    auto phi = HomographicMap::parse("0,1,1,1", 3);
    auto T = orbit(phi, QPoint::finite(-1), 2);
    EXPECT_TRUE(T.points[1].is_infinity());
    EXPECT_EQ(*T.points[2].value().exact(), Rational(0));
}

TEST(Orbit, CaseIIFixedPointIsConstant) {
    auto phi = HomographicMap::parse("2,0,1,1", 3);
    auto T = orbit(phi, QPoint::finite(0), 20);
    for (const auto& P : T.points) EXPECT_EQ(*P.value().exact(), Rational(0));
}

TEST(Orbit, Example1VisitsAllLevelTwoCells) {
    auto phi = HomographicMap::parse("0,1,1,1", 3);
    auto C = classify(phi);
    auto T = orbit(phi, QPoint::finite(0), 36, 64, &C, 2);
    ASSERT_EQ(T.visited_cells.size(), 2u);
    EXPECT_EQ(T.visited_cells[0].size(), 4u);
    EXPECT_EQ(T.visited_cells[1].size(), 12u);
    EXPECT_EQ(T.unresolved_points, 0u);
}

TEST(Orbit, StaysInItsComponent) {
    auto phi = HomographicMap::parse("0,1,1,1", 2);
    auto C = classify(phi);
    auto A = component_atlas(C, 3);
    for (Rational x0 : {Rational(0), Rational(2), Rational(5, 3)}) {
        auto T = orbit(phi, QPoint::finite(x0), 300, 64, &C, 3);
        int comp = A.component_index(QPoint::finite(x0));
        for (auto id : T.visited_cells[2]) EXPECT_EQ(A.component_of[id], comp);
        EXPECT_EQ(T.visited_cells[2].size(), A.components[comp].size());
    }
}

TEST(Orbit, LongRunsLoseExactnessButKeepPrecision) {
    auto phi = HomographicMap::parse("0,1,1,1", 3);
    auto T = orbit(phi, QPoint::finite(0), 2000, 40);
    EXPECT_EQ(T.points.size(), 2001u);
    EXPECT_FALSE(T.points.back().value().exact().has_value());
    EXPECT_GE(T.points.back().value().precision(), 8);
}

TEST(Orbit, Errors) {
    auto phi = HomographicMap::parse("0,1,1,1", 3);
    EXPECT_THROW(orbit(phi, QPoint::finite(0), 10, 4), InputError);
    EXPECT_THROW(orbit(phi, QPoint::finite(0), 1000, 64, nullptr, 0, 100), BudgetError);
    auto I = classify(HomographicMap::parse("3,-1,1,1", 3));
    EXPECT_THROW(orbit(I.phi, QPoint::finite(0), 5, 64, &I, 1), RefusalError);
}

TEST(Certificate, Example1) {
    auto A = component_atlas(cls("0,1,1,1", 3));
    auto c = verify_minimal_on_quotients(A, 0, 3);
    EXPECT_TRUE(c.ok) << c.failure;
    EXPECT_EQ(c.lengths, (std::vector<std::uint64_t>{4, 12, 36}));
}

TEST(Certificate, Example2FirstComponent) {
    auto A = component_atlas(cls("0,1,1,1", 2), 3);
    int b1 = A.component_index(QPoint::finite(0));
    auto c = verify_minimal_on_quotients(A, b1, 4);
    EXPECT_TRUE(c.ok) << c.failure;
    // levels 1,2 precede the split; from level 3 on lengths double
    EXPECT_EQ(c.lengths, (std::vector<std::uint64_t>{3, 6, 6, 12}));
}

TEST(Certificate, UnionOfTwoComponentsIsNotMinimal) {
    auto A = component_atlas(cls("0,1,1,1", 2), 3);
    auto merged = A;
    for (auto& c : merged.component_of) c = 0;
    merged.components[0].insert(merged.components[0].end(), A.components[1].begin(), A.components[1].end());
    merged.components.pop_back();
    auto c = verify_minimal_on_quotients(merged, 0, 4);
    EXPECT_FALSE(c.ok);
    EXPECT_NE(c.failure.find("several cycles"), std::string::npos);
    EXPECT_THROW(verify_minimal_on_quotients(A, 0, 2), InputError);
}

TEST(BruteForce, Examples) {
    auto b1 = brute_force_decompose(cls("0,1,1,1", 3), 1, true);
    ASSERT_EQ(b1.size(), 1u);
    EXPECT_EQ(b1[0].cells, 4u);
    EXPECT_EQ(b1[0].cycles, 1u);
    EXPECT_EQ(b1[0].cycle_lengths, (std::vector<std::uint64_t>{4}));
    auto b2 = brute_force_decompose(cls("0,1,1,1", 2), 4, true);
    EXPECT_EQ(b2[2].cycles, 2u);
    EXPECT_EQ(b2[3].cycles, 2u);
    EXPECT_EQ(b2[3].cycle_lengths, (std::vector<std::uint64_t>{12, 12}));
    EXPECT_THROW(brute_force_decompose(cls("3,-1,1,1", 3), 2), RefusalError);
    EXPECT_THROW(brute_force_decompose(cls("0,1,1,1", 3), 14, false, 1000), BudgetError);
}

TEST(Census, CaseIAndII) {
    for (auto [m, p] : std::vector<std::pair<const char*, long>>{{"3,-1,1,1", 3}, {"2,0,1,1", 3}}) {
        auto rows = sphere_census(cls(m, p), 5);
        int resolved_spheres = 0;
        for (const auto& r : rows) {
            if (r.group == "sphere" && r.resolved) {
                ++resolved_spheres;
                ASSERT_TRUE(r.predicted.has_value());
                EXPECT_EQ(Int(std::to_string(r.cycles)), *r.predicted) << m << " sphere " << r.m;
            }
        }
        EXPECT_GE(resolved_spheres, 1) << m;
    }
    EXPECT_THROW(sphere_census(cls("0,1,1,1", 3), 3), RefusalError);
}
