#include "desk.hpp"
#include "ncentre/winding.hpp"

#include <gtest/gtest.h>

using namespace ncentre;
using namespace ncentre::testing;

TEST(Partition, Counts) {
    EXPECT_EQ(partition_count(2), 1u);
    EXPECT_EQ(partition_count(3), 3u);
    EXPECT_EQ(partition_count(4), 7u);
    EXPECT_THROW(partition_count(1), error);
}

TEST(Partition, RoundTrip) {
    for (std::size_t N = 2; N <= 5; ++N)
        for (std::size_t k = 0; k < partition_count(N); ++k) {
            const auto P = partition_from_index(N, k);
            EXPECT_FALSE(P.side_of[0]);
            const auto [l, lt] = partition_windings(P);
            EXPECT_EQ(l[0], 1);
            EXPECT_TRUE(admissible(l));
            EXPECT_EQ(partition_of(l).index, k);
            EXPECT_EQ(partition_of(lt).index, k);
        }
}

TEST(Partition, Admissibility) {
    EXPECT_FALSE(admissible({0, 0, 0}));
    EXPECT_FALSE(admissible({1, 1}));
    EXPECT_TRUE(admissible({1, 0, 1}));
    EXPECT_THROW(partition_of({1, 1}), error);
}

TEST(Winding, SignedTurns) {
    const std::vector<vec2> c{vec2(0, 0), vec2(3, 0)};
    const std::vector<vec2> ccw{vec2(1, 0), vec2(0, 1), vec2(-1, 0), vec2(0, -1)};
    auto w = winding_numbers(ccw, c, chord_closure());
    EXPECT_EQ(w[0], 1);
    EXPECT_EQ(w[1], 0);
    const std::vector<vec2> cw(ccw.rbegin(), ccw.rend());
    w = winding_numbers(cw, c, chord_closure());
    EXPECT_EQ(w[0], -1);
    // Twice around.
    std::vector<vec2> twice;
    for (int i = 0; i < 16; ++i) twice.push_back(polar(1.0, two_pi * i / 8.0));
    EXPECT_EQ(winding_numbers(twice, c, chord_closure())[0], 2);
    EXPECT_EQ(parities({2, -1, 0}), (winding_vector{0, 1, 0}));
}

TEST(Winding, ThroughCentreIsAmbiguous) {
    const std::vector<vec2> c{vec2(0, 0)};
    try {
        winding_numbers({vec2(-1, 0), vec2(1, 0)}, c, chord_closure());
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::ambiguous_winding);
    }
}

TEST(Closure, ArcSweeps) {
    const double R = 0.4;
    const vec2 top = polar(R, std::numbers::pi / 2), bottom = polar(R, 3 * std::numbers::pi / 2);
    EXPECT_NEAR(ccw_closure(top, bottom).sweep, std::numbers::pi, 1e-14);
    EXPECT_EQ(ccw_closure(top, top).sweep, 0.0);
    // The nominal sweep tracks the endpoint offsets continuously.
    const double a = 0.03, b = -0.02;
    const auto cl = nominal_closure(polar(R, std::numbers::pi / 2 + a), polar(R, std::numbers::pi / 2 + b),
                                    std::numbers::pi / 2, std::numbers::pi / 2);
    EXPECT_NEAR(cl.sweep, a - b, 1e-14);
    const auto cl2 = nominal_closure(polar(R, std::numbers::pi / 2 + a), polar(R, 3 * std::numbers::pi / 2 + b),
                                     std::numbers::pi / 2, 3 * std::numbers::pi / 2);
    EXPECT_NEAR(cl2.sweep, std::numbers::pi + a - b, 1e-14);
}

TEST(Winding, StraightPathBetweenCentres) {
    // Top to bottom along the y-axis, closed counter-clockwise through angle 0: encloses
    // only the centre at +x.
    const auto spec = desk2();
    scaled_field f(spec, 0.05);
    const double R = spec.r_work();
    std::vector<vec2> pts;
    for (int i = 0; i <= 20; ++i) pts.push_back(vec2(0.0, R - 2 * R * i / 20.0));
    const auto w = winding_numbers(pts, f.centres(), ccw_closure(pts.front(), pts.back()));
    for (std::size_t j = 0; j < w.size(); ++j) EXPECT_EQ(w[j], f.centres()[j].x() > 0 ? 1 : 0);
}

TEST(InitialPath, RealisesItsClass) {
    const auto spec = load_problem(config_path("desk3.cfg"));
    scaled_field f(spec, 0.05);
    const double R = spec.r_work();
    const vec2 p1 = polar(R, 1.4), p2 = polar(R, 4.5);
    const auto cl = ccw_closure(p1, p2);
    for (std::size_t k = 0; k < partition_count(3); ++k) {
        const auto [l, lt] = partition_windings(partition_from_index(3, k));
        for (const auto& target : {l, lt}) {
            winding_class cls{winding_class::kind::parity, target, 0, cl};
            const auto path = initial_path(p1, p2, cls, f.centres(), R, 128);
            EXPECT_EQ(path.size(), 128u);
            EXPECT_EQ(parities(winding_numbers(path.points, f.centres(), cl)), target);
            for (const auto& x : path.points) EXPECT_LE(x.norm(), R * (1 + 1e-12));
        }
    }
}

TEST(SelfIntersection, FigureEight) {
    const std::vector<vec2> eight{vec2(0, 0), vec2(1, 1), vec2(1, -1), vec2(-1, 1), vec2(-1, -1), vec2(0, 0.5)};
    EXPECT_FALSE(self_intersection_check(eight).empty());
    const std::vector<vec2> simple{vec2(0, 0), vec2(1, 0), vec2(1, 1), vec2(0, 1)};
    EXPECT_TRUE(self_intersection_check(simple).empty());
}
