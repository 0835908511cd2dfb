#include "desk.hpp"
#include "ncentre/glue.hpp"

#include <gtest/gtest.h>

using namespace ncentre;
using namespace ncentre::testing;

namespace {

std::vector<glue_symbol> top_bottom() {
    glue_symbol a, b;
    a.config = 0;
    b.config = 1;
    return {a, b};
}

} // namespace

TEST(Glue, GradientMatchesDifferences) {
    const auto spec = desk2();
    length_function f(spec, spec.eps_max() / 8, top_bottom());
    const std::vector<double> phi{0.004, 0.02, 0.025, 0.003};
    const auto ev = f(phi);
    ASSERT_EQ(ev.grad.size(), 4u);
    const double h = 1e-5;
    for (std::size_t s = 0; s < 4; ++s) {
        auto up = phi, um = phi;
        up[s] += h;
        um[s] -= h;
        const double fd = (f(up).L - f(um).L) / (2 * h);
        EXPECT_NEAR(ev.grad[s], fd, 1e-3 * std::abs(fd) + 1e-6) << "junction " << s;
    }
}

TEST(Glue, CyclicRelabelling) {
    const auto spec = desk2();
    const double eps = spec.eps_max() / 8;
    const std::vector<double> phi{0.004, 0.02, 0.025, 0.003};
    length_function f(spec, eps, top_bottom());
    auto seq = top_bottom();
    std::rotate(seq.begin(), seq.begin() + 1, seq.end());
    length_function g(spec, eps, seq);
    const std::vector<double> rphi{phi[2], phi[3], phi[0], phi[1]};
    const auto a = f(phi), b = g(rphi);
    EXPECT_NEAR(a.L, b.L, 1e-9 * a.L);
    EXPECT_NEAR(a.grad[0], b.grad[2], 1e-7);
    EXPECT_NEAR(a.grad[3], b.grad[1], 1e-7);
}

TEST(Glue, RejectsBadInput) {
    const auto spec = desk2();
    EXPECT_THROW(length_function(spec, spec.eps_max(), top_bottom()), error);
    EXPECT_THROW(length_function(spec, 0.01, {}), error);
    auto seq = top_bottom();
    seq[0].config = 5;
    EXPECT_THROW(length_function(spec, 0.01, seq), error);
    length_function f(spec, 0.01, top_bottom());
    try {
        f({0.0, 0.0, 0.0, 0.2});
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::outside_neighbourhood);
    }
}

TEST(Rescale, EnergyAndPeriod) {
    // x(t) = h^(-1/a) y(h^((a+2)/(2a)) t) with h = eps^a solves the original problem at energy -h.
    const auto spec = desk2();
    const double eps = 0.03, a = spec.alpha(), h = std::pow(eps, a);
    scaled_field f(spec, eps);
    const vec2 y(0.1, 0.3);
    const state s0{y, std::sqrt(2 * (f.value(y) - 1.0)) * vec2(0.3, -1.0).normalized(), 0.0};
    const auto tr = integrate(f, s0, 0.5);
    const auto big = rescale_orbit(tr, spec, h);
    EXPECT_EQ(big.samples.size(), tr.samples.size());
    EXPECT_NEAR(big.energy_level, -h, 0.0);
    EXPECT_LT(big.max_energy_drift, 1e-7 * h);
    const double ratio = big.back().t / tr.back().t;
    EXPECT_NEAR(ratio, std::pow(h, -(a + 2) / (2 * a)), 1e-12 * ratio);
    for (std::size_t i = 0; i < tr.samples.size(); i += 7)
        EXPECT_LT((big.samples[i].x * std::pow(h, 1 / a) - tr.samples[i].x).norm(), 1e-14);

    periodic_orbit orb;
    orb.orbit = tr;
    orb.total_period = tr.back().t;
    orb.piece_start = {0.0, 0.2};
    const auto ro = rescale_orbit(orb, spec, h);
    EXPECT_NEAR(ro.total_period / orb.total_period, ratio, 1e-12 * ratio);
    EXPECT_NEAR(ro.piece_start[1] / 0.2, ratio, 1e-12 * ratio);
}
