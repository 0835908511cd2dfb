#include "desk.hpp"
#include "ncentre/mcgehee.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

using namespace ncentre;
using namespace ncentre::testing;

TEST(Flow, EnergyIsConserved) {
    const auto spec = desk2();
    scaled_field f(spec, 0.05);
    const vec2 x(0.2, 0.25);
    const double speed = std::sqrt(2 * (f.value(x) - 1.0));
    const state s0{x, speed * vec2(0.6, -0.8), 0.0};
    const auto tr = integrate(f, s0, 1.0);
    EXPECT_LT(tr.max_energy_drift, 1e-8);
    EXPECT_NEAR(tr.back().t, 1.0, 1e-14);
}

TEST(Flow, KeplerCircularOrbit) {
    // V = 1/r at energy -1/2: circular orbit of radius 1, period 2 pi.
    const auto spec = single(1.0);
    scaled_field f(spec, 1.0);
    const state s0{vec2(1.0, 0.0), vec2(0.0, 1.0), 0.0};
    const auto tr = integrate(f, s0, two_pi, {}, -0.5);
    EXPECT_LT((tr.back().x - s0.x).norm(), 1e-8);
    EXPECT_LT((tr.back().v - s0.v).norm(), 1e-8);
}

TEST(Flow, CollisionGuard) {
    const auto spec = single(1.0);
    scaled_field f(spec, 1.0);
    const state s0{vec2(0.5, 0.0), vec2(-1.0, 0.0), 0.0};
    try {
        integrate(f, s0, 5.0);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::collision_approach);
    }
}

TEST(Flow, HomotheticReturnMatchesQuadrature) {
    const auto spec = desk2();
    const double R = spec.r_work();
    for (const auto& cc : central_configurations(spec).minimal()) {
        const auto res = homothetic_orbit(spec, cc, R);
        const state& e = res.traj.back();
        EXPECT_LT((e.x - res.start.x).norm(), 1e-7);
        EXPECT_LT((e.v + res.start.v).norm(), 1e-7);
        // T = 2 int_R^rmax dr / sqrt(2 (U r^-a - 1)), rmax = U^(1/a).
        const double a = spec.alpha(), U = cc.u_value, rmax = std::pow(U, 1.0 / a);
        boost::math::quadrature::tanh_sinh<double> ts;
        const double T = 2 * ts.integrate([&](double r) { return 1.0 / std::sqrt(2 * (U * std::pow(r, -a) - 1.0)); }, R, rmax);
        EXPECT_NEAR(res.T_xi, T, 1e-6);
    }
}

TEST(Flow, FirstReturnNeedsOutwardStart) {
    const auto spec = desk2();
    const double R = spec.r_work();
    const state s{polar(R, 1.0), -polar(1.0, 1.0), 0.0};
    EXPECT_THROW(first_return_to_sphere(spec, 0.0, s, R), error);
}

TEST(Flow, VariationalFlowMatchesDifferences) {
    const auto spec = desk2();
    scaled_field f(spec, 0.05);
    const vec2 x(0.15, 0.3);
    const vec2 v = std::sqrt(2 * (f.value(x) - 1.0)) * vec2(0.4, 0.9).normalized();
    const double T = 0.4;
    const auto base = integrate(f, state{x, v, 0.0}, T);
    const auto M = variational_flow(f, base, mat2::Zero(), mat2::Identity());
    const double h = 1e-6;
    for (int i = 0; i < 2; ++i) {
        vec2 e = vec2::Zero();
        e[i] = h;
        const auto p = integrate(f, state{x, v + e, 0.0}, T).back().x;
        const auto m = integrate(f, state{x, v - e, 0.0}, T).back().x;
        const vec2 col = (p - m) / (2 * h);
        EXPECT_LT((M.back().M.col(i) - col).norm(), 1e-5 * std::max(1.0, col.norm()));
    }
}

TEST(Flow, VariationalBvpBoundaryValues) {
    const auto spec = desk2();
    scaled_field f(spec, 0.05);
    const vec2 x(0.15, 0.3);
    const vec2 v = std::sqrt(2 * (f.value(x) - 1.0)) * vec2(0.4, 0.9).normalized();
    const auto base = integrate(f, state{x, v, 0.0}, 0.3);
    const auto M = variational_bvp(f, base);
    EXPECT_LT(M.front().M.norm(), 1e-14);
    EXPECT_LT((M.back().M - mat2::Identity()).norm(), 1e-10);
}

TEST(McGehee, EquilibriumEigenvalues) {
    const auto spec = desk2();
    const auto cc = central_configurations(spec).minimal().front();
    const auto e = mcgehee_equilibrium(spec, cc);
    EXPECT_NEAR(e.lambda_r, -2.8, 1e-12);
    EXPECT_NEAR(e.lambda_minus, -2.0921, 1e-4);

    const mcgehee_vec z(0.0, cc.theta, cc.theta + std::numbers::pi);
    const auto& U = spec.leading_angular();
    EXPECT_LT(mcgehee_rhs(U, spec.alpha(), z).norm(), 1e-12);
    Eigen::Matrix3d J;
    const double h = 1e-7;
    for (int i = 0; i < 3; ++i) {
        mcgehee_vec d = mcgehee_vec::Zero();
        d[i] = h;
        J.col(i) = (mcgehee_rhs(U, spec.alpha(), z + d) - mcgehee_rhs(U, spec.alpha(), z - d)) / (2 * h);
    }
    Eigen::EigenSolver<Eigen::Matrix3d> es(J);
    std::vector<double> ev;
    for (int i = 0; i < 3; ++i) ev.push_back(es.eigenvalues()(i).real());
    auto near = [&](double target) {
        for (double x : ev)
            if (std::abs(x - target) < 1e-6) return true;
        return false;
    };
    EXPECT_TRUE(near(e.lambda_r));
    EXPECT_TRUE(near(e.lambda_minus));
    EXPECT_LT((J * e.v_minus - e.lambda_minus * e.v_minus).norm(), 1e-6 * e.v_minus.norm());
}

TEST(McGehee, StableDirectionDecayRate) {
    const auto spec = desk2();
    const auto cc = central_configurations(spec).minimal().front();
    const auto e = mcgehee_equilibrium(spec, cc);
    const mcgehee_vec z(0.0, cc.theta, cc.theta + std::numbers::pi);
    const double d0 = 1e-6;
    const mcgehee_vec start = z + d0 * e.v_minus.normalized();
    const auto path = integrate_mcgehee(spec, {start(0), start(1), start(2), 0.0}, 3.0);
    const auto& last = path.back();
    const double d1 = (mcgehee_vec(last.r, last.theta, last.phi) - z).norm();
    const double rate = std::log(d1 / d0) / last.s;
    EXPECT_NEAR(rate, e.lambda_minus, 0.1 * std::abs(e.lambda_minus));
}
