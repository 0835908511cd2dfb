#pragma once

#include "ncentre/flow.hpp"

#include <Eigen/Eigenvalues>

namespace ncentre {

/// Blown-up coordinates for the one-centre problem r^{-alpha} U(theta) at energy -1.
struct mcgehee_state {
    double r = 0.0;
    double theta = 0.0;
    double phi = 0.0;
    double s = 0.0;
};

using mcgehee_vec = Eigen::Vector3d;

/// Right-hand side of
///   r' = 2 r (U - r^a) cos(phi - theta)
///   theta' = 2 (U - r^a) sin(phi - theta)
///   phi' = U' cos(phi - theta) + a U sin(phi - theta)
inline mcgehee_vec mcgehee_rhs(const angular_potential& U, double alpha, const mcgehee_vec& z) {
    const double r = z(0), th = z(1), ph = z(2);
    const auto u = U.eval(th);
    const double w = u.u - std::pow(std::max(r, 0.0), alpha);
    const double c = std::cos(ph - th), s = std::sin(ph - th);
    return mcgehee_vec(2.0 * r * w * c, 2.0 * w * s, u.du * c + alpha * u.u * s);
}

struct mcgehee_eigen {
    double lambda_r;
    double lambda_minus;
    Eigen::Vector3d v_minus;
};

/// Eigen-data of the equilibrium (0, theta*, theta* + pi) on the collision manifold.
inline mcgehee_eigen mcgehee_equilibrium(double alpha, const central_configuration& cc) {
    require(cc.kind == cc_kind::minimal_nondegenerate, "configuration must be minimal non-degenerate");
    const double U = cc.u_value, Upp = cc.u_second;
    const double b = 2.0 - alpha;
    mcgehee_eigen out;
    out.lambda_r = -2.0 * U;
    out.lambda_minus = 0.5 * b * U - 0.5 * std::sqrt(b * b * U * U + 8.0 * U * Upp);
    out.v_minus = Eigen::Vector3d(0.0, 1.0, 0.5 + alpha / 4.0 + 0.25 * std::sqrt(b * b + 8.0 * Upp / U));
    return out;
}

inline mcgehee_eigen mcgehee_equilibrium(const problem_spec& spec, const central_configuration& cc) {
    return mcgehee_equilibrium(spec.alpha(), cc);
}

/// Integrates the blown-up system with the leading angular potential of `spec`
/// (the one-centre localisation) from `initial` up to rescaled time s_end.
inline std::vector<mcgehee_state> integrate_mcgehee(const angular_potential& U, double alpha, const mcgehee_state& initial,
                                                    double s_end, const integrator_options& opts = {}) {
    require(initial.r >= 0.0, "r must be non-negative");
    require(s_end > initial.s, "s_end must exceed the initial time");
    using Y = detail::ode_state<3>;
    auto rhs = [&](const Y& y, Y& dy, double) {
        const auto f = mcgehee_rhs(U, alpha, mcgehee_vec(y[0], y[1], y[2]));
        dy = {f(0), f(1), f(2)};
    };
    std::vector<mcgehee_state> out;
    auto on_step = [&](double s, const Y& y) {
        if (!(U(y[1]) - std::pow(std::max(y[0], 0.0), alpha) > 0.0))
            throw error(errc::hill_boundary, "U(theta) - r^alpha <= 0 at s=" + std::to_string(s));
        if (!out.empty() && s <= out.back().s) return;
        out.push_back({y[0], y[1], y[2], s});
    };
    auto none = [](const Y&) { return 0.0; };
    detail::drive<3>(rhs, Y{initial.r, initial.theta, initial.phi}, initial.s, s_end, opts, on_step, none, 1, false);
    return out;
}

inline std::vector<mcgehee_state> integrate_mcgehee(const problem_spec& spec, const mcgehee_state& initial, double s_end,
                                                    const integrator_options& opts = {}) {
    return integrate_mcgehee(spec.leading_angular(), spec.alpha(), initial, s_end, opts);
}

} // namespace ncentre
