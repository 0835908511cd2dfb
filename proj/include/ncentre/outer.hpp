#pragma once

#include "ncentre/flow.hpp"

#include <vector>

namespace ncentre {

struct outer_options {
    double u_nbhd = 0.05;      ///< half-width (rad) of the neighbourhood of the configuration
    double tol = 1e-9;         ///< endpoint residual
    int max_iters = 30;
    int max_halvings = 20;
    double sigma0 = 0.0;       ///< initial launch angle (warm start)
    integrator_options integ{};
};

struct outer_arc {
    trajectory arc;
    vec2 p0 = vec2::Zero();
    vec2 p1 = vec2::Zero();
    double T_ext = 0.0;
    vec2 v0 = vec2::Zero();
    vec2 v1 = vec2::Zero();
    int newton_iters = 0;
    double residual = 0.0;
    double sigma = 0.0;     ///< launch angle from the outward normal at p0
    double length = 0.0;    ///< Jacobi length of the arc
    double min_radius_excess = 0.0; ///< min over interior samples of |x| - R
};

namespace detail {

/// Launch velocity on the energy shell at p (|p| = R), making angle sigma with the
/// normal n = dir * p / |p| (dir = +1 outward, -1 inward), and its derivative in sigma.
template <class Field>
std::pair<vec2, vec2> launch_velocity(const Field& field, const vec2& p, double sigma, int dir, double energy_level = -1.0) {
    const double f = field.value(p) + energy_level;
    if (!(f > 0.0)) throw error(errc::outside_hill, "launch point outside the Hill region");
    const double speed = std::sqrt(2.0 * f);
    const vec2 n = dir * p.normalized();
    const vec2 t = ccw_tangent(p);
    return {speed * (std::cos(sigma) * n + std::sin(sigma) * t), speed * (-std::sin(sigma) * n + std::cos(sigma) * t)};
}

/// d(angle of the sphere-crossing point)/d sigma from the propagated variation.
inline double crossing_angle_derivative(const propagation& p) {
    const vec2 x = p.end.x;
    const vec2 v = p.end.v;
    const double dT = -x.dot(p.dx_end) / x.dot(v);
    const vec2 dX = p.dx_end + v * dT;
    return cross(x, dX) / x.squaredNorm();
}

} // namespace detail

/// Shoots the outer arc from p0 to p1 (both on |x| = R near the configuration cc).
template <class Field>
outer_arc shoot_outer(const Field& field, const vec2& p0, const vec2& p1, const central_configuration& cc,
                      const outer_options& opts = {}) {
    const double R = p0.norm();
    require(std::abs(p1.norm() - R) <= 1e-10 * std::max(1.0, R), "endpoints must lie on the same sphere");
    const double th0 = std::atan2(p0.y(), p0.x());
    const double th1 = std::atan2(p1.y(), p1.x());
    if (std::abs(wrap_pi(th0 - cc.theta)) > opts.u_nbhd + 1e-14 || std::abs(wrap_pi(th1 - cc.theta)) > opts.u_nbhd + 1e-14)
        throw error(errc::outside_neighbourhood, "endpoints outside the neighbourhood of the configuration");

    auto shoot = [&](double sigma) {
        const auto [v, dv] = detail::launch_velocity(field, p0, sigma, +1);
        return std::make_pair(propagate_to_sphere(field, state{p0, v, 0.0}, R, +1, opts.integ, vec2::Zero(), dv), v);
    };
    auto residual_of = [&](const propagation& p) { return wrap_pi(std::atan2(p.end.x.y(), p.end.x.x()) - th1); };

    double sigma = opts.sigma0;
    auto [prop, v0] = shoot(sigma);
    double res = residual_of(prop);
    int iters = 0;
    while (R * std::abs(res) >= opts.tol) {
        if (iters >= opts.max_iters)
            throw error(errc::newton_diverged, "iters=" + std::to_string(iters) + " residual=" + std::to_string(R * std::abs(res)));
        ++iters;
        const double d = detail::crossing_angle_derivative(prop);
        if (!(std::abs(d) > 1e-14)) throw error(errc::newton_diverged, "vanishing shooting derivative");
        double step = -res / d;
        bool accepted = false;
        for (int k = 0; k <= opts.max_halvings; ++k, step *= 0.5) {
            if (std::abs(sigma + step) >= 0.5 * std::numbers::pi) continue;
            try {
                auto trial = shoot(sigma + step);
                const double tres = residual_of(trial.first);
                if (std::abs(tres) < std::abs(res)) {
                    sigma += step;
                    prop = std::move(trial.first);
                    v0 = trial.second;
                    res = tres;
                    accepted = true;
                    break;
                }
            } catch (const error& e) {
                if (e.code() != errc::no_return && e.code() != errc::collision_approach && e.code() != errc::escape) throw;
            }
        }
        if (!accepted)
            throw error(errc::newton_diverged, "iters=" + std::to_string(iters) + " residual=" + std::to_string(R * std::abs(res)));
    }

    outer_arc out;
    out.p0 = p0;
    out.p1 = p1;
    out.T_ext = prop.end.t;
    out.v0 = v0;
    out.v1 = prop.end.v;
    out.newton_iters = iters;
    out.residual = (prop.end.x - p1).norm();
    out.sigma = sigma;
    out.length = prop.quad.length;
    double excess = std::numeric_limits<double>::infinity();
    const auto& s = prop.arc.samples;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) excess = std::min(excess, s[i].x.norm() - R);
    out.min_radius_excess = excess;
    out.arc = std::move(prop.arc);
    // The located event state replaces the final sample so the arc ends exactly at p1.
    if (!out.arc.samples.empty()) out.arc.samples.back().x = prop.end.x;
    if (!(excess > 1e-12 * R)) throw error(errc::newton_diverged, "arc re-enters the ball");
    return out;
}

inline outer_arc shoot_outer(const problem_spec& spec, double eps, const vec2& p0, const vec2& p1,
                             const central_configuration& cc, const outer_options& opts = {}) {
    check_eps(spec, eps);
    require(eps < spec.eps_max(), "eps must be below eps_max");
    return shoot_outer(scaled_field(spec, eps), p0, p1, cc, opts);
}

/// Derivative of the outer Jacobi length for angular endpoint displacements dphi0, dphi1.
inline double length_gradient_ext(const outer_arc& a, double dphi0, double dphi1) {
    const double R0 = a.p0.norm(), R1 = a.p1.norm();
    return (-a.v0.dot(R0 * dphi0 * ccw_tangent(a.p0)) + a.v1.dot(R1 * dphi1 * ccw_tangent(a.p1))) / std::sqrt(2.0);
}

struct monotonicity_entry {
    double phi0;
    double phi1;
    double ratio; ///< -<v0, p0^perp> / phi0
};

struct monotonicity_report {
    std::vector<monotonicity_entry> entries;
    double min_ratio = std::numeric_limits<double>::infinity();
    bool all_positive = true;
    std::vector<std::string> failures;
};

/// Tangential launch monotonicity at eps = 0 on the working sphere.
inline monotonicity_report tangential_monotonicity_check(const problem_spec& spec, const central_configuration& cc,
                                                         const std::vector<double>& phi_grid, double R = 0.0,
                                                         const outer_options& opts = {}) {
    if (R <= 0.0) R = spec.r_work();
    scaled_field field(spec, 0.0);
    monotonicity_report rep;
    for (double phi0 : phi_grid) {
        if (phi0 == 0.0) continue;
        for (double phi1 : {-phi0, 0.0, phi0}) {
            const vec2 p0 = polar(R, cc.theta + phi0);
            const vec2 p1 = polar(R, cc.theta + phi1);
            try {
                const auto arc = shoot_outer(field, p0, p1, cc, opts);
                const vec2 perp(-p0.y(), p0.x());
                const double ratio = -arc.v0.dot(perp) / phi0;
                rep.entries.push_back({phi0, phi1, ratio});
                rep.min_ratio = std::min(rep.min_ratio, ratio);
                if (!(ratio > 0.0)) rep.all_positive = false;
            } catch (const error& e) {
                rep.all_positive = false;
                rep.failures.push_back(e.what());
            }
        }
    }
    return rep;
}

} // namespace ncentre
