#pragma once

#include "ncentre/potential.hpp"

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace ncentre {

struct state {
    vec2 x = vec2::Zero();
    vec2 v = vec2::Zero();
    double t = 0.0;
};

struct trajectory {
    std::vector<state> samples;
    double energy_level = -1.0;
    double max_energy_drift = 0.0;

    double duration() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }
    const state& front() const { return samples.front(); }
    const state& back() const { return samples.back(); }
};

struct integrator_options {
    double tol = 1e-10;         ///< absolute and relative local error tolerance
    double coll_guard = 1e-6;   ///< abort when closer than this to a centre
    double t_max = 200.0;       ///< give up looking for an event after this time
    double r_escape = 1e3;
    double max_step = 0.02;     ///< upper bound on the step size (event resolution)
    double initial_step = 1e-4;
    double min_step = 1e-14;
};

/// Quadratures accumulated along a solution: P = int (V - 1), K = int |v|^2, L = int |v| sqrt(V - 1).
/// The "1" is the energy offset (-energy_level).
struct arc_quadratures {
    double potential = 0.0;
    double kinetic = 0.0;
    double length = 0.0;
};

namespace detail {

template <std::size_t D>
using ode_state = std::array<double, D>;

template <std::size_t D>
struct drive_result {
    ode_state<D> y{};
    double t = 0.0;
    bool event = false;
};

/// Adaptive Dormand-Prince 5(4) with dense output. `on_step(t, y)` sees every accepted step
/// end (and the located event state); it may throw to abort. When `event` is supplied, the
/// first crossing of g in direction `event_dir` after g has had the opposite sign ends the run.
template <std::size_t D, class Rhs, class OnStep, class Event>
drive_result<D> drive(Rhs&& rhs, ode_state<D> y0, double t0, double t_stop, const integrator_options& opts,
                      OnStep&& on_step, Event&& event, int event_dir, bool use_event) {
    namespace odeint = boost::numeric::odeint;
    using stepper_type = odeint::runge_kutta_dopri5<ode_state<D>>;
    auto dense = odeint::make_dense_output(opts.tol, opts.tol, opts.max_step, stepper_type());
    auto sys = [&](const ode_state<D>& y, ode_state<D>& dy, double t) { rhs(y, dy, t); };

    dense.initialize(y0, t0, std::min(opts.initial_step, opts.max_step));
    on_step(t0, y0);

    double g_prev = use_event ? event(y0) : 0.0;
    bool armed = use_event && g_prev * event_dir < 0.0;
    drive_result<D> out;
    ode_state<D> tmp{};
    std::size_t tiny_steps = 0;

    while (true) {
        std::pair<double, double> span;
        try {
            span = dense.do_step(sys);
        } catch (const odeint::step_adjustment_error& e) {
            throw error(errc::step_size_underflow, e.what());
        }
        const double ta = span.first;
        const double tb = span.second;
        if (tb - ta < opts.min_step * std::max(1.0, std::abs(tb))) {
            if (++tiny_steps > 50) throw error(errc::step_size_underflow, "step size collapsed");
        } else {
            tiny_steps = 0;
        }

        if (use_event) {
            const double g_now = event(dense.current_state());
            if (armed && g_now * event_dir >= 0.0) {
                // Illinois false position on the dense interpolant.
                double a = ta, b = tb, ga = g_prev, gb = g_now;
                int side = 0;
                double tc = b;
                for (int it = 0; it < 200; ++it) {
                    tc = (gb - ga) != 0.0 ? b - gb * (b - a) / (gb - ga) : 0.5 * (a + b);
                    if (!(tc > a && tc < b)) tc = 0.5 * (a + b);
                    dense.calc_state(tc, tmp);
                    const double gc = event(tmp);
                    if (std::abs(gc) < 1e-14 || (b - a) < 1e-15 * std::max(1.0, std::abs(b))) break;
                    if ((gc < 0.0) == (gb < 0.0)) {
                        b = tc;
                        gb = gc;
                        if (side == -1) ga *= 0.5;
                        side = -1;
                    } else {
                        a = tc;
                        ga = gc;
                        if (side == 1) gb *= 0.5;
                        side = 1;
                    }
                }
                dense.calc_state(tc, tmp);
                out.y = tmp;
                out.t = tc;
                out.event = true;
                on_step(tc, tmp);
                return out;
            }
            if (g_now * event_dir < 0.0) armed = true;
            g_prev = g_now;
        }

        if (tb >= t_stop) {
            dense.calc_state(t_stop, tmp);
            out.y = tmp;
            out.t = t_stop;
            out.event = false;
            on_step(t_stop, tmp);
            return out;
        }
        on_step(tb, dense.current_state());
    }
}

/// Position/velocity plus one variational direction (dx, dv) and the three arc quadratures.
inline constexpr std::size_t arc_dim = 11;

template <class Field>
void arc_rhs(const Field& field, double energy_offset, const ode_state<arc_dim>& y, ode_state<arc_dim>& dy) {
    const vec2 x(y[0], y[1]);
    const vec2 v(y[2], y[3]);
    const vec2 dx(y[4], y[5]);
    const auto pe = field(x);
    dy[0] = y[2];
    dy[1] = y[3];
    dy[2] = pe.gradient.x();
    dy[3] = pe.gradient.y();
    dy[4] = y[6];
    dy[5] = y[7];
    const vec2 ddv = pe.hessian * dx;
    dy[6] = ddv.x();
    dy[7] = ddv.y();
    const double f = pe.value - energy_offset;
    const double v2 = v.squaredNorm();
    dy[8] = f;
    dy[9] = v2;
    dy[10] = std::sqrt(v2) * std::sqrt(std::max(f, 0.0));
}

template <class Field>
void guard(const Field& field, const vec2& x, double t, const integrator_options& opts) {
    const auto [j, d] = field.nearest_centre(x);
    if (d < opts.coll_guard)
        throw error(errc::collision_approach,
                    "t=" + std::to_string(t) + " centre=" + std::to_string(j + 1) + " distance=" + std::to_string(d));
    if (!(x.norm() < opts.r_escape)) throw error(errc::escape, "t=" + std::to_string(t));
}

} // namespace detail

template <class Field>
double energy_residual(const Field& field, const state& s, double energy_level = -1.0) {
    return 0.5 * s.v.squaredNorm() - field.value(s.x) - energy_level;
}

inline double energy_residual(const problem_spec& spec, double eps, const state& s, double energy_level = -1.0) {
    return energy_residual(scaled_field(spec, eps), s, energy_level);
}

/// Result of propagating a state, optionally until a sphere crossing.
struct propagation {
    trajectory arc;
    state end;
    bool event = false;
    vec2 dx_end = vec2::Zero(); ///< variational position at the end
    vec2 dv_end = vec2::Zero();
    arc_quadratures quad;
};

namespace detail {

template <class Field, class Event>
propagation propagate(const Field& field, const state& start, double t_stop, const integrator_options& opts,
                      double energy_level, const vec2& dx0, const vec2& dv0, Event&& event, int event_dir,
                      bool use_event) {
    ode_state<arc_dim> y0{start.x.x(), start.x.y(), start.v.x(), start.v.y(), dx0.x(), dx0.y(),
                          dv0.x(),     dv0.y(),     0.0,         0.0,         0.0};
    propagation out;
    out.arc.energy_level = energy_level;
    const double offset = -energy_level;
    auto rhs = [&](const ode_state<arc_dim>& y, ode_state<arc_dim>& dy, double) { arc_rhs(field, offset, y, dy); };
    auto on_step = [&](double t, const ode_state<arc_dim>& y) {
        state s{vec2(y[0], y[1]), vec2(y[2], y[3]), t};
        guard(field, s.x, t, opts);
        if (!out.arc.samples.empty() && t <= out.arc.samples.back().t) return;
        out.arc.max_energy_drift = std::max(out.arc.max_energy_drift, std::abs(energy_residual(field, s, energy_level)));
        out.arc.samples.push_back(s);
    };
    const auto res = drive<arc_dim>(rhs, y0, start.t, t_stop, opts, on_step, event, event_dir, use_event);
    out.end = state{vec2(res.y[0], res.y[1]), vec2(res.y[2], res.y[3]), res.t};
    out.event = res.event;
    out.dx_end = vec2(res.y[4], res.y[5]);
    out.dv_end = vec2(res.y[6], res.y[7]);
    out.quad = arc_quadratures{res.y[8], res.y[9], res.y[10]};
    return out;
}

} // namespace detail

/// Integrates x'' = grad V^eps(x) from `initial` up to `t_end`.
template <class Field>
trajectory integrate(const Field& field, const state& initial, double t_end, const integrator_options& opts = {},
                     double energy_level = -1.0) {
    require(t_end > initial.t, "t_end must exceed the initial time");
    const auto [j, d] = field.nearest_centre(initial.x);
    if (d < opts.coll_guard) throw error(errc::collision_approach, "initial point at centre " + std::to_string(j + 1));
    auto none = [](const detail::ode_state<detail::arc_dim>&) { return 0.0; };
    return detail::propagate(field, initial, t_end, opts, energy_level, vec2::Zero(), vec2::Zero(), none, 1, false)
        .arc;
}

inline trajectory integrate(const problem_spec& spec, double eps, const state& initial, double t_end,
                            const integrator_options& opts = {}) {
    return integrate(scaled_field(spec, eps), initial, t_end, opts);
}

/// Propagates from a point on the sphere |x| = R until the next crossing of the sphere.
/// `departure` is +1 for an outward start and -1 for an inward start. The variational
/// direction (dx0, dv0) is carried along.
template <class Field>
propagation propagate_to_sphere(const Field& field, const state& start, double R, int departure,
                                const integrator_options& opts = {}, const vec2& dx0 = vec2::Zero(),
                                const vec2& dv0 = vec2::Zero(), double energy_level = -1.0) {
    auto g = [R](const detail::ode_state<detail::arc_dim>& y) { return y[0] * y[0] + y[1] * y[1] - R * R; };
    // The event fires when g returns to the starting side of the sphere.
    auto res = detail::propagate(field, start, start.t + opts.t_max, opts, energy_level, dx0, dv0, g, departure > 0 ? -1 : 1,
                                 true);
    if (!res.event) throw error(errc::no_return, "no return to the sphere before t_max=" + std::to_string(opts.t_max));
    return res;
}

struct sphere_return {
    double T;
    state end;
    trajectory arc;
};

/// First return of an outward-pointing state on |x| = R to the same sphere.
template <class Field>
sphere_return first_return_to_sphere(const Field& field, const state& start, double R,
                                     const integrator_options& opts = {}) {
    require(std::abs(start.x.norm() - R) <= 1e-10 * std::max(1.0, R), "start must lie on the sphere");
    require(start.x.dot(start.v) > 0.0, "start velocity must point outward");
    auto p = propagate_to_sphere(field, start, R, +1, opts);
    return {p.end.t - start.t, p.end, std::move(p.arc)};
}

inline sphere_return first_return_to_sphere(const problem_spec& spec, double eps, const state& start, double R,
                                            const integrator_options& opts = {}) {
    return first_return_to_sphere(scaled_field(spec, eps), start, R, opts);
}

// ---------------------------------------------------------------------------
// Homothetic motions

struct homothetic_result {
    trajectory traj;
    double T_xi;
    state start;
};

/// Initial state (xi, v_xi) of the homothetic ejection along a central configuration.
inline state homothetic_start(const problem_spec& spec, const central_configuration& cc, double R) {
    const vec2 xi = cc.point(R);
    const double w0 = std::pow(R, -spec.alpha()) * spec.leading_angular()(cc.theta);
    if (!(w0 > 1.0)) throw error(errc::outside_hill, "W0(xi) <= 1: xi is outside the Hill region");
    const double speed = std::sqrt(2.0 * (w0 - 1.0));
    return state{xi, speed * xi / R, 0.0};
}

inline homothetic_result homothetic_orbit(const problem_spec& spec, const central_configuration& cc, double R,
                                          const integrator_options& opts = {}) {
    const state s0 = homothetic_start(spec, cc, R);
    auto ret = first_return_to_sphere(scaled_field(spec, 0.0), s0, R, opts);
    return {std::move(ret.arc), ret.T, s0};
}

// ---------------------------------------------------------------------------
// Variational equation

struct matrix_sample {
    double t;
    mat2 M;
    mat2 Mdot;
};

using matrix_trajectory = std::vector<matrix_sample>;

/// Integrates M'' = Hess V(x(t)) M along the solution issued from base.front().
template <class Field>
matrix_trajectory variational_flow(const Field& field, const trajectory& base, const mat2& M0, const mat2& Mdot0,
                                   const integrator_options& opts = {}) {
    require(!base.samples.empty(), "empty base trajectory");
    require(base.max_energy_drift < 1e-7, "base trajectory energy drift too large");
    constexpr std::size_t D = 12;
    const state& s0 = base.front();
    detail::ode_state<D> y0{s0.x.x(), s0.x.y(), s0.v.x(), s0.v.y(), M0(0, 0), M0(1, 0), M0(0, 1), M0(1, 1),
                            Mdot0(0, 0), Mdot0(1, 0), Mdot0(0, 1), Mdot0(1, 1)};
    auto rhs = [&](const detail::ode_state<D>& y, detail::ode_state<D>& dy, double) {
        const auto pe = field(vec2(y[0], y[1]));
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = pe.gradient.x();
        dy[3] = pe.gradient.y();
        mat2 M;
        M << y[4], y[6], y[5], y[7];
        const mat2 Mdd = pe.hessian * M;
        for (int i = 0; i < 4; ++i) dy[4 + i] = y[8 + i];
        dy[8] = Mdd(0, 0);
        dy[9] = Mdd(1, 0);
        dy[10] = Mdd(0, 1);
        dy[11] = Mdd(1, 1);
    };
    matrix_trajectory out;
    auto on_step = [&](double t, const detail::ode_state<D>& y) {
        detail::guard(field, vec2(y[0], y[1]), t, opts);
        if (!out.empty() && t <= out.back().t) return;
        matrix_sample m;
        m.t = t;
        m.M << y[4], y[6], y[5], y[7];
        m.Mdot << y[8], y[10], y[9], y[11];
        out.push_back(m);
    };
    auto none = [](const detail::ode_state<D>&) { return 0.0; };
    detail::drive<D>(rhs, y0, s0.t, base.back().t, opts, on_step, none, 1, false);
    return out;
}

/// Solves M'' = Hess V M with M(0) = 0, M(T) = I along `base` (T = base duration) by combining
/// the fundamental solution with M(0) = 0, M'(0) = I.
template <class Field>
matrix_trajectory variational_bvp(const Field& field, const trajectory& base, const integrator_options& opts = {}) {
    auto fund = variational_flow(field, base, mat2::Zero(), mat2::Identity(), opts);
    const mat2 YT = fund.back().M;
    Eigen::JacobiSVD<mat2> svd(YT);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(1);
    if (!(smin > 0.0) || smax / smin > 1e12) throw error(errc::singular_bvp, "fundamental endpoint matrix is singular");
    const mat2 C = YT.inverse();
    for (auto& m : fund) {
        m.M = m.M * C;
        m.Mdot = m.Mdot * C;
    }
    return fund;
}

} // namespace ncentre
