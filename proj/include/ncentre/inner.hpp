#pragma once

#include "ncentre/flow.hpp"
#include "ncentre/outer.hpp"
#include "ncentre/winding.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <deque>
#include <optional>

namespace ncentre {

// ---------------------------------------------------------------------------
// Discrete Maupertuis functional M(u) = 1/2 int |u'|^2 * int (V(u) - h)

struct maupertuis_eval {
    double M = 0.0;
    double K = 0.0; ///< int |u'|^2
    double P = 0.0; ///< int (V - h)
    std::vector<vec2> grad;
    bool flagged = false; ///< some sample was clamped
};

/// Quadrature of the potential factor int (V(u) - h) dt.
/// vertex: trapezoid on the nodes. segment: Gauss-Legendre along each straight segment,
/// bisected while a centre is closer to the piece than its length, so that a segment cannot
/// pass a centre without paying for it.
enum class path_quadrature { vertex, segment };

namespace detail {

struct gl8 {
    std::array<double, 8> s;
    std::array<double, 8> w;
};

inline const gl8& gauss_legendre_8() {
    static const gl8 rule = [] {
        gl8 r{};
        const auto& x = boost::math::quadrature::gauss<double, 8>::abscissa();
        const auto& w = boost::math::quadrature::gauss<double, 8>::weights();
        for (std::size_t k = 0; k < 4; ++k) {
            r.s[k] = 0.5 * (1.0 - x[k]);
            r.s[7 - k] = 0.5 * (1.0 + x[k]);
            r.w[k] = r.w[7 - k] = 0.5 * w[k];
        }
        return r;
    }();
    return rule;
}

/// Adds int_{s0}^{s1} f(a + s (b - a)) ds and its gradients in a and b.
template <class Field>
void segment_integral(const Field& field, const vec2& a, const vec2& b, double s0, double s1, double h, double clamp,
                      int depth, double& value, vec2& ga, vec2& gb, bool& flagged) {
    const vec2 pa = a + s0 * (b - a), pb = a + s1 * (b - a);
    const double len = (pb - pa).norm();
    if (depth < 40 && len > 0.0) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& c : field.centres()) d = std::min(d, point_segment_distance(c, pa, pb));
        if (d < len) {
            const double sm = 0.5 * (s0 + s1);
            segment_integral(field, a, b, s0, sm, h, clamp, depth + 1, value, ga, gb, flagged);
            segment_integral(field, a, b, sm, s1, h, clamp, depth + 1, value, ga, gb, flagged);
            return;
        }
    }
    const auto& q = gauss_legendre_8();
    const double span = s1 - s0;
    for (std::size_t k = 0; k < 8; ++k) {
        const double s = s0 + span * q.s[k];
        const vec2 x = a + s * (b - a);
        const potential_eval pe = clamp > 0.0 ? field.clamped(x, clamp, flagged) : field(x);
        const double w = span * q.w[k];
        value += w * (pe.value - h);
        ga += w * (1.0 - s) * pe.gradient;
        gb += w * s * pe.gradient;
    }
}

/// Second derivatives of int_0^1 f(a + s (b - a)) ds in (a, a), (a, b) and (b, b).
template <class Field>
void segment_hessian(const Field& field, const vec2& a, const vec2& b, double s0, double s1, double clamp, int depth,
                     mat2& Haa, mat2& Hab, mat2& Hbb, bool& flagged) {
    const vec2 pa = a + s0 * (b - a), pb = a + s1 * (b - a);
    const double len = (pb - pa).norm();
    if (depth < 40 && len > 0.0) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& c : field.centres()) d = std::min(d, point_segment_distance(c, pa, pb));
        if (d < len) {
            const double sm = 0.5 * (s0 + s1);
            segment_hessian(field, a, b, s0, sm, clamp, depth + 1, Haa, Hab, Hbb, flagged);
            segment_hessian(field, a, b, sm, s1, clamp, depth + 1, Haa, Hab, Hbb, flagged);
            return;
        }
    }
    const auto& q = gauss_legendre_8();
    const double span = s1 - s0;
    for (std::size_t k = 0; k < 8; ++k) {
        const double s = s0 + span * q.s[k];
        const vec2 x = a + s * (b - a);
        const mat2 H = (clamp > 0.0 ? field.clamped(x, clamp, flagged) : field(x)).hessian;
        const double w = span * q.w[k];
        Haa += w * (1.0 - s) * (1.0 - s) * H;
        Hab += w * s * (1.0 - s) * H;
        Hbb += w * s * s * H;
    }
}

} // namespace detail

/// Value and exact gradient of the discretised functional on the parameter grid `times`
/// (uniform when empty). With clamp > 0 the potential is frozen inside distance `clamp` of
/// a centre instead of raising CollisionPoint.
template <class Field>
maupertuis_eval maupertuis_value_grad(const std::vector<vec2>& u, const Field& field, double h = 1.0, double clamp = 0.0,
                                      const std::vector<double>& times = {},
                                      path_quadrature quad = path_quadrature::vertex) {
    const std::size_t n = u.size();
    require(n >= 2, "path needs at least two points");
    require(times.empty() || times.size() == n, "parameter grid size mismatch");
    auto dt = [&](std::size_t i) {
        return times.empty() ? 1.0 / static_cast<double>(n - 1) : times[i + 1] - times[i];
    };
    maupertuis_eval out;
    out.grad.assign(n, vec2::Zero());
    std::vector<vec2> gP(n, vec2::Zero());
    if (quad == path_quadrature::vertex) {
        for (std::size_t i = 0; i < n; ++i) {
            const potential_eval pe = clamp > 0.0 ? field.clamped(u[i], clamp, out.flagged) : field(u[i]);
            const double w = 0.5 * ((i > 0 ? dt(i - 1) : 0.0) + (i + 1 < n ? dt(i) : 0.0));
            out.P += w * (pe.value - h);
            gP[i] = w * pe.gradient;
        }
    } else {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double val = 0.0;
            vec2 ga = vec2::Zero(), gb = vec2::Zero();
            detail::segment_integral(field, u[i], u[i + 1], 0.0, 1.0, h, clamp, 0, val, ga, gb, out.flagged);
            out.P += dt(i) * val;
            gP[i] += dt(i) * ga;
            gP[i + 1] += dt(i) * gb;
        }
    }
    for (std::size_t i = 0; i + 1 < n; ++i) out.K += (u[i + 1] - u[i]).squaredNorm() / dt(i);
    out.M = 0.5 * out.K * out.P;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const vec2 dK = 2.0 * (u[i] - u[i - 1]) / dt(i - 1) - 2.0 * (u[i + 1] - u[i]) / dt(i);
        out.grad[i] = 0.5 * (dK * out.P + out.K * gP[i]);
    }
    return out;
}

template <class Field>
maupertuis_eval maupertuis_value_grad(const discrete_path& path, const Field& field, double h = 1.0) {
    return maupertuis_value_grad(path.points, field, h, 0.0, path.times);
}

/// Trapezoidal Jacobi length int |u'| sqrt(V - h).
template <class Field>
double jacobi_length(const std::vector<vec2>& u, const Field& field, double h = 1.0) {
    double L = 0.0;
    std::vector<double> root(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) root[i] = std::sqrt(std::max(field.value(u[i]) - h, 0.0));
    for (std::size_t i = 0; i + 1 < u.size(); ++i) L += (u[i + 1] - u[i]).norm() * 0.5 * (root[i] + root[i + 1]);
    return L;
}

template <class Field>
double jacobi_length(const discrete_path& path, const Field& field, double h = 1.0) {
    return jacobi_length(path.points, field, h);
}

// ---------------------------------------------------------------------------
// Inner arcs

struct inner_options {
    std::size_t n_pts = 256;
    double gtol = 1e-8;
    int max_iters = 20000;
    int memory = 10;
    int lbfgs_iters = 400;      ///< quasi-Newton steps before the Newton finish
    int newton_iters = 200;
    double delta_coll = -1.0;   ///< default 1e-3 R
    double clamp = 1e-6;        ///< free-mode clamp radius (collision guard)
    bool polish = true;         ///< refine into a classical arc by shooting
    double shoot_tol = 1e-11;   ///< endpoint tolerance of the shooting refinement
    double polish_gap = 0.02;   ///< accepted relative gap between discrete and classical values
    int mesh_rounds = 5;
    double mesh_rtol = 1e-5;    ///< stop refining once M changes less than this
    int restarts = 0;
    std::optional<double> sigma0; ///< warm start for the shooting refinement
    integrator_options integ{};
};

struct collision_record {
    double t;
    std::size_t centre;
    double distance;
    bool convex; ///< |u - c|^2 locally strictly convex at the flagged instant
};

struct inner_arc {
    discrete_path path;   ///< minimiser of the discretised functional
    trajectory arc;       ///< classical arc x(t) = u(omega t)
    vec2 p1 = vec2::Zero();
    vec2 p2 = vec2::Zero();
    double T_int = 0.0;
    double omega = 0.0;
    double M_value = 0.0;
    double L_value = 0.0;
    double kinetic = 0.0;   ///< int |x'|^2 dt along the arc
    double potential = 0.0; ///< int (V - 1) dt along the arc
    winding_vector winding;
    std::vector<int> windings;
    winding_class cls;
    double min_centre_dist = 0.0;
    std::vector<collision_record> collisions;
    vec2 v_start = vec2::Zero();
    vec2 v_end = vec2::Zero();
    double sigma = 0.0;
    bool polished = false;
    double discrete_M = 0.0;
    double minimizer_gap = 0.0; ///< relative gap between the discrete and classical values
    double grad_norm = 0.0;
    int iterations = 0;
    double eom_residual = 0.0;
};

namespace detail {

/// Solves P * A z = q per coordinate, A the kinetic Hessian on the grid:
/// A_ii = 1/dt_{i-1} + 1/dt_i, A_{i,i+1} = -1/dt_i (interior nodes, Dirichlet ends).
inline void apply_kinetic_inverse(std::vector<vec2>& q, const std::vector<double>& dt, double P) {
    const std::size_t m = q.size();
    if (m == 0) return;
    std::vector<double> c(m);
    std::vector<vec2> d(m);
    auto diag = [&](std::size_t i) { return P * (1.0 / dt[i] + 1.0 / dt[i + 1]); };
    auto off = [&](std::size_t i) { return -P / dt[i + 1]; }; // couples interior i and i+1
    double den = diag(0);
    c[0] = off(0) / den;
    d[0] = q[0] / den;
    for (std::size_t i = 1; i < m; ++i) {
        den = diag(i) - off(i - 1) * c[i - 1];
        c[i] = i + 1 < m ? off(i) / den : 0.0;
        d[i] = (q[i] - off(i - 1) * d[i - 1]) / den;
    }
    q[m - 1] = d[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) q[i] = d[i] - c[i] * q[i + 1];
}

inline double dotv(const std::vector<vec2>& a, const std::vector<vec2>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i].dot(b[i]);
    return s;
}

inline double sup_norm(const std::vector<vec2>& g) {
    double s = 0.0;
    for (const auto& v : g) s = std::max(s, v.cwiseAbs().maxCoeff());
    return s;
}

struct descent_result {
    std::vector<vec2> points;
    std::vector<double> times;
    maupertuis_eval eval;
    int iterations = 0;
    bool converged = false;
};

/// Dense Hessian of M on the interior nodes (segment quadrature).
template <class Field>
Eigen::MatrixXd maupertuis_hessian(const std::vector<vec2>& u, const std::vector<double>& times, const Field& field,
                                   double clamp, const maupertuis_eval& e) {
    const std::size_t n = u.size(), m = n - 2;
    auto dt = [&](std::size_t i) { return times.empty() ? 1.0 / static_cast<double>(n - 1) : times[i + 1] - times[i]; };
    std::vector<mat2> D(n, mat2::Zero()), O(n - 1, mat2::Zero());
    std::vector<vec2> gP(n, vec2::Zero()), gK(n, vec2::Zero());
    bool flagged = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        mat2 Haa = mat2::Zero(), Hab = mat2::Zero(), Hbb = mat2::Zero();
        segment_hessian(field, u[i], u[i + 1], 0.0, 1.0, clamp, 0, Haa, Hab, Hbb, flagged);
        D[i] += dt(i) * Haa;
        O[i] += dt(i) * Hab;
        D[i + 1] += dt(i) * Hbb;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        gK[i] = 2.0 * (u[i] - u[i - 1]) / dt(i - 1) - 2.0 * (u[i + 1] - u[i]) / dt(i);
        gP[i] = (2.0 * e.grad[i] - gK[i] * e.P) / e.K;
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    Eigen::VectorXd a(2 * m), b(2 * m);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = k + 1;
        H.block<2, 2>(2 * k, 2 * k) = 0.5 * (e.P * 2.0 * (1.0 / dt(i - 1) + 1.0 / dt(i)) * mat2::Identity() + e.K * D[i]);
        if (k + 1 < m) {
            const mat2 off = 0.5 * (-e.P * 2.0 / dt(i) * mat2::Identity() + e.K * O[i]);
            H.block<2, 2>(2 * k, 2 * k + 2) = off;
            H.block<2, 2>(2 * k + 2, 2 * k) = off.transpose();
        }
        a.segment<2>(2 * k) = gK[i];
        b.segment<2>(2 * k) = gP[i];
    }
    H += 0.5 * (a * b.transpose() + b * a.transpose());
    return H;
}

/// Levenberg-damped Newton iterations on the interior nodes, with the same projection and
/// class re-verification as the quasi-Newton phase.
template <class Field>
void newton_finish(descent_result& res, const Field& field, const winding_class& cls, double R, const inner_options& opts,
                   double clamp) {
    auto& pts = res.points;
    const auto& times = res.times;
    const std::size_t n = pts.size(), m = n - 2;
    const auto& centres = field.centres();
    auto grad_vec = [&](const maupertuis_eval& e) {
        Eigen::VectorXd g(2 * m);
        for (std::size_t k = 0; k < m; ++k) g.segment<2>(2 * k) = e.grad[k + 1];
        return g;
    };
    double mu = -1.0;
    for (int it = 0; it < opts.newton_iters; ++it) {
        const Eigen::VectorXd g = grad_vec(res.eval);
        if (g.cwiseAbs().maxCoeff() < opts.gtol) {
            res.converged = true;
            return;
        }
        const Eigen::MatrixXd H = maupertuis_hessian(pts, times, field, clamp, res.eval);
        const double scale = H.diagonal().cwiseAbs().maxCoeff();
        if (mu < 0.0) mu = 1e-8 * scale;
        bool accepted = false;
        for (int k = 0; k < 40 && !accepted; ++k) {
            Eigen::MatrixXd A = H;
            A.diagonal().array() += mu;
            Eigen::LLT<Eigen::MatrixXd> llt(A);
            if (llt.info() != Eigen::Success) {
                mu *= 10.0;
                continue;
            }
            const Eigen::VectorXd step = -llt.solve(g);
            std::vector<vec2> trial(pts);
            for (std::size_t q = 0; q < m; ++q) {
                vec2 p = pts[q + 1] + step.segment<2>(2 * q);
                const double r = p.norm();
                if (r > R) p *= R / r;
                trial[q + 1] = p;
            }
            maupertuis_eval te;
            bool ok = cls.matches_path(trial, centres);
            if (ok) {
                try {
                    te = maupertuis_value_grad(trial, field, 1.0, clamp, times, path_quadrature::segment);
                } catch (const error& e) {
                    if (e.code() != errc::collision_point) throw;
                    ok = false;
                }
            }
            // At the rounding floor of M the gradient decides.
            const double floor = 1e-13 * std::abs(res.eval.M);
            if (ok && (te.M < res.eval.M - floor ||
                       (te.M <= res.eval.M + floor && grad_vec(te).cwiseAbs().maxCoeff() < g.cwiseAbs().maxCoeff()))) {
                pts = std::move(trial);
                res.eval = std::move(te);
                ++res.iterations;
                mu = std::max(mu / 10.0, 1e-14 * scale);
                accepted = true;
            } else {
                mu *= 10.0;
            }
        }
        if (!accepted) break;
    }
    res.converged = detail::sup_norm(res.eval.grad) < opts.gtol;
}

/// Limited-memory quasi-Newton descent on the interior points, preconditioned by the
/// kinetic Hessian, with radial projection onto |u| <= R and class re-verification.
template <class Field>
descent_result descend(std::vector<vec2> pts, const std::vector<double>& times, const Field& field, const winding_class& cls,
                       double R, const inner_options& opts, double clamp) {
    const std::size_t n = pts.size();
    const std::size_t m = n - 2;
    std::vector<double> dt(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) dt[i] = times.empty() ? 1.0 / static_cast<double>(n - 1) : times[i + 1] - times[i];
    const auto& centres = field.centres();
    auto interior = [&](const std::vector<vec2>& g) { return std::vector<vec2>(g.begin() + 1, g.end() - 1); };

    descent_result res;
    res.eval = maupertuis_value_grad(pts, field, 1.0, clamp, times, path_quadrature::segment);
    std::deque<std::pair<std::vector<vec2>, std::vector<vec2>>> mem;
    std::vector<vec2> g = interior(res.eval.grad);
    int halvings_total = 0;

    for (int it = 0; it < std::min(opts.max_iters, opts.lbfgs_iters); ++it) {
        if (sup_norm(g) < opts.gtol) {
            res.converged = true;
            break;
        }
        // Two-loop recursion.
        std::vector<vec2> q = g;
        std::vector<double> alpha(mem.size());
        for (std::size_t k = mem.size(); k-- > 0;) {
            const auto& [s, y] = mem[k];
            alpha[k] = dotv(s, q) / dotv(y, s);
            for (std::size_t i = 0; i < m; ++i) q[i] -= alpha[k] * y[i];
        }
        apply_kinetic_inverse(q, dt, std::max(res.eval.P, 1e-12));
        for (std::size_t k = 0; k < mem.size(); ++k) {
            const auto& [s, y] = mem[k];
            const double beta = dotv(y, q) / dotv(y, s);
            for (std::size_t i = 0; i < m; ++i) q[i] += (alpha[k] - beta) * s[i];
        }
        double slope = -dotv(g, q);
        if (!(slope < 0.0)) {
            mem.clear();
            q = g;
            apply_kinetic_inverse(q, dt, std::max(res.eval.P, 1e-12));
            slope = -dotv(g, q);
        }

        double t = 1.0;
        bool accepted = false;
        std::vector<vec2> trial(pts);
        maupertuis_eval te;
        for (int k = 0; k < 60; ++k, t *= 0.5) {
            for (std::size_t i = 0; i < m; ++i) {
                vec2 p = pts[i + 1] - t * q[i];
                const double r = p.norm();
                if (r > R) p *= R / r;
                trial[i + 1] = p;
            }
            if (!cls.matches_path(trial, centres)) {
                ++halvings_total;
                continue;
            }
            try {
                te = maupertuis_value_grad(trial, field, 1.0, clamp, times, path_quadrature::segment);
            } catch (const error& e) {
                if (e.code() != errc::collision_point) throw;
                continue;
            }
            double decrease = 0.0;
            for (std::size_t i = 0; i < m; ++i) decrease += g[i].dot(trial[i + 1] - pts[i + 1]);
            if (te.M <= res.eval.M + 1e-4 * decrease) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!mem.empty()) {
                mem.clear();
                continue;
            }
            break; // line search stalled at the rounding floor
        }
        std::vector<vec2> gn = interior(te.grad);
        std::vector<vec2> s(m), y(m);
        for (std::size_t i = 0; i < m; ++i) {
            s[i] = trial[i + 1] - pts[i + 1];
            y[i] = gn[i] - g[i];
        }
        if (dotv(s, y) > 1e-300) {
            mem.emplace_back(std::move(s), std::move(y));
            if (mem.size() > static_cast<std::size_t>(opts.memory)) mem.pop_front();
        }
        pts = trial;
        res.eval = te;
        g = std::move(gn);
        res.iterations = it + 1;
    }
    if (!res.converged && sup_norm(g) < opts.gtol) res.converged = true;
    (void)halvings_total;
    res.points = std::move(pts);
    res.times = times;
    if (!res.converged) newton_finish(res, field, cls, R, opts, clamp);
    return res;
}

/// Parameter derivative at node i from the quadratic through three neighbouring nodes.
inline vec2 node_derivative(const std::vector<vec2>& u, const std::vector<double>& t, std::size_t i) {
    const std::size_t n = u.size();
    auto T = [&](std::size_t k) { return t.empty() ? static_cast<double>(k) / static_cast<double>(n - 1) : t[k]; };
    std::size_t a = i == 0 ? 0 : (i + 1 == n ? n - 3 : i - 1);
    const double t0 = T(a), t1 = T(a + 1), t2 = T(a + 2), x = T(i);
    const double l0 = ((x - t1) + (x - t2)) / ((t0 - t1) * (t0 - t2));
    const double l1 = ((x - t0) + (x - t2)) / ((t1 - t0) * (t1 - t2));
    const double l2 = ((x - t0) + (x - t1)) / ((t2 - t0) * (t2 - t1));
    return l0 * u[a] + l1 * u[a + 1] + l2 * u[a + 2];
}

/// Launch angle of the discrete path's initial tangent, measured from the inward normal.
inline double launch_angle_of(const std::vector<vec2>& u, const std::vector<double>& t = {}) {
    const vec2 d = node_derivative(u, t, 0);
    const vec2 n = -u[0].normalized();
    const vec2 tan = ccw_tangent(u[0]);
    return std::atan2(d.dot(tan), d.dot(n));
}

/// Redistributes the vertices along the current polyline with density growing like
/// 1/distance near the centres, and sets the parameter grid from the fixed-energy relation
/// dt ~ |du| / sqrt(V - 1) so that the new path starts near equilibrium.
template <class Field>
std::pair<std::vector<vec2>, std::vector<double>> adapt_mesh(const std::vector<vec2>& u, const Field& field, double clamp,
                                                             double kappa = 4.0) {
    const std::size_t n = u.size();
    const auto& centres = field.centres();
    const double floor = std::max(10.0 * clamp, 1e-9);
    std::vector<double> len(n - 1), mon(n, 0.0);
    double L = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) L += (len[i] = (u[i + 1] - u[i]).norm());
    const double l0 = std::max(2.0 * L / static_cast<double>(n), 1e-300);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& c : centres) d = std::min(d, point_segment_distance(c, u[i], u[i + 1]));
        mon[i + 1] = mon[i] + len[i] * (1.0 / l0 + kappa / std::max(d, floor));
    }
    std::vector<vec2> v(n);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double target = mon.back() * static_cast<double>(k) / static_cast<double>(n - 1);
        while (seg + 2 < n && mon[seg + 1] < target) ++seg;
        const double span = mon[seg + 1] - mon[seg];
        const double a = span > 0.0 ? std::clamp((target - mon[seg]) / span, 0.0, 1.0) : 0.0;
        v[k] = u[seg] + a * (u[seg + 1] - u[seg]);
    }
    v.front() = u.front();
    v.back() = u.back();
    std::vector<double> t(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const vec2 mid = 0.5 * (v[i] + v[i + 1]);
        bool flagged = false;
        const double V = clamp > 0.0 ? field.clamped(mid, clamp, flagged).value : field.value(mid);
        t[i + 1] = t[i] + std::max((v[i + 1] - v[i]).norm(), 1e-300) / std::sqrt(std::max(V - 1.0, 1e-12));
    }
    for (auto& x : t) x /= t.back();
    t.back() = 1.0;
    return {v, t};
}

inline std::vector<vec2> positions_of(const trajectory& tr) {
    std::vector<vec2> out;
    out.reserve(tr.samples.size());
    for (const auto& s : tr.samples) out.push_back(s.x);
    return out;
}

/// Refines a discrete minimiser into a classical arc from p1 to p2 by shooting on the
/// inward launch angle. Returns nothing when no arc of the requested class is found.
template <class Field>
std::optional<std::pair<propagation, double>> shoot_inner(const Field& field, const vec2& p1, const vec2& p2, double sigma0,
                                                          const winding_class& cls, const inner_options& opts, bool scan = true) {
    const double R = p1.norm();
    const double th2 = polar_angle(p2);
    const auto& centres = field.centres();
    integrator_options integ = opts.integ;
    auto shoot = [&](double sigma) -> std::optional<propagation> {
        if (std::abs(sigma) >= 0.5 * std::numbers::pi) return std::nullopt;
        try {
            const auto [v, dv] = launch_velocity(field, p1, sigma, -1);
            return propagate_to_sphere(field, state{p1, v, 0.0}, R, -1, integ, vec2::Zero(), dv);
        } catch (const error& e) {
            if (e.code() == errc::collision_approach || e.code() == errc::no_return || e.code() == errc::escape ||
                e.code() == errc::step_size_underflow || e.code() == errc::collision_point)
                return std::nullopt;
            throw;
        }
    };
    auto residual = [&](const propagation& p) { return wrap_pi(polar_angle(p.end.x) - th2); };
    auto in_class = [&](const propagation& p) {
        auto pts = positions_of(p.arc);
        pts.back() = p.end.x;
        return cls.matches_path(pts, centres);
    };
    auto done = [&](const propagation& p) { return R * std::abs(residual(p)) < opts.shoot_tol && in_class(p); };

    // Damped Newton from the warm start.
    double sigma = sigma0;
    auto cur = shoot(sigma);
    if (cur) {
        for (int it = 0; it < 40 && cur; ++it) {
            if (done(*cur)) return std::make_pair(std::move(*cur), sigma);
            const double res = residual(*cur);
            const double d = crossing_angle_derivative(*cur);
            if (!(std::abs(d) > 1e-14)) break;
            double step = -res / d;
            bool ok = false;
            for (int k = 0; k <= 20; ++k, step *= 0.5) {
                auto trial = shoot(sigma + step);
                if (trial && std::abs(residual(*trial)) < std::abs(res) && in_class(*trial)) {
                    sigma += step;
                    cur = std::move(trial);
                    ok = true;
                    break;
                }
            }
            if (!ok) break;
        }
    }

    if (!scan) return std::nullopt;
    // Bracketing fallback: scan around the warm start for class-preserving sign changes.
    auto f = [&](double s) -> std::optional<double> {
        auto p = shoot(s);
        if (!p || !in_class(*p)) return std::nullopt;
        return residual(*p);
    };
    for (double width : {0.02, 0.1}) {
        constexpr int samples = 20;
        std::optional<double> prev;
        double s_prev = 0.0;
        for (int i = 0; i <= samples; ++i) {
            const double s = sigma0 - width + 2.0 * width * i / samples;
            auto val = f(s);
            if (val && prev && (*val) * (*prev) <= 0.0 && std::abs(*val - *prev) < 1.0) {
                double lo = s_prev, hi = s;
                double flo = *prev;
                bool failed = false;
                for (int k = 0; k < 200 && hi - lo > 1e-15; ++k) {
                    const double mid = 0.5 * (lo + hi);
                    auto fm = f(mid);
                    if (!fm) {
                        failed = true;
                        break;
                    }
                    if ((*fm) * flo <= 0.0) {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = *fm;
                    }
                    auto pm = shoot(mid);
                    if (pm && R * std::abs(residual(*pm)) < opts.shoot_tol) {
                        if (in_class(*pm)) return std::make_pair(std::move(*pm), mid);
                        failed = true;
                        break;
                    }
                }
                (void)failed;
            }
            prev = val;
            s_prev = s;
        }
    }
    return std::nullopt;
}

inline void fill_classical(inner_arc& out, propagation&& prop, double sigma) {
    out.polished = true;
    out.sigma = sigma;
    out.arc = std::move(prop.arc);
    out.T_int = prop.end.t;
    out.omega = 1.0 / out.T_int;
    out.kinetic = prop.quad.kinetic;
    out.potential = prop.quad.potential;
    out.M_value = 0.5 * out.kinetic * out.potential;
    out.L_value = prop.quad.length;
    out.v_start = out.arc.samples.front().v;
    out.v_end = prop.end.v;
    out.eom_residual = out.arc.max_energy_drift + (prop.end.x - out.p2).norm();
    // The located event state replaces the last sample so the arc ends exactly at p2.
    out.arc.samples.back().x = out.p2;
    out.arc.samples.back().v = prop.end.v;
    out.arc.samples.back().t = prop.end.t;
}

template <class Field>
std::vector<collision_record> close_approaches(const std::vector<vec2>& pts, const std::vector<double>& times,
                                               const Field& field, double threshold) {
    std::vector<collision_record> out;
    const auto& c = field.centres();
    for (std::size_t j = 0; j < c.size(); ++j) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double d = (pts[i] - c[j]).norm();
            if (d >= threshold) continue;
            const double dl = i > 0 ? (pts[i - 1] - c[j]).norm() : std::numeric_limits<double>::infinity();
            const double dr = i + 1 < pts.size() ? (pts[i + 1] - c[j]).norm() : std::numeric_limits<double>::infinity();
            if (d <= dl && d < dr) {
                bool convex = false;
                if (i > 0 && i + 1 < pts.size()) convex = dl * dl + dr * dr - 2.0 * d * d > 0.0;
                out.push_back({times[i], j, d, convex});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const collision_record& a, const collision_record& b) { return a.t < b.t; });
    return out;
}

/// Windings, closest approach and collision records of an assembled arc; in strict mode
/// collisions and class changes are errors.
template <class Field>
void finish_inner(const Field& field, inner_arc& out, const inner_options& opts, bool strict) {
    const auto& centres = field.centres();
    const double R = out.p1.norm();
    const double delta = opts.delta_coll > 0.0 ? opts.delta_coll : 1e-3 * R;
    auto pts = positions_of(out.arc);
    pts.back() = out.p2;
    try {
        out.windings = winding_numbers(pts, centres, out.cls.cl);
        out.winding = parities(out.windings);
    } catch (const error&) {
        out.windings.clear();
        out.winding.clear();
    }
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& p : pts)
        for (const auto& c : centres) dmin = std::min(dmin, (p - c).norm());
    if (!out.polished)
        for (const auto& p : out.path.points)
            for (const auto& c : centres) dmin = std::min(dmin, (p - c).norm());
    out.min_centre_dist = dmin;

    std::vector<double> times;
    for (const auto& s : out.arc.samples) times.push_back(s.t);
    out.collisions = close_approaches(pts, times, field, out.polished ? delta : std::max(delta, 1e3 * opts.clamp));

    if (strict) {
        if (!out.collisions.empty() || !(out.min_centre_dist > delta))
            throw error(errc::collision_detected, "constrained arc approaches a centre closer than delta_coll");
        if (!out.cls.matches(out.windings)) throw error(errc::constraint_broken, "refined arc left the winding class");
    }
}

} // namespace detail

/// Builds the arc record from a discrete minimiser, refining it by shooting when possible.
/// `strict` turns collision and class failures into errors (constrained mode).
template <class Field>
inner_arc assemble_inner(const Field& field, const detail::descent_result& d, const winding_class& cls, double R,
                         const inner_options& opts, bool strict) {
    const double delta = opts.delta_coll > 0.0 ? opts.delta_coll : 1e-3 * R;
    inner_arc out;
    out.path.points = d.points;
    out.path.times = d.times;
    out.p1 = d.points.front();
    out.p2 = d.points.back();
    out.discrete_M = d.eval.M;
    out.grad_norm = detail::sup_norm(d.eval.grad);
    out.iterations = d.iterations;
    out.cls = cls;
    const auto& centres = field.centres();

    std::optional<std::pair<propagation, double>> shot;
    if (opts.polish && !d.eval.flagged) {
        const double s_path = detail::launch_angle_of(d.points, d.times);
        shot = detail::shoot_inner(field, out.p1, out.p2, opts.sigma0 ? *opts.sigma0 : s_path, cls, opts);
        if (!shot && opts.sigma0) shot = detail::shoot_inner(field, out.p1, out.p2, s_path, cls, opts);
    }

    // The discrete value bounds the class infimum from above, so a classical arc well below
    // or above it is a different critical point, not the refined minimiser.
    if (shot) {
        const double L = shot->first.quad.length;
        const double Mc = 0.5 * L * L;
        if (Mc > d.eval.M * (1.0 + opts.polish_gap) || Mc < d.eval.M * (1.0 - opts.polish_gap)) shot.reset();
    }

    if (shot) {
        detail::fill_classical(out, std::move(shot->first), shot->second);
    } else {
        if (strict) {
            double dmin = std::numeric_limits<double>::infinity();
            for (const auto& p : d.points)
                for (const auto& c : centres) dmin = std::min(dmin, (p - c).norm());
            if (dmin <= delta)
                throw error(errc::collision_detected, "discrete minimiser reaches distance " + std::to_string(dmin) +
                                                          " from a centre");
            throw error(errc::not_converged, "no classical arc found near the discrete minimiser");
        }
        // Collisional or unrefined arc: reparametrise the discrete minimiser directly.
        const auto& u = d.points;
        const std::size_t n = u.size();
        out.omega = std::sqrt(d.eval.P / (0.5 * d.eval.K));
        out.T_int = 1.0 / out.omega;
        out.arc.energy_level = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double ti = d.times.empty() ? static_cast<double>(i) / static_cast<double>(n - 1) : d.times[i];
            state s{u[i], out.omega * detail::node_derivative(u, d.times, i), ti / out.omega};
            bool flagged = false;
            const double V = field.clamped(u[i], opts.clamp, flagged).value;
            out.arc.max_energy_drift = std::max(out.arc.max_energy_drift, std::abs(0.5 * s.v.squaredNorm() - V + 1.0));
            out.arc.samples.push_back(s);
        }
        out.M_value = d.eval.M;
        out.kinetic = d.eval.K * out.omega;
        out.potential = d.eval.P / out.omega;
        double L = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            bool f = false;
            const double a = std::sqrt(std::max(field.clamped(u[i], opts.clamp, f).value - 1.0, 0.0));
            const double b = std::sqrt(std::max(field.clamped(u[i + 1], opts.clamp, f).value - 1.0, 0.0));
            L += (u[i + 1] - u[i]).norm() * 0.5 * (a + b);
        }
        out.L_value = L;
        out.v_start = out.arc.samples.front().v;
        out.v_end = out.arc.samples.back().v;
        out.sigma = detail::launch_angle_of(u, d.times);
        out.eom_residual = out.arc.max_energy_drift;
    }
    out.minimizer_gap = std::abs(out.discrete_M - out.M_value) / out.M_value;
    detail::finish_inner(field, out, opts, strict);
    return out;
}

/// Follows a classical inner arc to new endpoints by shooting from its launch angle. Returns
/// nothing when the continuation leaves the class or fails to converge.
template <class Field>
std::optional<inner_arc> continue_inner(const Field& field, const vec2& p1, const vec2& p2, const inner_arc& prev,
                                        const inner_options& opts = {}, bool strict = true) {
    if (!prev.polished) return std::nullopt;
    auto shot = detail::shoot_inner(field, p1, p2, prev.sigma, prev.cls, opts, false);
    if (!shot) return std::nullopt;
    inner_arc out;
    out.path = prev.path;
    out.p1 = p1;
    out.p2 = p2;
    out.cls = prev.cls;
    out.discrete_M = prev.discrete_M;
    out.grad_norm = prev.grad_norm;
    out.iterations = 0;
    detail::fill_classical(out, std::move(shot->first), shot->second);
    out.minimizer_gap = std::abs(out.discrete_M - out.M_value) / out.M_value;
    try {
        detail::finish_inner(field, out, opts, strict);
    } catch (const error& e) {
        if (e.code() == errc::collision_detected || e.code() == errc::constraint_broken) return std::nullopt;
        throw;
    }
    return out;
}

/// Minimises the discretised Maupertuis functional from p1 to p2 within `cls` and refines the
/// result into a classical arc. In strict mode collisions are fatal and the potential is
/// exact; otherwise it is clamped at opts.clamp and close approaches are only recorded.
template <class Field>
inner_arc minimize_in_class(const Field& field, const vec2& p1, const vec2& p2, const winding_class& cls,
                            const inner_options& opts = {}, bool strict = true, const discrete_path* start = nullptr) {
    const double R = p1.norm();
    require(std::abs(p2.norm() - R) <= 1e-10 * std::max(1.0, R), "endpoints must lie on the same sphere");
    require(opts.n_pts >= 64, "n_pts must be at least 64");
    const auto& centres = field.centres();
    const double clamp = strict ? 0.0 : opts.clamp;

    detail::descent_result d;
    std::vector<vec2> pts;
    std::vector<double> times;
    if (start && start->size() == opts.n_pts && (start->front() - p1).norm() < 0.1 * R && (start->back() - p2).norm() < 0.1 * R) {
        // Warm start: move the end segments onto the new endpoints.
        pts = start->points;
        times = start->times;
        const vec2 d1 = p1 - pts.front(), d2 = p2 - pts.back();
        const std::size_t n = pts.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double s = static_cast<double>(i) / static_cast<double>(n - 1);
            pts[i] += (1.0 - s) * (1.0 - s) * (1.0 - s) * d1 + s * s * s * d2;
        }
        pts.front() = p1;
        pts.back() = p2;
        if (!cls.matches_path(pts, centres)) pts.clear();
    }
    if (pts.empty()) {
        pts = initial_path(p1, p2, cls, centres, R, opts.n_pts, opts.delta_coll).points;
        times.clear();
    }
    double prev = std::numeric_limits<double>::infinity();
    for (int round = 0; round < std::max(opts.mesh_rounds, 1); ++round) {
        auto [v, t] = detail::adapt_mesh(pts, field, clamp);
        if (cls.matches_path(v, centres)) {
            pts = std::move(v);
            times = std::move(t);
        }
        d = detail::descend(pts, times, field, cls, R, opts, clamp);
        pts = d.points;
        const bool settled = std::abs(prev - d.eval.M) < opts.mesh_rtol * d.eval.M;
        prev = d.eval.M;
        if (d.converged && settled) break;
    }
    if (!d.converged && detail::sup_norm(d.eval.grad) > 1e3 * opts.gtol)
        throw error(errc::not_converged, "gradient sup-norm " + std::to_string(detail::sup_norm(d.eval.grad)));
    return assemble_inner(field, d, cls, R, opts, strict);
}

/// Minimises in both components of the partition; the arc for l (l_0 = 1) comes first.
template <class Field>
std::pair<inner_arc, inner_arc> minimize_inner_partition(const Field& field, const vec2& p1, const vec2& p2, const partition& P,
                                                         const closure& cl, const inner_options& opts = {}) {
    const auto [l, lt] = partition_windings(P);
    winding_class a{winding_class::kind::parity, l, 0, cl};
    winding_class b{winding_class::kind::parity, lt, 0, cl};
    return {minimize_in_class(field, p1, p2, a, opts), minimize_in_class(field, p1, p2, b, opts)};
}

/// Winding classes searched by the unconstrained variant: every admissible parity vector,
/// or the single all-enclosing class when the centres coincide.
inline std::vector<winding_vector> free_mode_classes(const std::vector<vec2>& c) {
    const std::size_t N = c.size();
    bool coincident = true;
    for (const auto& x : c) coincident = coincident && (x - c.front()).norm() < 1e-14;
    std::vector<winding_vector> out;
    if (coincident || N < 2) {
        out.push_back(winding_vector(N, 1));
        return out;
    }
    for (std::size_t code = 1; code + 1 < (std::size_t{1} << N); ++code) {
        winding_vector l(N);
        for (std::size_t j = 0; j < N; ++j) l[j] = static_cast<int>((code >> j) & 1u);
        out.push_back(l);
    }
    return out;
}

/// Unconstrained (possibly collisional) minimisation: the lowest minimiser over the classes
/// of free_mode_classes, with the potential clamped near the centres.
template <class Field>
inner_arc minimize_inner_free(const Field& field, const vec2& p1, const vec2& p2, const closure& cl, const inner_options& opts = {}) {
    std::optional<inner_arc> best;
    for (const auto& l : free_mode_classes(field.centres())) {
        winding_class cls{winding_class::kind::parity, l, 0, cl};
        inner_arc arc;
        try {
            arc = minimize_in_class(field, p1, p2, cls, opts, false);
        } catch (const error& e) {
            if (e.code() == errc::not_converged || e.code() == errc::construction_failed) continue;
            throw;
        }
        if (!best || arc.M_value < best->M_value) best = std::move(arc);
    }
    if (!best) throw error(errc::not_converged, "no free minimiser converged");
    return std::move(*best);
}

template <class Field>
inner_arc minimize_inner_free(const Field& field, const vec2& p1, const vec2& p2, const inner_options& opts = {}) {
    return minimize_inner_free(field, p1, p2, ccw_closure(p1, p2), opts);
}

/// Arc homotopic (chord-closed) to a loop around centre i alone.
template <class Field>
inner_arc minimize_inner_two_centre(const Field& field, const vec2& p1, const vec2& p2, std::size_t i,
                                    const inner_options& opts = {}) {
    require(field.centres().size() == 2 && i < 2, "two-centre mode needs N = 2");
    winding_class cls{winding_class::kind::two_centre, {}, i, chord_closure()};
    return minimize_in_class(field, p1, p2, cls, opts);
}

template <class Field>
inner_arc minimize_inner(const Field& field, const vec2& p1, const vec2& p2, const winding_vector& l,
                         const inner_options& opts = {}) {
    require(admissible(l), "winding vector is not admissible");
    winding_class cls{winding_class::kind::parity, l, 0, ccw_closure(p1, p2)};
    return minimize_in_class(field, p1, p2, cls, opts);
}

// ---------------------------------------------------------------------------
// Post-hoc checks

struct action_relation_report {
    std::vector<double> T;
    std::vector<double> value;   ///< A_T + T h
    std::size_t argmin = 0;
    double T_star = 0.0;         ///< 1/omega
    double min_value = 0.0;
    double expected = 0.0;       ///< 2 sqrt(M)
    bool argmin_ok = false;
    bool value_ok = false;
    bool passed() const { return argmin_ok && value_ok; }
};

/// Scans T -> A_T(x_T) + T h, x_T(t) = u(t/T), on a 21-point log grid around 1/omega, where
/// A_T = int_0^T 1/2 |x'|^2 + V = K_u/(2T) + T int_0^1 V(u) and h is the energy level
/// (1/2 |x'|^2 - V = h; h = -1 for the rescaled problem).
inline action_relation_report action_relation_check(const inner_arc& a, double h = -1.0, double tol = 1e-4) {
    action_relation_report rep;
    const double Ku = a.kinetic * a.T_int;   // int_0^1 |u'|^2 ds
    const double Vint = a.potential / a.T_int + 1.0; // int_0^1 V(u) ds
    const double Mh = 0.5 * Ku * (Vint + h);
    rep.T_star = a.T_int;
    rep.expected = 2.0 * std::sqrt(Mh);
    rep.min_value = std::numeric_limits<double>::infinity();
    auto value = [&](double T) { return Ku / (2.0 * T) + T * Vint + T * h; };
    for (int k = -10; k <= 10; ++k) {
        const double T = rep.T_star * std::pow(2.0, k / 10.0);
        rep.T.push_back(T);
        rep.value.push_back(value(T));
        if (rep.value.back() < rep.min_value) {
            rep.min_value = rep.value.back();
            rep.argmin = rep.T.size() - 1;
        }
    }
    rep.argmin_ok = rep.argmin >= 9 && rep.argmin <= 11;
    rep.value_ok = std::abs(value(rep.T_star) - rep.expected) <= tol * rep.expected;
    return rep;
}

} // namespace ncentre
