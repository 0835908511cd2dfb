#pragma once

#include "ncentre/inner.hpp"
#include "ncentre/outer.hpp"

#include <future>
#include <map>
#include <tuple>

namespace ncentre {

enum class inner_mode { partition, free, two_centre };

/// Constraint on the inner arc that follows a symbol's outer arc.
struct inner_constraint {
    inner_mode mode = inner_mode::partition;
    std::size_t partition_index = 0;
    int component = 0;      ///< 0: winding vector l (l_0 = 1), 1: its complement
    std::size_t centre = 0; ///< two-centre mode
};

struct glue_symbol {
    std::size_t config = 0; ///< index into the minimal configurations
    inner_constraint inner;
};

/// Junction offsets phi_0..phi_{2n-1} from the assigned configurations; p_{2n} = p_0.
struct junction_vector {
    std::vector<double> angles;
    std::vector<glue_symbol> sequence;
    double eps = 0.0;
};

namespace detail {

// Junction velocities feed a strongly unstable periodic flow; the pieces are built tighter
// than the standalone defaults so that one-period re-integration stays meaningful.
inline outer_options glue_outer_defaults() {
    outer_options o;
    o.tol = 1e-12;
    o.integ.tol = 1e-12;
    return o;
}

inline inner_options glue_inner_defaults() {
    inner_options o;
    o.shoot_tol = 1e-13;
    o.integ.tol = 1e-12;
    return o;
}

} // namespace detail

struct glue_options {
    double u_nbhd = 0.05;
    double gtol = 1e-7;
    int max_iters = 200;
    int jobs = 1;
    bool verify_inner = true; ///< re-minimise the final inner arcs from their warm starts
    outer_options outer = detail::glue_outer_defaults();
    inner_options inner = detail::glue_inner_defaults();
};

struct periodic_orbit {
    std::vector<glue_symbol> sequence;
    std::vector<double> angles;
    double eps = 0.0;
    double R = 0.0;
    std::vector<outer_arc> outer;
    std::vector<inner_arc> inner;
    trajectory orbit;                 ///< pieces concatenated in time, outer arc 0 first
    std::vector<double> piece_start;  ///< start time of each of the 2n pieces
    double total_period = 0.0;
    double L_total = 0.0;
    double grad_norm = 0.0;
    double junction_mismatch = 0.0;   ///< max |v_arrive - v_depart|
    double speed_mismatch = 0.0;      ///< max ||v_arrive| - |v_depart||
    double acceleration_mismatch = 0.0;
    double position_mismatch = 0.0;
    double min_piece_duration = 0.0;
    double max_piece_duration = 0.0;
    double min_hill_margin = 0.0;     ///< min V - 1 along samples
    double max_energy_residual = 0.0;
    double return_error = -1.0;       ///< re-integration over one period (negative: not run)
    double inner_minimality_gap = 0.0;
    int iterations = 0;
    bool converged = false;
    bool collisional = false;         ///< some inner arc is an unrefined collision path

    std::size_t size() const { return outer.size(); }
};

namespace detail {

inline winding_class class_for(const problem_spec& spec, const inner_constraint& c, const vec2& p1, const vec2& p2,
                               double theta_from, double theta_to) {
    const closure cl = nominal_closure(p1, p2, theta_from, theta_to);
    switch (c.mode) {
    case inner_mode::two_centre: return {winding_class::kind::two_centre, {}, c.centre, chord_closure()};
    case inner_mode::free: return {winding_class::kind::any, {}, 0, cl};
    case inner_mode::partition: break;
    }
    const auto [l, lt] = partition_windings(partition_from_index(spec.size(), c.partition_index));
    return {winding_class::kind::parity, c.component == 0 ? l : lt, 0, cl};
}

template <class T>
std::vector<T> run_jobs(std::size_t count, int jobs, const std::function<T(std::size_t)>& task) {
    std::vector<T> out(count);
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = task(i);
        return out;
    }
    std::vector<std::future<T>> fut;
    for (std::size_t i = 0; i < count; ++i) fut.push_back(std::async(std::launch::async, task, i));
    for (std::size_t i = 0; i < count; ++i) out[i] = fut[i].get();
    return out;
}

} // namespace detail

/// The total Jacobi length L(phi) of the closed chain of outer and inner arcs for a symbol
/// sequence, with warm starts carried between evaluations.
class length_function {
public:
    struct evaluation {
        double L = 0.0;
        std::vector<double> grad;
        std::vector<outer_arc> outer;
        std::vector<inner_arc> inner;
    };

    length_function(const problem_spec& spec, double eps, std::vector<glue_symbol> sequence, glue_options opts = {},
                    double R = 0.0)
        : spec_(&spec), eps_(eps), field_(spec, eps), seq_(std::move(sequence)), opts_(std::move(opts)),
          R_(R > 0.0 ? R : spec.r_work()), ccs_(central_configurations(spec).minimal()) {
        check_eps(spec, eps);
        require(eps < spec.eps_max(), "eps must be below eps_max");
        require(!seq_.empty(), "empty symbol sequence");
        for (const auto& s : seq_) {
            require(s.config < ccs_.size(), "configuration index out of range");
            if (s.inner.mode == inner_mode::partition)
                require(s.inner.partition_index < partition_count(spec.size()), "partition index out of range");
            if (s.inner.mode == inner_mode::two_centre) require(spec.size() == 2 && s.inner.centre < 2, "two-centre mode needs N = 2");
        }
        outer_sigma_.assign(seq_.size(), 0.0);
        inner_cache_.resize(seq_.size());
    }

    std::size_t n() const { return seq_.size(); }
    double R() const { return R_; }
    const scaled_field& field() const { return field_; }
    const std::vector<central_configuration>& configurations() const { return ccs_; }
    const std::vector<glue_symbol>& sequence() const { return seq_; }
    const glue_options& options() const { return opts_; }

    double base_angle(std::size_t s) const { return ccs_[seq_[(s / 2) % n()].config].theta; }
    vec2 point(std::size_t s, const std::vector<double>& phi) const {
        const std::size_t k = s % (2 * n());
        return polar(R_, base_angle(k) + phi[k]);
    }

    /// Inner arc k runs from p_{2k+1} to p_{2k+2} under the constraint of symbol k.
    winding_class inner_class(std::size_t k, const std::vector<double>& phi) const {
        const std::size_t k1 = (k + 1) % n();
        return detail::class_for(*spec_, seq_[k].inner, point(2 * k + 1, phi), point(2 * k + 2, phi),
                                 ccs_[seq_[k].config].theta, ccs_[seq_[k1].config].theta);
    }

    bool strict(std::size_t k) const { return seq_[k].inner.mode != inner_mode::free; }

    evaluation operator()(const std::vector<double>& phi) {
        require(phi.size() == 2 * n(), "junction vector size mismatch");
        for (double a : phi)
            if (std::abs(a) > opts_.u_nbhd + 1e-12) throw error(errc::outside_neighbourhood, "junction offset outside the box");
        evaluation ev;
        std::function<outer_arc(std::size_t)> do_outer = [&](std::size_t k) {
            outer_options o = opts_.outer;
            o.u_nbhd = opts_.u_nbhd;
            o.sigma0 = outer_sigma_[k];
            return shoot_outer(field_, point(2 * k, phi), point(2 * k + 1, phi), ccs_[seq_[k].config], o);
        };
        std::function<inner_arc(std::size_t)> do_inner = [&](std::size_t k) { return build_inner(k, phi); };
        ev.outer = detail::run_jobs(n(), opts_.jobs, do_outer);
        ev.inner = detail::run_jobs(n(), opts_.jobs, do_inner);
        for (std::size_t k = 0; k < n(); ++k) {
            outer_sigma_[k] = ev.outer[k].sigma;
            inner_cache_[k] = ev.inner[k];
            ev.L += ev.outer[k].length + ev.inner[k].L_value;
        }
        ev.grad = gradient(ev);
        return ev;
    }

    /// dL/dphi_s = <v_arrive - v_depart, R t(p_s)> / sqrt(2).
    std::vector<double> gradient(const evaluation& ev) const {
        std::vector<double> g(2 * n());
        for (std::size_t k = 0; k < n(); ++k) {
            // p_{2k}: inner arc k-1 arrives, outer arc k departs.
            const std::size_t km = (k + n() - 1) % n();
            const vec2 p0 = ev.outer[k].p0, p1 = ev.outer[k].p1;
            g[2 * k] = (ev.inner[km].v_end - ev.outer[k].v0).dot(R_ * ccw_tangent(p0)) / std::sqrt(2.0);
            g[2 * k + 1] = (ev.outer[k].v1 - ev.inner[k].v_start).dot(R_ * ccw_tangent(p1)) / std::sqrt(2.0);
        }
        return g;
    }

    /// Full class-constrained minimisation of inner arc k, warm-started from the last path.
    inner_arc minimise_inner(std::size_t k, const std::vector<double>& phi, bool warm) const {
        const vec2 p1 = point(2 * k + 1, phi), p2 = point(2 * k + 2, phi);
        const auto cls = inner_class(k, phi);
        inner_options io = opts_.inner;
        if (seq_[k].inner.mode == inner_mode::free) return minimize_inner_free(field_, p1, p2, cls.cl, io);
        const discrete_path* start = warm && inner_cache_[k] ? &inner_cache_[k]->path : nullptr;
        if (start) io.sigma0 = inner_cache_[k]->sigma;
        return minimize_in_class(field_, p1, p2, cls, io, strict(k), start);
    }

private:
    inner_arc build_inner(std::size_t k, const std::vector<double>& phi) {
        const vec2 p1 = point(2 * k + 1, phi), p2 = point(2 * k + 2, phi);
        const auto cls = inner_class(k, phi);
        if (inner_cache_[k] && inner_cache_[k]->polished) {
            inner_arc prev = *inner_cache_[k];
            prev.cls = cls;
            if (auto a = continue_inner(field_, p1, p2, prev, opts_.inner, strict(k))) return std::move(*a);
        }
        // First construction of this transition: shared between identical transitions.
        const auto key = std::make_tuple(seq_[k].config, seq_[(k + 1) % n()].config, phi[2 * k + 1], phi[(2 * k + 2) % (2 * n())],
                                         static_cast<int>(cls.type), cls.target, cls.centre);
        {
            std::lock_guard lock(mutex_);
            auto it = first_arcs_.find(key);
            if (it != first_arcs_.end()) return it->second;
        }
        inner_arc a = minimise_inner(k, phi, inner_cache_[k].has_value());
        std::lock_guard lock(mutex_);
        first_arcs_.emplace(key, a);
        return a;
    }

    const problem_spec* spec_;
    double eps_;
    scaled_field field_;
    std::vector<glue_symbol> seq_;
    glue_options opts_;
    double R_;
    std::vector<central_configuration> ccs_;
    std::vector<double> outer_sigma_;
    std::vector<std::optional<inner_arc>> inner_cache_;
    std::map<std::tuple<std::size_t, std::size_t, double, double, int, winding_vector, std::size_t>, inner_arc> first_arcs_;
    std::mutex mutex_;
};

inline double total_length(length_function& f, const junction_vector& jv) { return f(jv.angles).L; }

inline std::vector<double> length_gradient(length_function& f, const junction_vector& jv) { return f(jv.angles).grad; }

namespace detail {

inline double sup_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
}

/// Gradient with the components that push against an active bound removed.
inline std::vector<double> projected_gradient(const std::vector<double>& x, const std::vector<double>& g, double box) {
    std::vector<double> pg(g);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= box - 1e-12 && g[i] < 0.0) pg[i] = 0.0;
        if (x[i] <= -box + 1e-12 && g[i] > 0.0) pg[i] = 0.0;
    }
    return pg;
}

} // namespace detail

/// Joins the pieces of an evaluation into a periodic orbit and runs the junction diagnostics.
inline periodic_orbit assemble_orbit(const length_function& f, const std::vector<double>& phi,
                                     length_function::evaluation ev) {
    periodic_orbit out;
    out.sequence = f.sequence();
    out.angles = phi;
    out.eps = f.field().eps();
    out.R = f.R();
    out.L_total = ev.L;
    out.grad_norm = detail::sup_norm(ev.grad);
    out.outer = std::move(ev.outer);
    out.inner = std::move(ev.inner);
    const auto& field = f.field();
    const std::size_t n = out.outer.size();

    double t0 = 0.0;
    out.min_piece_duration = std::numeric_limits<double>::infinity();
    auto append = [&](const trajectory& tr, double duration) {
        out.piece_start.push_back(t0);
        for (std::size_t i = 0; i < tr.samples.size(); ++i) {
            if (i == 0 && !out.orbit.samples.empty()) continue; // junction already recorded
            state s = tr.samples[i];
            s.t += t0;
            out.orbit.samples.push_back(s);
        }
        out.min_piece_duration = std::min(out.min_piece_duration, duration);
        out.max_piece_duration = std::max(out.max_piece_duration, duration);
        t0 += duration;
    };
    for (std::size_t k = 0; k < n; ++k) {
        append(out.outer[k].arc, out.outer[k].T_ext);
        append(out.inner[k].arc, out.inner[k].T_int);
        if (!out.inner[k].polished) out.collisional = true;
    }
    out.total_period = t0;
    out.orbit.energy_level = -1.0;

    auto junction = [&](const vec2& xa, const vec2& va, const vec2& xd, const vec2& vd) {
        out.position_mismatch = std::max(out.position_mismatch, (xa - xd).norm());
        out.junction_mismatch = std::max(out.junction_mismatch, (va - vd).norm());
        out.speed_mismatch = std::max(out.speed_mismatch, std::abs(va.norm() - vd.norm()));
        if (field.nearest_centre(xa).second > coll_eps && field.nearest_centre(xd).second > coll_eps)
            out.acceleration_mismatch = std::max(out.acceleration_mismatch, (field(xa).gradient - field(xd).gradient).norm());
    };
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t km = (k + n - 1) % n;
        junction(out.inner[km].arc.samples.back().x, out.inner[km].v_end, out.outer[k].p0, out.outer[k].v0);
        junction(out.outer[k].p1, out.outer[k].v1, out.inner[k].arc.samples.front().x, out.inner[k].v_start);
    }

    out.min_hill_margin = std::numeric_limits<double>::infinity();
    for (const auto& s : out.orbit.samples) {
        if (field.nearest_centre(s.x).second <= coll_eps) continue;
        const double V = field.value(s.x);
        out.min_hill_margin = std::min(out.min_hill_margin, V - 1.0);
        out.max_energy_residual = std::max(out.max_energy_residual, std::abs(0.5 * s.v.squaredNorm() - V + 1.0));
    }
    out.orbit.max_energy_drift = out.max_energy_residual;
    return out;
}

/// Integrates the assembled initial state over one period and measures the return error.
inline double reintegrate_period(const periodic_orbit& orb, const scaled_field& field, const integrator_options& opts = {}) {
    const state s0{orb.outer.front().p0, orb.outer.front().v0, 0.0};
    const trajectory tr = integrate(field, s0, orb.total_period, opts);
    const state& e = tr.samples.back();
    return std::max((e.x - s0.x).norm(), (e.v - s0.v).norm());
}

/// Minimises the total Jacobi length over the junction offsets (projected BFGS in the box
/// |phi_s| <= u_nbhd, then Newton steps on a finite-difference Hessian of the exact gradient)
/// and returns the assembled periodic orbit.
inline periodic_orbit minimize_junctions(length_function& f, std::vector<double> phi = {}) {
    const auto& opts = f.options();
    const std::size_t d = 2 * f.n();
    const double box = opts.u_nbhd;
    if (phi.empty()) phi.assign(d, 0.0);
    require(phi.size() == d, "junction vector size mismatch");

    auto ev = f(phi);
    // Collisional inner arcs carry no reliable endpoint velocities: no junction optimisation.
    bool refined = true;
    for (const auto& a : ev.inner) refined = refined && a.polished;
    if (!refined) {
        auto orb = assemble_orbit(f, phi, std::move(ev));
        orb.converged = false;
        return orb;
    }

    auto clampv = [&](std::vector<double> x) {
        for (double& v : x) v = std::clamp(v, -box, box);
        return x;
    };
    auto try_eval = [&](const std::vector<double>& x) -> std::optional<length_function::evaluation> {
        try {
            return f(x);
        } catch (const error& e) {
            switch (e.code()) {
            case errc::newton_diverged:
            case errc::not_converged:
            case errc::collision_detected:
            case errc::constraint_broken:
            case errc::construction_failed:
            case errc::no_return:
            case errc::collision_approach:
            case errc::outside_hill: return std::nullopt;
            default: throw;
            }
        }
    };

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    bool scaled = false;
    int it = 0;
    bool converged = false;
    for (; it < opts.max_iters; ++it) {
        const auto pg = detail::projected_gradient(phi, ev.grad, box);
        if (detail::sup_norm(pg) < opts.gtol) {
            converged = true;
            break;
        }
        if (detail::sup_norm(pg) < 1e-5) break; // hand over to the Newton finish
        Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(pg.data(), static_cast<Eigen::Index>(d));
        Eigen::VectorXd dir = -H * g;
        if (dir.dot(g) >= 0.0) {
            H.setIdentity();
            dir = -g;
        }
        for (std::size_t i = 0; i < d; ++i)
            if (pg[i] == 0.0) dir[static_cast<Eigen::Index>(i)] = 0.0;
        const double dmax = dir.cwiseAbs().maxCoeff();
        if (dmax > 0.5 * box) dir *= 0.5 * box / dmax;

        bool accepted = false;
        std::vector<double> xt;
        std::optional<length_function::evaluation> et;
        for (int k = 0; k < 30 && !accepted; ++k) {
            const double t = std::pow(0.5, k);
            std::vector<double> x(phi);
            for (std::size_t i = 0; i < d; ++i) x[i] += t * dir[static_cast<Eigen::Index>(i)];
            xt = clampv(x);
            et = try_eval(xt);
            if (!et) continue;
            double decrease = 0.0;
            for (std::size_t i = 0; i < d; ++i) decrease += ev.grad[i] * (xt[i] - phi[i]);
            const bool armijo = et->L <= ev.L + 1e-4 * decrease;
            const bool flat = et->L <= ev.L + 1e-10 * std::abs(ev.L) &&
                              detail::sup_norm(detail::projected_gradient(xt, et->grad, box)) < detail::sup_norm(pg);
            accepted = armijo || flat;
        }
        if (!accepted) {
            if (!H.isIdentity()) {
                H.setIdentity();
                scaled = false;
                continue;
            }
            break;
        }
        Eigen::VectorXd s(static_cast<Eigen::Index>(d)), y(static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            s[static_cast<Eigen::Index>(i)] = xt[i] - phi[i];
            y[static_cast<Eigen::Index>(i)] = et->grad[i] - ev.grad[i];
        }
        const double sy = s.dot(y);
        if (sy > 1e-16 * s.norm() * y.norm()) {
            if (!scaled) {
                H *= sy / y.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
        }
        phi = std::move(xt);
        ev = std::move(*et);
    }

    // Newton finish on the free coordinates.
    for (int k = 0; k < 8 && !converged; ++k) {
        const auto pg = detail::projected_gradient(phi, ev.grad, box);
        if (detail::sup_norm(pg) < opts.gtol) {
            converged = true;
            break;
        }
        const double h = 1e-5;
        Eigen::MatrixXd Hs(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        bool ok = true;
        for (std::size_t j = 0; j < d && ok; ++j) {
            std::vector<double> xp(phi), xm(phi);
            xp[j] += h;
            xm[j] -= h;
            if (std::abs(xp[j]) > box || std::abs(xm[j]) > box) {
                ok = false;
                break;
            }
            auto ep = try_eval(xp);
            auto em = try_eval(xm);
            if (!ep || !em) {
                ok = false;
                break;
            }
            for (std::size_t i = 0; i < d; ++i)
                Hs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (ep->grad[i] - em->grad[i]) / (2.0 * h);
        }
        if (!ok) break;
        Hs = 0.5 * (Hs + Hs.transpose()).eval();
        const Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(ev.grad.data(), static_cast<Eigen::Index>(d));
        const Eigen::VectorXd step = -Hs.ldlt().solve(g);
        std::vector<double> xt(phi);
        for (std::size_t i = 0; i < d; ++i) xt[i] += step[static_cast<Eigen::Index>(i)];
        xt = clampv(xt);
        auto et = try_eval(xt);
        if (!et || detail::sup_norm(et->grad) >= detail::sup_norm(ev.grad)) {
            ev = f(phi); // restore the warm starts at the current point
            break;
        }
        phi = std::move(xt);
        ev = std::move(*et);
        ++it;
    }
    if (!converged) converged = detail::sup_norm(detail::projected_gradient(phi, ev.grad, box)) < opts.gtol;

    for (double a : phi)
        if (converged && std::abs(a) >= box - 1e-9)
            throw error(errc::boundary_minimum, "junction offset converged to the edge of the box");
    if (!converged)
        throw error(errc::not_converged, "junction gradient sup-norm " + std::to_string(detail::sup_norm(ev.grad)));

    double gap = 0.0;
    if (opts.verify_inner) {
        for (std::size_t k = 0; k < f.n(); ++k) {
            const inner_arc check = f.minimise_inner(k, phi, true);
            const double M = ev.inner[k].M_value;
            gap = std::max(gap, (M - check.M_value) / M);
        }
    }
    auto orb = assemble_orbit(f, phi, std::move(ev));
    orb.iterations = it;
    orb.converged = true;
    orb.inner_minimality_gap = gap;
    return orb;
}

inline periodic_orbit minimize_junctions(const problem_spec& spec, double eps, const std::vector<glue_symbol>& sequence,
                                         const glue_options& opts = {}) {
    length_function f(spec, eps, sequence, opts);
    auto orb = minimize_junctions(f);
    orb.return_error = reintegrate_period(orb, f.field(), opts.outer.integ);
    return orb;
}

/// Maps an orbit of the eps-problem to the original problem at energy -h (h = eps^alpha):
/// x(t) = h^{-1/alpha} y(h^{(alpha+2)/(2 alpha)} t).
inline trajectory rescale_orbit(const trajectory& tr, const problem_spec& spec, double h) {
    require(h > 0.0, "h must be positive");
    const double a = spec.alpha();
    const double sx = std::pow(h, -1.0 / a);
    const double st = std::pow(h, -(a + 2.0) / (2.0 * a));
    const double sv = std::sqrt(h);
    trajectory out;
    out.energy_level = -h;
    for (const auto& s : tr.samples) out.samples.push_back({sx * s.x, sv * s.v, st * s.t});
    for (const auto& s : out.samples) {
        const double r = std::abs(0.5 * s.v.squaredNorm() - eval_total(spec, s.x).value + h);
        out.max_energy_drift = std::max(out.max_energy_drift, r);
    }
    return out;
}

inline periodic_orbit rescale_orbit(const periodic_orbit& orb, const problem_spec& spec, double h) {
    periodic_orbit out = orb;
    const double a = spec.alpha();
    const double st = std::pow(h, -(a + 2.0) / (2.0 * a));
    out.orbit = rescale_orbit(orb.orbit, spec, h);
    out.total_period = st * orb.total_period;
    for (double& t : out.piece_start) t *= st;
    out.max_energy_residual = out.orbit.max_energy_drift;
    return out;
}

} // namespace ncentre
