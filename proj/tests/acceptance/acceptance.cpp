// Property checks on the desk problems. Prints one line per criterion and writes the
// exported data under --out; with --compare the exports are checked byte for byte against
// an earlier run.

#include "ncentre/config.hpp"
#include "ncentre/io.hpp"
#include "ncentre/mcgehee.hpp"

#include <CLI11.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>

using namespace ncentre;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) { return std::chrono::duration<double>(clock_type::now() - t0).count(); }

double r12(double x) {
    if (!std::isfinite(x)) return x;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return std::strtod(buf, nullptr);
}

std::string sci(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2e", x);
    return buf;
}

std::string word_text(const std::vector<std::size_t>& w, const char* sep = ",") {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? sep : "") + std::to_string(w[i]);
    return s;
}

struct outcome {
    bool pass = false;
    std::string detail;
    json data = json::object();
};

struct context {
    std::string config_dir;
    fs::path out;
    problem_spec desk2;
    problem_spec desk3;
    problem_spec deskb;
    double eps_glue = 0.0;
    std::optional<periodic_orbit> orbit01;
};

void write_json(const context& ctx, const std::string& name, const json& j) {
    std::ofstream os(ctx.out / name);
    os << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

outcome derivatives(context& ctx) {
    const auto t0 = clock_type::now();
    std::mt19937 rng(20240611);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const auto& spec = ctx.desk2;
    double worst_g = 0.0, worst_h = 0.0;
    int n = 0;
    while (n < 100) {
        const vec2 x(u(rng), u(rng));
        bool near = false;
        for (const auto& c : spec.centres()) near = near || (x - c.position).norm() < 0.05;
        if (near) continue;
        ++n;
        const auto e = eval_total(spec, x);
        vec2 g;
        mat2 H;
        for (int i = 0; i < 2; ++i) {
            vec2 d = vec2::Zero();
            d[i] = 1e-6;
            g[i] = (eval_total(spec, x + d).value - eval_total(spec, x - d).value) / 2e-6;
            d[i] = 1e-5;
            H.col(i) = (eval_total(spec, x + d).gradient - eval_total(spec, x - d).gradient) / 2e-5;
        }
        worst_g = std::max(worst_g, (e.gradient - g).norm() / std::max(1.0, e.gradient.norm()));
        worst_h = std::max(worst_h, (e.hessian - H).norm() / std::max(1.0, e.hessian.norm()));
    }
    const double t = seconds_since(t0);
    outcome o;
    o.pass = worst_g < 1e-6 && worst_h < 1e-4 && t < 1.0;
    o.detail = "gradient rel " + sci(worst_g) + ", hessian rel " + sci(worst_h);
    o.data = {{"points", n}, {"gradient_rel", r12(worst_g)}, {"hessian_rel", r12(worst_h)}};
    return o;
}

outcome perturbation(context& ctx) {
    const auto t0 = clock_type::now();
    const auto& spec = ctx.desk2;
    scaled_field w0(spec, 0.0);
    json pts = json::array();
    std::vector<double> le, ld;
    for (double frac : {0.2, 0.1, 0.05, 0.025}) {
        const double eps = frac * spec.eps_max();
        scaled_field f(spec, eps);
        double d = 0.0;
        for (int i = 0; i < 3600; ++i) {
            const vec2 y = polar(1.0, two_pi * i / 3600.0);
            d = std::max(d, std::abs(f.value(y) - w0.value(y)));
        }
        le.push_back(std::log(eps));
        ld.push_back(std::log(d));
        pts.push_back({{"eps", r12(eps)}, {"sup", r12(d)}});
    }
    // Least-squares slope.
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < le.size(); ++i) mx += le[i] / le.size(), my += ld[i] / ld.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < le.size(); ++i) sxy += (le[i] - mx) * (ld[i] - my), sxx += (le[i] - mx) * (le[i] - mx);
    const double slope = sxy / sxx;
    const double t = seconds_since(t0);
    outcome o;
    o.pass = slope >= spec.gamma() - 0.1 && t < 1.0;
    char buf[120];
    std::snprintf(buf, sizeof buf, "slope %.4f, gamma %.4f", slope, spec.gamma());
    o.detail = buf;
    o.data = {{"samples", pts}, {"slope", r12(slope)}, {"gamma", r12(spec.gamma())}};
    return o;
}

outcome homothetic(context& ctx) {
    const auto t0 = clock_type::now();
    const auto& spec = ctx.desk2;
    const double R = spec.r_work();
    double ex = 0, ev = 0, eT = 0;
    json arr = json::array();
    for (const auto& cc : central_configurations(spec).minimal()) {
        const auto res = homothetic_orbit(spec, cc, R);
        const state& e = res.traj.back();
        const double dx = (e.x - res.start.x).norm(), dv = (e.v + res.start.v).norm();
        const double a = spec.alpha(), U = cc.u_value, rmax = std::pow(U, 1.0 / a);
        boost::math::quadrature::tanh_sinh<double> ts;
        const double T = 2 * ts.integrate([&](double r) { return 1.0 / std::sqrt(2 * (U * std::pow(r, -a) - 1.0)); }, R, rmax);
        ex = std::max(ex, dx);
        ev = std::max(ev, dv);
        eT = std::max(eT, std::abs(res.T_xi - T));
        arr.push_back({{"theta", r12(cc.theta)}, {"T", r12(res.T_xi)}, {"T_quadrature", r12(T)}});
    }
    const double t = seconds_since(t0);
    outcome o;
    o.pass = ex < 1e-7 && ev < 1e-7 && eT < 1e-6 && t < 1.0;
    o.detail = "position " + sci(ex) + ", velocity " + sci(ev) + ", period " + sci(eT);
    o.data = {{"configurations", arr}};
    return o;
}

outcome hessian(context& ctx) {
    const auto& spec = ctx.desk2;
    const double R = spec.r_work();
    scaled_field w0(spec, 0.0);
    double worst = 0.0;
    json arr = json::array();
    for (const auto& cc : central_configurations(spec).minimal()) {
        const auto he = hessian_eigen_at_cc(spec, cc, R);
        const vec2 x = cc.point(R);
        mat2 H;
        for (int i = 0; i < 2; ++i) {
            vec2 d = vec2::Zero();
            d[i] = 1e-5;
            H.col(i) = (w0(x + d).gradient - w0(x - d).gradient) / 2e-5;
        }
        Eigen::SelfAdjointEigenSolver<mat2> es(0.5 * (H + H.transpose()));
        const double lo = std::min(he.lambda_xi, he.lambda_tau), hi = std::max(he.lambda_xi, he.lambda_tau);
        worst = std::max({worst, std::abs(es.eigenvalues()(0) - lo) / std::max(1.0, std::abs(lo)),
                          std::abs(es.eigenvalues()(1) - hi) / std::max(1.0, std::abs(hi))});
        arr.push_back({{"theta", r12(cc.theta)}, {"lambda_xi", r12(he.lambda_xi)}, {"lambda_tau", r12(he.lambda_tau)}});
    }
    outcome o;
    o.pass = worst < 1e-5;
    o.detail = "max eigenvalue deviation " + sci(worst);
    o.data = {{"configurations", arr}, {"deviation", r12(worst)}};
    return o;
}

outcome mcgehee(context& ctx) {
    const auto& spec = ctx.desk2;
    const auto cc = central_configurations(spec).minimal().front();
    const auto e = mcgehee_equilibrium(spec, cc);
    const mcgehee_vec z(0.0, cc.theta, cc.theta + std::numbers::pi);
    const auto& U = spec.leading_angular();
    Eigen::Matrix3d J;
    for (int i = 0; i < 3; ++i) {
        mcgehee_vec d = mcgehee_vec::Zero();
        d[i] = 1e-6;
        J.col(i) = (mcgehee_rhs(U, spec.alpha(), z + d) - mcgehee_rhs(U, spec.alpha(), z - d)) / 2e-6;
    }
    Eigen::EigenSolver<Eigen::Matrix3d> es(J);
    auto nearest = [&](double target) {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 3; ++i) best = std::min(best, std::abs(es.eigenvalues()(i).real() - target));
        return best;
    };
    const double dr = nearest(e.lambda_r), dm = nearest(e.lambda_minus);
    const mcgehee_vec start = z + 1e-6 * e.v_minus.normalized();
    const auto path = integrate_mcgehee(spec, {start(0), start(1), start(2), 0.0}, 3.0);
    const auto& last = path.back();
    const double rate = std::log((mcgehee_vec(last.r, last.theta, last.phi) - z).norm() / 1e-6) / last.s;
    outcome o;
    o.pass = std::abs(e.lambda_r + 2.8) < 1e-12 && dr < 1e-6 && dm < 1e-6 &&
             std::abs(rate - e.lambda_minus) <= 0.1 * std::abs(e.lambda_minus);
    char buf[200];
    std::snprintf(buf, sizeof buf, "lambda_r %.6f, lambda_minus %.6f, jacobian deviation %.1e/%.1e, decay rate %.4f", e.lambda_r,
                  e.lambda_minus, dr, dm, rate);
    o.detail = buf;
    o.data = {{"lambda_r", r12(e.lambda_r)}, {"lambda_minus", r12(e.lambda_minus)}, {"decay_rate", r12(rate)}};
    return o;
}

outcome outer_grid(context& ctx) {
    const auto t0 = clock_type::now();
    const auto& spec = ctx.desk2;
    const double R = spec.r_work();
    bool ok = true;
    int worst_it = 0;
    double worst_res = 0.0, worst_ratio = 0.0;
    json arr = json::array();
    for (const auto& cc : central_configurations(spec).minimal())
        for (double eps : {0.0, spec.eps_max() / 4}) {
            double tmin = std::numeric_limits<double>::infinity(), tmax = 0.0;
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j) {
                    const double a = -0.03 + 0.015 * i, b = -0.03 + 0.015 * j;
                    try {
                        const auto arc = shoot_outer(spec, eps, polar(R, cc.theta + a), polar(R, cc.theta + b), cc);
                        worst_it = std::max(worst_it, arc.newton_iters);
                        worst_res = std::max(worst_res, arc.residual);
                        ok = ok && arc.newton_iters <= 10 && arc.residual < 1e-9;
                        tmin = std::min(tmin, arc.T_ext);
                        tmax = std::max(tmax, arc.T_ext);
                    } catch (const error& e) {
                        ok = false;
                        std::cout << "  outer arc failed: " << e.what() << '\n';
                    }
                }
            worst_ratio = std::max(worst_ratio, tmax / tmin);
            arr.push_back({{"theta", r12(cc.theta)}, {"eps", r12(eps)}, {"T_min", r12(tmin)}, {"T_max", r12(tmax)}});
        }
    const double t = seconds_since(t0);
    outcome o;
    o.pass = ok && worst_ratio < 3.0 && t < 30.0;
    o.detail = "max Newton steps " + std::to_string(worst_it) + ", max residual " + sci(worst_res) + ", T spread " +
               std::to_string(worst_ratio).substr(0, 6);
    o.data = {{"grids", arr}, {"max_newton", worst_it}};
    return o;
}

outcome inner_arcs(context& ctx) {
    const auto& spec = ctx.desk2;
    scaled_field f(spec, ctx.eps_glue);
    const double R = spec.r_work();
    const auto ccs = central_configurations(spec).minimal();
    const vec2 p1 = polar(R, ccs[0].theta + 0.01), p2 = polar(R, ccs[1].theta - 0.02);
    const auto cl = nominal_closure(p1, p2, ccs[0].theta, ccs[1].theta);
    const auto [l, lt] = partition_windings(partition_from_index(2, 0));
    const inner_options io;
    const double delta = 1e-3 * R;
    outcome o;
    o.pass = true;
    json arr = json::array();
    for (const auto& target : {l, lt}) {
        const auto t0 = clock_type::now();
        std::string why;
        json rec = {{"target", target}};
        try {
            const winding_class cls{winding_class::kind::parity, target, 0, cl};
            const auto a = minimize_in_class(f, p1, p2, cls, io);
            const double t = seconds_since(t0);
            double umax = 0.0;
            for (std::size_t i = 1; i + 1 < a.path.size(); ++i) umax = std::max(umax, a.path.points[i].norm());
            const auto self = self_intersection_check(detail::positions_of(a.arc));
            const double lrel = std::abs(a.L_value - std::sqrt(2 * a.M_value)) / a.L_value;
            const auto act = action_relation_check(a);
            if (!(a.min_centre_dist > delta)) why += " centre distance";
            if (!(umax < R)) why += " interior";
            if (!(a.eom_residual < 1e-5)) why += " eom";
            if (a.winding != target) why += " winding";
            if (!self.empty()) why += " self-intersection";
            if (!(lrel < 1e-6)) why += " length";
            if (!act.passed()) why += " action";
            if (!(t < 60.0)) why += " runtime";
            rec.update({{"M", r12(a.M_value)},
                        {"L", r12(a.L_value)},
                        {"min_centre_dist", r12(a.min_centre_dist)},
                        {"eom_residual", r12(a.eom_residual)},
                        {"windings", a.windings},
                        {"length_rel", r12(lrel)},
                        {"action_argmin", act.argmin}});
            std::cout << "  component l_0=" << target[0] << ": L " << a.L_value << ", min dist " << sci(a.min_centre_dist)
                      << ", eom " << sci(a.eom_residual) << ", |L-sqrt(2M)|/L " << sci(lrel) << (why.empty() ? "" : ", failed:" + why)
                      << '\n';
        } catch (const error& e) {
            why = std::string(" ") + e.what();
            std::cout << "  component l_0=" << target[0] << ": " << e.what() << '\n';
        }
        rec["ok"] = why.empty();
        arr.push_back(rec);
        o.pass = o.pass && why.empty();
    }
    o.detail = "top to bottom, both components of the partition";
    o.data = {{"eps", r12(ctx.eps_glue)}, {"arcs", arr}};

    // Not counted: an arc returning to its own configuration.
    try {
        const winding_class cls{winding_class::kind::parity, l, 0, nominal_closure(p1, polar(R, ccs[0].theta - 0.02), ccs[0].theta, ccs[0].theta)};
        minimize_in_class(f, p1, polar(R, ccs[0].theta - 0.02), cls, io);
        std::cout << "  info: top to top arc is collision-free\n";
    } catch (const error& e) {
        std::cout << "  info: top to top arc: " << e.what() << '\n';
    }
    return o;
}

std::vector<std::vector<std::size_t>> all_words(std::size_t k, std::size_t n) {
    std::vector<std::vector<std::size_t>> out;
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= k;
    for (std::size_t c = 0; c < total; ++c) {
        std::vector<std::size_t> w(n);
        std::size_t x = c;
        for (std::size_t i = n; i-- > 0;) {
            w[i] = x % k;
            x /= k;
        }
        out.push_back(w);
    }
    return out;
}

// One representative per rotation class.
std::vector<std::vector<std::size_t>> necklaces(std::size_t k, std::size_t n) {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& w : all_words(k, n)) {
        bool seen = false;
        for (const auto& v : out) seen = seen || rotation_between(v, w).has_value();
        if (!seen) out.push_back(w);
    }
    return out;
}

outcome gluing(context& ctx) {
    const auto& spec = ctx.desk2;
    const auto A = make_alphabet(alphabet_mode::Q, spec);
    const glue_options gopt;
    outcome o;
    o.pass = true;
    json arr = json::array();
    for (std::size_t n = 1; n <= 3; ++n)
        for (const auto& w : necklaces(2, n)) {
            const auto t0 = clock_type::now();
            json rec = {{"word", w}};
            std::string why;
            try {
                const auto orb = minimize_junctions(spec, ctx.eps_glue, expand_word(A, w), gopt);
                const double t = seconds_since(t0);
                double amax = 0.0;
                for (double a : orb.angles) amax = std::max(amax, std::abs(a));
                if (!orb.converged) why += " not converged";
                if (orb.collisional) why += " collisional";
                if (!(amax < gopt.u_nbhd)) why += " boundary";
                if (!(orb.junction_mismatch < 1e-5)) why += " velocity mismatch";
                if (!(orb.acceleration_mismatch < 1e-4)) why += " acceleration mismatch";
                if (!(orb.return_error >= 0.0 && orb.return_error < 1e-4)) why += " return";
                if (!(t < 300.0)) why += " runtime";
                rec["orbit"] = orbit_summary(orb);
                std::cout << "  word " << word_text(w) << ": L " << orb.L_total << ", velocity mismatch " << sci(orb.junction_mismatch)
                          << ", acceleration mismatch " << sci(orb.acceleration_mismatch) << ", return " << sci(orb.return_error)
                          << ", " << std::lround(t) << " s" << (why.empty() ? "" : ", failed:" + why) << std::endl;
                if (w == std::vector<std::size_t>{0, 1}) {
                    ctx.orbit01 = orb;
                    write_trajectory_csv((ctx.out / "orbit_Q_01.csv").string(), orb.orbit, scaled_field(spec, ctx.eps_glue));
                }
            } catch (const error& e) {
                why = std::string(" ") + e.what();
                rec["error"] = e.what();
                std::cout << "  word " << word_text(w) << ": " << e.what() << '\n';
            }
            rec["ok"] = why.empty();
            arr.push_back(rec);
            o.pass = o.pass && why.empty();
        }
    int good = 0;
    for (const auto& r : arr) good += r["ok"].get<bool>();
    o.detail = std::to_string(good) + " of " + std::to_string(arr.size()) + " words (one per rotation class, n = 1, 2, 3)";
    o.data = {{"eps", r12(ctx.eps_glue)}, {"words", arr}};

    // Not counted: the same word at eps_max / 4.
    try {
        const auto orb = minimize_junctions(spec, spec.eps_max() / 4, expand_word(A, {0, 1}), gopt);
        std::cout << "  info: word 0,1 at eps_max/4 converged, L " << orb.L_total << '\n';
    } catch (const error& e) {
        std::cout << "  info: word 0,1 at eps_max/4: " << e.what() << '\n';
    }
    return o;
}

outcome rescaling(context& ctx) {
    outcome o;
    if (!ctx.orbit01) {
        o.detail = "no glued orbit for word 0,1";
        return o;
    }
    const auto& spec = ctx.desk2;
    const double a = spec.alpha(), h = std::pow(ctx.eps_glue, a);
    const auto big = rescale_orbit(*ctx.orbit01, spec, h);
    const double expected = std::pow(h, -(a + 2) / (2 * a));
    const double ratio = big.total_period / ctx.orbit01->total_period;
    const double rel = std::abs(ratio - expected) / expected;
    o.pass = big.max_energy_residual < 1e-6 && rel < 1e-8;
    o.detail = "h " + sci(h) + ", energy residual " + sci(big.max_energy_residual) + ", period ratio error " + sci(rel);
    o.data = {{"h", r12(h)}, {"period", r12(big.total_period)}, {"energy_residual", r12(big.max_energy_residual)}};
    write_trajectory_csv((ctx.out / "orbit_Q_01_rescaled.csv").string(), big.orbit, scaled_field(spec, 1.0));
    return o;
}

json realize_and_verify(context& ctx, const problem_spec& spec, alphabet_mode mode, const std::vector<std::size_t>& w,
                        const std::string& tag, bool& ok) {
    const auto t0 = clock_type::now();
    const auto A = make_alphabet(mode, spec);
    realize_options ro;
    json rec = {{"word", w}};
    std::string why;
    try {
        const auto orb = realize_word(A, w, spec, ctx.eps_glue, ro);
        rec["orbit"] = orbit_summary(orb);
        if (mode == alphabet_mode::S) {
            // Realisation plus per-arc collision flags.
            bool any = false;
            json flags = json::array();
            for (const auto& a : orb.inner) {
                flags.push_back(!a.collisions.empty());
                any = any || !a.collisions.empty();
            }
            rec["collision_flags"] = flags;
            if (any != orb.collisional) why += " inconsistent flags";
            std::cout << "  " << tag << ' ' << word_text(w) << ": realised, collision flags " << flags.dump()
                      << (orb.collisional ? "" : ", return " + sci(orb.return_error));
        } else {
            const auto rep = verify_semiconjugacy(orb, w, scaled_field(spec, ctx.eps_glue), A, ro.read, ro.glue.outer.integ);
            rec["report"] = rep.text();
            if (!rep.passed()) why += " semi-conjugacy";
            std::cout << "  " << tag << ' ' << word_text(w) << ": read back, rotations " << (rep.passed() ? "pass" : "fail")
                      << ", return " << sci(orb.return_error);
            double landing = 0.0;
            for (const auto& r : rep.rotations) landing = std::max(landing, r.max_landing);
            std::cout << ", step landing " << sci(landing);
            write_trajectory_csv((ctx.out / ("orbit_" + tag + "_" + word_text(w, "") + ".csv")).string(), orb.orbit,
                                 scaled_field(spec, ctx.eps_glue));
        }
        std::cout << ", " << std::lround(seconds_since(t0)) << " s" << (why.empty() ? "" : ", failed:" + why) << std::endl;
    } catch (const error& e) {
        why = std::string(" ") + e.what();
        rec["error"] = e.what();
        std::cout << "  " << tag << ' ' << word_text(w) << ": " << e.what() << std::endl;
    }
    rec["ok"] = why.empty();
    ok = why.empty();
    return rec;
}

outcome symbolic(context& ctx) {
    const auto t0 = clock_type::now();
    outcome o;
    json q = json::array(), b = json::array(), s = json::array();
    int nq = 0, nb = 0, ns = 0;
    for (const auto& w : all_words(2, 4)) {
        bool ok = false;
        q.push_back(realize_and_verify(ctx, ctx.desk2, alphabet_mode::Q, w, "Q", ok));
        nq += ok;
    }
    json control = nullptr;
    if (ctx.orbit01) {
        // Control: the 01 orbit must not verify as the word 00.
        const auto A = make_alphabet(alphabet_mode::Q, ctx.desk2);
        const realize_options ro;
        const auto rep = verify_semiconjugacy(*ctx.orbit01, {0, 0}, scaled_field(ctx.desk2, ctx.eps_glue), A, ro.read,
                                              ro.glue.outer.integ);
        std::cout << "  info: orbit 01 checked against 00: " << (rep.passed() ? "accepted (wrong)" : "rejected") << std::endl;
        control = !rep.passed();
    }
    for (const auto& w : {std::vector<std::size_t>{0, 1}, std::vector<std::size_t>{0, 0, 1}}) {
        bool ok = false;
        b.push_back(realize_and_verify(ctx, ctx.deskb, alphabet_mode::B, w, "B", ok));
        nb += ok;
    }
    for (std::size_t n = 1; n <= 3; ++n)
        for (const auto& w : all_words(2, n)) {
            bool ok = false;
            s.push_back(realize_and_verify(ctx, ctx.desk2, alphabet_mode::S, w, "S", ok));
            ns += ok;
        }
    const double t = seconds_since(t0);
    o.pass = nq == static_cast<int>(q.size()) && nb == static_cast<int>(b.size()) && ns == static_cast<int>(s.size()) && t < 1800.0;
    o.detail = "Q " + std::to_string(nq) + "/" + std::to_string(q.size()) + ", B " + std::to_string(nb) + "/" +
               std::to_string(b.size()) + ", S " + std::to_string(ns) + "/" + std::to_string(s.size());
    o.data = {{"eps", r12(ctx.eps_glue)}, {"Q", q}, {"B", b}, {"S", s}, {"control_rejected", control}};
    return o;
}

outcome compare_exports(const fs::path& a, const fs::path& b) {
    outcome o;
    auto listing = [](const fs::path& d) {
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(d))
            if (e.is_regular_file()) names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
        return names;
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    if (!fs::is_directory(a)) {
        o.detail = "reference directory " + a.string() + " missing";
        return o;
    }
    const auto na = listing(a), nb = listing(b);
    if (na != nb) {
        o.detail = "file sets differ";
        return o;
    }
    std::vector<std::string> diff;
    for (const auto& n : na)
        if (slurp(a / n) != slurp(b / n)) diff.push_back(n);
    o.pass = diff.empty() && !na.empty();
    o.detail = std::to_string(na.size()) + " files compared";
    for (const auto& d : diff) o.detail += ", differs: " + d;
    return o;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks on the desk problems"};
    std::string config_dir = NCENTRE_CONFIG_DIR, out = "acceptance_out", compare;
    bool strict = false;
    std::vector<int> only;
    app.add_option("--configs", config_dir, "directory with desk2.cfg, desk3.cfg, deskb.cfg");
    app.add_option("--out", out, "export directory");
    app.add_option("--compare", compare, "export directory of an earlier run");
    app.add_option("--only", only, "run only these criteria");
    app.add_flag("--strict", strict, "exit 1 when a criterion fails");
    CLI11_PARSE(app, argc, argv);

    context ctx{config_dir, out, load_problem(config_dir + "/desk2.cfg"), load_problem(config_dir + "/desk3.cfg"),
                load_problem(config_dir + "/deskb.cfg"), 0.0, std::nullopt};
    ctx.eps_glue = ctx.desk2.eps_max() / 8;
    fs::create_directories(ctx.out);
    for (const auto& e : fs::directory_iterator(ctx.out)) fs::remove(e.path());

    const std::vector<std::pair<int, outcome (*)(context&)>> criteria{
        {1, derivatives}, {2, perturbation}, {3, homothetic}, {4, hessian}, {5, mcgehee},
        {6, outer_grid},  {7, inner_arcs},   {8, gluing},     {9, rescaling}, {10, symbolic}};
    int failed = 0;
    for (const auto& [id, run] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        outcome o;
        const auto t0 = clock_type::now();
        try {
            o = run(ctx);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = e.what();
        }
        o.data["pass"] = o.pass;
        char name[32];
        std::snprintf(name, sizeof name, "criterion_%02d.json", id);
        write_json(ctx, name, o.data);
        failed += !o.pass;
        std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ", "
                  << std::lround(seconds_since(t0)) << " s)" << std::endl;
    }
    if (only.empty() || std::find(only.begin(), only.end(), 11) != only.end()) {
        if (compare.empty()) {
            std::cout << "criterion 11: SKIP (no reference run; pass --compare DIR)" << std::endl;
        } else {
            const auto o = compare_exports(compare, ctx.out);
            failed += !o.pass;
            std::cout << "criterion 11: " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ")" << std::endl;
        }
    }
    return strict && failed ? 1 : 0;
}
