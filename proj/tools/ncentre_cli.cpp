// Command-line driver for the ncentre library.

#include "ncentre/config.hpp"
#include "ncentre/io.hpp"
#include "ncentre/mcgehee.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

using namespace ncentre;
namespace fs = std::filesystem;

namespace {

struct common_args {
    std::string config;
    std::optional<double> eps;
    std::optional<double> h;
    std::string word;
    std::size_t n_pts = 256;
    std::optional<double> tol;
    std::string out;
    int jobs = 1;
};

struct arc_args {
    std::size_t cc = 0;
    std::size_t cc_to = 1;
    double phi0 = 0.0;
    double phi1 = 0.0;
    std::string mode = "partition";
    std::size_t partition = 0;
    int component = 0;
    std::size_t centre = 0;
    std::string alphabet = "Q";
    std::string trajectory;
    double R = 0.0;
};

void add_common(CLI::App* sub, common_args& a, bool needs_eps) {
    sub->add_option("config", a.config, "problem file")->required()->check(CLI::ExistingFile);
    if (needs_eps) {
        auto* e = sub->add_option("--eps", a.eps, "scale parameter eps (h = eps^alpha)");
        auto* h = sub->add_option("--h", a.h, "energy level h > 0 of the original problem");
        e->excludes(h);
        h->excludes(e);
    }
    sub->add_option("--tol", a.tol, "tolerance of the main solver");
    sub->add_option("--out", a.out, "output directory for CSV/JSON exports");
}

double checked_eps(const problem_spec& spec, double eps) {
    check_eps(spec, eps);
    if (!(eps < spec.eps_max()))
        throw error(errc::invalid_eps, "eps=" + std::to_string(eps) + " is not below eps_max=" + std::to_string(spec.eps_max()));
    return eps;
}

/// eps from the flags; else from energy_h in the file; else eps_max/4.
double resolve_eps(const problem_spec& spec, const common_args& a) {
    if (a.eps) return checked_eps(spec, *a.eps);
    if (a.h) {
        if (!(*a.h > 0.0)) throw error(errc::invalid_eps, "h must be positive");
        return checked_eps(spec, std::pow(*a.h, 1.0 / spec.alpha()));
    }
    if (spec.energy_h() > 0.0) return checked_eps(spec, std::pow(spec.energy_h(), 1.0 / spec.alpha()));
    return spec.eps_max() / 4.0;
}

std::string out_path(const common_args& a, const std::string& name) {
    fs::create_directories(a.out);
    return (fs::path(a.out) / name).string();
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

std::string join(const std::vector<std::size_t>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
    return s;
}

const central_configuration& pick_cc(const std::vector<central_configuration>& ccs, std::size_t i) {
    if (i >= ccs.size())
        throw error(errc::precondition, "configuration index " + std::to_string(i) + " out of range (m=" +
                                            std::to_string(ccs.size()) + ")");
    return ccs[i];
}

int cmd_validate(const common_args& a) {
    const auto spec = load_problem(a.config);
    const auto rad = admissible_radii(spec);
    const auto ccs = central_configurations(spec).minimal();
    std::string xi;
    for (std::size_t i = 0; i < ccs.size(); ++i) xi += (i ? "," : "") + fmt(ccs[i].theta);
    std::cout << "N=" << spec.size() << " m=" << ccs.size() << " mfrak=" << fmt(spec.m_frak())
              << " eps_tilde=" << fmt(spec.eps_tilde()) << " R_work=" << fmt(rad.r_work) << " eps_max=" << fmt(rad.eps_max)
              << " alpha=" << fmt(spec.alpha()) << " Xi=[" << xi << "]\n";
    return 0;
}

int cmd_central_configs(const common_args& a) {
    const auto spec = load_problem(a.config);
    const auto set = central_configurations(spec);
    if (!a.out.empty()) {
        std::ofstream os(out_path(a, "central_configs.csv"));
        os << "theta,U,U2,kind\n";
        for (const auto& c : set.all)
            os << fmt17(c.theta) << ',' << fmt17(c.u_value) << ',' << fmt17(c.u_second) << ','
               << static_cast<int>(c.kind) << '\n';
    }
    std::size_t m = 0;
    for (const auto& c : set.all) {
        const char* kind = c.kind == cc_kind::minimal_nondegenerate ? "minimal" : c.kind == cc_kind::degenerate ? "degenerate" : "other";
        if (c.kind == cc_kind::minimal_nondegenerate) ++m;
        std::cout << "theta=" << fmt(c.theta) << " U=" << fmt(c.u_value) << " U''=" << fmt(c.u_second) << " " << kind << "\n";
    }
    std::cout << "critical=" << set.all.size() << " minimal=" << m << "\n";
    return 0;
}

int cmd_homothetic(const common_args& a, const arc_args& b) {
    const auto spec = load_problem(a.config);
    const auto ccs = central_configurations(spec).minimal();
    const auto& cc = pick_cc(ccs, b.cc);
    const double R = b.R > 0.0 ? b.R : spec.r_work();
    integrator_options io;
    if (a.tol) io.tol = *a.tol;
    const auto res = homothetic_orbit(spec, cc, R, io);
    const state& e = res.traj.back();
    const double perr = (e.x - res.start.x).norm(), verr = (e.v + res.start.v).norm();
    if (!a.out.empty()) write_trajectory_csv(out_path(a, "homothetic.csv"), res.traj, scaled_field(spec, 0.0));
    std::cout << "theta=" << fmt(cc.theta) << " R=" << fmt(R) << " T=" << fmt(res.T_xi) << " position_error=" << fmt(perr)
              << " velocity_error=" << fmt(verr) << "\n";
    return 0;
}

int cmd_outer(const common_args& a, const arc_args& b) {
    const auto spec = load_problem(a.config);
    const double eps = resolve_eps(spec, a);
    const auto ccs = central_configurations(spec).minimal();
    const auto& cc = pick_cc(ccs, b.cc);
    const double R = b.R > 0.0 ? b.R : spec.r_work();
    outer_options oo;
    if (a.tol) oo.tol = *a.tol;
    scaled_field field(spec, eps);
    const auto arc = shoot_outer(field, polar(R, cc.theta + b.phi0), polar(R, cc.theta + b.phi1), cc, oo);
    if (!a.out.empty()) write_trajectory_csv(out_path(a, "outer_arc.csv"), arc.arc, field);
    std::cout << "eps=" << fmt(eps) << " T_ext=" << fmt(arc.T_ext) << " length=" << fmt(arc.length) << " sigma=" << fmt(arc.sigma)
              << " newton_iters=" << arc.newton_iters << " residual=" << fmt(arc.residual) << "\n";
    return 0;
}

int cmd_inner(const common_args& a, const arc_args& b) {
    const auto spec = load_problem(a.config);
    const double eps = resolve_eps(spec, a);
    const auto ccs = central_configurations(spec).minimal();
    const auto& c1 = pick_cc(ccs, b.cc);
    const auto& c2 = pick_cc(ccs, b.cc_to);
    const double R = b.R > 0.0 ? b.R : spec.r_work();
    inner_options io;
    io.n_pts = a.n_pts;
    if (a.tol) io.gtol = *a.tol;
    scaled_field field(spec, eps);
    const vec2 p1 = polar(R, c1.theta + b.phi0), p2 = polar(R, c2.theta + b.phi1);
    inner_constraint ic;
    if (b.mode == "partition") ic = {inner_mode::partition, b.partition, b.component, 0};
    else if (b.mode == "free") ic.mode = inner_mode::free;
    else if (b.mode == "two-centre") ic = {inner_mode::two_centre, 0, 0, b.centre};
    else throw CLI::ValidationError("--mode", "expected partition, free or two-centre");
    if (ic.mode == inner_mode::partition) require(ic.partition_index < partition_count(spec.size()), "partition index out of range");
    if (ic.mode == inner_mode::two_centre) require(spec.size() == 2 && ic.centre < 2, "two-centre mode needs N = 2");
    const auto cls = detail::class_for(spec, ic, p1, p2, c1.theta, c2.theta);
    const inner_arc arc = ic.mode == inner_mode::free ? minimize_inner_free(field, p1, p2, cls.cl, io)
                                                      : minimize_in_class(field, p1, p2, cls, io);
    if (!a.out.empty()) write_trajectory_csv(out_path(a, "inner_arc.csv"), arc.arc, field);
    std::string w;
    for (std::size_t i = 0; i < arc.windings.size(); ++i) w += (i ? "," : "") + std::to_string(arc.windings[i]);
    std::cout << "eps=" << fmt(eps) << " M=" << fmt(arc.M_value) << " L=" << fmt(arc.L_value) << " T_int=" << fmt(arc.T_int)
              << " min_centre_dist=" << fmt(arc.min_centre_dist) << " windings=[" << w << "] polished=" << arc.polished
              << " collisions=" << arc.collisions.size() << "\n";
    return 0;
}

realize_options realize_opts(const common_args& a, const arc_args& b) {
    realize_options ro;
    ro.component = b.component;
    ro.glue.jobs = a.jobs;
    ro.glue.inner.n_pts = a.n_pts;
    if (a.tol) ro.glue.gtol = *a.tol;
    return ro;
}

void export_orbit(const common_args& a, const periodic_orbit& orb, const scaled_field& field, const std::string& stem) {
    if (a.out.empty()) return;
    write_trajectory_csv(out_path(a, stem + ".csv"), orb.orbit, field);
    std::ofstream(out_path(a, stem + ".json")) << orbit_summary(orb).dump(2) << '\n';
}

int cmd_periodic(const common_args& a, const arc_args& b) {
    const auto spec = load_problem(a.config);
    const double eps = resolve_eps(spec, a);
    const auto A = make_alphabet(parse_alphabet_mode(b.alphabet), spec);
    const auto word = parse_word(a.word);
    const auto orb = realize_word(A, word, spec, eps, realize_opts(a, b));
    scaled_field field(spec, eps);
    export_orbit(a, orb, field, "periodic");
    if (!a.out.empty()) {
        const double h = std::pow(eps, spec.alpha());
        const auto big = rescale_orbit(orb, spec, h);
        write_trajectory_csv(out_path(a, "periodic_rescaled.csv"), big.orbit, scaled_field(spec, 1.0));
    }
    std::cout << "word=" << join(word) << " eps=" << fmt(eps) << " L=" << fmt(orb.L_total) << " T=" << fmt(orb.total_period)
              << " grad=" << fmt(orb.grad_norm) << " junction_mismatch=" << fmt(orb.junction_mismatch)
              << " return_error=" << fmt(orb.return_error) << " collisional=" << orb.collisional << "\n";
    return 0;
}

trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error(errc::precondition, "cannot open " + path);
    trajectory tr;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f;
        std::vector<double> v;
        while (std::getline(ss, f, ',')) v.push_back(std::stod(f));
        if (v.size() < 5) throw error(errc::precondition, "bad trajectory row: " + line);
        tr.samples.push_back({vec2(v[1], v[2]), vec2(v[3], v[4]), v[0]});
    }
    return tr;
}

int cmd_read_symbols(const common_args& a, const arc_args& b) {
    const auto spec = load_problem(a.config);
    const double eps = resolve_eps(spec, a);
    const auto A = make_alphabet(parse_alphabet_mode(b.alphabet), spec);
    const auto tr = read_trajectory_csv(b.trajectory);
    const double R = b.R > 0.0 ? b.R : spec.r_work();
    const auto seq = read_symbols(tr, scaled_field(spec, eps), R, A);
    if (!a.out.empty()) write_word_file(out_path(a, "symbols.txt"), seq.word);
    std::cout << "alphabet=" << to_string(A.mode) << " symbols=" << join(seq.word) << "\n";
    return 0;
}

int cmd_verify_word(const common_args& a, const arc_args& b) {
    const auto spec = load_problem(a.config);
    const double eps = resolve_eps(spec, a);
    const auto A = make_alphabet(parse_alphabet_mode(b.alphabet), spec);
    const auto word = parse_word(a.word);
    const auto ro = realize_opts(a, b);
    const auto orb = realize_word(A, word, spec, eps, ro);
    scaled_field field(spec, eps);
    const auto rep = verify_semiconjugacy(orb, word, field, A, ro.read, ro.glue.outer.integ);
    export_orbit(a, orb, field, "verify");
    if (!a.out.empty()) std::ofstream(out_path(a, "verify_report.txt")) << rep.text();
    std::cout << "word=" << join(word) << " eps=" << fmt(eps) << " rotations=" << rep.rotations.size()
              << " result=" << (rep.passed() ? "pass" : "fail") << "\n";
    rep.throw_if_failed();
    return 0;
}

int cmd_mcgehee(const common_args& a, const arc_args& b) {
    const auto spec = load_problem(a.config);
    const auto ccs = central_configurations(spec).minimal();
    const auto& cc = pick_cc(ccs, b.cc);
    const auto e = mcgehee_equilibrium(spec, cc);
    std::cout << "theta=" << fmt(cc.theta) << " lambda_r=" << fmt(e.lambda_r) << " lambda_minus=" << fmt(e.lambda_minus)
              << " v_minus=[" << fmt(e.v_minus(0)) << "," << fmt(e.v_minus(1)) << "," << fmt(e.v_minus(2)) << "]\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Periodic orbits and symbolic dynamics of anisotropic N-centre problems"};
    app.set_help_flag("--help", "print this help message and exit");
    app.require_subcommand(1);
    common_args a;
    arc_args b;

    auto* validate = app.add_subcommand("validate-spec", "check a problem file and print its derived constants");
    add_common(validate, a, false);
    auto* ccs = app.add_subcommand("central-configs", "list the critical points of the leading angular potential");
    add_common(ccs, a, false);
    auto* homo = app.add_subcommand("homothetic", "homothetic ejection along a minimal configuration (eps = 0)");
    add_common(homo, a, false);
    auto* outer = app.add_subcommand("outer-arc", "shoot an outer arc between two points near a configuration");
    add_common(outer, a, true);
    auto* inner = app.add_subcommand("inner-arc", "minimise an inner arc in a topological class");
    add_common(inner, a, true);
    inner->add_option("--n-pts", a.n_pts, "discretisation points")->check(CLI::Range(64, 1 << 16));
    auto* periodic = app.add_subcommand("periodic", "glue a periodic orbit for a symbol word");
    add_common(periodic, a, true);
    auto* reads = app.add_subcommand("read-symbols", "read the symbol sequence of a trajectory CSV");
    add_common(reads, a, true);
    auto* verify = app.add_subcommand("verify-word", "realise a word and check the semi-conjugacy at every rotation");
    add_common(verify, a, true);
    auto* mcg = app.add_subcommand("mcgehee-eq", "eigen-data of the collision-manifold equilibrium");
    add_common(mcg, a, false);

    for (auto* s : {homo, outer, inner, mcg}) s->add_option("--config-index", b.cc, "index of the minimal configuration");
    for (auto* s : {homo, outer, inner, reads}) s->add_option("--R", b.R, "sphere radius (default R_work)");
    for (auto* s : {outer, inner}) {
        s->add_option("--phi0", b.phi0, "angular offset of the first endpoint");
        s->add_option("--phi1", b.phi1, "angular offset of the second endpoint");
    }
    inner->add_option("--to-index", b.cc_to, "configuration index of the second endpoint");
    inner->add_option("--mode", b.mode, "partition, free or two-centre");
    inner->add_option("--partition", b.partition, "partition index");
    inner->add_option("--component", b.component, "0: winding vector with l_0 = 1, 1: its complement")->check(CLI::Range(0, 1));
    inner->add_option("--centre", b.centre, "encircled centre (two-centre mode)");
    for (auto* s : {periodic, verify}) {
        s->add_option("--word", a.word, "comma-separated symbol indices")->required();
        s->add_option("--alphabet", b.alphabet, "Q, S or B")->check(CLI::IsMember({"Q", "S", "B"}));
        s->add_option("--component", b.component, "inner component of Q symbols")->check(CLI::Range(0, 1));
        s->add_option("--n-pts", a.n_pts, "discretisation points of the inner arcs")->check(CLI::Range(64, 1 << 16));
        s->add_option("--jobs", a.jobs, "parallel arc constructions")->check(CLI::PositiveNumber);
    }
    reads->add_option("--trajectory", b.trajectory, "CSV with columns t,x,y,vx,vy")->required()->check(CLI::ExistingFile);
    reads->add_option("--alphabet", b.alphabet, "Q, S or B")->check(CLI::IsMember({"Q", "S", "B"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        const auto subs = app.get_subcommands();
        std::cerr << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    try {
        if (*validate) return cmd_validate(a);
        if (*ccs) return cmd_central_configs(a);
        if (*homo) return cmd_homothetic(a, b);
        if (*outer) return cmd_outer(a, b);
        if (*inner) return cmd_inner(a, b);
        if (*periodic) return cmd_periodic(a, b);
        if (*reads) return cmd_read_symbols(a, b);
        if (*verify) return cmd_verify_word(a, b);
        if (*mcg) return cmd_mcgehee(a, b);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const error& e) {
        std::cout << "error " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cout << "error " << e.what() << "\n";
        return 1;
    }
    return 2;
}
