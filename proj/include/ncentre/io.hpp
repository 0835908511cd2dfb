#pragma once

#include "ncentre/symbolic.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>

namespace ncentre {

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// t,x,y,vx,vy,energy_residual with energy_residual = |v|^2/2 - V(x) - energy_level.
template <class Field>
void write_trajectory_csv(std::ostream& os, const trajectory& tr, const Field& field) {
    os << "t,x,y,vx,vy,energy_residual\n";
    for (const auto& s : tr.samples) {
        const double e = 0.5 * s.v.squaredNorm() - field.value(s.x) - tr.energy_level;
        os << fmt17(s.t) << ',' << fmt17(s.x.x()) << ',' << fmt17(s.x.y()) << ',' << fmt17(s.v.x()) << ','
           << fmt17(s.v.y()) << ',' << fmt17(e) << '\n';
    }
}

template <class Field>
void write_trajectory_csv(const std::string& path, const trajectory& tr, const Field& field) {
    std::ofstream out(path);
    if (!out) throw error(errc::precondition, "cannot write " + path);
    write_trajectory_csv(out, tr, field);
}

inline nlohmann::ordered_json to_json(const glue_symbol& s) {
    nlohmann::ordered_json j;
    j["config"] = s.config;
    switch (s.inner.mode) {
    case inner_mode::partition:
        j["inner"] = "partition";
        j["partition"] = s.inner.partition_index;
        j["component"] = s.inner.component;
        break;
    case inner_mode::free: j["inner"] = "free"; break;
    case inner_mode::two_centre:
        j["inner"] = "two_centre";
        j["centre"] = s.inner.centre;
        break;
    }
    return j;
}

/// Summary record of a periodic orbit; numbers are rounded to 12 significant digits so that
/// the record is stable under last-bit differences.
inline nlohmann::ordered_json orbit_summary(const periodic_orbit& o) {
    auto r = [](double x) {
        if (!std::isfinite(x)) return x;
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.12g", x);
        return std::strtod(buf, nullptr);
    };
    nlohmann::ordered_json j;
    j["eps"] = r(o.eps);
    j["R"] = r(o.R);
    auto seq = nlohmann::ordered_json::array();
    for (const auto& s : o.sequence) seq.push_back(to_json(s));
    j["sequence"] = seq;
    auto ang = nlohmann::ordered_json::array();
    for (double a : o.angles) ang.push_back(r(a));
    j["angles"] = ang;
    j["L_total"] = r(o.L_total);
    j["period"] = r(o.total_period);
    j["grad_norm"] = r(o.grad_norm);
    j["junction_mismatch"] = r(o.junction_mismatch);
    j["acceleration_mismatch"] = r(o.acceleration_mismatch);
    j["position_mismatch"] = r(o.position_mismatch);
    j["return_error"] = r(o.return_error);
    j["min_hill_margin"] = r(o.min_hill_margin);
    j["max_energy_residual"] = r(o.max_energy_residual);
    j["min_piece_duration"] = r(o.min_piece_duration);
    j["max_piece_duration"] = r(o.max_piece_duration);
    j["inner_minimality_gap"] = r(o.inner_minimality_gap);
    j["iterations"] = o.iterations;
    j["converged"] = o.converged;
    j["collisional"] = o.collisional;
    auto outer = nlohmann::ordered_json::array();
    for (const auto& a : o.outer)
        outer.push_back({{"T", r(a.T_ext)}, {"length", r(a.length)}, {"sigma", r(a.sigma)}, {"newton_iters", a.newton_iters},
                         {"residual", r(a.residual)}});
    j["outer_arcs"] = outer;
    auto inner = nlohmann::ordered_json::array();
    for (const auto& a : o.inner) {
        nlohmann::ordered_json x;
        x["T"] = r(a.T_int);
        x["M"] = r(a.M_value);
        x["L"] = r(a.L_value);
        x["discrete_M"] = r(a.discrete_M);
        x["min_centre_dist"] = r(a.min_centre_dist);
        x["windings"] = a.windings;
        x["polished"] = a.polished;
        auto coll = nlohmann::ordered_json::array();
        for (const auto& c : a.collisions)
            coll.push_back({{"t", r(c.t)}, {"centre", c.centre}, {"distance", r(c.distance)}, {"convex", c.convex}});
        x["collisions"] = coll;
        inner.push_back(x);
    }
    j["inner_arcs"] = inner;
    return j;
}

} // namespace ncentre
