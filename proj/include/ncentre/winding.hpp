#pragma once

#include "ncentre/core.hpp"

#include <algorithm>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace ncentre {

/// Polyline u(t_i) on [0, 1]. The parameter grid t_i is uniform, t_i = i/(n-1), unless
/// `times` is given (an adapted grid used by the minimiser).
struct discrete_path {
    std::vector<vec2> points;
    std::vector<double> times;
    bool fixed_start = true;
    bool fixed_end = true;

    std::size_t size() const { return points.size(); }
    const vec2& front() const { return points.front(); }
    const vec2& back() const { return points.back(); }
};

/// Mod-2 winding numbers about the centres.
using winding_vector = std::vector<int>;

inline bool admissible(const winding_vector& l) {
    for (std::size_t j = 1; j < l.size(); ++j)
        if (l[j] != l[0]) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Partitions of the centres into two non-empty groups

struct partition {
    std::size_t index = 0;
    std::vector<bool> side_of; ///< canonical: side_of[0] == false
};

inline std::size_t partition_count(std::size_t N) {
    require(N >= 2 && N < 63, "partition count needs 2 <= N < 63");
    return (std::size_t{1} << (N - 1)) - 1;
}

/// Centre j >= 1 lies on side true iff bit (j-1) of (index+1) is set.
inline partition partition_from_index(std::size_t N, std::size_t index) {
    require(index < partition_count(N), "partition index out of range");
    partition p;
    p.index = index;
    p.side_of.assign(N, false);
    const std::size_t code = index + 1;
    for (std::size_t j = 1; j < N; ++j) p.side_of[j] = ((code >> (j - 1)) & 1u) != 0;
    return p;
}

/// The partition separating {l_j = 0} from {l_j = 1}.
inline partition partition_of(const winding_vector& l) {
    require(admissible(l), "winding vector is not admissible");
    std::size_t code = 0;
    for (std::size_t j = 1; j < l.size(); ++j)
        if (l[j] != l[0]) code |= std::size_t{1} << (j - 1);
    return partition_from_index(l.size(), code - 1);
}

/// The two complementary winding vectors realising P; the first has l_0 = 1.
inline std::pair<winding_vector, winding_vector> partition_windings(const partition& P) {
    const std::size_t N = P.side_of.size();
    winding_vector l(N), lt(N);
    for (std::size_t j = 0; j < N; ++j) {
        l[j] = P.side_of[j] ? 0 : 1;
        lt[j] = 1 - l[j];
    }
    return {l, lt};
}

// ---------------------------------------------------------------------------
// Closing a path with endpoints on the sphere

/// How the path from p1 to p2 is closed: along the sphere from p2 back to p1 with a
/// signed angular sweep, or by the straight chord p2 -> p1.
struct closure {
    enum class kind { arc, chord };
    kind type = kind::arc;
    double sweep = 0.0;
};

inline double polar_angle(const vec2& p) { return std::atan2(p.y(), p.x()); }

/// Counter-clockwise arc from p2 to p1; no arc when the angles coincide.
inline closure ccw_closure(const vec2& p1, const vec2& p2) {
    double s = wrap_2pi(polar_angle(p1) - polar_angle(p2));
    if (s < 1e-12 || two_pi - s < 1e-12) s = 0.0;
    return {closure::kind::arc, s};
}

inline closure chord_closure() { return {closure::kind::chord, 0.0}; }

/// Arc closure whose sweep follows the assigned configuration angles: the counter-clockwise
/// sweep from the end configuration to the start configuration (zero when equal), corrected
/// by the endpoint offsets. The labels are therefore continuous in the endpoints.
inline closure nominal_closure(const vec2& p1, const vec2& p2, double theta_start, double theta_end) {
    double base = wrap_2pi(theta_start - theta_end);
    if (base < 1e-12 || two_pi - base < 1e-12) base = 0.0;
    return {closure::kind::arc,
            base + wrap_pi(polar_angle(p1) - theta_start) - wrap_pi(polar_angle(p2) - theta_end)};
}

namespace detail {

inline double point_segment_distance(const vec2& c, const vec2& a, const vec2& b) {
    const vec2 ab = b - a;
    const double L2 = ab.squaredNorm();
    double t = L2 > 0.0 ? (c - a).dot(ab) / L2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (a + t * ab - c).norm();
}

/// Vertices of the closing curve from p2 to p1 (both included).
inline std::vector<vec2> closing_vertices(const vec2& p1, const vec2& p2, const closure& cl) {
    std::vector<vec2> out;
    if (cl.type == closure::kind::chord || cl.sweep == 0.0) {
        out = {p2, p1};
        return out;
    }
    const double r2 = p2.norm(), r1 = p1.norm();
    const double a2 = polar_angle(p2);
    const int k = std::max(2, static_cast<int>(std::ceil(std::abs(cl.sweep) / (std::numbers::pi / 64.0))));
    out.reserve(k + 1);
    out.push_back(p2);
    for (int i = 1; i < k; ++i) {
        const double t = static_cast<double>(i) / k;
        out.push_back(polar(r2 + (r1 - r2) * t, a2 + cl.sweep * t));
    }
    out.push_back(p1);
    return out;
}

} // namespace detail

/// Integer winding numbers of the closed curve (path + closure) about each centre, by
/// exact summation of signed angles subtended by the straight segments.
inline std::vector<int> winding_numbers(const std::vector<vec2>& path, const std::vector<vec2>& centres,
                                        const closure& cl, double guard = 1e-10) {
    require(path.size() >= 2, "path needs at least two points");
    std::vector<vec2> closed = path;
    const auto tail = detail::closing_vertices(path.front(), path.back(), cl);
    closed.insert(closed.end(), tail.begin() + 1, tail.end());
    std::vector<int> out(centres.size(), 0);
    for (std::size_t j = 0; j < centres.size(); ++j) {
        const vec2& c = centres[j];
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < closed.size(); ++i) {
            const vec2 a = closed[i] - c, b = closed[i + 1] - c;
            if (detail::point_segment_distance(c, closed[i], closed[i + 1]) < guard)
                throw error(errc::ambiguous_winding, "segment passes through centre " + std::to_string(j + 1));
            total += std::atan2(cross(a, b), a.dot(b));
        }
        const double w = total / two_pi;
        const double rw = std::round(w);
        if (std::abs(w - rw) > 1e-6) throw error(errc::ambiguous_winding, "non-integer winding");
        out[j] = static_cast<int>(rw);
    }
    return out;
}

inline winding_vector parities(const std::vector<int>& w) {
    winding_vector l(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) l[j] = std::abs(w[j]) % 2;
    return l;
}

/// Parity winding vector of a path with endpoints on the sphere, closed counter-clockwise.
inline winding_vector winding_vector_of(const discrete_path& path, const std::vector<vec2>& centres) {
    return parities(winding_numbers(path.points, centres, ccw_closure(path.front(), path.back())));
}

/// Topological class of an inner arc.
struct winding_class {
    enum class kind { parity, two_centre, any };
    kind type = kind::any;
    winding_vector target;  ///< parity mode
    std::size_t centre = 0; ///< two-centre mode: the encircled centre
    closure cl;

    bool matches(const std::vector<int>& w) const {
        switch (type) {
        case kind::any: return true;
        case kind::parity: return parities(w) == target;
        case kind::two_centre:
            for (std::size_t j = 0; j < w.size(); ++j)
                if (std::abs(w[j]) != (j == centre ? 1 : 0)) return false;
            return true;
        }
        return false;
    }

    bool matches_path(const std::vector<vec2>& pts, const std::vector<vec2>& centres) const {
        if (type == kind::any) return true;
        try {
            return matches(winding_numbers(pts, centres, cl));
        } catch (const error&) {
            return false;
        }
    }

    /// Centres that an initial path must encircle once.
    std::vector<std::size_t> loops() const {
        std::vector<std::size_t> out;
        if (type == kind::two_centre) out.push_back(centre);
        if (type == kind::parity)
            for (std::size_t j = 0; j < target.size(); ++j)
                if (target[j]) out.push_back(j);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Path utilities

inline std::vector<vec2> resample_by_length(const std::vector<vec2>& poly, std::size_t n) {
    require(poly.size() >= 2 && n >= 2, "resampling needs at least two points");
    std::vector<double> s(poly.size(), 0.0);
    for (std::size_t i = 1; i < poly.size(); ++i) s[i] = s[i - 1] + (poly[i] - poly[i - 1]).norm();
    std::vector<vec2> out(n);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double target = s.back() * static_cast<double>(k) / static_cast<double>(n - 1);
        while (seg + 2 < poly.size() && s[seg + 1] < target) ++seg;
        const double len = s[seg + 1] - s[seg];
        const double t = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
        out[k] = poly[seg] + t * (poly[seg + 1] - poly[seg]);
    }
    out.front() = poly.front();
    out.back() = poly.back();
    return out;
}

/// Linear interpolation of a uniformly parametrised path at n new uniform parameters.
inline std::vector<vec2> resample_by_parameter(const std::vector<vec2>& pts, std::size_t n) {
    std::vector<vec2> out(n);
    const double m = static_cast<double>(pts.size() - 1);
    for (std::size_t k = 0; k < n; ++k) {
        const double x = m * static_cast<double>(k) / static_cast<double>(n - 1);
        const std::size_t i = std::min(static_cast<std::size_t>(x), pts.size() - 2);
        const double t = x - static_cast<double>(i);
        out[k] = (1.0 - t) * pts[i] + t * pts[i + 1];
    }
    out.front() = pts.front();
    out.back() = pts.back();
    return out;
}

/// A polyline from p1 to p2 inside the ball of radius R realising `cls`.
///
/// The base route drops radially to an inner circle, follows it against the closing
/// direction and rises to p2, so that route plus closure encloses no centre. Each centre
/// that must be encircled gets a lasso: a spoke from the inner circle, one turn around
/// the centre, and the same spoke back.
inline discrete_path initial_path(const vec2& p1, const vec2& p2, const winding_class& cls,
                                  const std::vector<vec2>& centres, double R, std::size_t n_pts,
                                  double delta_coll = -1.0) {
    require(n_pts >= 8, "n_pts too small");
    if (cls.type == winding_class::kind::parity && !admissible(cls.target)) {
        // Coincident centres can only be separated from nothing: all parities equal is
        // admissible then only as "all enclosed" (used for eps = 0).
        bool coincident = true;
        for (const auto& c : centres) coincident = coincident && (c - centres.front()).norm() < 1e-14;
        if (!coincident || cls.target.empty() || cls.target.front() != 1)
            throw error(errc::precondition, "winding vector is not admissible");
    }
    if (delta_coll <= 0.0) delta_coll = 1e-3 * R;
    double cmax = 0.0;
    for (const auto& c : centres) cmax = std::max(cmax, c.norm());
    const double rho = cmax + 0.5 * (R - cmax);
    const double a1 = polar_angle(p1), a2 = polar_angle(p2);
    const double base_sweep = cls.cl.type == closure::kind::chord ? wrap_pi(a2 - a1) : -cls.cl.sweep;

    auto loops = cls.loops();
    // Coincident centres share one lasso.
    std::vector<std::size_t> unique_loops;
    for (std::size_t j : loops) {
        bool dup = false;
        for (std::size_t k : unique_loops) dup = dup || (centres[j] - centres[k]).norm() < 1e-14;
        if (!dup) unique_loops.push_back(j);
    }

    auto build = [&](bool mirrored) {
        struct lasso {
            double param;
            std::size_t j;
        };
        std::vector<lasso> ls;
        for (std::size_t j : unique_loops) {
            const vec2& c = centres[j];
            // Pick the attachment parameter on the inner arc whose spoke keeps farthest
            // from the other centres, preferring the centre's own direction.
            std::vector<double> cand = {0.5, 0.25, 0.75, 0.1, 0.9, 0.0, 1.0};
            if (c.norm() > 1e-12 && base_sweep != 0.0) {
                const double t = wrap_pi(polar_angle(c) - a1) / base_sweep;
                if (t >= 0.0 && t <= 1.0) cand.insert(cand.begin(), t);
            }
            double best_t = cand.front(), best_d = -1.0;
            for (double t : cand) {
                const vec2 A = polar(rho, a1 + base_sweep * t);
                double dmin = std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < centres.size(); ++k)
                    if ((centres[k] - c).norm() > 1e-14)
                        dmin = std::min(dmin, detail::point_segment_distance(centres[k], A, c));
                if (dmin > best_d + 1e-12) {
                    best_d = dmin;
                    best_t = t;
                }
            }
            ls.push_back({best_t, j});
        }
        std::sort(ls.begin(), ls.end(), [](const lasso& a, const lasso& b) { return a.param < b.param; });

        std::vector<vec2> poly{p1};
        const int arc_steps = std::max(4, static_cast<int>(std::ceil(std::abs(base_sweep) / (std::numbers::pi / 32.0))));
        auto arc_point = [&](double t) { return polar(rho, a1 + base_sweep * t); };
        double t_prev = 0.0;
        auto walk_arc = [&](double t_to) {
            for (int i = 1; i <= arc_steps; ++i) {
                const double t = static_cast<double>(i) / arc_steps;
                if (t > t_prev + 1e-12 && t < t_to - 1e-12) poly.push_back(arc_point(t));
            }
            poly.push_back(arc_point(t_to));
            t_prev = t_to;
        };
        poly.push_back(arc_point(0.0));
        for (const auto& l : ls) {
            walk_arc(l.param);
            const vec2 A = poly.back();
            const vec2& c = centres[l.j];
            double clearance = rho - c.norm();
            for (std::size_t k = 0; k < centres.size(); ++k)
                if ((centres[k] - c).norm() > 1e-14) clearance = std::min(clearance, (centres[k] - c).norm());
            const double rl = std::max(2.0 * delta_coll, 0.3 * clearance);
            const vec2 dir = (A - c).normalized();
            const double start = polar_angle(dir);
            double orient = (cls.cl.type == closure::kind::arc && cls.cl.sweep < 0.0) ? -1.0 : 1.0;
            if (mirrored) orient = -orient;
            constexpr int loop_steps = 64;
            for (int i = 0; i <= loop_steps; ++i)
                poly.push_back(c + polar(rl, start + orient * two_pi * static_cast<double>(i) / loop_steps));
            poly.push_back(A);
        }
        walk_arc(1.0);
        poly.push_back(p2);
        // Drop repeated vertices.
        std::vector<vec2> clean{poly.front()};
        for (std::size_t i = 1; i < poly.size(); ++i)
            if ((poly[i] - clean.back()).norm() > 1e-15) clean.push_back(poly[i]);
        if (clean.size() < 2) clean.push_back(p2);
        discrete_path out;
        out.points = resample_by_length(clean, n_pts);
        return out;
    };

    for (bool mirrored : {false, true}) {
        auto path = build(mirrored);
        if (cls.matches_path(path.points, centres)) return path;
    }
    throw error(errc::construction_failed, "initial path does not realise the requested class");
}

// ---------------------------------------------------------------------------
// Self-intersections

struct crossing {
    std::size_t segment_a;
    std::size_t segment_b;
    vec2 point;
};

/// Pairwise scan of non-adjacent segments, each treated as half-open [a, b) so that a
/// touch at a shared vertex is counted once.
inline std::vector<crossing> self_intersection_check(const std::vector<vec2>& pts) {
    std::vector<crossing> out;
    const std::size_t m = pts.size() < 2 ? 0 : pts.size() - 1;
    const bool closed = m >= 2 && (pts.front() - pts.back()).norm() == 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const vec2 a = pts[i], b = pts[i + 1];
        const vec2 r = b - a;
        for (std::size_t k = i + 2; k < m; ++k) {
            if (closed && i == 0 && k == m - 1) continue;
            const vec2 c = pts[k], d = pts[k + 1];
            const vec2 s = d - c;
            const double den = cross(r, s);
            if (den == 0.0) continue;
            const double t = cross(c - a, s) / den;
            const double u = cross(c - a, r) / den;
            if (t >= 0.0 && t < 1.0 && u >= 0.0 && u < 1.0) out.push_back({i, k, a + t * r});
        }
    }
    return out;
}

inline std::vector<crossing> self_intersection_check(const discrete_path& path) {
    return self_intersection_check(path.points);
}

} // namespace ncentre
