#pragma once

#include "ncentre/glue.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace ncentre {

enum class alphabet_mode { Q, S, B };

inline std::string_view to_string(alphabet_mode m) {
    switch (m) {
    case alphabet_mode::Q: return "Q";
    case alphabet_mode::S: return "S";
    case alphabet_mode::B: return "B";
    }
    return "?";
}

inline alphabet_mode parse_alphabet_mode(const std::string& s) {
    if (s == "Q" || s == "q") return alphabet_mode::Q;
    if (s == "S" || s == "s") return alphabet_mode::S;
    if (s == "B" || s == "b") return alphabet_mode::B;
    throw error(errc::precondition, "unknown alphabet mode '" + s + "'");
}

struct alphabet {
    alphabet_mode mode = alphabet_mode::Q;
    std::size_t m = 0; ///< minimal configurations
    std::size_t N = 0; ///< centres

    std::size_t size() const {
        switch (mode) {
        case alphabet_mode::Q: return m * partition_count(N);
        case alphabet_mode::S: return m;
        case alphabet_mode::B: return 2;
        }
        return 0;
    }
};

inline alphabet make_alphabet(alphabet_mode mode, std::size_t m, std::size_t N) {
    switch (mode) {
    case alphabet_mode::Q:
        require((N >= 3 && m >= 1) || (N >= 2 && m >= 2), "Q alphabet needs N >= 3, or N >= 2 with m >= 2");
        break;
    case alphabet_mode::S: require(m >= 2, "S alphabet needs m >= 2"); break;
    case alphabet_mode::B: require(N == 2 && m == 1, "B alphabet needs N = 2 and m = 1"); break;
    }
    return {mode, m, N};
}

inline alphabet make_alphabet(alphabet_mode mode, const problem_spec& spec) {
    return make_alphabet(mode, central_configurations(spec).minimal().size(), spec.size());
}

struct symbol_sequence {
    std::vector<std::size_t> word;
    bool periodic = true;

    std::size_t size() const { return word.size(); }
    bool operator==(const symbol_sequence&) const = default;
};

/// j = l m + r with 0 <= r < m.
inline std::pair<std::size_t, std::size_t> split_index(std::size_t j, std::size_t m) {
    require(m >= 1, "m must be positive");
    return {j / m, j % m};
}

inline std::size_t compose_index(std::size_t l, std::size_t r, std::size_t m) {
    require(r < m, "configuration index out of range");
    return l * m + r;
}

inline void check_word(const alphabet& A, const std::vector<std::size_t>& word) {
    require(!word.empty(), "empty word");
    for (std::size_t s : word)
        require(s < A.size(), "symbol " + std::to_string(s) + " outside alphabet of size " + std::to_string(A.size()));
}

struct shift_distance {
    double value = 0.0;
    double tail = 0.0; ///< bound on the terms outside the window
};

/// Partial sum of sum_m rho(s_m, t_m) / 2^|m| over windows indexed -M..M (a[i] is index i - M).
inline shift_distance shift_metric(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    require(a.size() == b.size() && a.size() % 2 == 1, "windows must be aligned with odd length 2M+1");
    const int M = static_cast<int>(a.size() / 2);
    shift_distance d;
    for (int m = -M; m <= M; ++m)
        if (a[static_cast<std::size_t>(m + M)] != b[static_cast<std::size_t>(m + M)]) d.value += std::ldexp(1.0, -std::abs(m));
    d.tail = std::ldexp(1.0, -M + 2);
    return d;
}

inline std::vector<std::size_t> rotate_word(const std::vector<std::size_t>& w, std::size_t k) {
    std::vector<std::size_t> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[(i + k) % w.size()];
    return out;
}

/// Smallest k with rotate(a, k) == b, if any.
inline std::optional<std::size_t> rotation_between(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    if (a.size() != b.size()) return std::nullopt;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (rotate_word(a, k) == b) return k;
    return std::nullopt;
}

/// Gluing data of one symbol. Q: (partition l, configuration r) with the inner component
/// `component`; S: configuration with an unconstrained inner arc; B: loop around one centre.
inline glue_symbol to_glue_symbol(const alphabet& A, std::size_t s, int component = 0) {
    require(s < A.size(), "symbol outside alphabet");
    glue_symbol g;
    switch (A.mode) {
    case alphabet_mode::Q: {
        const auto [l, r] = split_index(s, A.m);
        g.config = r;
        g.inner = {inner_mode::partition, l, component, 0};
        break;
    }
    case alphabet_mode::S:
        g.config = s;
        g.inner.mode = inner_mode::free;
        break;
    case alphabet_mode::B:
        g.config = 0;
        g.inner = {inner_mode::two_centre, 0, 0, s};
        break;
    }
    return g;
}

inline std::vector<glue_symbol> expand_word(const alphabet& A, const std::vector<std::size_t>& word, int component = 0) {
    check_word(A, word);
    std::vector<glue_symbol> out;
    for (std::size_t s : word) out.push_back(to_glue_symbol(A, s, component));
    return out;
}

// ---------------------------------------------------------------------------
// Reading symbols off trajectories

struct read_options {
    double u_nbhd = 0.05;
    double transversality = 1e-8;
    bool anchor_at_start = false; ///< the first sample is an outward crossing
};

struct sphere_crossing {
    double t = 0.0;
    vec2 x = vec2::Zero();
    vec2 v = vec2::Zero();
    bool outward = true;
    std::size_t sample = 0; ///< last sample before the crossing
};

namespace detail {

inline std::vector<sphere_crossing> sphere_crossings(const trajectory& tr, double R, bool anchor_at_start) {
    std::vector<sphere_crossing> out;
    const auto& s = tr.samples;
    if (anchor_at_start && !s.empty()) out.push_back({s[0].t, s[0].x, s[0].v, true, 0});
    for (std::size_t i = (anchor_at_start ? 1 : 0); i + 1 < s.size(); ++i) {
        const double f0 = s[i].x.norm() - R, f1 = s[i + 1].x.norm() - R;
        const bool outward = f0 <= 0.0 && f1 > 0.0;
        const bool inward = f0 >= 0.0 && f1 < 0.0;
        if (!outward && !inward) continue;
        const double w = f0 == f1 ? 0.0 : f0 / (f0 - f1);
        sphere_crossing c;
        c.t = s[i].t + w * (s[i + 1].t - s[i].t);
        c.x = s[i].x + w * (s[i + 1].x - s[i].x);
        c.v = s[i].v + w * (s[i + 1].v - s[i].v);
        c.outward = outward;
        c.sample = i;
        out.push_back(c);
    }
    return out;
}

inline std::size_t classify_crossing(const sphere_crossing& c, const std::vector<central_configuration>& ccs,
                                     const read_options& opts) {
    if (!(std::abs(c.x.dot(c.v)) > opts.transversality))
        throw error(errc::unclassifiable_crossing, "tangential crossing at t=" + std::to_string(c.t));
    const double th = polar_angle(c.x);
    std::size_t best = ccs.size();
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < ccs.size(); ++r) {
        const double d = std::abs(wrap_pi(th - ccs[r].theta));
        if (d < dist) {
            dist = d;
            best = r;
        }
    }
    if (best == ccs.size() || dist > opts.u_nbhd + 1e-9)
        throw error(errc::unclassifiable_crossing,
                    "crossing at t=" + std::to_string(c.t) + " angle " + std::to_string(th) + " outside every neighbourhood");
    return best;
}

} // namespace detail

/// Symbols of the trajectory: one per outward crossing that is followed by a complete inner
/// portion. The symbol combines the configuration of the crossing with the class of the inner
/// portion that follows the outer arc.
inline symbol_sequence read_symbols(const trajectory& tr, const scaled_field& field, double R, const alphabet& A,
                                    const read_options& opts = {}) {
    const auto ccs = central_configurations(field.spec()).minimal();
    require(ccs.size() == A.m, "alphabet does not match the configurations");
    const auto cr = detail::sphere_crossings(tr, R, opts.anchor_at_start);
    const auto& centres = field.centres();
    symbol_sequence out;
    std::size_t i = 0;
    while (i < cr.size() && !cr[i].outward) ++i;
    for (; i < cr.size(); ++i) {
        if (!cr[i].outward) continue;
        // outward(i) -> inward(i+1) -> outward(i+2)
        if (i + 2 >= cr.size()) break;
        if (cr[i + 1].outward || !cr[i + 2].outward)
            throw error(errc::unclassifiable_crossing, "crossings do not alternate near t=" + std::to_string(cr[i].t));
        const std::size_t r = detail::classify_crossing(cr[i], ccs, opts);
        const std::size_t r_in = detail::classify_crossing(cr[i + 1], ccs, opts);
        if (r_in != r)
            throw error(errc::unclassifiable_crossing, "outer arc leaves the neighbourhood of its configuration near t=" +
                                                           std::to_string(cr[i].t));
        if (A.mode == alphabet_mode::S) {
            out.word.push_back(r);
            continue;
        }
        const std::size_t r_next = detail::classify_crossing(cr[i + 2], ccs, opts);
        std::vector<vec2> path{cr[i + 1].x};
        for (std::size_t k = cr[i + 1].sample + 1; k <= cr[i + 2].sample; ++k) path.push_back(tr.samples[k].x);
        path.push_back(cr[i + 2].x);
        std::vector<int> w;
        const closure cl = A.mode == alphabet_mode::B
                               ? chord_closure()
                               : nominal_closure(path.front(), path.back(), ccs[r].theta, ccs[r_next].theta);
        try {
            w = winding_numbers(path, centres, cl);
        } catch (const error& e) {
            if (e.code() != errc::ambiguous_winding) throw;
            throw error(errc::unclassifiable_crossing, "inner portion after t=" + std::to_string(cr[i].t) + " meets a centre");
        }
        if (A.mode == alphabet_mode::B) {
            const int a = std::abs(w[0]), b = std::abs(w[1]);
            if (a == 1 && b == 0) out.word.push_back(0);
            else if (a == 0 && b == 1) out.word.push_back(1);
            else
                throw error(errc::ambiguous_inner_class, "inner portion after t=" + std::to_string(cr[i].t) + " has windings (" +
                                                             std::to_string(w[0]) + "," + std::to_string(w[1]) + ")");
            continue;
        }
        const winding_vector l = parities(w);
        if (!admissible(l))
            throw error(errc::unclassifiable_crossing,
                        "inner portion after t=" + std::to_string(cr[i].t) + " does not separate the centres");
        out.word.push_back(compose_index(partition_of(l).index, r, A.m));
    }
    return out;
}

/// Reads one period of a periodic orbit, anchored at the outward crossing of smallest time >= 0.
inline symbol_sequence read_symbols(const periodic_orbit& orb, const scaled_field& field, const alphabet& A,
                                    const read_options& opts = {}) {
    trajectory tr;
    const double T = orb.total_period;
    const auto& s = orb.orbit.samples;
    for (int copy = -1; copy <= 1; ++copy)
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (copy > -1 && i == 0) continue;
            state x = s[i];
            x.t += copy * T;
            tr.samples.push_back(x);
        }
    auto all = read_symbols(tr, field, orb.R, A, opts);
    // The first complete symbol in the tripled record belongs to the crossing near -T.
    const auto cr = detail::sphere_crossings(tr, orb.R, false);
    std::size_t first = 0;
    bool found = false;
    for (const auto& c : cr) {
        if (!c.outward) continue;
        if (c.t >= -1e-9 * std::max(1.0, T)) {
            found = true;
            break;
        }
        ++first;
    }
    require(found, "no outward crossing in the record");
    const std::size_t n = orb.size();
    require(all.word.size() >= first + n, "record too short to read one period");
    symbol_sequence out;
    out.word.assign(all.word.begin() + static_cast<std::ptrdiff_t>(first), all.word.begin() + static_cast<std::ptrdiff_t>(first + n));
    return out;
}

// ---------------------------------------------------------------------------
// Realization and verification

struct realize_options {
    glue_options glue{};
    int component = 0;
    read_options read{};
};

/// Glued periodic orbit for `word`; its symbols read back as the word.
inline periodic_orbit realize_word(const alphabet& A, const std::vector<std::size_t>& word, const problem_spec& spec, double eps,
                                   const realize_options& opts = {}) {
    auto seq = expand_word(A, word, opts.component);
    length_function f(spec, eps, seq, opts.glue);
    auto orb = minimize_junctions(f);
    if (!orb.collisional) orb.return_error = reintegrate_period(orb, f.field(), opts.glue.outer.integ);
    read_options ro = opts.read;
    ro.u_nbhd = opts.glue.u_nbhd;
    const auto got = read_symbols(orb, f.field(), A, ro);
    if (got.word != word) {
        std::ostringstream os;
        os << "realized orbit reads as";
        for (auto s : got.word) os << ' ' << s;
        throw error(errc::semiconjugacy_failure, os.str());
    }
    return orb;
}

struct rotation_check {
    std::size_t k = 0;
    bool passed = false;
    std::vector<std::size_t> expected;
    std::vector<std::size_t> read;
    std::optional<std::size_t> mismatch; ///< first offending index
    double max_landing = 0.0;            ///< worst first-return landing error in the window
    std::string error;
};

struct semiconjugacy_report {
    std::vector<std::size_t> word;
    std::vector<rotation_check> rotations;

    bool passed() const {
        if (rotations.empty()) return false;
        for (const auto& r : rotations)
            if (!r.passed) return false;
        return true;
    }

    std::optional<std::size_t> first_failure() const {
        for (const auto& r : rotations)
            if (!r.passed) return r.k;
        return std::nullopt;
    }

    void throw_if_failed() const {
        if (auto k = first_failure()) {
            const auto& r = rotations[*k];
            std::string what = "rotation " + std::to_string(*k);
            if (r.mismatch) what += " index " + std::to_string(*r.mismatch);
            if (!r.error.empty()) what += ": " + r.error;
            throw error(errc::semiconjugacy_failure, what);
        }
    }

    std::string text() const {
        std::ostringstream os;
        os << "word";
        for (auto s : word) os << ' ' << s;
        os << '\n';
        for (const auto& r : rotations) {
            os << "rotation " << r.k << ": " << (r.passed ? "pass" : "fail") << " read";
            for (auto s : r.read) os << ' ' << s;
            if (r.mismatch) os << " mismatch_at " << *r.mismatch;
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.3e", r.max_landing);
            os << " landing " << buf;
            if (!r.error.empty()) os << " error " << r.error;
            os << '\n';
        }
        os << "result: " << (passed() ? "pass" : "fail") << '\n';
        return os.str();
    }
};

/// One application of the first-return map from an outward crossing state of the orbit.
struct return_step {
    std::size_t k = 0;
    std::optional<std::size_t> symbol; ///< symbol read along the step
    double landing = std::numeric_limits<double>::infinity(); ///< |x - x_{k+1}| + |v - v_{k+1}| at the next outward crossing
    std::string error;
};

/// Finite-window commutation of the first-return map with the shift. From each outward
/// crossing state x_k of the orbit the flow is followed to the next outward crossing, which
/// must land on x_{k+1} within `landing_tol`, and the symbol of that step is read. Rotation
/// k passes when the symbols of steps k, ..., k+n-1 equal the k-fold shift of `word`.
/// Chaining single steps keeps the check meaningful on orbits whose period is too unstable
/// to re-integrate in one piece.
inline semiconjugacy_report verify_semiconjugacy(const periodic_orbit& orb, const std::vector<std::size_t>& word,
                                                 const scaled_field& field, const alphabet& A, const read_options& ropts = {},
                                                 const integrator_options& integ = {}, double landing_tol = 1e-6) {
    require(word.size() >= 2, "semi-conjugacy check needs a word of length >= 2");
    require(orb.size() == word.size(), "orbit and word lengths differ");
    const std::size_t n = word.size();
    std::vector<return_step> steps(n);
    for (std::size_t j = 0; j < n; ++j) {
        auto& st = steps[j];
        st.k = j;
        const std::size_t j1 = (j + 1) % n;
        const state s0{orb.outer[j].p0, orb.outer[j].v0, 0.0};
        try {
            const auto out = propagate_to_sphere(field, s0, orb.R, +1, integ);
            const auto back = propagate_to_sphere(field, out.end, orb.R, -1, integ);
            st.landing = (back.end.x - orb.outer[j1].p0).norm() + (back.end.v - orb.outer[j1].v0).norm();
            const double t_end = back.end.t + 0.5 * orb.outer[j1].T_ext;
            read_options ro = ropts;
            ro.anchor_at_start = true;
            const auto got = read_symbols(integrate(field, s0, t_end, integ), field, orb.R, A, ro);
            if (!got.word.empty()) st.symbol = got.word.front();
            else st.error = "no complete symbol in step " + std::to_string(j);
        } catch (const error& e) {
            st.error = e.what();
        }
    }
    semiconjugacy_report rep;
    rep.word = word;
    for (std::size_t k = 0; k < n; ++k) {
        rotation_check rc;
        rc.k = k;
        rc.expected = rotate_word(word, k);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& st = steps[(k + i) % n];
            rc.max_landing = std::max(rc.max_landing, st.landing);
            if (!st.error.empty() && rc.error.empty()) rc.error = st.error;
            if (st.symbol) rc.read.push_back(*st.symbol);
            const bool ok = st.error.empty() && st.symbol && *st.symbol == rc.expected[i] && st.landing <= landing_tol;
            if (!ok && !rc.mismatch) rc.mismatch = i;
        }
        rc.passed = !rc.mismatch;
        rep.rotations.push_back(std::move(rc));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Word files: one symbol index per line; blank lines and '#' comments are skipped.

inline std::vector<std::size_t> parse_word(const std::string& text) {
    std::vector<std::size_t> out;
    std::string tok;
    for (char ch : text + ",") {
        if (ch == ',' || ch == '\n' || ch == ' ' || ch == '\t' || ch == '\r') {
            if (!tok.empty()) {
                if (tok.find_first_not_of("0123456789") != std::string::npos)
                    throw error(errc::precondition, "bad symbol '" + tok + "'");
                out.push_back(static_cast<std::size_t>(std::stoull(tok)));
                tok.clear();
            }
        } else {
            tok += ch;
        }
    }
    return out;
}

inline std::vector<std::size_t> read_word_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error(errc::precondition, "cannot open word file " + path);
    std::string line, text;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        text += line + "\n";
    }
    return parse_word(text);
}

inline void write_word_file(const std::string& path, const std::vector<std::size_t>& word) {
    std::ofstream out(path);
    if (!out) throw error(errc::precondition, "cannot write word file " + path);
    for (std::size_t s : word) out << s << '\n';
}

} // namespace ncentre
