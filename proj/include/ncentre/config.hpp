#pragma once

#include "ncentre/potential.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ncentre {

/// Problem configuration reader. The format is a small TOML subset:
///
///     energy_h = 0.02
///     [[centre]]
///     position = [0.5, 0.0]
///     alpha = 1.2
///     cosine_coeffs = [1.0, 0.0, 0.3]
///     sine_coeffs = [0.0, 0.0]
///
/// `#` starts a comment. Unknown keys are rejected.
namespace config_detail {

inline std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

inline double parse_number(const std::string& text, int line) {
    const std::string t = trim(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (t.empty() || used != t.size())
        throw error(errc::config, "line " + std::to_string(line) + ": expected a number, got '" + t + "'");
    return v;
}

inline std::vector<double> parse_array(const std::string& text, int line) {
    const std::string t = trim(text);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']')
        throw error(errc::config, "line " + std::to_string(line) + ": expected an array");
    std::vector<double> out;
    const std::string body = trim(t.substr(1, t.size() - 2));
    if (body.empty()) return out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(item, line));
    return out;
}

} // namespace config_detail

inline problem_spec parse_problem(const std::string& text) {
    using namespace config_detail;
    std::vector<centre_spec> centres;
    std::vector<int> seen_position, seen_alpha;
    double energy_h = 0.0;
    bool in_centre = false;

    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s == "[[centre]]" || s == "[[centres]]") {
            centres.push_back(centre_spec{});
            centres.back().angular.cosine_coeffs.clear();
            seen_position.push_back(0);
            seen_alpha.push_back(0);
            in_centre = true;
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw error(errc::config, "line " + std::to_string(line) + ": expected key = value");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = s.substr(eq + 1);
        if (!in_centre) {
            if (key == "energy_h") {
                energy_h = parse_number(value, line);
                continue;
            }
            throw error(errc::config, "line " + std::to_string(line) + ": unknown top-level key '" + key + "'");
        }
        auto& c = centres.back();
        if (key == "position") {
            const auto p = parse_array(value, line);
            if (p.size() != 2) throw error(errc::config, "line " + std::to_string(line) + ": position needs 2 entries");
            c.position = vec2(p[0], p[1]);
            seen_position.back() = 1;
        } else if (key == "alpha") {
            c.alpha = parse_number(value, line);
            seen_alpha.back() = 1;
        } else if (key == "cosine_coeffs") {
            c.angular.cosine_coeffs = parse_array(value, line);
        } else if (key == "sine_coeffs") {
            c.angular.sine_coeffs = parse_array(value, line);
        } else {
            throw error(errc::config, "line " + std::to_string(line) + ": unknown centre key '" + key + "'");
        }
    }
    if (centres.empty()) throw error(errc::config, "no centres defined");
    for (std::size_t i = 0; i < centres.size(); ++i) {
        if (!seen_position[i] || !seen_alpha[i])
            throw error(errc::config, "centre " + std::to_string(i + 1) + " needs position and alpha");
        if (centres[i].angular.cosine_coeffs.empty())
            throw error(errc::config, "centre " + std::to_string(i + 1) + " needs cosine_coeffs");
    }
    if (energy_h < 0.0) throw error(errc::config, "energy_h must be non-negative");
    return problem_spec(std::move(centres), energy_h);
}

inline problem_spec load_problem(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw error(errc::config, "cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_problem(ss.str());
}

} // namespace ncentre
