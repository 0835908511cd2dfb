#pragma once

#include "ncentre/config.hpp"

#include <string>

namespace ncentre::testing {

inline std::string config_path(const std::string& name) { return std::string(NCENTRE_CONFIG_DIR) + "/" + name; }

/// N = 2, centres (-0.5, 0) and (0.5, 0), alpha = 1.2, U = 1 + 0.3 cos 2 theta.
inline problem_spec desk2() { return load_problem(config_path("desk2.cfg")); }

/// Two centres on the y-axis with U = 1 + 0.3 cos theta (single minimal configuration).
inline problem_spec deskb() { return load_problem(config_path("deskb.cfg")); }

/// One centre at the origin with V = r^-alpha U.
inline problem_spec single(double alpha, angular_potential U = {{1.0}, {}}) {
    return problem_spec({{vec2(0.0, 0.0), alpha, U}}, 0.02);
}

} // namespace ncentre::testing
