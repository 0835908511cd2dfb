#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ncentre {

using vec2 = Eigen::Vector2d;
using mat2 = Eigen::Matrix2d;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Failure categories raised by the library. Each maps to a named failure mode
/// of one of the operations (collision guards, shooting divergence, ...).
enum class errc {
    precondition,
    config,
    collision_point,
    invalid_eps,
    degenerate_configuration,
    no_admissible_radius,
    collision_approach,
    step_size_underflow,
    outside_hill,
    no_return,
    escape,
    singular_bvp,
    hill_boundary,
    newton_diverged,
    outside_neighbourhood,
    ambiguous_winding,
    construction_failed,
    not_converged,
    constraint_broken,
    collision_detected,
    boundary_minimum,
    unclassifiable_crossing,
    ambiguous_inner_class,
    semiconjugacy_failure,
};

inline std::string_view to_string(errc c) {
    switch (c) {
    case errc::precondition: return "Precondition";
    case errc::config: return "ConfigError";
    case errc::collision_point: return "CollisionPoint";
    case errc::invalid_eps: return "InvalidEps";
    case errc::degenerate_configuration: return "DegenerateConfiguration";
    case errc::no_admissible_radius: return "NoAdmissibleRadius";
    case errc::collision_approach: return "CollisionApproach";
    case errc::step_size_underflow: return "StepSizeUnderflow";
    case errc::outside_hill: return "OutsideHill";
    case errc::no_return: return "NoReturn";
    case errc::escape: return "Escape";
    case errc::singular_bvp: return "SingularBVP";
    case errc::hill_boundary: return "HillBoundary";
    case errc::newton_diverged: return "NewtonDiverged";
    case errc::outside_neighbourhood: return "OutsideNeighbourhood";
    case errc::ambiguous_winding: return "AmbiguousWinding";
    case errc::construction_failed: return "ConstructionFailed";
    case errc::not_converged: return "NotConverged";
    case errc::constraint_broken: return "ConstraintBroken";
    case errc::collision_detected: return "CollisionDetected";
    case errc::boundary_minimum: return "BoundaryMinimum";
    case errc::unclassifiable_crossing: return "UnclassifiableCrossing";
    case errc::ambiguous_inner_class: return "AmbiguousInnerClass";
    case errc::semiconjugacy_failure: return "SemiconjugacyFailure";
    }
    return "Unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw error(errc::precondition, what);
}

inline double cross(const vec2& a, const vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Counter-clockwise unit tangent at p (p need not be unit).
inline vec2 ccw_tangent(const vec2& p) { return vec2(-p.y(), p.x()).normalized(); }

inline vec2 polar(double r, double theta) { return vec2(r * std::cos(theta), r * std::sin(theta)); }

/// Wraps an angle into (-pi, pi].
inline double wrap_pi(double a) {
    a = std::remainder(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    return a;
}

/// Wraps an angle into [0, 2pi).
inline double wrap_2pi(double a) {
    a = std::fmod(a, two_pi);
    if (a < 0.0) a += two_pi;
    if (a >= two_pi) a -= two_pi;
    return a;
}

} // namespace ncentre
