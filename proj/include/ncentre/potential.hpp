#pragma once

#include "ncentre/core.hpp"

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace ncentre {

inline constexpr double cc_tol = 1e-8;
inline constexpr double coll_eps = 1e-10;

struct angular_value {
    double u;   ///< U(theta)
    double du;  ///< U'(theta)
    double ddu; ///< U''(theta)
};

/// Finite trigonometric polynomial U(theta) = a0 + sum_k (a_k cos k theta + b_k sin k theta).
struct angular_potential {
    std::vector<double> cosine_coeffs{1.0}; ///< a_0 .. a_K
    std::vector<double> sine_coeffs;        ///< b_1 .. b_K

    angular_value eval(double theta) const {
        angular_value out{cosine_coeffs.empty() ? 0.0 : cosine_coeffs[0], 0.0, 0.0};
        const std::size_t order = std::max(cosine_coeffs.size(), sine_coeffs.size() + 1);
        for (std::size_t k = 1; k < order; ++k) {
            const double a = k < cosine_coeffs.size() ? cosine_coeffs[k] : 0.0;
            const double b = k - 1 < sine_coeffs.size() ? sine_coeffs[k - 1] : 0.0;
            const double kd = static_cast<double>(k);
            const double c = std::cos(kd * theta);
            const double s = std::sin(kd * theta);
            out.u += a * c + b * s;
            out.du += kd * (-a * s + b * c);
            out.ddu += -kd * kd * (a * c + b * s);
        }
        return out;
    }

    double operator()(double theta) const { return eval(theta).u; }

    /// Global minimum: dense grid followed by Newton refinement on U'.
    std::pair<double, double> minimum(std::size_t grid = 720) const {
        double best_theta = 0.0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < grid; ++i) {
            const double th = two_pi * static_cast<double>(i) / static_cast<double>(grid);
            const double v = (*this)(th);
            if (v < best) {
                best = v;
                best_theta = th;
            }
        }
        double th = best_theta;
        for (int it = 0; it < 50; ++it) {
            const auto e = eval(th);
            if (e.ddu <= 0.0) break;
            const double step = e.du / e.ddu;
            if (std::abs(step) > two_pi / static_cast<double>(grid)) break;
            th -= step;
            if (std::abs(step) < 1e-15) break;
        }
        const double v = (*this)(th);
        if (v < best) return {wrap_2pi(th), v};
        return {best_theta, best};
    }

    angular_potential& operator+=(const angular_potential& o) {
        cosine_coeffs.resize(std::max(cosine_coeffs.size(), o.cosine_coeffs.size()), 0.0);
        sine_coeffs.resize(std::max(sine_coeffs.size(), o.sine_coeffs.size()), 0.0);
        for (std::size_t i = 0; i < o.cosine_coeffs.size(); ++i) cosine_coeffs[i] += o.cosine_coeffs[i];
        for (std::size_t i = 0; i < o.sine_coeffs.size(); ++i) sine_coeffs[i] += o.sine_coeffs[i];
        return *this;
    }
};

struct centre_spec {
    vec2 position{0.0, 0.0};
    double alpha = 1.0;
    angular_potential angular;
};

struct potential_eval {
    double value = 0.0;
    vec2 gradient = vec2::Zero();
    mat2 hessian = mat2::Zero();

    potential_eval& operator+=(const potential_eval& o) {
        value += o.value;
        gradient += o.gradient;
        hessian += o.hessian;
        return *this;
    }
};

/// Value, gradient and Hessian of weight * r^-a U(theta) in polar coordinates centred at the origin.
inline potential_eval homogeneous_term(const vec2& d, double a, const angular_potential& U, double weight) {
    const double r = d.norm();
    const double th = std::atan2(d.y(), d.x());
    const auto ang = U.eval(th);
    const double ra = weight * std::pow(r, -a);
    const double f = ra * ang.u;
    const double f_r = -a * ra / r * ang.u;
    const double f_t = ra * ang.du;
    const double f_rr = a * (a + 1.0) * ra / (r * r) * ang.u;
    const double f_rt = -a * ra / r * ang.du;
    const double f_tt = ra * ang.ddu;

    const vec2 er = d / r;
    const vec2 et(-er.y(), er.x());
    potential_eval out;
    out.value = f;
    out.gradient = f_r * er + (f_t / r) * et;
    const double h_rr = f_rr;
    const double h_rt = f_rt / r - f_t / (r * r);
    const double h_tt = f_tt / (r * r) + f_r / r;
    out.hessian = h_rr * er * er.transpose() + h_rt * (er * et.transpose() + et * er.transpose()) +
                  h_tt * et * et.transpose();
    return out;
}

class problem_spec {
public:
    problem_spec() = default;

    explicit problem_spec(std::vector<centre_spec> centres, double energy_h = 0.0)
        : centres_(std::move(centres)), energy_h_(energy_h) {
        if (centres_.empty()) throw error(errc::config, "at least one centre is required");
        for (const auto& c : centres_) {
            if (!(c.alpha > 0.0 && c.alpha < 2.0))
                throw error(errc::config, "centre exponent must lie in (0, 2)");
            if (c.position.norm() > 1.0 + 1e-12)
                throw error(errc::config, "centre positions must satisfy |c_j| <= 1");
            if (c.angular.cosine_coeffs.empty())
                throw error(errc::config, "angular potential needs at least a_0");
            if (c.angular.minimum().second <= 0.0)
                throw error(errc::config, "angular potential must be positive on the circle");
        }
        std::stable_sort(centres_.begin(), centres_.end(),
                         [](const centre_spec& a, const centre_spec& b) { return a.alpha < b.alpha; });
        alpha_ = centres_.front().alpha;
        k_lead_ = 0;
        while (k_lead_ < centres_.size() && centres_[k_lead_].alpha == alpha_) ++k_lead_;

        lead_ = angular_potential{{0.0}, {}};
        for (std::size_t i = 0; i < k_lead_; ++i) lead_ += centres_[i].angular;

        m_frak_ = std::numeric_limits<double>::infinity();
        for (const auto& c : centres_) m_frak_ = std::min(m_frak_, c.angular.minimum().second);
        h_tilde_ = m_frak_ / std::pow(2.0, alpha_);
        eps_tilde_ = std::pow(h_tilde_, 1.0 / alpha_);
        r_work_ = std::pow(m_frak_, 1.0 / alpha_) / 2.0;
        eps_max_ = r_work_ / 2.0;
        gamma_ = k_lead_ < centres_.size() ? std::min(1.0, centres_[k_lead_].alpha - alpha_) : 1.0;
    }

    const std::vector<centre_spec>& centres() const { return centres_; }
    std::size_t size() const { return centres_.size(); }
    double energy_h() const { return energy_h_; }
    double alpha() const { return alpha_; }
    std::size_t k_lead() const { return k_lead_; }
    double m_frak() const { return m_frak_; }
    double h_tilde() const { return h_tilde_; }
    double eps_tilde() const { return eps_tilde_; }
    double r_work() const { return r_work_; }
    double eps_max() const { return eps_max_; }
    double gamma() const { return gamma_; }
    /// U = sum of the angular parts of the leading (smallest exponent) centres.
    const angular_potential& leading_angular() const { return lead_; }

private:
    std::vector<centre_spec> centres_;
    double energy_h_ = 0.0;
    double alpha_ = 1.0;
    std::size_t k_lead_ = 0;
    angular_potential lead_;
    double m_frak_ = 1.0;
    double h_tilde_ = 0.5;
    double eps_tilde_ = 0.5;
    double r_work_ = 0.5;
    double eps_max_ = 0.25;
    double gamma_ = 1.0;
};

/// The potential V^eps(y) = sum_j eps^(alpha_j - alpha) V_j(y - eps c_j).
/// eps = 1 reproduces the unscaled potential V; eps = 0 gives W_0.
class scaled_field {
public:
    scaled_field(const problem_spec& spec, double eps) : spec_(&spec), eps_(eps) {
        weights_.reserve(spec.size());
        positions_.reserve(spec.size());
        for (const auto& c : spec.centres()) {
            weights_.push_back(c.alpha == spec.alpha() ? 1.0 : std::pow(eps, c.alpha - spec.alpha()));
            positions_.push_back(eps * c.position);
        }
    }

    const problem_spec& spec() const { return *spec_; }
    double eps() const { return eps_; }
    const std::vector<vec2>& centres() const { return positions_; }

    /// Index and distance of the nearest active centre.
    std::pair<std::size_t, double> nearest_centre(const vec2& y) const {
        std::size_t best = 0;
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < positions_.size(); ++j) {
            if (weights_[j] == 0.0) continue;
            const double d = (y - positions_[j]).norm();
            if (d < dist) {
                dist = d;
                best = j;
            }
        }
        return {best, dist};
    }

    potential_eval operator()(const vec2& y) const {
        potential_eval out;
        const auto& cs = spec_->centres();
        for (std::size_t j = 0; j < cs.size(); ++j) {
            if (weights_[j] == 0.0) continue;
            const vec2 d = y - positions_[j];
            if (d.norm() < coll_eps) throw error(errc::collision_point, "evaluation at a centre");
            out += homogeneous_term(d, cs[j].alpha, cs[j].angular, weights_[j]);
        }
        return out;
    }

    double value(const vec2& y) const {
        double v = 0.0;
        const auto& cs = spec_->centres();
        for (std::size_t j = 0; j < cs.size(); ++j) {
            if (weights_[j] == 0.0) continue;
            const vec2 d = y - positions_[j];
            const double r = d.norm();
            if (r < coll_eps) throw error(errc::collision_point, "evaluation at a centre");
            v += weights_[j] * std::pow(r, -cs[j].alpha) * cs[j].angular(std::atan2(d.y(), d.x()));
        }
        return v;
    }

    /// Value and gradient with every centre distance clamped from below at `clamp`.
    /// Inside the clamp radius the term is frozen at its clamp-radius value.
    potential_eval clamped(const vec2& y, double clamp, bool& flagged) const {
        potential_eval out;
        const auto& cs = spec_->centres();
        for (std::size_t j = 0; j < cs.size(); ++j) {
            if (weights_[j] == 0.0) continue;
            vec2 d = y - positions_[j];
            const double r = d.norm();
            if (r < clamp) {
                flagged = true;
                const vec2 dir = r > 0.0 ? vec2(d / r) : vec2(1.0, 0.0);
                auto t = homogeneous_term(clamp * dir, cs[j].alpha, cs[j].angular, weights_[j]);
                out.value += t.value;
                continue;
            }
            out += homogeneous_term(d, cs[j].alpha, cs[j].angular, weights_[j]);
        }
        return out;
    }

private:
    const problem_spec* spec_;
    double eps_;
    std::vector<double> weights_;
    std::vector<vec2> positions_;
};

/// Unscaled potential V(x).
inline potential_eval eval_total(const problem_spec& spec, const vec2& x) { return scaled_field(spec, 1.0)(x); }

inline void check_eps(const problem_spec& spec, double eps) {
    if (!(eps >= 0.0 && eps < spec.eps_tilde()))
        throw error(errc::invalid_eps, "eps must lie in [0, eps_tilde)");
}

/// Rescaled potential V^eps(y) for 0 <= eps < eps_tilde.
inline potential_eval eval_rescaled(const problem_spec& spec, double eps, const vec2& y) {
    check_eps(spec, eps);
    return scaled_field(spec, eps)(y);
}

inline potential_eval eval_w0(const problem_spec& spec, const vec2& y) { return scaled_field(spec, 0.0)(y); }

// ---------------------------------------------------------------------------
// Central configurations

enum class cc_kind { minimal_nondegenerate, degenerate, non_minimal };

struct central_configuration {
    double theta = 0.0;
    double u_value = 0.0;
    double u_second = 0.0;
    cc_kind kind = cc_kind::non_minimal;

    vec2 point(double R) const { return polar(R, theta); }
};

struct central_configuration_set {
    std::vector<central_configuration> all;
    /// Set when a degenerate critical point (or a constant U) was encountered.
    bool degenerate_reported = false;

    std::vector<central_configuration> minimal() const {
        std::vector<central_configuration> out;
        for (const auto& c : all)
            if (c.kind == cc_kind::minimal_nondegenerate) out.push_back(c);
        return out;
    }
};

namespace detail {

inline double refine_critical_point(const angular_potential& U, double lo, double hi) {
    double flo = U.eval(lo).du;
    double fhi = U.eval(hi).du;
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const auto e = U.eval(x);
        if (std::abs(e.du) < 1e-14) break;
        if ((e.du < 0.0) == (flo < 0.0)) {
            lo = x;
            flo = e.du;
        } else {
            hi = x;
        }
        double next = e.ddu != 0.0 ? x - e.du / e.ddu : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-16) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

} // namespace detail

inline central_configuration_set central_configurations(const angular_potential& U, std::size_t grid) {
    require(grid >= 360, "central_configurations needs grid >= 360");
    central_configuration_set out;

    std::vector<double> du(grid + 1);
    double max_du = 0.0;
    for (std::size_t i = 0; i <= grid; ++i) {
        du[i] = U.eval(two_pi * static_cast<double>(i) / static_cast<double>(grid)).du;
        max_du = std::max(max_du, std::abs(du[i]));
    }
    if (max_du < cc_tol) {
        // Constant U: every direction is critical and none is isolated.
        out.degenerate_reported = true;
        return out;
    }

    std::vector<double> roots;
    for (std::size_t i = 0; i < grid; ++i) {
        const double a = two_pi * static_cast<double>(i) / static_cast<double>(grid);
        const double b = two_pi * static_cast<double>(i + 1) / static_cast<double>(grid);
        if (du[i] == 0.0) {
            roots.push_back(a);
        } else if ((du[i] < 0.0) != (du[i + 1] < 0.0) && du[i + 1] != 0.0) {
            roots.push_back(detail::refine_critical_point(U, a, b));
        }
    }
    for (auto& r : roots) r = wrap_2pi(r);
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                roots.end());
    if (roots.size() > 1 && two_pi - roots.back() + roots.front() < 1e-9) roots.pop_back();

    double u_min = std::numeric_limits<double>::infinity();
    for (double r : roots) u_min = std::min(u_min, U(r));

    for (double r : roots) {
        const auto e = U.eval(r);
        central_configuration cc{r, e.u, e.ddu, cc_kind::non_minimal};
        if (std::abs(e.ddu) < cc_tol) {
            cc.kind = cc_kind::degenerate;
            out.degenerate_reported = true;
        } else if (e.ddu > cc_tol && e.u <= u_min + cc_tol) {
            cc.kind = cc_kind::minimal_nondegenerate;
        }
        out.all.push_back(cc);
    }
    return out;
}

inline central_configuration_set central_configurations(const problem_spec& spec, std::size_t grid = 720) {
    return central_configurations(spec.leading_angular(), grid);
}

struct hessian_eigen {
    double lambda_xi;
    double lambda_tau;
    vec2 s_xi;
    vec2 s_tau;
};

/// Closed-form eigen-structure of the Hessian of W_0 at R e^{i theta*}.
inline hessian_eigen hessian_eigen_at_cc(const problem_spec& spec, const central_configuration& cc, double R) {
    require(cc.kind == cc_kind::minimal_nondegenerate, "configuration must be minimal non-degenerate");
    require(R > 0.0, "radius must be positive");
    const double a = spec.alpha();
    const double scale = std::pow(R, -a - 2.0);
    hessian_eigen out;
    out.lambda_xi = a * (a + 1.0) * scale * cc.u_value;
    out.lambda_tau = scale * (-a * cc.u_value + cc.u_second);
    out.s_xi = vec2(std::cos(cc.theta), std::sin(cc.theta));
    out.s_tau = vec2(-out.s_xi.y(), out.s_xi.x());
    return out;
}

// ---------------------------------------------------------------------------
// Admissible radii

struct admissible_radii_result {
    double eps_max;
    double r_work;
    double min_potential_on_sphere; ///< min over the check grid, over both tested eps
};

/// Fixes R_work = m^{1/alpha}/2, eps_max = R_work/2 and verifies B_eps in B_R in {V^eps >= 1}
/// on a 720-point angular grid (several radii up to R_work, eps in {eps_max, eps_max/2}).
inline admissible_radii_result admissible_radii(const problem_spec& spec) {
    const double R = spec.r_work();
    const double eps_max = spec.eps_max();
    if (!(R > 0.0 && R < std::pow(spec.m_frak(), 1.0 / spec.alpha()) && eps_max < R))
        throw error(errc::no_admissible_radius, "degenerate working radius");
    constexpr std::size_t grid = 720;
    double vmin = std::numeric_limits<double>::infinity();
    for (double eps : {eps_max, eps_max / 2.0}) {
        scaled_field field(spec, eps);
        for (double frac : {0.25, 0.5, 0.75, 1.0}) {
            const double rad = frac * R;
            if (rad <= eps) continue;
            for (std::size_t i = 0; i < grid; ++i) {
                const vec2 y = polar(rad, two_pi * static_cast<double>(i) / static_cast<double>(grid));
                if (field.nearest_centre(y).second < coll_eps) continue;
                const double v = field.value(y);
                if (frac == 1.0) vmin = std::min(vmin, v);
                if (!(v >= 1.0))
                    throw error(errc::no_admissible_radius, "Hill region does not contain B_R on the grid");
            }
        }
    }
    return {eps_max, R, vmin};
}

} // namespace ncentre
