#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dampwave/field.hpp"

namespace dampwave {

/// Odd, strictly increasing function h on [-1,1] bounding the feedback near the origin:
/// |h(s) s| <= g(s) s <= |h^{-1}(s) s| for |s| <= 1.
class OriginProfile {
public:
    enum class Kind { linear, power, degenerate };

    /// h(s) = scale * s
    static OriginProfile linear(double scale);
    /// h(s) = scale * |s|^(m-1) s
    static OriginProfile power(double scale, double m);
    /// h(s) = scale * s^3 exp(-1/s^2), h(0) = 0
    static OriginProfile degenerate(double scale);

    Kind kind() const noexcept { return kind_; }
    double scale() const noexcept { return scale_; }
    double exponent() const noexcept { return m_; }

    double h(double s) const;
    double h_derivative(double s) const;
    /// Inverse of h on [-h(1), h(1)]: closed form for linear/power, bisection (1e-12)
    /// otherwise.
    double h_inverse(double y) const;
    /// H(s) = h(s) s on [0, 1].
    double H(double s) const;
    /// Inverse of H on [0, H(1)]; throws InvalidArgument outside that range.
    double H_inverse(double y) const;

    /// Samples monotonicity and h(0) = 0 on a log-spaced grid of [0,1]. Empty on success,
    /// otherwise a description of the first offending sample.
    std::string check() const;

    bool operator==(const OriginProfile&) const = default;

private:
    OriginProfile(Kind k, double scale, double m) : kind_(k), scale_(scale), m_(m) {}
    Kind kind_ = Kind::linear;
    double scale_ = 1.0;
    double m_ = 1.0;
};

/// Monotone damping nonlinearity g with growth exponent m at infinity.
class Feedback {
public:
    enum class Kind { linear, power, origin_degenerate };

    /// g(s) = a s; m = 1.
    static Feedback linear(double a);
    /// g(s) = b |s|^(m-1) s.
    static Feedback power(double b, double m);
    /// g(s) = s^3 exp(-1/s^2) on |s| <= 1, e^{-1} |s|^(m-1) s beyond (continuous at 1).
    static Feedback origin_degenerate(double m);

    /// Replaces the default origin profile (e.g. to test (H6) failures).
    Feedback with_profile(OriginProfile profile) const;

    Kind kind() const noexcept { return kind_; }
    double m() const noexcept { return m_; }
    /// Bounds of g(s)s / |s|^(m+1) for |s| > 1.
    double b1() const noexcept { return b1_; }
    double b2() const noexcept { return b2_; }
    double coefficient() const noexcept { return coef_; }
    const OriginProfile& profile() const noexcept { return profile_; }

    double operator()(double s) const;
    double derivative(double s) const;

    bool operator==(const Feedback&) const = default;

private:
    Feedback(Kind k, double coef, double m, double b1, double b2, OriginProfile profile)
        : kind_(k), coef_(coef), m_(m), b1_(b1), b2_(b2), profile_(profile) {}
    Kind kind_;
    double coef_;
    double m_;
    double b1_;
    double b2_;
    OriginProfile profile_;
};

struct ScheduleFlags {
    bool bounded = true;                  // (H1)
    bool nonincreasing_divergent = false; // (H5)
    bool bounded_below = false;           // (H5')
    bool operator==(const ScheduleFlags&) const = default;
};

/// Time-dependent damping coefficient gamma(t) >= 0 with its primitive Gamma(t).
class DampingSchedule {
public:
    enum class Kind { constant, power, oscillating, custom };
    using Flags = ScheduleFlags;

    /// gamma = gamma0.
    static DampingSchedule constant(double gamma0, Flags flags = {});
    /// gamma = scale * (1 + t)^(-q).
    static DampingSchedule power(double scale, double q, Flags flags = {});
    /// gamma = scale * (1 + amplitude * sin(frequency * t)).
    static DampingSchedule oscillating(double scale, double amplitude, double frequency,
                                       Flags flags = {});
    /// Arbitrary gamma; Gamma by adaptive quadrature. `lower_bound` is gamma_0 for (H5').
    static DampingSchedule custom(std::function<double(double)> gamma, double lower_bound,
                                  Flags flags = {});

    Kind kind() const noexcept { return kind_; }
    const Flags& flags() const noexcept { return flags_; }
    double gamma0() const noexcept { return lower_; }
    const std::vector<double>& params() const noexcept { return params_; }

    double operator()(double t) const;
    /// Derivative of gamma where available in closed form; finite differences otherwise.
    double derivative(double t) const;
    /// Whether Gamma(t) -> infinity. Closed-form kinds decide analytically; custom
    /// schedules use a decade-increment test up to t = 1e8.
    bool primitive_diverges() const;

private:
    DampingSchedule(Kind k, std::vector<double> params, double lower, Flags flags)
        : kind_(k), params_(std::move(params)), lower_(lower), flags_(flags) {}
    friend double gamma_primitive(const DampingSchedule&, double);
    Kind kind_;
    std::vector<double> params_;
    double lower_;
    Flags flags_;
    std::function<double(double)> custom_;
};

/// g(s) for the given feedback.
double eval_feedback(const Feedback& feedback, double s);
/// f(s) = |s|^(p-1) s.
double eval_source(double p, double s);
/// Gamma(t) = integral of gamma over [0, t]; closed form when known, else adaptive
/// Gauss-Kronrod with absolute tolerance 1e-10. Throws InvalidArgument for t < 0.
double gamma_primitive(const DampingSchedule& schedule, double t);

/// Problem data: operator, nonlinearities, schedule and initial state.
struct Problem {
    DiscreteOperator op;
    Feedback feedback;
    DampingSchedule schedule;
    double p;
    GridFunction u0;
    GridFunction u1;

    Problem(DiscreteOperator op, Feedback feedback, DampingSchedule schedule, double p,
            GridFunction u0, GridFunction u1);

    const Grid& grid() const noexcept { return op.grid; }
};

struct AssumptionCheck {
    std::string name;
    bool passed = true;
    /// Fatal checks make the problem unusable; others only gate a theorem.
    bool fatal = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    /// Constants read off the feedback: b1, b2 always; b3, b4 (linear profile);
    /// b5, b6, b7 (power profile with m > 1).
    std::map<std::string, double> constants;
    /// Hypotheses of the decay theorems: global existence (1 < p <= 5),
    /// exponential/polynomial envelope ((H5), (H6), 1 <= m <= 5), general envelope ((H5')).
    bool global_existence_applicable = false;
    bool exponential_applicable = false;
    bool polynomial_applicable = false;
    bool general_applicable = false;

    bool ok() const;
    const AssumptionCheck* find(const std::string& name) const;
    std::vector<std::string> failures() const;
};

/// Checks (H1)-(H6), (H5') and the exponent ranges by sampling (1e3 log-spaced points).
ValidationReport validate(const Problem& problem);

} // namespace dampwave
