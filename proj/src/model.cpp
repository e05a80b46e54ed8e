#include "dampwave/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dampwave/error.hpp"
#include "dampwave/roots.hpp"

namespace dampwave {

namespace {

constexpr double inv_e = 0.36787944117144233; // e^{-1}

double signed_pow(double s, double m)
{
    // |s|^(m-1) s
    if (s == 0.0)
        return 0.0;
    const double a = std::pow(std::abs(s), m);
    return s < 0.0 ? -a : a;
}

double degenerate_core(double s)
{
    // s^3 exp(-1/s^2), odd, with the removable singularity at 0 filled in.
    if (s == 0.0)
        return 0.0;
    const double s2 = s * s;
    return s * s2 * std::exp(-1.0 / s2);
}

double degenerate_core_derivative(double s)
{
    if (s == 0.0)
        return 0.0;
    const double s2 = s * s;
    return std::exp(-1.0 / s2) * (3.0 * s2 + 2.0);
}

std::vector<double> log_samples(double lo, double hi, int n)
{
    std::vector<double> out(static_cast<std::size_t>(n));
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
    return out;
}

std::string fmt(double x)
{
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

// Adaptive Gauss-Kronrod over [a, b], split geometrically so long horizons stay accurate.
double integrate(const std::function<double(double)>& f, double a, double b)
{
    if (b <= a)
        return 0.0;
    double total = 0.0;
    double lo = a;
    double width = 1.0;
    while (lo < b) {
        const double hi = std::min(b, lo + width);
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            f, lo, hi, 15, 1e-12, &err);
        lo = hi;
        width *= 2.0;
    }
    return total;
}

} // namespace

// ---------------------------------------------------------------- OriginProfile

OriginProfile OriginProfile::linear(double scale)
{
    return {Kind::linear, scale, 1.0};
}

OriginProfile OriginProfile::power(double scale, double m)
{
    return {Kind::power, scale, m};
}

OriginProfile OriginProfile::degenerate(double scale)
{
    return {Kind::degenerate, scale, 3.0};
}

double OriginProfile::h(double s) const
{
    switch (kind_) {
    case Kind::linear:
        return scale_ * s;
    case Kind::power:
        return scale_ * signed_pow(s, m_);
    case Kind::degenerate:
        return scale_ * degenerate_core(s);
    }
    return 0.0;
}

double OriginProfile::h_derivative(double s) const
{
    switch (kind_) {
    case Kind::linear:
        return scale_;
    case Kind::power:
        return s == 0.0 ? (m_ == 1.0 ? scale_ : 0.0)
                        : scale_ * m_ * std::pow(std::abs(s), m_ - 1.0);
    case Kind::degenerate:
        return scale_ * degenerate_core_derivative(s);
    }
    return 0.0;
}

double OriginProfile::h_inverse(double y) const
{
    switch (kind_) {
    case Kind::linear:
        return y / scale_;
    case Kind::power:
        return signed_pow(y / scale_, 1.0 / m_);
    case Kind::degenerate:
        break;
    }
    const double a = std::abs(y);
    const double top = h(1.0);
    if (a > top * (1.0 + 1e-15))
        throw InvalidArgument("OriginProfile::h_inverse: argument outside [-h(1), h(1)]");
    if (a == 0.0)
        return 0.0;
    const double s = roots::bisect_increasing([this](double x) { return h(x); }, a, 0.0, 1.0,
                                              1e-12, 1e-15)
                         .root;
    return y < 0.0 ? -s : s;
}

double OriginProfile::H(double s) const
{
    return h(s) * s;
}

double OriginProfile::H_inverse(double y) const
{
    const double top = H(1.0);
    if (!(y >= 0.0) || y > top * (1.0 + 1e-15))
        throw InvalidArgument("H_inverse: argument " + fmt(y) + " outside [0, H(1)] = [0, " +
                              fmt(top) + "]");
    if (y == 0.0)
        return 0.0;
    switch (kind_) {
    case Kind::linear:
        return std::sqrt(y / scale_);
    case Kind::power:
        return std::pow(y / scale_, 1.0 / (m_ + 1.0));
    case Kind::degenerate:
        break;
    }
    return roots::bisect_increasing([this](double x) { return H(x); }, y, 0.0, 1.0, 1e-12,
                                    1e-15)
        .root;
}

std::string OriginProfile::check() const
{
    if (h(0.0) != 0.0)
        return "h(0) = " + fmt(h(0.0)) + " is not zero";
    auto samples = log_samples(1e-8, 1.0, 1000);
    double prev = 0.0;
    double prev_s = 0.0;
    for (double s : samples) {
        const double v = h(s);
        if (!std::isfinite(v))
            return "h(" + fmt(s) + ") is not finite";
        if (h(-s) != -v)
            return "h is not odd at s = " + fmt(s);
        // Underflow to zero near the origin is tolerated; once positive, h must grow.
        if (v < prev || (v > 0.0 && v == prev) || v < 0.0)
            return "h is not strictly increasing between s = " + fmt(prev_s) + " and s = " +
                   fmt(s);
        prev = v;
        prev_s = s;
    }
    if (!(h(1.0) > 0.0))
        return "h(1) is not positive";
    return {};
}

// ---------------------------------------------------------------- Feedback

Feedback Feedback::linear(double a)
{
    if (!(a > 0.0))
        throw InvalidArgument("Feedback::linear: coefficient must be positive");
    return {Kind::linear, a, 1.0, a, a, OriginProfile::linear(std::min(a, 1.0 / a))};
}

Feedback Feedback::power(double b, double m)
{
    if (!(b > 0.0))
        throw InvalidArgument("Feedback::power: coefficient must be positive");
    if (!(m > 0.0))
        throw InvalidArgument("Feedback::power: exponent must be positive");
    // Profile k|s|^(m-1)s with k = min(b, b^-m) satisfies (H6) for every m >= 1.
    const double k = std::min(b, std::pow(b, -m));
    const auto profile = m == 1.0 ? OriginProfile::linear(k) : OriginProfile::power(k, m);
    return {Kind::power, b, m, b, b, profile};
}

Feedback Feedback::origin_degenerate(double m)
{
    if (!(m > 0.0))
        throw InvalidArgument("Feedback::origin_degenerate: exponent must be positive");
    return {Kind::origin_degenerate, inv_e, m, inv_e, inv_e, OriginProfile::degenerate(1.0)};
}

Feedback Feedback::with_profile(OriginProfile profile) const
{
    Feedback f = *this;
    f.profile_ = profile;
    return f;
}

double Feedback::operator()(double s) const
{
    switch (kind_) {
    case Kind::linear:
        return coef_ * s;
    case Kind::power:
        return coef_ * signed_pow(s, m_);
    case Kind::origin_degenerate:
        return std::abs(s) <= 1.0 ? degenerate_core(s) : coef_ * signed_pow(s, m_);
    }
    return 0.0;
}

double Feedback::derivative(double s) const
{
    switch (kind_) {
    case Kind::linear:
        return coef_;
    case Kind::power:
        if (s == 0.0)
            return m_ == 1.0 ? coef_ : (m_ > 1.0 ? 0.0 : std::numeric_limits<double>::infinity());
        return coef_ * m_ * std::pow(std::abs(s), m_ - 1.0);
    case Kind::origin_degenerate:
        return std::abs(s) <= 1.0 ? degenerate_core_derivative(s)
                                  : coef_ * m_ * std::pow(std::abs(s), m_ - 1.0);
    }
    return 0.0;
}

double eval_feedback(const Feedback& feedback, double s)
{
    return feedback(s);
}

double eval_source(double p, double s)
{
    if (p == 1.0)
        return s;
    if (p == 3.0)
        return s * s * s;
    return signed_pow(s, p);
}

// ---------------------------------------------------------------- DampingSchedule

DampingSchedule DampingSchedule::constant(double gamma0, Flags flags)
{
    if (!(gamma0 >= 0.0))
        throw InvalidArgument("DampingSchedule::constant: gamma0 must be nonnegative");
    return {Kind::constant, {gamma0}, gamma0, flags};
}

DampingSchedule DampingSchedule::power(double scale, double q, Flags flags)
{
    if (!(scale >= 0.0) || !(q >= 0.0))
        throw InvalidArgument("DampingSchedule::power: need scale >= 0 and q >= 0");
    return {Kind::power, {scale, q}, q == 0.0 ? scale : 0.0, flags};
}

DampingSchedule DampingSchedule::oscillating(double scale, double amplitude, double frequency,
                                             Flags flags)
{
    if (!(scale >= 0.0) || !(frequency > 0.0))
        throw InvalidArgument("DampingSchedule::oscillating: need scale >= 0, frequency > 0");
    return {Kind::oscillating,
            {scale, amplitude, frequency},
            scale * (1.0 - std::abs(amplitude)),
            flags};
}

DampingSchedule DampingSchedule::custom(std::function<double(double)> gamma, double lower_bound,
                                        Flags flags)
{
    if (!gamma)
        throw InvalidArgument("DampingSchedule::custom: empty function");
    DampingSchedule s(Kind::custom, {}, lower_bound, flags);
    s.custom_ = std::move(gamma);
    return s;
}

double DampingSchedule::operator()(double t) const
{
    switch (kind_) {
    case Kind::constant:
        return params_[0];
    case Kind::power:
        return params_[0] * std::pow(1.0 + t, -params_[1]);
    case Kind::oscillating:
        return params_[0] * (1.0 + params_[1] * std::sin(params_[2] * t));
    case Kind::custom:
        return custom_(t);
    }
    return 0.0;
}

double DampingSchedule::derivative(double t) const
{
    switch (kind_) {
    case Kind::constant:
        return 0.0;
    case Kind::power:
        return -params_[0] * params_[1] * std::pow(1.0 + t, -params_[1] - 1.0);
    case Kind::oscillating:
        return params_[0] * params_[1] * params_[2] * std::cos(params_[2] * t);
    case Kind::custom:
        break;
    }
    const double h = 1e-6 * std::max(1.0, t);
    const double lo = std::max(0.0, t - h);
    return (custom_(t + h) - custom_(lo)) / (t + h - lo);
}

bool DampingSchedule::primitive_diverges() const
{
    switch (kind_) {
    case Kind::constant:
        return params_[0] > 0.0;
    case Kind::power:
        return params_[0] > 0.0 && params_[1] <= 1.0;
    case Kind::oscillating:
        return params_[0] > 0.0 && std::abs(params_[1]) <= 1.0;
    case Kind::custom:
        break;
    }
    // A convergent tail shrinks geometrically from decade to decade; a divergent one
    // keeps adding at least a fixed fraction of the first decade's increment.
    const double first = gamma_primitive(*this, 10.0) - gamma_primitive(*this, 1.0);
    const double last = gamma_primitive(*this, 1e8) - gamma_primitive(*this, 1e7);
    return first > 0.0 && last >= 0.5 * first;
}

double gamma_primitive(const DampingSchedule& schedule, double t)
{
    if (!(t >= 0.0))
        throw InvalidArgument("gamma_primitive: t must be nonnegative");
    const auto& p = schedule.params_;
    switch (schedule.kind_) {
    case DampingSchedule::Kind::constant:
        return p[0] * t;
    case DampingSchedule::Kind::power:
        if (p[1] == 1.0)
            return p[0] * std::log1p(t);
        return p[0] * (std::pow(1.0 + t, 1.0 - p[1]) - 1.0) / (1.0 - p[1]);
    case DampingSchedule::Kind::oscillating:
        return p[0] * (t + p[1] * (1.0 - std::cos(p[2] * t)) / p[2]);
    case DampingSchedule::Kind::custom:
        break;
    }
    return integrate(schedule.custom_, 0.0, t);
}

// ---------------------------------------------------------------- Problem

Problem::Problem(DiscreteOperator op_, Feedback feedback_, DampingSchedule schedule_, double p_,
                 GridFunction u0_, GridFunction u1_)
    : op(std::move(op_)), feedback(feedback_), schedule(std::move(schedule_)), p(p_),
      u0(std::move(u0_)), u1(std::move(u1_))
{
    if (!(u0.grid() == op.grid) || !(u1.grid() == op.grid))
        throw InvalidArgument("Problem: initial data not on the operator grid");
    if (!std::isfinite(p))
        throw InvalidArgument("Problem: source exponent must be finite");
}

// ---------------------------------------------------------------- validation

bool ValidationReport::ok() const
{
    return std::none_of(checks.begin(), checks.end(),
                        [](const AssumptionCheck& c) { return c.fatal && !c.passed; });
}

const AssumptionCheck* ValidationReport::find(const std::string& name) const
{
    auto it = std::find_if(checks.begin(), checks.end(),
                           [&](const AssumptionCheck& c) { return c.name == name; });
    return it == checks.end() ? nullptr : &*it;
}

std::vector<std::string> ValidationReport::failures() const
{
    std::vector<std::string> out;
    for (const auto& c : checks)
        if (!c.passed)
            out.push_back(c.name + ": " + c.detail);
    return out;
}

namespace {

AssumptionCheck check_p_range(double p)
{
    AssumptionCheck c{"p-range", true, true, {}};
    if (!(p >= 1.0 && p < 6.0)) {
        c.passed = false;
        c.detail = "source exponent p = " + fmt(p) + " outside [1, 6)";
    }
    return c;
}

AssumptionCheck check_h1(const DampingSchedule& gamma, const std::vector<double>& ts)
{
    AssumptionCheck c{"H1", true, true, {}};
    for (double t : ts) {
        const double v = gamma(t);
        if (!std::isfinite(v)) {
            c.passed = false;
            c.detail = "gamma(" + fmt(t) + ") is not finite";
            return c;
        }
        if (v < 0.0) {
            c.passed = false;
            c.detail = "gamma(" + fmt(t) + ") = " + fmt(v) + " < 0";
            return c;
        }
    }
    return c;
}

AssumptionCheck check_h2(const Feedback& g)
{
    AssumptionCheck c{"H2", true, true, {}};
    if (!(g.m() >= 1.0)) {
        c.passed = false;
        c.detail = "growth exponent m = " + fmt(g.m()) + " < 1";
        return c;
    }
    if (g(0.0) != 0.0) {
        c.passed = false;
        c.detail = "g(0) != 0";
        return c;
    }
    const auto big = log_samples(1.0 + 1e-9, 1e3, 1000);
    for (double s : big) {
        for (double x : {s, -s}) {
            const double gs = g(x) * x;
            const double w = std::pow(std::abs(x), g.m() + 1.0);
            if (gs < g.b1() * w * (1.0 - 1e-12) || gs > g.b2() * w * (1.0 + 1e-12)) {
                c.passed = false;
                c.detail = "growth bound violated at s = " + fmt(x);
                return c;
            }
        }
    }
    auto all = log_samples(1e-8, 1e3, 1000);
    double prev = 0.0;
    for (double s : all) {
        const double v = g(s);
        if (g(-s) != -v) {
            c.passed = false;
            c.detail = "g not odd at s = " + fmt(s);
            return c;
        }
        if (v < prev || v < 0.0) {
            c.passed = false;
            c.detail = "g not monotone increasing at s = " + fmt(s);
            return c;
        }
        prev = v;
    }
    return c;
}

AssumptionCheck check_h3(double p, double m)
{
    AssumptionCheck c{"H3", true, true, {}};
    const double v = p * (m + 1.0) / m;
    // The endpoint v = 6 is the critical embedding exponent, which still holds; accept it
    // and say so, since linear damping with a cubic source sits exactly there.
    if (std::abs(v - 6.0) <= 1e-12) {
        c.detail = "p(m+1)/m = 6: borderline, accepted at the critical exponent";
    } else if (!(v < 6.0)) {
        c.passed = false;
        c.detail = "p(m+1)/m = " + fmt(v) + " >= 6";
    }
    return c;
}

AssumptionCheck check_h4(const Problem& pr)
{
    AssumptionCheck c{"H4", true, true, {}};
    for (double v : pr.u0.values())
        if (!std::isfinite(v)) {
            c.passed = false;
            c.detail = "u0 has non-finite entries";
        }
    for (double v : pr.u1.values())
        if (!std::isfinite(v)) {
            c.passed = false;
            c.detail = "u1 has non-finite entries";
        }
    return c;
}

AssumptionCheck check_h5(const DampingSchedule& gamma, const std::vector<double>& ts)
{
    AssumptionCheck c{"H5", true, true, {}};
    for (std::size_t i = 1; i < ts.size(); ++i) {
        const double a = gamma(ts[i - 1]);
        const double b = gamma(ts[i]);
        if (b > a + 1e-14 * std::max(1.0, std::abs(a))) {
            c.passed = false;
            c.detail = "gamma increases between t = " + fmt(ts[i - 1]) + " and t = " + fmt(ts[i]);
            return c;
        }
    }
    if (!gamma.primitive_diverges()) {
        c.passed = false;
        c.detail = "integral of gamma over [0, inf) is finite (Gamma(1e8) = " +
                   fmt(gamma_primitive(gamma, 1e8)) + ")";
    }
    return c;
}

AssumptionCheck check_h5_prime(const DampingSchedule& gamma, const std::vector<double>& ts)
{
    AssumptionCheck c{"H5'", true, true, {}};
    const double g0 = gamma.gamma0();
    if (!(g0 > 0.0)) {
        c.passed = false;
        c.detail = "lower bound gamma0 = " + fmt(g0) + " is not positive";
        return c;
    }
    for (double t : ts) {
        if (gamma(t) < g0 * (1.0 - 1e-14)) {
            c.passed = false;
            c.detail = "gamma(" + fmt(t) + ") = " + fmt(gamma(t)) + " < gamma0 = " + fmt(g0);
            return c;
        }
    }
    return c;
}

AssumptionCheck check_h6(const Feedback& g, ValidationReport& report)
{
    AssumptionCheck c{"H6", true, true, {}};
    const OriginProfile& h = g.profile();
    if (auto err = h.check(); !err.empty()) {
        c.passed = false;
        c.detail = "origin profile: " + err;
        return c;
    }
    const double top = h.h(1.0);
    auto ss = log_samples(1e-8, 1.0, 1000);
    double b3 = std::numeric_limits<double>::infinity(), b4 = 0.0;
    double b6 = std::numeric_limits<double>::infinity(), b7 = 0.0;
    for (double s : ss) {
        const double gs = g(s) * s;
        const double lower = h.h(s) * s;
        // Closed-form profiles extend naturally past h(1). For the degenerate one the
        // inverse exceeds 1 there whatever the extension, so g(s) <= 1 is required.
        const bool natural = s <= top || h.kind() != OriginProfile::Kind::degenerate;
        const bool upper_ok = natural ? gs <= h.h_inverse(s) * s * (1.0 + 1e-12)
                                      : g(s) <= 1.0 + 1e-12;
        if (gs < lower * (1.0 - 1e-12) || !upper_ok) {
            c.passed = false;
            c.detail = "sandwich h(s)s <= g(s)s <= h^{-1}(s)s violated at s = " + fmt(s);
            return c;
        }
        b3 = std::min(b3, g(s) / s);
        b4 = std::max(b4, g(s) / s);
        if (h.kind() == OriginProfile::Kind::power) {
            b6 = std::min(b6, gs / std::pow(s, h.exponent() + 1.0));
            b7 = std::max(b7, gs / std::pow(s, (h.exponent() + 1.0) / h.exponent()));
        }
    }
    if (h.kind() == OriginProfile::Kind::linear) {
        report.constants["b3"] = b3;
        report.constants["b4"] = b4;
    } else if (h.kind() == OriginProfile::Kind::power) {
        report.constants["b5"] = h.scale();
        report.constants["b6"] = b6;
        report.constants["b7"] = b7;
    }
    return c;
}

} // namespace

ValidationReport validate(const Problem& pr)
{
    ValidationReport r;
    std::vector<double> ts{0.0};
    for (double t : log_samples(1e-3, 1e3, 1000))
        ts.push_back(t);

    const auto& g = pr.feedback;
    const auto& flags = pr.schedule.flags();
    r.constants["b1"] = g.b1();
    r.constants["b2"] = g.b2();

    r.checks.push_back(check_p_range(pr.p));
    r.checks.push_back(check_h1(pr.schedule, ts));
    if (flags.bounded) {
        // Bounded on the sampled horizon; a finite sup is all sampling can certify.
        double sup = 0.0;
        for (double t : ts)
            sup = std::max(sup, pr.schedule(t));
        if (!std::isfinite(sup)) {
            r.checks.back().passed = false;
            r.checks.back().detail = "gamma unbounded on samples";
        }
    }
    r.checks.push_back(check_h2(g));
    r.checks.push_back(check_h3(pr.p, g.m()));
    r.checks.push_back(check_h4(pr));
    if (flags.nonincreasing_divergent)
        r.checks.push_back(check_h5(pr.schedule, ts));
    if (flags.bounded_below)
        r.checks.push_back(check_h5_prime(pr.schedule, ts));
    r.checks.push_back(check_h6(g, r));

    const bool base = r.ok();
    const bool m_range = g.m() >= 1.0 && g.m() <= 5.0;
    r.global_existence_applicable = base && pr.p > 1.0 && pr.p <= 5.0;
    const bool h5 = flags.nonincreasing_divergent && r.find("H5") && r.find("H5")->passed;
    const bool h5p = flags.bounded_below && r.find("H5'") && r.find("H5'")->passed;
    const auto kind = g.profile().kind();
    r.exponential_applicable =
        r.global_existence_applicable && m_range && h5 && kind == OriginProfile::Kind::linear;
    r.polynomial_applicable = r.global_existence_applicable && m_range && h5 &&
                              kind == OriginProfile::Kind::power && g.m() > 1.0;
    r.general_applicable = r.global_existence_applicable && m_range && h5p;

    AssumptionCheck decay{"decay-exponents", true, false, {}};
    if (!(pr.p > 1.0 && pr.p <= 5.0 && m_range)) {
        decay.passed = false;
        decay.detail = "decay theorems need 1 < p <= 5 and 1 <= m <= 5 (p = " + fmt(pr.p) +
                       ", m = " + fmt(g.m()) + ")";
    }
    r.checks.push_back(decay);
    return r;
}

} // namespace dampwave
