#include "dampwave/decay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dampwave/csv.hpp"
#include "dampwave/error.hpp"
#include "dampwave/roots.hpp"

namespace dampwave {

namespace {

std::string fmt(double x)
{
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

// psi~ evaluated through a growing set of geometric knots, so repeated evaluations only
// integrate from the nearest knot.
class PsiTilde {
public:
    explicit PsiTilde(const OriginProfile& h) : h_(h) {}

    // The profile has passed its monotonicity check, so h(1/s) = 0 for s > 1 can only
    // be underflow; psi~ is then beyond the double range and reported as +inf.
    double derivative(double s) const
    {
        const double d = h_.h(1.0 / s);
        if (d == 0.0 && s > 1.0)
            return std::numeric_limits<double>::infinity();
        if (!(d > 0.0) || !std::isfinite(d))
            throw InvalidArgument("weights: h(1/s) = " + fmt(d) + " at s = " + fmt(s) +
                                  " (profile must be strictly increasing and nonvanishing)");
        return 1.0 / d;
    }

    double operator()(double t)
    {
        if (!(t >= 1.0))
            throw InvalidArgument("weights: psi~ is defined for t >= 1");
        while (knots_.back() < t)
            extend();
        auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        const auto k = static_cast<std::size_t>(std::distance(knots_.begin(), it)) - 1;
        if (std::isinf(values_[k]))
            return values_[k];
        return values_[k] + segment(knots_[k], t);
    }

private:
    double segment(double a, double b) const
    {
        if (b <= a)
            return 0.0;
        double err = 0.0;
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            [this](double s) { return derivative(s); }, a, b, 15, 1e-11, &err);
    }

    void extend()
    {
        const double a = knots_.back();
        if (std::isinf(values_.back())) {
            knots_.push_back(a * 1.25);
            values_.push_back(values_.back());
            return;
        }
        const double b = a * 1.25;
        const double v = values_.back() + segment(a, b);
        knots_.push_back(b);
        values_.push_back(v);
    }

    const OriginProfile& h_;
    std::vector<double> knots_{1.0};
    std::vector<double> values_{1.0};
};

double invert(PsiTilde& psi, double y)
{
    if (!(y >= 1.0))
        throw InvalidArgument("weights: phi is defined for y >= 1");
    if (y == 1.0)
        return 1.0;
    double hi = 2.0;
    while (psi(hi) < y)
        hi *= 2.0;
    const double lo = 0.5 * hi;
    auto fdf = [&](double s) { return std::pair{psi(s) - y, psi.derivative(s)}; };
    return roots::safeguarded_newton(fdf, lo, hi, 0.5 * (lo + hi), 1e-15, 200).root;
}

} // namespace

namespace {

void require_valid(const OriginProfile& profile)
{
    if (auto err = profile.check(); !err.empty())
        throw InvalidArgument("weights: invalid origin profile: " + err);
}

} // namespace

double weight_psi(const OriginProfile& profile, double t)
{
    require_valid(profile);
    PsiTilde psi(profile);
    return psi(t);
}

double weight_phi(const OriginProfile& profile, double y)
{
    require_valid(profile);
    PsiTilde psi(profile);
    return invert(psi, y);
}

WeightTable build_weights(const OriginProfile& profile, double t_max, int points)
{
    if (!(t_max > 1.0))
        throw InvalidArgument("build_weights: T_max must exceed 1");
    if (points < 2)
        throw InvalidArgument("build_weights: need at least two points");
    require_valid(profile);

    WeightTable w;
    w.profile = profile;
    const double lt = std::log(t_max);
    for (int i = 0; i < points; ++i)
        w.t.push_back(i == points - 1 ? t_max : std::exp(lt * i / (points - 1)));
    if (t_max <= 1e4)
        for (double k = 1.0; k <= t_max; k += 1.0)
            w.t.push_back(k);
    std::sort(w.t.begin(), w.t.end());
    w.t.erase(std::unique(w.t.begin(), w.t.end()), w.t.end());

    PsiTilde psi(profile);
    const auto n = w.t.size();
    w.psi_tilde.resize(n);
    w.phi.resize(n);
    w.phi_prime.resize(n);
    w.chi.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        w.psi_tilde[i] = psi(w.t[i]);
        w.phi[i] = invert(psi, w.t[i]);
        w.phi_prime[i] = profile.h(1.0 / w.phi[i]);
        w.chi[i] = 1.0 / w.phi[i];
    }

    double integral = 0.0;
    auto integrand = [&](std::size_t i) {
        const double d = w.phi_prime[i];
        const double inv = profile.h_inverse(d);
        return d * inv * inv;
    };
    for (std::size_t i = 0; i + 1 < n; ++i)
        integral += 0.5 * (w.t[i + 1] - w.t[i]) * (integrand(i) + integrand(i + 1));
    w.tail_integral_truncated = integral;
    w.tail_remainder = 1.0 / w.phi.back();
    w.tail_integral = integral + w.tail_remainder;
    return w;
}

void write_weights_csv(const WeightTable& table, std::ostream& out)
{
    out << "t,psi_tilde,phi,phi_prime,chi\n";
    for (std::size_t i = 0; i < table.t.size(); ++i)
        out << format_double(table.t[i]) << ',' << format_double(table.psi_tilde[i]) << ','
            << format_double(table.phi[i]) << ',' << format_double(table.phi_prime[i]) << ','
            << format_double(table.chi[i]) << '\n';
}

double H_value(const OriginProfile& profile, double s)
{
    if (!(s >= 0.0 && s <= 1.0))
        throw InvalidArgument("H_value: s must lie in [0, 1]");
    return profile.H(s);
}

double H_inverse(const OriginProfile& profile, double y)
{
    return profile.H_inverse(y);
}

double chain_start(const OriginProfile& profile)
{
    double s0 = 1.0;
    if (profile.h(1.0) > 1.0)
        s0 = 1.0 / profile.h_inverse(1.0);
    return 1.0 / profile.H(1.0 / s0);
}

double envelope_domain_start(const DecayEnvelope& envelope)
{
    if (envelope.kind != DecayEnvelope::Kind::general)
        return 0.0;
    if (!envelope.profile)
        throw InvalidArgument("envelope: general kind needs an origin profile");
    return std::max(1.0, 1.0 / envelope.profile->H(1.0));
}

double envelope_value(const DecayEnvelope& env, double t)
{
    using Kind = DecayEnvelope::Kind;
    if (env.kind != Kind::general) {
        if (!env.schedule)
            throw InvalidArgument("envelope: needs a damping schedule");
        if (!(t >= 0.0))
            throw InvalidArgument("envelope: t must be nonnegative");
    }
    switch (env.kind) {
    case Kind::exponential:
        return env.E0 * std::exp(1.0 - env.C * gamma_primitive(*env.schedule, t));
    case Kind::polynomial:
        if (!(env.m > 1.0))
            throw InvalidArgument("envelope: polynomial kind needs m > 1");
        return env.C * env.E0 *
               std::pow(1.0 / (1.0 + gamma_primitive(*env.schedule, t)), 2.0 / (env.m - 1.0));
    case Kind::general: {
        const double start = envelope_domain_start(env);
        if (!(t >= start))
            throw InvalidArgument("envelope: general kind is defined for t >= " + fmt(start));
        const double s = env.profile->H_inverse(1.0 / t);
        return env.C * env.E0 * s * s;
    }
    }
    return 0.0;
}

const char* to_string(DecayEnvelope::Kind kind)
{
    switch (kind) {
    case DecayEnvelope::Kind::exponential:
        return "exponential";
    case DecayEnvelope::Kind::polynomial:
        return "polynomial";
    case DecayEnvelope::Kind::general:
        return "general";
    }
    return "?";
}

namespace {

std::pair<double, double> default_window(const EnergyRecord& rec, const DampingSchedule& sched)
{
    const double t_end = rec.times.back();
    const double target = 0.2 * gamma_primitive(sched, t_end);
    const double t_lo =
        roots::bisect_increasing([&](double t) { return gamma_primitive(sched, t); }, target,
                                 rec.times.front(), t_end, 1e-12, 1e-12)
            .root;
    return {t_lo, t_end};
}

std::vector<std::size_t> window_indices(const EnergyRecord& rec, std::pair<double, double> w)
{
    if (!(w.second > w.first))
        throw InvalidArgument("fit window is degenerate");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < rec.size(); ++i)
        if (rec.times[i] >= w.first && rec.times[i] <= w.second)
            idx.push_back(i);
    return idx;
}

} // namespace

FitResult fit_rate(const EnergyRecord& rec, DecayEnvelope::Kind kind,
                   const DampingSchedule& schedule, const std::optional<OriginProfile>& profile,
                   std::optional<std::pair<double, double>> window)
{
    using Kind = DecayEnvelope::Kind;
    if (rec.size() < 2)
        throw InvalidArgument("fit_rate: record too short");
    if (kind == Kind::general && !profile)
        throw InvalidArgument("fit_rate: general kind needs an origin profile");
    auto w = window ? *window : default_window(rec, schedule);
    if (kind == Kind::general)
        w.first = std::max(w.first, std::max(1.0, 1.0 / profile->H(1.0)));
    const auto idx = window_indices(rec, w);
    if (idx.size() < 20)
        throw InvalidArgument("fit_rate: fewer than 20 samples in window [" + fmt(w.first) +
                              ", " + fmt(w.second) + "]");

    auto clock = [&](double t) {
        switch (kind) {
        case Kind::exponential:
            return gamma_primitive(schedule, t);
        case Kind::polynomial:
            return std::log1p(gamma_primitive(schedule, t));
        case Kind::general: {
            const double s = profile->H_inverse(1.0 / t);
            return std::log(s * s);
        }
        }
        return 0.0;
    };

    std::vector<double> x, y;
    for (std::size_t i : idx) {
        const double e = rec.total[i];
        if (!(e > 0.0))
            throw InvalidArgument("fit_rate: energy not positive at t = " + fmt(rec.times[i]));
        x.push_back(clock(rec.times[i]));
        y.push_back(std::log(e));
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0))
        throw InvalidArgument("fit_rate: clock is constant on the window");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (intercept + slope * x[i]);
        ss_res += r * r;
    }
    FitResult out;
    out.kind = kind;
    out.fit_window = w;
    out.samples = idx.size();
    out.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    out.fitted_rate = kind == Kind::general ? slope : -slope;

    // Shape through E(0): E0 e^{1 - rate Gamma}, E0 (1+Gamma)^{-rate}, E0 (H^{-1}(1/t)^2)^rate.
    const double e0 = rec.total.front();
    auto log_shape = [&](double t) {
        const double c = clock(t);
        switch (kind) {
        case Kind::exponential:
            return std::log(e0) + 1.0 - out.fitted_rate * c;
        case Kind::polynomial:
            return std::log(e0) - out.fitted_rate * c;
        case Kind::general:
            return std::log(e0) + out.fitted_rate * c;
        }
        return 0.0;
    };
    double log_c = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < idx.size(); ++k)
        log_c = std::max(log_c, y[k] - log_shape(rec.times[idx[k]]));
    out.fitted_C = std::exp(log_c);
    double dom = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k)
        dom = std::max(dom, std::exp(y[k] - log_c - log_shape(rec.times[idx[k]])));
    out.dominance_ratio = dom;
    return out;
}

Calibration calibrate_envelope(const EnergyRecord& rec, DecayEnvelope env,
                               std::pair<double, double> window)
{
    const auto idx = window_indices(rec, window);
    if (idx.empty())
        throw InvalidArgument("calibrate_envelope: empty window");
    if (env.kind == DecayEnvelope::Kind::exponential) {
        // The rate sits in the exponent; calibrate the prefactor in front of it.
        double c = 0.0;
        for (std::size_t i : idx)
            c = std::max(c, rec.total[i] / envelope_value(env, rec.times[i]));
        double dom = 0.0;
        for (std::size_t i : idx)
            dom = std::max(dom, rec.total[i] / (c * envelope_value(env, rec.times[i])));
        return {c, dom, idx.size()};
    }
    env.C = 1.0;
    double c = 0.0;
    for (std::size_t i : idx)
        c = std::max(c, rec.total[i] / envelope_value(env, rec.times[i]));
    env.C = c;
    double dom = 0.0;
    for (std::size_t i : idx)
        dom = std::max(dom, rec.total[i] / envelope_value(env, rec.times[i]));
    return {c, dom, idx.size()};
}

IntegralInequalityResult integral_inequality_check(std::span<const double> times, std::span<const double> energy,
                            std::span<const double> psi, double sigma)
{
    const auto n = times.size();
    if (n < 3 || energy.size() != n || psi.size() != n)
        throw InvalidArgument("integral_inequality_check: need at least three aligned samples");
    if (!(sigma >= 0.0))
        throw InvalidArgument("integral_inequality_check: sigma must be nonnegative");
    if (psi[0] != 0.0)
        throw InvalidArgument("integral_inequality_check: psi(0) must be 0");
    for (std::size_t i = 1; i < n; ++i)
        if (!(psi[i] > psi[i - 1]))
            throw InvalidArgument("integral_inequality_check: psi must be strictly increasing");
    const double e0 = energy[0];
    if (!(e0 > 0.0))
        throw InvalidArgument("integral_inequality_check: E(0) must be positive");
    if (!(energy[n - 1] / e0 < 1e-6))
        throw InvalidArgument("integral_inequality_check: tail not negligible (E(T)/E(0) = " +
                              fmt(energy[n - 1] / e0) + " >= 1e-6); record a longer run");

    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i)
        f[i] = std::pow(std::max(energy[i], 0.0), 1.0 + sigma);

    IntegralInequalityResult out;
    if (f[n - 1] > 0.0 && f[n - 2] > f[n - 1]) {
        const double k = std::log(f[n - 2] / f[n - 1]) / (psi[n - 1] - psi[n - 2]);
        out.tail_estimate = f[n - 1] / k;
    }

    // I(t_i) = tail + int_{t_i}^{T} E^{1+sigma} dpsi, trapezoid in psi.
    std::vector<double> tail_int(n);
    tail_int[n - 1] = out.tail_estimate;
    for (std::size_t i = n - 1; i-- > 0;)
        tail_int[i] = tail_int[i + 1] + 0.5 * (f[i] + f[i + 1]) * (psi[i + 1] - psi[i]);

    const double e0s = std::pow(e0, sigma);
    out.omega_hat = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (!(tail_int[i] > 0.0))
            continue;
        const double ratio = e0s * energy[i] / tail_int[i];
        if (ratio < out.omega_hat) {
            out.omega_hat = ratio;
            out.argmin_t = times[i];
        }
    }
    if (!std::isfinite(out.omega_hat))
        throw InvalidArgument("integral_inequality_check: tail integral vanishes everywhere");

    std::size_t best_lo = 0, best_len = 0, cur_lo = 0, cur_len = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const bool ok = tail_int[i] <= e0s * energy[i] / out.omega_hat * (1.0 + 1e-12);
        if (ok) {
            if (cur_len == 0)
                cur_lo = i;
            ++cur_len;
            if (cur_len > best_len) {
                best_len = cur_len;
                best_lo = cur_lo;
            }
        } else {
            cur_len = 0;
        }
    }
    if (best_len > 0)
        out.satisfied_window = {times[best_lo], times[best_lo + best_len - 1]};
    return out;
}

} // namespace dampwave
