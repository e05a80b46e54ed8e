#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dampwave/decay.hpp"
#include "dampwave/error.hpp"

using namespace dampwave;

namespace {

EnergyRecord synthetic(double t_end, double dt, double (*energy)(double))
{
    EnergyRecord r;
    const auto n = static_cast<int>(std::lround(t_end / dt));
    for (int i = 0; i <= n; ++i) {
        const double t = i * dt;
        r.times.push_back(t);
        r.total.push_back(energy(t));
    }
    return r;
}

} // namespace

TEST_CASE("weights for h(s) = s match the closed forms")
{
    const auto h = OriginProfile::linear(1.0);
    CHECK(weight_psi(h, 3.0) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(weight_phi(h, 5.0) == doctest::Approx(3.0).epsilon(1e-12));

    const auto w = build_weights(h, 100.0);
    CHECK(w.psi_tilde.front() == 1.0);
    for (std::size_t i = 0; i < w.t.size(); ++i) {
        const double t = w.t[i];
        CHECK(std::abs(w.psi_tilde[i] - (1.0 + 0.5 * (t * t - 1.0))) < 1e-8 * w.psi_tilde[i]);
        CHECK(std::abs(w.phi[i] - std::sqrt(2.0 * t - 1.0)) < 1e-8);
        CHECK(w.chi[i] == 1.0 / w.phi[i]);
        CHECK(std::abs(w.phi_prime[i] - 1.0 / std::sqrt(2.0 * t - 1.0)) < 1e-8);
        if (i > 0)
            CHECK(w.psi_tilde[i] > w.psi_tilde[i - 1]);
    }
    // Table rows land on the integers, so chi at t = 5 is directly available.
    const auto it = std::find(w.t.begin(), w.t.end(), 5.0);
    REQUIRE(it != w.t.end());
    CHECK(w.chi[static_cast<std::size_t>(it - w.t.begin())] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("weights for h(s) = s^3 match the closed forms")
{
    const auto h = OriginProfile::power(1.0, 3.0);
    CHECK(weight_psi(h, 2.0) == doctest::Approx(4.75).epsilon(1e-12));
    CHECK(weight_phi(h, 4.75) == doctest::Approx(2.0).epsilon(1e-12));
    const auto w = build_weights(h, 100.0);
    for (std::size_t i = 0; i < w.t.size(); ++i) {
        const double t = w.t[i];
        CHECK(std::abs(w.psi_tilde[i] - (1.0 + 0.25 * (std::pow(t, 4) - 1.0))) <
              1e-8 * w.psi_tilde[i]);
        CHECK(std::abs(w.phi[i] - std::pow(4.0 * t - 3.0, 0.25)) < 1e-8);
    }
}

TEST_CASE("weights for the degenerate profile are self-consistent")
{
    const auto h = OriginProfile::degenerate(1.0);
    const auto w = build_weights(h, 50.0, 801);
    for (std::size_t i = 0; i < w.t.size(); ++i) {
        // phi(psi~(t)) = t through an independent evaluation.
        if (std::isfinite(w.psi_tilde[i]))
            CHECK(std::abs(weight_phi(h, w.psi_tilde[i]) - w.t[i]) < 1e-8 * w.t[i]);
        if (i > 0 && i + 1 < w.t.size()) {
            const double left = (w.phi[i] - w.phi[i - 1]) / (w.t[i] - w.t[i - 1]);
            const double right = (w.phi[i + 1] - w.phi[i]) / (w.t[i + 1] - w.t[i]);
            CHECK(right <= left + 1e-10);
        }
    }
    CHECK(w.phi_prime.back() < w.phi_prime.front());
    CHECK(std::isfinite(w.tail_integral));
}

TEST_CASE("tail integral is finite and stable under grid doubling")
{
    for (const auto& h : {OriginProfile::linear(1.0), OriginProfile::power(1.0, 3.0),
                          OriginProfile::degenerate(1.0)}) {
        const auto a = build_weights(h, 100.0, 1001);
        const auto b = build_weights(h, 100.0, 2001);
        CHECK(std::isfinite(a.tail_integral));
        CHECK(std::abs(a.tail_integral - b.tail_integral) < 0.01 * std::abs(b.tail_integral));
        CHECK(b.tail_remainder == doctest::Approx(1.0 / b.phi.back()));
    }
    // For h(s) = s the integral over [1, inf) is 1 - 1/phi(inf) = 1.
    CHECK(build_weights(OriginProfile::linear(1.0), 100.0).tail_integral ==
          doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("weight errors")
{
    CHECK_THROWS_AS(build_weights(OriginProfile::linear(1.0), 1.0), InvalidArgument);
    CHECK_THROWS_AS(build_weights(OriginProfile::linear(-1.0), 10.0), InvalidArgument);
    CHECK_THROWS_AS(weight_psi(OriginProfile::linear(1.0), 0.5), InvalidArgument);
    CHECK_THROWS_AS(weight_phi(OriginProfile::power(-1.0, 3.0), 2.0), InvalidArgument);
    // h(1/s) underflows to zero for the degenerate profile at large s: psi~ leaves the
    // double range but phi stays computable.
    CHECK(std::isinf(weight_psi(OriginProfile::degenerate(1.0), 1e3)));
    CHECK(std::isfinite(weight_phi(OriginProfile::degenerate(1.0), 1e300)));
}

TEST_CASE("weights CSV")
{
    const auto w = build_weights(OriginProfile::linear(1.0), 3.0, 5);
    std::ostringstream os;
    write_weights_csv(w, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,psi_tilde,phi,phi_prime,chi");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        double vals[5];
        char comma;
        std::istringstream ls(line);
        ls >> vals[0];
        for (int k = 1; k < 5; ++k)
            ls >> comma >> vals[k];
        CHECK(vals[0] == w.t[rows]);
        CHECK(vals[2] == w.phi[rows]);
        ++rows;
    }
    CHECK(rows == w.t.size());
}

TEST_CASE("H and its inverse, and the chain inequality")
{
    const auto cube = OriginProfile::power(1.0, 3.0);
    CHECK(H_value(cube, 0.0) == 0.0);
    CHECK(H_inverse(cube, 1.0 / 16.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(H_inverse(cube, 2.0), InvalidArgument);
    CHECK_THROWS_AS(H_value(cube, 1.5), InvalidArgument);
    const auto lin = OriginProfile::linear(1.0);
    CHECK(std::pow(H_inverse(lin, 1.0 / 7.0), 2) == doctest::Approx(1.0 / 7.0));

    for (const auto& h : {lin, cube, OriginProfile::degenerate(1.0), OriginProfile::linear(3.0)}) {
        const double t0 = chain_start(h);
        const auto w = build_weights(h, 200.0);
        for (std::size_t i = 0; i < w.t.size(); ++i)
            if (w.t[i] >= t0 && 1.0 / w.t[i] <= h.H(1.0))
                CHECK(w.chi[i] <= H_inverse(h, 1.0 / w.t[i]) * (1.0 + 1e-12));
    }
}

TEST_CASE("envelope values")
{
    DecayEnvelope e;
    e.kind = DecayEnvelope::Kind::exponential;
    e.C = 2.0;
    e.schedule = DampingSchedule::constant(1.0);
    CHECK(envelope_value(e, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

    e.kind = DecayEnvelope::Kind::polynomial;
    e.C = 1.0;
    e.m = 3.0;
    CHECK(envelope_value(e, 9.0) == doctest::Approx(0.1).epsilon(1e-15));
    e.m = 1.0;
    CHECK_THROWS_AS(envelope_value(e, 1.0), InvalidArgument);

    DecayEnvelope g;
    g.kind = DecayEnvelope::Kind::general;
    g.profile = OriginProfile::power(1.0, 3.0);
    CHECK(envelope_value(g, 16.0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(envelope_domain_start(g) == 1.0);
    CHECK_THROWS_AS(envelope_value(g, 0.5), InvalidArgument);
    g.profile = OriginProfile::linear(0.25); // H(1) = 1/4, defined from t = 4
    CHECK(envelope_domain_start(g) == 4.0);

    // Positive and nonincreasing on the validity domain.
    e.m = 3.0;
    for (const DecayEnvelope& env : {e, g}) {
        double prev = INFINITY;
        for (double t = std::max(0.1, envelope_domain_start(env)); t < 500.0; t *= 1.1) {
            const double v = envelope_value(env, t);
            CHECK(v > 0.0);
            CHECK(v <= prev);
            prev = v;
        }
    }
    CHECK(std::string(to_string(DecayEnvelope::Kind::general)) == "general");
}

TEST_CASE("rate fits on synthetic energies")
{
    const auto gamma = DampingSchedule::constant(1.0);
    {
        const auto rec = synthetic(40.0, 0.05, [](double t) { return std::exp(-0.5 * t); });
        const auto fit = fit_rate(rec, DecayEnvelope::Kind::exponential, gamma);
        CHECK(std::abs(fit.fitted_rate - 0.5) < 1e-6);
        CHECK(fit.r_squared > 1.0 - 1e-9);
        CHECK(fit.dominance_ratio == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fit.fit_window.first == doctest::Approx(8.0));
    }
    {
        const auto rec = synthetic(200.0, 0.1, [](double t) { return 1.0 / (1.0 + t); });
        const auto fit = fit_rate(rec, DecayEnvelope::Kind::polynomial, gamma);
        CHECK(std::abs(fit.fitted_rate - 1.0) < 1e-6);
        CHECK(fit.dominance_ratio <= 1.0 + 1e-9);
    }
    {
        const auto h = OriginProfile::power(1.0, 3.0);
        // E = (H^{-1}(1/t))^2 = t^{-1/2} for t >= 1.
        const auto rec = synthetic(100.0, 0.1, [](double t) { return 1.0 / std::sqrt(1.0 + t); });
        const auto fit = fit_rate(rec, DecayEnvelope::Kind::general, gamma, h,
                                  std::pair{10.0, 100.0});
        CHECK(fit.fitted_rate == doctest::Approx(1.0).epsilon(0.02));
        CHECK(fit.r_squared > 0.99);
    }
    auto rec = synthetic(10.0, 1.0, [](double t) { return std::exp(-t); });
    CHECK_THROWS_AS(fit_rate(rec, DecayEnvelope::Kind::exponential, gamma), InvalidArgument);
    rec = synthetic(40.0, 0.05, [](double t) { return std::exp(-t) - 0.5; });
    CHECK_THROWS_AS(fit_rate(rec, DecayEnvelope::Kind::exponential, gamma), InvalidArgument);
    CHECK_THROWS_AS(fit_rate(rec, DecayEnvelope::Kind::exponential, gamma, std::nullopt,
                             std::pair{5.0, 5.0}),
                    InvalidArgument);
}

TEST_CASE("envelope calibration")
{
    const auto rec = synthetic(50.0, 0.1, [](double t) { return 2.0 * std::exp(-t) * (1.1 + std::sin(t)); });
    DecayEnvelope e;
    e.kind = DecayEnvelope::Kind::exponential;
    e.E0 = rec.total.front();
    e.C = 1.0;
    e.schedule = DampingSchedule::constant(1.0);
    const auto cal = calibrate_envelope(rec, e, {5.0, 50.0});
    CHECK(cal.dominance_ratio <= 1.0 + 1e-9);
    CHECK(cal.dominance_ratio >= 1.0 - 1e-12);
    CHECK(cal.samples == 451);
}

TEST_CASE("integral inequality checker on closed forms")
{
    SUBCASE("exponential decay")
    {
        const double omega = 0.7;
        EnergyRecord r;
        for (int i = 0; i <= 40000; ++i) {
            const double t = i * 1e-3;
            r.times.push_back(t);
            r.total.push_back(std::exp(-omega * t));
        }
        const auto res = integral_inequality_check(r.times, r.total, r.times, 0.0);
        CHECK(std::abs(res.omega_hat - omega) < 1e-4);
        CHECK(res.satisfied_window.first == 0.0);
        CHECK(res.tail_estimate > 0.0);
    }
    SUBCASE("power decay with sigma = 1")
    {
        EnergyRecord r;
        const double E0 = 2.0;
        // Log-spaced in 1 + t out to E(T)/E(0) < 1e-6.
        r.times.push_back(0.0);
        for (int i = 1; i <= 20000; ++i)
            r.times.push_back(std::pow(10.0, 6.5 * i / 20000.0) - 1.0);
        for (double t : r.times)
            r.total.push_back(E0 / (1.0 + t));
        const auto res = integral_inequality_check(r.times, r.total, r.times, 1.0);
        CHECK(std::abs(res.omega_hat - 1.0) < 1e-3);
    }
    std::vector<double> t{0.0, 1.0, 2.0}, e{1.0, 0.5, 0.25};
    CHECK_THROWS_AS(integral_inequality_check(t, e, t, 0.0), InvalidArgument);
    std::vector<double> bad_psi{0.0, 2.0, 1.0};
    e = {1.0, 1e-4, 1e-7};
    CHECK_THROWS_AS(integral_inequality_check(t, e, bad_psi, 0.0), InvalidArgument);
    CHECK_NOTHROW(integral_inequality_check(t, e, t, 0.0));
}
