#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dampwave/model.hpp"
#include "dampwave/record.hpp"

namespace dampwave {

// ---------------------------------------------------------------- weight functions
//
// For an origin profile h:
//   psi~(t) = 1 + int_1^t 1/h(1/s) ds,   phi = psi~^{-1},   chi = 1/phi,
// and phi'(t) = h(1/phi(t)) by the inverse function rule.

/// psi~(t) for t >= 1 by adaptive Gauss-Kronrod. Throws InvalidArgument if h(1/s)
/// vanishes or is not finite on [1, t].
double weight_psi(const OriginProfile& profile, double t);
/// phi(y) = psi~^{-1}(y) for y >= 1 (safeguarded Newton on psi~).
double weight_phi(const OriginProfile& profile, double y);

struct WeightTable {
    OriginProfile profile = OriginProfile::linear(1.0);
    std::vector<double> t;
    std::vector<double> psi_tilde;
    std::vector<double> phi;
    std::vector<double> phi_prime;
    std::vector<double> chi;
    /// Trapezoid estimate of int_1^{T_max} phi'(t) |h^{-1}(phi'(t))|^2 dt on the table.
    double tail_integral_truncated = 0.0;
    /// Remainder beyond T_max: 1/phi(T_max), using h^{-1}(phi'(t)) = 1/phi(t).
    double tail_remainder = 0.0;
    /// truncated + remainder: the estimate of the integral over [1, inf).
    double tail_integral = 0.0;
};

/// Tabulates psi~, phi, phi', chi on `points` log-spaced nodes of [1, t_max], merged
/// with the integers in [1, t_max] when t_max <= 1e4.
WeightTable build_weights(const OriginProfile& profile, double t_max, int points = 2001);

/// CSV with header `t,psi_tilde,phi,phi_prime,chi`, 17 significant digits.
void write_weights_csv(const WeightTable& table, std::ostream& out);

/// H(s) = h(s) s.
double H_value(const OriginProfile& profile, double s);
/// Inverse of H on [0, H(1)].
double H_inverse(const OriginProfile& profile, double y);

/// First t from which 1/phi(t) <= H^{-1}(1/t) holds: t0 = 1/H(1/s0) with s0 >= 1 the
/// smallest point where h(1/s0) <= 1.
double chain_start(const OriginProfile& profile);

// ---------------------------------------------------------------- envelopes

struct DecayEnvelope {
    enum class Kind { exponential, polynomial, general };
    Kind kind = Kind::exponential;
    double E0 = 1.0;
    /// Exponential: rate in e^{1 - C Gamma(t)}. Polynomial/general: prefactor.
    double C = 1.0;
    double m = 3.0;
    std::optional<DampingSchedule> schedule;
    std::optional<OriginProfile> profile;
};

/// Exponential: E0 e^{1 - C Gamma(t)}; polynomial: C E0 (1 + Gamma(t))^{-2/(m-1)};
/// general: C E0 (H^{-1}(1/t))^2 for t >= max(1, 1/H(1)).
double envelope_value(const DecayEnvelope& envelope, double t);
/// Earliest time at which envelope_value is defined.
double envelope_domain_start(const DecayEnvelope& envelope);

const char* to_string(DecayEnvelope::Kind kind);

// ---------------------------------------------------------------- fitting

struct FitResult {
    DecayEnvelope::Kind kind = DecayEnvelope::Kind::exponential;
    /// Exponential: decay rate in Gamma-time. Polynomial: exponent of (1 + Gamma).
    /// General: power of (H^{-1}(1/t))^2.
    double fitted_rate = 0.0;
    /// Prefactor making C * shape dominate E on the window, with equality attained.
    double fitted_C = 0.0;
    double r_squared = 0.0;
    std::pair<double, double> fit_window{0.0, 0.0};
    double dominance_ratio = 0.0;
    std::size_t samples = 0;
};

/// Least-squares fit of log E against the clock of the chosen envelope: Gamma(t)
/// (exponential), log(1 + Gamma(t)) (polynomial), log(H^{-1}(1/t)^2) (general).
/// Default window: the last 80% of the record in Gamma-time. Needs >= 20 samples with
/// E > 0 inside the window.
FitResult fit_rate(const EnergyRecord& record, DecayEnvelope::Kind kind,
                   const DampingSchedule& schedule,
                   const std::optional<OriginProfile>& profile = std::nullopt,
                   std::optional<std::pair<double, double>> window = std::nullopt);

struct Calibration {
    double C;
    double dominance_ratio;
    std::size_t samples;
};

/// Smallest prefactor C with E(t) <= C * envelope(t) on the window (envelope taken with
/// its own C replaced by 1), plus the resulting sup E / envelope.
Calibration calibrate_envelope(const EnergyRecord& record, DecayEnvelope envelope,
                               std::pair<double, double> window);

// ---------------------------------------------------------------- integral inequality

struct IntegralInequalityResult {
    double omega_hat = 0.0;
    /// Largest contiguous stretch of the check grid on which
    /// I(t) <= E^sigma(0) E(t) / omega_hat holds.
    std::pair<double, double> satisfied_window{0.0, 0.0};
    /// Tail beyond the record estimated by exponential extrapolation in psi.
    double tail_estimate = 0.0;
    double argmin_t = 0.0;
};

/// Checks int_t^inf E^{1+sigma} psi' ds <= E^sigma(0) E(t) / omega on the record,
/// returning the largest admissible omega. psi is tabulated on `times` with psi(0) = 0.
/// Throws InvalidArgument if E(T)/E(0) >= 1e-6 (record too short) or psi is not
/// strictly increasing.
IntegralInequalityResult integral_inequality_check(std::span<const double> times, std::span<const double> energy,
                            std::span<const double> psi, double sigma);

} // namespace dampwave
