#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dampwave/field.hpp"
#include "dampwave/record.hpp"

namespace dampwave {

// Potential-well analysis. The barrier
//   F(s) = s/2 - M^{p+1} / ((p+1) omega^{(p+1)/2}) s^{(p+1)/2}
// bounds the total energy from below in terms of a(u,u); its maximum (s1, F1) is the
// global-existence threshold.

/// F(s). Throws InvalidArgument for s < 0 or p <= 1.
double barrier(double omega, double M, double p, double s);
/// F'(s).
double barrier_derivative(double omega, double M, double p, double s);

struct Thresholds {
    double s1;
    double F1;
};
/// Location and value of the barrier maximum. Throws for p <= 1, omega <= 0 or M <= 0.
Thresholds thresholds(double omega, double M, double p);

/// Unique s2 in (0, s1) with F(s2) = E0, by bisection on (1e-14, s1 - 1e-14).
/// Throws InvalidArgument unless 0 < E0 < F1.
double invariant_level(double omega, double M, double p, double E0);

struct SourceBound {
    double M_script; // |u|_{p+1}^{p+1} <= M_script E(t)
    double C0;       // quadratic energy <= C0 E(t)
};
/// Constants bounding the source norm and the quadratic energy inside the well.
/// Throws when s2 is not in (0, s1).
SourceBound source_bound_constant(double omega, double M, double p, double s2);

struct EmbeddingEstimate {
    enum class Method { analytic, rayleigh_ascent };
    double p = 1.0;
    double M = 0.0;
    Method method = Method::analytic;
    /// Relative quotient change of the last iterate.
    double residual = 0.0;
    int iterations = 0;
    /// Maximiser, normalised to unit discrete gradient norm.
    std::vector<double> maximiser;
};

struct EmbeddingOptions {
    int starts = 20;
    std::uint64_t seed = 20240611;
    int max_iter = 20000;
    double tol = 1e-13;
};

/// Best constant in |u|_{p+1} <= M |grad u|_2 over the discrete space. p = 1 is the
/// generalised eigenproblem of (K_I, mass); p > 1 uses gradient ascent in the K_I metric
/// (u <- K_I^{-1} M |u|^{p-1} u, renormalised), which increases the quotient at every
/// step, from `starts` random starts plus the positive ground state.
/// Throws ConvergenceError carrying the best quotient if no start converges to 1e-8.
EmbeddingEstimate estimate_embedding(const DiscreteOperator& op, double p,
                                     const EmbeddingOptions& options = {});

struct WellInputs {
    double omega;
    double M;
    double p;
    double E0;
    double a0;
};

struct WellAnalysis {
    enum class Verdict { global, thresholds_violated };
    double omega = 1.0;
    double M = 1.0;
    double p = 3.0;
    double s1 = 0.0;
    double F1 = 0.0;
    double E0 = 0.0;
    double a0 = 0.0;
    std::optional<double> s2;
    std::optional<double> M_script;
    std::optional<double> C0;
    Verdict verdict = Verdict::thresholds_violated;
    /// |E0 - F1| / F1.
    double margin = 0.0;
    /// margin below 5%: the verdict may flip under refinement of M.
    bool marginal = false;
    std::string reason;
};

/// Global existence holds iff 0 < E0 < F1 and a0 < s1; then s2, M_script and C0 are
/// filled in. Throws InvalidArgument for p outside (1, 5].
WellAnalysis global_existence_verdict(const WellInputs& in);

const char* to_string(WellAnalysis::Verdict v);

/// Worst-case ratios of the trajectory invariants inside the well.
struct TrajectoryCheck {
    double max_bilinear_over_s2 = 0.0;   // max a(u,u) / s2
    double max_quadratic_over_C0E = 0.0; // max quadratic / (C0 E)
    double min_quadratic = 0.0;          // min quadratic energy (>= 0)
    double min_lower_bound_gap = 0.0;    // min E - F(a(u,u))
};

/// Requires a global verdict (s2, C0 present).
TrajectoryCheck check_trajectory(const WellAnalysis& well, const EnergyRecord& record);

} // namespace dampwave
