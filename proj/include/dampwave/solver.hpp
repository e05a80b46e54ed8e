#pragma once

#include <optional>
#include <vector>

#include "dampwave/error.hpp"
#include "dampwave/kernels.hpp"
#include "dampwave/model.hpp"
#include "dampwave/record.hpp"

namespace dampwave {

/// Leapfrog state: displacement at t and the staggered velocity at t - dt/2.
struct State {
    double t = 0.0;
    GridFunction u;
    GridFunction v;
};

struct StepperConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    int record_every = 1;
    double newton_tol = 1e-12;
    int newton_max_iter = 60;
    kernels::Backend backend = kernels::Backend::openmp;
};

/// Raised when the state leaves the finite range (|u_i| > 1e10 or NaN).
class BlowUp : public Error {
public:
    BlowUp(const std::string& what, State last_finite)
        : Error(what), last_(std::move(last_finite)) {}
    const State& last_finite_state() const noexcept { return last_; }

private:
    State last_;
};

/// Per-node damping solve failed to converge.
class DampingSolveError : public Error {
public:
    DampingSolveError(const std::string& what, std::size_t node, double residual)
        : Error(what), node_(node), residual_(residual) {}
    std::size_t node() const noexcept { return node_; }
    double residual() const noexcept { return residual_; }

private:
    std::size_t node_;
    double residual_;
};

/// Solves 2 w + c g(w) = r for the midpoint velocity w. The root lies between 0 and r/2
/// because g is odd and increasing, which gives the safeguarding bracket.
double solve_midpoint_velocity(const Feedback& g, double c, double r, double tol, int max_iter,
                               double guess);

/// Energy sample at the synchronised time of a state.
struct EnergySample {
    double t;
    double kinetic;     // 1/2 sum M w^2
    double bilinear;    // a(u,u)
    double source_norm; // sum M |u|^{p+1}
    double dissipation_rate; // gamma(t) sum M g(w) w
};

/// Stepping engine. Owns its work arrays; not shareable between threads.
class Stepper {
public:
    Stepper(const Problem& problem, const StepperConfig& config);

    /// Leapfrog start: v(-dt/2) chosen so that the first midpoint velocity equals u1.
    State initial_state() const;

    /// Computes v(t + dt/2) from the state into the internal buffer and returns the
    /// energy sample at t (midpoint velocity w = (v_old + v_new)/2).
    EnergySample solve_velocity(const State& s);
    /// u += dt v_new, v = v_new, t += dt. Throws BlowUp if the new state is not finite.
    void advance(State& s);
    /// Midpoint velocity from the last solve.
    std::span<const double> midpoint_velocity() const noexcept { return w_; }

    /// Largest generalised eigenvalue of (K, mass) used by the CFL guard.
    double max_frequency_squared() const noexcept { return lambda_max_; }

private:
    const Problem& pr_;
    StepperConfig cfg_;
    double lambda_max_;
    std::vector<double> ku_;
    std::vector<double> v_new_;
    std::vector<double> w_;
    std::vector<double> gw_;
};

/// Throws InvalidArgument if dt * sqrt(lambda_max(K, mass)) > 2.
void check_cfl(const Problem& problem, const StepperConfig& config);

/// One leapfrog step with implicit midpoint damping.
State step(const Problem& problem, const State& state, const StepperConfig& config);

/// Velocity synchronised with u at the state's time (one extra damping solve).
GridFunction synchronized_velocity(const Problem& problem, const State& state,
                                   const StepperConfig& config);

struct SimulationResult {
    EnergyRecord record;
    State final_state;
};

/// Runs to t_end, recording every `record_every` steps and at the end. Dissipation is
/// accumulated by the trapezoid rule on the midpoint velocities the implicit solve used.
/// A blow-up ends the run with a partial record flagged `blew_up`.
SimulationResult simulate_full(const Problem& problem, const StepperConfig& config);
EnergyRecord simulate(const Problem& problem, const StepperConfig& config);

struct ResidualLevel {
    double dt;
    double max_residual;
    /// log2(r_k / r_{k+1}) against the next level; absent for the last one.
    std::optional<double> order;
};

/// Max identity residual for each dt (at least three levels).
std::vector<ResidualLevel> identity_residual_study(const Problem& problem,
                                                   const StepperConfig& config,
                                                   const std::vector<double>& dts);

/// Adaptive Dormand-Prince 5(4) integration of the semi-discrete system
/// M u'' + K u + gamma(t) M g(u') = M f(u) with local error tolerance `tol`.
/// The returned state carries the synchronous velocity u'(t_end) in `v`.
/// Limited to grids with at most 16 interior nodes.
State reference_solve(const Problem& problem, double t_end, double tol = 1e-10);

} // namespace dampwave
