#include "dampwave/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "dampwave/roots.hpp"

namespace dampwave {

namespace {

constexpr double blowup_threshold = 1e10;

bool finite_and_bounded(std::span<const double> x)
{
    return std::all_of(x.begin(), x.end(), [](double v) {
        return std::isfinite(v) && std::abs(v) <= blowup_threshold;
    });
}

} // namespace

double solve_midpoint_velocity(const Feedback& g, double c, double r, double tol, int max_iter,
                               double guess)
{
    if (r == 0.0)
        return 0.0;
    if (c == 0.0)
        return 0.5 * r;
    const double lo = std::min(0.0, 0.5 * r);
    const double hi = std::max(0.0, 0.5 * r);
    auto fdf = [&](double w) {
        return std::pair{2.0 * w + c * g(w) - r, 2.0 + c * g.derivative(w)};
    };
    return roots::safeguarded_newton(fdf, lo, hi, guess, tol, max_iter).root;
}

Stepper::Stepper(const Problem& problem, const StepperConfig& config)
    : pr_(problem), cfg_(config),
      lambda_max_(largest_generalized_eigenvalue(problem.op.stiffness, problem.op.lumped_mass)),
      ku_(problem.grid().size()), v_new_(problem.grid().size()),
      w_(problem.grid().size()), gw_(problem.grid().size())
{
    if (!(config.dt > 0.0))
        throw InvalidArgument("Stepper: dt must be positive");
}

State Stepper::initial_state() const
{
    const auto n = pr_.grid().size();
    const auto& m = pr_.op.lumped_mass;
    std::vector<double> ku(n);
    kernels::matvec(cfg_.backend, pr_.op.stiffness, pr_.u0.values(), ku);
    const double gamma0 = pr_.schedule(0.0);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u1 = pr_.u1[i];
        const double acc = eval_source(pr_.p, pr_.u0[i]) - ku[i] / m[i] -
                           gamma0 * pr_.feedback(u1);
        v[i] = u1 - 0.5 * cfg_.dt * acc;
    }
    return State{0.0, pr_.u0, GridFunction(pr_.grid(), std::move(v))};
}

EnergySample Stepper::solve_velocity(const State& s)
{
    const auto n = pr_.grid().size();
    const auto& m = pr_.op.lumped_mass;
    const auto u = s.u.values();
    const auto v = s.v.values();
    const auto backend = cfg_.backend;
    kernels::matvec(backend, pr_.op.stiffness, u, ku_);

    const double gamma = pr_.schedule(s.t);
    const double c = cfg_.dt * gamma;
    const double dt = cfg_.dt;
    const double tol = cfg_.newton_tol;
    const int max_iter = cfg_.newton_max_iter;
    std::atomic<bool> nonfinite{false};

    const auto status = kernels::for_each_node(backend, n, [&](std::size_t i) {
        kernels::NodeStatus st;
        const double acc = eval_source(pr_.p, u[i]) - ku_[i] / m[i];
        const double r = 2.0 * v[i] + dt * acc;
        if (!std::isfinite(r)) {
            nonfinite.store(true, std::memory_order_relaxed);
            return st;
        }
        try {
            const double w = solve_midpoint_velocity(pr_.feedback, c, r, tol, max_iter, v[i]);
            w_[i] = w;
            gw_[i] = pr_.feedback(w);
            v_new_[i] = 2.0 * w - v[i];
        } catch (const ConvergenceError& e) {
            st.ok = false;
            st.node = i;
            st.residual = e.residual();
        }
        return st;
    });
    if (nonfinite)
        throw BlowUp("non-finite acceleration at t = " + std::to_string(s.t), s);
    if (!status.ok) {
        std::ostringstream msg;
        msg << "damping solve did not converge at node " << status.node << " (t = " << s.t
            << ", residual " << status.residual << ")";
        throw DampingSolveError(msg.str(), status.node, status.residual);
    }

    EnergySample e;
    e.t = s.t;
    e.kinetic = 0.5 * kernels::weighted_square_sum(backend, m, w_);
    e.bilinear = kernels::dot(backend, u, ku_);
    e.source_norm = kernels::weighted_power_sum(backend, m, u, pr_.p + 1.0);
    e.dissipation_rate = gamma * kernels::weighted_dot(backend, m, gw_, w_);
    return e;
}

void Stepper::advance(State& s)
{
    const auto n = pr_.grid().size();
    std::vector<double> u_next(n);
    const auto u = s.u.values();
    for (std::size_t i = 0; i < n; ++i)
        u_next[i] = u[i] + cfg_.dt * v_new_[i];
    if (!finite_and_bounded(u_next) || !finite_and_bounded(v_new_)) {
        std::ostringstream msg;
        msg << "blow-up detected after t = " << s.t;
        throw BlowUp(msg.str(), s);
    }
    s.u = GridFunction(pr_.grid(), std::move(u_next));
    s.v = GridFunction(pr_.grid(), v_new_);
    s.t += cfg_.dt;
}

void check_cfl(const Problem& problem, const StepperConfig& config)
{
    const double lam = largest_generalized_eigenvalue(problem.op.stiffness,
                                                      problem.op.lumped_mass);
    const double courant = config.dt * std::sqrt(lam);
    if (courant > 2.0) {
        std::ostringstream msg;
        msg << "CFL guard: dt * sqrt(lambda_max) = " << courant << " > 2 (dt must be <= "
            << 2.0 / std::sqrt(lam) << ")";
        throw InvalidArgument(msg.str());
    }
}

State step(const Problem& problem, const State& state, const StepperConfig& config)
{
    check_cfl(problem, config);
    Stepper stepper(problem, config);
    stepper.solve_velocity(state);
    State next = state;
    stepper.advance(next);
    return next;
}

GridFunction synchronized_velocity(const Problem& problem, const State& state,
                                   const StepperConfig& config)
{
    Stepper stepper(problem, config);
    stepper.solve_velocity(state);
    const auto w = stepper.midpoint_velocity();
    return GridFunction(problem.grid(), std::vector<double>(w.begin(), w.end()));
}

SimulationResult simulate_full(const Problem& problem, const StepperConfig& config)
{
    if (!(config.t_end >= 0.0))
        throw InvalidArgument("simulate: t_end must be nonnegative");
    if (config.record_every < 1)
        throw InvalidArgument("simulate: record_every must be >= 1");
    check_cfl(problem, config);
    Stepper stepper(problem, config);
    const double dt = config.dt;
    const auto steps = static_cast<long long>(std::ceil(config.t_end / dt - 1e-9));

    SimulationResult out{EnergyRecord{}, stepper.initial_state()};
    EnergyRecord& rec = out.record;
    State& s = out.final_state;
    rec.p = problem.p;

    double dissipation = 0.0;
    double prev_rate = 0.0;
    for (long long n = 0;; ++n) {
        EnergySample e;
        try {
            e = stepper.solve_velocity(s);
        } catch (const BlowUp&) {
            rec.blew_up = true;
            rec.blowup_time = s.t;
            break;
        }
        if (n > 0)
            dissipation += 0.5 * dt * (prev_rate + e.dissipation_rate);
        prev_rate = e.dissipation_rate;

        if (n % config.record_every == 0 || n == steps) {
            const double quadratic = e.kinetic + 0.5 * e.bilinear;
            const double total = quadratic - e.source_norm / (problem.p + 1.0);
            rec.times.push_back(s.t);
            rec.quadratic.push_back(quadratic);
            rec.total.push_back(total);
            rec.dissipation_cumulative.push_back(dissipation);
            rec.bilinear.push_back(e.bilinear);
            rec.source_norm.push_back(e.source_norm);
            rec.identity_residual.push_back(std::abs(total + dissipation - rec.total.front()));
        }
        if (n == steps)
            break;
        try {
            stepper.advance(s);
        } catch (const BlowUp&) {
            rec.blew_up = true;
            rec.blowup_time = s.t;
            break;
        }
        s.t = static_cast<double>(n + 1) * dt;
    }
    return out;
}

EnergyRecord simulate(const Problem& problem, const StepperConfig& config)
{
    return simulate_full(problem, config).record;
}

std::vector<ResidualLevel> identity_residual_study(const Problem& problem,
                                                   const StepperConfig& config,
                                                   const std::vector<double>& dts)
{
    if (dts.size() < 3)
        throw InvalidArgument("identity_residual_study: need at least three refinement levels");
    std::vector<ResidualLevel> out;
    for (double dt : dts) {
        StepperConfig c = config;
        c.dt = dt;
        c.record_every = 1;
        const auto rec = simulate(problem, c);
        if (rec.blew_up)
            throw Error("identity_residual_study: run blew up at dt = " + std::to_string(dt));
        const double r = *std::max_element(rec.identity_residual.begin(),
                                           rec.identity_residual.end());
        out.push_back({dt, r, std::nullopt});
    }
    for (std::size_t k = 0; k + 1 < out.size(); ++k)
        out[k].order = std::log2(out[k].max_residual / out[k + 1].max_residual);
    return out;
}

State reference_solve(const Problem& problem, double t_end, double tol)
{
    namespace odeint = boost::numeric::odeint;
    using Vec = std::vector<double>;
    const auto n = problem.grid().size();
    if (n > 16)
        throw InvalidArgument("reference_solve: limited to 16 interior nodes");
    const auto& m = problem.op.lumped_mass;

    auto rhs = [&](const Vec& x, Vec& dxdt, double t) {
        std::vector<double> ku(n);
        kernels::serial::matvec(problem.op.stiffness, std::span<const double>(x.data(), n), ku);
        const double gamma = problem.schedule(t);
        for (std::size_t i = 0; i < n; ++i) {
            dxdt[i] = x[n + i];
            dxdt[n + i] = eval_source(problem.p, x[i]) - ku[i] / m[i] -
                          gamma * problem.feedback(x[n + i]);
        }
    };

    Vec x(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = problem.u0[i];
        x[n + i] = problem.u1[i];
    }
    auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<Vec>());
    double t = 0.0;
    double dt = std::min(1e-3, t_end);
    while (t < t_end) {
        const double remaining = t_end - t;
        if (remaining <= 1e-15 * std::max(1.0, t_end))
            break;
        bool last = false;
        if (dt >= remaining) {
            dt = remaining;
            last = true;
        }
        const double attempted = dt;
        const auto res = stepper.try_step(rhs, x, t, dt);
        if (res == odeint::fail) {
            if (dt < 1e-14)
                throw Error("reference_solve: step size collapsed below 1e-14 at t = " +
                            std::to_string(t));
            continue;
        }
        if (last && dt < attempted)
            dt = attempted; // keep the controller's proposal from shrinking artificially
        if (last)
            t = t_end;
    }
    Vec u(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
    Vec v(x.begin() + static_cast<std::ptrdiff_t>(n), x.end());
    return State{t_end, GridFunction(problem.grid(), std::move(u)),
                 GridFunction(problem.grid(), std::move(v))};
}

} // namespace dampwave
