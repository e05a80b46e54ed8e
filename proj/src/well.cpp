#include "dampwave/well.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/SparseCholesky>

#include "dampwave/error.hpp"
#include "dampwave/roots.hpp"

namespace dampwave {

namespace {

// M^{p+1} / ((p+1) omega^{(p+1)/2})
double barrier_coefficient(double omega, double M, double p)
{
    return std::pow(M, p + 1.0) / ((p + 1.0) * std::pow(omega, 0.5 * (p + 1.0)));
}

void require_barrier_params(double omega, double M, double p)
{
    if (!(p > 1.0))
        throw InvalidArgument("barrier: p must exceed 1 (exponent 2/(p-1) is singular)");
    if (!(omega > 0.0) || !(M > 0.0))
        throw InvalidArgument("barrier: omega and M must be positive");
}

} // namespace

double barrier(double omega, double M, double p, double s)
{
    require_barrier_params(omega, M, p);
    if (!(s >= 0.0))
        throw InvalidArgument("barrier: s must be nonnegative");
    return 0.5 * s - barrier_coefficient(omega, M, p) * std::pow(s, 0.5 * (p + 1.0));
}

double barrier_derivative(double omega, double M, double p, double s)
{
    require_barrier_params(omega, M, p);
    if (!(s >= 0.0))
        throw InvalidArgument("barrier: s must be nonnegative");
    return 0.5 - barrier_coefficient(omega, M, p) * 0.5 * (p + 1.0) *
                     std::pow(s, 0.5 * (p - 1.0));
}

Thresholds thresholds(double omega, double M, double p)
{
    require_barrier_params(omega, M, p);
    const double base = std::pow(omega, 0.5 * (p + 1.0)) / std::pow(M, p + 1.0);
    const double s1 = std::pow(base, 2.0 / (p - 1.0));
    return {s1, (0.5 - 1.0 / (p + 1.0)) * s1};
}

double invariant_level(double omega, double M, double p, double E0)
{
    const auto [s1, F1] = thresholds(omega, M, p);
    if (!(E0 > 0.0))
        throw InvalidArgument("invariant_level: E0 must be positive");
    if (!(E0 < F1))
        throw InvalidArgument("invariant_level: E0 >= F1, no root below s1");
    // F is strictly increasing on the bracket; bisect down to machine resolution.
    return roots::bisect_increasing([&](double s) { return barrier(omega, M, p, s); }, E0,
                                    1e-14, s1 - 1e-14, 0.0, 0.0, 200)
        .root;
}

SourceBound source_bound_constant(double omega, double M, double p, double s2)
{
    const auto [s1, F1] = thresholds(omega, M, p);
    if (!(s2 > 0.0) || !(s2 < s1))
        throw InvalidArgument("source_bound_constant: need 0 < s2 < s1");
    const double scaled = std::pow(M, p + 1.0) / std::pow(omega, 0.5 * (p + 1.0)) *
                          std::pow(s2, 0.5 * (p - 1.0));
    const double numerator = 2.0 * scaled;
    const double denominator = 1.0 - 2.0 * scaled / (p + 1.0);
    if (!(denominator > 0.0))
        throw InvalidArgument("source_bound_constant: nonpositive denominator");
    const double m_script = numerator / denominator;
    return {m_script, 1.0 + m_script / (p + 1.0)};
}

namespace {

struct AscentResult {
    double quotient;
    double change;
    int iterations;
    Eigen::VectorXd u;
};

using Factor = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>;

// Maximises |u|_q / |grad u| from `u`. Each step solves K_I z = M |u|^{q-2} u and
// renormalises z to unit gradient norm; for the convex functional |u|_q^q this never
// decreases the quotient.
AscentResult ascend(const Factor& llt, const Eigen::SparseMatrix<double>& lap,
                    const Eigen::VectorXd& mass, double q, Eigen::VectorXd u, int max_iter,
                    double tol)
{
    auto normalise = [&](Eigen::VectorXd& v) {
        v /= std::sqrt(v.dot(lap * v));
    };
    auto quotient = [&](const Eigen::VectorXd& v) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            s += mass[i] * std::pow(std::abs(v[i]), q);
        return std::pow(s, 1.0 / q); // v has unit gradient norm
    };
    normalise(u);
    double value = quotient(u);
    double change = std::numeric_limits<double>::infinity();
    int it = 0;
    Eigen::VectorXd rhs(u.size());
    for (; it < max_iter; ++it) {
        for (Eigen::Index i = 0; i < u.size(); ++i)
            rhs[i] = mass[i] * std::pow(std::abs(u[i]), q - 2.0) * u[i];
        Eigen::VectorXd z = llt.solve(rhs);
        normalise(z);
        const double next = quotient(z);
        change = std::abs(next - value) / next;
        u = std::move(z);
        value = next;
        if (change < tol)
            break;
    }
    return {value, change, it + 1, std::move(u)};
}

} // namespace

EmbeddingEstimate estimate_embedding(const DiscreteOperator& op, double p,
                                     const EmbeddingOptions& options)
{
    if (!(p >= 1.0))
        throw InvalidArgument("estimate_embedding: need p + 1 >= 2");
    EmbeddingEstimate est;
    est.p = p;
    if (p == 1.0) {
        const auto pair = smallest_generalized_eigenpair(op.laplacian, op.lumped_mass);
        est.M = 1.0 / std::sqrt(pair.value);
        est.method = EmbeddingEstimate::Method::analytic;
        est.maximiser = pair.vector;
        const double g = std::sqrt(pair.value);
        for (double& v : est.maximiser)
            v /= g;
        return est;
    }

    const auto n = static_cast<Eigen::Index>(op.lumped_mass.size());
    Eigen::SparseMatrix<double> lap = op.laplacian;
    Factor llt(lap);
    if (llt.info() != Eigen::Success)
        throw InvalidArgument("estimate_embedding: gradient form not positive definite");
    Eigen::VectorXd mass = Eigen::Map<const Eigen::VectorXd>(op.lumped_mass.data(), n);
    const double q = p + 1.0;

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    bool have_converged = false;
    AscentResult best{0.0, std::numeric_limits<double>::infinity(), 0, {}};
    int total_iterations = 0;
    for (int start = 0; start <= options.starts; ++start) {
        Eigen::VectorXd u0(n);
        if (start == 0) {
            const auto ground = smallest_generalized_eigenpair(op.laplacian, op.lumped_mass);
            for (Eigen::Index i = 0; i < n; ++i)
                u0[i] = ground.vector[static_cast<std::size_t>(i)];
        } else {
            for (Eigen::Index i = 0; i < n; ++i)
                u0[i] = normal(rng);
        }
        AscentResult r = ascend(llt, lap, mass, q, std::move(u0), options.max_iter, options.tol);
        total_iterations += r.iterations;
        const bool converged = r.change < 1e-8;
        if (converged && (!have_converged || r.quotient > best.quotient)) {
            best = std::move(r);
            have_converged = true;
        } else if (!have_converged && r.quotient > best.quotient) {
            best = std::move(r);
        }
    }
    if (!have_converged)
        throw ConvergenceError("estimate_embedding: gradient ascent did not converge",
                               best.quotient, best.change);
    est.M = best.quotient;
    est.method = EmbeddingEstimate::Method::rayleigh_ascent;
    est.residual = best.change;
    est.iterations = total_iterations;
    est.maximiser.assign(best.u.data(), best.u.data() + n);
    return est;
}

WellAnalysis global_existence_verdict(const WellInputs& in)
{
    if (!(in.p > 1.0 && in.p <= 5.0))
        throw InvalidArgument("global_existence_verdict: need 1 < p <= 5");
    WellAnalysis w;
    w.omega = in.omega;
    w.M = in.M;
    w.p = in.p;
    w.E0 = in.E0;
    w.a0 = in.a0;
    const auto th = thresholds(in.omega, in.M, in.p);
    w.s1 = th.s1;
    w.F1 = th.F1;
    w.margin = std::abs(in.E0 - th.F1) / th.F1;
    w.marginal = w.margin < 0.05;

    if (!(in.E0 > 0.0)) {
        w.reason = "E(0) must be positive";
    } else if (!(in.E0 < th.F1)) {
        w.reason = "E(0) >= F1";
    } else if (!(in.a0 < th.s1)) {
        w.reason = "a(u0,u0) >= s1";
    } else {
        w.verdict = WellAnalysis::Verdict::global;
        w.s2 = invariant_level(in.omega, in.M, in.p, in.E0);
        const auto sb = source_bound_constant(in.omega, in.M, in.p, *w.s2);
        w.M_script = sb.M_script;
        w.C0 = sb.C0;
    }
    return w;
}

const char* to_string(WellAnalysis::Verdict v)
{
    return v == WellAnalysis::Verdict::global ? "global" : "thresholds_violated";
}

TrajectoryCheck check_trajectory(const WellAnalysis& well, const EnergyRecord& record)
{
    if (well.verdict != WellAnalysis::Verdict::global || !well.s2 || !well.C0)
        throw InvalidArgument("check_trajectory: needs a global verdict");
    TrajectoryCheck c;
    c.min_quadratic = std::numeric_limits<double>::infinity();
    c.min_lower_bound_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < record.size(); ++i) {
        const double a = record.bilinear[i];
        const double e = record.total[i];
        c.max_bilinear_over_s2 = std::max(c.max_bilinear_over_s2, a / *well.s2);
        if (e > 0.0)
            c.max_quadratic_over_C0E =
                std::max(c.max_quadratic_over_C0E, record.quadratic[i] / (*well.C0 * e));
        c.min_quadratic = std::min(c.min_quadratic, record.quadratic[i]);
        c.min_lower_bound_gap =
            std::min(c.min_lower_bound_gap, e - barrier(well.omega, well.M, well.p, a));
    }
    return c;
}

} // namespace dampwave
