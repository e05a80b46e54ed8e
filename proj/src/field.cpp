#include "dampwave/field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "dampwave/error.hpp"
#include "dampwave/kernels.hpp"

namespace dampwave {

std::array<double, 2> Grid::node(std::size_t k) const noexcept
{
    const auto nx = static_cast<std::size_t>(counts[0]);
    const std::size_t i = k % nx;
    const std::size_t j = k / nx;
    const double x = spacing[0] * static_cast<double>(i + 1);
    const double y = dim == 2 ? spacing[1] * static_cast<double>(j + 1) : 0.0;
    return {x, y};
}

Grid build_grid(int dim, std::span<const double> lengths, std::span<const int> counts)
{
    if (dim != 1 && dim != 2)
        throw InvalidArgument("build_grid: dim must be 1 or 2");
    const auto d = static_cast<std::size_t>(dim);
    if (lengths.size() < d || counts.size() < d)
        throw InvalidArgument("build_grid: need one length and one count per axis");
    Grid g;
    g.dim = dim;
    for (std::size_t a = 0; a < d; ++a) {
        if (!(lengths[a] > 0.0) || !std::isfinite(lengths[a]))
            throw InvalidArgument("build_grid: lengths must be positive");
        if (counts[a] < 1)
            throw InvalidArgument("build_grid: interior counts must be at least 1");
        g.lengths[a] = lengths[a];
        g.counts[a] = counts[a];
        g.spacing[a] = lengths[a] / static_cast<double>(counts[a] + 1);
    }
    if (dim == 1) {
        g.lengths[1] = 1.0;
        g.counts[1] = 1;
        g.spacing[1] = 1.0;
    }
    return g;
}

GridFunction::GridFunction(const Grid& grid) : grid_(grid), values_(grid.size(), 0.0) {}

GridFunction::GridFunction(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values))
{
    if (values_.size() != grid_.size())
        throw InvalidArgument("GridFunction: value count does not match grid size");
    for (double v : values_)
        if (!std::isfinite(v))
            throw InvalidArgument("GridFunction: non-finite value");
}

GridFunction GridFunction::sample(const Grid& grid,
                                  const std::function<double(double, double)>& f)
{
    std::vector<double> v(grid.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        const auto [x, y] = grid.node(k);
        v[k] = f(x, y);
    }
    return GridFunction(grid, std::move(v));
}

double SymMatrix2::min_eigenvalue() const noexcept
{
    const double mean = 0.5 * (a11 + a22);
    const double diff = 0.5 * (a11 - a22);
    return mean - std::hypot(diff, a12);
}

CoefficientField CoefficientField::constant(double scale)
{
    if (!(scale > 0.0))
        throw InvalidArgument("CoefficientField::constant: scale must be positive");
    return {[scale](double, double) { return SymMatrix2{scale, 0.0, scale}; }, scale};
}

CoefficientField CoefficientField::smooth(double omega, double amplitude, double shear)
{
    if (!(omega > 0.0) || amplitude < 0.0)
        throw InvalidArgument("CoefficientField::smooth: need omega > 0, amplitude >= 0");
    // omega*I + amplitude*b(x,y) * r r^T with r = (1, shear): rank one, so the smallest
    // eigenvalue stays exactly omega in 2D.
    auto entries = [=](double x, double y) {
        constexpr double pi = std::numbers::pi;
        const double b = 0.5 * (1.0 + std::sin(2.0 * pi * x) * std::cos(2.0 * pi * y));
        const double s = amplitude * b;
        return SymMatrix2{omega + s, s * shear, omega + s * shear * shear};
    };
    return {entries, omega};
}

CoefficientField CoefficientField::tabulated(const Grid& grid, std::vector<SymMatrix2> cells,
                                             double omega)
{
    const auto cx = static_cast<std::size_t>(grid.counts[0] + 1);
    const auto cy = grid.dim == 2 ? static_cast<std::size_t>(grid.counts[1] + 1) : 1u;
    if (cells.size() != cx * cy)
        throw InvalidArgument("CoefficientField::tabulated: need one matrix per cell");
    const double hx = grid.spacing[0];
    const double hy = grid.spacing[1];
    const int dim = grid.dim;
    auto entries = [cells = std::move(cells), cx, cy, hx, hy, dim](double x, double y) {
        auto i = static_cast<std::size_t>(std::clamp(std::floor(x / hx), 0.0,
                                                     static_cast<double>(cx - 1)));
        std::size_t j = 0;
        if (dim == 2)
            j = static_cast<std::size_t>(std::clamp(std::floor(y / hy), 0.0,
                                                    static_cast<double>(cy - 1)));
        return cells[j * cx + i];
    };
    return {entries, omega};
}

namespace {

constexpr double ellipticity_tol = 1e-12;

void check_elliptic(const SymMatrix2& a, double omega, int dim, double x, double y)
{
    const bool finite = std::isfinite(a.a11) && std::isfinite(a.a12) && std::isfinite(a.a22);
    const double lam = dim == 1 ? a.a11 : a.min_eigenvalue();
    if (!finite || lam < omega - ellipticity_tol) {
        std::ostringstream msg;
        msg << "assemble: coefficient not elliptic at (" << x << ", " << y
            << "): smallest eigenvalue " << lam << " < omega " << omega;
        throw EllipticityError(msg.str(), x, y);
    }
}

struct Assembled {
    std::vector<Eigen::Triplet<double, int>> k;
    std::vector<Eigen::Triplet<double, int>> lap;
};

void assemble_1d(const Grid& g, const CoefficientField& c, Assembled& out,
                 std::vector<double>& mass, double& boundary_mass)
{
    const int n = g.counts[0];
    const double h = g.spacing[0];
    for (int cell = 0; cell <= n; ++cell) {
        const double xm = (cell + 0.5) * h;
        const SymMatrix2 a = c.entries(xm, 0.0);
        check_elliptic(a, c.ellipticity_lower, 1, xm, 0.0);
        // Local nodes cell-1 and cell in interior numbering; -1 and n are boundary.
        const int nodes[2] = {cell - 1, cell};
        for (int p = 0; p < 2; ++p) {
            if (nodes[p] < 0 || nodes[p] >= n) {
                boundary_mass += 0.5 * h;
                continue;
            }
            mass[static_cast<std::size_t>(nodes[p])] += 0.5 * h;
            for (int q = 0; q < 2; ++q) {
                if (nodes[q] < 0 || nodes[q] >= n)
                    continue;
                const double sign = p == q ? 1.0 : -1.0;
                out.k.emplace_back(nodes[p], nodes[q], sign * a.a11 / h);
                out.lap.emplace_back(nodes[p], nodes[q], sign / h);
            }
        }
    }
}

// Exact Q1 element stiffness for a constant symmetric A on an hx x hy cell, computed with
// 2x2 Gauss points (exact for the bilinear gradient products). Local order:
// (0,0), (1,0), (0,1), (1,1). Only the upper triangle is computed and then mirrored.
std::array<std::array<double, 4>, 4> q1_stiffness(const SymMatrix2& a, double hx, double hy)
{
    constexpr double g = 0.21132486540518711775; // (1 - 1/sqrt(3)) / 2
    const double pts[2] = {g, 1.0 - g};
    std::array<std::array<double, 4>, 4> ke{};
    for (double xi : pts) {
        for (double eta : pts) {
            const double dxi[4] = {-(1.0 - eta), (1.0 - eta), -eta, eta};
            const double deta[4] = {-(1.0 - xi), -xi, (1.0 - xi), xi};
            double gx[4], gy[4];
            for (int k = 0; k < 4; ++k) {
                gx[k] = dxi[k] / hx;
                gy[k] = deta[k] / hy;
            }
            const double w = 0.25 * hx * hy;
            for (int i = 0; i < 4; ++i)
                for (int j = i; j < 4; ++j)
                    ke[i][j] += w * (gx[i] * (a.a11 * gx[j] + a.a12 * gy[j]) +
                                     gy[i] * (a.a12 * gx[j] + a.a22 * gy[j]));
        }
    }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < i; ++j)
            ke[i][j] = ke[j][i];
    return ke;
}

void assemble_2d(const Grid& g, const CoefficientField& c, Assembled& out,
                 std::vector<double>& mass, double& boundary_mass)
{
    const int nx = g.counts[0];
    const int ny = g.counts[1];
    const double hx = g.spacing[0];
    const double hy = g.spacing[1];
    const auto lap = q1_stiffness(SymMatrix2{1.0, 0.0, 1.0}, hx, hy);
    for (int cj = 0; cj <= ny; ++cj) {
        for (int ci = 0; ci <= nx; ++ci) {
            const double xm = (ci + 0.5) * hx;
            const double ym = (cj + 0.5) * hy;
            const SymMatrix2 a = c.entries(xm, ym);
            check_elliptic(a, c.ellipticity_lower, 2, xm, ym);
            const auto ke = q1_stiffness(a, hx, hy);
            // Interior coordinates of the four corners (grid node (ci, cj) is interior
            // node (ci-1, cj-1)).
            const int ii[4] = {ci - 1, ci, ci - 1, ci};
            const int jj[4] = {cj - 1, cj - 1, cj, cj};
            int idx[4];
            for (int k = 0; k < 4; ++k) {
                const bool inside = ii[k] >= 0 && ii[k] < nx && jj[k] >= 0 && jj[k] < ny;
                idx[k] = inside ? static_cast<int>(g.index(ii[k], jj[k])) : -1;
                if (inside)
                    mass[static_cast<std::size_t>(idx[k])] += 0.25 * hx * hy;
                else
                    boundary_mass += 0.25 * hx * hy;
            }
            for (int p = 0; p < 4; ++p) {
                if (idx[p] < 0)
                    continue;
                for (int q = 0; q < 4; ++q) {
                    if (idx[q] < 0)
                        continue;
                    out.k.emplace_back(idx[p], idx[q], ke[p][q]);
                    out.lap.emplace_back(idx[p], idx[q], lap[p][q]);
                }
            }
        }
    }
}

void require_same_grid(const DiscreteOperator& op, const GridFunction& u)
{
    if (!(u.grid() == op.grid))
        throw InvalidArgument("grid mismatch between operator and grid function");
}

} // namespace

DiscreteOperator assemble(const Grid& grid, const CoefficientField& coefficient)
{
    if (!coefficient.entries)
        throw InvalidArgument("assemble: empty coefficient field");
    if (!(coefficient.ellipticity_lower > 0.0))
        throw InvalidArgument("assemble: ellipticity bound omega must be positive");
    DiscreteOperator op;
    op.grid = grid;
    op.omega = coefficient.ellipticity_lower;
    op.lumped_mass.assign(grid.size(), 0.0);
    Assembled trip;
    if (grid.dim == 1)
        assemble_1d(grid, coefficient, trip, op.lumped_mass, op.boundary_mass);
    else
        assemble_2d(grid, coefficient, trip, op.lumped_mass, op.boundary_mass);
    const auto n = static_cast<int>(grid.size());
    op.stiffness.resize(n, n);
    op.stiffness.setFromTriplets(trip.k.begin(), trip.k.end());
    op.laplacian.resize(n, n);
    op.laplacian.setFromTriplets(trip.lap.begin(), trip.lap.end());
    op.stiffness.makeCompressed();
    op.laplacian.makeCompressed();
    return op;
}

double bilinear_form(const DiscreteOperator& op, const GridFunction& u, const GridFunction& v)
{
    require_same_grid(op, u);
    require_same_grid(op, v);
    std::vector<double> ku(u.size()), kv(v.size());
    kernels::serial::matvec(op.stiffness, u.values(), ku);
    kernels::serial::matvec(op.stiffness, v.values(), kv);
    // Commutativity of + makes the result exactly symmetric in (u, v).
    return 0.5 * (kernels::serial::dot(u.values(), kv) + kernels::serial::dot(v.values(), ku));
}

double grad_norm(const DiscreteOperator& op, const GridFunction& u)
{
    require_same_grid(op, u);
    std::vector<double> lu(u.size());
    kernels::serial::matvec(op.laplacian, u.values(), lu);
    return std::sqrt(std::max(0.0, kernels::serial::dot(u.values(), lu)));
}

double lp_norm(const DiscreteOperator& op, const GridFunction& u, double q)
{
    if (!(q >= 1.0))
        throw InvalidArgument("lp_norm: exponent q must be >= 1");
    require_same_grid(op, u);
    const double s = kernels::serial::weighted_power_sum(op.lumped_mass, u.values(), q);
    return std::pow(s, 1.0 / q);
}

Eigenpair smallest_generalized_eigenpair(const SparseMatrix& k, std::span<const double> mass,
                                         double tol, int max_iter)
{
    const auto n = static_cast<Eigen::Index>(mass.size());
    Eigen::SparseMatrix<double> kc = k; // column-major for the factorisation
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(kc);
    if (llt.info() != Eigen::Success)
        throw InvalidArgument("smallest_generalized_eigenpair: stiffness not positive definite");
    Eigen::Map<const Eigen::VectorXd> m(mass.data(), n);

    // Start from a positive vector, which overlaps the positive ground state.
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
    x /= std::sqrt(x.dot(m.cwiseProduct(x)));
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd y = llt.solve(m.cwiseProduct(x));
        const double ny = std::sqrt(y.dot(m.cwiseProduct(y)));
        y /= ny;
        const double next = y.dot(kc * y); // Rayleigh quotient, y is M-normalised
        const bool done = it > 0 && std::abs(next - lambda) <= tol * std::abs(next);
        x = y;
        lambda = next;
        if (done)
            break;
    }
    if (x.sum() < 0.0)
        x = -x;
    return {lambda, std::vector<double>(x.data(), x.data() + n)};
}

double largest_generalized_eigenvalue(const SparseMatrix& k, std::span<const double> mass,
                                      double tol, int max_iter)
{
    const auto n = mass.size();
    // Symmetric form S = M^{-1/2} K M^{-1/2}; alternating start excites the top mode.
    std::vector<double> x(n), y(n), tmp(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = (i % 2 == 0 ? 1.0 : -1.0) * (1.0 + 1e-3 * static_cast<double>(i % 7));
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const double nx = std::sqrt(kernels::serial::dot(x, x));
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = x[i] / nx / std::sqrt(mass[i]);
        kernels::serial::matvec(k, tmp, y);
        for (std::size_t i = 0; i < n; ++i)
            y[i] /= std::sqrt(mass[i]);
        double rq = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            rq += y[i] * x[i] / nx;
        x.swap(y);
        if (it > 0 && std::abs(rq - lambda) <= tol * std::abs(rq)) {
            lambda = rq;
            break;
        }
        lambda = rq;
    }
    return lambda;
}

} // namespace dampwave
