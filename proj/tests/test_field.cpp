#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "dampwave/error.hpp"
#include "dampwave/field.hpp"

using namespace dampwave;
using std::numbers::pi;

namespace {

Grid grid1(double length, int n)
{
    const double l[] = {length};
    const int c[] = {n};
    return build_grid(1, l, c);
}

Grid grid2(double lx, double ly, int nx, int ny)
{
    const double l[] = {lx, ly};
    const int c[] = {nx, ny};
    return build_grid(2, l, c);
}

double entry(const SparseMatrix& a, int i, int j)
{
    return a.coeff(i, j);
}

// Discrete Dirichlet eigenvalue of the lumped P1 / three-point operator on [0, L].
double fd_eigenvalue(double length, int n, int mode)
{
    const double h = length / (n + 1);
    const double s = std::sin(mode * pi * h / (2.0 * length));
    return 4.0 / (h * h) * s * s;
}

} // namespace

TEST_CASE("grid construction")
{
    const Grid g = grid1(1.0, 4);
    CHECK(g.size() == 4);
    CHECK(g.spacing[0] == doctest::Approx(0.2));
    CHECK(g.node(0)[0] == doctest::Approx(0.2));
    CHECK(g.node(3)[0] == doctest::Approx(0.8));

    const Grid g2 = grid2(2.0, 1.0, 3, 2);
    CHECK(g2.size() == 6);
    CHECK(g2.index(2, 1) == 5);
    CHECK(g2.node(5)[0] == doctest::Approx(1.5));
    CHECK(g2.node(5)[1] == doctest::Approx(2.0 / 3.0));

    const double bad_l[] = {-1.0};
    const int c[] = {3};
    CHECK_THROWS_AS(build_grid(1, bad_l, c), InvalidArgument);
    const double l[] = {1.0};
    const int bad_c[] = {0};
    CHECK_THROWS_AS(build_grid(1, l, bad_c), InvalidArgument);
    CHECK_THROWS_AS(build_grid(3, l, c), InvalidArgument);
}

TEST_CASE("grid function validates its values")
{
    const Grid g = grid1(1.0, 3);
    CHECK_THROWS_AS(GridFunction(g, {1.0, 2.0}), InvalidArgument);
    CHECK_THROWS_AS(GridFunction(g, {1.0, NAN, 2.0}), InvalidArgument);
    const auto f = GridFunction::sample(g, [](double x, double) { return x * x; });
    CHECK(f[1] == doctest::Approx(0.25));
}

TEST_CASE("single interior node carries half the interval")
{
    const auto op = assemble(grid1(1.0, 1), CoefficientField::constant(1.0));
    REQUIRE(op.lumped_mass.size() == 1);
    CHECK(op.lumped_mass[0] == doctest::Approx(0.5));
    CHECK(op.boundary_mass == doctest::Approx(0.5));
    CHECK(entry(op.stiffness, 0, 0) == doctest::Approx(4.0));
}

TEST_CASE("1D stiffness is the scaled three-point stencil")
{
    const double a = 2.5;
    const auto op = assemble(grid1(2.0, 9), CoefficientField::constant(a));
    const double h = 0.2;
    for (int i = 0; i < 9; ++i) {
        CHECK(entry(op.stiffness, i, i) == doctest::Approx(2.0 * a / h));
        if (i + 1 < 9)
            CHECK(entry(op.stiffness, i, i + 1) == doctest::Approx(-a / h));
        CHECK(op.lumped_mass[static_cast<std::size_t>(i)] == doctest::Approx(h));
    }
    double total = op.boundary_mass;
    for (double m : op.lumped_mass)
        total += m;
    CHECK(total == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("2D Q1 Laplacian stencil on square cells")
{
    const auto op = assemble(grid2(1.0, 1.0, 5, 5), CoefficientField::constant(1.0));
    const auto& g = op.grid;
    const int c = static_cast<int>(g.index(2, 2));
    CHECK(entry(op.stiffness, c, c) == doctest::Approx(8.0 / 3.0));
    CHECK(entry(op.stiffness, c, static_cast<int>(g.index(3, 2))) == doctest::Approx(-1.0 / 3.0));
    CHECK(entry(op.stiffness, c, static_cast<int>(g.index(2, 3))) == doctest::Approx(-1.0 / 3.0));
    CHECK(entry(op.stiffness, c, static_cast<int>(g.index(3, 3))) == doctest::Approx(-1.0 / 3.0));
    CHECK(entry(op.stiffness, c, static_cast<int>(g.index(1, 3))) == doctest::Approx(-1.0 / 3.0));
    double total = op.boundary_mass;
    for (double m : op.lumped_mass)
        total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("anisotropic coefficient keeps the stiffness symmetric positive definite")
{
    const auto op = assemble(grid2(1.0, 2.0, 7, 9), CoefficientField::smooth(0.5, 2.0, 0.7));
    const Eigen::SparseMatrix<double> k = op.stiffness;
    const Eigen::SparseMatrix<double> kt = k.transpose();
    CHECK((k - kt).norm() == doctest::Approx(0.0));
    const auto eig = smallest_generalized_eigenpair(op.stiffness, op.lumped_mass);
    CHECK(eig.value > 0.0);

    const auto u = GridFunction::sample(op.grid, [](double x, double y) { return x * y * (1 - x); });
    const auto v = GridFunction::sample(op.grid, [](double x, double y) { return std::sin(x + 3 * y); });
    CHECK(bilinear_form(op, u, v) == bilinear_form(op, v, u));
    // Coercivity a(u,u) >= omega |grad u|^2 inherited element by element.
    CHECK(bilinear_form(op, u, u) >= 0.5 * std::pow(grad_norm(op, u), 2) * (1 - 1e-12));
}

TEST_CASE("tabulated coefficient and ellipticity failures")
{
    const Grid g = grid2(1.0, 1.0, 2, 2);
    std::vector<SymMatrix2> cells(9, SymMatrix2{1.0, 0.0, 1.0});
    cells[4] = SymMatrix2{1.0, 0.9, 1.0}; // smallest eigenvalue 0.1
    CHECK_NOTHROW(assemble(g, CoefficientField::tabulated(g, cells, 0.1)));
    try {
        assemble(g, CoefficientField::tabulated(g, cells, 0.5));
        FAIL("expected an ellipticity error");
    } catch (const EllipticityError& e) {
        CHECK(e.x() == doctest::Approx(0.5));
        CHECK(e.y() == doctest::Approx(0.5));
    }
    CHECK_THROWS_AS(CoefficientField::tabulated(g, std::vector<SymMatrix2>(4), 1.0),
                    InvalidArgument);
    cells[4].a11 = NAN;
    CHECK_THROWS_AS(assemble(g, CoefficientField::tabulated(g, cells, 0.1)), EllipticityError);
}

TEST_CASE("norms of sin(pi x) converge to their integrals")
{
    const auto op = assemble(grid1(1.0, 511), CoefficientField::constant(1.0));
    const auto u = GridFunction::sample(op.grid, [](double x, double) { return std::sin(pi * x); });
    // Integrals: |grad u|^2 = pi^2/2, |u|_2^2 = 1/2, |u|_4^4 = 3/8.
    CHECK(std::pow(grad_norm(op, u), 2) == doctest::Approx(pi * pi / 2).epsilon(1e-5));
    CHECK(std::pow(lp_norm(op, u, 2.0), 2) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(std::pow(lp_norm(op, u, 4.0), 4) == doctest::Approx(0.375).epsilon(1e-10));
    CHECK_THROWS_AS(lp_norm(op, u, 0.5), InvalidArgument);

    const auto other = assemble(grid1(1.0, 10), CoefficientField::constant(1.0));
    CHECK_THROWS_AS(grad_norm(other, u), InvalidArgument);
}

TEST_CASE("generalised eigenvalues match the discrete sine spectrum")
{
    const auto op1 = assemble(grid1(1.0, 256), CoefficientField::constant(1.0));
    const auto e1 = smallest_generalized_eigenpair(op1.stiffness, op1.lumped_mass);
    CHECK(e1.value == doctest::Approx(fd_eigenvalue(1.0, 256, 1)).epsilon(1e-11));
    CHECK(std::abs(e1.value - pi * pi) < 1e-3);
    double mnorm = 0.0;
    for (std::size_t i = 0; i < e1.vector.size(); ++i)
        mnorm += op1.lumped_mass[i] * e1.vector[i] * e1.vector[i];
    CHECK(mnorm == doctest::Approx(1.0));
    CHECK(e1.vector[128] > 0.0);

    const double top = largest_generalized_eigenvalue(op1.stiffness, op1.lumped_mass);
    CHECK(top == doctest::Approx(fd_eigenvalue(1.0, 256, 256)).epsilon(1e-6));

    // The Q1 stencil is a sum of tensor products of 1D stencils, so the sampled
    // sin(pi x) sin(pi y) is an exact eigenvector and its Rayleigh quotient the eigenvalue.
    const int n = 31;
    const auto op2 = assemble(grid2(1.0, 1.0, n, n), CoefficientField::constant(1.0));
    const auto e2 = smallest_generalized_eigenpair(op2.stiffness, op2.lumped_mass);
    const auto mode = GridFunction::sample(op2.grid, [](double x, double y) {
        return std::sin(pi * x) * std::sin(pi * y);
    });
    const double rq = bilinear_form(op2, mode, mode) / std::pow(lp_norm(op2, mode, 2.0), 2);
    CHECK(e2.value == doctest::Approx(rq).epsilon(1e-11));
    CHECK(std::abs(e2.value - 2 * pi * pi) < 0.05);
}

TEST_CASE("small worked examples")
{
    CHECK(grid1(1.0, 3).spacing[0] == 0.25);
    const Grid g2 = grid2(1.0, 1.0, 4, 4);
    CHECK(g2.spacing[0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(g2.spacing[1] == doctest::Approx(0.2).epsilon(1e-15));
    for (int n : {1, 3, 7, 100})
        CHECK(grid1(1.0, n).spacing[0] * (n + 1) == doctest::Approx(1.0).epsilon(1e-15));

    const auto op = assemble(grid1(1.0, 1), CoefficientField::constant(2.0));
    CHECK(entry(op.stiffness, 0, 0) == doctest::Approx(8.0));

    const auto op1 = assemble(grid1(1.0, 1), CoefficientField::constant(1.0));
    const GridFunction one(op1.grid, {1.0});
    const GridFunction zero(op1.grid);
    CHECK(bilinear_form(op1, one, one) == doctest::Approx(4.0));
    CHECK(bilinear_form(op1, one, zero) == 0.0);
    CHECK(lp_norm(op1, one, 2.0) == doctest::Approx(std::sqrt(0.5)));
    for (double q : {1.0, 2.0, 3.5})
        CHECK(lp_norm(op1, zero, q) == 0.0);
}

TEST_CASE("a(u,u) equals the gradient norm for A = I and is coercive otherwise")
{
    const Grid g = grid1(1.0, 32);
    const auto op = assemble(g, CoefficientField::constant(1.0));
    const auto u = GridFunction::sample(g, [](double x, double) {
        return std::sin(7.0 * x) + x * x * std::cos(31.0 * x);
    });
    CHECK(bilinear_form(op, u, u) == doctest::Approx(std::pow(grad_norm(op, u), 2)).epsilon(1e-14));
    const auto op3 = assemble(g, CoefficientField::constant(3.0));
    CHECK(bilinear_form(op3, u, u) >= 3.0 * std::pow(grad_norm(op3, u), 2) * (1.0 - 1e-14));
}

TEST_CASE("16x16 Dirichlet eigenvalue is within 2% of 2 pi^2")
{
    const auto op = assemble(grid2(1.0, 1.0, 16, 16), CoefficientField::constant(1.0));
    const auto e = smallest_generalized_eigenpair(op.stiffness, op.lumped_mass);
    CHECK(std::abs(e.value - 2 * pi * pi) / (2 * pi * pi) < 0.02);
}
