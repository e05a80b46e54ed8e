#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

namespace dampwave {

/// Uniform tensor grid of interior nodes on [0,Lx] or [0,Lx]x[0,Ly] with homogeneous
/// Dirichlet data. Boundary nodes are implicit and never stored.
struct Grid {
    int dim = 1;
    std::array<double, 2> lengths{1.0, 1.0};
    std::array<int, 2> counts{1, 1};
    std::array<double, 2> spacing{0.5, 1.0};

    std::size_t size() const noexcept
    {
        return dim == 1 ? static_cast<std::size_t>(counts[0])
                        : static_cast<std::size_t>(counts[0]) * static_cast<std::size_t>(counts[1]);
    }
    double measure() const noexcept { return dim == 1 ? lengths[0] : lengths[0] * lengths[1]; }

    /// Linear index of interior node (i, j), 0-based, x fastest.
    std::size_t index(int i, int j = 0) const noexcept
    {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(counts[0]) +
               static_cast<std::size_t>(i);
    }
    /// Coordinates of interior node with linear index k.
    std::array<double, 2> node(std::size_t k) const noexcept;

    bool operator==(const Grid&) const = default;
};

/// Throws InvalidArgument on nonpositive lengths or counts, or dim outside {1,2}.
Grid build_grid(int dim, std::span<const double> lengths, std::span<const int> counts);

/// Nodal values at the interior nodes of a grid.
class GridFunction {
public:
    GridFunction() = default;
    /// Zero function on `grid`.
    explicit GridFunction(const Grid& grid);
    /// Rejects wrong lengths and non-finite entries.
    GridFunction(const Grid& grid, std::vector<double> values);

    /// Samples `f(x, y)` at the interior nodes.
    static GridFunction sample(const Grid& grid,
                               const std::function<double(double, double)>& f);

    const Grid& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    bool operator==(const GridFunction&) const = default;

private:
    Grid grid_;
    std::vector<double> values_;
};

/// Symmetric 2x2 matrix (a11, a12 = a21, a22). In 1D only a11 is used.
struct SymMatrix2 {
    double a11 = 1.0;
    double a12 = 0.0;
    double a22 = 1.0;

    double min_eigenvalue() const noexcept;
};

/// Diffusion coefficient A(x) with its declared ellipticity bound omega.
struct CoefficientField {
    std::function<SymMatrix2(double, double)> entries;
    double ellipticity_lower = 1.0;

    /// A = scale * I.
    static CoefficientField constant(double scale);
    /// A = omega*I + PSD perturbation built from smooth bumps; ellipticity exactly omega.
    static CoefficientField smooth(double omega, double amplitude, double shear);
    /// One matrix per cell, row-major cell order ((n+1) or (nx+1)(ny+1) cells).
    static CoefficientField tabulated(const Grid& grid, std::vector<SymMatrix2> cells,
                                      double omega);
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

/// Stiffness of a(u,v) = integral of A grad u . grad v over bilinear (Q1) or linear (P1)
/// elements, with the diagonal lumped mass and the A = I stiffness used for gradient norms.
struct DiscreteOperator {
    Grid grid;
    SparseMatrix stiffness;
    SparseMatrix laplacian;
    std::vector<double> lumped_mass;
    /// Mass carried by the (eliminated) boundary nodes; interior + boundary = |Omega|.
    double boundary_mass = 0.0;
    double omega = 1.0;
};

/// Per-cell midpoint sample of A, exact integration of the element stiffness.
/// Throws EllipticityError naming the first midpoint whose smallest eigenvalue is
/// below omega - 1e-12, or where the supplied matrix is not finite.
DiscreteOperator assemble(const Grid& grid, const CoefficientField& coefficient);

/// u^T K v, evaluated symmetrically so that a(u,v) == a(v,u) bit for bit.
double bilinear_form(const DiscreteOperator& op, const GridFunction& u, const GridFunction& v);
/// sqrt(u^T K_I u), the discrete ||grad u||_2.
double grad_norm(const DiscreteOperator& op, const GridFunction& u);
/// (sum_i M_i |u_i|^q)^(1/q) with lumped quadrature weights. Requires q >= 1.
double lp_norm(const DiscreteOperator& op, const GridFunction& u, double q);

struct Eigenpair {
    double value;
    std::vector<double> vector; // mass-normalised, positive first entry sum
};

/// Smallest eigenpair of K x = lambda M x by inverse iteration (M is the lumped mass).
Eigenpair smallest_generalized_eigenpair(const SparseMatrix& k, std::span<const double> mass,
                                         double tol = 1e-13, int max_iter = 10000);
/// Largest eigenvalue of M^{-1} K by power iteration.
double largest_generalized_eigenvalue(const SparseMatrix& k, std::span<const double> mass,
                                      double tol = 1e-10, int max_iter = 20000);

} // namespace dampwave
