#pragma once

#include <cstddef>
#include <span>

#include "dampwave/field.hpp"

// Data-parallel inner loops of the time stepper. Every kernel has a serial reference
// implementation and an OpenMP one. Reductions are split into fixed-size blocks whose
// partial sums are combined in block order, so both variants give identical bits for
// any thread count.
namespace dampwave::kernels {

inline constexpr std::size_t reduction_block = 256;

enum class Backend { serial, openmp };

/// Outcome of a sweep of independent per-node solves; reports the worst failure.
struct NodeStatus {
    bool ok = true;
    std::size_t node = 0;
    double residual = 0.0;
};

/// Runs `solve(i) -> NodeStatus` for every node i < n. Nodes are independent, so the
/// OpenMP variant only changes the schedule, never the values.
template <typename Solve>
NodeStatus for_each_node(Backend backend, std::size_t n, Solve&& solve)
{
    NodeStatus worst;
    const auto count = static_cast<std::ptrdiff_t>(n);
    if (backend == Backend::serial) {
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            NodeStatus s = solve(static_cast<std::size_t>(i));
            if (!s.ok && worst.ok)
                worst = s;
        }
        return worst;
    }
    bool failed = false;
#pragma omp parallel for schedule(static) reduction(|| : failed) if (count >= 512)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        if (!solve(static_cast<std::size_t>(i)).ok)
            failed = true;
    }
    if (!failed)
        return worst;
    // Re-run serially to report the first failing node deterministically.
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        NodeStatus s = solve(static_cast<std::size_t>(i));
        if (!s.ok)
            return s;
    }
    return worst;
}

namespace serial {

void matvec(const SparseMatrix& a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> x, std::span<const double> y);
/// sum_i w_i x_i^2
double weighted_square_sum(std::span<const double> w, std::span<const double> x);
/// sum_i w_i |x_i|^q
double weighted_power_sum(std::span<const double> w, std::span<const double> x, double q);
/// sum_i w_i x_i y_i
double weighted_dot(std::span<const double> w, std::span<const double> x,
                    std::span<const double> y);

} // namespace serial

namespace omp {

void matvec(const SparseMatrix& a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> x, std::span<const double> y);
double weighted_square_sum(std::span<const double> w, std::span<const double> x);
double weighted_power_sum(std::span<const double> w, std::span<const double> x, double q);
double weighted_dot(std::span<const double> w, std::span<const double> x,
                    std::span<const double> y);

} // namespace omp

/// Backend-dispatching wrappers.
void matvec(Backend b, const SparseMatrix& a, std::span<const double> x, std::span<double> y);
double dot(Backend b, std::span<const double> x, std::span<const double> y);
double weighted_square_sum(Backend b, std::span<const double> w, std::span<const double> x);
double weighted_power_sum(Backend b, std::span<const double> w, std::span<const double> x,
                          double q);
double weighted_dot(Backend b, std::span<const double> w, std::span<const double> x,
                    std::span<const double> y);

/// Number of OpenMP threads the parallel backend will use (1 without OpenMP).
int max_threads() noexcept;

} // namespace dampwave::kernels
