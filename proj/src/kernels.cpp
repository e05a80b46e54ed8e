#include "dampwave/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dampwave::kernels {

namespace {

// Below this many rows the OpenMP variants run on one thread; fork/join would dominate.
constexpr std::ptrdiff_t parallel_threshold = 2048;

std::size_t block_count(std::size_t n)
{
    return (n + reduction_block - 1) / reduction_block;
}

double sum_blocks(const std::vector<double>& partial)
{
    double s = 0.0;
    for (double p : partial)
        s += p;
    return s;
}

template <typename Term>
double blocked_sum_serial(std::size_t n, Term&& term)
{
    std::vector<double> partial(block_count(n), 0.0);
    for (std::size_t b = 0; b < partial.size(); ++b) {
        const std::size_t end = std::min(n, (b + 1) * reduction_block);
        double s = 0.0;
        for (std::size_t i = b * reduction_block; i < end; ++i)
            s += term(i);
        partial[b] = s;
    }
    return sum_blocks(partial);
}

template <typename Term>
double blocked_sum_omp(std::size_t n, Term&& term)
{
    std::vector<double> partial(block_count(n), 0.0);
    const auto nb = static_cast<std::ptrdiff_t>(partial.size());
#pragma omp parallel for schedule(static) if (static_cast<std::ptrdiff_t>(n) >= parallel_threshold)
    for (std::ptrdiff_t b = 0; b < nb; ++b) {
        const auto ub = static_cast<std::size_t>(b);
        const std::size_t end = std::min(n, (ub + 1) * reduction_block);
        double s = 0.0;
        for (std::size_t i = ub * reduction_block; i < end; ++i)
            s += term(i);
        partial[ub] = s;
    }
    return sum_blocks(partial);
}

inline double abs_pow(double x, double q)
{
    const double a = std::abs(x);
    if (q == 2.0)
        return a * a;
    if (q == 4.0)
        return (a * a) * (a * a);
    return std::pow(a, q);
}

} // namespace

namespace serial {

void matvec(const SparseMatrix& a, std::span<const double> x, std::span<double> y)
{
    const int* outer = a.outerIndexPtr();
    const int* inner = a.innerIndexPtr();
    const double* val = a.valuePtr();
    const auto rows = static_cast<std::size_t>(a.rows());
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int k = outer[r]; k < outer[r + 1]; ++k)
            s += val[k] * x[static_cast<std::size_t>(inner[k])];
        y[r] = s;
    }
}

double dot(std::span<const double> x, std::span<const double> y)
{
    return blocked_sum_serial(x.size(), [&](std::size_t i) { return x[i] * y[i]; });
}

double weighted_square_sum(std::span<const double> w, std::span<const double> x)
{
    return blocked_sum_serial(x.size(), [&](std::size_t i) { return w[i] * x[i] * x[i]; });
}

double weighted_power_sum(std::span<const double> w, std::span<const double> x, double q)
{
    return blocked_sum_serial(x.size(), [&](std::size_t i) { return w[i] * abs_pow(x[i], q); });
}

double weighted_dot(std::span<const double> w, std::span<const double> x,
                    std::span<const double> y)
{
    return blocked_sum_serial(x.size(), [&](std::size_t i) { return w[i] * x[i] * y[i]; });
}

} // namespace serial

namespace omp {

void matvec(const SparseMatrix& a, std::span<const double> x, std::span<double> y)
{
    const int* outer = a.outerIndexPtr();
    const int* inner = a.innerIndexPtr();
    const double* val = a.valuePtr();
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static) if (rows >= parallel_threshold)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int k = outer[r]; k < outer[r + 1]; ++k)
            s += val[k] * x[static_cast<std::size_t>(inner[k])];
        y[static_cast<std::size_t>(r)] = s;
    }
}

double dot(std::span<const double> x, std::span<const double> y)
{
    return blocked_sum_omp(x.size(), [&](std::size_t i) { return x[i] * y[i]; });
}

double weighted_square_sum(std::span<const double> w, std::span<const double> x)
{
    return blocked_sum_omp(x.size(), [&](std::size_t i) { return w[i] * x[i] * x[i]; });
}

double weighted_power_sum(std::span<const double> w, std::span<const double> x, double q)
{
    return blocked_sum_omp(x.size(), [&](std::size_t i) { return w[i] * abs_pow(x[i], q); });
}

double weighted_dot(std::span<const double> w, std::span<const double> x,
                    std::span<const double> y)
{
    return blocked_sum_omp(x.size(), [&](std::size_t i) { return w[i] * x[i] * y[i]; });
}

} // namespace omp

void matvec(Backend b, const SparseMatrix& a, std::span<const double> x, std::span<double> y)
{
    b == Backend::serial ? serial::matvec(a, x, y) : omp::matvec(a, x, y);
}

double dot(Backend b, std::span<const double> x, std::span<const double> y)
{
    return b == Backend::serial ? serial::dot(x, y) : omp::dot(x, y);
}

double weighted_square_sum(Backend b, std::span<const double> w, std::span<const double> x)
{
    return b == Backend::serial ? serial::weighted_square_sum(w, x)
                                : omp::weighted_square_sum(w, x);
}

double weighted_power_sum(Backend b, std::span<const double> w, std::span<const double> x,
                          double q)
{
    return b == Backend::serial ? serial::weighted_power_sum(w, x, q)
                                : omp::weighted_power_sum(w, x, q);
}

double weighted_dot(Backend b, std::span<const double> w, std::span<const double> x,
                    std::span<const double> y)
{
    return b == Backend::serial ? serial::weighted_dot(w, x, y) : omp::weighted_dot(w, x, y);
}

int max_threads() noexcept
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace dampwave::kernels
