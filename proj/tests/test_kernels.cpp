#include <doctest.h>

#include <cmath>
#include <random>

#include "dampwave/kernels.hpp"

using namespace dampwave;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> v(n);
    for (double& x : v)
        x = u(rng);
    return v;
}

} // namespace

TEST_CASE("serial and OpenMP kernels agree bit for bit")
{
    const double l[] = {1.0, 1.0};
    const int c[] = {70, 90};
    const auto op = assemble(build_grid(2, l, c), CoefficientField::smooth(1.0, 1.0, 0.5));
    const auto n = op.lumped_mass.size();
    const auto x = random_vector(n, 1);
    const auto y = random_vector(n, 2);

    std::vector<double> ys(n), yo(n);
    kernels::serial::matvec(op.stiffness, x, ys);
    kernels::omp::matvec(op.stiffness, x, yo);
    CHECK(ys == yo);

    CHECK(kernels::serial::dot(x, y) == kernels::omp::dot(x, y));
    CHECK(kernels::serial::weighted_square_sum(op.lumped_mass, x) ==
          kernels::omp::weighted_square_sum(op.lumped_mass, x));
    for (double q : {2.0, 3.5, 4.0, 6.0})
        CHECK(kernels::serial::weighted_power_sum(op.lumped_mass, x, q) ==
              kernels::omp::weighted_power_sum(op.lumped_mass, x, q));
    CHECK(kernels::serial::weighted_dot(op.lumped_mass, x, y) ==
          kernels::omp::weighted_dot(op.lumped_mass, x, y));
}

TEST_CASE("kernel values")
{
    const std::vector<double> w{1.0, 2.0, 0.5};
    const std::vector<double> x{1.0, -2.0, 4.0};
    const std::vector<double> y{3.0, 1.0, -1.0};
    for (auto b : {kernels::Backend::serial, kernels::Backend::openmp}) {
        CHECK(kernels::dot(b, x, y) == -3.0);
        CHECK(kernels::weighted_square_sum(b, w, x) == 17.0);
        CHECK(kernels::weighted_power_sum(b, w, x, 4.0) == 1.0 + 32.0 + 128.0);
        CHECK(kernels::weighted_power_sum(b, w, x, 3.0) == doctest::Approx(1.0 + 16.0 + 32.0));
        CHECK(kernels::weighted_dot(b, w, x, y) == 3.0 - 4.0 - 2.0);
    }
    // Empty input and exact block boundaries.
    CHECK(kernels::dot(kernels::Backend::openmp, {}, {}) == 0.0);
    const std::vector<double> ones(kernels::reduction_block * 3, 1.0);
    CHECK(kernels::dot(kernels::Backend::openmp, ones, ones) == 768.0);
}

TEST_CASE("per-node sweep reports the first failure")
{
    for (auto b : {kernels::Backend::serial, kernels::Backend::openmp}) {
        const auto ok = kernels::for_each_node(b, 5000, [](std::size_t) { return kernels::NodeStatus{}; });
        CHECK(ok.ok);
        const auto bad = kernels::for_each_node(b, 5000, [](std::size_t i) {
            kernels::NodeStatus s;
            if (i == 1234 || i == 4000) {
                s.ok = false;
                s.node = i;
                s.residual = static_cast<double>(i);
            }
            return s;
        });
        CHECK_FALSE(bad.ok);
        CHECK(bad.node == 1234);
    }
    CHECK(kernels::max_threads() >= 1);
}
