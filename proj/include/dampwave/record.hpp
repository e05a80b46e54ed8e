#pragma once

#include <cstddef>
#include <vector>

namespace dampwave {

/// Energy time series of one simulation. Index i is the i-th recorded step.
struct EnergyRecord {
    double p = 3.0;
    std::vector<double> times;
    std::vector<double> quadratic;              // 1/2 |u_t|^2 + 1/2 a(u,u)
    std::vector<double> total;                  // quadratic - source_norm / (p+1)
    std::vector<double> dissipation_cumulative; // int_0^t int gamma g(u_t) u_t
    std::vector<double> bilinear;               // a(u,u)
    std::vector<double> source_norm;            // |u|_{p+1}^{p+1}
    std::vector<double> identity_residual;      // |total + dissipation - total[0]|
    /// Set when the run stopped on a blow-up signal; the record is partial.
    bool blew_up = false;
    double blowup_time = 0.0;

    std::size_t size() const noexcept { return times.size(); }
    bool operator==(const EnergyRecord&) const = default;
};

} // namespace dampwave
