#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dampwave/error.hpp"
#include "dampwave/model.hpp"
#include "dampwave/solver.hpp"

namespace dampwave {

/// Malformed or schema-violating configuration. `line` is 0 when the error is not tied
/// to a position in the text (e.g. a wrong type deep in the tree).
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::string field, int line = 0)
        : Error(what), field_(std::move(field)), line_(line) {}
    const std::string& field() const noexcept { return field_; }
    int line() const noexcept { return line_; }

private:
    std::string field_;
    int line_;
};

inline constexpr int config_schema_version = 1;

struct DomainSpec {
    int dim = 1;
    std::vector<double> lengths{1.0};
    std::vector<int> counts{64};
    bool operator==(const DomainSpec&) const = default;
};

struct CoefficientSpec {
    std::string preset = "constant"; // constant | smooth | tabulated
    double scale = 1.0;
    double omega = 1.0;
    double amplitude = 0.0;
    double shear = 0.0;
    std::vector<std::array<double, 3>> cells; // (a11, a12, a22) per cell, row-major
    bool operator==(const CoefficientSpec&) const = default;
};

struct ProfileSpec {
    std::string kind = "linear"; // linear | power | degenerate
    double scale = 1.0;
    double m = 1.0;
    bool operator==(const ProfileSpec&) const = default;
};

struct FeedbackSpec {
    std::string kind = "linear"; // linear | power | origin_degenerate
    double coefficient = 1.0;
    double m = 1.0;
    std::optional<ProfileSpec> profile; // overrides the catalog profile
    bool operator==(const FeedbackSpec&) const = default;
};

struct ScheduleSpec {
    std::string preset = "constant"; // constant | power | oscillating
    double gamma0 = 1.0;
    double scale = 1.0;
    double q = 0.0;
    double amplitude = 0.0;
    double frequency = 1.0;
    ScheduleFlags flags;
    bool operator==(const ScheduleSpec&) const = default;
};

struct InitialSpec {
    std::string shape = "eigenmode"; // eigenmode | bump | random
    // eigenmode: exactly one of the three below.
    std::optional<double> target_energy = 0.1;
    std::optional<double> target_well_fraction;
    std::optional<double> amplitude;
    // bump
    std::vector<double> center;
    double radius = 0.25;
    /// u1 = velocity * u0.
    double velocity = 0.0;
    bool operator==(const InitialSpec&) const = default;
};

struct StepperSpec {
    double dt = 1e-3;
    double t_end = 1.0;
    int record_every = 1;
    double newton_tol = 1e-12;
    int newton_max_iter = 60;
    std::string backend = "openmp"; // serial | openmp
    bool operator==(const StepperSpec&) const = default;
};

/// Overrides for the well analysis. E0 and a0 only apply to the `well` subcommand; a
/// simulation always uses the values of its initial data.
struct WellSpec {
    std::optional<double> embedding_constant;
    std::optional<double> omega;
    std::optional<double> E0;
    std::optional<double> a0;
    int starts = 20;
    int max_iter = 20000;
    bool operator==(const WellSpec&) const = default;
};

struct FitSpec {
    std::vector<std::string> kinds; // exponential | polynomial | general
    std::optional<std::pair<double, double>> window;
    bool operator==(const FitSpec&) const = default;
};

struct WeightsSpec {
    ProfileSpec profile;
    double t_max = 100.0;
    int points = 2001;
    bool operator==(const WeightsSpec&) const = default;
};

struct OutputsSpec {
    std::string energy_csv = "energy.csv";
    std::string weights_csv = "weights.csv";
    std::string report = "report.txt";
    std::string summary = "summary.json";
    bool operator==(const OutputsSpec&) const = default;
};

/// Parameter axes; the sweep runs their Cartesian product. Empty axes keep the base value.
struct SweepSpec {
    std::vector<double> m;
    std::vector<double> p;
    std::vector<ScheduleSpec> schedules;
    bool operator==(const SweepSpec&) const = default;
};

struct ExperimentConfig {
    int schema_version = config_schema_version;
    std::uint64_t seed = 20240611;
    double p = 3.0;
    DomainSpec domain;
    CoefficientSpec coefficient;
    FeedbackSpec feedback;
    ScheduleSpec schedule;
    InitialSpec initial;
    StepperSpec stepper;
    WellSpec well;
    FitSpec fit;
    WeightsSpec weights;
    OutputsSpec outputs;
    SweepSpec sweep;
    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses JSON text. Unknown keys, wrong types and a missing or different
/// schema_version raise ConfigError naming the field (and the line for syntax errors).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Canonical JSON text; parse_config(dump_config(c)) == c.
std::string dump_config(const ExperimentConfig& config);

// Builders from specs. They throw InvalidArgument for values the library rejects.
Grid make_grid(const DomainSpec& spec);
CoefficientField make_coefficient(const CoefficientSpec& spec, const Grid& grid);
OriginProfile make_profile(const ProfileSpec& spec);
Feedback make_feedback(const FeedbackSpec& spec);
DampingSchedule make_schedule(const ScheduleSpec& spec);
StepperConfig make_stepper(const StepperSpec& spec);

/// Initial displacement and velocity for the problem data in `config`. Eigenmode targets
/// are met by bisection on the amplitude along the increasing branch of E(0).
/// `embedding_constant` is needed for target_well_fraction.
std::pair<GridFunction, GridFunction> make_initial_data(const ExperimentConfig& config,
                                                        const DiscreteOperator& op,
                                                        std::optional<double> embedding_constant);

} // namespace dampwave
