#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dampwave/config.hpp"
#include "dampwave/decay.hpp"
#include "dampwave/model.hpp"
#include "dampwave/well.hpp"

namespace dampwave {

enum class ExitCode : int { ok = 0, parse = 2, validation = 3, blowup = 4, internal = 5 };

inline constexpr const char* energy_csv_header =
    "t,E_total,E_quadratic,a_uu,source_norm,dissipation_cum,identity_residual";
inline constexpr const char* sweep_manifest_header =
    "m,fitted_exponent,theory_b413,theory_190,dominance_ratio,r2";

struct EnergySummary {
    double E0 = 0.0;
    double E_final = 0.0;
    double t_final = 0.0;
    double max_identity_residual = 0.0;
    /// Steps with E(t_{i+1}) > E(t_i) + 1e-8.
    std::size_t monotonicity_violations = 0;
    std::size_t samples = 0;
    bool blew_up = false;
    double blowup_time = 0.0;
};

struct FitEntry {
    std::string kind;
    std::optional<FitResult> result;
    std::string error; // set when the fit could not be made
};

struct FileEntry {
    std::string path; // relative to the output directory
    std::uint64_t fnv1a = 0;
    std::uintmax_t bytes = 0;
};

struct RunReport {
    std::string command;
    ExitCode exit_code = ExitCode::ok;
    std::vector<std::string> errors;
    std::vector<AssumptionCheck> validation;
    std::optional<EmbeddingEstimate> embedding;
    std::optional<WellAnalysis> well;
    std::optional<TrajectoryCheck> trajectory;
    std::optional<EnergySummary> energy;
    std::vector<FitEntry> fits;
    /// Weights runs only.
    std::optional<double> tail_integral;
    std::vector<FileEntry> files;
};

/// 64-bit FNV-1a of a byte string.
std::uint64_t fnv1a(const std::string& bytes);

void write_energy_csv(const EnergyRecord& record, std::ostream& out);
/// Inverse of write_energy_csv. Throws ConfigError (field = the file name, line set) on a
/// wrong header or malformed row.
EnergyRecord read_energy_csv(std::istream& in, double p, const std::string& name = "energy");

EnergySummary summarize(const EnergyRecord& record);

/// Envelope kinds fitted when the config lists none: the one the feedback profile
/// suggests (linear -> exponential, power with m > 1 -> polynomial, else general).
std::vector<std::string> default_fit_kinds(const ExperimentConfig& config);

/// Problem assembly shared by the subcommands. Throws InvalidArgument/EllipticityError.
struct Setup {
    DiscreteOperator op;
    Feedback feedback;
    DampingSchedule schedule;
};
Setup build_setup(const ExperimentConfig& config);

/// E(0) for the given initial data: 1/2 |u1|_M^2 + 1/2 a(u0,u0) - |u0|_{p+1}^{p+1}/(p+1).
double initial_energy(const DiscreteOperator& op, double p, const GridFunction& u0,
                      const GridFunction& u1);

// Subcommands. Each writes its outputs plus report.txt/summary.json into `out_dir`
// (created if needed) and never throws for expected failures; the exit code and
// messages are in the report. Unexpected exceptions propagate.
RunReport run_simulate(const ExperimentConfig& config, const std::filesystem::path& out_dir);
RunReport run_well(const ExperimentConfig& config, const std::filesystem::path& out_dir);
RunReport run_weights(const ExperimentConfig& config, const std::filesystem::path& out_dir);
RunReport run_fit(const ExperimentConfig& config, const std::filesystem::path& energy_csv,
                  const std::filesystem::path& out_dir);

struct SweepCell {
    std::size_t index = 0;
    std::string directory;
    double m = 1.0;
    double p = 3.0;
    ScheduleSpec schedule;
    ExitCode exit_code = ExitCode::ok;
    std::optional<FitResult> fit; // polynomial fit feeding the manifest
    std::string error;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    ExitCode exit_code = ExitCode::ok;
};

/// Runs the Cartesian product of the sweep axes, one directory cell_NNN per combination,
/// on up to `workers` threads. Writes manifest.csv and cells.csv once all cells finished.
SweepResult run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                      int workers);

void write_report_text(const RunReport& report, std::ostream& out);
std::string summary_json(const RunReport& report);

} // namespace dampwave
