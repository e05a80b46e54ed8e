#include "dampwave/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dampwave/csv.hpp"
#include "dampwave/solver.hpp"

namespace dampwave {

namespace fs = std::filesystem;

namespace {

using json = nlohmann::ordered_json;

constexpr double monotonicity_slack = 1e-8;

DecayEnvelope::Kind parse_kind(const std::string& s)
{
    if (s == "exponential")
        return DecayEnvelope::Kind::exponential;
    if (s == "polynomial")
        return DecayEnvelope::Kind::polynomial;
    if (s == "general")
        return DecayEnvelope::Kind::general;
    throw InvalidArgument("unknown envelope kind '" + s + "'");
}

std::string hex64(std::uint64_t x)
{
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << x;
    return ss.str();
}

// Writes `content` to out_dir/name and records it in the manifest.
void emit(RunReport& report, const fs::path& out_dir, const std::string& name,
          const std::string& content)
{
    std::ofstream f(out_dir / name, std::ios::binary);
    if (!f)
        throw Error("cannot write " + (out_dir / name).string());
    f << content;
    f.close();
    report.files.push_back({name, fnv1a(content), content.size()});
}

void finish(RunReport& report, const ExperimentConfig& config, const fs::path& out_dir)
{
    // The summary lists every file emitted before it, including the text report.
    std::ostringstream txt;
    write_report_text(report, txt);
    emit(report, out_dir, config.outputs.report, txt.str());
    const std::string summary = summary_json(report);
    std::ofstream(out_dir / config.outputs.summary, std::ios::binary) << summary;
}

void fail(RunReport& report, ExitCode code, const std::string& message)
{
    if (report.exit_code == ExitCode::ok)
        report.exit_code = code;
    report.errors.push_back(message);
}

std::optional<double> well_p_ok(double p)
{
    return p > 1.0 && p <= 5.0 ? std::optional<double>(p) : std::nullopt;
}

// Embedding constant from the override or the discrete estimate.
double embedding_constant(RunReport& report, const ExperimentConfig& config,
                          const DiscreteOperator& op)
{
    if (config.well.embedding_constant)
        return *config.well.embedding_constant;
    EmbeddingOptions opt;
    opt.seed = config.seed;
    opt.starts = config.well.starts;
    opt.max_iter = config.well.max_iter;
    report.embedding = estimate_embedding(op, config.p, opt);
    return report.embedding->M;
}

// E0 and a0 come from the initial data. The well subcommand may override them; a simulation
// may not, since its trajectory is checked against the resulting s2 and C0.
WellAnalysis analyse_well(const ExperimentConfig& config, const DiscreteOperator& op, double M,
                          double E0, double a0, bool allow_state_overrides)
{
    WellInputs in{config.well.omega.value_or(op.omega), M, config.p, E0, a0};
    if (allow_state_overrides) {
        in.E0 = config.well.E0.value_or(E0);
        in.a0 = config.well.a0.value_or(a0);
    }
    return global_existence_verdict(in);
}

std::vector<FitEntry> run_fits(const ExperimentConfig& config, const EnergyRecord& record,
                               const Setup& setup)
{
    std::vector<FitEntry> out;
    auto kinds = config.fit.kinds.empty() ? default_fit_kinds(config) : config.fit.kinds;
    for (const auto& k : kinds) {
        FitEntry e{k, std::nullopt, {}};
        try {
            e.result = fit_rate(record, parse_kind(k), setup.schedule, setup.feedback.profile(),
                                config.fit.window);
        } catch (const Error& err) {
            e.error = err.what();
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::string num(double x)
{
    return format_double(x);
}

json json_number(double x)
{
    // JSON has no infinities; spell them out.
    if (std::isfinite(x))
        return x;
    return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

} // namespace

std::uint64_t fnv1a(const std::string& bytes)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// ---------------------------------------------------------------- CSV

void write_energy_csv(const EnergyRecord& r, std::ostream& out)
{
    out << energy_csv_header << '\n';
    for (std::size_t i = 0; i < r.size(); ++i) {
        out << format_double(r.times[i]) << ',' << format_double(r.total[i]) << ','
            << format_double(r.quadratic[i]) << ',' << format_double(r.bilinear[i]) << ','
            << format_double(r.source_norm[i]) << ',' << format_double(r.dissipation_cumulative[i])
            << ',' << format_double(r.identity_residual[i]) << '\n';
    }
}

EnergyRecord read_energy_csv(std::istream& in, double p, const std::string& name)
{
    EnergyRecord r;
    r.p = p;
    std::string line;
    if (!std::getline(in, line) || line != energy_csv_header)
        throw ConfigError("expected header " + std::string(energy_csv_header), name, 1);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        double v[7];
        const char* b = line.data();
        const char* e = b + line.size();
        for (int k = 0; k < 7; ++k) {
            auto res = std::from_chars(b, e, v[k]);
            if (res.ec != std::errc{})
                throw ConfigError("malformed number in column " + std::to_string(k + 1), name,
                                  lineno);
            b = res.ptr;
            if (k < 6) {
                if (b == e || *b != ',')
                    throw ConfigError("expected 7 columns", name, lineno);
                ++b;
            }
        }
        if (b != e)
            throw ConfigError("trailing characters", name, lineno);
        r.times.push_back(v[0]);
        r.total.push_back(v[1]);
        r.quadratic.push_back(v[2]);
        r.bilinear.push_back(v[3]);
        r.source_norm.push_back(v[4]);
        r.dissipation_cumulative.push_back(v[5]);
        r.identity_residual.push_back(v[6]);
    }
    return r;
}

EnergySummary summarize(const EnergyRecord& r)
{
    EnergySummary s;
    s.samples = r.size();
    s.blew_up = r.blew_up;
    s.blowup_time = r.blowup_time;
    if (r.size() == 0)
        return s;
    s.E0 = r.total.front();
    s.E_final = r.total.back();
    s.t_final = r.times.back();
    for (std::size_t i = 0; i < r.size(); ++i) {
        s.max_identity_residual = std::max(s.max_identity_residual, r.identity_residual[i]);
        if (i + 1 < r.size() && r.total[i + 1] > r.total[i] + monotonicity_slack)
            ++s.monotonicity_violations;
    }
    return s;
}

std::vector<std::string> default_fit_kinds(const ExperimentConfig& config)
{
    const Feedback g = make_feedback(config.feedback);
    switch (g.profile().kind()) {
    case OriginProfile::Kind::linear:
        return {"exponential"};
    case OriginProfile::Kind::power:
        return {g.m() > 1.0 ? "polynomial" : "exponential"};
    case OriginProfile::Kind::degenerate:
        break;
    }
    return {"general"};
}

Setup build_setup(const ExperimentConfig& config)
{
    const Grid grid = make_grid(config.domain);
    return Setup{assemble(grid, make_coefficient(config.coefficient, grid)),
                 make_feedback(config.feedback), make_schedule(config.schedule)};
}

double initial_energy(const DiscreteOperator& op, double p, const GridFunction& u0,
                      const GridFunction& u1)
{
    double kinetic = 0.0, source = 0.0;
    for (std::size_t i = 0; i < u0.size(); ++i) {
        kinetic += op.lumped_mass[i] * u1[i] * u1[i];
        source += op.lumped_mass[i] * std::pow(std::abs(u0[i]), p + 1.0);
    }
    return 0.5 * kinetic + 0.5 * bilinear_form(op, u0, u0) - source / (p + 1.0);
}

// ---------------------------------------------------------------- subcommands

RunReport run_simulate(const ExperimentConfig& config, const fs::path& out_dir)
{
    RunReport report;
    report.command = "simulate";
    fs::create_directories(out_dir);

    std::optional<Setup> setup;
    std::optional<Problem> problem;
    std::optional<double> M;
    try {
        setup = build_setup(config);
        if (well_p_ok(config.p))
            M = embedding_constant(report, config, setup->op);
        auto [u0, u1] = make_initial_data(config, setup->op, M);
        problem.emplace(setup->op, setup->feedback, setup->schedule, config.p, std::move(u0),
                        std::move(u1));
        const ValidationReport v = validate(*problem);
        report.validation = v.checks;
        for (const auto& c : v.checks)
            if (c.fatal && !c.passed)
                fail(report, ExitCode::validation, "assumption " + c.name + " failed: " + c.detail);
        if (report.exit_code == ExitCode::ok) {
            if (M)
                report.well = analyse_well(config, setup->op, *M,
                                           initial_energy(setup->op, config.p, problem->u0, problem->u1),
                                           bilinear_form(setup->op, problem->u0, problem->u0),
                                           false);
            check_cfl(*problem, make_stepper(config.stepper));
        }
    } catch (const InvalidArgument& e) {
        fail(report, ExitCode::validation, e.what());
    } catch (const EllipticityError& e) {
        fail(report, ExitCode::validation, e.what());
    } catch (const ConvergenceError& e) {
        fail(report, ExitCode::validation, e.what());
    }
    if (report.exit_code != ExitCode::ok) {
        finish(report, config, out_dir);
        return report;
    }

    SimulationResult sim;
    try {
        sim = simulate_full(*problem, make_stepper(config.stepper));
    } catch (const DampingSolveError& e) {
        fail(report, ExitCode::internal, e.what());
        finish(report, config, out_dir);
        return report;
    }
    std::ostringstream csv;
    write_energy_csv(sim.record, csv);
    emit(report, out_dir, config.outputs.energy_csv, csv.str());
    report.energy = summarize(sim.record);

    if (sim.record.blew_up) {
        fail(report, ExitCode::blowup,
             "blow-up at t = " + num(sim.record.blowup_time) + "; outputs are partial");
    } else {
        if (report.well && report.well->verdict == WellAnalysis::Verdict::global)
            report.trajectory = check_trajectory(*report.well, sim.record);
        report.fits = run_fits(config, sim.record, *setup);
    }
    finish(report, config, out_dir);
    return report;
}

RunReport run_well(const ExperimentConfig& config, const fs::path& out_dir)
{
    RunReport report;
    report.command = "well";
    fs::create_directories(out_dir);
    try {
        if (!well_p_ok(config.p))
            throw InvalidArgument("well analysis needs 1 < p <= 5 (p = " + num(config.p) + ")");
        const Setup setup = build_setup(config);
        const double M = embedding_constant(report, config, setup.op);
        double E0 = 0.0, a0 = 0.0;
        if (!config.well.E0 || !config.well.a0) {
            auto [u0, u1] = make_initial_data(config, setup.op, M);
            E0 = initial_energy(setup.op, config.p, u0, u1);
            a0 = bilinear_form(setup.op, u0, u0);
        }
        report.well = analyse_well(config, setup.op, M, E0, a0, true);
    } catch (const InvalidArgument& e) {
        fail(report, ExitCode::validation, e.what());
    } catch (const EllipticityError& e) {
        fail(report, ExitCode::validation, e.what());
    } catch (const ConvergenceError& e) {
        fail(report, ExitCode::validation, e.what());
    }
    finish(report, config, out_dir);
    return report;
}

RunReport run_weights(const ExperimentConfig& config, const fs::path& out_dir)
{
    RunReport report;
    report.command = "weights";
    fs::create_directories(out_dir);
    try {
        const OriginProfile profile = make_profile(config.weights.profile);
        if (const std::string bad = profile.check(); !bad.empty())
            throw InvalidArgument("invalid origin profile: " + bad);
        const WeightTable table = build_weights(profile, config.weights.t_max, config.weights.points);
        std::ostringstream csv;
        write_weights_csv(table, csv);
        emit(report, out_dir, config.outputs.weights_csv, csv.str());
        report.tail_integral = table.tail_integral;
    } catch (const InvalidArgument& e) {
        fail(report, ExitCode::validation, e.what());
    }
    finish(report, config, out_dir);
    return report;
}

RunReport run_fit(const ExperimentConfig& config, const fs::path& energy_csv,
                  const fs::path& out_dir)
{
    RunReport report;
    report.command = "fit";
    std::ifstream in(energy_csv, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read " + energy_csv.string(), energy_csv.string());
    const EnergyRecord record = read_energy_csv(in, config.p, energy_csv.string());
    fs::create_directories(out_dir);
    report.energy = summarize(record);
    try {
        report.fits = run_fits(config, record, build_setup(config));
    } catch (const InvalidArgument& e) {
        fail(report, ExitCode::validation, e.what());
    }
    finish(report, config, out_dir);
    return report;
}

// ---------------------------------------------------------------- sweep

SweepResult run_sweep(const ExperimentConfig& config, const fs::path& out_dir, int workers)
{
    const auto& sw = config.sweep;
    const std::vector<double> ms = sw.m.empty() ? std::vector<double>{config.feedback.m} : sw.m;
    const std::vector<double> ps = sw.p.empty() ? std::vector<double>{config.p} : sw.p;
    const std::vector<ScheduleSpec> ss =
        sw.schedules.empty() ? std::vector<ScheduleSpec>{config.schedule} : sw.schedules;

    SweepResult result;
    for (double m : ms)
        for (double p : ps)
            for (const auto& s : ss) {
                SweepCell c;
                c.index = result.cells.size();
                std::ostringstream name;
                name << "cell_" << std::setw(3) << std::setfill('0') << c.index;
                c.directory = name.str();
                c.m = m;
                c.p = p;
                c.schedule = s;
                result.cells.push_back(std::move(c));
            }

    fs::create_directories(out_dir);
    workers = std::max(1, std::min<int>(workers, static_cast<int>(result.cells.size())));

    auto run_cell = [&](SweepCell& cell) {
        ExperimentConfig c = config;
        c.sweep = {};
        c.p = cell.p;
        c.schedule = cell.schedule;
        c.feedback.m = cell.m;
        if (c.feedback.kind != "origin_degenerate")
            c.feedback.kind = cell.m == 1.0 ? "linear" : "power";
        c.fit.kinds = {"polynomial"};
        // Cells already run side by side; nested OpenMP teams would only oversubscribe.
        if (workers > 1)
            c.stepper.backend = "serial";
        try {
            const RunReport r = run_simulate(c, out_dir / cell.directory);
            cell.exit_code = r.exit_code;
            if (!r.errors.empty())
                cell.error = r.errors.front();
            if (!r.fits.empty()) {
                cell.fit = r.fits.front().result;
                if (!cell.fit && cell.error.empty())
                    cell.error = "fit: " + r.fits.front().error;
            }
        } catch (const std::exception& e) {
            cell.exit_code = ExitCode::internal;
            cell.error = e.what();
        }
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < result.cells.size(); i = next++)
            run_cell(result.cells[i]);
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    std::ostringstream manifest, cells;
    manifest << sweep_manifest_header << '\n';
    cells << "cell,directory,m,p,schedule,exit_code,status,message\n";
    for (const auto& c : result.cells) {
        const std::string b413 = c.m > 1.0 ? num(2.0 / (c.m - 1.0)) : "inf";
        const std::string t190 = num(2.0 / (c.m + 1.0));
        std::string status = "ok";
        if (c.exit_code == ExitCode::blowup)
            status = "blowup";
        else if (c.exit_code != ExitCode::ok || !c.fit)
            status = "failed";
        manifest << num(c.m) << ',';
        if (status == "ok")
            manifest << num(c.fit->fitted_rate) << ',' << b413 << ',' << t190 << ','
                     << num(c.fit->dominance_ratio) << ',' << num(c.fit->r_squared) << '\n';
        else
            manifest << status << ',' << b413 << ',' << t190 << ',' << status << ',' << status
                     << '\n';
        std::string msg = c.error;
        std::replace(msg.begin(), msg.end(), '"', '\'');
        cells << c.index << ',' << c.directory << ',' << num(c.m) << ',' << num(c.p) << ','
              << c.schedule.preset << ',' << static_cast<int>(c.exit_code) << ',' << status
              << ",\"" << msg << "\"\n";
        if (status != "ok" && result.exit_code == ExitCode::ok)
            result.exit_code = c.exit_code != ExitCode::ok ? c.exit_code : ExitCode::internal;
    }
    std::ofstream(out_dir / "manifest.csv", std::ios::binary) << manifest.str();
    std::ofstream(out_dir / "cells.csv", std::ios::binary) << cells.str();
    return result;
}

// ---------------------------------------------------------------- reporting

void write_report_text(const RunReport& r, std::ostream& out)
{
    out << "dampwave " << r.command << "\n";
    out << "exit code: " << static_cast<int>(r.exit_code) << "\n";
    for (const auto& e : r.errors)
        out << "error: " << e << "\n";

    if (!r.validation.empty()) {
        out << "\nassumptions\n";
        for (const auto& c : r.validation) {
            out << "  " << std::left << std::setw(16) << c.name << (c.passed ? "pass" : "FAIL")
                << (c.fatal ? "" : " (advisory)");
            if (!c.detail.empty())
                out << "  " << c.detail;
            out << "\n";
        }
    }
    if (r.embedding)
        out << "\nembedding estimate: M = " << num(r.embedding->M) << " (residual "
            << num(r.embedding->residual) << ", " << r.embedding->iterations << " iterations)\n";
    if (r.well) {
        const auto& w = *r.well;
        out << "\npotential well\n";
        out << "  omega   " << num(w.omega) << "\n";
        out << "  M       " << num(w.M) << "\n";
        out << "  p       " << num(w.p) << "\n";
        out << "  s1      " << num(w.s1) << "\n";
        out << "  F1      " << num(w.F1) << "\n";
        out << "  E0      " << num(w.E0) << "\n";
        out << "  a0      " << num(w.a0) << "\n";
        if (w.s2)
            out << "  s2      " << num(*w.s2) << "\n";
        if (w.M_script)
            out << "  M_script " << num(*w.M_script) << "\n";
        if (w.C0)
            out << "  C0      " << num(*w.C0) << "\n";
        out << "  verdict " << to_string(w.verdict) << (w.marginal ? " (marginal)" : "") << "\n";
        out << "  margin  " << num(w.margin) << "\n";
        if (!w.reason.empty())
            out << "  reason  " << w.reason << "\n";
    }
    if (r.trajectory) {
        out << "\ntrajectory inside the well\n";
        out << "  max a(u,u)/s2          " << num(r.trajectory->max_bilinear_over_s2) << "\n";
        out << "  max quadratic/(C0 E)   " << num(r.trajectory->max_quadratic_over_C0E) << "\n";
    }
    if (r.energy) {
        const auto& e = *r.energy;
        out << "\nenergy\n";
        out << "  samples                 " << e.samples << "\n";
        out << "  E0                      " << num(e.E0) << "\n";
        out << "  E(T)                    " << num(e.E_final) << "  at t = " << num(e.t_final)
            << "\n";
        out << "  max identity residual   " << num(e.max_identity_residual) << "\n";
        out << "  monotonicity violations " << e.monotonicity_violations << "\n";
        if (e.blew_up)
            out << "  BLOW-UP at t = " << num(e.blowup_time) << " (partial record)\n";
    }
    for (const auto& f : r.fits) {
        out << "\nfit " << f.kind << "\n";
        if (!f.result) {
            out << "  not available: " << f.error << "\n";
            continue;
        }
        const auto& x = *f.result;
        out << "  rate       " << num(x.fitted_rate) << "\n";
        out << "  C          " << num(x.fitted_C) << "\n";
        out << "  r^2        " << num(x.r_squared) << "\n";
        out << "  window     [" << num(x.fit_window.first) << ", " << num(x.fit_window.second)
            << "]\n";
        out << "  dominance  " << num(x.dominance_ratio) << "\n";
        out << "  samples    " << x.samples << "\n";
    }
    if (r.tail_integral)
        out << "\ntail integral " << num(*r.tail_integral) << "\n";
    if (!r.files.empty()) {
        out << "\nfiles\n";
        for (const auto& f : r.files)
            out << "  " << f.path << "  " << f.bytes << " bytes  fnv1a " << hex64(f.fnv1a) << "\n";
    }
}

std::string summary_json(const RunReport& r)
{
    json j;
    j["schema_version"] = config_schema_version;
    j["command"] = r.command;
    j["exit_code"] = static_cast<int>(r.exit_code);
    j["errors"] = r.errors;
    json checks = json::array();
    for (const auto& c : r.validation)
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"fatal", c.fatal},
                          {"detail", c.detail}});
    j["validation"] = checks;
    if (r.embedding)
        j["embedding"] = {{"M", json_number(r.embedding->M)},
                          {"residual", json_number(r.embedding->residual)},
                          {"iterations", r.embedding->iterations}};
    if (r.well) {
        const auto& w = *r.well;
        json wj{{"omega", json_number(w.omega)}, {"M", json_number(w.M)}, {"p", json_number(w.p)},
                {"s1", json_number(w.s1)},       {"F1", json_number(w.F1)}, {"E0", json_number(w.E0)},
                {"a0", json_number(w.a0)}};
        if (w.s2)
            wj["s2"] = json_number(*w.s2);
        if (w.M_script)
            wj["M_script"] = json_number(*w.M_script);
        if (w.C0)
            wj["C0"] = json_number(*w.C0);
        wj["verdict"] = to_string(w.verdict);
        wj["margin"] = json_number(w.margin);
        wj["marginal"] = w.marginal;
        j["well"] = wj;
    }
    if (r.trajectory)
        j["trajectory"] = {{"max_bilinear_over_s2", json_number(r.trajectory->max_bilinear_over_s2)},
                           {"max_quadratic_over_C0E",
                            json_number(r.trajectory->max_quadratic_over_C0E)}};
    if (r.energy) {
        const auto& e = *r.energy;
        j["energy"] = {{"samples", e.samples},
                       {"E0", json_number(e.E0)},
                       {"E_final", json_number(e.E_final)},
                       {"t_final", json_number(e.t_final)},
                       {"max_identity_residual", json_number(e.max_identity_residual)},
                       {"monotonicity_violations", e.monotonicity_violations},
                       {"blew_up", e.blew_up},
                       {"blowup_time", json_number(e.blowup_time)}};
    }
    json fits = json::array();
    for (const auto& f : r.fits) {
        json fj{{"kind", f.kind}};
        if (f.result) {
            const auto& x = *f.result;
            fj["rate"] = json_number(x.fitted_rate);
            fj["C"] = json_number(x.fitted_C);
            fj["r_squared"] = json_number(x.r_squared);
            fj["window"] = {json_number(x.fit_window.first), json_number(x.fit_window.second)};
            fj["dominance_ratio"] = json_number(x.dominance_ratio);
            fj["samples"] = x.samples;
        } else {
            fj["error"] = f.error;
        }
        fits.push_back(fj);
    }
    j["fits"] = fits;
    if (r.tail_integral)
        j["tail_integral"] = json_number(*r.tail_integral);
    json files = json::array();
    for (const auto& f : r.files)
        files.push_back({{"path", f.path}, {"bytes", f.bytes}, {"fnv1a", hex64(f.fnv1a)}});
    j["files"] = files;
    return j.dump(2) + "\n";
}

} // namespace dampwave
