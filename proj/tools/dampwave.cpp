// dampwave: command-line front end for the damped wave laboratory.
//
//   dampwave simulate --config run.json --out results/
//   dampwave well     --config run.json
//   dampwave weights  --config run.json
//   dampwave fit      --config run.json --energy results/energy.csv
//   dampwave sweep    --config sweep.json --workers 4
//
// Exit codes: 0 ok, 2 config/CSV parse error, 3 validation failure, 4 blow-up, 5 internal.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "dampwave/config.hpp"
#include "dampwave/runner.hpp"

using namespace dampwave;

namespace {

int code(ExitCode c)
{
    return static_cast<int>(c);
}

int finish(const RunReport& r, const std::string& out)
{
    for (const auto& e : r.errors)
        std::cerr << "dampwave " << r.command << ": " << e << "\n";
    if (r.well) {
        std::cout << "s1=" << r.well->s1 << " F1=" << r.well->F1;
        if (r.well->s2)
            std::cout << " s2=" << *r.well->s2 << " M_script=" << *r.well->M_script
                      << " C0=" << *r.well->C0;
        std::cout << " M=" << r.well->M << " verdict=" << to_string(r.well->verdict)
                  << (r.well->marginal ? " (marginal)" : "") << "\n";
    }
    if (r.energy)
        std::cout << "E0=" << r.energy->E0 << " E(T)=" << r.energy->E_final
                  << " max_residual=" << r.energy->max_identity_residual << "\n";
    for (const auto& f : r.fits) {
        if (f.result)
            std::cout << "fit " << f.kind << ": rate=" << f.result->fitted_rate
                      << " r2=" << f.result->r_squared
                      << " dominance=" << f.result->dominance_ratio << "\n";
        else
            std::cout << "fit " << f.kind << ": " << f.error << "\n";
    }
    std::cout << "report written to " << out << "\n";
    return code(r.exit_code);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Damped wave equation laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "dampwave_out";
    std::optional<std::uint64_t> seed;
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string energy_csv;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "override the config seed");
    };

    auto* simulate = app.add_subcommand("simulate", "run one simulation with reports");
    auto* well = app.add_subcommand("well", "potential-well analysis only");
    auto* weights = app.add_subcommand("weights", "tabulate the decay weight functions");
    auto* fit = app.add_subcommand("fit", "fit decay envelopes to an energy CSV");
    auto* sweep = app.add_subcommand("sweep", "parameter sweep over the config axes");
    for (auto* s : {simulate, well, weights, fit, sweep})
        add_common(s);
    fit->add_option("--energy", energy_csv, "energy CSV from a simulate run")
        ->required()
        ->check(CLI::ExistingFile);
    sweep->add_option("--workers", workers, "concurrent sweep cells")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : code(ExitCode::parse);
    }

    try {
        ExperimentConfig config = load_config(config_path);
        if (seed)
            config.seed = *seed;

        if (simulate->parsed())
            return finish(run_simulate(config, out_dir), out_dir);
        if (well->parsed())
            return finish(run_well(config, out_dir), out_dir);
        if (weights->parsed())
            return finish(run_weights(config, out_dir), out_dir);
        if (fit->parsed())
            return finish(run_fit(config, energy_csv, out_dir), out_dir);

        const SweepResult r = run_sweep(config, out_dir, workers);
        for (const auto& c : r.cells)
            if (c.exit_code != ExitCode::ok || !c.fit)
                std::cerr << "dampwave sweep: " << c.directory << " failed: " << c.error << "\n";
        std::cout << r.cells.size() << " cells, manifest written to " << out_dir
                  << "/manifest.csv\n";
        return code(r.exit_code);
    } catch (const ConfigError& e) {
        std::cerr << "dampwave: " << e.field();
        if (e.line() > 0)
            std::cerr << " (line " << e.line() << ")";
        std::cerr << ": " << e.what() << "\n";
        return code(ExitCode::parse);
    } catch (const std::exception& e) {
        std::cerr << "dampwave: internal error: " << e.what() << "\n";
        return code(ExitCode::internal);
    }
}
