// End-to-end checks of the dampwave executable: exit codes, CSV headers, reports.
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <unistd.h>

#include "dampwave/csv.hpp"
#include "dampwave/runner.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir()
{
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("dampwave_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text)
{
    const fs::path p = workdir() / name;
    std::ofstream(p) << text;
    return p;
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run_cli(const std::string& args)
{
    static int counter = 0;
    const fs::path o = workdir() / ("stdout_" + std::to_string(counter));
    const fs::path e = workdir() / ("stderr_" + std::to_string(counter++));
    const std::string cmd = std::string(DAMPWAVE_CLI) + " " + args + " >" + o.string() + " 2>" +
                            e.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

std::vector<std::string> lines(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

// 1D, n = 64, linear g, gamma = 1, p = 3, eigenmode scaled to E0 = 0.1.
const char* minimal = R"({
  "schema_version": 1,
  "p": 3,
  "domain": {"dim": 1, "lengths": [1.0], "counts": [64]},
  "feedback": {"kind": "linear", "coefficient": 1.0},
  "schedule": {"preset": "constant", "gamma0": 1.0, "flags": {"nonincreasing_divergent": true}},
  "initial": {"shape": "eigenmode", "target_energy": 0.1},
  "stepper": {"dt": 0.001, "t_end": 10, "record_every": 10}
})";

std::string with(const std::string& base, const std::string& key, const std::string& json_value)
{
    auto j = nlohmann::ordered_json::parse(base);
    j[nlohmann::ordered_json::json_pointer(key)] = nlohmann::ordered_json::parse(json_value);
    return j.dump(2);
}

} // namespace

TEST_CASE("simulate: minimal config")
{
    const auto cfg = write_config("minimal.json", minimal);
    const fs::path out = workdir() / "minimal";
    const Run r = run_cli("simulate --config " + cfg.string() + " --out " + out.string());
    CHECK(r.code == 0);
    const auto csv = lines(slurp(out / "energy.csv"));
    REQUIRE(csv.size() == 1002);
    CHECK(csv[0] == "t,E_total,E_quadratic,a_uu,source_norm,dissipation_cum,identity_residual");

    // Report and summary agree with the first and last CSV rows.
    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    auto field = [](const std::string& row, int k) {
        std::istringstream in(row);
        std::string cell;
        for (int i = 0; i <= k; ++i)
            std::getline(in, cell, ',');
        return std::stod(cell);
    };
    CHECK(summary["energy"]["E0"].get<double>() == field(csv[1], 1));
    CHECK(summary["energy"]["E_final"].get<double>() == field(csv.back(), 1));
    CHECK(summary["energy"]["E0"].get<double>() == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(summary["exit_code"] == 0);
    CHECK(summary["well"]["verdict"] == "global");
    const std::string report = slurp(out / "report.txt");
    CHECK(report.find("E0                      " + dampwave::format_double(field(csv[1], 1))) !=
          std::string::npos);

    // Manifest hash matches the bytes on disk.
    const auto& files = summary["files"];
    REQUIRE(files.size() == 2);
    CHECK(files[0]["path"] == "energy.csv");
    std::ostringstream hex;
    hex << std::hex << dampwave::fnv1a(slurp(out / "energy.csv"));
    std::string h = hex.str();
    h.insert(0, 16 - h.size(), '0');
    CHECK(files[0]["fnv1a"] == h);
    CHECK(files[1]["path"] == "report.txt");
}

TEST_CASE("simulate: identical configs give byte-identical CSVs")
{
    const auto cfg = write_config("det.json", with(minimal, "/stepper/t_end", "2"));
    const auto serial = write_config(
        "det_serial.json", with(with(minimal, "/stepper/t_end", "2"), "/stepper/backend", "\"serial\""));
    const fs::path a = workdir() / "det_a", b = workdir() / "det_b", c = workdir() / "det_c";
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + a.string()).code == 0);
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + b.string()).code == 0);
    REQUIRE(run_cli("simulate --config " + serial.string() + " --out " + c.string()).code == 0);
    CHECK(slurp(a / "energy.csv") == slurp(b / "energy.csv"));
    CHECK(slurp(a / "energy.csv") == slurp(c / "energy.csv"));
}

TEST_CASE("simulate: validation failures exit 3")
{
    const auto p7 = write_config("p7.json", with(minimal, "/p", "7"));
    Run r = run_cli("simulate --config " + p7.string() + " --out " + (workdir() / "p7").string());
    CHECK(r.code == 3);
    CHECK(r.err.find("p-range") != std::string::npos);

    const auto p5 = write_config("p5.json", with(minimal, "/p", "5"));
    r = run_cli("simulate --config " + p5.string() + " --out " + (workdir() / "p5").string());
    CHECK(r.code == 3);
    CHECK(r.err.find("H3") != std::string::npos);
    CHECK(slurp(workdir() / "p5" / "report.txt").find("H3              FAIL") != std::string::npos);
}

TEST_CASE("simulate: blow-up exits 4 with partial outputs flagged")
{
    auto text = with(minimal, "/initial", R"({"shape": "eigenmode", "amplitude": 30})");
    const auto cfg = write_config("blow.json", text);
    const fs::path out = workdir() / "blow";
    const Run r = run_cli("simulate --config " + cfg.string() + " --out " + out.string());
    CHECK(r.code == 4);
    CHECK(fs::exists(out / "energy.csv"));
    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(summary["energy"]["blew_up"] == true);
    CHECK(slurp(out / "report.txt").find("partial record") != std::string::npos);
}

TEST_CASE("parse errors exit 2 with a diagnostic")
{
    const auto syn = write_config("syntax.json", "{\n  \"schema_version\": 1,\n  \"p\": 3,,\n}\n");
    Run r = run_cli("simulate --config " + syn.string());
    CHECK(r.code == 2);
    CHECK(r.err.find("line 3") != std::string::npos);

    const auto unk = write_config("unknown.json", with(minimal, "/stepper/dtt", "1"));
    r = run_cli("simulate --config " + unk.string());
    CHECK(r.code == 2);
    CHECK(r.err.find("stepper.dtt") != std::string::npos);

    CHECK(run_cli("simulate").code == 2);
    CHECK(run_cli("frobnicate --config " + unk.string()).code == 2);
}

TEST_CASE("well: verdicts")
{
    const std::string base =
        R"({"schema_version": 1, "p": 3, "well": {"embedding_constant": 1, "omega": 1, "a0": 0, "E0": 0.1875}})";
    Run r = run_cli("well --config " + write_config("well.json", base).string() + " --out " +
                     (workdir() / "well").string());
    CHECK(r.code == 0);
    CHECK(r.out.find("s2=0.5 ") != std::string::npos);
    CHECK(r.out.find("verdict=global") != std::string::npos);
    const auto summary = nlohmann::json::parse(slurp(workdir() / "well" / "summary.json"));
    CHECK(summary["well"]["s2"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(summary["well"]["C0"].get<double>() == doctest::Approx(4.0 / 3.0).epsilon(1e-12));

    r = run_cli("well --config " + write_config("well_hi.json", with(base, "/well/E0", "0.3")).string() +
                 " --out " + (workdir() / "well_hi").string());
    CHECK(r.out.find("verdict=thresholds_violated") != std::string::npos);

    r = run_cli("well --config " +
                 write_config("well_marg.json", with(base, "/well/E0", "0.24")).string() +
                 " --out " + (workdir() / "well_marg").string());
    CHECK(r.out.find("verdict=global (marginal)") != std::string::npos);
    CHECK(slurp(workdir() / "well_marg" / "report.txt").find("(marginal)") != std::string::npos);
}

TEST_CASE("weights: closed-form rows and invalid profile")
{
    auto run = [](const std::string& name, const std::string& profile) {
        const std::string text = R"({"schema_version": 1, "weights": {"profile": )" + profile +
                                 R"(, "t_max": 100}})";
        const fs::path out = workdir() / name;
        const Run r = run_cli("weights --config " + write_config(name + ".json", text).string() +
                               " --out " + out.string());
        return std::pair{r.code, lines(slurp(out / "weights.csv"))};
    };
    auto cell = [](const std::vector<std::string>& rows, const std::string& t) {
        for (const auto& row : rows)
            if (row.rfind(t + ",", 0) == 0)
                return std::stod(row.substr(t.size() + 1));
        return -1.0;
    };

    const auto [c1, lin] = run("w_lin", R"({"kind": "linear", "scale": 1})");
    CHECK(c1 == 0);
    CHECK(lin[0] == "t,psi_tilde,phi,phi_prime,chi");
    CHECK(cell(lin, "3") == doctest::Approx(5.0).epsilon(1e-12));

    const auto [c3, cub] = run("w_cub", R"({"kind": "power", "scale": 1, "m": 3})");
    CHECK(c3 == 0);
    CHECK(cell(cub, "2") == doctest::Approx(4.75).epsilon(1e-12));

    const auto [cb, bad] = run("w_bad", R"({"kind": "linear", "scale": -1})");
    CHECK(cb == 3);
}

TEST_CASE("fit: envelopes from an energy CSV")
{
    const auto cfg = write_config("fit.json", minimal);
    const fs::path out = workdir() / "fit_src";
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + out.string()).code == 0);
    const Run r = run_cli("fit --config " + cfg.string() + " --energy " +
                           (out / "energy.csv").string() + " --out " +
                           (workdir() / "fit_out").string());
    CHECK(r.code == 0);
    const auto a = nlohmann::json::parse(slurp(out / "summary.json"));
    const auto b = nlohmann::json::parse(slurp(workdir() / "fit_out" / "summary.json"));
    // The CSV carries 17 digits, so refitting it reproduces the in-memory fit.
    CHECK(a["fits"][0]["rate"].get<double>() == doctest::Approx(b["fits"][0]["rate"].get<double>()).epsilon(1e-12));

    const auto broken = write_config("broken.csv", "t,E\n");
    CHECK(run_cli("fit --config " + cfg.string() + " --energy " + broken.string()).code == 2);
}

TEST_CASE("sweep: manifest rows and failures")
{
    const std::string header = "m,fitted_exponent,theory_b413,theory_190,dominance_ratio,r2";

    const auto two = write_config("sweep2.json", with(minimal, "/sweep", R"({"m": [2, 3]})"));
    Run r = run_cli("sweep --workers 2 --config " + two.string() + " --out " +
                     (workdir() / "sweep2").string());
    CHECK(r.code == 0);
    auto manifest = lines(slurp(workdir() / "sweep2" / "manifest.csv"));
    REQUIRE(manifest.size() == 3);
    CHECK(manifest[0] == header);
    CHECK(manifest[1].rfind("2,", 0) == 0);
    CHECK(manifest[1].find(",2,0.66666666666666663,") != std::string::npos);
    CHECK(manifest[2].rfind("3,", 0) == 0);
    CHECK(fs::exists(workdir() / "sweep2" / "cell_000" / "energy.csv"));
    CHECK(fs::exists(workdir() / "sweep2" / "cell_001" / "report.txt"));

    const auto one = write_config("sweep1.json", minimal);
    r = run_cli("sweep --config " + one.string() + " --out " + (workdir() / "sweep1").string());
    CHECK(r.code == 0);
    CHECK(lines(slurp(workdir() / "sweep1" / "manifest.csv")).size() == 2);

    // p = 1.5 decays, p = 3 from the same large amplitude blows up.
    auto text = with(minimal, "/initial", R"({"shape": "eigenmode", "amplitude": 5})");
    text = with(text, "/stepper/t_end", "5");
    text = with(text, "/sweep", R"({"p": [1.5, 3]})");
    r = run_cli("sweep --config " + write_config("sweepb.json", text).string() + " --out " +
                 (workdir() / "sweepb").string());
    CHECK(r.code != 0);
    manifest = lines(slurp(workdir() / "sweepb" / "manifest.csv"));
    REQUIRE(manifest.size() == 3);
    CHECK(manifest[1].find("blowup") == std::string::npos);
    CHECK(manifest[2] == "1,blowup,inf,1,blowup,blowup");
    CHECK(slurp(workdir() / "sweepb" / "cells.csv").find(",4,blowup,") != std::string::npos);
}
