#include "dampwave/config.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dampwave/well.hpp"

namespace dampwave {

namespace {

using json = nlohmann::ordered_json;

// Strict view of one JSON object: every read records the key, and finish() rejects
// anything that was not read.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError("expected an object", path_.empty() ? "<root>" : path_);
    }

    std::string field(const std::string& key) const
    {
        return path_.empty() ? key : path_ + "." + key;
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& at(const std::string& key)
    {
        seen_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key, double fallback)
    {
        if (!has(key))
            return fallback;
        return as_number(at(key), field(key));
    }

    std::optional<double> optional_number(const std::string& key)
    {
        if (!has(key))
            return std::nullopt;
        return as_number(at(key), field(key));
    }

    int integer(const std::string& key, int fallback)
    {
        if (!has(key))
            return fallback;
        const json& v = at(key);
        if (!v.is_number_integer())
            throw ConfigError("expected an integer", field(key));
        return v.get<int>();
    }

    bool boolean(const std::string& key, bool fallback)
    {
        if (!has(key))
            return fallback;
        const json& v = at(key);
        if (!v.is_boolean())
            throw ConfigError("expected true or false", field(key));
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback)
    {
        if (!has(key))
            return fallback;
        const json& v = at(key);
        if (!v.is_string())
            throw ConfigError("expected a string", field(key));
        return v.get<std::string>();
    }

    std::string choice(const std::string& key, const std::string& fallback,
                       std::initializer_list<const char*> allowed)
    {
        std::string s = string(key, fallback);
        for (const char* a : allowed)
            if (s == a)
                return s;
        std::string msg = "unknown value '" + s + "' (expected one of:";
        for (const char* a : allowed)
            msg += std::string(" ") + a;
        throw ConfigError(msg + ")", field(key));
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback)
    {
        if (!has(key))
            return fallback;
        const json& v = at(key);
        if (!v.is_array())
            throw ConfigError("expected an array of numbers", field(key));
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(as_number(v[i], field(key) + "[" + std::to_string(i) + "]"));
        return out;
    }

    void finish() const
    {
        for (const auto& [key, value] : j_.items()) {
            (void)value;
            if (!seen_.count(key))
                throw ConfigError("unknown key", field(key));
        }
    }

    static double as_number(const json& v, const std::string& where)
    {
        if (!v.is_number())
            throw ConfigError("expected a number", where);
        return v.get<double>();
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

DomainSpec read_domain(Reader r)
{
    DomainSpec d;
    d.dim = r.integer("dim", d.dim);
    d.lengths = r.numbers("lengths", d.lengths);
    if (r.has("counts")) {
        const json& v = r.at("counts");
        if (!v.is_array())
            throw ConfigError("expected an array of integers", r.field("counts"));
        d.counts.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_integer())
                throw ConfigError("expected an integer",
                                  r.field("counts") + "[" + std::to_string(i) + "]");
            d.counts.push_back(v[i].get<int>());
        }
    }
    r.finish();
    if (d.dim != 1 && d.dim != 2)
        throw ConfigError("dim must be 1 or 2", r.field("dim"));
    if (d.lengths.size() != static_cast<std::size_t>(d.dim))
        throw ConfigError("need one length per dimension", r.field("lengths"));
    if (d.counts.size() != static_cast<std::size_t>(d.dim))
        throw ConfigError("need one count per dimension", r.field("counts"));
    return d;
}

CoefficientSpec read_coefficient(Reader r)
{
    CoefficientSpec c;
    c.preset = r.choice("preset", c.preset, {"constant", "smooth", "tabulated"});
    c.scale = r.number("scale", c.scale);
    c.omega = r.number("omega", c.omega);
    c.amplitude = r.number("amplitude", c.amplitude);
    c.shear = r.number("shear", c.shear);
    if (r.has("cells")) {
        const json& v = r.at("cells");
        const std::string where = r.field("cells");
        if (!v.is_array())
            throw ConfigError("expected an array of [a11, a12, a22]", where);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string wi = where + "[" + std::to_string(i) + "]";
            if (!v[i].is_array() || v[i].size() != 3)
                throw ConfigError("expected [a11, a12, a22]", wi);
            std::array<double, 3> a{};
            for (std::size_t k = 0; k < 3; ++k)
                a[k] = Reader::as_number(v[i][k], wi);
            c.cells.push_back(a);
        }
    }
    r.finish();
    if (c.preset == "tabulated" && c.cells.empty())
        throw ConfigError("tabulated preset needs cells", r.field("cells"));
    return c;
}

ProfileSpec read_profile(Reader r)
{
    ProfileSpec p;
    p.kind = r.choice("kind", p.kind, {"linear", "power", "degenerate"});
    p.scale = r.number("scale", p.scale);
    p.m = r.number("m", p.m);
    r.finish();
    return p;
}

FeedbackSpec read_feedback(Reader r)
{
    FeedbackSpec f;
    f.kind = r.choice("kind", f.kind, {"linear", "power", "origin_degenerate"});
    f.coefficient = r.number("coefficient", f.coefficient);
    f.m = r.number("m", f.m);
    if (r.has("profile"))
        f.profile = read_profile(Reader(r.at("profile"), r.field("profile")));
    r.finish();
    return f;
}

ScheduleSpec read_schedule(Reader r)
{
    ScheduleSpec s;
    s.preset = r.choice("preset", s.preset, {"constant", "power", "oscillating"});
    s.gamma0 = r.number("gamma0", s.gamma0);
    s.scale = r.number("scale", s.scale);
    s.q = r.number("q", s.q);
    s.amplitude = r.number("amplitude", s.amplitude);
    s.frequency = r.number("frequency", s.frequency);
    if (r.has("flags")) {
        Reader f(r.at("flags"), r.field("flags"));
        s.flags.bounded = f.boolean("bounded", s.flags.bounded);
        s.flags.nonincreasing_divergent =
            f.boolean("nonincreasing_divergent", s.flags.nonincreasing_divergent);
        s.flags.bounded_below = f.boolean("bounded_below", s.flags.bounded_below);
        f.finish();
    }
    r.finish();
    return s;
}

InitialSpec read_initial(Reader r)
{
    InitialSpec s;
    s.shape = r.choice("shape", s.shape, {"eigenmode", "bump", "random"});
    s.target_energy = r.optional_number("target_energy");
    s.target_well_fraction = r.optional_number("target_well_fraction");
    s.amplitude = r.optional_number("amplitude");
    s.center = r.numbers("center", s.center);
    s.radius = r.number("radius", s.radius);
    s.velocity = r.number("velocity", s.velocity);
    r.finish();
    const int targets = int(s.target_energy.has_value()) +
                        int(s.target_well_fraction.has_value()) + int(s.amplitude.has_value());
    if (s.shape == "eigenmode" && targets != 1)
        throw ConfigError("eigenmode needs exactly one of target_energy, "
                          "target_well_fraction, amplitude",
                          r.field("shape"));
    if (s.shape != "eigenmode" && !s.amplitude)
        throw ConfigError("bump and random shapes need an amplitude", r.field("amplitude"));
    return s;
}

StepperSpec read_stepper(Reader r)
{
    StepperSpec s;
    s.dt = r.number("dt", s.dt);
    s.t_end = r.number("t_end", s.t_end);
    s.record_every = r.integer("record_every", s.record_every);
    s.newton_tol = r.number("newton_tol", s.newton_tol);
    s.newton_max_iter = r.integer("newton_max_iter", s.newton_max_iter);
    s.backend = r.choice("backend", s.backend, {"serial", "openmp"});
    r.finish();
    return s;
}

WellSpec read_well(Reader r)
{
    WellSpec w;
    w.embedding_constant = r.optional_number("embedding_constant");
    w.omega = r.optional_number("omega");
    w.E0 = r.optional_number("E0");
    w.a0 = r.optional_number("a0");
    w.starts = r.integer("starts", w.starts);
    w.max_iter = r.integer("max_iter", w.max_iter);
    r.finish();
    return w;
}

FitSpec read_fit(Reader r)
{
    FitSpec f;
    if (r.has("kinds")) {
        const json& v = r.at("kinds");
        if (!v.is_array())
            throw ConfigError("expected an array of strings", r.field("kinds"));
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string where = r.field("kinds") + "[" + std::to_string(i) + "]";
            if (!v[i].is_string())
                throw ConfigError("expected a string", where);
            const auto k = v[i].get<std::string>();
            if (k != "exponential" && k != "polynomial" && k != "general")
                throw ConfigError("unknown envelope kind '" + k + "'", where);
            f.kinds.push_back(k);
        }
    }
    if (r.has("window")) {
        const auto w = r.numbers("window", {});
        if (w.size() != 2 || !(w[0] < w[1]))
            throw ConfigError("window must be [start, end] with start < end", r.field("window"));
        f.window = std::pair{w[0], w[1]};
    }
    r.finish();
    return f;
}

WeightsSpec read_weights(Reader r)
{
    WeightsSpec w;
    if (r.has("profile"))
        w.profile = read_profile(Reader(r.at("profile"), r.field("profile")));
    w.t_max = r.number("t_max", w.t_max);
    w.points = r.integer("points", w.points);
    r.finish();
    return w;
}

OutputsSpec read_outputs(Reader r)
{
    OutputsSpec o;
    o.energy_csv = r.string("energy_csv", o.energy_csv);
    o.weights_csv = r.string("weights_csv", o.weights_csv);
    o.report = r.string("report", o.report);
    o.summary = r.string("summary", o.summary);
    r.finish();
    return o;
}

SweepSpec read_sweep(Reader r)
{
    SweepSpec s;
    s.m = r.numbers("m", {});
    s.p = r.numbers("p", {});
    if (r.has("schedules")) {
        const json& v = r.at("schedules");
        if (!v.is_array())
            throw ConfigError("expected an array of schedules", r.field("schedules"));
        for (std::size_t i = 0; i < v.size(); ++i)
            s.schedules.push_back(
                read_schedule(Reader(v[i], r.field("schedules") + "[" + std::to_string(i) + "]")));
    }
    r.finish();
    return s;
}

int line_of(const std::string& text, std::size_t byte)
{
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n')
            ++line;
    return line;
}

json profile_json(const ProfileSpec& p)
{
    return json{{"kind", p.kind}, {"scale", p.scale}, {"m", p.m}};
}

json schedule_json(const ScheduleSpec& s)
{
    return json{{"preset", s.preset},
                {"gamma0", s.gamma0},
                {"scale", s.scale},
                {"q", s.q},
                {"amplitude", s.amplitude},
                {"frequency", s.frequency},
                {"flags",
                 {{"bounded", s.flags.bounded},
                  {"nonincreasing_divergent", s.flags.nonincreasing_divergent},
                  {"bounded_below", s.flags.bounded_below}}}};
}

void put_optional(json& j, const char* key, const std::optional<double>& v)
{
    if (v)
        j[key] = *v;
}

} // namespace

ExperimentConfig parse_config(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("syntax error: ") + e.what(), "<root>",
                          line_of(text, e.byte > 0 ? e.byte - 1 : 0));
    }

    Reader r(root, "");
    ExperimentConfig c;
    if (!r.has("schema_version"))
        throw ConfigError("missing schema_version", "schema_version");
    c.schema_version = r.integer("schema_version", 0);
    if (c.schema_version != config_schema_version)
        throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version),
                          "schema_version");
    if (r.has("seed")) {
        const json& s = r.at("seed");
        if (!s.is_number_unsigned())
            throw ConfigError("expected a nonnegative integer", "seed");
        c.seed = s.get<std::uint64_t>();
    }
    c.p = r.number("p", c.p);
    if (r.has("domain"))
        c.domain = read_domain(Reader(r.at("domain"), "domain"));
    if (r.has("coefficient"))
        c.coefficient = read_coefficient(Reader(r.at("coefficient"), "coefficient"));
    if (r.has("feedback"))
        c.feedback = read_feedback(Reader(r.at("feedback"), "feedback"));
    if (r.has("schedule"))
        c.schedule = read_schedule(Reader(r.at("schedule"), "schedule"));
    if (r.has("initial"))
        c.initial = read_initial(Reader(r.at("initial"), "initial"));
    if (r.has("stepper"))
        c.stepper = read_stepper(Reader(r.at("stepper"), "stepper"));
    if (r.has("well"))
        c.well = read_well(Reader(r.at("well"), "well"));
    if (r.has("fit"))
        c.fit = read_fit(Reader(r.at("fit"), "fit"));
    if (r.has("weights"))
        c.weights = read_weights(Reader(r.at("weights"), "weights"));
    if (r.has("outputs"))
        c.outputs = read_outputs(Reader(r.at("outputs"), "outputs"));
    if (r.has("sweep"))
        c.sweep = read_sweep(Reader(r.at("sweep"), "sweep"));
    r.finish();
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read " + path, "<file>");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c)
{
    json j;
    j["schema_version"] = c.schema_version;
    j["seed"] = c.seed;
    j["p"] = c.p;
    j["domain"] = {{"dim", c.domain.dim}, {"lengths", c.domain.lengths}, {"counts", c.domain.counts}};

    json coef{{"preset", c.coefficient.preset},
              {"scale", c.coefficient.scale},
              {"omega", c.coefficient.omega},
              {"amplitude", c.coefficient.amplitude},
              {"shear", c.coefficient.shear}};
    if (!c.coefficient.cells.empty())
        coef["cells"] = c.coefficient.cells;
    j["coefficient"] = coef;

    json fb{{"kind", c.feedback.kind}, {"coefficient", c.feedback.coefficient}, {"m", c.feedback.m}};
    if (c.feedback.profile)
        fb["profile"] = profile_json(*c.feedback.profile);
    j["feedback"] = fb;
    j["schedule"] = schedule_json(c.schedule);

    json init{{"shape", c.initial.shape}};
    put_optional(init, "target_energy", c.initial.target_energy);
    put_optional(init, "target_well_fraction", c.initial.target_well_fraction);
    put_optional(init, "amplitude", c.initial.amplitude);
    init["center"] = c.initial.center;
    init["radius"] = c.initial.radius;
    init["velocity"] = c.initial.velocity;
    j["initial"] = init;

    j["stepper"] = {{"dt", c.stepper.dt},
                    {"t_end", c.stepper.t_end},
                    {"record_every", c.stepper.record_every},
                    {"newton_tol", c.stepper.newton_tol},
                    {"newton_max_iter", c.stepper.newton_max_iter},
                    {"backend", c.stepper.backend}};

    json well = json::object();
    put_optional(well, "embedding_constant", c.well.embedding_constant);
    put_optional(well, "omega", c.well.omega);
    put_optional(well, "E0", c.well.E0);
    put_optional(well, "a0", c.well.a0);
    well["starts"] = c.well.starts;
    well["max_iter"] = c.well.max_iter;
    j["well"] = well;

    json fit{{"kinds", c.fit.kinds}};
    if (c.fit.window)
        fit["window"] = {c.fit.window->first, c.fit.window->second};
    j["fit"] = fit;

    j["weights"] = {{"profile", profile_json(c.weights.profile)},
                    {"t_max", c.weights.t_max},
                    {"points", c.weights.points}};
    j["outputs"] = {{"energy_csv", c.outputs.energy_csv},
                    {"weights_csv", c.outputs.weights_csv},
                    {"report", c.outputs.report},
                    {"summary", c.outputs.summary}};

    json schedules = json::array();
    for (const auto& s : c.sweep.schedules)
        schedules.push_back(schedule_json(s));
    j["sweep"] = {{"m", c.sweep.m}, {"p", c.sweep.p}, {"schedules", schedules}};
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- builders

Grid make_grid(const DomainSpec& spec)
{
    return build_grid(spec.dim, spec.lengths, spec.counts);
}

CoefficientField make_coefficient(const CoefficientSpec& spec, const Grid& grid)
{
    if (spec.preset == "constant")
        return CoefficientField::constant(spec.scale);
    if (spec.preset == "smooth")
        return CoefficientField::smooth(spec.omega, spec.amplitude, spec.shear);
    if (spec.preset == "tabulated") {
        std::vector<SymMatrix2> cells;
        for (const auto& a : spec.cells)
            cells.push_back({a[0], a[1], a[2]});
        return CoefficientField::tabulated(grid, std::move(cells), spec.omega);
    }
    throw InvalidArgument("unknown coefficient preset '" + spec.preset + "'");
}

OriginProfile make_profile(const ProfileSpec& spec)
{
    if (spec.kind == "linear")
        return OriginProfile::linear(spec.scale);
    if (spec.kind == "power")
        return OriginProfile::power(spec.scale, spec.m);
    if (spec.kind == "degenerate")
        return OriginProfile::degenerate(spec.scale);
    throw InvalidArgument("unknown profile kind '" + spec.kind + "'");
}

Feedback make_feedback(const FeedbackSpec& spec)
{
    Feedback f = [&] {
        if (spec.kind == "linear")
            return Feedback::linear(spec.coefficient);
        if (spec.kind == "power")
            return Feedback::power(spec.coefficient, spec.m);
        if (spec.kind == "origin_degenerate")
            return Feedback::origin_degenerate(spec.m);
        throw InvalidArgument("unknown feedback kind '" + spec.kind + "'");
    }();
    if (spec.profile)
        f = f.with_profile(make_profile(*spec.profile));
    return f;
}

DampingSchedule make_schedule(const ScheduleSpec& spec)
{
    if (spec.preset == "constant")
        return DampingSchedule::constant(spec.gamma0, spec.flags);
    if (spec.preset == "power")
        return DampingSchedule::power(spec.scale, spec.q, spec.flags);
    if (spec.preset == "oscillating")
        return DampingSchedule::oscillating(spec.scale, spec.amplitude, spec.frequency,
                                            spec.flags);
    throw InvalidArgument("unknown schedule preset '" + spec.preset + "'");
}

StepperConfig make_stepper(const StepperSpec& spec)
{
    StepperConfig s;
    s.dt = spec.dt;
    s.t_end = spec.t_end;
    s.record_every = spec.record_every;
    s.newton_tol = spec.newton_tol;
    s.newton_max_iter = spec.newton_max_iter;
    s.backend = spec.backend == "serial" ? kernels::Backend::serial : kernels::Backend::openmp;
    return s;
}

std::pair<GridFunction, GridFunction> make_initial_data(const ExperimentConfig& config,
                                                        const DiscreteOperator& op,
                                                        std::optional<double> embedding_constant)
{
    const Grid& grid = op.grid;
    const InitialSpec& in = config.initial;
    const double p = config.p;
    auto scaled = [&](const GridFunction& shape, double a) {
        std::vector<double> u(shape.values().begin(), shape.values().end());
        for (double& x : u)
            x *= a;
        return GridFunction(grid, std::move(u));
    };
    auto with_velocity = [&](GridFunction u0) {
        GridFunction u1 = scaled(u0, in.velocity);
        return std::pair{std::move(u0), std::move(u1)};
    };

    if (in.shape == "bump") {
        std::vector<double> c = in.center;
        if (c.empty())
            for (int d = 0; d < grid.dim; ++d)
                c.push_back(0.5 * grid.lengths[static_cast<std::size_t>(d)]);
        if (c.size() != static_cast<std::size_t>(grid.dim))
            throw InvalidArgument("initial.center: need one coordinate per dimension");
        if (!(in.radius > 0.0))
            throw InvalidArgument("initial.radius must be positive");
        const double a = *in.amplitude;
        auto u0 = GridFunction::sample(grid, [&](double x, double y) {
            double r2 = (x - c[0]) * (x - c[0]);
            if (grid.dim == 2)
                r2 += (y - c[1]) * (y - c[1]);
            const double q = 1.0 - r2 / (in.radius * in.radius);
            return q > 0.0 ? a * q * q : 0.0;
        });
        return with_velocity(std::move(u0));
    }
    if (in.shape == "random") {
        std::mt19937_64 rng(config.seed);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        std::vector<double> u(grid.size());
        for (double& x : u)
            x = *in.amplitude * dist(rng);
        return with_velocity(GridFunction(grid, std::move(u)));
    }

    // Scaled first eigenmode. Along u0 = a e, u1 = v a e:
    //   E(a) = a^2 (v^2 |e|_M^2 + a(e,e)) / 2 - a^{p+1} |e|_{p+1}^{p+1} / (p+1),
    // increasing on [0, a_peak].
    const Eigenpair eig = smallest_generalized_eigenpair(op.stiffness, op.lumped_mass);
    const GridFunction e(grid, eig.vector);
    if (in.amplitude)
        return with_velocity(scaled(e, *in.amplitude));

    double mass_sq = 0.0, src = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        mass_sq += op.lumped_mass[i] * e[i] * e[i];
        src += op.lumped_mass[i] * std::pow(std::abs(e[i]), p + 1.0);
    }
    const double quad = 0.5 * (in.velocity * in.velocity * mass_sq + bilinear_form(op, e, e));
    auto energy = [&](double a) { return a * a * quad - std::pow(a, p + 1.0) * src / (p + 1.0); };
    // dE/da = 0 at a^{p-1} = 2 quad / src.
    const double a_peak = p > 1.0 ? std::pow(2.0 * quad / src, 1.0 / (p - 1.0)) : 1e300;

    double target = 0.0;
    if (in.target_energy) {
        target = *in.target_energy;
    } else {
        if (!embedding_constant)
            throw InvalidArgument("initial.target_well_fraction needs an embedding constant");
        target = *in.target_well_fraction * thresholds(op.omega, *embedding_constant, p).F1;
    }
    if (!(target > 0.0))
        throw InvalidArgument("initial: target energy must be positive");

    double hi = p > 1.0 ? a_peak : 1.0;
    if (p <= 1.0)
        while (energy(hi) < target)
            hi *= 2.0;
    if (energy(hi) < target)
        throw InvalidArgument("initial: target energy exceeds the peak " +
                              std::to_string(energy(hi)) + " reachable by the eigenmode");
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (energy(mid) < target ? lo : hi) = mid;
    }
    return with_velocity(scaled(e, 0.5 * (lo + hi)));
}

} // namespace dampwave
