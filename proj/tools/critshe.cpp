// critshe: command-line front end.
//
//   critshe moment    [--config FILE] [--n N] [--t T] [--beta-star B | --beta0 B0] ...
//   critshe simulate  [--config FILE] [--epsilon E] [--beta0 B0] [--grid N] ...
//   critshe diagrams  --n N --m M [--count]
//   critshe verify    --suite identities|combinatorics|all
//   critshe betaconst --mollifier bump --beta0 B0 [--epsilon E]
//
// The JSON envelope goes to --json (stdout when omitted), tables to --csv.
// Exit codes: 0 success, 2 invalid input, 3 accuracy warning, 4 numerical
// failure.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "critshe/diagrams.hpp"
#include "critshe/error.hpp"
#include "critshe/gausscalc.hpp"
#include "critshe/io.hpp"
#include "critshe/mollifier.hpp"
#include "critshe/momentengine.hpp"
#include "critshe/parallel.hpp"
#include "critshe/philox.hpp"
#include "critshe/shesim.hpp"
#include "critshe/simplexint.hpp"
#include "critshe/specfun.hpp"

namespace {

using namespace critshe;
using io::Json;
using gausscalc::IsotropicMixture;

constexpr const char* kSchema = "critshe/1";
constexpr const char* kResultSchema = "critshe.result/1";
constexpr const char* kVersion = "critshe 1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitAccuracy = 3;
constexpr int kExitNumerical = 4;

class ConfigError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Config schema helpers

void check_keys(const Json& obj, const Json& defaults, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!defaults.contains(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

double as_number(const Json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    return v.get<double>();
}

long long as_integer(const Json& v, const std::string& where) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::floor(d) == d && std::abs(d) < 9e15) return (long long)d;
    }
    throw ConfigError(where + ": expected an integer");
}

std::string as_string(const Json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError(where + ": expected a string");
    return v.get<std::string>();
}

bool as_bool(const Json& v, const std::string& where) {
    if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
    return v.get<bool>();
}

std::vector<double> as_number_list(const Json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

// A mixture is an array of {"weight", "mean": [x, y], "variance"} objects;
// a single object stands for a one-component mixture.
IsotropicMixture parse_mixture(const Json& v, const std::string& where) {
    static const Json keys = {{"weight", 1.0}, {"mean", Json::array({0.0, 0.0})}, {"variance", 1.0}};
    const Json list = v.is_object() ? Json::array({v}) : v;
    if (!list.is_array() || list.empty()) throw ConfigError(where + ": expected a nonempty list of Gaussian components");
    IsotropicMixture out;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string w = where + "[" + std::to_string(i) + "]";
        check_keys(list[i], keys, w);
        gausscalc::IsotropicGaussian g;
        if (list[i].contains("weight")) g.weight = as_number(list[i]["weight"], w + ".weight");
        if (list[i].contains("mean")) {
            const std::vector<double> m = as_number_list(list[i]["mean"], w + ".mean");
            if (m.size() != 2) throw ConfigError(w + ".mean: expected two coordinates");
            g.mean = {m[0], m[1]};
        }
        if (!list[i].contains("variance")) throw ConfigError(w + ": missing 'variance'");
        g.variance = as_number(list[i]["variance"], w + ".variance");
        out.push_back(g);
    }
    try {
        gausscalc::validate(out);
    } catch (const DomainError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return out;
}

Json mixture_json(const IsotropicMixture& f) {
    Json out = Json::array();
    for (const auto& g : f)
        out.push_back({{"weight", g.weight}, {"mean", Json::array({g.mean[0], g.mean[1]})}, {"variance", g.variance}});
    return out;
}

IsotropicMixture centred(double variance) { return {{1.0, {0.0, 0.0}, variance}}; }

// Reads --config, checks its top-level layout and returns it (or {}).
Json load_config(const std::string& path, const std::string& command, const std::set<std::string>& blocks) {
    if (path.empty()) return Json::object();
    Json cfg;
    try {
        cfg = Json::parse(io::read_file(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError(path + ": not valid JSON (" + e.what() + ")");
    }
    if (!cfg.is_object()) throw ConfigError(path + ": top level must be an object");
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        const std::string& k = it.key();
        if (k == "schema") {
            if (it.value() != kSchema) throw ConfigError(path + ": unsupported schema (expected \"" + kSchema + "\")");
        } else if (k == "command") {
            if (it.value() != command)
                throw ConfigError(path + ": config is for '" + it.value().dump() + "', not '" + command + "'");
        } else if (k != "output" && !blocks.count(k)) {
            throw ConfigError(path + ": unknown top-level key '" + k + "'");
        }
    }
    return cfg;
}

// defaults <- config block <- flag overrides
Json merged_block(const Json& defaults, const Json& cfg, const std::string& name, const Json& overrides) {
    Json out = defaults;
    if (cfg.contains(name)) {
        check_keys(cfg[name], defaults, name);
        for (auto it = cfg[name].begin(); it != cfg[name].end(); ++it) out[it.key()] = it.value();
    }
    for (auto it = overrides.begin(); it != overrides.end(); ++it) out[it.key()] = it.value();
    return out;
}

// ---------------------------------------------------------------------------
// Shared options

struct OutputOptions {
    std::string config;
    std::string json;
    std::string csv;
    std::string timings;
    std::optional<unsigned> threads;

    void add_to(CLI::App* app, bool with_csv) {
        app->add_option("--config", config, "JSON run configuration");
        app->add_option("--json", json, "write the result envelope here (default: stdout)");
        if (with_csv) app->add_option("--csv", csv, "write the result table here");
        app->add_option("--timings", timings, "write wall-clock timings (JSON) here");
        app->add_option("--threads", threads, "worker threads (default: $CRITSHE_THREADS, else all cores)")
            ->check(CLI::PositiveNumber);
    }

    // Output paths from the config file unless given on the command line.
    void resolve(const Json& cfg) {
        if (!cfg.contains("output")) return;
        const Json defaults = {{"json", nullptr}, {"csv", nullptr}, {"timings", nullptr}};
        check_keys(cfg["output"], defaults, "output");
        auto take = [&](const char* key, std::string& dst) {
            if (dst.empty() && cfg["output"].contains(key) && !cfg["output"][key].is_null())
                dst = as_string(cfg["output"][key], std::string("output.") + key);
        };
        take("json", json);
        take("csv", csv);
        take("timings", timings);
    }

    unsigned worker_threads() const { return threads ? *threads : default_threads(); }
};

class Stopwatch {
public:
    void start(const std::string& phase) {
        phase_ = phase;
        t0_ = std::chrono::steady_clock::now();
    }
    void stop() {
        laps_[phase_] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }
    Json json() const {
        Json j = Json::object();
        for (const auto& [k, v] : laps_) j[k + "_seconds"] = v;
        return j;
    }

private:
    std::string phase_;
    std::chrono::steady_clock::time_point t0_;
    std::map<std::string, double> laps_;
};

Json make_envelope(const std::string& command, const Json& echo, const Json& seeds, const Json& results,
                   bool warning, int exit_code) {
    Json env;
    env["schema"] = kResultSchema;
    env["generator"] = kVersion;
    env["command"] = command;
    env["config"] = echo;
    env["config_hash"] = io::git_blob_hash(io::to_canonical_json(echo));
    env["seeds"] = seeds;
    env["results"] = results;
    env["status"] = {{"accuracy_warning", warning}, {"exit_code", exit_code}};
    return env;
}

// Timings are kept out of the envelope so that identical runs produce
// byte-identical envelopes.
void emit(const OutputOptions& out, const Json& envelope, const io::CsvTable* table, const Stopwatch& clock) {
    const std::string text = io::to_canonical_json(envelope);
    if (out.json.empty() || out.json == "-")
        std::cout << text << std::flush;
    else
        io::write_file(out.json, text);
    if (table && !out.csv.empty()) io::write_file(out.csv, table->str());
    const Json t = clock.json();
    if (!out.timings.empty()) io::write_file(out.timings, io::to_canonical_json(t));
    for (auto it = t.begin(); it != t.end(); ++it)
        std::fprintf(stderr, "timing: %s %.3f\n", it.key().c_str(), it.value().get<double>());
}

Json estimate_json(const quad::Estimate& e) { return io::quantity(e.value, e.error); }

// beta_phi with an error bar covering both the quadrature and the Phi table
// (difference against a table of half the resolution).
quad::Estimate beta_phi_with_error(const std::string& mollifier_name) {
    const mollifier::Mollifier m = mollifier::by_name(mollifier_name);
    const quad::Estimate fine = mollifier::beta_phi_estimate(mollifier::pair_profile(m));
    const double coarse = mollifier::beta_phi(mollifier::pair_profile(m, {1.0 / 32.0}));
    return {fine.value, fine.error + std::abs(fine.value - coarse)};
}

// ---------------------------------------------------------------------------
// moment

struct MomentCli {
    OutputOptions out;
    std::optional<int> n, m_max;
    std::optional<double> t, beta_star, beta0, f_variance, z_variance, s;
    std::optional<std::string> mollifier, quantity, mode, proposal;
    std::optional<long long> samples, shifts;
    std::optional<std::uint64_t> seed;
    std::optional<double> rel_tol;
    bool cumulant_route = false;
};

const Json& moment_defaults() {
    static const Json d = {
        {"n", 2},
        {"t", 1.0},
        {"beta_star", nullptr},
        {"beta_zero", nullptr},
        {"mollifier", "bump"},
        {"f", mixture_json(centred(0.5))},
        {"z_ic", mixture_json(centred(0.5))},
        {"m_max", 6},
        {"quantity", "correlation"},
        {"s", nullptr},
        {"cumulant_route", false},
    };
    return d;
}

const Json& integration_defaults() {
    static const Json d = {
        {"mode", "adaptive-quadrature"},
        {"samples", 200000},
        {"rel_tol", 1e-2},
        {"seed", 1},
        {"shifts", 16},
        {"proposal", "automatic"},
    };
    return d;
}

simplexint::Proposal parse_proposal(const std::string& s) {
    if (s == "automatic") return simplexint::Proposal::automatic;
    if (s == "uniform") return simplexint::Proposal::uniform;
    if (s == "jfn-adapted") return simplexint::Proposal::jfn_adapted;
    throw ConfigError("integration.proposal: expected automatic, uniform or jfn-adapted");
}

const char* proposal_name(simplexint::Proposal p) {
    switch (p) {
    case simplexint::Proposal::automatic: return "automatic";
    case simplexint::Proposal::uniform: return "uniform";
    case simplexint::Proposal::jfn_adapted: return "jfn-adapted";
    }
    return "?";
}

simplexint::IntegrationPlan parse_plan(const Json& b) {
    simplexint::IntegrationPlan p;
    try {
        p.mode = simplexint::parse_mode(as_string(b["mode"], "integration.mode"));
    } catch (const DomainError& e) {
        throw ConfigError(std::string("integration.mode: ") + e.what());
    }
    const long long samples = as_integer(b["samples"], "integration.samples");
    const long long shifts = as_integer(b["shifts"], "integration.shifts");
    const long long seed = as_integer(b["seed"], "integration.seed");
    if (samples < 1 || shifts < 1 || seed < 0) throw ConfigError("integration: samples, shifts must be positive and seed nonnegative");
    p.samples = std::size_t(samples);
    p.shifts = std::size_t(shifts);
    p.seed = std::uint64_t(seed);
    p.rel_tol = as_number(b["rel_tol"], "integration.rel_tol");
    p.proposal = parse_proposal(as_string(b["proposal"], "integration.proposal"));
    p.validate();
    return p;
}

Json plan_json(const simplexint::IntegrationPlan& p) {
    return {{"mode", simplexint::mode_name(p.mode)}, {"samples", p.samples}, {"rel_tol", p.rel_tol},
            {"seed", p.seed},  {"shifts", p.shifts},  {"proposal", proposal_name(p.proposal)}};
}

Json contribution_json(const momentengine::DiagramContribution& c) {
    return {{"index", c.index.str()},
            {"m", c.index.m()},
            {"degenerate", diagrams::classify(c.index).degenerate},
            {"value", c.value},
            {"error", c.error},
            {"accuracy_warning", c.accuracy_warning}};
}

Json per_m_json(const std::vector<momentengine::PerM>& per_m) {
    Json out = Json::array();
    for (const auto& p : per_m) out.push_back({{"m", p.m}, {"diagrams", p.diagrams}, {"value", p.value}, {"error", p.error}});
    return out;
}

io::CsvTable diagram_table(double free_term, const std::vector<momentengine::DiagramContribution>& cs) {
    io::CsvTable t({"kind", "diagram", "m", "degenerate", "value", "error", "accuracy_warning"});
    t.add_row({"free_term", "", "0", "", io::CsvTable::num(free_term), "exact", "false"});
    for (const auto& c : cs)
        t.add_row({"diagram", c.index.str(), std::to_string(c.index.m()),
                   diagrams::classify(c.index).degenerate ? "true" : "false", io::CsvTable::num(c.value),
                   io::CsvTable::num(c.error), c.accuracy_warning ? "true" : "false"});
    return t;
}

int run_moment(const MomentCli& cli) {
    OutputOptions out = cli.out;
    const Json cfg = load_config(out.config, "moment", {"moment", "integration"});
    out.resolve(cfg);

    Json mo = Json::object(), io_ = Json::object();
    if (cli.n) mo["n"] = *cli.n;
    if (cli.t) mo["t"] = *cli.t;
    if (cli.beta_star) mo["beta_star"] = *cli.beta_star;
    if (cli.beta0) mo["beta_zero"] = *cli.beta0;
    if (cli.mollifier) mo["mollifier"] = *cli.mollifier;
    if (cli.f_variance) mo["f"] = mixture_json(centred(*cli.f_variance));
    if (cli.z_variance) mo["z_ic"] = mixture_json(centred(*cli.z_variance));
    if (cli.m_max) mo["m_max"] = *cli.m_max;
    if (cli.quantity) mo["quantity"] = *cli.quantity;
    if (cli.s) mo["s"] = *cli.s;
    if (cli.cumulant_route) mo["cumulant_route"] = true;
    if (cli.mode) io_["mode"] = *cli.mode;
    if (cli.samples) io_["samples"] = *cli.samples;
    if (cli.rel_tol) io_["rel_tol"] = *cli.rel_tol;
    if (cli.seed) io_["seed"] = *cli.seed;
    if (cli.shifts) io_["shifts"] = *cli.shifts;
    if (cli.proposal) io_["proposal"] = *cli.proposal;
    const Json mb = merged_block(moment_defaults(), cfg, "moment", mo);
    const Json ib = merged_block(integration_defaults(), cfg, "integration", io_);

    // Everything is validated before any computation starts.
    momentengine::MomentRequest req;
    req.n = int(as_integer(mb["n"], "moment.n"));
    req.t = as_number(mb["t"], "moment.t");
    req.m_max = int(as_integer(mb["m_max"], "moment.m_max"));
    const std::string moll = as_string(mb["mollifier"], "moment.mollifier");
    const IsotropicMixture f = parse_mixture(mb["f"], "moment.f");
    req.z_ic = parse_mixture(mb["z_ic"], "moment.z_ic");
    req.f.assign(std::size_t(std::max(req.n, 0)), f);
    req.plan = parse_plan(ib);
    req.threads = out.worker_threads();
    const std::string quantity = as_string(mb["quantity"], "moment.quantity");
    if (quantity != "correlation" && quantity != "centered_third_moment" && quantity != "semigroup")
        throw ConfigError("moment.quantity: expected correlation, centered_third_moment or semigroup");
    const bool cumulant_route = as_bool(mb["cumulant_route"], "moment.cumulant_route");
    if (!mb["beta_star"].is_null() && !mb["beta_zero"].is_null())
        throw ConfigError("moment: give beta_star or beta_zero, not both");
    std::optional<double> beta_zero;
    if (!mb["beta_zero"].is_null()) beta_zero = as_number(mb["beta_zero"], "moment.beta_zero");
    mollifier::by_name(moll);
    std::optional<double> s;
    if (quantity == "semigroup") {
        s = mb["s"].is_null() ? 0.5 * req.t : as_number(mb["s"], "moment.s");
        if (!(*s > 0.0 && *s < req.t)) throw ConfigError("moment.s: need 0 < s < t");
        if (req.n != 2) throw ConfigError("moment: the semigroup check is defined at n = 2");
    } else if (!mb["s"].is_null()) {
        throw ConfigError("moment.s: only used with quantity = semigroup");
    }
    if (quantity == "centered_third_moment" && req.n != 3) throw ConfigError("moment: centered_third_moment needs n = 3");
    req.beta_star = {mb["beta_star"].is_null() ? 0.0 : as_number(mb["beta_star"], "moment.beta_star")};
    req.validate();

    Stopwatch clock;
    Json results;
    std::optional<quad::Estimate> bphi;
    if (beta_zero) {
        clock.start("beta_phi");
        bphi = beta_phi_with_error(moll);
        clock.stop();
        req.beta_star = mollifier::beta_star(*beta_zero, bphi->value);
        results["beta_phi"] = estimate_json(*bphi);
    }
    results["beta_star"] = bphi ? io::quantity(req.beta_star.value, 2.0 * bphi->error) : io::exact(req.beta_star.value);

    Json echo = {{"schema", kSchema}, {"command", "moment"}};
    echo["moment"] = {{"n", req.n},
                      {"t", req.t},
                      {"beta_star", beta_zero ? Json(nullptr) : Json(req.beta_star.value)},
                      {"beta_zero", beta_zero ? Json(*beta_zero) : Json(nullptr)},
                      {"mollifier", moll},
                      {"f", mixture_json(f)},
                      {"z_ic", mixture_json(req.z_ic)},
                      {"m_max", req.m_max},
                      {"quantity", quantity},
                      {"s", s ? Json(*s) : Json(nullptr)},
                      {"cumulant_route", cumulant_route}};
    echo["integration"] = plan_json(req.plan);

    bool warning = false;
    std::optional<io::CsvTable> table;
    clock.start("compute");
    if (quantity == "correlation") {
        const momentengine::MomentResult r = momentengine::correlation(req);
        Json ds = Json::array();
        for (const auto& c : r.contributions) ds.push_back(contribution_json(c));
        results["free_term"] = io::exact(r.free_term);
        results["diagrams"] = ds;
        results["per_m"] = per_m_json(r.per_m);
        results["truncated_sum"] = io::quantity(r.truncated_sum(), r.error);
        results["truncation_tail_estimate"] = io::quantity(r.truncation_tail_estimate, r.truncation_tail_estimate);
        results["converged"] = r.converged;
        results["total"] = r.total ? io::quantity(*r.total, r.error + r.truncation_tail_estimate) : Json(nullptr);
        warning = r.accuracy_warning || !r.converged;
        table = diagram_table(r.free_term, r.contributions);
    } else if (quantity == "centered_third_moment") {
        const momentengine::ThirdMoment tm = momentengine::centered_third_moment(req);
        Json ds = Json::array();
        for (const auto& c : tm.nondegenerate.contributions) ds.push_back(contribution_json(c));
        results["centered_third_moment"] = io::quantity(tm.value, tm.error);
        results["diagrams"] = ds;
        results["per_m"] = per_m_json(tm.nondegenerate.per_m);
        results["converged"] = tm.nondegenerate.converged;
        warning = tm.nondegenerate.accuracy_warning || !tm.nondegenerate.converged;
        if (cumulant_route) {
            const quad::Estimate c = momentengine::third_cumulant_from_moments(req);
            results["cumulant_route"] = estimate_json(c);
            const double sigma = std::hypot(c.error, tm.error);
            results["route_difference"] = io::quantity(tm.value - c.value, sigma);
        }
        table = diagram_table(tm.nondegenerate.free_term, tm.nondegenerate.contributions);
    } else {
        const momentengine::SemigroupCheck sc = momentengine::semigroup_check(req, *s);
        results["lhs"] = io::quantity(sc.lhs, sc.error);
        results["rhs"] = io::quantity(sc.rhs, sc.error);
        results["residual"] = io::quantity(sc.residual, sc.error);
        results["relative_residual"] = io::quantity(sc.residual / std::abs(sc.rhs), sc.error / std::abs(sc.rhs));
    }
    clock.stop();

    const int code = warning ? kExitAccuracy : kExitOk;
    if (warning) std::fprintf(stderr, "warning: integration error or truncation tail above tolerance\n");
    emit(out, make_envelope("moment", echo, {{"integration", req.plan.seed}}, results, warning, code),
         table ? &*table : nullptr, clock);
    return code;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateCli {
    OutputOptions out;
    std::optional<int> n, grid, radial_resolution;
    std::optional<double> epsilon, beta0, domain, dt, f_variance, z_variance;
    std::optional<std::vector<double>> times;
    std::optional<long long> replicas;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mollifier, oracle;
};

const Json& simulate_defaults() {
    static const Json d = {
        {"n", 2},
        {"times", Json::array({0.25})},
        {"f", mixture_json(centred(0.25))},
        {"z_ic", mixture_json(centred(0.25))},
        {"epsilon", 0.25},
        {"beta_zero", 0.0},
        {"domain", 4.0},
        {"grid", 64},
        {"dt", 0.0},
        {"mollifier", "bump"},
        {"replicas", 1000},
        {"seed", 1},
        {"oracle", "none"},
        {"radial_resolution", 32},
    };
    return d;
}

int run_simulate(const SimulateCli& cli) {
    OutputOptions out = cli.out;
    const Json cfg = load_config(out.config, "simulate", {"simulate"});
    out.resolve(cfg);

    Json ov = Json::object();
    if (cli.n) ov["n"] = *cli.n;
    if (cli.times) ov["times"] = *cli.times;
    if (cli.f_variance) ov["f"] = mixture_json(centred(*cli.f_variance));
    if (cli.z_variance) ov["z_ic"] = mixture_json(centred(*cli.z_variance));
    if (cli.epsilon) ov["epsilon"] = *cli.epsilon;
    if (cli.beta0) ov["beta_zero"] = *cli.beta0;
    if (cli.domain) ov["domain"] = *cli.domain;
    if (cli.grid) ov["grid"] = *cli.grid;
    if (cli.dt) ov["dt"] = *cli.dt;
    if (cli.mollifier) ov["mollifier"] = *cli.mollifier;
    if (cli.replicas) ov["replicas"] = *cli.replicas;
    if (cli.seed) ov["seed"] = *cli.seed;
    if (cli.oracle) ov["oracle"] = *cli.oracle;
    if (cli.radial_resolution) ov["radial_resolution"] = *cli.radial_resolution;
    const Json b = merged_block(simulate_defaults(), cfg, "simulate", ov);

    shesim::SimulationRequest req;
    req.n = int(as_integer(b["n"], "simulate.n"));
    req.times = as_number_list(b["times"], "simulate.times");
    const IsotropicMixture f = parse_mixture(b["f"], "simulate.f");
    req.f = {f};
    req.z_ic = parse_mixture(b["z_ic"], "simulate.z_ic");
    req.params.epsilon = as_number(b["epsilon"], "simulate.epsilon");
    req.params.beta_zero = as_number(b["beta_zero"], "simulate.beta_zero");
    req.params.domain = as_number(b["domain"], "simulate.domain");
    req.params.grid = int(as_integer(b["grid"], "simulate.grid"));
    req.params.dt = as_number(b["dt"], "simulate.dt");
    req.params.mollifier = as_string(b["mollifier"], "simulate.mollifier");
    const long long replicas = as_integer(b["replicas"], "simulate.replicas");
    const long long seed = as_integer(b["seed"], "simulate.seed");
    if (replicas < 0 || seed < 0) throw ConfigError("simulate: replicas and seed must be nonnegative");
    req.replicas = std::size_t(replicas);
    req.seed = std::uint64_t(seed);
    req.threads = out.worker_threads();
    const std::string oracle = as_string(b["oracle"], "simulate.oracle");
    if (oracle != "none" && oracle != "torus" && oracle != "radial")
        throw ConfigError("simulate.oracle: expected none, torus or radial");
    if (oracle != "none" && req.n != 2) throw ConfigError("simulate.oracle: oracles exist for n = 2 only");
    const int radial_res = int(as_integer(b["radial_resolution"], "simulate.radial_resolution"));
    if (oracle == "radial" && radial_res < 16) throw ConfigError("simulate.radial_resolution: must be >= 16");
    mollifier::by_name(req.params.mollifier);
    req.validate();

    Json echo = {{"schema", kSchema}, {"command", "simulate"}};
    echo["simulate"] = {{"n", req.n},
                        {"times", req.times},
                        {"f", mixture_json(f)},
                        {"z_ic", mixture_json(req.z_ic)},
                        {"epsilon", req.params.epsilon},
                        {"beta_zero", req.params.beta_zero},
                        {"domain", req.params.domain},
                        {"grid", req.params.grid},
                        {"dt", req.params.dt},
                        {"mollifier", req.params.mollifier},
                        {"replicas", req.replicas},
                        {"seed", req.seed},
                        {"oracle", oracle},
                        {"radial_resolution", radial_res}};

    Stopwatch clock;
    clock.start("simulate");
    const std::vector<shesim::MomentEstimate> est = shesim::estimate_moment(req);
    clock.stop();

    std::vector<std::string> header{"time", "n", "value", "standard_error"};
    if (oracle != "none") header.insert(header.end(), {"oracle", "oracle_error"});
    io::CsvTable table(header);
    Json series = Json::array();
    clock.start("oracle");
    for (const auto& e : est) {
        Json row = {{"time", e.time}, {"moment", io::quantity(e.value, e.standard_error)}};
        std::vector<std::string> cells{io::CsvTable::num(e.time), std::to_string(req.n), io::CsvTable::num(e.value),
                                       io::CsvTable::num(e.standard_error)};
        if (oracle != "none") {
            shesim::OracleRequest q;
            q.t = e.time;
            q.f = f;
            q.z_ic = req.z_ic;
            q.epsilon = req.params.epsilon;
            q.beta_eps = req.params.beta_eps();
            q.mollifier = req.params.mollifier;
            q.method = shesim::parse_oracle_method(oracle);
            q.grid = req.params.grid;
            q.domain = req.params.domain;
            q.dt = req.params.dt;
            q.radial_resolution = radial_res;
            const double v = shesim::two_particle_oracle(q);
            // The torus oracle is the scheme's own second moment (exact up
            // to rounding); the radial one is bounded by a half-resolution rerun.
            double err = -1.0;
            if (q.method == shesim::OracleMethod::radial) {
                q.radial_resolution = radial_res / 2;
                err = std::abs(v - shesim::two_particle_oracle(q));
            }
            row["oracle"] = io::quantity(v, err);
            cells.push_back(io::CsvTable::num(v));
            cells.push_back(err < 0.0 ? "exact" : io::CsvTable::num(err));
        }
        series.push_back(row);
        table.add_row(cells);
    }
    clock.stop();

    Json results = {{"beta_eps", io::exact(req.params.beta_eps())},
                    {"dt_used", io::exact(req.params.step())},
                    {"series", series}};
    emit(out, make_envelope("simulate", echo, {{"simulate", req.seed}}, results, false, kExitOk), &table, clock);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// diagrams

struct DiagramsCli {
    OutputOptions out;
    int n = 2;
    int m = 1;
    bool count_only = false;
};

int run_diagrams(const DiagramsCli& cli) {
    if (cli.n < 2 || cli.n > gausscalc::kMaxSlots) throw ConfigError("diagrams: --n must lie in [2, 8]");
    if (cli.m < 1) throw ConfigError("diagrams: --m must be >= 1");
    const diagrams::BigInt c = diagrams::count(cli.n, cli.m);
    const Json echo = {{"schema", kSchema}, {"command", "diagrams"}, {"n", cli.n}, {"m", cli.m}, {"count_only", cli.count_only}};
    Json results = {{"count", c.str()}};
    Stopwatch clock;
    if (cli.count_only) {
        std::cout << c.str() << "\n";
        if (!cli.out.json.empty()) emit(cli.out, make_envelope("diagrams", echo, Json::object(), results, false, 0), nullptr, clock);
        return kExitOk;
    }
    if (c > diagrams::BigInt(1000000)) throw ConfigError("diagrams: more than 10^6 diagrams; use --count");
    clock.start("enumerate");
    Json list = Json::array();
    io::CsvTable table({"diagram", "m", "degenerate"});
    for (const auto& d : diagrams::DiagramRange(cli.n, cli.m)) {
        const bool deg = diagrams::classify(d).degenerate;
        list.push_back({{"index", d.str()}, {"degenerate", deg}});
        table.add_row({d.str(), std::to_string(d.m()), deg ? "true" : "false"});
    }
    clock.stop();
    results["diagrams"] = list;
    emit(cli.out, make_envelope("diagrams", echo, Json::object(), results, false, 0), &table, clock);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

struct Check {
    std::string name;
    double residual;
    double tolerance;
    bool pass() const { return std::isfinite(residual) && residual <= tolerance; }
};

std::vector<Check> identity_checks() {
    std::vector<Check> out;
    double g = 0.0;
    for (int m = 0; m <= 8; ++m)
        for (double a : {0.1, 1.0, 2.5, 7.0}) g = std::max(g, specfun::gamma_identity_check(m, a));
    out.push_back({"gamma_identity", g, 1e-12});

    double lap = 0.0;
    for (double b : {-1.0, 0.0, 1.0, 2.0}) {
        const std::complex<double> z(-1.5 * std::exp(b + 0.3), 0.7);
        const double rhs = std::abs(1.0 / (std::log(-z) - b));
        lap = std::max(lap, specfun::jfn_laplace_residual(z, {b}) / rhs);
    }
    out.push_back({"jfn_laplace_transform", lap, 1e-6});

    out.push_back({"jfn_table_vs_direct",
                   [] {
                       double e = 0.0;
                       for (double t : {1e-6, 0.01, 0.5, 1.0, 7.0})
                           for (double b : {-2.0, 0.0, 2.0})
                               e = std::max(e, std::abs(specfun::jfn_fast(t, {b}) / specfun::jfn(t, {b}) - 1.0));
                       return e;
                   }(),
                   1e-10});

    const double conv = specfun::conv_identity_residual(0.5, 1.0, {0.0}) / specfun::jfn(1.0, {0.0});
    out.push_back({"convolution_identity", conv, 1e-4});

    double k0 = 0.0;
    for (double x : {1.5, 2.0, 2.5, 3.0})
        k0 = std::max(k0, std::abs(specfun::k0::ascending(x) / specfun::k0::integral(x) - 1.0));
    out.push_back({"k0_series_vs_integral", k0, 1e-9});

    double bes = 0.0;
    PhiloxStream rng(1, 0, 0, 0xB5);
    for (int i = 0; i < 10; ++i) {
        const double tau = 0.1 + 1.9 * rng.uniform(), ra = 0.1 + 1.9 * rng.uniform(), rb = 0.1 + 1.9 * rng.uniform();
        bes = std::max(bes, gausscalc::bessel_identity_residual(tau, ra, rb));
    }
    out.push_back({"bessel_identity", bes, 1e-8});

    const mollifier::PairProfile prof = mollifier::pair_profile(mollifier::Mollifier::bump());
    out.push_back({"pair_profile_mass", std::abs(prof.mass() - 1.0), 1e-8});

    momentengine::MomentRequest req;
    req.t = 1.0;
    req.beta_star = {0.0};
    req.f = {centred(0.5), centred(0.5)};
    req.z_ic = centred(0.5);
    req.plan.rel_tol = 1e-4;
    const momentengine::MomentResult r = momentengine::correlation(req);
    const double cf = gausscalc::second_moment_closed_form(1.0, centred(0.5), centred(0.5), {0.0}).total();
    out.push_back({"n2_engine_vs_closed_form", std::abs(*r.total / cf - 1.0), 1e-3});
    return out;
}

std::vector<Check> combinatorics_checks() {
    std::vector<Check> out;
    for (int n = 2; n <= 5; ++n)
        for (int m = 1; m <= 5; ++m) {
            std::size_t listed = 0;
            for (const auto& d : diagrams::DiagramRange(n, m)) {
                d.validate();
                ++listed;
            }
            const double diff = std::abs(double(listed) - diagrams::count(n, m).convert_to<double>());
            out.push_back({"count_n" + std::to_string(n) + "_m" + std::to_string(m), diff, 0.0});
        }
    return out;
}

struct VerifyCli {
    OutputOptions out;
    std::string suite = "identities";
};

int run_verify(const VerifyCli& cli) {
    if (cli.suite != "identities" && cli.suite != "combinatorics" && cli.suite != "all")
        throw ConfigError("verify: --suite must be identities, combinatorics or all");
    Stopwatch clock;
    clock.start("verify");
    std::vector<Check> checks;
    if (cli.suite != "combinatorics") checks = identity_checks();
    if (cli.suite != "identities")
        for (auto& c : combinatorics_checks()) checks.push_back(c);
    clock.stop();
    Json list = Json::array();
    bool all = true;
    for (const auto& c : checks) {
        std::fprintf(stderr, "%s %s residual=%.3e tolerance=%.1e\n", c.pass() ? "PASS" : "FAIL", c.name.c_str(),
                     c.residual, c.tolerance);
        list.push_back({{"name", c.name}, {"residual", c.residual}, {"tolerance", c.tolerance}, {"pass", c.pass()}});
        all = all && c.pass();
    }
    const int code = all ? kExitOk : kExitAccuracy;
    const Json echo = {{"schema", kSchema}, {"command", "verify"}, {"suite", cli.suite}};
    emit(cli.out, make_envelope("verify", echo, Json::object(), {{"checks", list}, {"all_pass", all}}, !all, code),
         nullptr, clock);
    return code;
}

// ---------------------------------------------------------------------------
// betaconst

struct BetaconstCli {
    OutputOptions out;
    std::string mollifier = "bump";
    double beta0 = 0.0;
    std::optional<double> epsilon;
};

int run_betaconst(const BetaconstCli& cli) {
    mollifier::by_name(cli.mollifier);
    if (!std::isfinite(cli.beta0)) throw ConfigError("betaconst: --beta0 must be finite");
    if (cli.epsilon) mollifier::CouplingSchedule{cli.beta0, *cli.epsilon}.validate();
    Stopwatch clock;
    clock.start("beta_phi");
    const quad::Estimate bp = beta_phi_with_error(cli.mollifier);
    clock.stop();
    const specfun::BetaStar bs = mollifier::beta_star(cli.beta0, bp.value);
    Json results = {{"beta_phi", estimate_json(bp)}, {"beta_star", io::quantity(bs.value, 2.0 * bp.error)}};
    if (cli.epsilon) results["beta_eps"] = io::exact(mollifier::beta_eps({cli.beta0, *cli.epsilon}));
    Json echo = {{"schema", kSchema}, {"command", "betaconst"}, {"mollifier", cli.mollifier}, {"beta_zero", cli.beta0}};
    echo["epsilon"] = cli.epsilon ? Json(*cli.epsilon) : Json(nullptr);
    std::fprintf(stderr, "beta_phi = %.15g\nbeta_star = %.15g\n", bp.value, bs.value);
    emit(cli.out, make_envelope("betaconst", echo, Json::object(), results, false, kExitOk), nullptr, clock);
    return kExitOk;
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
    CLI::App app{"Critical 2D stochastic heat equation: limiting moments, diagrams and simulation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    MomentCli mc;
    CLI::App* moment = app.add_subcommand("moment", "limiting correlation functions from the diagram expansion");
    mc.out.add_to(moment, true);
    moment->add_option("--n", mc.n, "number of particles (moment order)");
    moment->add_option("--t", mc.t, "time");
    moment->add_option("--beta-star", mc.beta_star, "effective coupling beta*");
    moment->add_option("--beta0", mc.beta0, "fine-tuning beta0 (beta* then follows from the mollifier)");
    moment->add_option("--mollifier", mc.mollifier, "mollifier (bump)");
    moment->add_option("--f-variance", mc.f_variance, "test function: centred Gaussian of this variance");
    moment->add_option("--z-variance", mc.z_variance, "initial data: centred Gaussian of this variance");
    moment->add_option("--m-max", mc.m_max, "truncation order");
    moment->add_option("--quantity", mc.quantity, "correlation | centered_third_moment | semigroup");
    moment->add_option("--s", mc.s, "split time for the semigroup check");
    moment->add_flag("--cumulant-route", mc.cumulant_route, "also evaluate the third cumulant from full moments");
    moment->add_option("--mode", mc.mode, "adaptive-quadrature | monte-carlo | quasi-monte-carlo");
    moment->add_option("--mc-samples", mc.samples, "samples per diagram in Monte Carlo modes");
    moment->add_option("--shifts", mc.shifts, "random shifts in quasi-Monte Carlo mode");
    moment->add_option("--rel-tol", mc.rel_tol, "relative tolerance per diagram");
    moment->add_option("--seed", mc.seed, "random seed");
    moment->add_option("--proposal", mc.proposal, "automatic | uniform | jfn-adapted");

    SimulateCli sc;
    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo simulation of the mollified equation");
    sc.out.add_to(simulate, true);
    simulate->add_option("--n", sc.n, "moment order");
    simulate->add_option("--times", sc.times, "output times")->delimiter(',');
    simulate->add_option("--epsilon", sc.epsilon, "mollification scale");
    simulate->add_option("--beta0", sc.beta0, "fine-tuning beta0");
    simulate->add_option("--grid", sc.grid, "grid points per side (power of two)");
    simulate->add_option("--domain", sc.domain, "torus side length");
    simulate->add_option("--dt", sc.dt, "time step (0: largest stable step)");
    simulate->add_option("--replicas", sc.replicas, "independent replicas");
    simulate->add_option("--seed", sc.seed, "random seed");
    simulate->add_option("--mollifier", sc.mollifier, "mollifier (bump)");
    simulate->add_option("--f-variance", sc.f_variance, "test function: centred Gaussian of this variance");
    simulate->add_option("--z-variance", sc.z_variance, "initial data: centred Gaussian of this variance");
    simulate->add_option("--oracle", sc.oracle, "none | torus | radial (n = 2 only)");
    simulate->add_option("--radial-resolution", sc.radial_resolution, "radial oracle cells per mollifier radius");

    DiagramsCli dc;
    CLI::App* diag = app.add_subcommand("diagrams", "enumerate or count diagrams");
    dc.out.add_to(diag, true);
    diag->add_option("--n", dc.n, "number of particles")->required();
    diag->add_option("--m", dc.m, "number of interactions")->required();
    diag->add_flag("--count", dc.count_only, "print only the number of diagrams");

    VerifyCli vc;
    CLI::App* verify = app.add_subcommand("verify", "run a verification suite");
    vc.out.add_to(verify, false);
    verify->add_option("--suite", vc.suite, "identities | combinatorics | all");

    BetaconstCli bc;
    CLI::App* beta = app.add_subcommand("betaconst", "mollifier constant beta_phi and beta*");
    bc.out.add_to(beta, false);
    beta->add_option("--mollifier", bc.mollifier, "mollifier (bump)");
    beta->add_option("--beta0", bc.beta0, "fine-tuning beta0");
    beta->add_option("--epsilon", bc.epsilon, "also report beta_eps at this scale");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalid;
    }

    if (moment->parsed()) return run_moment(mc);
    if (simulate->parsed()) return run_simulate(sc);
    if (diag->parsed()) return run_diagrams(dc);
    if (verify->parsed()) return run_verify(vc);
    return run_betaconst(bc);
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const critshe::AccuracyError& e) {
        std::fprintf(stderr, "accuracy error: %s\n", e.what());
        return kExitAccuracy;
    } catch (const critshe::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const critshe::Error& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kExitInvalid;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    }
}
