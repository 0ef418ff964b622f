#include "sdeinfer/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "CLI11.hpp"
#include "sdeinfer/errors.hpp"

namespace sdeinfer::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kModes{"simulate", "sample", "map", "validate", "reproduce-paper"};

constexpr std::uint64_t kChainStream = 0x5DEECE66DULL;
constexpr std::uint64_t kFigureStream = 0xB5AD4ECEDA1CE2A9ULL;
constexpr std::size_t kPriorMeanDraws = 2000;
constexpr std::size_t kFigureDraws = 5;

// Strict reader for one JSON object: every key must be consumed.
class Section {
public:
    Section(const json& parent, const std::string& key, std::string path)
        : path_(std::move(path)) {
        if (!parent.contains(key)) return;
        const json& j = parent.at(key);
        if (!j.is_object()) throw ConfigError(path_, "expected an object");
        obj_ = &j;
    }

    void number(const char* key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(field(key), "expected a number");
            out = v->get<double>();
            if (!std::isfinite(out)) throw ConfigError(field(key), "must be finite");
        }
    }

    void count(const char* key, std::size_t& out) {
        if (const json* v = find(key)) {
            if (v->is_number_integer() && v->get<std::int64_t>() >= 0) {
                out = static_cast<std::size_t>(v->get<std::int64_t>());
            } else if (v->is_number_float() && v->get<double>() >= 0.0 &&
                       std::floor(v->get<double>()) == v->get<double>() && v->get<double>() < 1e18) {
                out = static_cast<std::size_t>(v->get<double>());
            } else {
                throw ConfigError(field(key), "expected a non-negative integer");
            }
        }
    }

    void flag(const char* key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
            out = v->get<bool>();
        }
    }

    void text(const char* key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(field(key), "expected a string");
            out = v->get<std::string>();
        }
    }

    void numbers(const char* key, std::vector<double>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) throw ConfigError(field(key), "expected an array of numbers");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number()) throw ConfigError(field(key), "expected an array of numbers");
                out.push_back(e.get<double>());
            }
        }
    }

    void finish() const {
        if (!obj_) return;
        for (const auto& [k, v] : obj_->items())
            if (!seen_.count(k)) throw ConfigError(field(k), "unknown key");
    }

private:
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const char* key) {
        seen_.insert(key);
        if (!obj_ || !obj_->contains(key)) return nullptr;
        return &obj_->at(key);
    }

    std::string path_;
    const json* obj_ = nullptr;
    std::set<std::string> seen_;
};

std::string bc_name(FluxBoundary bc) { return bc == FluxBoundary::Reflecting ? "reflecting" : "absorbing"; }

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
    RunConfig c;
    static const std::set<std::string> top{"mode", "seed", "prior", "chain", "map", "fd", "sim", "io", "validate"};
    for (const auto& [k, v] : j.items())
        if (!top.count(k)) throw ConfigError(k, "unknown key");

    if (j.contains("mode")) {
        if (!j["mode"].is_string()) throw ConfigError("mode", "expected a string");
        c.mode = j["mode"].get<std::string>();
    }
    if (j.contains("seed")) {
        const json& seed = j["seed"];
        if (seed.is_number_unsigned())
            c.seed = seed.get<std::uint64_t>();
        else if (seed.is_number_integer() && seed.get<std::int64_t>() >= 0)
            c.seed = static_cast<std::uint64_t>(seed.get<std::int64_t>());
        else
            throw ConfigError("seed", "expected a non-negative integer");
    }

    Section prior(j, "prior", "prior");
    prior.number("beta", c.prior.beta);
    prior.number("theta", c.prior.theta);
    prior.count("K", c.prior.K);
    prior.count("N", c.prior.N_pop);
    prior.number("gamma", c.prior.recovery_gamma);
    prior.finish();

    Section chain(j, "chain", "chain");
    chain.number("pcn_step", c.chain.pcn_step);
    chain.count("iterations", c.chain.iterations);
    chain.count("burn_in", c.chain.burn_in);
    chain.count("thinning", c.chain.thinning);
    chain.finish();

    Section map(j, "map", "map");
    map.flag("refine", c.map.refine);
    map.count("sweeps", c.map.sweeps);
    map.number("tolerance", c.map.tolerance);
    map.finish();

    Section fd(j, "fd", "fd");
    fd.count("cells", c.chain.fd.cells);
    fd.number("dt", c.chain.fd.dt);
    fd.number("theta", c.chain.fd.theta);
    fd.count("min_steps", c.chain.fd.min_steps);
    fd.count("startup_half_steps", c.chain.fd.startup_half_steps);
    std::string bc = bc_name(c.chain.fd.bc);
    fd.text("bc", bc);
    if (bc == "reflecting")
        c.chain.fd.bc = FluxBoundary::Reflecting;
    else if (bc == "absorbing")
        c.chain.fd.bc = FluxBoundary::Absorbing;
    else
        throw ConfigError("fd.bc", "expected \"reflecting\" or \"absorbing\"");
    fd.finish();

    Section sim(j, "sim", "sim");
    sim.number("x0", c.sim.x0);
    sim.number("dt", c.sim.dt);
    sim.number("T", c.sim.T);
    sim.count("n_obs", c.sim.n_obs);
    sim.numbers("truth", c.sim.truth);
    sim.finish();

    Section io(j, "io", "io");
    io.text("output_dir", c.io.output_dir);
    io.text("observations", c.io.observations);
    io.text("samples", c.io.samples);
    io.finish();

    Section val(j, "validate", "validate");
    val.count("pcn_steps", c.validate.pcn_steps);
    val.number("pcn_step", c.validate.pcn_step);
    val.count("prior_draws", c.validate.prior_draws);
    val.count("hellinger_samples", c.validate.hellinger_samples);
    val.finish();

    c.check();
    return c;
}

void RunConfig::check() const {
    if (!mode.empty() && !kModes.count(mode)) throw ConfigError("mode", fmt::format("unknown mode \"{}\"", mode));
    prior.validate();
    chain.validate();
    sim.validate();
    if (!(map.tolerance > 0.0)) throw ConfigError("map.tolerance", "must be positive");
    if (io.output_dir.empty()) throw ConfigError("io.output_dir", "must not be empty");
    if (!(validate.pcn_step > 0.0 && validate.pcn_step <= 1.0))
        throw ConfigError("validate.pcn_step", "must lie in (0,1]");
    if (validate.pcn_steps < 1) throw ConfigError("validate.pcn_steps", "must be >= 1");
    if (validate.hellinger_samples < 100) throw ConfigError("validate.hellinger_samples", "must be >= 100");
    if (truncate_k && *truncate_k > prior.K) throw ConfigError("truncate", "must not exceed prior.K");
}

json RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["prior"] = prior.to_json();
    j["chain"] = {{"pcn_step", chain.pcn_step},
                  {"iterations", chain.iterations},
                  {"burn_in", chain.burn_in},
                  {"thinning", chain.thinning}};
    j["map"] = {{"refine", map.refine}, {"sweeps", map.sweeps}, {"tolerance", map.tolerance}};
    j["fd"] = {{"cells", chain.fd.cells},
               {"dt", chain.fd.dt},
               {"theta", chain.fd.theta},
               {"min_steps", chain.fd.min_steps},
               {"startup_half_steps", chain.fd.startup_half_steps},
               {"bc", bc_name(chain.fd.bc)}};
    j["sim"] = {{"x0", sim.x0}, {"dt", sim.dt}, {"T", sim.T}, {"n_obs", sim.n_obs}, {"truth", sim.truth}};
    j["io"] = {{"output_dir", io.output_dir}, {"observations", io.observations}, {"samples", io.samples}};
    j["validate"] = {{"pcn_steps", validate.pcn_steps},
                     {"pcn_step", validate.pcn_step},
                     {"prior_draws", validate.prior_draws},
                     {"hellinger_samples", validate.hellinger_samples}};
    j["truncate"] = truncate_k ? json(*truncate_k) : json(nullptr);
    j["quick"] = quick;
    return j;
}

std::string RunConfig::hash() const { return fmt::format("{:016x}", fnv1a(to_json().dump())); }

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read config file {}", path));
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("", fmt::format("config is not valid JSON: {}", e.what()));
    }
    return RunConfig::from_json(j);
}

namespace {

struct Context {
    const RunConfig& cfg;
    std::ostream& out;
    std::ostream& err;
    std::string mode;
    fs::path dir;

    json meta() const {
        return {{"config_hash", cfg.hash()},
                {"seed", cfg.seed},
                {"mode", mode},
                {"truncate", cfg.truncate_k ? json(*cfg.truncate_k) : json(nullptr)}};
    }

    std::string csv_header() const { return fmt::format("# config_hash={} seed={}\n", cfg.hash(), cfg.seed); }

    std::string suffix() const { return cfg.truncate_k ? fmt::format("_k{}", *cfg.truncate_k) : ""; }

    fs::path file(const std::string& name) const { return dir / name; }
};

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(fmt::format("cannot open {} for writing", path.string()));
    f << content;
    f.flush();
    if (!f) throw IoError(fmt::format("failed writing {}", path.string()));
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot read {}", path.string()));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoError(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
}

std::string g17(double v) { return fmt::format("{:.17g}", v); }

ObservationSet load_observations(const Context& ctx) {
    if (ctx.cfg.io.observations == "none") {
        ObservationSet empty;
        empty.T = ctx.cfg.sim.T;
        return empty;
    }
    const fs::path p = ctx.cfg.io.observations.empty() ? ctx.file("observations.json") : fs::path(ctx.cfg.io.observations);
    json j;
    try {
        j = json::parse(read_text(p));
    } catch (const json::exception& e) {
        throw InputError(fmt::format("{} is not valid JSON: {}", p.string(), e.what()));
    }
    return observations_from_json(j);
}

Dataset do_simulate(const Context& ctx) {
    const auto& c = ctx.cfg;
    Dataset d = simulate_dataset(c.sim, c.prior.N_pop, c.prior.recovery_gamma, c.seed);

    std::ostringstream path_csv;
    path_csv << ctx.csv_header();
    write_path_csv(path_csv, d.path);
    write_text(ctx.file("path.csv"), path_csv.str());

    json obs = to_json(d.obs);
    obs["meta"] = ctx.meta();
    if (d.obs.clamped) obs["meta"]["clip"] = kObservationClip;
    write_text(ctx.file("observations.json"), obs.dump(1) + "\n");

    if (d.obs.n() == 0) {
        fmt::print(ctx.out, "simulated path on [0, {}]; no observations requested\n", d.obs.T);
    } else {
        const auto [lo, hi] = std::minmax_element(d.obs.y.begin(), d.obs.y.end());
        fmt::print(ctx.out, "simulated n={} T={} y_min={:.6g} y_max={:.6g} clamped={}\n", d.obs.n(), d.obs.T,
                   *lo, *hi, d.obs.clamped);
    }
    return d;
}

std::vector<double> truth_on(const SimConfig& sim, std::span<const double> grid) {
    std::vector<double> t(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) t[i] = sim.truth_U(grid[i]);
    return t;
}

std::vector<double> U_on(const SeriesState& s, const PriorConfig& prior, std::span<const double> grid) {
    const RateField U = build_U(s, prior);
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = U(grid[i]);
    return v;
}

struct SampleOutput {
    PosteriorRun run;
    ObservationSet obs;
};

SampleOutput do_sample(const Context& ctx, ObservationSet obs) {
    const auto& c = ctx.cfg;
    if (obs.n() < 2) fmt::print(ctx.out, "fewer than two observations: sampling the prior\n");
    ChainConfig chain = c.chain;
    chain.seed = c.seed ^ kChainStream;
    chain.truncate_k = c.truncate_k;
    PosteriorRun run = run_chain(chain, obs, c.prior);
    for (const auto& w : run.warnings) fmt::print(ctx.err, "warning: {}\n", w);

    std::string samples = json{{"meta", ctx.meta()}}.dump() + "\n";
    for (std::size_t i = 0; i < run.samples.size(); ++i) {
        std::string line = dump_state(run.samples[i]);
        line.pop_back();
        samples += line + fmt::format(",\"loglik\":{}}}\n", g17(run.sample_loglik[i]));
    }
    write_text(ctx.file("samples" + ctx.suffix() + ".jsonl"), samples);

    std::string trace = ctx.csv_header() + "iteration,loglik,accepted\n";
    for (std::size_t i = 0; i < run.loglik_trace.size(); ++i)
        trace += fmt::format("{},{},{}\n", i, g17(run.loglik_trace[i]), static_cast<int>(run.accepted_trace[i]));
    write_text(ctx.file("trace" + ctx.suffix() + ".csv"), trace);

    MapSearch best_only = c.map;
    best_only.refine = false;
    if (!run.samples.empty()) {
        auto [state, value] = find_map(run.samples, obs, c.prior, c.chain.fd, best_only, c.truncate_k, run.sample_loglik);
        run.map_state = std::move(state);
        run.map_value = value;
    }

    const auto truth = truth_on(c.sim, run.grid);
    const auto map_U = run.samples.empty() ? std::vector<double>(run.grid.size(), 0.0)
                                           : U_on(run.map_state, c.prior, run.grid);
    std::string est = ctx.csv_header() + "x,U_true,cm_U,map_U\n";
    for (std::size_t i = 0; i < run.grid.size(); ++i)
        est += fmt::format("{},{},{},{}\n", g17(run.grid[i]), g17(truth[i]), g17(run.cm_U[i]), g17(map_U[i]));
    write_text(ctx.file("estimates" + ctx.suffix() + ".csv"), est);

    fmt::print(ctx.out, "acceptance rate {:.4f}, {} samples retained\n", run.acceptance_rate, run.samples.size());
    if (!run.samples.empty())
        fmt::print(ctx.out, "CM L2 distance to truth {:.6g}\n", l2_distance(run.cm_U, truth));
    return {std::move(run), std::move(obs)};
}

std::pair<std::vector<SeriesState>, std::vector<double>> load_samples(const Context& ctx) {
    const fs::path p = ctx.cfg.io.samples.empty() ? ctx.file("samples" + ctx.suffix() + ".jsonl")
                                                  : fs::path(ctx.cfg.io.samples);
    std::istringstream in(read_text(p));
    std::vector<SeriesState> states;
    std::vector<double> logliks;
    bool all_cached = true;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw InputError(fmt::format("{}:{} is not valid JSON: {}", p.string(), lineno, e.what()));
        }
        if (j.contains("meta") && !j.contains("eta")) continue;
        states.push_back(series_state_from_json(j));
        if (j.contains("loglik") && j["loglik"].is_number())
            logliks.push_back(j["loglik"].get<double>());
        else
            all_cached = false;
    }
    if (states.empty()) throw InputError(fmt::format("{} holds no samples", p.string()));
    if (!all_cached) logliks.clear();
    return {std::move(states), std::move(logliks)};
}

std::pair<SeriesState, double> do_map(const Context& ctx, const std::vector<SeriesState>& samples,
                                      const std::vector<double>& logliks, const ObservationSet& obs) {
    const auto& c = ctx.cfg;
    MapSearch best_only = c.map;
    best_only.refine = false;
    const auto best = find_map(samples, obs, c.prior, c.chain.fd, best_only, c.truncate_k, logliks);
    std::pair<SeriesState, double> result = best;
    if (c.map.refine) {
        const std::vector<SeriesState> start{best.first};
        result = find_map(start, obs, c.prior, c.chain.fd, c.map, c.truncate_k);
        if (!(result.second <= best.second)) result = best;
    }
    const auto grid = uniform_nodes(kEstimateGridNodes);
    json j{{"meta", ctx.meta()},
           {"state", to_json(result.first)},
           {"value", result.second},
           {"sample_min", best.second},
           {"refined", c.map.refine},
           {"grid", grid},
           {"U", U_on(result.first, c.prior, grid)}};
    write_text(ctx.file("map" + ctx.suffix() + ".json"), j.dump(1) + "\n");
    fmt::print(ctx.out, "MAP objective {:.10g} (best sample {:.10g})\n", result.second, best.second);
    return result;
}

int do_validate(const Context& ctx) {
    const auto& c = ctx.cfg;
    ValidationOptions opts;
    opts.quick = c.quick;
    opts.seed = c.seed;
    opts.prior = c.prior;
    opts.fd = c.chain.fd;
    opts.sim = c.sim;
    opts.pcn_steps = c.validate.pcn_steps;
    opts.pcn_step = c.validate.pcn_step;
    opts.prior_draws = c.validate.prior_draws;
    opts.hellinger_samples = c.validate.hellinger_samples;
    const auto results = run_validation(opts);
    json suites = json::array();
    bool all = true;
    std::string first_failure;
    for (const auto& r : results) {
        suites.push_back(to_json(r));
        fmt::print(ctx.out, "{:<24} {}\n", r.name, r.passed ? "PASS" : "FAIL: " + r.failure);
        if (!r.passed && all) first_failure = r.name + ": " + r.failure;
        all = all && r.passed;
    }
    json j{{"meta", ctx.meta()}, {"passed", all}, {"quick", c.quick}, {"suites", suites}};
    write_text(ctx.file("validation.json"), j.dump(1) + "\n");
    if (!all) {
        fmt::print(ctx.err, "validation failed at {}\n", first_failure);
        return static_cast<int>(ExitCode::Failure);
    }
    return static_cast<int>(ExitCode::Ok);
}

void do_reproduce(const Context& ctx) {
    const auto& c = ctx.cfg;
    Dataset data = do_simulate(ctx);
    SampleOutput s = do_sample(ctx, data.obs);
    if (s.run.samples.empty()) throw InputError("the chain retained no samples");
    const auto map = do_map(ctx, s.run.samples, s.run.sample_loglik, s.obs);

    const auto& grid = s.run.grid;
    const auto truth = truth_on(c.sim, grid);
    const auto prior_mean = prior_mean_U(c.prior, grid, kPriorMeanDraws, c.seed ^ kFigureStream);
    const auto map_U = U_on(map.first, c.prior, grid);

    Rng rng(c.seed ^ kFigureStream ^ 1U);
    std::vector<std::vector<double>> prior_draws, post_draws;
    for (std::size_t d = 0; d < kFigureDraws; ++d) prior_draws.push_back(U_on(sample_eta(c.prior, rng), c.prior, grid));
    const std::size_t n = s.run.samples.size();
    for (std::size_t d = 0; d < kFigureDraws; ++d) {
        const std::size_t idx = std::min(n - 1, (d + 1) * n / (kFigureDraws + 1));
        post_draws.push_back(U_on(s.run.samples[idx], c.prior, grid));
    }

    std::string fig = ctx.csv_header() + "x,truth,prior_mean,cm,map";
    for (std::size_t d = 0; d < kFigureDraws; ++d) fig += fmt::format(",prior_{}", d + 1);
    for (std::size_t d = 0; d < kFigureDraws; ++d) fig += fmt::format(",posterior_{}", d + 1);
    fig += "\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        fig += fmt::format("{},{},{},{},{}", g17(grid[i]), g17(truth[i]), g17(prior_mean[i]), g17(s.run.cm_U[i]),
                           g17(map_U[i]));
        for (const auto& p : prior_draws) fig += "," + g17(p[i]);
        for (const auto& p : post_draws) fig += "," + g17(p[i]);
        fig += "\n";
    }
    write_text(ctx.file("figure.csv"), fig);

    const double cm_err = l2_distance(s.run.cm_U, truth);
    const double base_err = l2_distance(prior_mean, truth);
    fmt::print(ctx.out, "CM error {:.6g}, prior-mean error {:.6g}, ratio {:.4f}\n", cm_err, base_err,
               cm_err / base_err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Nonparametric Bayesian inference for diffusions on [0,1]", "sde-infer"};
    std::string mode, config_path;
    std::uint64_t seed = 0;
    std::size_t truncate = 0;
    bool quick = false;
    app.add_option("mode", mode, "simulate | sample | map | validate | reproduce-paper")->required();
    app.add_option("--config", config_path, "JSON run configuration")->required();
    auto* seed_opt = app.add_option("--seed", seed, "overrides the config seed");
    auto* trunc_opt = app.add_option("--truncate", truncate, "evaluate the likelihood at the k-truncated series");
    app.add_flag("--quick", quick, "validate: skip the parametrix suite");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return static_cast<int>(ExitCode::Ok);
    } catch (const CLI::ParseError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return static_cast<int>(ExitCode::Config);
    }

    try {
        if (!kModes.count(mode)) throw ConfigError("mode", fmt::format("unknown mode \"{}\"", mode));
        RunConfig cfg = load_config(config_path);
        if (*seed_opt) cfg.seed = seed;
        if (*trunc_opt) cfg.truncate_k = truncate;
        cfg.quick = quick;
        cfg.mode = mode;
        cfg.check();

        Context ctx{cfg, out, err, mode, fs::path(cfg.io.output_dir)};
        ensure_dir(ctx.dir);
        for (const auto& w : cfg.prior.regime_warnings()) fmt::print(err, "warning: {}\n", w);

        if (mode == "simulate") {
            do_simulate(ctx);
        } else if (mode == "sample") {
            do_sample(ctx, load_observations(ctx));
        } else if (mode == "map") {
            const auto [samples, logliks] = load_samples(ctx);
            do_map(ctx, samples, logliks, load_observations(ctx));
        } else if (mode == "validate") {
            return do_validate(ctx);
        } else {
            do_reproduce(ctx);
        }
        return static_cast<int>(ExitCode::Ok);
    } catch (const ConfigError& e) {
        fmt::print(err, "config error: {}\n", e.what());
        return static_cast<int>(ExitCode::Config);
    } catch (const IoError& e) {
        fmt::print(err, "io error: {}\n", e.what());
        return static_cast<int>(ExitCode::Io);
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return static_cast<int>(ExitCode::Failure);
    }
}

}  // namespace sdeinfer::cli
