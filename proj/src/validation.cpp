#include "sdeinfer/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "sdeinfer/errors.hpp"
#include "sdeinfer/images_kernel.hpp"
#include "sdeinfer/inference.hpp"
#include "sdeinfer/parallel.hpp"
#include "sdeinfer/parametrix.hpp"

namespace sdeinfer {

namespace {

class Recorder {
public:
    explicit Recorder(std::string name) : start_(std::chrono::steady_clock::now()) { r_.name = std::move(name); }

    void metric(const std::string& key, const nlohmann::json& value) { r_.metrics[key] = value; }

    // Records value and whether it met its threshold; the first miss becomes the failure message.
    void check(const std::string& key, double value, bool ok, const std::string& rule) {
        r_.metrics[key] = value;
        if (!ok && r_.passed) {
            r_.passed = false;
            r_.failure = fmt::format("{} = {:.6g} violates {}", key, value, rule);
        }
    }

    SuiteResult finish() {
        r_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        return r_;
    }

private:
    SuiteResult r_;
    std::chrono::steady_clock::time_point start_;
};

double max_error_vs_neumann(std::size_t cells, double dt) {
    const auto coeff = CoefficientField::constant(1.0, 0.0, 1.0);
    FDGrid g;
    g.cells = cells;
    g.dt = dt;
    const DensityGrid p = transition_density(coeff, g, 0.5, 0.0, 0.05);
    double err = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        const double z = images_density({Boundary::Neumann, 0.5}, g.center(i), 0.05, 0.5, 0.0);
        err = std::max(err, std::abs(z - p.values[i]));
    }
    return err;
}

}  // namespace

SuiteResult images_vs_fd_suite() {
    Recorder rec("images_vs_fd");
    const double fine = max_error_vs_neumann(512, 1e-4);
    const double coarse = max_error_vs_neumann(256, 1e-4);
    rec.check("max_error_512", fine, fine <= 5e-3, "<= 5e-3");
    rec.check("max_error_256", coarse, std::isfinite(coarse), "finite");
    const double ratio = coarse / fine;
    rec.check("halving_ratio", ratio, ratio >= 3.5, ">= 3.5");
    return rec.finish();
}

SuiteResult boundary_mass_suite() {
    Recorder rec("boundary_mass");
    double worst_dirichlet = 0.0;
    double worst_mass = 0.0;
    for (double a : {0.3, 1.0, 2.0})
        for (double xi : {0.0, 0.2, 0.5, 0.9, 1.0})
            for (double lag : {1e-3, 0.05, 0.4}) {
                const ImagesKernelSpec d{Boundary::Dirichlet, a};
                worst_dirichlet = std::max({worst_dirichlet, std::abs(images_density(d, 0.0, lag, xi, 0.0)),
                                            std::abs(images_density(d, 1.0, lag, xi, 0.0))});
                if (lag < 1e-2) continue;
                // Composite Simpson on 4000 intervals.
                const ImagesKernelSpec n{Boundary::Neumann, a};
                const std::size_t m = 4000;
                const double h = 1.0 / static_cast<double>(m);
                double sum = 0.0;
                for (std::size_t i = 0; i <= m; ++i) {
                    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
                    sum += w * images_density(n, static_cast<double>(i) * h, lag, xi, 0.0);
                }
                worst_mass = std::max(worst_mass, std::abs(sum * h / 3.0 - 1.0));
            }
    rec.check("dirichlet_boundary_max", worst_dirichlet, worst_dirichlet == 0.0, "== 0");
    rec.check("neumann_mass_error", worst_mass, worst_mass <= 1e-8, "<= 1e-8");

    const auto coeff = CoefficientField::stationary(
        [](double x) { return 0.5 + 0.3 * std::sin(2.0 * std::numbers::pi * x); },
        [](double x) { return 0.4 * std::cos(3.0 * x) - 0.1; }, 1.0);
    double drift = 0.0;
    double increase = -std::numeric_limits<double>::infinity();
    double absorbed_final = 0.0;
    for (FluxBoundary bc : {FluxBoundary::Reflecting, FluxBoundary::Absorbing}) {
        FDGrid g;
        g.cells = 200;
        g.bc = bc;
        FokkerPlanckSolver solver(coeff, g);
        DensityGrid p = solver.delta(0.37, 0.0);
        double m = p.mass();
        for (int n = 0; n < 300; ++n) {
            p = solver.step(p, 2e-3);
            const double m1 = p.mass();
            if (bc == FluxBoundary::Reflecting)
                drift = std::max(drift, std::abs(m1 - m));
            else
                increase = std::max(increase, m1 - m);
            m = m1;
        }
        if (bc == FluxBoundary::Absorbing) absorbed_final = m;
    }
    rec.check("reflecting_mass_drift_per_step", drift, drift <= 1e-12, "<= 1e-12");
    rec.check("absorbing_max_step_increase", increase, increase <= 0.0, "<= 0");
    rec.check("absorbing_final_mass", absorbed_final, absorbed_final < 1.0, "< 1");
    return rec.finish();
}

SuiteResult parametrix_suite() {
    Recorder rec("parametrix_vs_fd");
    auto a = [](double x) { return 1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * x); };
    auto b = [](double) { return 0.2; };
    const auto coeff = CoefficientField::stationary(a, b, 1.0);
    // Backward-equation Green function of u_t = a u_xx + b u_x equals the SDE
    // transition density with diffusion 2a and drift b, started at x and read at xi.
    const auto sde = CoefficientField::stationary([a](double x) { return 2.0 * a(x); }, b, 1.0);
    const double xi = 0.5;
    const ParametrixConfig cfg;

    FDGrid fine;
    fine.cells = 2048;
    fine.dt = 1e-5;
    const ParametrixSeries series(coeff, cfg, xi, 0.0, 0.1);
    double worst = 0.0;
    std::vector<double> probes{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<double> rel(probes.size());
    parallel_for(probes.size(), [&](std::size_t i) {
        FokkerPlanckSolver solver(sde, fine);
        const double ref = solver.density_at(solver.transition_density(probes[i], 0.0, 0.1), xi);
        rel[i] = std::abs(series.green(probes[i]) - ref) / ref;
    });
    for (double r : rel) worst = std::max(worst, r);
    rec.metric("relative_errors", rel);
    rec.check("max_relative_error", worst, worst <= 2e-2, "<= 2e-2");

    std::vector<double> lags{0.1, 0.05, 0.025, 0.0125};
    std::vector<double> scaled(lags.size());
    parallel_for(lags.size(), [&](std::size_t j) {
        const ParametrixSeries s(coeff, cfg, xi, 0.0, lags[j]);
        double sup = 0.0;
        for (std::size_t i = 0; i <= 200; ++i) sup = std::max(sup, s.green(static_cast<double>(i) / 200.0));
        scaled[j] = sup * std::sqrt(lags[j]);
    });
    rec.metric("sup_G_sqrt_lag", scaled);
    const double variation = *std::max_element(scaled.begin(), scaled.end()) /
                             *std::min_element(scaled.begin(), scaled.end());
    rec.check("sup_scaling_variation", variation, variation < 2.0, "< 2");

    std::vector<double> deltas{1e-2, 1e-3};
    std::vector<double> lip_probes{0.2, 0.5, 0.8};
    std::vector<std::vector<double>> g(deltas.size() + 1, std::vector<double>(lip_probes.size()));
    parallel_for(deltas.size() + 1, [&](std::size_t d) {
        const double shift = d == 0 ? 0.0 : deltas[d - 1];
        const auto c = CoefficientField::stationary([a, shift](double x) { return a(x) + shift; }, b, 1.0);
        const ParametrixSeries s(c, cfg, xi, 0.0, 0.1);
        for (std::size_t i = 0; i < lip_probes.size(); ++i) g[d][i] = s.green(lip_probes[i]);
    });
    double worst_change = 0.0;
    std::vector<double> quotients;
    for (std::size_t i = 0; i < lip_probes.size(); ++i) {
        const double q1 = std::abs(g[1][i] - g[0][i]) / deltas[0];
        const double q2 = std::abs(g[2][i] - g[0][i]) / deltas[1];
        quotients.push_back(q1);
        quotients.push_back(q2);
        worst_change = std::max(worst_change, std::abs(q1 - q2) / std::max(q2, 1e-300));
    }
    rec.metric("lipschitz_quotients", quotients);
    rec.check("lipschitz_relative_change", worst_change, worst_change <= 0.1, "<= 0.1");
    return rec.finish();
}

SuiteResult prior_regime_suite(const PriorConfig& prior, std::size_t draws, std::uint64_t seed) {
    Recorder rec("prior_regime");
    Rng rng(seed);
    const auto nodes = uniform_nodes(512);
    const double top = std::min(1.0 - std::exp(-1.0), prior.recovery_gamma);
    double worst_margin = std::numeric_limits<double>::infinity();
    std::size_t violations = 0;
    for (std::size_t d = 0; d < draws; ++d) {
        const SeriesState st = sample_eta(prior, rng);
        const SeriesFunction f = series_of(st, prior);
        double sup = 0.0;
        for (double x : nodes) sup = std::max(sup, std::abs(f(x)));
        const double bound = top / (static_cast<double>(prior.N_pop) * (2.0 + sup));
        const double m_a = build_U(st, prior).diffusion_floor();
        worst_margin = std::min(worst_margin, m_a / bound);
        if (!(m_a >= bound)) ++violations;
    }
    rec.metric("draws", draws);
    rec.metric("min_floor_over_bound", worst_margin);
    rec.check("floor_violations", static_cast<double>(violations), violations == 0, "== 0");

    const std::size_t moment_draws = 100000;
    double sum = 0.0;
    for (std::size_t i = 0; i < moment_draws; ++i) {
        const double e = beta_exp_quantile(rng.uniform(), 3.0);
        sum += e * e;
    }
    const double m2 = sum / static_cast<double>(moment_draws);
    const double exact = 1.0 / std::tgamma(1.0 / 3.0);
    rec.metric("second_moment_exact", exact);
    rec.check("second_moment_beta3", m2, std::abs(m2 - exact) <= 5e-3, "|m2 - 1/Gamma(1/3)| <= 5e-3");
    return rec.finish();
}

SuiteResult pcn_prior_suite(const PriorConfig& prior, std::size_t steps, double s, std::uint64_t seed) {
    Recorder rec("pcn_prior");
    Rng rng(seed);
    const ZetaLogLik zero = [](std::span<const double>) { return 0.0; };
    std::vector<double> zeta(prior.K + 1);
    for (double& z : zeta) z = rng.normal();
    double ll = 0.0;
    std::size_t accepted = 0;
    std::vector<double> chain;
    chain.reserve(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        PcnOutcome o = pcn_step(zeta, ll, s, zero, rng);
        accepted += o.accepted ? 1 : 0;
        zeta = std::move(o.zeta);
        ll = o.loglik;
        chain.push_back(eta_from_zeta(zeta[0], prior.beta));
    }
    Rng direct_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<double> direct(steps);
    for (double& d : direct) d = beta_exp_quantile(direct_rng.uniform(), prior.beta);
    const double rate = static_cast<double>(accepted) / static_cast<double>(steps);
    rec.metric("steps", steps);
    rec.metric("pcn_step", s);
    rec.check("acceptance_rate", rate, rate == 1.0, "== 1");
    const double ks = ks_statistic(chain, direct);
    rec.check("ks_eta0", ks, ks < 0.02, "< 0.02");
    return rec.finish();
}

SuiteResult hellinger_suite(const ObservationSet& obs, const PriorConfig& prior, const FDGrid& fd,
                            std::size_t samples, std::uint64_t seed) {
    Recorder rec("hellinger_truncation");
    Rng rng(seed);
    std::vector<SeriesState> draws;
    draws.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) draws.push_back(sample_eta(prior, rng));
    const auto full = log_likelihoods(draws, obs, prior, fd);
    std::vector<double> ks{5, 10, 20, 40, 80};
    std::vector<double> gaps, errors;
    for (double k : ks) {
        const auto trunc = log_likelihoods(draws, obs, prior, fd, static_cast<std::size_t>(k));
        const HellingerEstimate h = hellinger_from_logliks(full, trunc, 200, seed + static_cast<std::uint64_t>(k));
        gaps.push_back(h.value);
        errors.push_back(h.std_error);
    }
    rec.metric("k", ks);
    rec.metric("gap", gaps);
    rec.metric("std_error", errors);
    double worst_rise = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < gaps.size(); ++j)
        worst_rise = std::max(worst_rise, (gaps[j + 1] - gaps[j]) - std::max(errors[j], errors[j + 1]));
    rec.check("max_rise_beyond_std_error", worst_rise, worst_rise <= 0.0, "<= 0");
    std::vector<double> floored(gaps.size());
    for (std::size_t j = 0; j < gaps.size(); ++j) floored[j] = std::max(gaps[j], 1e-300);
    const double slope = log_log_slope(ks, floored);
    rec.check("log_log_slope", slope, slope < 0.0, "< 0");
    return rec.finish();
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw InputError("KS statistic needs two non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InputError("slope needs two or more matching points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<SuiteResult> run_validation(const ValidationOptions& opts) {
    opts.prior.validate();
    opts.fd.validate();
    const Dataset data = simulate_dataset(opts.sim, opts.prior.N_pop, opts.prior.recovery_gamma, opts.seed);
    std::vector<std::function<SuiteResult()>> suites{
        [] { return images_vs_fd_suite(); },
        [] { return boundary_mass_suite(); },
    };
    if (!opts.quick) suites.emplace_back([] { return parametrix_suite(); });
    suites.emplace_back([&] { return prior_regime_suite(opts.prior, opts.prior_draws, opts.seed + 1); });
    suites.emplace_back([&] { return pcn_prior_suite(opts.prior, opts.pcn_steps, opts.pcn_step, opts.seed + 2); });
    suites.emplace_back(
        [&] { return hellinger_suite(data.obs, opts.prior, opts.fd, opts.hellinger_samples, opts.seed + 3); });
    std::vector<SuiteResult> results(suites.size());
    parallel_for(suites.size(), [&](std::size_t i) { results[i] = suites[i](); });
    return results;
}

nlohmann::json to_json(const SuiteResult& r) {
    nlohmann::json j{{"name", r.name}, {"passed", r.passed}, {"metrics", r.metrics}};
    if (!r.passed) j["failure"] = r.failure;
    return j;
}

}  // namespace sdeinfer
