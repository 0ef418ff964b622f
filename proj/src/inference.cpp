#include "sdeinfer/inference.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sdeinfer/errors.hpp"
#include "sdeinfer/parallel.hpp"

namespace sdeinfer {

void ChainConfig::validate() const {
    if (!(pcn_step > 0.0 && pcn_step <= 1.0)) throw ConfigError("chain.pcn_step", "must lie in (0,1]");
    if (iterations < 1) throw ConfigError("chain.iterations", "must be >= 1");
    if (burn_in >= iterations) throw ConfigError("chain.burn_in", "must be below iterations");
    if (thinning < 1) throw ConfigError("chain.thinning", "must be >= 1");
    fd.validate();
}

PcnOutcome pcn_step(std::span<const double> zeta, double loglik, double s, const ZetaLogLik& ell,
                    Rng& rng) {
    const double keep = std::sqrt(std::max(0.0, 1.0 - s * s));
    PcnOutcome out;
    out.zeta.resize(zeta.size());
    for (std::size_t k = 0; k < zeta.size(); ++k) out.zeta[k] = keep * zeta[k] + s * rng.normal();
    const double proposed = ell(out.zeta);
    const double u = rng.uniform();
    if (std::isnan(proposed)) throw ChainError("log-likelihood of the pCN proposal is NaN");
    const bool accept = proposed != kRejectedLogLikelihood &&
                        (loglik == kRejectedLogLikelihood || std::log(u) < proposed - loglik);
    if (accept) {
        out.loglik = proposed;
        out.accepted = true;
    } else {
        out.zeta.assign(zeta.begin(), zeta.end());
        out.loglik = loglik;
    }
    return out;
}

double state_log_likelihood(const SeriesState& state, const ObservationSet& obs,
                            const PriorConfig& prior, const FDGrid& fd,
                            std::optional<std::size_t> truncate_k) {
    if (obs.n() < 2) return 0.0;
    const SeriesState used = truncate_k ? truncate(state, *truncate_k) : state;
    const CoefficientField coeff = coeff_from_U(build_U(used, prior), obs.T);
    return log_likelihood(coeff, fd, obs);
}

std::vector<double> conditional_mean(std::span<const SeriesState> states, const PriorConfig& prior,
                                     std::span<const double> nodes) {
    std::vector<double> mean(nodes.size(), 0.0);
    for (const auto& st : states) {
        const SeriesFunction f = series_of(st, prior);
        for (std::size_t i = 0; i < nodes.size(); ++i) mean[i] += link_g(f(nodes[i])) * damping_h(nodes[i]);
    }
    if (!states.empty())
        for (double& m : mean) m /= static_cast<double>(states.size());
    return mean;
}

PosteriorRun run_chain(const ChainConfig& cfg, const ObservationSet& obs, const PriorConfig& prior,
                       const ChainObserver& observer) {
    cfg.validate();
    prior.validate();
    obs.validate();
    Rng rng(cfg.seed);
    const std::size_t dim = prior.K + 1;

    auto to_state = [&](std::span<const double> zeta) {
        return SeriesState{prior.beta, prior.theta, eta_from_zeta(zeta, prior.beta)};
    };
    ZetaLogLik ell = [&](std::span<const double> zeta) {
        const SeriesState st = to_state(zeta);
        try {
            return state_log_likelihood(st, obs, prior, cfg.fd, cfg.truncate_k);
        } catch (const ChainError&) {
            throw;
        } catch (const Error& e) {
            throw ChainError(fmt::format("likelihood failed ({}) at state {}", e.what(), dump_state(st)));
        }
    };

    std::vector<double> zeta(dim);
    for (double& z : zeta) z = rng.normal();
    double loglik = ell(zeta);
    if (std::isnan(loglik)) throw ChainError("initial log-likelihood is NaN");

    PosteriorRun run;
    run.loglik_trace.reserve(cfg.iterations);
    run.accepted_trace.reserve(cfg.iterations);
    std::size_t accepted = 0;
    std::size_t accepted_after_burn = 0;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        PcnOutcome step = pcn_step(zeta, loglik, cfg.pcn_step, ell, rng);
        zeta = std::move(step.zeta);
        loglik = step.loglik;
        run.loglik_trace.push_back(loglik);
        run.accepted_trace.push_back(step.accepted ? 1 : 0);
        if (step.accepted) {
            ++accepted;
            if (it >= cfg.burn_in) ++accepted_after_burn;
        }
        if (it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thinning == 0) {
            run.samples.push_back(to_state(zeta));
            run.sample_loglik.push_back(loglik);
        }
        if (observer) observer(it, loglik, step.accepted);
    }
    run.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.iterations);
    const double post_rate = static_cast<double>(accepted_after_burn) /
                             static_cast<double>(cfg.iterations - cfg.burn_in);
    if (post_rate < 1e-3)
        run.warnings.push_back(fmt::format(
            "acceptance rate {:.3g} after burn-in is below 1e-3; pcn_step {} is likely too large", post_rate,
            cfg.pcn_step));
    run.grid = uniform_nodes(kEstimateGridNodes);
    run.cm_U = conditional_mean(run.samples, prior, run.grid);
    return run;
}

double map_penalty(const SeriesState& state) {
    double sum = 0.0;
    for (double e : state.eta) sum += std::pow(std::abs(e), state.beta);
    return sum;
}

double map_objective(const SeriesState& state, const ObservationSet& obs, const PriorConfig& prior,
                     const FDGrid& fd, std::optional<std::size_t> truncate_k) {
    const double ll = state_log_likelihood(state, obs, prior, fd, truncate_k);
    if (ll == kRejectedLogLikelihood) return std::numeric_limits<double>::infinity();
    return -ll + map_penalty(state);
}

namespace {

constexpr double kGolden = 0.6180339887498949;

// Minimises phi along one coordinate starting at x0 with value f0. Returns the
// best point seen and its value.
std::pair<double, double> line_minimise(const std::function<double(double)>& phi, double x0, double f0,
                                        double tol) {
    double best_x = x0;
    double best_f = f0;
    auto eval = [&](double x) {
        const double v = phi(x);
        if (v < best_f) {
            best_f = v;
            best_x = x;
        }
        return v;
    };

    const double h = std::max(0.25, 0.25 * std::abs(x0));
    double lo, hi;
    const double f_plus = eval(x0 + h);
    if (f_plus < f0) {
        // Expand forward until the value rises.
        double a = x0, b = x0 + h, fb = f_plus, step = h;
        hi = b + step;
        for (int i = 0; i < 40; ++i) {
            step /= kGolden;
            const double c = b + step;
            const double fc = eval(c);
            hi = c;
            if (fc >= fb) break;
            a = b;
            b = c;
            fb = fc;
        }
        lo = a;
    } else {
        const double f_minus = eval(x0 - h);
        if (f_minus < f0) {
            double a = x0, b = x0 - h, fb = f_minus, step = h;
            lo = b - step;
            for (int i = 0; i < 40; ++i) {
                step /= kGolden;
                const double c = b - step;
                const double fc = eval(c);
                lo = c;
                if (fc >= fb) break;
                a = b;
                b = c;
                fb = fc;
            }
            hi = a;
        } else {
            lo = x0 - h;
            hi = x0 + h;
        }
    }

    double x1 = hi - kGolden * (hi - lo);
    double x2 = lo + kGolden * (hi - lo);
    double f1 = eval(x1);
    double f2 = eval(x2);
    for (int i = 0; i < 200 && hi - lo > tol; ++i) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - kGolden * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + kGolden * (hi - lo);
            f2 = eval(x2);
        }
    }
    return {best_x, best_f};
}

}  // namespace

std::pair<std::vector<double>, double> minimise_from_candidates(
    std::span<const std::vector<double>> candidates,
    const std::function<double(std::span<const double>)>& objective, const MapSearch& search,
    std::span<const double> known_values) {
    if (candidates.empty()) throw InputError("MAP search needs at least one candidate");
    std::vector<double> values(candidates.size());
    if (!known_values.empty()) {
        if (known_values.size() != candidates.size())
            throw InputError("known objective values do not match the candidates");
        values.assign(known_values.begin(), known_values.end());
    } else {
        parallel_for(candidates.size(), [&](std::size_t i) { values[i] = objective(candidates[i]); });
    }
    std::size_t arg = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::isnan(values[i])) throw ChainError(fmt::format("MAP objective is NaN at candidate {}", i));
        if (values[i] < values[arg]) arg = i;
    }
    std::vector<double> x = candidates[arg];
    double fx = values[arg];
    if (!search.refine || !std::isfinite(fx)) return {x, fx};

    for (std::size_t sweep = 0; sweep < search.sweeps; ++sweep) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            std::vector<double> trial = x;
            auto phi = [&](double v) {
                trial[j] = v;
                const double r = objective(trial);
                return std::isnan(r) ? std::numeric_limits<double>::infinity() : r;
            };
            const auto [xj, fj] = line_minimise(phi, x[j], fx, search.tolerance);
            if (fj < fx) {
                x[j] = xj;
                fx = fj;
            }
        }
    }
    return {x, fx};
}

std::pair<SeriesState, double> find_map(std::span<const SeriesState> samples, const ObservationSet& obs,
                                        const PriorConfig& prior, const FDGrid& fd, const MapSearch& search,
                                        std::optional<std::size_t> truncate_k,
                                        std::span<const double> sample_loglik) {
    if (samples.empty()) throw InputError("find_map needs a non-empty sample");
    if (!sample_loglik.empty() && sample_loglik.size() != samples.size())
        throw InputError("cached log-likelihoods do not match the samples");
    std::vector<std::vector<double>> candidates;
    candidates.reserve(samples.size());
    for (const auto& s : samples) candidates.push_back(s.eta);
    const double beta = samples.front().beta;
    const double theta = samples.front().theta;
    auto objective = [&](std::span<const double> eta) {
        const SeriesState st{beta, theta, std::vector<double>(eta.begin(), eta.end())};
        return map_objective(st, obs, prior, fd, truncate_k);
    };
    std::vector<double> known;
    for (std::size_t i = 0; i < sample_loglik.size(); ++i)
        known.push_back(sample_loglik[i] == kRejectedLogLikelihood ? std::numeric_limits<double>::infinity()
                                                                   : -sample_loglik[i] + map_penalty(samples[i]));
    auto [eta, value] = minimise_from_candidates(candidates, objective, search, known);
    return {SeriesState{beta, theta, std::move(eta)}, value};
}

namespace {

double log_mean_exp(std::span<const double> v, std::span<const std::size_t> idx) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i : idx) m = std::max(m, v[i]);
    if (m == -std::numeric_limits<double>::infinity()) return m;
    double sum = 0.0;
    for (std::size_t i : idx) sum += std::exp(v[i] - m);
    return m + std::log(sum / static_cast<double>(idx.size()));
}

double hellinger_on(std::span<const double> full, std::span<const double> trunc,
                    std::span<const std::size_t> idx) {
    const double lz = log_mean_exp(full, idx);
    const double lzk = log_mean_exp(trunc, idx);
    if (!std::isfinite(lz) || !std::isfinite(lzk))
        throw DegenerateLikelihoodError("every sample has zero likelihood; normalising constant vanishes");
    double acc = 0.0;
    for (std::size_t i : idx) {
        const double d = std::exp(0.5 * (full[i] - lz)) - std::exp(0.5 * (trunc[i] - lzk));
        acc += d * d;
    }
    return std::sqrt(0.5 * acc / static_cast<double>(idx.size()));
}

}  // namespace

HellingerEstimate hellinger_from_logliks(std::span<const double> full, std::span<const double> truncated,
                                         std::size_t bootstrap, std::uint64_t seed) {
    if (full.size() != truncated.size() || full.empty())
        throw InputError("Hellinger estimate needs equally sized, non-empty likelihood sets");
    for (std::size_t i = 0; i < full.size(); ++i)
        if (std::isnan(full[i]) || std::isnan(truncated[i]))
            throw InputError("Hellinger estimate received a NaN log-likelihood");
    const std::size_t m = full.size();
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    HellingerEstimate est;
    est.value = hellinger_on(full, truncated, idx);
    if (bootstrap < 2) return est;
    Rng rng(seed);
    double sum = 0.0, sum2 = 0.0;
    std::size_t used = 0;
    for (std::size_t b = 0; b < bootstrap; ++b) {
        for (auto& i : idx) i = std::min(m - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(m)));
        try {
            const double v = hellinger_on(full, truncated, idx);
            sum += v;
            sum2 += v * v;
            ++used;
        } catch (const DegenerateLikelihoodError&) {
        }
    }
    if (used > 1) {
        const double mean = sum / static_cast<double>(used);
        est.std_error = std::sqrt(std::max(0.0, (sum2 - static_cast<double>(used) * mean * mean) /
                                                    static_cast<double>(used - 1)));
    }
    return est;
}

std::vector<double> log_likelihoods(std::span<const SeriesState> samples, const ObservationSet& obs,
                                    const PriorConfig& prior, const FDGrid& fd,
                                    std::optional<std::size_t> truncate_k) {
    std::vector<double> out(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        out[i] = state_log_likelihood(samples[i], obs, prior, fd, truncate_k);
    });
    return out;
}

HellingerEstimate hellinger_truncation_gap(std::span<const SeriesState> prior_samples,
                                           const ObservationSet& obs, std::size_t k,
                                           const PriorConfig& prior, const FDGrid& fd) {
    if (prior_samples.size() < 100)
        throw InputError(fmt::format("Hellinger gap needs at least 100 prior samples, got {}", prior_samples.size()));
    const auto full = log_likelihoods(prior_samples, obs, prior, fd);
    const auto trunc = log_likelihoods(prior_samples, obs, prior, fd, k);
    return hellinger_from_logliks(full, trunc);
}

double l2_distance(std::span<const double> f, std::span<const double> g) {
    if (f.size() != g.size() || f.size() < 2) throw InputError("L2 distance needs matching grids of >= 2 nodes");
    const double h = 1.0 / static_cast<double>(f.size() - 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double d = f[i] - g[i];
        acc += (i == 0 || i + 1 == f.size() ? 0.5 : 1.0) * d * d;
    }
    return std::sqrt(acc * h);
}

}  // namespace sdeinfer
