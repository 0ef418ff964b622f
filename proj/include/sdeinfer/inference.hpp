#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdeinfer/fokker_planck.hpp"
#include "sdeinfer/prior.hpp"
#include "sdeinfer/rng.hpp"
#include "sdeinfer/simulate.hpp"

namespace sdeinfer {

struct ChainConfig {
    double pcn_step = 0.15;
    std::size_t iterations = 50000;
    std::size_t burn_in = 10000;
    std::size_t thinning = 10;
    std::uint64_t seed = 1;
    FDGrid fd{};
    /// Likelihood evaluated at truncate(state, k) when set.
    std::optional<std::size_t> truncate_k;

    void validate() const;
};

/// Log-likelihood of a whitened vector zeta.
using ZetaLogLik = std::function<double(std::span<const double> zeta)>;

struct PcnOutcome {
    std::vector<double> zeta;
    double loglik = 0.0;
    bool accepted = false;
};

/// One whitened pCN move from (zeta, loglik). ChainError when the proposal's
/// log-likelihood is NaN; -inf proposals are always rejected.
PcnOutcome pcn_step(std::span<const double> zeta, double loglik, double s,
                    const ZetaLogLik& ell, Rng& rng);

/// Log-likelihood of the observations under the coefficients of `state`;
/// 0 for fewer than two observations.
double state_log_likelihood(const SeriesState& state, const ObservationSet& obs,
                            const PriorConfig& prior, const FDGrid& fd,
                            std::optional<std::size_t> truncate_k = std::nullopt);

struct PosteriorRun {
    std::vector<SeriesState> samples;
    std::vector<double> sample_loglik;
    std::vector<double> loglik_trace;
    std::vector<char> accepted_trace;
    double acceptance_rate = 0.0;
    std::vector<double> grid;
    std::vector<double> cm_U;
    SeriesState map_state;
    double map_value = std::numeric_limits<double>::infinity();
    std::vector<std::string> warnings;
};

inline constexpr std::size_t kEstimateGridNodes = 256;

/// Called after every iteration with (iteration, current log-likelihood, accepted).
using ChainObserver = std::function<void(std::size_t, double, bool)>;

/// Whitened pCN chain started from a prior draw. Retains
/// floor((iterations - burn_in) / thinning) samples and the pointwise mean
/// of U over them on kEstimateGridNodes equispaced nodes. The MAP fields are
/// left for find_map.
PosteriorRun run_chain(const ChainConfig& cfg, const ObservationSet& obs, const PriorConfig& prior,
                       const ChainObserver& observer = {});

/// Pointwise mean of U over the states on the given nodes.
std::vector<double> conditional_mean(std::span<const SeriesState> states, const PriorConfig& prior,
                                     std::span<const double> nodes);

/// -log L + sum |eta_k|^beta; +inf when the likelihood rejects.
double map_objective(const SeriesState& state, const ObservationSet& obs, const PriorConfig& prior,
                     const FDGrid& fd, std::optional<std::size_t> truncate_k = std::nullopt);

/// The penalty sum |eta_k|^beta alone.
double map_penalty(const SeriesState& state);

struct MapSearch {
    bool refine = true;
    std::size_t sweeps = 2;
    double tolerance = 1e-6;  ///< golden-section bracket width per coordinate
};

/// Generic minimiser used by find_map: best of `candidates`, then optional
/// golden-section coordinate descent. The result never exceeds the best
/// candidate value. `known_values`, when non-empty, replaces evaluating the
/// objective at the candidates.
std::pair<std::vector<double>, double> minimise_from_candidates(
    std::span<const std::vector<double>> candidates,
    const std::function<double(std::span<const double>)>& objective, const MapSearch& search,
    std::span<const double> known_values = {});

/// MAP over the samples (and optionally refined). `sample_loglik`, when
/// given, holds the cached log-likelihood of each sample.
std::pair<SeriesState, double> find_map(std::span<const SeriesState> samples, const ObservationSet& obs,
                                        const PriorConfig& prior, const FDGrid& fd,
                                        const MapSearch& search = {},
                                        std::optional<std::size_t> truncate_k = std::nullopt,
                                        std::span<const double> sample_loglik = {});

struct HellingerEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// sqrt(mean((sqrt(L_i/Z) - sqrt(Lk_i/Zk))^2) / 2) from log-likelihoods at
/// common prior samples, with a bootstrap standard error.
HellingerEstimate hellinger_from_logliks(std::span<const double> full, std::span<const double> truncated,
                                         std::size_t bootstrap = 200, std::uint64_t seed = 7);

HellingerEstimate hellinger_truncation_gap(std::span<const SeriesState> prior_samples,
                                           const ObservationSet& obs, std::size_t k,
                                           const PriorConfig& prior, const FDGrid& fd);

/// State log-likelihoods at each sample (optionally truncated), in parallel.
std::vector<double> log_likelihoods(std::span<const SeriesState> samples, const ObservationSet& obs,
                                    const PriorConfig& prior, const FDGrid& fd,
                                    std::optional<std::size_t> truncate_k = std::nullopt);

/// Trapezoidal L2(0,1) distance between two functions sampled on equispaced nodes.
double l2_distance(std::span<const double> f, std::span<const double> g);

}  // namespace sdeinfer
