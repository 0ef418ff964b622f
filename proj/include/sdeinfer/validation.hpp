#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdeinfer/fokker_planck.hpp"
#include "sdeinfer/prior.hpp"
#include "sdeinfer/simulate.hpp"

namespace sdeinfer {

struct SuiteResult {
    std::string name;
    bool passed = true;
    /// First metric that missed its threshold, empty when passed.
    std::string failure;
    nlohmann::json metrics = nlohmann::json::object();
    double seconds = 0.0;
};

struct ValidationOptions {
    bool quick = false;  ///< skip the parametrix suite
    std::uint64_t seed = 1;
    PriorConfig prior{};
    FDGrid fd{};
    SimConfig sim{};
    std::size_t pcn_steps = 100000;
    double pcn_step = 0.5;
    std::size_t prior_draws = 10000;
    std::size_t hellinger_samples = 200;
};

/// Reflecting FD against the Neumann images kernel for a = 1, b = 0, plus the
/// error ratio under halving of the cell width.
SuiteResult images_vs_fd_suite();
/// Kernel boundary values and mass, FD mass conservation and decay.
SuiteResult boundary_mass_suite();
/// Parametrix Green function against a fine FD solve, the sqrt(t - tau)
/// scaling of its supremum and the stability of coefficient difference quotients.
SuiteResult parametrix_suite();
/// Ellipticity lower bound over prior draws and the second moment at beta = 3.
SuiteResult prior_regime_suite(const PriorConfig& prior, std::size_t draws, std::uint64_t seed);
/// pCN with a vanishing likelihood against direct prior sampling.
SuiteResult pcn_prior_suite(const PriorConfig& prior, std::size_t steps, double s, std::uint64_t seed);
/// Truncation gap over k in {5,10,20,40,80} on a simulated dataset.
SuiteResult hellinger_suite(const ObservationSet& obs, const PriorConfig& prior, const FDGrid& fd,
                            std::size_t samples, std::uint64_t seed);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

std::vector<SuiteResult> run_validation(const ValidationOptions& opts);

nlohmann::json to_json(const SuiteResult& r);

}  // namespace sdeinfer
