#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdeinfer/function_space.hpp"
#include "sdeinfer/rng.hpp"

namespace sdeinfer {

/// Random-series prior f = sum_{k<=K} gamma_k eta_k f_k with eta_k iid
/// beta-exponential, pushed forward to U = g(f) h and then to (a, b).
struct PriorConfig {
    double beta = 3.01;
    double theta = 4.0;
    std::size_t K = 99;  ///< highest retained mode index (K+1 modes)
    std::size_t N_pop = 100;
    double recovery_gamma = 0.5;

    void validate() const;

    /// gamma_0 = 1, gamma_k = k^-theta.
    double gamma(std::size_t k) const;

    /// Notes when (beta, theta) miss the well-posed regime for target
    /// smoothness alpha, taking l and q at their limits alpha + 1/2 and 2/alpha:
    /// beta > 2q - 1 and theta > 2l + 1 - 2/beta.
    std::vector<std::string> regime_warnings(double alpha = 1.0) const;

    nlohmann::json to_json() const;
};

struct SeriesState {
    double beta = 3.01;
    double theta = 4.0;
    std::vector<double> eta;

    std::size_t size() const noexcept { return eta.size(); }
};

nlohmann::json to_json(const SeriesState& s);
SeriesState series_state_from_json(const nlohmann::json& j);
/// Single-line JSON with 17 significant digits per number.
std::string dump_state(const SeriesState& s);

/// CDF of the density beta / (2 Gamma(1/beta)) exp(-|x|^beta).
double beta_exp_cdf(double x, double beta);
/// Upper tail 1 - CDF, accurate far into the tail.
double beta_exp_sf(double x, double beta);
/// Inverse of beta_exp_cdf; DomainError unless u lies in (0,1).
double beta_exp_quantile(double u, double beta);
double beta_exp_log_density(double x, double beta);

/// eta = Q_beta(Phi(zeta)) and its inverse, evaluated through the lighter tail.
double eta_from_zeta(double zeta, double beta);
double zeta_from_eta(double eta, double beta);
std::vector<double> eta_from_zeta(std::span<const double> zeta, double beta);
std::vector<double> zeta_from_eta(std::span<const double> eta, double beta);

SeriesState sample_eta(const PriorConfig& cfg, std::uint64_t seed);
SeriesState sample_eta(const PriorConfig& cfg, Rng& rng);

/// Positive increasing link: 1/(2-x) for x <= 0, x for x >= 1 and a quintic
/// Hermite bridge in between matching value, slope and curvature.
double link_g(double x);
double link_g_derivative(double x);
/// 1 - exp(x - 1).
double damping_h(double x);

/// Birth rate U on [0,1] with the quantities the coefficient map needs.
class RateField {
public:
    RateField(std::function<double(double)> U, double recovery_gamma, std::size_t N_pop,
              std::size_t floor_grid = 512);

    double U(double x) const { return U_(x); }
    double operator()(double x) const { return U_(x); }
    double D(double x) const { return gamma_ * x; }

    /// Grid minimum of (U(x) + gamma x) / N.
    double diffusion_floor() const noexcept { return m_a_; }
    double recovery_gamma() const noexcept { return gamma_; }
    std::size_t population() const noexcept { return N_; }

private:
    std::function<double(double)> U_;
    double gamma_;
    std::size_t N_;
    double m_a_;
};

/// f = sum gamma_k eta_k f_k for the state.
SeriesFunction series_of(const SeriesState& state, const PriorConfig& cfg);

RateField build_U(const SeriesState& state, const PriorConfig& cfg);

/// a = (U + D)/N, b = U - D with D(x) = recovery_gamma x, time independent on [0, horizon].
CoefficientField coeff_from_U(const RateField& U, double horizon);

/// Zeroes every mode with index > k.
SeriesState truncate(const SeriesState& state, std::size_t k);

/// Pointwise prior mean of U on the nodes, from `draws` Monte Carlo samples.
std::vector<double> prior_mean_U(const PriorConfig& cfg, std::span<const double> nodes,
                                 std::size_t draws, std::uint64_t seed);

}  // namespace sdeinfer
