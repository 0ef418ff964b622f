#include "sdeinfer/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "sdeinfer/errors.hpp"

namespace sdeinfer {

void PriorConfig::validate() const {
    if (!(beta > 2.0) || !std::isfinite(beta)) throw ConfigError("prior.beta", "must exceed 2");
    if (!(theta > 0.0) || !std::isfinite(theta)) throw ConfigError("prior.theta", "must be positive");
    if (K < 1) throw ConfigError("prior.K", "must be >= 1");
    if (N_pop < 1) throw ConfigError("prior.N", "must be >= 1");
    if (!(recovery_gamma > 0.0) || !std::isfinite(recovery_gamma))
        throw ConfigError("prior.gamma", "must be positive");
}

double PriorConfig::gamma(std::size_t k) const {
    return k == 0 ? 1.0 : std::pow(static_cast<double>(k), -theta);
}

std::vector<std::string> PriorConfig::regime_warnings(double alpha) const {
    std::vector<std::string> notes;
    const double q = 2.0 / alpha;
    const double l = alpha + 0.5;
    if (!(beta > 2.0 * q - 1.0))
        notes.push_back(fmt::format("beta = {} does not exceed 2q - 1 = {} for alpha = {}", beta,
                                    2.0 * q - 1.0, alpha));
    const double theta_min = 2.0 * l + 1.0 - 2.0 / beta;
    if (!(theta > theta_min))
        notes.push_back(fmt::format("theta = {} does not exceed 2l + 1 - 2/beta = {} for alpha = {}",
                                    theta, theta_min, alpha));
    return notes;
}

nlohmann::json PriorConfig::to_json() const {
    return {{"beta", beta}, {"theta", theta}, {"K", K}, {"N", N_pop}, {"gamma", recovery_gamma}};
}

nlohmann::json to_json(const SeriesState& s) {
    return {{"beta", s.beta}, {"theta", s.theta}, {"eta", s.eta}};
}

SeriesState series_state_from_json(const nlohmann::json& j) {
    try {
        SeriesState s;
        s.beta = j.at("beta").get<double>();
        s.theta = j.at("theta").get<double>();
        s.eta = j.at("eta").get<std::vector<double>>();
        for (double v : s.eta)
            if (!std::isfinite(v)) throw InputError("series state holds a non-finite coefficient");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("malformed series state: {}", e.what()));
    }
}

std::string dump_state(const SeriesState& s) {
    std::string out = fmt::format("{{\"beta\":{:.17g},\"theta\":{:.17g},\"eta\":[", s.beta, s.theta);
    for (std::size_t i = 0; i < s.eta.size(); ++i) {
        if (i) out += ',';
        out += fmt::format("{:.17g}", s.eta[i]);
    }
    out += "]}";
    return out;
}

namespace {

void check_beta(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw DomainError(fmt::format("beta = {} must be positive", beta));
}

// |x|^beta is Gamma(1/beta, 1) distributed; half the upper regularised gamma
// gives the tail mass beyond |x|.
double half_tail(double ax, double beta) {
    if (ax == 0.0) return 0.5;
    return 0.5 * boost::math::gamma_q(1.0 / beta, std::pow(ax, beta));
}

// |x| with tail mass q = P(X > |x|), q in (0, 1/2].
double abs_from_tail(double q, double beta) {
    if (q >= 0.5) return 0.0;
    q = std::max(q, std::numeric_limits<double>::min());
    return std::pow(boost::math::gamma_q_inv(1.0 / beta, 2.0 * q), 1.0 / beta);
}

}  // namespace

double beta_exp_cdf(double x, double beta) {
    check_beta(beta);
    const double tail = half_tail(std::abs(x), beta);
    return x < 0.0 ? tail : 1.0 - tail;
}

double beta_exp_sf(double x, double beta) {
    check_beta(beta);
    const double tail = half_tail(std::abs(x), beta);
    return x < 0.0 ? 1.0 - tail : tail;
}

double beta_exp_quantile(double u, double beta) {
    check_beta(beta);
    if (!(u > 0.0 && u < 1.0)) throw DomainError(fmt::format("quantile level {} outside (0,1)", u));
    if (u == 0.5) return 0.0;
    return u < 0.5 ? -abs_from_tail(u, beta) : abs_from_tail(1.0 - u, beta);
}

double beta_exp_log_density(double x, double beta) {
    check_beta(beta);
    return std::log(beta / 2.0) - std::lgamma(1.0 / beta) - std::pow(std::abs(x), beta);
}

double eta_from_zeta(double zeta, double beta) {
    const double q = 0.5 * std::erfc(std::abs(zeta) / std::numbers::sqrt2);
    const double m = abs_from_tail(q, beta);
    return zeta < 0.0 ? -m : m;
}

double zeta_from_eta(double eta, double beta) {
    const double q = half_tail(std::abs(eta), beta);
    if (q >= 0.5) return 0.0;
    const double m = std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * std::max(q, std::numeric_limits<double>::min()));
    return eta < 0.0 ? -m : m;
}

std::vector<double> eta_from_zeta(std::span<const double> zeta, double beta) {
    std::vector<double> out(zeta.size());
    for (std::size_t i = 0; i < zeta.size(); ++i) out[i] = eta_from_zeta(zeta[i], beta);
    return out;
}

std::vector<double> zeta_from_eta(std::span<const double> eta, double beta) {
    std::vector<double> out(eta.size());
    for (std::size_t i = 0; i < eta.size(); ++i) out[i] = zeta_from_eta(eta[i], beta);
    return out;
}

SeriesState sample_eta(const PriorConfig& cfg, Rng& rng) {
    cfg.validate();
    SeriesState s{cfg.beta, cfg.theta, std::vector<double>(cfg.K + 1)};
    for (double& e : s.eta) e = beta_exp_quantile(rng.uniform(), cfg.beta);
    return s;
}

SeriesState sample_eta(const PriorConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    return sample_eta(cfg, rng);
}

double link_g(double x) {
    if (x <= 0.0) return 1.0 / (2.0 - x);
    if (x >= 1.0) return x;
    return 0.5 + x * (0.25 + x * (0.125 + x * (-0.875 + x * (1.875 - 0.875 * x))));
}

double link_g_derivative(double x) {
    if (x <= 0.0) return 1.0 / ((2.0 - x) * (2.0 - x));
    if (x >= 1.0) return 1.0;
    return 0.25 + x * (0.25 + x * (-2.625 + x * (7.5 - 4.375 * x)));
}

double damping_h(double x) { return -std::expm1(x - 1.0); }

RateField::RateField(std::function<double(double)> U, double recovery_gamma, std::size_t N_pop,
                     std::size_t floor_grid)
    : U_(std::move(U)), gamma_(recovery_gamma), N_(N_pop) {
    if (N_ < 1) throw ConfigError("N", "population must be >= 1");
    m_a_ = std::numeric_limits<double>::infinity();
    for (double x : uniform_nodes(std::max<std::size_t>(floor_grid, 2))) {
        const double v = (U_(x) + gamma_ * x) / static_cast<double>(N_);
        if (!std::isfinite(v)) throw EvaluationError(fmt::format("U({}) is not finite", x));
        m_a_ = std::min(m_a_, v);
    }
}

SeriesFunction series_of(const SeriesState& state, const PriorConfig& cfg) {
    std::vector<double> c(state.eta.size());
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = cfg.gamma(k) * state.eta[k];
    return SeriesFunction(std::move(c));
}

RateField build_U(const SeriesState& state, const PriorConfig& cfg) {
    for (double e : state.eta)
        if (!std::isfinite(e)) throw InputError("series state holds a non-finite coefficient");
    SeriesFunction f = series_of(state, cfg);
    auto U = [f = std::move(f)](double x) { return link_g(f(x)) * damping_h(x); };
    return RateField(std::move(U), cfg.recovery_gamma, cfg.N_pop);
}

CoefficientField coeff_from_U(const RateField& U, double horizon) {
    const double n = static_cast<double>(U.population());
    const double gamma = U.recovery_gamma();
    auto u_fn = [U](double x) { return U(x); };
    return CoefficientField::stationary([u_fn, gamma, n](double x) { return (u_fn(x) + gamma * x) / n; },
                                        [u_fn, gamma](double x) { return u_fn(x) - gamma * x; }, horizon);
}

SeriesState truncate(const SeriesState& state, std::size_t k) {
    SeriesState out = state;
    for (std::size_t i = k + 1; i < out.eta.size(); ++i) out.eta[i] = 0.0;
    return out;
}

std::vector<double> prior_mean_U(const PriorConfig& cfg, std::span<const double> nodes,
                                 std::size_t draws, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> mean(nodes.size(), 0.0);
    for (std::size_t d = 0; d < draws; ++d) {
        const SeriesFunction f = series_of(sample_eta(cfg, rng), cfg);
        for (std::size_t i = 0; i < nodes.size(); ++i) mean[i] += link_g(f(nodes[i])) * damping_h(nodes[i]);
    }
    for (double& m : mean) m /= static_cast<double>(std::max<std::size_t>(draws, 1));
    return mean;
}

}  // namespace sdeinfer
