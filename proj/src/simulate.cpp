#include "sdeinfer/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "sdeinfer/errors.hpp"
#include "sdeinfer/rng.hpp"

namespace sdeinfer {

void ObservationSet::validate() const {
    if (s.size() != y.size())
        throw InputError(fmt::format("{} times but {} values", s.size(), y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(y[i] > 0.0 && y[i] < 1.0))
            throw InputError(fmt::format("y[{}] = {} outside (0,1)", i, y[i]));
        if (!(s[i] > (i ? s[i - 1] : 0.0)))
            throw InputError(fmt::format("times must be positive and increasing (index {})", i));
    }
    if (!s.empty() && s.back() > T * (1.0 + 1e-12))
        throw InputError(fmt::format("last time {} exceeds horizon {}", s.back(), T));
}

nlohmann::json to_json(const ObservationSet& obs) {
    return {{"s", obs.s}, {"y", obs.y}, {"T", obs.T}, {"clamped", obs.clamped}};
}

ObservationSet observations_from_json(const nlohmann::json& j) {
    ObservationSet obs;
    try {
        obs.s = j.at("s").get<std::vector<double>>();
        obs.y = j.at("y").get<std::vector<double>>();
        obs.T = j.at("T").get<double>();
        if (j.contains("clamped")) obs.clamped = j.at("clamped").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("malformed observation set: {}", e.what()));
    }
    obs.validate();
    return obs;
}

void write_path_csv(std::ostream& os, const Path& path) {
    os << "t,x\n";
    for (std::size_t i = 0; i < path.t.size(); ++i) fmt::print(os, "{:.17g},{:.17g}\n", path.t[i], path.x[i]);
}

double reflect_unit(double x) {
    if (!std::isfinite(x)) return x;
    // Reduce modulo the period 2 of the fold, then mirror once.
    x = std::fmod(std::abs(x), 2.0);
    return x > 1.0 ? 2.0 - x : x;
}

Path euler_maruyama(const CoefficientField& coeff, double x0, double dt_sim, double T,
                    std::uint64_t seed) {
    if (!(dt_sim > 0.0)) throw InputError("dt_sim must be positive");
    if (!(T > 0.0)) throw InputError("horizon must be positive");
    if (!(x0 >= 0.0 && x0 <= 1.0)) throw InputError(fmt::format("x0 = {} outside [0,1]", x0));
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::round(T / dt_sim)));
    const double dt = T / static_cast<double>(steps);
    Rng rng(seed);
    Path path;
    path.t.resize(steps + 1);
    path.x.resize(steps + 1);
    path.t[0] = 0.0;
    path.x[0] = x0;
    double x = x0;
    for (std::size_t j = 0; j < steps; ++j) {
        const double t = static_cast<double>(j) * dt;
        const double a = coeff.a(x, t);
        const double b = coeff.b(x, t);
        if (!(a >= 0.0) || !std::isfinite(a) || !std::isfinite(b))
            throw SimulationError(fmt::format("coefficients unusable at x = {} (a = {}, b = {})", x, a, b), j);
        x = reflect_unit(x + b * dt + std::sqrt(a * dt) * rng.normal());
        if (!std::isfinite(x)) throw SimulationError("non-finite Euler step", j);
        path.t[j + 1] = static_cast<double>(j + 1) * dt;
        path.x[j + 1] = x;
    }
    path.t[steps] = T;
    return path;
}

std::vector<double> regular_times(double T, std::size_t n) {
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = T * static_cast<double>(i + 1) / static_cast<double>(n);
    return s;
}

ObservationSet observe(const Path& path, std::span<const double> s) {
    if (s.empty()) throw InputError("no observation times requested");
    if (path.t.size() < 2) throw InputError("path has fewer than two knots");
    const double horizon = path.t.back();
    ObservationSet obs;
    obs.T = horizon;
    obs.s.assign(s.begin(), s.end());
    obs.y.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double si = s[i];
        if (!(si >= path.t.front() && si <= horizon * (1.0 + 1e-12)))
            throw InputError(fmt::format("time {} outside the path horizon [0, {}]", si, horizon));
        auto it = std::upper_bound(path.t.begin(), path.t.end(), si);
        std::size_t hi = static_cast<std::size_t>(it - path.t.begin());
        hi = std::clamp<std::size_t>(hi, 1, path.t.size() - 1);
        const std::size_t lo = hi - 1;
        const double w = std::clamp((si - path.t[lo]) / (path.t[hi] - path.t[lo]), 0.0, 1.0);
        double v = w == 0.0 ? path.x[lo] : w == 1.0 ? path.x[hi] : (1.0 - w) * path.x[lo] + w * path.x[hi];
        if (v < kObservationClip || v > 1.0 - kObservationClip) {
            v = std::clamp(v, kObservationClip, 1.0 - kObservationClip);
            ++obs.clamped;
        }
        obs.y[i] = v;
    }
    obs.validate();
    return obs;
}

void SimConfig::validate() const {
    if (!(x0 >= 0.0 && x0 <= 1.0)) throw ConfigError("sim.x0", "must lie in [0,1]");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("sim.dt", "must be positive");
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("sim.T", "must be positive");
    if (truth.empty()) throw ConfigError("sim.truth", "needs at least one coefficient");
    for (double c : truth)
        if (!std::isfinite(c)) throw ConfigError("sim.truth", "coefficients must be finite");
}

double SimConfig::truth_U(double x) const {
    double v = 0.0;
    for (std::size_t i = truth.size(); i-- > 0;) v = v * x + truth[i];
    return v;
}

Dataset simulate_dataset(const SimConfig& sim, std::size_t N_pop, double recovery_gamma,
                         std::uint64_t seed) {
    sim.validate();
    const double n = static_cast<double>(N_pop);
    auto coeff = CoefficientField::stationary(
        [sim, recovery_gamma, n](double x) { return (sim.truth_U(x) + recovery_gamma * x) / n; },
        [sim, recovery_gamma](double x) { return sim.truth_U(x) - recovery_gamma * x; }, sim.T);
    Dataset d;
    d.path = euler_maruyama(coeff, sim.x0, sim.dt, sim.T, seed);
    if (sim.n_obs == 0) {
        d.obs.T = sim.T;
        return d;
    }
    const auto s = regular_times(sim.T, sim.n_obs);
    d.obs = observe(d.path, s);
    return d;
}

void BDSpec::validate() const {
    if (N < 1) throw InputError("population N must be >= 1");
    if (!U || !D) throw InputError("birth-death spec needs both rate functions");
    if (Y0 > N) throw InputError(fmt::format("initial state {} exceeds N = {}", Y0, N));
}

std::size_t JumpPath::state_at(double time) const {
    auto it = std::upper_bound(t.begin(), t.end(), time);
    if (it == t.begin()) return k.front();
    return k[static_cast<std::size_t>(it - t.begin()) - 1];
}

JumpPath gillespie_bd(const BDSpec& spec, double T, std::uint64_t seed) {
    spec.validate();
    if (!(T > 0.0)) throw InputError("horizon must be positive");
    Rng rng(seed);
    const double n = static_cast<double>(spec.N);
    JumpPath path;
    path.T = T;
    path.t.push_back(0.0);
    path.k.push_back(spec.Y0);
    std::size_t k = spec.Y0;
    double t = 0.0;
    for (std::size_t step = 0;; ++step) {
        const double x = static_cast<double>(k) / n;
        const double up = k < spec.N ? n * spec.U(x) : 0.0;
        const double down = k > 0 ? n * spec.D(x) : 0.0;
        if (!(up >= 0.0) || !(down >= 0.0) || !std::isfinite(up + down))
            throw SimulationError(fmt::format("invalid jump rates at k = {} (up {}, down {})", k, up, down), step);
        const double total = up + down;
        if (total == 0.0) {
            path.absorbed = true;
            break;
        }
        t += rng.exponential(total);
        if (t > T) break;
        k = rng.uniform() * total < up ? k + 1 : k - 1;
        path.t.push_back(t);
        path.k.push_back(k);
    }
    return path;
}

}  // namespace sdeinfer
