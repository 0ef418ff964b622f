#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "json.hpp"
#include "sdeinfer/function_space.hpp"

namespace sdeinfer {

/// Discrete observations y_i at strictly increasing times 0 < s_1 < ... <= T.
struct ObservationSet {
    std::vector<double> s;
    std::vector<double> y;
    double T = 0.0;
    /// Values moved into (clip, 1 - clip) by observe().
    std::size_t clamped = 0;

    std::size_t n() const noexcept { return y.size(); }
    /// InputError on length mismatch, unordered times or values outside (0,1).
    void validate() const;
};

nlohmann::json to_json(const ObservationSet& obs);
ObservationSet observations_from_json(const nlohmann::json& j);

struct Path {
    std::vector<double> t;
    std::vector<double> x;
};

/// "t,x" header then one row per knot, 17 significant digits.
void write_path_csv(std::ostream& os, const Path& path);

/// Folds x into [0,1] by repeated mirroring at the walls.
double reflect_unit(double x);

/// Reflected Euler-Maruyama: X += b dt + sqrt(a dt) Z, then folded into
/// [0,1]. The step is T / round(T / dt_sim).
Path euler_maruyama(const CoefficientField& coeff, double x0, double dt_sim, double T,
                    std::uint64_t seed);

/// s_i = T i / n for i = 1..n.
std::vector<double> regular_times(double T, std::size_t n);

inline constexpr double kObservationClip = 1e-6;

/// Linear interpolation of the path at the times s, clamped into
/// (kObservationClip, 1 - kObservationClip).
ObservationSet observe(const Path& path, std::span<const double> s);

/// Synthetic experiment: truth U given by polynomial coefficients in x,
/// diffusion approximation with D(x) = recovery_gamma x, reflected Euler path
/// from x0 observed at n_obs regular times on (0, T].
struct SimConfig {
    double x0 = 0.1;
    double dt = 1e-3;
    double T = 10.0;
    std::size_t n_obs = 100;
    std::vector<double> truth{1.0, 0.0, -1.0};

    void validate() const;
    double truth_U(double x) const;
};

struct Dataset {
    Path path;
    ObservationSet obs;
};

Dataset simulate_dataset(const SimConfig& sim, std::size_t N_pop, double recovery_gamma,
                         std::uint64_t seed);

/// Birth-death chain on {0..N} with up-rate N U(k/N) and down-rate N D(k/N).
struct BDSpec {
    std::size_t N = 100;
    std::function<double(double)> U;
    std::function<double(double)> D;
    std::size_t Y0 = 0;

    void validate() const;
};

struct JumpPath {
    std::vector<double> t;          ///< jump times, t[0] = 0
    std::vector<std::size_t> k;     ///< state held from t[i] on
    double T = 0.0;
    bool absorbed = false;          ///< both rates vanished before T

    /// State at time `time` in [0, T].
    std::size_t state_at(double time) const;
};

/// Exact (Gillespie) simulation on [0, T].
JumpPath gillespie_bd(const BDSpec& spec, double T, std::uint64_t seed);

}  // namespace sdeinfer
