#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <map>
#include <vector>

#include "sdeinfer/function_space.hpp"

namespace sdeinfer {

struct ObservationSet;

enum class FluxBoundary { Reflecting, Absorbing };

/// Uniform cell-centred grid and time-stepping parameters for the forward
/// equation p_t = (a p / 2)_xx - (b p)_x.
struct FDGrid {
    std::size_t cells = 256;
    /// Largest time step; transitions use (t - tau) / ceil((t - tau) / dt).
    double dt = 2e-3;
    FluxBoundary bc = FluxBoundary::Reflecting;
    /// 0.5 is Crank-Nicolson, 1 is implicit Euler.
    double theta = 0.5;
    /// Every transition takes at least this many steps.
    std::size_t min_steps = 50;
    /// Implicit-Euler half steps replacing the first theta step of a
    /// transition (damps the grid-scale modes of the delta start). 0 disables.
    std::size_t startup_half_steps = 2;

    void validate() const;
    double dx() const noexcept { return 1.0 / static_cast<double>(cells); }
    double center(std::size_t i) const noexcept { return (static_cast<double>(i) + 0.5) * dx(); }
};

/// Density at cell centres (units 1/length).
struct DensityGrid {
    std::vector<double> values;
    double time = 0.0;
    FluxBoundary bc = FluxBoundary::Reflecting;

    double mass() const;
};

/// Forward-equation solver with Chang-Cooper interface fluxes.
///
/// The flux is J = (b - a_x/2) p - (a/2) p_x; per interface the advected
/// density is the Chang-Cooper blend delta p_{i+1} + (1 - delta) p_i with
/// delta = 1/w - 1/(e^w - 1), w = (b - a_x/2) dx / (a/2). Reflecting walls
/// carry zero flux; absorbing walls hold p = 0 on the boundary face.
///
/// Owns its workspace and caches factorised step matrices, so one instance
/// must not be shared between threads.
class FokkerPlanckSolver {
public:
    FokkerPlanckSolver(CoefficientField coeff, FDGrid grid);

    const FDGrid& grid() const noexcept { return grid_; }
    const CoefficientField& coefficients() const noexcept { return coeff_; }

    /// One theta-weighted step of length dt from p.time.
    DensityGrid step(const DensityGrid& p, double dt);
    DensityGrid step_with_theta(const DensityGrid& p, double dt, double theta);

    /// Discrete delta at xi: unit mass split linearly between the two cell
    /// centres bracketing xi (all of it in an end cell inside its outer half).
    DensityGrid delta(double xi, double time) const;

    /// Advances p to t_end with the transition step rule.
    DensityGrid evolve(DensityGrid p, double t_end);

    DensityGrid transition_density(double xi, double tau, double t);

    /// Linear interpolation between adjacent centres, constant in the end half-cells.
    double density_at(const DensityGrid& p, double x) const;

    /// Number of sub-steps used for a transition of length lag.
    std::size_t steps_for(double lag) const;

private:
    struct Tridiagonal {
        std::vector<double> lower, diag, upper;
    };
    struct Factorised {
        std::vector<double> c_prime;  // modified upper diagonal
        std::vector<double> inv_den;  // inverse pivots
        std::vector<double> lower;
        std::vector<double> rhs_lower, rhs_diag, rhs_upper;
    };

    const Tridiagonal& generator(double t);
    Tridiagonal build_generator(double t) const;
    Factorised factorise(const Tridiagonal& A, double dt, double theta) const;
    const Factorised& cached(double t, double dt, double theta);
    void apply(const Factorised& f, const std::vector<double>& in, std::vector<double>& out);

    CoefficientField coeff_;
    FDGrid grid_;
    Tridiagonal homogeneous_generator_;
    bool have_generator_ = false;
    Tridiagonal scratch_generator_;
    std::map<std::pair<double, double>, Factorised> factor_cache_;
    Factorised scratch_factor_;
    std::vector<double> work_;
};

/// Chang-Cooper weight 1/w - 1/(e^w - 1), series-evaluated near w = 0.
double chang_cooper_delta(double w);

DensityGrid step(const CoefficientField& coeff, const FDGrid& grid, const DensityGrid& p);

DensityGrid transition_density(const CoefficientField& coeff, const FDGrid& grid, double xi,
                               double tau, double t);

/// Interpolated densities at or below this make log_likelihood return
/// kRejectedLogLikelihood (a rejection signal, not an error).
inline constexpr double kDensityFloor = 1e-300;
inline constexpr double kRejectedLogLikelihood = -std::numeric_limits<double>::infinity();

/// sum_i log p(y_{i+1}, s_{i+1}; y_i, s_i); -inf when any density is below the floor.
double log_likelihood(const CoefficientField& coeff, const FDGrid& grid, const ObservationSet& obs);

/// Same, reusing an existing solver (and its cached factorisations).
double log_likelihood(FokkerPlanckSolver& solver, const ObservationSet& obs);

/// Mass remaining under absorbing walls; ConfigError for reflecting grids.
double survival_probability(const CoefficientField& coeff, const FDGrid& grid, double xi,
                            double tau, double t);

/// "x,p" header then one row per cell centre, 17 significant digits.
void write_density_csv(std::ostream& os, const FDGrid& grid, const DensityGrid& p);

}  // namespace sdeinfer
