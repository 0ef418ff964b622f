#include "sdeinfer/fokker_planck.hpp"

#include <cassert>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "sdeinfer/errors.hpp"
#include "sdeinfer/simulate.hpp"

namespace sdeinfer {

void FDGrid::validate() const {
    if (cells < 32) throw ConfigError("fd.cells", "must be >= 32");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("fd.dt", "must be positive");
    if (!(theta >= 0.5 && theta <= 1.0)) throw ConfigError("fd.theta", "must lie in [0.5, 1]");
    if (min_steps < 1) throw ConfigError("fd.min_steps", "must be >= 1");
}

double DensityGrid::mass() const {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double chang_cooper_delta(double w) {
    if (std::abs(w) < 1e-4) return 0.5 - w / 12.0 + w * w * w / 720.0;
    return 1.0 / w - 1.0 / std::expm1(w);
}

FokkerPlanckSolver::FokkerPlanckSolver(CoefficientField coeff, FDGrid grid)
    : coeff_(std::move(coeff)), grid_(grid) {
    grid_.validate();
    work_.resize(grid_.cells);
}

FokkerPlanckSolver::Tridiagonal FokkerPlanckSolver::build_generator(double t) const {
    const std::size_t n = grid_.cells;
    const double dx = grid_.dx();
    Tridiagonal A{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                  std::vector<double>(n, 0.0)};

    std::vector<double> a_center(n);
    for (std::size_t i = 0; i < n; ++i) a_center[i] = coeff_.a(grid_.center(i), t);

    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double xf = static_cast<double>(k + 1) * dx;
        const double diff = 0.5 * coeff_.a(xf, t);
        const double drift = coeff_.b(xf, t) - 0.5 * (a_center[k + 1] - a_center[k]) / dx;
        if (!(diff > 0.0) || !std::isfinite(diff) || !std::isfinite(drift))
            throw CoefficientError(
                fmt::format("unusable coefficients at x = {}: a/2 = {}, effective drift = {}", xf, diff, drift));
        const double w = drift * dx / diff;
        if (!std::isfinite(w)) throw CoefficientError(fmt::format("Péclet number not finite at x = {}", xf));
        const double delta = chang_cooper_delta(w);
        const double c_plus = drift * (1.0 - delta) + diff / dx;
        const double c_minus = drift * delta - diff / dx;
        A.diag[k] -= c_plus / dx;
        A.upper[k] -= c_minus / dx;
        A.lower[k + 1] += c_plus / dx;
        A.diag[k + 1] += c_minus / dx;
    }
    if (grid_.bc == FluxBoundary::Absorbing) {
        A.diag.front() -= coeff_.a(0.0, t) / (dx * dx);
        A.diag.back() -= coeff_.a(1.0, t) / (dx * dx);
    }
    return A;
}

const FokkerPlanckSolver::Tridiagonal& FokkerPlanckSolver::generator(double t) {
    if (coeff_.time_homogeneous()) {
        if (!have_generator_) {
            homogeneous_generator_ = build_generator(0.0);
            have_generator_ = true;
        }
        return homogeneous_generator_;
    }
    scratch_generator_ = build_generator(t);
    return scratch_generator_;
}

FokkerPlanckSolver::Factorised FokkerPlanckSolver::factorise(const Tridiagonal& A, double dt,
                                                            double theta) const {
    const std::size_t n = grid_.cells;
    Factorised f;
    f.c_prime.resize(n);
    f.inv_den.resize(n);
    f.lower.resize(n);
    f.rhs_lower.resize(n);
    f.rhs_diag.resize(n);
    f.rhs_upper.resize(n);
    const double imp = theta * dt;
    const double exp_w = (1.0 - theta) * dt;
    double prev_c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double l = -imp * A.lower[i];
        const double d = 1.0 - imp * A.diag[i];
        const double u = -imp * A.upper[i];
        const double den = d - (i > 0 ? l * prev_c : 0.0);
        if (!std::isfinite(den) || std::abs(den) < 1e-300)
            throw SolverError(fmt::format("singular tridiagonal pivot {} at row {}", den, i));
        f.inv_den[i] = 1.0 / den;
        f.c_prime[i] = u / den;
        f.lower[i] = l;
        prev_c = f.c_prime[i];
        f.rhs_lower[i] = exp_w * A.lower[i];
        f.rhs_diag[i] = 1.0 + exp_w * A.diag[i];
        f.rhs_upper[i] = exp_w * A.upper[i];
    }
    return f;
}

const FokkerPlanckSolver::Factorised& FokkerPlanckSolver::cached(double t, double dt, double theta) {
    if (!coeff_.time_homogeneous()) {
        scratch_factor_ = factorise(generator(t + theta * dt), dt, theta);
        return scratch_factor_;
    }
    const auto key = std::make_pair(dt, theta);
    auto it = factor_cache_.find(key);
    if (it == factor_cache_.end()) {
        if (factor_cache_.size() > 64) factor_cache_.clear();
        it = factor_cache_.emplace(key, factorise(generator(0.0), dt, theta)).first;
    }
    return it->second;
}

void FokkerPlanckSolver::apply(const Factorised& f, const std::vector<double>& in,
                               std::vector<double>& out) {
    const std::size_t n = grid_.cells;
    // right-hand side (I + (1 - theta) dt A) p
    for (std::size_t i = 0; i < n; ++i) {
        double r = f.rhs_diag[i] * in[i];
        if (i > 0) r += f.rhs_lower[i] * in[i - 1];
        if (i + 1 < n) r += f.rhs_upper[i] * in[i + 1];
        work_[i] = r;
    }
    out.resize(n);
    out[0] = work_[0] * f.inv_den[0];
    for (std::size_t i = 1; i < n; ++i) out[i] = (work_[i] - f.lower[i] * out[i - 1]) * f.inv_den[i];
    for (std::size_t i = n - 1; i-- > 0;) out[i] -= f.c_prime[i] * out[i + 1];
}

DensityGrid FokkerPlanckSolver::step_with_theta(const DensityGrid& p, double dt, double theta) {
    if (p.values.size() != grid_.cells)
        throw InputError(fmt::format("density has {} cells, grid has {}", p.values.size(), grid_.cells));
    if (!(dt > 0.0)) throw InputError("time step must be positive");
    if (p.time + dt > coeff_.horizon() * (1.0 + 1e-12) + 1e-12)
        throw InputError(fmt::format("step to t = {} beyond horizon T = {}", p.time + dt, coeff_.horizon()));
    const Factorised& f = cached(p.time, dt, theta);
    DensityGrid out;
    out.bc = grid_.bc;
    out.time = p.time + dt;
    apply(f, p.values, out.values);
#ifndef NDEBUG
    const double m0 = p.mass();
    const double m1 = out.mass();
    if (grid_.bc == FluxBoundary::Reflecting)
        assert(std::abs(m1 - m0) <= 1e-12 * std::max(1.0, std::abs(m0)));
    else
        assert(m1 <= m0 * (1.0 + 1e-12) + 1e-15);
#endif
    return out;
}

DensityGrid FokkerPlanckSolver::step(const DensityGrid& p, double dt) {
    return step_with_theta(p, dt, grid_.theta);
}

std::size_t FokkerPlanckSolver::steps_for(double lag) const {
    const double raw = std::ceil(lag / grid_.dt - 1e-9);
    const auto n = static_cast<std::size_t>(std::max(raw, 1.0));
    return std::max(n, grid_.min_steps);
}

DensityGrid FokkerPlanckSolver::delta(double xi, double time) const {
    const std::size_t n = grid_.cells;
    const double dx = grid_.dx();
    DensityGrid p{std::vector<double>(n, 0.0), time, grid_.bc};
    const double pos = xi / dx - 0.5;
    if (pos <= 0.0) {
        p.values.front() = 1.0 / dx;
    } else if (pos >= static_cast<double>(n - 1)) {
        p.values.back() = 1.0 / dx;
    } else {
        const auto i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        p.values[i] += (1.0 - frac) / dx;
        p.values[i + 1] += frac / dx;
    }
    return p;
}

DensityGrid FokkerPlanckSolver::evolve(DensityGrid p, double t_end) {
    const double lag = t_end - p.time;
    if (!(lag > 0.0))
        throw TemporalOrderError(fmt::format("evolve needs t_end > {}, got {}", p.time, t_end));
    if (p.values.size() != grid_.cells)
        throw InputError(fmt::format("density has {} cells, grid has {}", p.values.size(), grid_.cells));
    if (t_end > coeff_.horizon() * (1.0 + 1e-12) + 1e-12)
        throw InputError(fmt::format("evolve to t = {} beyond horizon T = {}", t_end, coeff_.horizon()));
    const std::size_t steps = steps_for(lag);
    const double h = lag / static_cast<double>(steps);
    const double start = p.time;
    std::vector<double> next(grid_.cells);
    double t = start;
    auto advance = [&](double dt, double theta) {
        apply(cached(t, dt, theta), p.values, next);
        p.values.swap(next);
        t += dt;
    };
    std::size_t done = 0;
    if (grid_.theta < 1.0 && grid_.startup_half_steps > 0) {
        const double hs = h / static_cast<double>(grid_.startup_half_steps);
        for (std::size_t k = 0; k < grid_.startup_half_steps; ++k) advance(hs, 1.0);
        done = 1;
    }
    for (; done < steps; ++done) advance(h, grid_.theta);
    p.time = start + lag;
    return p;
}

DensityGrid FokkerPlanckSolver::transition_density(double xi, double tau, double t) {
    if (!(t > tau)) throw TemporalOrderError(fmt::format("transition needs t > tau, got {} <= {}", t, tau));
    if (tau < 0.0) throw InputError(fmt::format("tau = {} is negative", tau));
    return evolve(delta(xi, tau), t);
}

double FokkerPlanckSolver::density_at(const DensityGrid& p, double x) const {
    const std::size_t n = grid_.cells;
    const double pos = x / grid_.dx() - 0.5;
    if (pos <= 0.0) return p.values.front();
    if (pos >= static_cast<double>(n - 1)) return p.values.back();
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return (1.0 - frac) * p.values[i] + frac * p.values[i + 1];
}

DensityGrid step(const CoefficientField& coeff, const FDGrid& grid, const DensityGrid& p) {
    FokkerPlanckSolver solver(coeff, grid);
    return solver.step(p, grid.dt);
}

DensityGrid transition_density(const CoefficientField& coeff, const FDGrid& grid, double xi,
                               double tau, double t) {
    FokkerPlanckSolver solver(coeff, grid);
    return solver.transition_density(xi, tau, t);
}

double log_likelihood(FokkerPlanckSolver& solver, const ObservationSet& obs) {
    const std::size_t n = obs.y.size();
    if (obs.s.size() != n) throw InputError("observation times and values differ in length");
    if (n < 2) return 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(obs.y[i] > 0.0 && obs.y[i] < 1.0))
            throw InputError(fmt::format("observation y[{}] = {} outside (0,1)", i, obs.y[i]));
        if (i > 0 && !(obs.s[i] > obs.s[i - 1]))
            throw InputError(fmt::format("observation times not increasing at index {}", i));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const DensityGrid p = solver.transition_density(obs.y[i], obs.s[i], obs.s[i + 1]);
        const double v = solver.density_at(p, obs.y[i + 1]);
        if (std::isnan(v)) throw SolverError(fmt::format("transition {} produced NaN density", i));
        if (!(v > kDensityFloor)) return kRejectedLogLikelihood;
        sum += std::log(v);
    }
    return sum;
}

double log_likelihood(const CoefficientField& coeff, const FDGrid& grid, const ObservationSet& obs) {
    FokkerPlanckSolver solver(coeff, grid);
    return log_likelihood(solver, obs);
}

double survival_probability(const CoefficientField& coeff, const FDGrid& grid, double xi,
                            double tau, double t) {
    if (grid.bc != FluxBoundary::Absorbing)
        throw ConfigError("fd.bc", "survival probability needs absorbing boundaries");
    return transition_density(coeff, grid, xi, tau, t).mass();
}

void write_density_csv(std::ostream& os, const FDGrid& grid, const DensityGrid& p) {
    os << "x,p\n";
    for (std::size_t i = 0; i < p.values.size(); ++i)
        fmt::print(os, "{:.17g},{:.17g}\n", grid.center(i), p.values[i]);
}

}  // namespace sdeinfer
