#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sdeinfer/function_space.hpp"
#include "sdeinfer/images_kernel.hpp"

namespace sdeinfer {

/// Where the outer parametrix of the Green construction freezes `a`.
enum class FreezePoint {
    Inner,   ///< a(y, sigma), the integration variable (classical choice)
    Source,  ///< a(xi, tau), the fixed source point
};

struct ParametrixConfig {
    Boundary bc = Boundary::Neumann;
    std::size_t space_nodes = 128;  ///< trapezoidal nodes on [0,1], endpoints included
    std::size_t time_nodes = 64;    ///< midpoint nodes on (tau, t)
    int series_order = 4;           ///< number of iterated kernels summed
    /// Bookkeeping exponent mu in (1 - alpha/2, 1); reported, never used numerically.
    double singularity_mu = 0.75;
    FreezePoint outer_freeze = FreezePoint::Inner;
    double truncation_eps = 1e-14;

    /// Throws ConfigError on K < 1, space_nodes < 16, time_nodes < 8 or mu outside (0,1).
    void validate() const;
};

/// (a(x,t) - a(xi,tau)) Z_xx + b(x,t) Z_x with Z frozen at a(xi,tau).
double lz1(const CoefficientField& coeff, Boundary bc, double x, double t, double xi, double tau,
           double truncation_eps = 1e-14);

/// Discretised parametrix series for one source (xi, tau) and end time t.
///
/// The iterated kernels (LZ)_k are tabulated on the space grid times the
/// midpoint time nodes sigma_j = tau + (j - 1/2) dt, so no kernel is evaluated
/// at either singular end of a time integral. Inner Volterra integrals at
/// sigma_j use the nodes strictly before j plus the half cell ending at sigma_j,
/// where the kernel is taken at lag dt/4 against the kernel value at sigma_j.
class ParametrixSeries {
public:
    ParametrixSeries(const CoefficientField& coeff, const ParametrixConfig& cfg, double xi,
                     double tau, double t);

    /// Truncated Phi(x, t; xi, tau) summing the first `order` kernels
    /// (order <= series_order; default all).
    double phi(double x, int order = -1) const;

    /// Green function G(x, t; xi, tau).
    double green(double x) const;
    std::vector<double> green_profile(std::span<const double> xs) const;

    /// Grid max-norm of each tabulated kernel (LZ)_1 .. (LZ)_K.
    const std::vector<double>& term_norms() const noexcept { return term_norms_; }

    const std::vector<double>& space_nodes() const noexcept { return nodes_; }
    std::size_t time_nodes() const noexcept { return cfg_.time_nodes; }
    double time_step() const noexcept { return dt_; }

    /// Phi summed over all kernels at (space node i, time node j).
    double phi_at_node(std::size_t j, std::size_t i) const { return phi_grid_[j * nodes_.size() + i]; }

private:
    double sigma(std::size_t j) const { return tau_ + (static_cast<double>(j) + 0.5) * dt_; }
    double a_node(std::size_t j, std::size_t i) const;
    double b_node(std::size_t j, std::size_t i) const;
    void build_kernels();
    double kernel(std::size_t j, std::size_t i, std::size_t jp, std::size_t ip) const;
    double kernel_at(double x, double s, double y, double s_src, double a_x, double b_x, double a_src) const;

    CoefficientField coeff_;
    ParametrixConfig cfg_;
    double xi_, tau_, t_;
    double dt_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
    std::vector<double> a_nodes_, b_nodes_;  // [j*M + i], or [i] when homogeneous
    std::vector<double> kernels_;            // [(d-1)*M*M + i*M + ip], homogeneous only
    std::vector<double> half_kernel_;        // lag dt/4, [i*M + ip], homogeneous only
    std::vector<std::vector<double>> terms_; // terms_[k][j*M + i]
    std::vector<double> phi_grid_;
    std::vector<double> term_norms_;
};

/// Phi(x,t; xi,tau) truncated at cfg.series_order kernels.
double phi_series(const CoefficientField& coeff, const ParametrixConfig& cfg, double x, double t,
                  double xi, double tau);

/// G(x,t; xi,tau) for u_t = a u_xx + b u_x with the boundary type of cfg.
double green_function(const CoefficientField& coeff, const ParametrixConfig& cfg, double x,
                      double t, double xi, double tau);

}  // namespace sdeinfer
