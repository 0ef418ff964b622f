#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sdeinfer {

/// Diffusion/drift pair (a, b) on [0,1] x [0,T].
///
/// Evaluation is pointwise through the stored callables. The ellipticity
/// floor m_a is the minimum of `a` over an equispaced space grid (and a few
/// time slices when the field is time dependent); construction fails with
/// CoefficientError when that minimum is not strictly positive.
class CoefficientField {
public:
    using Fn = std::function<double(double x, double t)>;

    CoefficientField(Fn a, Fn b, double horizon, bool time_homogeneous = true,
                     std::size_t floor_grid = 512);

    /// Constant coefficients a, b on [0,1] x [0,horizon].
    static CoefficientField constant(double a, double b, double horizon = 1.0);

    /// Time-independent field from functions of x only.
    static CoefficientField stationary(std::function<double(double)> a,
                                       std::function<double(double)> b,
                                       double horizon = 1.0);

    double a(double x, double t = 0.0) const { return a_(x, t); }
    double b(double x, double t = 0.0) const { return b_(x, t); }

    double ellipticity_floor() const noexcept { return m_a_; }
    double horizon() const noexcept { return horizon_; }
    bool time_homogeneous() const noexcept { return time_homogeneous_; }

    /// Grid estimate of ||a||_{0,alpha} + ||b||_{0,alpha}. For time-dependent
    /// fields the spatial quotient is maximised over a handful of time slices.
    double holder_norm_estimate(double alpha, std::size_t grid_n = 512) const;

private:
    Fn a_;
    Fn b_;
    double horizon_;
    bool time_homogeneous_;
    double m_a_;
};

/// Fourier basis of L^2(0,1): f_0 = 1, f_{2m-1} = sqrt2 cos(2m pi x),
/// f_{2m} = sqrt2 sin(2m pi x) for m >= 1.
struct FourierBasis {
    static double eval(std::size_t k, double x);

    /// Fills out[k] = f_k(x) for k < out.size() using angle-addition
    /// recurrences (two trig calls regardless of length).
    static void eval_all(double x, std::span<double> out);
};

/// Finite combination sum_k c_k f_k.
class SeriesFunction {
public:
    SeriesFunction() = default;
    explicit SeriesFunction(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {}

    const std::vector<double>& coeffs() const noexcept { return coeffs_; }
    std::size_t size() const noexcept { return coeffs_.size(); }

    /// Unchecked evaluation, x assumed in [0,1].
    double operator()(double x) const;

private:
    std::vector<double> coeffs_;
};

/// sum_k c_k f_k(x); throws DomainError for x outside [0,1].
double eval_series(const SeriesFunction& f, double x);

/// (c_0^2 + sum_{k>=1} k^{2l} c_k^2)^{1/2}. The constant mode carries weight 1
/// so that the result is a norm for every l.
double sobolev_norm(const SeriesFunction& f, double l);
double sobolev_norm(std::span<const double> coeffs, double l);

/// max_i |f_i| + max_{i<j} |f_i - f_j| / |x_i - x_j|^alpha for samples on the
/// equispaced grid x_i = i/(n-1). A lower bound of the true Hölder norm.
double holder_norm_estimate(std::span<const double> samples, double alpha);
double holder_norm_estimate(const std::function<double(double)>& f, double alpha,
                            std::size_t grid_n);

/// Equispaced nodes i/(n-1), i < n.
std::vector<double> uniform_nodes(std::size_t n);

}  // namespace sdeinfer
