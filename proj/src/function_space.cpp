#include "sdeinfer/function_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "sdeinfer/errors.hpp"

namespace sdeinfer {

namespace {

constexpr std::size_t kTimeSlices = 9;

std::vector<double> time_slices(double horizon, bool homogeneous) {
    if (homogeneous) return {0.0};
    std::vector<double> ts(kTimeSlices);
    for (std::size_t j = 0; j < kTimeSlices; ++j)
        ts[j] = horizon * static_cast<double>(j) / static_cast<double>(kTimeSlices - 1);
    return ts;
}

}  // namespace

std::vector<double> uniform_nodes(std::size_t n) {
    std::vector<double> x(n);
    if (n == 1) {
        x[0] = 0.0;
        return x;
    }
    const double h = 1.0 / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) * h;
    x.back() = 1.0;
    return x;
}

CoefficientField::CoefficientField(Fn a, Fn b, double horizon, bool time_homogeneous,
                                   std::size_t floor_grid)
    : a_(std::move(a)), b_(std::move(b)), horizon_(horizon),
      time_homogeneous_(time_homogeneous) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw CoefficientError(fmt::format("horizon must be positive, got {}", horizon));
    if (floor_grid < 2) floor_grid = 2;
    const auto xs = uniform_nodes(floor_grid);
    double m = std::numeric_limits<double>::infinity();
    for (double t : time_slices(horizon_, time_homogeneous_)) {
        for (double x : xs) {
            const double v = a_(x, t);
            if (!std::isfinite(v))
                throw CoefficientError(fmt::format("a({}, {}) is not finite", x, t));
            m = std::min(m, v);
        }
    }
    if (!(m > 0.0))
        throw CoefficientError(fmt::format("diffusion floor m_a = {} is not positive", m));
    m_a_ = m;
}

CoefficientField CoefficientField::constant(double a, double b, double horizon) {
    return CoefficientField([a](double, double) { return a; },
                            [b](double, double) { return b; }, horizon, true, 2);
}

CoefficientField CoefficientField::stationary(std::function<double(double)> a,
                                              std::function<double(double)> b,
                                              double horizon) {
    return CoefficientField([a = std::move(a)](double x, double) { return a(x); },
                            [b = std::move(b)](double x, double) { return b(x); },
                            horizon, true);
}

double CoefficientField::holder_norm_estimate(double alpha, std::size_t grid_n) const {
    double best_a = 0.0;
    double best_b = 0.0;
    const auto xs = uniform_nodes(grid_n);
    std::vector<double> sa(grid_n), sb(grid_n);
    for (double t : time_slices(horizon_, time_homogeneous_)) {
        for (std::size_t i = 0; i < grid_n; ++i) {
            sa[i] = a_(xs[i], t);
            sb[i] = b_(xs[i], t);
        }
        best_a = std::max(best_a, sdeinfer::holder_norm_estimate(sa, alpha));
        best_b = std::max(best_b, sdeinfer::holder_norm_estimate(sb, alpha));
    }
    return best_a + best_b;
}

double FourierBasis::eval(std::size_t k, double x) {
    if (k == 0) return 1.0;
    const std::size_t m = (k + 1) / 2;
    const double arg = 2.0 * static_cast<double>(m) * std::numbers::pi * x;
    return std::numbers::sqrt2 * ((k % 2 == 1) ? std::cos(arg) : std::sin(arg));
}

void FourierBasis::eval_all(double x, std::span<double> out) {
    if (out.empty()) return;
    out[0] = 1.0;
    const double c1 = std::cos(2.0 * std::numbers::pi * x);
    const double s1 = std::sin(2.0 * std::numbers::pi * x);
    double c = c1;
    double s = s1;
    for (std::size_t k = 1; k < out.size(); k += 2) {
        out[k] = std::numbers::sqrt2 * c;
        if (k + 1 < out.size()) out[k + 1] = std::numbers::sqrt2 * s;
        const double cn = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = cn;
    }
}

double SeriesFunction::operator()(double x) const {
    if (coeffs_.empty()) return 0.0;
    double sum = coeffs_[0];
    const double c1 = std::cos(2.0 * std::numbers::pi * x);
    const double s1 = std::sin(2.0 * std::numbers::pi * x);
    double c = c1;
    double s = s1;
    for (std::size_t k = 1; k < coeffs_.size(); k += 2) {
        sum += coeffs_[k] * std::numbers::sqrt2 * c;
        if (k + 1 < coeffs_.size()) sum += coeffs_[k + 1] * std::numbers::sqrt2 * s;
        const double cn = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = cn;
    }
    return sum;
}

double eval_series(const SeriesFunction& f, double x) {
    if (!(x >= 0.0 && x <= 1.0))
        throw DomainError(fmt::format("series evaluated at x = {} outside [0,1]", x));
    return f(x);
}

double sobolev_norm(std::span<const double> coeffs, double l) {
    double sum = 0.0;
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
        const double w = (k == 0) ? 1.0 : std::pow(static_cast<double>(k), 2.0 * l);
        sum += w * coeffs[k] * coeffs[k];
    }
    return std::sqrt(sum);
}

double sobolev_norm(const SeriesFunction& f, double l) { return sobolev_norm(f.coeffs(), l); }

double holder_norm_estimate(std::span<const double> samples, double alpha) {
    const std::size_t n = samples.size();
    if (n < 2) throw DomainError("Hölder estimate needs at least two grid points");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw DomainError(fmt::format("Hölder exponent {} outside (0,1]", alpha));
    double sup = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(samples[i]))
            throw EvaluationError(fmt::format("non-finite sample at grid index {}", i));
        sup = std::max(sup, std::abs(samples[i]));
    }
    const double h = 1.0 / static_cast<double>(n - 1);
    // Quotients depend on the index gap only through |x_i - x_j|^alpha.
    std::vector<double> inv_dist(n);
    for (std::size_t d = 1; d < n; ++d)
        inv_dist[d] = 1.0 / std::pow(static_cast<double>(d) * h, alpha);
    double quot = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            quot = std::max(quot, std::abs(samples[i] - samples[j]) * inv_dist[j - i]);
    return sup + quot;
}

double holder_norm_estimate(const std::function<double(double)>& f, double alpha,
                            std::size_t grid_n) {
    if (grid_n < 2) throw DomainError("Hölder estimate needs grid_n >= 2");
    const auto xs = uniform_nodes(grid_n);
    std::vector<double> s(grid_n);
    for (std::size_t i = 0; i < grid_n; ++i) s[i] = f(xs[i]);
    return holder_norm_estimate(s, alpha);
}

}  // namespace sdeinfer
