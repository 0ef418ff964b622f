#include "sdeinfer/images_kernel.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "sdeinfer/errors.hpp"

namespace sdeinfer {

namespace {

void check_arguments(const ImagesKernelSpec& spec, double x, double t, double xi, double tau) {
    if (!(spec.a_frozen > 0.0) || !std::isfinite(spec.a_frozen))
        throw DomainError(fmt::format("frozen diffusion {} is not positive", spec.a_frozen));
    if (!(x >= 0.0 && x <= 1.0) || !(xi >= 0.0 && xi <= 1.0))
        throw DomainError(fmt::format("kernel evaluated at x = {}, xi = {} outside [0,1]", x, xi));
    const double lag = t - tau;
    if (!(lag > 0.0))
        throw TemporalOrderError(fmt::format("kernel needs t > tau, got t = {}, tau = {}", t, tau));
    if (lag < kMinKernelLag)
        throw TemporalOrderError(
            fmt::format("t - tau = {:g} is below the minimum lag {:g}", lag, kMinKernelLag));
}

struct Accum {
    double v = 0.0, d1 = 0.0, d2 = 0.0;
    double av = 0.0, ad1 = 0.0, ad2 = 0.0;
};

// Adds the Gaussian at offset r with the given sign, exponent scale var4 = 4 a (t - tau).
inline void add_term(Accum& acc, double r, double sign, double var4) {
    const double e = std::exp(-r * r / var4);
    const double d1 = -2.0 * r / var4 * e;
    const double d2 = (4.0 * r * r / (var4 * var4) - 2.0 / var4) * e;
    acc.v += sign * e;
    acc.d1 += sign * d1;
    acc.d2 += sign * d2;
    acc.av += e;
    acc.ad1 += std::abs(d1);
    acc.ad2 += std::abs(d2);
}

// y_n = xi + 2n pairs with z_{-n} = -xi - 2n; at x = 0 the pair cancels (Dirichlet)
// or has opposite slopes (Neumann) exactly in floating point.
inline void add_pair(Accum& acc, double x, double xi, int n, double sign, double var4) {
    const double shift = 2.0 * static_cast<double>(n);
    add_term(acc, x - (xi + shift), 1.0, var4);
    add_term(acc, x - (-xi - shift), sign, var4);
}

}  // namespace

KernelJet images_jet(const ImagesKernelSpec& spec, double x, double t, double xi, double tau) {
    check_arguments(spec, x, t, xi, tau);
    // Z(x; xi) = Z(1-x; 1-xi): evaluate on the half containing x = 0 so both
    // boundaries inherit the exact pairwise cancellation.
    const bool mirrored = x > 0.5;
    if (mirrored) {
        x = 1.0 - x;
        xi = 1.0 - xi;
    }
    const double lag = t - tau;
    const double var4 = 4.0 * spec.a_frozen * lag;
    const double sign = spec.bc == Boundary::Dirichlet ? -1.0 : 1.0;

    Accum total;
    add_pair(total, x, xi, 0, sign, var4);
    for (int m = 1; m <= kMaxImageBand; ++m) {
        Accum band;
        add_pair(band, x, xi, m, sign, var4);
        add_pair(band, x, xi, -m, sign, var4);
        total.v += band.v;
        total.d1 += band.d1;
        total.d2 += band.d2;
        total.av += band.av;
        total.ad1 += band.ad1;
        total.ad2 += band.ad2;
        const double eps = spec.truncation_eps;
        if (band.av <= eps * total.av && band.ad1 <= eps * total.ad1 &&
            band.ad2 <= eps * total.ad2)
            break;
    }

    const double norm = 1.0 / std::sqrt(std::numbers::pi * var4);
    KernelJet jet{norm * total.v, norm * total.d1, norm * total.d2};
    if (mirrored) jet.dx = -jet.dx;
    if (!std::isfinite(jet.value) || !std::isfinite(jet.dx) || !std::isfinite(jet.dxx))
        throw OverflowError(fmt::format("images kernel overflow at a_frozen = {:g}, t - tau = {:g}",
                                        spec.a_frozen, lag));
    return jet;
}

double images_density(const ImagesKernelSpec& spec, double x, double t, double xi, double tau,
                      int deriv_order) {
    if (deriv_order < 0 || deriv_order > 2)
        throw DomainError(fmt::format("derivative order {} not in {{0,1,2}}", deriv_order));
    const KernelJet jet = images_jet(spec, x, t, xi, tau);
    switch (deriv_order) {
        case 0: return jet.value;
        case 1: return jet.dx;
        default: return jet.dxx;
    }
}

double images_lipschitz_gap(const ImagesKernelSpec& spec_a, const ImagesKernelSpec& spec_b,
                            double x, double t, double xi, double tau) {
    if (spec_a.bc != spec_b.bc)
        throw DomainError("Lipschitz gap needs kernels with the same boundary condition");
    return std::abs(images_density(spec_a, x, t, xi, tau) - images_density(spec_b, x, t, xi, tau));
}

}  // namespace sdeinfer
