#pragma once

namespace sdeinfer {

enum class Boundary { Dirichlet, Neumann };

/// Heat kernel of u_t = a u_xx on [0,1] built by the method of images with
/// sources y_n = xi + 2n (sign +) and z_n = -xi + 2n (sign - for Dirichlet,
/// + for Neumann), each a Gaussian of variance 2 a (t - tau).
struct ImagesKernelSpec {
    Boundary bc = Boundary::Neumann;
    double a_frozen = 1.0;
    /// Image bands stop once a band adds less than this fraction of the
    /// running absolute sum.
    double truncation_eps = 1e-14;
};

/// Kernel value and its first two x-derivatives at one point.
struct KernelJet {
    double value = 0.0;
    double dx = 0.0;
    double dxx = 0.0;
};

/// Shortest admissible t - tau; closer evaluations are rejected.
inline constexpr double kMinKernelLag = 1e-12;

/// Largest image index summed.
inline constexpr int kMaxImageBand = 64;

/// Z(x,t; xi,tau) or its x-derivative of order 1 or 2.
double images_density(const ImagesKernelSpec& spec, double x, double t, double xi,
                      double tau, int deriv_order = 0);

/// All three orders at once; cheaper than three separate calls.
KernelJet images_jet(const ImagesKernelSpec& spec, double x, double t, double xi, double tau);

/// |Z^a - Z^{a'}| at one point; both specs must share the boundary type.
double images_lipschitz_gap(const ImagesKernelSpec& spec_a, const ImagesKernelSpec& spec_b,
                            double x, double t, double xi, double tau);

}  // namespace sdeinfer
