#include "sdeinfer/parametrix.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sdeinfer/errors.hpp"

namespace sdeinfer {

void ParametrixConfig::validate() const {
    if (series_order < 1) throw ConfigError("series_order", "must be >= 1");
    if (space_nodes < 16) throw ConfigError("space_nodes", "must be >= 16");
    if (time_nodes < 8) throw ConfigError("time_nodes", "must be >= 8");
    if (!(singularity_mu > 0.0 && singularity_mu < 1.0))
        throw ConfigError("singularity_mu", "must lie in (0,1)");
    if (!(truncation_eps > 0.0)) throw ConfigError("truncation_eps", "must be positive");
}

double lz1(const CoefficientField& coeff, Boundary bc, double x, double t, double xi, double tau,
           double truncation_eps) {
    const double a_src = coeff.a(xi, tau);
    const KernelJet z = images_jet({bc, a_src, truncation_eps}, x, t, xi, tau);
    return (coeff.a(x, t) - a_src) * z.dxx + coeff.b(x, t) * z.dx;
}

ParametrixSeries::ParametrixSeries(const CoefficientField& coeff, const ParametrixConfig& cfg,
                                   double xi, double tau, double t)
    : coeff_(coeff), cfg_(cfg), xi_(xi), tau_(tau), t_(t) {
    cfg_.validate();
    if (!(t > tau))
        throw TemporalOrderError(fmt::format("Green function needs t > tau, got t = {}, tau = {}", t, tau));
    if (!(xi >= 0.0 && xi <= 1.0)) throw DomainError(fmt::format("source xi = {} outside [0,1]", xi));

    const std::size_t M = cfg_.space_nodes;
    const std::size_t J = cfg_.time_nodes;
    dt_ = (t_ - tau_) / static_cast<double>(J);
    nodes_ = uniform_nodes(M);
    const double h = 1.0 / static_cast<double>(M - 1);
    weights_.assign(M, h);
    weights_.front() = weights_.back() = 0.5 * h;

    const std::size_t slices = coeff_.time_homogeneous() ? 1 : J;
    a_nodes_.resize(slices * M);
    b_nodes_.resize(slices * M);
    for (std::size_t j = 0; j < slices; ++j)
        for (std::size_t i = 0; i < M; ++i) {
            a_nodes_[j * M + i] = coeff_.a(nodes_[i], sigma(j));
            b_nodes_[j * M + i] = coeff_.b(nodes_[i], sigma(j));
        }
    if (coeff_.time_homogeneous()) build_kernels();

    const int K = cfg_.series_order;
    terms_.assign(static_cast<std::size_t>(K), std::vector<double>(J * M, 0.0));
    for (std::size_t j = 0; j < J; ++j)
        for (std::size_t i = 0; i < M; ++i)
            terms_[0][j * M + i] = lz1(coeff_, cfg_.bc, nodes_[i], sigma(j), xi_, tau_, cfg_.truncation_eps);

    std::vector<double> weighted(J * M);
    for (int k = 1; k < K; ++k) {
        const auto& prev = terms_[static_cast<std::size_t>(k - 1)];
        auto& next = terms_[static_cast<std::size_t>(k)];
        for (std::size_t j = 0; j < J; ++j)
            for (std::size_t i = 0; i < M; ++i) weighted[j * M + i] = weights_[i] * prev[j * M + i];
        for (std::size_t j = 0; j < J; ++j) {
            for (std::size_t i = 0; i < M; ++i) {
                double half = 0.0;
                const double* here = &weighted[j * M];
                if (coeff_.time_homogeneous()) {
                    const double* row = &half_kernel_[i * M];
                    for (std::size_t ip = 0; ip < M; ++ip) half += row[ip] * here[ip];
                } else {
                    const double s_src = sigma(j) - 0.25 * dt_;
                    for (std::size_t ip = 0; ip < M; ++ip)
                        half += kernel_at(nodes_[i], sigma(j), nodes_[ip], s_src, a_node(j, i), b_node(j, i),
                                          a_node(j, ip)) *
                                here[ip];
                }
                double acc = 0.5 * half;
                for (std::size_t jp = 0; jp < j; ++jp) {
                    const double* src = &weighted[jp * M];
                    if (coeff_.time_homogeneous()) {
                        const double* row = &kernels_[(j - jp - 1) * M * M + i * M];
                        for (std::size_t ip = 0; ip < M; ++ip) acc += row[ip] * src[ip];
                    } else {
                        for (std::size_t ip = 0; ip < M; ++ip) acc += kernel(j, i, jp, ip) * src[ip];
                    }
                }
                next[j * M + i] = dt_ * acc;
            }
        }
    }

    term_norms_.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        double m = 0.0;
        for (double v : terms_[static_cast<std::size_t>(k)]) m = std::max(m, std::abs(v));
        term_norms_[static_cast<std::size_t>(k)] = m;
    }
    for (int k = 2; k < K; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        if (term_norms_[kk] > term_norms_[kk - 1] && term_norms_[kk - 1] > term_norms_[kk - 2])
            throw DivergenceError(
                fmt::format("parametrix kernels grow for two consecutive orders (k = {} and {})", k, k + 1),
                term_norms_);
    }

    phi_grid_.assign(J * M, 0.0);
    for (const auto& term : terms_)
        for (std::size_t n = 0; n < phi_grid_.size(); ++n) phi_grid_[n] += term[n];
}

double ParametrixSeries::a_node(std::size_t j, std::size_t i) const {
    const std::size_t M = nodes_.size();
    return coeff_.time_homogeneous() ? a_nodes_[i] : a_nodes_[j * M + i];
}

double ParametrixSeries::b_node(std::size_t j, std::size_t i) const {
    const std::size_t M = nodes_.size();
    return coeff_.time_homogeneous() ? b_nodes_[i] : b_nodes_[j * M + i];
}

double ParametrixSeries::kernel(std::size_t j, std::size_t i, std::size_t jp, std::size_t ip) const {
    return kernel_at(nodes_[i], sigma(j), nodes_[ip], sigma(jp), a_node(j, i), b_node(j, i), a_node(jp, ip));
}

double ParametrixSeries::kernel_at(double x, double s, double y, double s_src, double a_x, double b_x,
                                   double a_src) const {
    const KernelJet z = images_jet({cfg_.bc, a_src, cfg_.truncation_eps}, x, s, y, s_src);
    return (a_x - a_src) * z.dxx + b_x * z.dx;
}

void ParametrixSeries::build_kernels() {
    const std::size_t M = nodes_.size();
    const std::size_t J = cfg_.time_nodes;
    half_kernel_.assign(M * M, 0.0);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t ip = 0; ip < M; ++ip)
            half_kernel_[i * M + ip] =
                kernel_at(nodes_[i], 0.25 * dt_, nodes_[ip], 0.0, a_nodes_[i], b_nodes_[i], a_nodes_[ip]);
    kernels_.assign((J - 1) * M * M, 0.0);
    for (std::size_t d = 1; d < J; ++d) {
        const double lag = static_cast<double>(d) * dt_;
        double* block = &kernels_[(d - 1) * M * M];
        for (std::size_t i = 0; i < M; ++i)
            for (std::size_t ip = 0; ip < M; ++ip) {
                const double a_src = a_nodes_[ip];
                const KernelJet z = images_jet({cfg_.bc, a_src, cfg_.truncation_eps}, nodes_[i], lag,
                                               nodes_[ip], 0.0);
                block[i * M + ip] = (a_nodes_[i] - a_src) * z.dxx + b_nodes_[i] * z.dx;
            }
    }
}

double ParametrixSeries::phi(double x, int order) const {
    const int K = cfg_.series_order;
    if (order < 0 || order > K) order = K;
    if (order == 0) return 0.0;
    double value = lz1(coeff_, cfg_.bc, x, t_, xi_, tau_, cfg_.truncation_eps);
    if (order == 1) return value;

    const std::size_t M = nodes_.size();
    const std::size_t J = cfg_.time_nodes;
    const double a_x = coeff_.a(x, t_);
    const double b_x = coeff_.b(x, t_);
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t i = 0; i < M; ++i) {
            double sum_terms = 0.0;
            for (int k = 0; k + 1 < order; ++k) sum_terms += terms_[static_cast<std::size_t>(k)][j * M + i];
            if (sum_terms == 0.0) continue;
            const double a_src = a_node(j, i);
            const KernelJet z = images_jet({cfg_.bc, a_src, cfg_.truncation_eps}, x, t_, nodes_[i], sigma(j));
            value += dt_ * weights_[i] * ((a_x - a_src) * z.dxx + b_x * z.dx) * sum_terms;
        }
    }
    return value;
}

double ParametrixSeries::green(double x) const {
    const double a_src = coeff_.a(xi_, tau_);
    double value = images_density({cfg_.bc, a_src, cfg_.truncation_eps}, x, t_, xi_, tau_);
    const std::size_t M = nodes_.size();
    const std::size_t J = cfg_.time_nodes;
    double correction = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t i = 0; i < M; ++i) {
            const double phi_v = phi_grid_[j * M + i];
            if (phi_v == 0.0) continue;
            const double a_freeze = cfg_.outer_freeze == FreezePoint::Inner ? a_node(j, i) : a_src;
            const double z = images_density({cfg_.bc, a_freeze, cfg_.truncation_eps}, x, t_, nodes_[i], sigma(j));
            correction += weights_[i] * z * phi_v;
        }
    }
    return value + dt_ * correction;
}

std::vector<double> ParametrixSeries::green_profile(std::span<const double> xs) const {
    std::vector<double> out(xs.size());
    std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return green(x); });
    return out;
}

double phi_series(const CoefficientField& coeff, const ParametrixConfig& cfg, double x, double t,
                  double xi, double tau) {
    return ParametrixSeries(coeff, cfg, xi, tau, t).phi(x);
}

double green_function(const CoefficientField& coeff, const ParametrixConfig& cfg, double x, double t,
                      double xi, double tau) {
    return ParametrixSeries(coeff, cfg, xi, tau, t).green(x);
}

}  // namespace sdeinfer
