#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "sdeinfer/errors.hpp"
#include "sdeinfer/fokker_planck.hpp"
#include "sdeinfer/images_kernel.hpp"
#include "sdeinfer/parametrix.hpp"

using namespace sdeinfer;

namespace {
constexpr double kPi = std::numbers::pi;

double smooth_a(double x) { return 1.0 + 0.1 * std::sin(2.0 * kPi * x); }

CoefficientField smooth_field(double b = 0.2) {
    return CoefficientField::stationary(smooth_a, [b](double) { return b; }, 1.0);
}

ParametrixConfig small_grid(std::size_t m, std::size_t j) {
    ParametrixConfig cfg;
    cfg.space_nodes = m;
    cfg.time_nodes = j;
    return cfg;
}
}  // namespace

TEST(Lz1, ConstantCoefficientsWithoutDriftVanish) {
    const auto c = CoefficientField::constant(0.7, 0.0);
    for (double x : {0.0, 0.3, 0.5, 1.0}) EXPECT_EQ(lz1(c, Boundary::Neumann, x, 0.2, 0.4, 0.0), 0.0);
}

TEST(Lz1, UnitDriftOnDiagonalVanishes) {
    const auto c = CoefficientField::constant(1.0, 1.0);
    EXPECT_NEAR(lz1(c, Boundary::Neumann, 0.5, 0.1, 0.5, 0.0), 0.0, 1e-12);
}

TEST(Lz1, LinearDiffusionAgainstFourthOrderDifferences) {
    const auto c = CoefficientField::stationary([](double x) { return 1.0 + 0.1 * x; }, [](double) { return 0.0; });
    const ImagesKernelSpec spec{Boundary::Neumann, 1.05};
    const double h = 1e-3;
    auto z = [&](double x) { return images_density(spec, x, 0.05, 0.5, 0.0); };
    const double zxx =
        (-z(0.6 + 2 * h) + 16 * z(0.6 + h) - 30 * z(0.6) + 16 * z(0.6 - h) - z(0.6 - 2 * h)) / (12 * h * h);
    const double want = 0.1 * 0.1 * zxx;
    EXPECT_NEAR(lz1(c, Boundary::Neumann, 0.6, 0.05, 0.5, 0.0), want, 1e-6 * std::abs(want) + 1e-10);
}

TEST(PhiSeries, ConstantCoefficientsVanish) {
    const auto c = CoefficientField::constant(1.0, 0.0);
    const ParametrixSeries s(c, small_grid(32, 16), 0.4, 0.0, 0.1);
    for (double x : {0.1, 0.5, 0.9}) EXPECT_EQ(s.phi(x), 0.0);
}

TEST(PhiSeries, FirstOrderEqualsLz1) {
    const auto c = smooth_field();
    ParametrixConfig cfg = small_grid(32, 16);
    cfg.series_order = 1;
    for (double x : {0.0, 0.25, 0.6}) {
        EXPECT_EQ(phi_series(c, cfg, x, 0.3, 0.4, 0.1), lz1(c, cfg.bc, x, 0.3, 0.4, 0.1));
    }
}

TEST(PhiSeries, IteratesDecayGeometrically) {
    const auto c = CoefficientField::stationary(smooth_a, [](double) { return 0.0; });
    ParametrixConfig cfg;
    cfg.series_order = 3;
    const ParametrixSeries s(c, cfg, 0.4, 0.0, 0.1);
    const double p1 = s.phi(0.5, 1);
    const double p2 = s.phi(0.5, 2);
    const double p3 = s.phi(0.5, 3);
    EXPECT_LE(std::abs(p3 - p2), 0.2 * std::abs(p2 - p1));
}

TEST(PhiSeries, DivergenceIsReported) {
    const auto c = CoefficientField::stationary([](double x) { return 0.05 + 0.04 * std::sin(2 * kPi * x); },
                                                [](double) { return 20.0; });
    ParametrixConfig cfg = small_grid(32, 16);
    cfg.series_order = 5;
    try {
        ParametrixSeries s(c, cfg, 0.5, 0.0, 1.0);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_GE(e.term_norms().size(), 3u);
    }
}

TEST(GreenFunction, ConstantCoefficientsEqualImages) {
    const auto c = CoefficientField::constant(1.0, 0.0);
    for (double x : {0.0, 0.2, 0.5, 0.95}) {
        const double g = green_function(c, small_grid(32, 16), x, 0.15, 0.3, 0.05);
        const double z = images_density({Boundary::Neumann, 1.0}, x, 0.15, 0.3, 0.05);
        EXPECT_NEAR(g, z, 1e-4);
        EXPECT_EQ(g, z);
    }
}

TEST(GreenFunction, DirichletVanishesAtBoundary) {
    ParametrixConfig cfg = small_grid(64, 32);
    cfg.bc = Boundary::Dirichlet;
    const ParametrixSeries s(smooth_field(), cfg, 0.4, 0.0, 0.1);
    EXPECT_NEAR(s.green(0.0), 0.0, 1e-10);
    EXPECT_NEAR(s.green(1.0), 0.0, 1e-10);
}

TEST(GreenFunction, AgreesWithFiniteDifferenceTransitionDensity) {
    const auto c = smooth_field();
    const auto sde = CoefficientField::stationary([](double x) { return 2.0 * smooth_a(x); },
                                                  [](double) { return 0.2; });
    FDGrid fine;
    fine.cells = 1024;
    fine.dt = 4e-5;
    const ParametrixSeries s(c, ParametrixConfig{}, 0.5, 0.0, 0.1);
    for (double x : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        FokkerPlanckSolver solver(sde, fine);
        const double ref = solver.density_at(solver.transition_density(x, 0.0, 0.1), 0.5);
        EXPECT_NEAR(s.green(x), ref, 2e-2 * ref) << "x = " << x;
    }
}

TEST(GreenFunction, GridConvergenceRatio) {
    const auto c = smooth_field();
    std::vector<double> g;
    for (std::size_t m : {32u, 64u, 128u}) g.push_back(ParametrixSeries(c, small_grid(m, m / 2), 0.5, 0.0, 0.1).green(0.3));
    const double ratio = std::abs(g[1] - g[0]) / std::abs(g[2] - g[1]);
    EXPECT_GE(ratio, 2.0);
    EXPECT_LE(ratio, 8.0);
}

TEST(GreenFunction, PositiveAtModeratePerturbation) {
    const ParametrixSeries s(smooth_field(), ParametrixConfig{}, 0.2, 0.0, 0.05);
    for (int i = 0; i <= 50; ++i) EXPECT_GE(s.green(i / 50.0), -1e-3);
}

TEST(GreenFunction, SupremumScalesLikeInverseRootLag) {
    std::vector<double> scaled;
    for (double lag : {0.1, 0.05, 0.025, 0.0125}) {
        const ParametrixSeries s(smooth_field(), small_grid(96, 48), 0.5, 0.0, lag);
        double sup = 0.0;
        for (int i = 0; i <= 100; ++i) sup = std::max(sup, s.green(i / 100.0));
        scaled.push_back(sup * std::sqrt(lag));
    }
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    EXPECT_LT(*hi / *lo, 2.0);
}

TEST(GreenFunction, Errors) {
    const auto c = smooth_field();
    EXPECT_THROW(ParametrixSeries(c, ParametrixConfig{}, 0.5, 0.2, 0.1), TemporalOrderError);
    EXPECT_THROW(ParametrixSeries(c, ParametrixConfig{}, 1.5, 0.0, 0.1), DomainError);
    EXPECT_THROW(ParametrixSeries(c, small_grid(8, 16), 0.5, 0.0, 0.1), ConfigError);
    EXPECT_THROW(ParametrixSeries(c, small_grid(32, 4), 0.5, 0.0, 0.1), ConfigError);
    ParametrixConfig zero = small_grid(32, 16);
    zero.series_order = 0;
    EXPECT_THROW(ParametrixSeries(c, zero, 0.5, 0.0, 0.1), ConfigError);
}

TEST(GreenFunction, ProfileMatchesPointwise) {
    const ParametrixSeries s(smooth_field(), small_grid(32, 16), 0.5, 0.0, 0.1);
    const std::vector<double> xs{0.1, 0.4, 0.8};
    const auto prof = s.green_profile(xs);
    for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(prof[i], s.green(xs[i]));
}

TEST(GreenFunction, TimeInhomogeneousMatchesHomogeneousPath) {
    const CoefficientField inhom([](double x, double) { return smooth_a(x); }, [](double, double) { return 0.2; },
                                 1.0, false);
    const auto hom = smooth_field();
    const double g1 = ParametrixSeries(inhom, small_grid(32, 16), 0.5, 0.0, 0.1).green(0.3);
    const double g2 = ParametrixSeries(hom, small_grid(32, 16), 0.5, 0.0, 0.1).green(0.3);
    EXPECT_NEAR(g1, g2, 1e-10);
}
