#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "sdeinfer/errors.hpp"
#include "sdeinfer/fokker_planck.hpp"
#include "sdeinfer/images_kernel.hpp"
#include "sdeinfer/simulate.hpp"

using namespace sdeinfer;

namespace {
constexpr double kPi = std::numbers::pi;

FDGrid grid_of(std::size_t cells, double dt, FluxBoundary bc = FluxBoundary::Reflecting) {
    FDGrid g;
    g.cells = cells;
    g.dt = dt;
    g.bc = bc;
    return g;
}

double max_error_vs_images(std::size_t cells, double dt) {
    const FDGrid g = grid_of(cells, dt);
    const auto p = transition_density(CoefficientField::constant(1.0, 0.0), g, 0.5, 0.0, 0.05);
    double err = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        const double z = images_density({Boundary::Neumann, 0.5}, g.center(i), 0.05, 0.5, 0.0);
        err = std::max(err, std::abs(p.values[i] - z));
    }
    return err;
}

double mean_of(const FDGrid& g, const DensityGrid& p) {
    double m = 0.0;
    for (std::size_t i = 0; i < g.cells; ++i) m += g.center(i) * p.values[i] * g.dx();
    return m;
}
}  // namespace

TEST(ChangCooper, WeightLimitsAndContinuity) {
    EXPECT_NEAR(chang_cooper_delta(0.0), 0.5, 1e-15);
    for (double w : {1e-9, 1e-6, 1e-3, 0.1, 1.0, 10.0, -1e-6, -1.0, -10.0}) {
        const double exact = 1.0 / w - 1.0 / std::expm1(w);
        EXPECT_NEAR(chang_cooper_delta(w), exact, 1e-7 * std::max(1.0, std::abs(exact))) << w;
        EXPECT_GT(chang_cooper_delta(w), 0.0);
        EXPECT_LT(chang_cooper_delta(w), 1.0);
    }
    EXPECT_NEAR(chang_cooper_delta(800.0), 1.0 / 800.0, 1e-12);
    EXPECT_NEAR(chang_cooper_delta(-800.0), 1.0 - 1.0 / 800.0, 1e-12);
}

TEST(FDStep, UniformIsStationaryUnderPureDiffusion) {
    const FDGrid g = grid_of(64, 1e-2);
    const auto c = CoefficientField::constant(2.0 / 100.0, 0.0, 10.0);
    DensityGrid p{std::vector<double>(g.cells, 1.0), 0.0, g.bc};
    for (int k = 0; k < 20; ++k) p = step(c, g, p);
    for (double v : p.values) EXPECT_NEAR(v, 1.0, 1e-13);
}

TEST(FDStep, MatchesNeumannImagesKernel) {
    EXPECT_LE(max_error_vs_images(512, 1e-4), 5e-3);
}

TEST(FDStep, SpatialErrorDropsUnderHalving) {
    const double coarse = max_error_vs_images(256, 1e-4);
    const double fine = max_error_vs_images(512, 1e-4);
    EXPECT_GE(coarse / fine, 3.5);
}

TEST(FDStep, AbsorbingLosesMass) {
    const FDGrid g = grid_of(64, 1e-3, FluxBoundary::Absorbing);
    const auto c = CoefficientField::stationary([](double x) { return 0.5 + x; }, [](double x) { return 1 - x; });
    FokkerPlanckSolver solver(c, g);
    DensityGrid p = solver.delta(0.3, 0.0);
    const double m0 = p.mass();
    double prev = m0;
    for (int k = 0; k < 100; ++k) {
        p = solver.step(p, g.dt);
        EXPECT_LE(p.mass(), prev + 1e-15);
        prev = p.mass();
    }
    EXPECT_LT(p.mass(), m0);
}

TEST(FDStep, ReflectingConservesMassEveryStep) {
    const FDGrid g = grid_of(128, 1e-3);
    const auto c = CoefficientField::stationary([](double x) { return 0.2 + x * x; }, [](double x) { return 0.5 - x; });
    FokkerPlanckSolver solver(c, g);
    DensityGrid p = solver.delta(0.7, 0.0);
    for (int k = 0; k < 200; ++k) {
        const double before = p.mass();
        p = solver.step(p, g.dt);
        EXPECT_NEAR(p.mass(), before, 1e-12 * before);
    }
}

TEST(FDStep, ImplicitEulerStaysNonnegative) {
    const FDGrid g = grid_of(128, 1e-3);
    const auto c = CoefficientField::stationary([](double x) { return 0.01 + 0.1 * x; }, [](double) { return 3.0; });
    FokkerPlanckSolver solver(c, g);
    DensityGrid p = solver.delta(0.2, 0.0);
    for (int k = 0; k < 100; ++k) {
        p = solver.step_with_theta(p, g.dt, 1.0);
        for (double v : p.values) ASSERT_GE(v, 0.0);
    }
}

TEST(FDStep, CrankNicolsonUndershootIsTiny) {
    const FDGrid g = grid_of(256, 1e-3);
    const auto p = transition_density(CoefficientField::constant(1.0, 0.3), g, 0.5, 0.0, 0.02);
    for (double v : p.values) EXPECT_GE(v, -1e-9);
}

TEST(TransitionDensity, ErgodicLimitIsUniform) {
    const FDGrid g = grid_of(128, 1e-2);
    const auto p = transition_density(CoefficientField::constant(1.0, 0.0, 10.0), g, 0.2, 0.0, 5.0);
    for (double v : p.values) EXPECT_NEAR(v, 1.0, 1e-3);
}

TEST(TransitionDensity, MirrorSymmetry) {
    const FDGrid g = grid_of(100, 1e-3);
    const auto c = CoefficientField::stationary([](double x) { return 1.0 + 0.5 * x * (1 - x); }, [](double) { return 0.0; });
    const auto p = transition_density(c, g, 0.3, 0.0, 0.1);
    const auto q = transition_density(c, g, 0.7, 0.0, 0.1);
    for (std::size_t i = 0; i < g.cells; ++i) EXPECT_NEAR(p.values[i], q.values[g.cells - 1 - i], 1e-10);
}

TEST(TransitionDensity, DriftMovesTheMean) {
    const FDGrid g = grid_of(256, 1e-4);
    const auto p = transition_density(CoefficientField::constant(0.1, 1.0), g, 0.5, 0.0, 0.01);
    EXPECT_GT(mean_of(g, p), 0.5);
    EXPECT_NEAR(mean_of(g, p), 0.51, 1e-3);
}

TEST(TransitionDensity, ChapmanKolmogorov) {
    const FDGrid g = grid_of(128, 1e-3);
    const auto c = CoefficientField::stationary([](double x) { return 1.0 + 0.1 * std::sin(2 * kPi * x); },
                                                [](double) { return 0.2; });
    FokkerPlanckSolver solver(c, g);
    const auto direct = solver.transition_density(0.4, 0.0, 0.1);
    const auto first = solver.transition_density(0.4, 0.0, 0.05);
    std::vector<double> composed(g.cells, 0.0);
    for (std::size_t j = 0; j < g.cells; ++j) {
        const auto second = solver.transition_density(g.center(j), 0.05, 0.1);
        for (std::size_t i = 0; i < g.cells; ++i) composed[i] += second.values[i] * first.values[j] * g.dx();
    }
    double err = 0.0;
    for (std::size_t i = 0; i < g.cells; ++i) err = std::max(err, std::abs(composed[i] - direct.values[i]));
    EXPECT_LE(err, 1e-2);
}

TEST(TransitionDensity, DeltaPlacesUnitMass) {
    const FDGrid g = grid_of(64, 1e-3);
    FokkerPlanckSolver solver(CoefficientField::constant(1.0, 0.0), g);
    for (double xi : {0.0, 0.013, 0.5, 0.77, 1.0}) EXPECT_NEAR(solver.delta(xi, 0.0).mass(), 1.0, 1e-14);
}

TEST(TransitionDensity, Errors) {
    const FDGrid g = grid_of(64, 1e-3);
    const auto c = CoefficientField::constant(1.0, 0.0, 1.0);
    EXPECT_THROW(transition_density(c, g, 0.5, 0.2, 0.1), TemporalOrderError);
    EXPECT_THROW(transition_density(c, g, 0.5, 0.0, 2.0), InputError);
    EXPECT_THROW(transition_density(c, grid_of(16, 1e-3), 0.5, 0.0, 0.1), ConfigError);
    EXPECT_THROW(transition_density(c, grid_of(64, -1.0), 0.5, 0.0, 0.1), ConfigError);
    FDGrid bad_theta = g;
    bad_theta.theta = 0.2;
    EXPECT_THROW(transition_density(c, bad_theta, 0.5, 0.0, 0.1), ConfigError);
}

TEST(LogLikelihood, SingleObservationIsZero) {
    ObservationSet obs{{0.3}, {0.4}, 1.0, 0};
    EXPECT_EQ(log_likelihood(CoefficientField::constant(1.0, 0.0), FDGrid{}, obs), 0.0);
}

TEST(LogLikelihood, MatchesImagesKernel) {
    ObservationSet obs{{0.1, 0.15}, {0.5, 0.5}, 1.0, 0};
    const double ll = log_likelihood(CoefficientField::constant(1.0, 0.0), grid_of(512, 1e-4), obs);
    const double want = std::log(images_density({Boundary::Neumann, 0.5}, 0.5, 0.05, 0.5, 0.0));
    EXPECT_NEAR(ll, want, 5e-3);
}

TEST(LogLikelihood, SmallerDiffusionPenalisesFarJumps) {
    ObservationSet obs{{0.5, 1.0, 1.5}, {0.2, 0.8, 0.25}, 2.0, 0};
    const FDGrid g = grid_of(128, 1e-3);
    double prev = log_likelihood(CoefficientField::constant(1.0, 0.0, 2.0), g, obs);
    for (double a : {0.3, 0.1}) {
        const double ll = log_likelihood(CoefficientField::constant(a, 0.0, 2.0), g, obs);
        EXPECT_LT(ll, prev) << "a = " << a;
        prev = ll;
    }
}

TEST(LogLikelihood, UnderflowIsRejectedNotThrown) {
    ObservationSet obs{{0.1, 0.11}, {0.05, 0.95}, 1.0, 0};
    const double ll = log_likelihood(CoefficientField::constant(1e-6, 0.0), grid_of(64, 1e-3), obs);
    EXPECT_EQ(ll, kRejectedLogLikelihood);
}

TEST(LogLikelihood, RejectsBadObservations) {
    const auto c = CoefficientField::constant(1.0, 0.0);
    ObservationSet unordered{{0.2, 0.1}, {0.5, 0.5}, 1.0, 0};
    EXPECT_THROW(log_likelihood(c, FDGrid{}, unordered), InputError);
    ObservationSet outside{{0.1, 0.2}, {0.5, 1.0}, 1.0, 0};
    EXPECT_THROW(log_likelihood(c, FDGrid{}, outside), InputError);
}

TEST(LogLikelihood, SolverOverloadAgrees) {
    ObservationSet obs{{0.1, 0.3, 0.6}, {0.4, 0.55, 0.3}, 1.0, 0};
    const auto c = CoefficientField::stationary([](double x) { return 0.3 + x; }, [](double x) { return 0.2 - x; });
    FokkerPlanckSolver solver(c, FDGrid{});
    EXPECT_EQ(log_likelihood(solver, obs), log_likelihood(c, FDGrid{}, obs));
}

TEST(Survival, ShortLagKeepsMass) {
    const FDGrid g = grid_of(256, 1e-5, FluxBoundary::Absorbing);
    EXPECT_GE(survival_probability(CoefficientField::constant(1.0, 0.0), g, 0.5, 0.0, 1e-5), 1.0 - 1e-3);
}

TEST(Survival, MatchesDirichletImagesMass) {
    const FDGrid g = grid_of(256, 1e-3, FluxBoundary::Absorbing);
    const double s = survival_probability(CoefficientField::constant(1.0, 0.0, 2.0), g, 0.5, 0.0, 1.0);
    constexpr int n = 4000;
    double mass = 0.0;
    for (int i = 0; i < n; ++i) mass += images_density({Boundary::Dirichlet, 0.5}, (i + 0.5) / n, 1.0, 0.5, 0.0) / n;
    EXPECT_NEAR(s, mass, 5e-3);
}

TEST(Survival, DecreasesTowardsTheBoundary) {
    const FDGrid g = grid_of(256, 1e-4, FluxBoundary::Absorbing);
    double prev = 0.0;
    for (double xi : {0.4, 0.2, 0.1, 0.05}) {
        const double s = survival_probability(CoefficientField::constant(1.0, 0.0), g, xi, 0.0, 0.05);
        if (prev > 0.0) EXPECT_LT(s, prev) << xi;
        prev = s;
    }
}

TEST(Survival, ReflectingGridIsAConfigError) {
    EXPECT_THROW(survival_probability(CoefficientField::constant(1.0, 0.0), FDGrid{}, 0.5, 0.0, 0.1), ConfigError);
}

TEST(Solver, StepCountRule) {
    FDGrid g = grid_of(64, 1e-2);
    FokkerPlanckSolver solver(CoefficientField::constant(1.0, 0.0, 10.0), g);
    EXPECT_EQ(solver.steps_for(0.01), g.min_steps);
    EXPECT_EQ(solver.steps_for(5.0), 500u);
}

TEST(Solver, DensityCsvHasOneRowPerCell) {
    const FDGrid g = grid_of(32, 1e-3);
    const auto p = transition_density(CoefficientField::constant(1.0, 0.0), g, 0.5, 0.0, 0.01);
    std::ostringstream os;
    write_density_csv(os, g, p);
    const std::string s = os.str();
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 33);
}
