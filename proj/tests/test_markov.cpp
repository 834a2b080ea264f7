#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "aoi/markov.hpp"

using namespace aoi;

namespace {

Matrix random_stochastic(std::mt19937_64& rng, std::size_t n, double density) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < n; ++c)
            if (c == (r + 1) % n || u(rng) < density) sum += (m(r, c) = u(rng) + 1e-3);
        for (std::size_t c = 0; c < n; ++c) m(r, c) /= sum;
    }
    return m;
}

std::vector<double> unit(std::size_t n, std::size_t i) {
    std::vector<double> v(n, 0.0);
    v[i] = 1.0;
    return v;
}

}  // namespace

TEST(Stationary, IdenticalRows) {
    Matrix p{{0.3, 0.7}, {0.3, 0.7}};
    for (const auto& start : {std::vector<double>{1, 0}, std::vector<double>{0, 1},
                              std::vector<double>{0.5, 0.5}}) {
        const auto pi = stationary_distribution(p, start);
        EXPECT_NEAR(pi[0], 0.3, 1e-15);
        EXPECT_NEAR(pi[1], 0.7, 1e-15);
    }
}

TEST(Stationary, IdentityKeepsStart) {
    const auto pi = stationary_distribution(Matrix::identity(2), unit(2, 0));
    EXPECT_EQ(pi, (std::vector<double>{1.0, 0.0}));
}

TEST(Stationary, PeriodTwoChainAverages) {
    const auto pi = stationary_distribution(Matrix{{0, 1}, {1, 0}}, unit(2, 0));
    EXPECT_DOUBLE_EQ(pi[0], 0.5);
    EXPECT_DOUBLE_EQ(pi[1], 0.5);
}

TEST(Stationary, TransientStateSplitsBetweenAbsorbingStates) {
    Matrix p{{0.0, 0.25, 0.75}, {0, 1, 0}, {0, 0, 1}};
    const auto pi = stationary_distribution(p, unit(3, 0));
    EXPECT_DOUBLE_EQ(pi[0], 0.0);
    EXPECT_NEAR(pi[1], 0.25, 1e-15);
    EXPECT_NEAR(pi[2], 0.75, 1e-15);
}

TEST(Stationary, UnreachableClassIgnored) {
    // States 2 and 3 form a closed class that the start never reaches.
    Matrix p{{0.5, 0.5, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}};
    const auto pi = stationary_distribution(p, unit(4, 1));
    EXPECT_NEAR(pi[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(pi[1], 1.0 / 3.0, 1e-15);
    EXPECT_EQ(pi[2], 0.0);
    EXPECT_EQ(pi[3], 0.0);
}

TEST(Stationary, LongDeterministicCycle) {
    const std::size_t n = 500;
    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i) p(i, (i + 1) % n) = 1.0;
    const auto pi = stationary_distribution(p, unit(n, 0));
    for (double x : pi) EXPECT_NEAR(x, 1.0 / n, 1e-15);
}

TEST(Stationary, RandomChainsMatchPowerIteration) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + trial % 30;
        const auto p = random_stochastic(rng, n, 0.3);
        const auto pi = stationary_distribution(p, unit(n, 0));

        // Lazy power iteration, slow but independent.
        std::vector<double> x(n, 1.0 / n), y(n);
        for (int it = 0; it < 20000; ++it) {
            std::fill(y.begin(), y.end(), 0.0);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < n; ++c) y[c] += x[r] * p(r, c);
            for (std::size_t i = 0; i < n; ++i) x[i] = 0.5 * (x[i] + y[i]);
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(pi[i], x[i], 1e-12) << "trial " << trial;
            EXPECT_GE(pi[i], 0.0);
            sum += pi[i];
        }
        EXPECT_NEAR(sum, 1.0, 1e-14);
    }
}

TEST(Stationary, ResidualBelowTolerance) {
    std::mt19937_64 rng(5);
    const auto p = random_stochastic(rng, 60, 0.1);
    SparsePair chain(p, p);
    StationarySolver solver;
    const auto start = unit(60, 7);
    const auto pi = solver.solve(chain, start, 1e-13);
    std::vector<double> scratch(60);
    EXPECT_LE(StationarySolver::residual(chain, pi, scratch), 1e-13);
}

TEST(Stationary, MixedChainUsesWeights) {
    // 0.5 * [[0,1],[1,0]] + 0.5 * identity is lazy and aperiodic.
    SparsePair chain(Matrix{{0, 1}, {1, 0}}, Matrix::identity(2));
    chain.mix(0.5, 0.5);
    StationarySolver solver;
    const auto pi = solver.solve(chain, unit(2, 0), 1e-14);
    EXPECT_NEAR(pi[0], 0.5, 1e-15);
}

TEST(Stationary, UnreachableToleranceReportsResidual) {
    std::mt19937_64 rng(9);
    const auto p = random_stochastic(rng, 40, 0.5);
    try {
        stationary_distribution(p, unit(40, 0), 1e-300);
        GTEST_SKIP() << "residual happened to be exactly zero";
    } catch (const ConvergenceError& e) {
        EXPECT_FALSE(e.residual_history().empty());
        EXPECT_GT(e.last_residual(), 0.0);
    }
}

TEST(Stationary, BadInputs) {
    EXPECT_THROW(stationary_distribution(Matrix(2, 3), unit(2, 0)), ParameterError);
    EXPECT_THROW(stationary_distribution(Matrix::identity(2), std::vector<double>{0, 0}),
                 ParameterError);
    EXPECT_THROW(stationary_distribution(Matrix::identity(2), unit(3, 0)), ParameterError);
}
