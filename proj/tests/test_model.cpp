#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "mvk/model.hpp"
#include "mvk/rates.hpp"
#include "mvk/spectrum.hpp"
#include "support.hpp"

using namespace mvk;

TEST(Model, RatesAtInteriorPoint) {
    const auto R = rates(ModelParams::make(3, {1, 2}, {3, 5}));
    const std::vector<int> x{1, 1};
    EXPECT_DOUBLE_EQ(R.B(0, x), 1.0);
    EXPECT_DOUBLE_EQ(R.B(1, x), 2.0);
    EXPECT_DOUBLE_EQ(R.D(0, x), 3.0);
    EXPECT_DOUBLE_EQ(R.D(1, x), 5.0);
}

TEST(Model, BoundaryRatesVanish) {
    const auto R = rates(ModelParams::make(3, {1, 2}, {3, 5}));
    const std::vector<int> full{2, 1}, empty{0, 3};
    EXPECT_EQ(R.B(0, full), 0.0);
    EXPECT_EQ(R.B(1, full), 0.0);
    EXPECT_EQ(R.D(0, empty), 0.0);
}

TEST(Model, ProbabilitiesHandValues) {
    const auto e = probabilities(ModelParams::make(1, {1, 1}, {1, 3}));
    EXPECT_NEAR(e.eta0, 3.0 / 7, 1e-16);
    EXPECT_NEAR(e.eta[0], 3.0 / 7, 1e-16);
    EXPECT_NEAR(e.eta[1], 1.0 / 7, 1e-16);
}

TEST(Model, SymmetricProbabilities) {
    const auto e = probabilities(ModelParams::make(2, {2, 2, 2}, {2, 2, 2}));
    EXPECT_DOUBLE_EQ(e.eta0, 0.25);
    for (double v : e.eta) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Model, SingleSpeciesProbability) {
    const auto e = probabilities(ModelParams::make(3, {0.7}, {1.9}));
    EXPECT_NEAR(e.eta[0], 0.7 / (0.7 + 1.9), 1e-16);
}

TEST(Model, MultinomialWeightHandValues) {
    const auto P = ModelParams::make(1, {1, 1}, {1, 3});
    EXPECT_NEAR(multinomial_weight(P, std::vector<int>{0, 0}), 3.0 / 7, 1e-16);
    EXPECT_NEAR(multinomial_weight(P, std::vector<int>{1, 0}), 3.0 / 7, 1e-16);
    EXPECT_NEAR(multinomial_weight(P, std::vector<int>{0, 1}), 1.0 / 7, 1e-16);
}

TEST(Model, OriginWeightIsEta0PowerN) {
    const auto P = ModelParams::make(6, {0.4, 1.3}, {2.2, 0.9});
    EXPECT_NEAR(multinomial_weight(P, std::vector<int>{0, 0}), std::pow(probabilities(P).eta0, 6), 1e-16);
}

TEST(Model, WeightSumsToOne) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + trial % 3;
        const auto P = testkit::random_params(rng, n, 8);
        const auto W = stationary_weight(P, StateSpace(n, 8));
        EXPECT_NEAR(std::accumulate(W.begin(), W.end(), 0.0), 1.0, 1e-13);
    }
}

TEST(Model, MultinomialMatchesGenericStationaryWeight) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + trial % 3;
        const int N = 1 + trial % 8;
        const auto P = testkit::random_params(rng, n, N);
        const StateSpace X(n, N);
        const auto W = stationary_weight(P, X);
        const auto G = stationary_weight_generic(rates(P), X);
        for (std::size_t i = 0; i < X.size(); ++i) EXPECT_NEAR(G[i] / W[i], 1.0, 1e-12);
    }
}

TEST(Model, LargeNUsesLogGamma) {
    const auto P = ModelParams::make(300, {1, 2}, {3, 4});
    const StateSpace X(2, 300);
    const auto W = stationary_weight(P, X);
    double s = 0;
    for (double w : W) {
        EXPECT_TRUE(std::isfinite(w));
        s += w;
    }
    EXPECT_NEAR(s, 1.0, 1e-10);
}

TEST(Model, ScalingCovariance) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const auto P = testkit::random_params(rng, 3, 4);
        const double c = testkit::draw(rng, 0.1, 10);
        const auto Q = P.scaled(c);
        const auto e1 = probabilities(P), e2 = probabilities(Q);
        EXPECT_NEAR(e1.eta0, e2.eta0, 1e-14);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(e1.eta[static_cast<std::size_t>(i)], e2.eta[static_cast<std::size_t>(i)], 1e-14);
        const StateSpace X(3, 4);
        const auto W1 = stationary_weight(P, X), W2 = stationary_weight(Q, X);
        for (std::size_t i = 0; i < X.size(); ++i) EXPECT_NEAR(W1[i] / W2[i], 1.0, 1e-12);
        const auto s1 = solve_spectrum(P), s2 = solve_spectrum(Q);
        for (int j = 0; j < 3; ++j) {
            EXPECT_NEAR(s2.lambda[static_cast<std::size_t>(j)] / (c * s1.lambda[static_cast<std::size_t>(j)]), 1.0, 1e-12);
        }
        EXPECT_LE((s1.u - s2.u).cwiseAbs().maxCoeff() / s1.u.cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Model, ValidationErrors) {
    EXPECT_THROW(ModelParams::make(0, {1}, {1}), ValidationError);
    EXPECT_THROW(ModelParams::make(2, {1, 2}, {1}), ValidationError);
    EXPECT_THROW(ModelParams::make(2, {1, -2}, {1, 1}), ValidationError);
    EXPECT_THROW(ModelParams::make(2, {1, 2}, {0, 1}), ValidationError);
    EXPECT_THROW(ModelParams::make(2, {}, {}), ValidationError);
    EXPECT_THROW(ModelParams::make(2, {std::nan("")}, {1}), ValidationError);
}

TEST(Model, ExceptionalBand) {
    const auto P = ModelParams::make(3, {1, 2}, {2, 2 + 1e-10});
    EXPECT_TRUE(is_exceptional(P));
    EXPECT_FALSE(is_exceptional(P, 1e-12));
    EXPECT_FALSE(is_exceptional(ModelParams::make(3, {1}, {2})));
}
