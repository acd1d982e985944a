#include <gtest/gtest.h>

#include <numeric>

#include "mvk/model.hpp"
#include "mvk/simulator.hpp"
#include "mvk/spectrum.hpp"

using namespace mvk;

namespace {

const ModelParams kParams = ModelParams::make(5, {1, 1}, {1, 3});

}  // namespace

TEST(Simulator, TwoStateChainIsBalanced) {
    const auto P = ModelParams::make(1, {2.0}, {2.0});
    const StateSpace X(1, 1);
    SimConfig cfg;
    cfg.events = 200000;
    cfg.seed = 3;
    const auto r = gillespie_run(rates(P), X, cfg);
    EXPECT_NEAR(r.occupation[0], 0.5, 0.01);
    EXPECT_NEAR(r.occupation[1], 0.5, 0.01);
    EXPECT_EQ(r.event_count, 200000u);
}

TEST(Simulator, OccupationApproachesStationaryWeight) {
    const StateSpace X(2, 5);
    const auto W = stationary_weight(kParams, X);
    SimConfig cfg;
    cfg.events = 1'000'000;
    cfg.seed = 20240917;
    const auto r = gillespie_run(rates(kParams), X, cfg, &W);
    EXPECT_LE(r.tv_distance_to_W, 0.02);
    EXPECT_NEAR(std::accumulate(r.occupation.begin(), r.occupation.end(), 0.0), 1.0, 1e-12);
    EXPECT_GE(r.tv_distance_to_W, 0.0);
    EXPECT_LE(r.tv_distance_to_W, 1.0);
    EXPECT_EQ(r.rng, std::string("mt19937_64"));
}

TEST(Simulator, SameSeedIsBitIdentical) {
    const StateSpace X(2, 5);
    SimConfig cfg;
    cfg.events = 50000;
    cfg.seed = 99;
    const auto a = gillespie_run(rates(kParams), X, cfg);
    const auto b = gillespie_run(rates(kParams), X, cfg);
    EXPECT_EQ(a.dwell, b.dwell);
    EXPECT_EQ(a.occupation, b.occupation);
    EXPECT_EQ(a.final_state, b.final_state);
    EXPECT_EQ(a.elapsed_time, b.elapsed_time);
    cfg.seed = 100;
    const auto c = gillespie_run(rates(kParams), X, cfg);
    EXPECT_NE(a.dwell, c.dwell);
}

TEST(Simulator, MoreEventsTightenOccupation) {
    const StateSpace X(2, 5);
    const auto W = stationary_weight(kParams, X);
    SimConfig cfg;
    cfg.seed = 5;
    cfg.events = 10000;
    const double coarse = gillespie_run(rates(kParams), X, cfg, &W).tv_distance_to_W;
    cfg.events = 100000;
    const double medium = gillespie_run(rates(kParams), X, cfg, &W).tv_distance_to_W;
    cfg.events = 1000000;
    const double fine = gillespie_run(rates(kParams), X, cfg, &W).tv_distance_to_W;
    EXPECT_LT(medium, coarse);
    EXPECT_LT(fine, medium);
}

TEST(Simulator, TimeHorizonStopsExactly) {
    const StateSpace X(2, 5);
    SimConfig cfg;
    cfg.horizon_time = 37.5;
    const auto r = gillespie_run(rates(kParams), X, cfg);
    EXPECT_DOUBLE_EQ(r.elapsed_time, 37.5);
    EXPECT_NEAR(std::accumulate(r.dwell.begin(), r.dwell.end(), 0.0), 37.5, 1e-9);
}

TEST(Simulator, ReplicasAreDeterministicAndMerged) {
    const StateSpace X(2, 5);
    const auto W = stationary_weight(kParams, X);
    SimConfig cfg;
    cfg.events = 100000;
    cfg.replicas = 4;
    cfg.seed = 17;
    const auto a = gillespie_replicas(rates(kParams), X, cfg, &W);
    const auto b = gillespie_replicas(rates(kParams), X, cfg, &W);
    EXPECT_EQ(a.dwell, b.dwell);
    EXPECT_EQ(a.event_count, 400000u);
    // Each replica reproduces a single run with the derived seed.
    SimConfig one = cfg;
    one.replicas = 1;
    std::vector<double> sum(X.size(), 0.0);
    for (int k = 0; k < 4; ++k) {
        one.seed = derive_seed(17, static_cast<std::uint64_t>(k));
        const auto r = gillespie_run(rates(kParams), X, one);
        for (std::size_t i = 0; i < X.size(); ++i) sum[i] += r.dwell[i];
    }
    EXPECT_EQ(sum, a.dwell);
    EXPECT_LE(a.tv_distance_to_W, 0.05);
}

TEST(Simulator, DerivedSeedsDiffer) {
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(Simulator, RejectsNegativeRatesAndBadConfig) {
    const StateSpace X(2, 2);
    RateField r = rates(ModelParams::make(2, {1, 1}, {1, 1}));
    r.birth = [](int, Coords x) { return x[0] + x[1] < 2 ? -1.0 : 0.0; };
    SimConfig cfg;
    cfg.events = 10;
    EXPECT_THROW(gillespie_run(r, X, cfg), ValidationError);
    SimConfig none;
    EXPECT_THROW(gillespie_run(rates(kParams), StateSpace(2, 5), none), ValidationError);
    SimConfig outside;
    outside.events = 1;
    outside.initial_state = {4, 4};
    EXPECT_THROW(gillespie_run(rates(kParams), StateSpace(2, 5), outside), ValidationError);
}

TEST(Simulator, AbsorbingStateIsReported) {
    RateField r;
    r.n = 1;
    r.birth = [](int, Coords x) { return x[0] == 0 ? 1.0 : 0.0; };
    r.death = [](int, Coords) { return 0.0; };
    SimConfig cfg;
    cfg.events = 5;
    EXPECT_THROW(gillespie_run(r, StateSpace(1, 2), cfg), AbsorbingState);
}

TEST(Evolution, StationaryStartStaysPut) {
    const StateSpace X(2, 5);
    const auto W = stationary_weight(kParams, X);
    const auto tr = evolve_distribution(rates(kParams), X, to_vector(W), 3.0, 30, &W);
    for (const auto& P : tr.distributions) EXPECT_LE((P - to_vector(W)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Evolution, MassAndPositivityPreserved) {
    const StateSpace X(2, 5);
    const auto W = stationary_weight(kParams, X);
    const auto tr = evolve_distribution(rates(kParams), X, delta_distribution(X, std::vector<int>{0, 5}), 10.0, 100, &W);
    EXPECT_LE(tr.worst_mass_drift, 1e-12);
    EXPECT_GE(tr.most_negative, 0.0);
    EXPECT_TRUE(tr.entropy_monotone);
    EXPECT_DOUBLE_EQ(tr.Lambda, max_total_rate(rates(kParams), X));
}

TEST(Evolution, DeltaStartConvergesAtSpectralRate) {
    const StateSpace X(2, 5);
    const auto W = stationary_weight(kParams, X);
    const double gap = solve_spectrum(kParams).lambda[0];
    const double T = 20.0 / gap;
    const auto tr = evolve_distribution(rates(kParams), X, delta_distribution(X, std::vector<int>{0, 0}), T, 400, &W);
    EXPECT_LE(tr.tv.back(), 1e-8);
    const double slope = relaxation_slope(tr, 5.0 / gap, 15.0 / gap);
    EXPECT_NEAR(slope / -gap, 1.0, 0.1);
}

TEST(Evolution, InitialDriftMatchesRates) {
    const StateSpace X(2, 5);
    const std::vector<int> x0{1, 2};
    const auto R = rates(kParams);
    const double h = 1e-6;
    const auto tr = evolve_distribution(R, X, delta_distribution(X, x0), h, 1);
    const auto m0 = mean_coordinates(X, tr.distributions.front());
    const auto m1 = mean_coordinates(X, tr.distributions.back());
    for (int j = 0; j < 2; ++j) {
        const double drift = (m1[static_cast<std::size_t>(j)] - m0[static_cast<std::size_t>(j)]) / h;
        EXPECT_NEAR(drift, R.B(j, x0) - R.D(j, x0), 1e-4);
    }
}

TEST(Evolution, ValidatesInput) {
    const StateSpace X(2, 2);
    const auto R = rates(ModelParams::make(2, {1, 1}, {1, 2}));
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(6);
    EXPECT_THROW(evolve_distribution(R, X, bad, 1.0, 1), ValidationError);
    bad(0) = 1.5;
    bad(1) = -0.5;
    EXPECT_THROW(evolve_distribution(R, X, bad, 1.0, 1), ValidationError);
    EXPECT_THROW(evolve_distribution(R, X, delta_distribution(X, std::vector<int>{0, 0}), 0.0, 1), ValidationError);
    EXPECT_THROW(evolve_distribution(R, X, Eigen::VectorXd::Ones(3) / 3, 1.0, 1), ValidationError);
}

TEST(Evolution, TvDistanceBasics) {
    EXPECT_DOUBLE_EQ(tv_distance({1, 0}, {0, 1}), 1.0);
    EXPECT_DOUBLE_EQ(tv_distance({0.5, 0.5}, {0.5, 0.5}), 0.0);
    EXPECT_THROW(tv_distance({1}, {0.5, 0.5}), ValidationError);
}
