#include <gtest/gtest.h>

#include <random>

#include "mvk/model.hpp"
#include "mvk/operators.hpp"
#include "mvk/rates.hpp"
#include "support.hpp"

using namespace mvk;

namespace {

// Dense generator assembled directly from the master equation, as an oracle.
Eigen::MatrixXd dense_generator(const RateField& r, const StateSpace& X) {
    const auto s = static_cast<Eigen::Index>(X.size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(s, s);
    for (std::size_t x = 0; x < X.size(); ++x) {
        for (int j = 0; j < X.n(); ++j) {
            const double b = r.B(j, X.point(x)), d = r.D(j, X.point(x));
            const auto c = static_cast<Eigen::Index>(x);
            L(c, c) -= b + d;
            if (b > 0) L(static_cast<Eigen::Index>(*X.shift(x, j, +1)), c) += b;
            if (d > 0) L(static_cast<Eigen::Index>(*X.shift(x, j, -1)), c) += d;
        }
    }
    return L;
}

}  // namespace

TEST(Operators, GeneratorMatchesMasterEquation) {
    const auto P = ModelParams::make(4, {1, 2}, {3, 5});
    const StateSpace X(2, 4);
    const auto L = build_L_BD(rates(P), X);
    EXPECT_EQ(L.kind, OperatorKind::generator);
    EXPECT_LE((L.dense() - dense_generator(rates(P), X)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Operators, HtildeOriginRowHasOnlyBirthTerms) {
    const auto P = ModelParams::make(3, {1, 2}, {3, 5});
    const StateSpace X(2, 3);
    const Eigen::MatrixXd Ht = build_Htilde(rates(P), X).dense();
    // Row x = 0: diagonal 3 (1 + 2), then -B_j(0) at e_j; e_2 has rank 1, e_1 rank 2.
    EXPECT_DOUBLE_EQ(Ht(0, 0), 9.0);
    EXPECT_DOUBLE_EQ(Ht(0, 1), -6.0);
    EXPECT_DOUBLE_EQ(Ht(0, 2), -3.0);
    EXPECT_EQ(Ht.row(0).tail(Ht.cols() - 3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Operators, SimilarityIdentitiesAtDeskScale) {
    const auto P = ModelParams::make(4, {1, 1}, {1, 3});
    const StateSpace X(2, 4);
    const auto R = rates(P);
    const auto W = stationary_weight(P, X);
    const Eigen::VectorXd sw = to_vector(W).cwiseSqrt();
    const Eigen::MatrixXd L = build_L_BD(R, X).dense();
    const Eigen::MatrixXd H = build_H(R, X, W).dense();
    const Eigen::MatrixXd Ht = build_Htilde(R, X).dense();
    const Eigen::MatrixXd simH = -(sw.cwiseInverse().asDiagonal() * L * sw.asDiagonal());
    const Eigen::MatrixXd simHt = sw.cwiseInverse().asDiagonal() * H * sw.asDiagonal();
    EXPECT_LE((simH - H).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((simHt - Ht).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Operators, StructureAtDeskScale) {
    {
        const auto P = ModelParams::make(3, {1, 2}, {3, 5});
        const StateSpace X(2, 3);
        const auto rep = verify_structure(rates(P), X, stationary_weight(P, X), 1e-12);
        for (const auto& c : rep.checks()) EXPECT_TRUE(c.passed()) << c.name << " " << c.residual;
    }
    {
        // n = 1 with p = 0.3 read as the binomial parameter: p1/q1 = 0.3/0.7.
        const auto P = ModelParams::make(5, {0.3}, {0.7});
        const StateSpace X(1, 5);
        const auto rep = verify_structure(rates(P), X, stationary_weight(P, X), 1e-13);
        for (const auto& c : rep.checks()) EXPECT_TRUE(c.passed()) << c.name << " " << c.residual;
    }
}

TEST(Operators, HIsSymmetricWithNonPositiveOffDiagonal) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const auto P = testkit::random_params(rng, 3, 4);
        const StateSpace X(3, 4);
        const Eigen::MatrixXd H = build_H(rates(P), X).dense();
        EXPECT_EQ((H - H.transpose()).cwiseAbs().maxCoeff(), 0.0);
        for (Eigen::Index i = 0; i < H.rows(); ++i) {
            for (Eigen::Index k = 0; k < H.cols(); ++k) {
                if (i != k) {
                    EXPECT_LE(H(i, k), 0.0);
                }
            }
        }
    }
}

TEST(Operators, NearestNeighbourPattern) {
    const auto P = ModelParams::make(3, {1, 2, 3}, {2, 5, 9});
    const StateSpace X(3, 3);
    const Eigen::MatrixXd L = build_L_BD(rates(P), X).dense();
    for (std::size_t a = 0; a < X.size(); ++a) {
        for (std::size_t b = 0; b < X.size(); ++b) {
            int dist = 0;
            for (int j = 0; j < 3; ++j) dist += std::abs(X.point(a)[static_cast<std::size_t>(j)] - X.point(b)[static_cast<std::size_t>(j)]);
            if (dist > 1) {
                EXPECT_EQ(L(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), 0.0);
            }
        }
    }
}

TEST(Operators, StructuralIdentitiesRandomSweep) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + trial % 3;
        const int N = 2 + trial % 5;
        const auto P = testkit::random_params(rng, n, N);
        const StateSpace X(n, N);
        const auto rep = verify_structure(rates(P), X, stationary_weight(P, X), 1e-10);
        for (const auto& c : rep.checks()) EXPECT_TRUE(c.passed()) << c.name << " " << c.residual;
    }
}

TEST(Operators, FactorsAnnihilateRootWeight) {
    const auto P = ModelParams::make(3, {0.5, 2}, {1.5, 4});
    const StateSpace X(2, 3);
    const Eigen::VectorXd sw = to_vector(stationary_weight(P, X)).cwiseSqrt();
    for (int j = 0; j < 2; ++j) {
        const auto A = build_A(rates(P), X, j);
        EXPECT_EQ(A.direction, j);
        EXPECT_LE(A.apply(sw).cwiseAbs().maxCoeff(), 1e-14);
        const auto At = build_A_transpose(rates(P), X, j);
        EXPECT_EQ((At.dense() - A.dense().transpose()).cwiseAbs().maxCoeff(), 0.0);
    }
    EXPECT_THROW(build_A(rates(P), X, 2), ValidationError);
}

TEST(Rates, KrawtchouksRatesAreCompatible) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto P = testkit::random_params(rng, 3, 5);
        const auto rep = check_compatibility(rates(P), StateSpace(3, 5));
        EXPECT_TRUE(rep.passed);
        EXPECT_LE(rep.worst_residual, 1e-14);
        EXPECT_GT(rep.pairs_checked, 0u);
    }
}

TEST(Rates, PerturbedBirthRateBreaksCompatibility) {
    const auto P = ModelParams::make(4, {1, 2}, {3, 5});
    const StateSpace X(2, 4);
    RateField r = rates(P);
    const auto base = r.birth;
    r.birth = [base](int j, Coords x) {
        const double v = base(j, x);
        return (j == 0 && x[0] == 1 && x[1] == 1) ? 1.1 * v : v;
    };
    const auto rep = check_compatibility(r, X);
    EXPECT_FALSE(rep.passed);
    ASSERT_TRUE(rep.witness.has_value());
    EXPECT_GT(rep.worst_residual, 1e-3);
}

TEST(Rates, SingleSpeciesIsVacuouslyCompatible) {
    const auto P = ModelParams::make(4, {1}, {2});
    const auto rep = check_compatibility(rates(P), StateSpace(1, 4));
    EXPECT_TRUE(rep.passed);
    EXPECT_EQ(rep.pairs_checked, 0u);
}

TEST(Rates, NaNRateIsAnError) {
    const StateSpace X(2, 2);
    RateField r = rates(ModelParams::make(2, {1, 1}, {1, 1}));
    r.death = [](int, Coords x) { return x[0] == 1 ? std::nan("") : 0.0; };
    EXPECT_THROW(check_compatibility(r, X), ValidationError);
}

TEST(Rates, ValidationRejectsBadRates) {
    const StateSpace X(2, 2);
    RateField r = rates(ModelParams::make(2, {1, 1}, {1, 1}));
    RateField neg = r;
    neg.birth = [](int, Coords) { return -1.0; };
    EXPECT_THROW(validate_rates(neg, X), ValidationError);
    RateField boundary = r;
    boundary.death = [](int, Coords) { return 1.0; };  // nonzero at x_j = 0
    EXPECT_THROW(validate_rates(boundary, X), ValidationError);
    EXPECT_THROW(build_L_BD(neg, X), ValidationError);
    RateField wrong_n = r;
    wrong_n.n = 3;
    EXPECT_THROW(validate_rates(wrong_n, X), ValidationError);
}

TEST(Rates, GenericStationaryWeightIsBinomialForOneSpecies) {
    const double p = 0.3;
    const int N = 6;
    RateField r;
    r.n = 1;
    r.birth = [&](int, Coords x) { return p * (N - x[0]); };
    r.death = [&](int, Coords x) { return (1 - p) * x[0]; };
    const StateSpace X(1, N);
    const auto W = stationary_weight_generic(r, X);
    for (int x = 0; x <= N; ++x) {
        const double ref = static_cast<double>(binomial(N, x)) * std::pow(p, x) * std::pow(1 - p, N - x);
        EXPECT_NEAR(W[static_cast<std::size_t>(x)], ref, 1e-14);
    }
}

TEST(Rates, UnreachableStateIsReported) {
    RateField r;
    r.n = 2;
    r.birth = [](int j, Coords x) { return (j == 0 && x[0] + x[1] < 2) ? 1.0 : 0.0; };
    r.death = [](int j, Coords x) { return j == 0 ? 1.0 * x[0] : 1.0 * x[1]; };
    EXPECT_THROW(stationary_weight_generic(r, StateSpace(2, 2)), ValidationError);
}
