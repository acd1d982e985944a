#include <gtest/gtest.h>

#include <random>

#include "mvk/rahman.hpp"
#include "support.hpp"

using namespace mvk;

namespace {

RahmanParams random_rahman(std::mt19937_64& rng) {
    for (;;) {
        RahmanParams rp;
        for (auto& v : rp.p) v = testkit::draw(rng, 0.2, 5.0);
        const double scale = std::max(rp.p[0] * rp.p[3], rp.p[1] * rp.p[2]);
        if (std::abs(rp.delta()) > 0.05 * scale) return rp;
    }
}

}  // namespace

TEST(Rahman, HandDerivedParameters) {
    const auto sys = derive_dual_system(RahmanParams{{1, 2, 3, 4}});
    EXPECT_DOUBLE_EQ(sys.lambda_dual[0], -3.0);
    EXPECT_DOUBLE_EQ(sys.lambda_dual[1], 7.0);
    EXPECT_NEAR(sys.q_dual[0], -0.5, 1e-15);
    EXPECT_NEAR(sys.q_dual[1], 1.0 / 3, 1e-15);
    EXPECT_NEAR(sys.p_dual[0], -22.5, 1e-13);
    EXPECT_NEAR(sys.p_dual[1], 80.0 / 3, 1e-13);
    EXPECT_NEAR(sys.definitional.t, 6.0 / 5, 1e-15);
    EXPECT_NEAR(sys.definitional.v, 9.0 / 10, 1e-15);
    EXPECT_NEAR(sys.definitional.u, 14.0 / 15, 1e-15);
    EXPECT_NEAR(sys.definitional.w, 21.0 / 20, 1e-15);
    EXPECT_NEAR(sys.lambda_quadratic[0], -3.0, 1e-12);
    EXPECT_NEAR(sys.lambda_quadratic[1], 7.0, 1e-12);
}

TEST(Rahman, HandDerivedProbabilities) {
    const auto sys = derive_dual_system(RahmanParams{{1, 2, 3, 4}});
    EXPECT_NEAR(sys.eta.eta0, 1.0 / 126, 1e-16);
    EXPECT_NEAR(sys.eta.eta[0], 5.0 / 18, 1e-16);
    EXPECT_NEAR(sys.eta.eta[1], 5.0 / 7, 1e-15);
    EXPECT_NEAR(sys.eta.eta0 + sys.eta.eta[0] + sys.eta.eta[1], 1.0, 1e-15);
    EXPECT_NEAR(sys.eta_dual[1], 5.0 / 14, 1e-15);
    EXPECT_NEAR(sys.eta_dual[2], 40.0 / 63, 1e-15);
    EXPECT_NEAR(sys.eta_bar_dual[0], 35.0, 1e-12);
    EXPECT_NEAR(sys.eta_bar_dual[1], 90.0, 1e-12);
    EXPECT_LE(sys.eta_dual[1] + sys.eta_dual[2], 1.0);
}

TEST(Rahman, DualOrthogonalitySumsExact) {
    const auto sys = derive_dual_system(RahmanParams{{1, 2, 3, 4}});
    const double e1 = 5.0 / 14, e2 = 40.0 / 63;
    const double t = 6.0 / 5, v = 9.0 / 10, u = 14.0 / 15, w = 21.0 / 20;
    EXPECT_NEAR(e1 * t + e2 * v, 1.0, 1e-15);
    EXPECT_NEAR(e1 * u + e2 * w, 1.0, 1e-15);
    EXPECT_NEAR(e1 * t * u + e2 * v * w, 1.0, 1e-15);
    EXPECT_LE(verify_rahman(sys, 3).find("dual_orthogonality_sums")->residual, 1e-12);
}

TEST(Rahman, PrintedDenominatorsAreFlagged) {
    const auto sys = derive_dual_system(RahmanParams{{1, 2, 3, 4}});
    EXPECT_NEAR(sys.printed.t, sys.definitional.t, 1e-15);  // t is printed correctly
    EXPECT_GT(std::abs(sys.printed.u - sys.definitional.u), 0.1);
    EXPECT_GT(std::abs(sys.printed.v - sys.definitional.v), 0.1);
    EXPECT_GT(std::abs(sys.printed.w - sys.definitional.w), 0.1);
    ASSERT_FALSE(sys.notes.empty());
    EXPECT_NE(sys.notes.front().find("mismatched: v u w"), std::string::npos);
}

TEST(Rahman, FullVerificationAtDeskScale) {
    const auto sys = derive_dual_system(RahmanParams{{1, 2, 3, 4}});
    const auto rep = verify_rahman(sys, 5);
    for (const auto& c : rep.checks()) EXPECT_TRUE(c.passed()) << c.name << " " << c.residual;
    EXPECT_LE(rep.find("five_term_recurrence")->residual, 1e-10);
    EXPECT_LE(rep.find("dual_difference_equation")->residual, 1e-10);
}

TEST(Rahman, OriginColumnHasZeroEigenvalue) {
    const auto sys = derive_dual_system(RahmanParams{{1, 2, 3, 4}});
    const StateSpace X(2, 4);
    const auto t = rahman_table(sys, X);
    const Eigen::MatrixXd applied = apply_dual_operator(sys, t, X);
    EXPECT_EQ(sys.dual_eigenvalue(X.point(0)), 0.0);
    EXPECT_LE(applied.row(0).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Rahman, TrivialValues) {
    const auto sys = derive_dual_system(RahmanParams{{1, 2, 3, 4}});
    const std::vector<int> zero{0, 0};
    for (int a = 0; a <= 3; ++a) {
        for (int b = 0; a + b <= 3; ++b) {
            const std::vector<int> y{a, b};
            EXPECT_DOUBLE_EQ(eval_rahman(sys, zero, y, 3), 1.0);
            EXPECT_DOUBLE_EQ(eval_rahman(sys, y, zero, 3), 1.0);
        }
    }
}

TEST(Rahman, QuadrupleSumMatchesGenericEvaluator) {
    std::mt19937_64 rng(71);
    for (int N = 1; N <= 6; ++N) {
        const auto sys = derive_dual_system(N == 3 ? RahmanParams{{1, 2, 3, 4}} : random_rahman(rng));
        const StateSpace X(2, N);
        const auto t = rahman_table(sys, X);
        for (std::size_t x = 0; x < X.size(); ++x) {
            for (std::size_t m = 0; m < X.size(); ++m) {
                const double r = eval_rahman(sys, X.point(m), X.point(x), N);
                EXPECT_NEAR(r, t(x, m), 1e-12 * std::max(1.0, std::abs(r)));
            }
        }
    }
}

TEST(Rahman, CorrectedClosedFormsRandomDraws) {
    std::mt19937_64 rng(81);
    for (int trial = 0; trial < 200; ++trial) {
        const auto sys = derive_dual_system(random_rahman(rng));
        auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
        EXPECT_LE(rel(sys.corrected.t, sys.definitional.t), 1e-12);
        EXPECT_LE(rel(sys.corrected.u, sys.definitional.u), 1e-12);
        EXPECT_LE(rel(sys.corrected.v, sys.definitional.v), 1e-12);
        EXPECT_LE(rel(sys.corrected.w, sys.definitional.w), 1e-12);
    }
}

TEST(Rahman, ProbabilityConsistencyAndSignPattern) {
    std::mt19937_64 rng(91);
    for (int trial = 0; trial < 200; ++trial) {
        const auto sys = derive_dual_system(random_rahman(rng));
        EXPECT_NEAR(sys.eta_from_norms.eta0, sys.eta.eta0, 1e-10);
        EXPECT_NEAR(sys.eta_from_norms.eta[0], sys.eta.eta[0], 1e-10);
        EXPECT_NEAR(sys.eta_from_norms.eta[1], sys.eta.eta[1], 1e-10);
        EXPECT_NEAR(sys.eta_dual[1], sys.eta_dual_closed[0], 1e-10);
        EXPECT_NEAR(sys.eta_dual[2], sys.eta_dual_closed[1], 1e-10);
        EXPECT_LT(sys.p_dual[0] * sys.p_dual[1], 0.0);
        EXPECT_LT(sys.q_dual[0] * sys.q_dual[1], 0.0);
        EXPECT_LT(sys.lambda_dual[0] * sys.lambda_dual[1], 0.0);
        EXPECT_TRUE(sys.explosive);
    }
}

TEST(Rahman, RecurrenceRandomDraws) {
    std::mt19937_64 rng(97);
    for (int trial = 0; trial < 10; ++trial) {
        const auto rep = verify_rahman(derive_dual_system(random_rahman(rng)), 4);
        EXPECT_LE(rep.find("five_term_recurrence")->residual, 1e-10);
        EXPECT_LE(rep.find("orthogonality_offdiag")->residual, 1e-10);
        EXPECT_LE(rep.find("dual_orthogonality_offdiag")->residual, 1e-10);
    }
}

TEST(Rahman, SingularAndInvalidParameters) {
    EXPECT_THROW(derive_dual_system(RahmanParams{{1, 2, 2, 4}}), SingularRahman);
    EXPECT_THROW(derive_dual_system(RahmanParams{{1, 2, 3, 6 * (1 + 1e-14)}}), SingularRahman);
    EXPECT_THROW(derive_dual_system(RahmanParams{{1, -2, 3, 4}}), ValidationError);
}
