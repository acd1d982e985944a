#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvk/errors.hpp"
#include "mvk/lattice.hpp"
#include "mvk/model.hpp"
#include "mvk/polynomials.hpp"
#include "mvk/report.hpp"

namespace mvk {

/// Bivariate Rahman polynomials, realised as dual birth-death polynomials
/// of a two-species process whose rates are rational in p1..p4.
struct RahmanParams {
    std::array<double, 4> p{};

    double S() const { return p[0] + p[1] + p[2] + p[3]; }
    /// p1 p4 - p2 p3
    double delta() const { return p[0] * p[3] - p[1] * p[2]; }

    void validate() const {
        for (int i = 0; i < 4; ++i) {
            if (!(p[static_cast<std::size_t>(i)] > 0.0) || !std::isfinite(p[static_cast<std::size_t>(i)])) {
                throw ValidationError("Rahman parameter p" + std::to_string(i + 1) + " must be positive");
            }
        }
        const double scale = std::max(p[0] * p[3], p[1] * p[2]);
        if (std::abs(delta()) <= 1e-12 * scale) throw SingularRahman("p1 p4 == p2 p3: Rahman parameters are singular");
    }
};

/// The four hypergeometric parameters of the (i, j, k, l) sum.
struct RahmanTUVW {
    double t = 0, u = 0, v = 0, w = 0;
};

struct RahmanSystem {
    RahmanParams params;
    std::array<double, 2> p_dual{};       // dual birth intensities
    std::array<double, 2> q_dual{};       // dual death intensities
    std::array<double, 2> lambda_dual{};  // -(p1 + p2), p3 + p4
    std::array<double, 2> lambda_quadratic{};  // roots of the dual characteristic quadratic
    /// u_dual(j, i) = lambda_j / (lambda_j - q_i): row j pairs with x_j, column i with m_i.
    Eigen::Matrix2d u_dual;
    RahmanTUVW definitional;  // read off u_dual
    RahmanTUVW printed;       // every denominator p1 (S)
    RahmanTUVW corrected;     // denominators p1, p2, p3, p4 for t, v, u, w
    Probabilities eta;               // trinomial probabilities, closed form
    Probabilities eta_from_norms;    // the same via norms of degree-one duals
    std::array<double, 3> eta_dual{};          // eta_0^d, eta_1^d, eta_2^d from p_dual / q_dual
    std::array<double, 2> eta_dual_closed{};   // eta_1^d, eta_2^d closed forms
    std::array<double, 2> eta_bar_dual{};      // closed forms
    std::array<double, 2> eta_bar_dual_from_norms{};
    bool explosive = false;  // p1^d p2^d < 0, q1^d q2^d < 0, lambda1^d lambda2^d < 0
    std::vector<std::string> notes;

    /// Eigenvalue of the dual difference operator on the column Q_x.
    double dual_eigenvalue(Coords x) const { return lambda_dual[0] * x[0] + lambda_dual[1] * x[1]; }
};

inline RahmanSystem derive_dual_system(const RahmanParams& rp) {
    rp.validate();
    const auto [p1, p2, p3, p4] = rp.p;
    const double S = rp.S();
    const double d = rp.delta();

    RahmanSystem sys;
    sys.params = rp;
    sys.p_dual = {p1 * p3 * (p2 + p4) * S / ((p1 + p3) * d), -p2 * p4 * (p1 + p3) * S / ((p2 + p4) * d)};
    sys.q_dual = {d / (p1 + p3), -d / (p2 + p4)};
    sys.lambda_dual = {-(p1 + p2), p3 + p4};

    // lambda^2 - (p1d + q1d + p2d + q2d) lambda + (p1d + q1d)(p2d + q2d) - p1d p2d = 0
    {
        const double b = sys.p_dual[0] + sys.q_dual[0] + sys.p_dual[1] + sys.q_dual[1];
        const double c = (sys.p_dual[0] + sys.q_dual[0]) * (sys.p_dual[1] + sys.q_dual[1]) - sys.p_dual[0] * sys.p_dual[1];
        const double disc = std::sqrt(std::max(0.0, b * b - 4.0 * c));
        const double big = b >= 0 ? 0.5 * (b + disc) : 0.5 * (b - disc);
        const double small = c / big;
        sys.lambda_quadratic = {std::min(big, small), std::max(big, small)};
    }

    for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
            const double lam = sys.lambda_dual[static_cast<std::size_t>(j)];
            sys.u_dual(j, i) = lam / (lam - sys.q_dual[static_cast<std::size_t>(i)]);
        }
    }
    sys.definitional = {sys.u_dual(0, 0), sys.u_dual(1, 0), sys.u_dual(0, 1), sys.u_dual(1, 1)};
    sys.printed = {(p1 + p2) * (p1 + p3) / (p1 * S), (p1 + p3) * (p3 + p4) / (p1 * S),
                   (p1 + p2) * (p2 + p4) / (p1 * S), (p4 + p2) * (p4 + p3) / (p1 * S)};
    sys.corrected = {(p1 + p2) * (p1 + p3) / (p1 * S), (p1 + p3) * (p3 + p4) / (p3 * S),
                     (p1 + p2) * (p2 + p4) / (p2 * S), (p4 + p2) * (p4 + p3) / (p4 * S)};

    const double r1 = sys.p_dual[0] / sys.q_dual[0];
    const double r2 = sys.p_dual[1] / sys.q_dual[1];
    sys.eta_dual = {1.0 / (1.0 + r1 + r2), r1 / (1.0 + r1 + r2), r2 / (1.0 + r1 + r2)};
    sys.eta_dual_closed = {p1 * p3 * S / ((p1 + p2) * (p1 + p3) * (p3 + p4)),
                           p2 * p4 * S / ((p1 + p2) * (p2 + p4) * (p3 + p4))};

    sys.eta.eta0 = d * d / ((p1 + p2) * (p1 + p3) * (p2 + p4) * (p3 + p4));
    sys.eta.eta = {p1 * p2 * S / ((p1 + p2) * (p1 + p3) * (p2 + p4)), p3 * p4 * S / ((p1 + p3) * (p2 + p4) * (p3 + p4))};

    sys.eta_bar_dual = {p1 * p2 * (p3 + p4) * S / (d * d), p3 * p4 * (p1 + p2) * S / (d * d)};
    for (int j = 0; j < 2; ++j) {
        double acc = 0.0;
        for (int i = 0; i < 2; ++i) acc += sys.eta_dual[static_cast<std::size_t>(i + 1)] * sys.u_dual(j, i) * sys.u_dual(j, i);
        sys.eta_bar_dual_from_norms[static_cast<std::size_t>(j)] = 1.0 / (acc - 1.0);
    }
    const double denom = 1.0 + sys.eta_bar_dual_from_norms[0] + sys.eta_bar_dual_from_norms[1];
    sys.eta_from_norms.eta0 = 1.0 / denom;
    sys.eta_from_norms.eta = {sys.eta_bar_dual_from_norms[0] / denom, sys.eta_bar_dual_from_norms[1] / denom};

    sys.explosive = sys.p_dual[0] * sys.p_dual[1] < 0.0 && sys.q_dual[0] * sys.q_dual[1] < 0.0 &&
                    sys.lambda_dual[0] * sys.lambda_dual[1] < 0.0;

    auto mismatch = [](double a, double b) { return std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(b)); };
    std::string diff;
    if (mismatch(sys.printed.v, sys.definitional.v)) diff += " v";
    if (mismatch(sys.printed.u, sys.definitional.u)) diff += " u";
    if (mismatch(sys.printed.w, sys.definitional.w)) diff += " w";
    sys.notes.push_back(
        "closed forms for u, v, w printed with denominator p1 (p1+p2+p3+p4) disagree with "
        "lambda_j/(lambda_j - q_i);" +
        (diff.empty() ? std::string(" (no disagreement at these parameters)") : " mismatched:" + diff) +
        "; denominators p3, p2, p4 (for u, v, w) reproduce the definition, which is used for computation");
    return sys;
}

namespace detail {

inline long double pochhammer_neg(int a, int k) {
    // (-a)_k
    long double r = 1.0L;
    for (int t = 0; t < k; ++t) r *= static_cast<long double>(-a + t);
    return r;
}

}  // namespace detail

/// The quadruple sum
///   sum_{i+j+k+l <= N} (-m1)_{i+j} (-m2)_{k+l} (-x1)_{i+k} (-x2)_{j+l}
///                      / (i! j! k! l! (-N)_{i+j+k+l}) t^i u^j v^k w^l.
inline double eval_rahman(const RahmanTUVW& c, Coords m, Coords x, int N) {
    long double sum = 0.0L;
    long double fact[64];
    fact[0] = 1.0L;
    for (int k = 1; k < 64; ++k) fact[k] = fact[k - 1] * k;
    for (int i = 0; i <= std::min(m[0], x[0]); ++i) {
        for (int j = 0; j <= std::min(m[0] - i, x[1]); ++j) {
            for (int k = 0; k <= std::min(m[1], x[0] - i); ++k) {
                for (int l = 0; l <= std::min(m[1] - k, x[1] - j); ++l) {
                    const int s = i + j + k + l;
                    if (s > N) continue;
                    long double term = detail::pochhammer_neg(m[0], i + j) * detail::pochhammer_neg(m[1], k + l) *
                                       detail::pochhammer_neg(x[0], i + k) * detail::pochhammer_neg(x[1], j + l) /
                                       (fact[i] * fact[j] * fact[k] * fact[l] * detail::pochhammer_neg(N, s));
                    term *= std::pow(static_cast<long double>(c.t), i) * std::pow(static_cast<long double>(c.u), j) *
                            std::pow(static_cast<long double>(c.v), k) * std::pow(static_cast<long double>(c.w), l);
                    sum += term;
                }
            }
        }
    }
    return static_cast<double>(sum);
}

inline double eval_rahman(const RahmanSystem& sys, Coords m, Coords x, int N) {
    return eval_rahman(sys.definitional, m, x, N);
}

/// Q_x(m) on the bivariate lattice: rows x, columns m.
inline PolynomialTable rahman_table(const RahmanSystem& sys, const StateSpace& X) {
    return build_table(Eigen::MatrixXd(sys.u_dual), X);
}

/// Applies the dual difference operator in m to every row Q_x(.):
///   (N - |m|) sum_j p_j^d (Q(m) - Q(m + e_j)) + sum_j q_j^d m_j (Q(m) - Q(m - e_j)).
/// Rates may be negative, so this bypasses the RateField validation.
inline Eigen::MatrixXd apply_dual_operator(const RahmanSystem& sys, const PolynomialTable& table, const StateSpace& X) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(table.values.rows(), table.values.cols());
    for (std::size_t m = 0; m < X.size(); ++m) {
        const Coords pm = X.point(m);
        const auto cm = static_cast<Eigen::Index>(m);
        const double slack = X.N() - total(pm);
        for (int j = 0; j < 2; ++j) {
            if (auto up = X.shift(m, j, +1)) {
                out.col(cm) += slack * sys.p_dual[static_cast<std::size_t>(j)] *
                               (table.values.col(cm) - table.values.col(static_cast<Eigen::Index>(*up)));
            }
            if (auto dn = X.shift(m, j, -1)) {
                out.col(cm) += sys.q_dual[static_cast<std::size_t>(j)] * pm[static_cast<std::size_t>(j)] *
                               (table.values.col(cm) - table.values.col(static_cast<Eigen::Index>(*dn)));
            }
        }
    }
    return out;
}

/// Left-hand side of the five-term recurrence written with the printed
/// coefficients, applied in m to every row.
inline Eigen::MatrixXd apply_five_term(const RahmanParams& rp, const PolynomialTable& table, const StateSpace& X) {
    const auto [p1, p2, p3, p4] = rp.p;
    const double S = rp.S();
    const double d = rp.delta();
    const double c_up1 = p1 * p3 * (p2 + p4) * S / ((p1 + p3) * d);
    const double c_up2 = p2 * p4 * (p1 + p3) * S / ((p2 + p4) * d);
    const double c_dn1 = d / (p1 + p3);
    const double c_dn2 = d / (p2 + p4);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(table.values.rows(), table.values.cols());
    auto col = [&](std::optional<std::size_t> r) { return table.values.col(static_cast<Eigen::Index>(*r)); };
    for (std::size_t m = 0; m < X.size(); ++m) {
        const Coords pm = X.point(m);
        const auto cm = static_cast<Eigen::Index>(m);
        const Eigen::VectorXd here = table.values.col(cm);
        const double slack = X.N() - total(pm);
        if (auto up = X.shift(m, 0, +1)) out.col(cm) += slack * c_up1 * (col(up) - here);
        if (auto up = X.shift(m, 1, +1)) out.col(cm) -= slack * c_up2 * (col(up) - here);
        if (auto dn = X.shift(m, 0, -1)) out.col(cm) += pm[0] * c_dn1 * (col(dn) - here);
        if (auto dn = X.shift(m, 1, -1)) out.col(cm) -= pm[1] * c_dn2 * (col(dn) - here);
    }
    return out;
}

inline Report verify_rahman(const RahmanSystem& sys, int N, double tol = 1e-10, double exact_tol = 1e-12) {
    Report rep("rahman");
    const StateSpace X(2, N);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };

    rep.add("lambda_quadratic", std::max(rel(sys.lambda_quadratic[0], sys.lambda_dual[0]),
                                         rel(sys.lambda_quadratic[1], sys.lambda_dual[1])), tol);
    rep.add("corrected_closed_forms",
            std::max({rel(sys.corrected.t, sys.definitional.t), rel(sys.corrected.u, sys.definitional.u),
                      rel(sys.corrected.v, sys.definitional.v), rel(sys.corrected.w, sys.definitional.w)}),
            exact_tol);
    rep.add("eta_sum", std::abs(sys.eta.eta0 + sys.eta.eta[0] + sys.eta.eta[1] - 1.0), exact_tol);
    rep.add("eta_from_norms", std::max({rel(sys.eta_from_norms.eta0, sys.eta.eta0), rel(sys.eta_from_norms.eta[0], sys.eta.eta[0]),
                                        rel(sys.eta_from_norms.eta[1], sys.eta.eta[1])}), tol);
    rep.add("eta_dual_closed", std::max(rel(sys.eta_dual[1], sys.eta_dual_closed[0]), rel(sys.eta_dual[2], sys.eta_dual_closed[1])), tol);
    rep.add("eta_bar_dual_from_norms", std::max(rel(sys.eta_bar_dual_from_norms[0], sys.eta_bar_dual[0]),
                                                rel(sys.eta_bar_dual_from_norms[1], sys.eta_bar_dual[1])), tol);
    rep.add("explosive_sign_pattern", sys.explosive ? 0.0 : 1.0, 0.0);

    // sum_i eta_i^d u_ji = 1, sum_i eta_i^d u_1i u_2i = 1, and the x-side analogues.
    const auto& u = sys.u_dual;
    const double ed1 = sys.eta_dual[1], ed2 = sys.eta_dual[2];
    const double e1 = sys.eta.eta[0], e2 = sys.eta.eta[1];
    rep.add("dual_orthogonality_sums",
            std::max({std::abs(ed1 * u(0, 0) + ed2 * u(0, 1) - 1.0), std::abs(ed1 * u(1, 0) + ed2 * u(1, 1) - 1.0),
                      std::abs(ed1 * u(0, 0) * u(1, 0) + ed2 * u(0, 1) * u(1, 1) - 1.0)}),
            exact_tol);
    rep.add("orthogonality_sums",
            std::max({std::abs(e1 * u(0, 0) + e2 * u(1, 0) - 1.0), std::abs(e1 * u(0, 1) + e2 * u(1, 1) - 1.0),
                      std::abs(e1 * u(0, 0) * u(0, 1) + e2 * u(1, 0) * u(1, 1) - 1.0)}),
            exact_tol);

    const auto table = rahman_table(sys, X);
    double worst_eval = 0.0;
    for (std::size_t x = 0; x < X.size(); ++x) {
        for (std::size_t m = 0; m < X.size(); ++m) {
            worst_eval = std::max(worst_eval, rel(eval_rahman(sys, X.point(m), X.point(x), N), table(x, m)));
        }
    }
    rep.add("quadruple_sum_vs_generic", worst_eval, exact_tol);

    const Eigen::MatrixXd dual_applied = apply_dual_operator(sys, table, X);
    const Eigen::MatrixXd five_term = apply_five_term(sys.params, table, X);
    double worst_dual = 0.0, worst_five = 0.0;
    for (std::size_t x = 0; x < X.size(); ++x) {
        const auto r = static_cast<Eigen::Index>(x);
        const double e = sys.dual_eigenvalue(X.point(x));
        const double scale = std::max(1.0, table.values.row(r).cwiseAbs().maxCoeff());
        worst_dual = std::max(worst_dual, (dual_applied.row(r) - e * table.values.row(r)).cwiseAbs().maxCoeff() / scale);
        // The printed recurrence equals minus the dual operator, with eigenvalue -e.
        worst_five = std::max(worst_five, (five_term.row(r) + e * table.values.row(r)).cwiseAbs().maxCoeff() / scale);
    }
    rep.add("dual_difference_equation", worst_dual, tol);
    rep.add("five_term_recurrence", worst_five, tol);

    // Orthogonality in x under the trinomial W(eta; x), norms 1/(C(N,m) prod (eta_j^d/eta_0^d)^m_j).
    {
        const std::vector<double> W = [&] {
            std::vector<double> w(X.size());
            for (std::size_t x = 0; x < X.size(); ++x) w[x] = multinomial_weight(N, sys.eta.eta0, sys.eta.eta, X.point(x));
            return w;
        }();
        const Eigen::MatrixXd G = table.values.transpose() * to_vector(W).asDiagonal() * table.values;
        double off = 0.0, diag = 0.0;
        for (std::size_t m = 0; m < X.size(); ++m) {
            const auto a = static_cast<Eigen::Index>(m);
            const Coords pm = X.point(m);
            const double closed = 1.0 / (multinomial(N, pm) * std::pow(sys.eta_dual[1] / sys.eta_dual[0], pm[0]) *
                                         std::pow(sys.eta_dual[2] / sys.eta_dual[0], pm[1]));
            diag = std::max(diag, std::abs(G(a, a) - closed) / closed);
            for (std::size_t k = m + 1; k < X.size(); ++k) {
                const auto b = static_cast<Eigen::Index>(k);
                off = std::max(off, std::abs(G(a, b)) / std::sqrt(G(a, a) * G(b, b)));
            }
        }
        rep.add("orthogonality_offdiag", off, tol);
        rep.add("orthogonality_norms", diag, 1e-8);
    }
    // Dual orthogonality in m under W(eta^d; m), norms 1/(C(N,x) eta_bar_d^x).
    {
        std::vector<double> Wd(X.size());
        const std::vector<double> ed{sys.eta_dual[1], sys.eta_dual[2]};
        for (std::size_t m = 0; m < X.size(); ++m) Wd[m] = multinomial_weight(N, sys.eta_dual[0], ed, X.point(m));
        const Eigen::MatrixXd G = table.values * to_vector(Wd).asDiagonal() * table.values.transpose();
        double off = 0.0, diag = 0.0;
        for (std::size_t x = 0; x < X.size(); ++x) {
            const auto a = static_cast<Eigen::Index>(x);
            const Coords px = X.point(x);
            const double closed = 1.0 / (multinomial(N, px) * std::pow(sys.eta_bar_dual[0], px[0]) *
                                         std::pow(sys.eta_bar_dual[1], px[1]));
            diag = std::max(diag, std::abs(G(a, a) - closed) / closed);
            for (std::size_t y = x + 1; y < X.size(); ++y) {
                const auto b = static_cast<Eigen::Index>(y);
                off = std::max(off, std::abs(G(a, b)) / std::sqrt(G(a, a) * G(b, b)));
            }
        }
        rep.add("dual_orthogonality_offdiag", off, tol);
        rep.add("dual_orthogonality_norms", diag, 1e-8);
    }
    return rep;
}

}  // namespace mvk
