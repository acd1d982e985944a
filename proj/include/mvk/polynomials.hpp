#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvk/lattice.hpp"
#include "mvk/model.hpp"
#include "mvk/operators.hpp"
#include "mvk/report.hpp"
#include "mvk/spectrum.hpp"

namespace mvk {

/// Degrees m live on the same lattice as the coordinates x.
using DegreeIndex = LatticePoint;

/// P_m(x) for every pair: rows are x ranks, columns are m ranks.
struct PolynomialTable {
    Eigen::MatrixXd values;

    double operator()(std::size_t x, std::size_t m) const {
        return values(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(m));
    }
    Eigen::VectorXd column(std::size_t m) const { return values.col(static_cast<Eigen::Index>(m)); }
};

/// Truncated hypergeometric sum
///
///   P_m(x) = sum_c  prod_i (-x_i)_{r_i} prod_j (-m_j)_{s_j} / (-N)_{|c|}  prod u_ij^c_ij / c_ij!
///
/// over nonnegative integer n x n matrices c with row sums r_i and column sums
/// s_j. Terms with r_i > x_i or s_j > m_j vanish, so the search walks the
/// entries depth-first with the remaining row and column budgets and never
/// visits a zero term. The shifted-factorial ratio is updated one unit at a
/// time: adding 1 to c_ij multiplies the term by
/// -(x_i - r_i)(m_j - s_j) u_ij / ((N - |c|) c_ij).
/// The sum alternates and cancels heavily once some |u_ij| is large, so it is
/// accumulated in long double.
inline double eval_P(const Eigen::MatrixXd& u, Coords m, Coords x, int N) {
    const int n = static_cast<int>(u.rows());
    std::vector<int> row(x.begin(), x.end());
    std::vector<int> col(m.begin(), m.end());
    int used = 0;
    long double sum = 0.0;
    const int cells = n * n;

    auto walk = [&](auto&& self, int e, long double term) -> void {
        if (e == cells) {
            sum += term;
            return;
        }
        const int i = e / n;
        const int j = e % n;
        self(self, e + 1, term);
        auto& ri = row[static_cast<std::size_t>(i)];
        auto& cj = col[static_cast<std::size_t>(j)];
        int c = 0;
        while (ri > 0 && cj > 0) {
            ++c;
            term *= -static_cast<long double>(ri) * static_cast<long double>(cj) * static_cast<long double>(u(i, j)) /
                    (static_cast<long double>(N - used) * static_cast<long double>(c));
            --ri;
            --cj;
            ++used;
            self(self, e + 1, term);
        }
        ri += c;
        cj += c;
        used -= c;
    };
    walk(walk, 0, 1.0L);
    return static_cast<double>(sum);
}

inline double eval_P(const SpectralData& s, Coords m, Coords x, int N) { return eval_P(s.u, m, x, N); }

/// Dual polynomial Q_x(m): the same expression read as a function of m.
inline double eval_Q(const SpectralData& s, Coords x, Coords m, int N) { return eval_P(s.u, m, x, N); }

inline PolynomialTable build_table(const Eigen::MatrixXd& u, const StateSpace& X) {
    PolynomialTable t;
    const auto size = static_cast<Eigen::Index>(X.size());
    t.values.resize(size, size);
    for (std::size_t m = 0; m < X.size(); ++m) {
        for (std::size_t x = 0; x < X.size(); ++x) {
            t.values(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(m)) = eval_P(u, X.point(m), X.point(x), X.N());
        }
    }
    return t;
}

inline PolynomialTable build_table(const SpectralData& s, const StateSpace& X) { return build_table(s.u, X); }

namespace detail {

// down[r * n + j] = rank of (point r) - e_j, or -1.
inline std::vector<long> down_neighbours(const StateSpace& X) {
    std::vector<long> down(X.size() * static_cast<std::size_t>(X.n()), -1);
    for (std::size_t r = 0; r < X.size(); ++r) {
        for (int j = 0; j < X.n(); ++j) {
            if (auto y = X.shift(r, j, -1)) down[r * static_cast<std::size_t>(X.n()) + static_cast<std::size_t>(j)] = static_cast<long>(*y);
        }
    }
    return down;
}

}  // namespace detail

/// Coefficient extraction from the generating function
///
///   prod_{i=0..n} (sum_{j=0..n} a_ij t_j)^{x_i} = sum_m C(N, m) P_m(x) t_0^{m_0} t^m,
///
/// with x_0 = N - |x|. The product is homogeneous, so a degree-d polynomial is
/// stored by its (m_1..m_n) coefficients on the first C(d+n, n) lattice ranks.
inline std::vector<double> eval_P_via_generating_function(const Eigen::MatrixXd& a, Coords x, const StateSpace& X) {
    const int n = X.n();
    const int N = X.N();
    const auto down = detail::down_neighbours(X);
    std::vector<double> coef(X.size(), 0.0), next(X.size(), 0.0);
    coef[0] = 1.0;
    int degree = 0;
    auto multiply = [&](int i) {
        const std::size_t upto = static_cast<std::size_t>(binomial(degree + 1 + n, n));
        for (std::size_t m = 0; m < upto; ++m) {
            double v = 0.0;
            if (total(X.point(m)) <= degree) v += a(i, 0) * coef[m];
            for (int j = 0; j < n; ++j) {
                const long y = down[m * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
                if (y >= 0) v += a(i, j + 1) * coef[static_cast<std::size_t>(y)];
            }
            next[m] = v;
        }
        std::swap(coef, next);
        ++degree;
    };
    const int x0 = N - total(x);
    for (int k = 0; k < x0; ++k) multiply(0);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < x[static_cast<std::size_t>(i)]; ++k) multiply(i + 1);
    }
    std::vector<double> out(X.size());
    for (std::size_t m = 0; m < X.size(); ++m) out[m] = coef[m] / multinomial(N, X.point(m));
    return out;
}

inline std::vector<double> eval_P_via_generating_function(const SpectralData& s, Coords x, const StateSpace& X) {
    return eval_P_via_generating_function(s.a, x, X);
}

/// The full table assembled row by row from the generating function.
inline PolynomialTable oracle_table(const Eigen::MatrixXd& a, const StateSpace& X) {
    PolynomialTable t;
    const auto size = static_cast<Eigen::Index>(X.size());
    t.values.resize(size, size);
    for (std::size_t x = 0; x < X.size(); ++x) {
        const auto row = eval_P_via_generating_function(a, X.point(x), X);
        for (std::size_t m = 0; m < X.size(); ++m) t.values(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(m)) = row[m];
    }
    return t;
}

inline PolynomialTable oracle_table(const SpectralData& s, const StateSpace& X) { return oracle_table(s.a, X); }

/// E(m) = sum_j m_j lambda_j.
inline double eigenvalue(const SpectralData& s, Coords m) {
    double e = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j) e += m[j] * s.lambda[j];
    return e;
}

inline std::vector<double> eigenvalues(const SpectralData& s, const StateSpace& X) {
    std::vector<double> e(X.size());
    for (std::size_t m = 0; m < X.size(); ++m) e[m] = eigenvalue(s, X.point(m));
    return e;
}

/// max_m |Htilde P_m - E(m) P_m|_inf / max(1, |P_m|_inf).
inline Report verify_eigen_equation(const SpectralData& s, const ModelParams& params, const StateSpace& X,
                                    const PolynomialTable& table, double tol = 1e-9) {
    Report rep("eigen_equation");
    const auto Ht = build_Htilde(rates(params), X);
    const Eigen::MatrixXd applied = Ht.entries * table.values;
    double worst = 0.0;
    double worst_zero = 0.0;
    std::string where;
    for (std::size_t m = 0; m < X.size(); ++m) {
        const auto col = static_cast<Eigen::Index>(m);
        const double e = eigenvalue(s, X.point(m));
        const double res = (applied.col(col) - e * table.values.col(col)).cwiseAbs().maxCoeff() /
                           std::max(1.0, table.values.col(col).cwiseAbs().maxCoeff());
        if (m == 0) worst_zero = res;
        if (res > worst) {
            worst = res;
            where = "m = " + to_string(X.point(m));
        }
    }
    rep.add("residual", worst, tol, where);
    rep.add("constant_mode", worst_zero, tol);
    return rep;
}

/// (C(N, m) eta_bar^m)^{-1}: the closed-form squared norm of P_m.
inline double norm_closed_form(const SpectralData& s, Coords m, int N) {
    double v = multinomial(N, m);
    for (std::size_t j = 0; j < m.size(); ++j) v *= std::pow(s.eta_bar[j], m[j]);
    return 1.0 / v;
}

struct GramResult {
    Eigen::MatrixXd G;
    double worst_offdiag = 0.0;   // |G_mm'| / sqrt(G_mm G_m'm')
    double worst_diag_rel = 0.0;  // |G_mm - closed form| / closed form
};

/// G_mm' = sum_x W(eta; x) P_m(x) P_m'(x).
inline GramResult gram_matrix(const std::vector<double>& W, const SpectralData& s, const PolynomialTable& table,
                              const StateSpace& X) {
    GramResult r;
    const Eigen::VectorXd w = to_vector(W);
    r.G = table.values.transpose() * w.asDiagonal() * table.values;
    for (std::size_t m = 0; m < X.size(); ++m) {
        const auto a = static_cast<Eigen::Index>(m);
        const double closed = norm_closed_form(s, X.point(m), X.N());
        r.worst_diag_rel = std::max(r.worst_diag_rel, std::abs(r.G(a, a) - closed) / closed);
        for (std::size_t k = m + 1; k < X.size(); ++k) {
            const auto b = static_cast<Eigen::Index>(k);
            const double scaled = std::abs(r.G(a, b)) / std::sqrt(std::abs(r.G(a, a) * r.G(b, b)));
            r.worst_offdiag = std::max(r.worst_offdiag, scaled);
        }
    }
    return r;
}

inline GramResult gram_matrix(const ModelParams& params, const SpectralData& s, const PolynomialTable& table,
                              const StateSpace& X) {
    return gram_matrix(stationary_weight(params, X), s, table, X);
}

/// W(eta^d; m) on every lattice point.
inline std::vector<double> dual_weight(const SpectralData& s, const StateSpace& X) {
    const std::vector<double> eta(s.eta_dual.begin() + 1, s.eta_dual.end());
    std::vector<double> w(X.size());
    for (std::size_t m = 0; m < X.size(); ++m) w[m] = multinomial_weight(X.N(), s.eta_dual[0], eta, X.point(m));
    return w;
}

/// sum_m W(eta^d; m) Q_x(m) Q_y(m), compared with delta_xy / (W(eta; x) (eta_0^d)^{-N}).
inline GramResult dual_gram(const SpectralData& s, const PolynomialTable& table, const StateSpace& X) {
    GramResult r;
    const Eigen::VectorXd wd = to_vector(dual_weight(s, X));
    r.G = table.values * wd.asDiagonal() * table.values.transpose();
    const double scale = std::pow(s.eta_dual[0], X.N());
    for (std::size_t x = 0; x < X.size(); ++x) {
        const auto a = static_cast<Eigen::Index>(x);
        const double closed = scale / multinomial_weight(X.N(), s.eta.eta0, s.eta.eta, X.point(x));
        r.worst_diag_rel = std::max(r.worst_diag_rel, std::abs(r.G(a, a) - closed) / closed);
        for (std::size_t y = x + 1; y < X.size(); ++y) {
            const auto b = static_cast<Eigen::Index>(y);
            r.worst_offdiag = std::max(r.worst_offdiag, std::abs(r.G(a, b)) / std::sqrt(std::abs(r.G(a, a) * r.G(b, b))));
        }
    }
    return r;
}

/// T(x, m) = sqrt(W(eta; x)) P_m(x) sqrt(C(N, m) eta_bar^m); orthogonal when the norms are right.
inline Eigen::MatrixXd orthonormal_matrix(const std::vector<double>& W, const SpectralData& s,
                                          const PolynomialTable& table, const StateSpace& X) {
    Eigen::MatrixXd T = table.values;
    for (std::size_t x = 0; x < X.size(); ++x) T.row(static_cast<Eigen::Index>(x)) *= std::sqrt(W[x]);
    for (std::size_t m = 0; m < X.size(); ++m) {
        T.col(static_cast<Eigen::Index>(m)) /= std::sqrt(norm_closed_form(s, X.point(m), X.N()));
    }
    return T;
}

inline Report verify_duality(const std::vector<double>& W, const SpectralData& s, const PolynomialTable& table,
                             const StateSpace& X, double orth_tol = 1e-9, double diag_tol = 1e-8) {
    Report rep("duality");
    const auto T = orthonormal_matrix(W, s, table, X);
    const auto I = Eigen::MatrixXd::Identity(T.rows(), T.cols());
    rep.add("TtT_identity", (T.transpose() * T - I).cwiseAbs().maxCoeff(), orth_tol);
    rep.add("TTt_identity", (T * T.transpose() - I).cwiseAbs().maxCoeff(), orth_tol);
    const auto dg = dual_gram(s, table, X);
    rep.add("dual_gram_offdiag", dg.worst_offdiag, orth_tol);
    rep.add("dual_gram_diag", dg.worst_diag_rel, diag_tol);
    return rep;
}

/// Each column P_m is a polynomial of total degree |m|: least-squares fit onto
/// the monomials x^k with |k| <= |m| leaves a relative residual below tol.
inline Report verify_degree_structure(const PolynomialTable& table, const StateSpace& X, double tol = 1e-8) {
    Report rep("degree_structure");
    double worst = 0.0;
    std::string where;
    for (int d = 0; d < X.N(); ++d) {
        const StateSpace basis(X.n(), std::max(d, 1));
        const auto cols = static_cast<Eigen::Index>(binomial(d + X.n(), X.n()));
        Eigen::MatrixXd V(static_cast<Eigen::Index>(X.size()), cols);
        for (std::size_t x = 0; x < X.size(); ++x) {
            for (Eigen::Index k = 0; k < cols; ++k) {
                double v = 1.0;
                const Coords pk = basis.point(static_cast<std::size_t>(k));
                for (std::size_t i = 0; i < pk.size(); ++i) v *= std::pow(static_cast<double>(X.point(x)[i]), pk[i]);
                V(static_cast<Eigen::Index>(x), k) = v;
            }
        }
        for (Eigen::Index k = 0; k < cols; ++k) V.col(k) /= V.col(k).norm();
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
        const std::size_t lo = d == 0 ? 0 : static_cast<std::size_t>(binomial(d - 1 + X.n(), X.n()));
        const std::size_t hi = static_cast<std::size_t>(binomial(d + X.n(), X.n()));
        for (std::size_t m = lo; m < hi; ++m) {
            const Eigen::VectorXd y = table.column(m);
            const Eigen::VectorXd c = qr.solve(y);
            const double res = (V * c - y).norm() / y.norm();
            if (res > worst) {
                worst = res;
                where = "m = " + to_string(X.point(m));
            }
        }
    }
    rep.add("fit_residual", worst, tol, where);
    return rep;
}

/// Single-variable Krawtchouk polynomial 2F1(-m, -x; -N | 1/p).
inline double kr_P(int m, int x, double p, int N) {
    double term = 1.0;
    double sum = 1.0;
    for (int k = 0; k < std::min(m, x); ++k) {
        term *= static_cast<double>(m - k) * static_cast<double>(x - k) /
                (static_cast<double>(N - k) * static_cast<double>(k + 1) * p);
        // (-m)_k (-x)_k / (-N)_k keeps sign (-1)^k.
        sum += (k % 2 == 0 ? -term : term);
    }
    return sum;
}

/// Squared norm 1 / (C(N, m) (p / (1 - p))^m) under the binomial weight.
inline double kr_norm(int m, double p, int N) {
    return 1.0 / (static_cast<double>(binomial(N, m)) * std::pow(p / (1.0 - p), m));
}

}  // namespace mvk
