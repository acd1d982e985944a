#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvk/errors.hpp"
#include "mvk/lattice.hpp"
#include "mvk/model.hpp"
#include "mvk/operators.hpp"
#include "mvk/report.hpp"

namespace mvk {

/// Everything the hypergeometric construction needs, derived from (p, q).
///
/// Indices: u(i, j) pairs coordinate i with degree j (0-based), both in 0..n-1.
/// a is (n+1) x (n+1) with a(0, .) = a(., 0) = 1 and a(i, j) = 1 - u(i-1, j-1).
struct SpectralData {
    std::vector<double> lambda;  // ascending roots of sum_i p_i / (lambda - q_i) = 1
    Eigen::MatrixXd gap;         // gap(i, j) = lambda_j - q_i, kept separately for accuracy
    Eigen::MatrixXd u;           // u(i, j) = lambda_j / (lambda_j - q_i)
    Eigen::MatrixXd a;
    Probabilities eta;
    std::vector<double> eta_bar;   // (sum_i eta_i u_ij^2 - 1)^{-1}
    std::vector<double> eta_dual;  // eta_0^d, eta_1^d..eta_n^d

    int n() const noexcept { return static_cast<int>(lambda.size()); }
};

namespace detail {

/// Fill u, a, eta_bar and eta_dual once lambda, gap and eta are known.
inline void complete_spectral_data(SpectralData& s) {
    const int n = s.n();
    s.u.resize(n, n);
    s.a = Eigen::MatrixXd::Ones(n + 1, n + 1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double g = s.gap(i, j);
            const double lam = s.lambda[static_cast<std::size_t>(j)];
            s.u(i, j) = lam / g;
            // 1 - lambda/(lambda - q) = -q/(lambda - q), without the cancellation.
            s.a(i + 1, j + 1) = -(lam - g) / g;
        }
    }
    s.eta_bar.assign(static_cast<std::size_t>(n), 0.0);
    double sum_bar = 0.0;
    for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += s.eta.eta[static_cast<std::size_t>(i)] * s.u(i, j) * s.u(i, j);
        const double bar = 1.0 / (acc - 1.0);
        if (!(bar > 0.0) || !std::isfinite(bar)) {
            throw NoConvergence("dual weight eta_bar_" + std::to_string(j + 1) + " is not positive (" +
                                std::to_string(bar) + ")");
        }
        s.eta_bar[static_cast<std::size_t>(j)] = bar;
        sum_bar += bar;
    }
    s.eta_dual.assign(static_cast<std::size_t>(n + 1), 0.0);
    s.eta_dual[0] = 1.0 / (1.0 + sum_bar);
    for (int j = 0; j < n; ++j) s.eta_dual[static_cast<std::size_t>(j + 1)] = s.eta_dual[0] * s.eta_bar[static_cast<std::size_t>(j)];
}

// Root of sum_i p_i / (d_i + t) = 1 for t in (0, width], where d_i = q_pole - q_i.
// Returns the offset t from the pole.
inline double secular_root(const std::vector<double>& p, const std::vector<double>& d, double width, double pole) {
    auto g = [&](double t) {
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) s += p[i] / (d[i] + t);
        return s - 1.0;
    };
    double lo = 0.0;
    double hi = width;
    for (int it = 0; it < 4000; ++it) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        if (g(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (hi - lo > 1e-14 * (pole + hi)) {
        throw NoConvergence("secular bracket near q = " + std::to_string(pole) + " did not shrink below 1e-14");
    }
    // Newton polish, kept inside the final bracket.
    double t = lo + 0.5 * (hi - lo);
    for (int it = 0; it < 3; ++it) {
        double f = -1.0;
        double df = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double r = 1.0 / (d[i] + t);
            f += p[i] * r;
            df -= p[i] * r * r;
        }
        if (df == 0.0 || f == 0.0) break;
        const double next = t - f / df;
        if (!(next >= lo && next <= hi)) break;
        t = next;
    }
    return t;
}

}  // namespace detail

/// Solves the characteristic problem det(lambda I - F) = 0 with
/// F(i, j) = p_j + q_i delta_ij through its secular form. Roots interlace the
/// sorted q: q_(1) < lambda_1 < q_(2) < ... < q_(n) < lambda_n <= q_(n) + sum p.
inline SpectralData solve_spectrum(const ModelParams& params, double delta_q) {
    params.validate();
    const int n = params.n;
    if (is_exceptional(params, delta_q)) {
        double low = 0.0;
        double high = 0.0;
        // Locate the coincident pair and report the limiting n = 2 eigenvalues.
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double g = std::abs(params.q[static_cast<std::size_t>(i)] - params.q[static_cast<std::size_t>(j)]);
                if (g < best) {
                    best = g;
                    low = 0.5 * (params.q[static_cast<std::size_t>(i)] + params.q[static_cast<std::size_t>(j)]);
                    high = low + params.p[static_cast<std::size_t>(i)] + params.p[static_cast<std::size_t>(j)];
                }
            }
        }
        char msg[256];
        std::snprintf(msg, sizeof msg,
                      "exceptional parameters: death intensities coincide within %.3g; the hypergeometric formula "
                      "does not apply (use the numeric eigenbasis); reference eigenvalues for the coincident pair: "
                      "%.17g, %.17g",
                      delta_q, low, high);
        throw ExceptionalParameters(msg, low, high);
    }

    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return params.q[a] < params.q[b]; });
    const double psum = std::accumulate(params.p.begin(), params.p.end(), 0.0);

    SpectralData s;
    s.eta = probabilities(params);
    s.lambda.resize(static_cast<std::size_t>(n));
    s.gap.resize(n, n);
    std::vector<double> d(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double pole = params.q[order[static_cast<std::size_t>(k)]];
        for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = pole - params.q[static_cast<std::size_t>(i)];
        const double width = (k + 1 < n) ? params.q[order[static_cast<std::size_t>(k + 1)]] - pole : psum;
        const double t = detail::secular_root(params.p, d, width, pole);
        s.lambda[static_cast<std::size_t>(k)] = pole + t;
        for (int i = 0; i < n; ++i) s.gap(i, k) = d[static_cast<std::size_t>(i)] + t;
    }
    detail::complete_spectral_data(s);
    return s;
}

inline SpectralData solve_spectrum(const ModelParams& params) {
    return solve_spectrum(params, default_q_separation(params));
}

/// |sum_i p_i / (lambda_j - q_i) - 1| for each root.
inline std::vector<double> secular_residuals(const ModelParams& params, const SpectralData& s) {
    std::vector<double> r(s.lambda.size());
    for (int j = 0; j < s.n(); ++j) {
        double acc = 0.0;
        for (int i = 0; i < params.n; ++i) acc += params.p[static_cast<std::size_t>(i)] / s.gap(i, j);
        r[static_cast<std::size_t>(j)] = std::abs(acc - 1.0);
    }
    return r;
}

/// det(lambda I - F) / prod_i (lambda - q_i), evaluated by LU on F directly.
inline double characteristic_residual(const ModelParams& params, double lambda) {
    const int n = params.n;
    Eigen::MatrixXd M(n, n);
    double scale = 1.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            M(i, j) = -params.p[static_cast<std::size_t>(j)] - (i == j ? params.q[static_cast<std::size_t>(i)] : 0.0);
        }
        M(i, i) += lambda;
        scale *= std::max(std::abs(lambda - params.q[static_cast<std::size_t>(i)]), std::abs(lambda));
    }
    return std::abs(M.determinant()) / scale;
}

/// True iff q_(1) < lambda_1 < q_(2) < ... < q_(n) < lambda_n <= q_(n) + sum p.
inline bool interlaces(const ModelParams& params, const std::vector<double>& lambda) {
    std::vector<double> q = params.q;
    std::sort(q.begin(), q.end());
    const double psum = std::accumulate(params.p.begin(), params.p.end(), 0.0);
    for (std::size_t k = 0; k < q.size(); ++k) {
        if (!(q[k] < lambda[k])) return false;
        if (k + 1 < q.size() && !(lambda[k] < q[k + 1])) return false;
    }
    return lambda.back() <= q.back() + psum;
}

/// Closed-form n = 2 case with q_1 = q, q_2 = q + 2 (p_1 - p_2), whose roots
/// lambda_1 = q + p_1 - p_2 and lambda_2 = q + 2 p_1 are rational in the inputs.
inline SpectralData rational_case_n2(double p1, double p2, double q) {
    if (!(p1 > 0.0) || !(p2 > 0.0) || !(q > 0.0)) throw ValidationError("p1, p2 and q must be positive");
    if (p1 == p2) throw ValidationError("p1 == p2 collapses to coincident death intensities");
    const double q2 = q + 2.0 * (p1 - p2);
    if (!(q2 > 0.0)) throw ValidationError("q + 2 (p1 - p2) must be positive");
    const auto params = ModelParams::make(1, {p1, p2}, {q, q2});

    SpectralData s;
    s.eta = probabilities(params);
    s.lambda = {q + p1 - p2, q + 2.0 * p1};
    s.gap.resize(2, 2);
    s.gap << p1 - p2, 2.0 * p1,
             p2 - p1, 2.0 * p2;
    detail::complete_spectral_data(s);
    // The printed closed forms, which coincide with lambda_j / gap(i, j) above.
    s.u << (q + p1 - p2) / (p1 - p2), (q + 2.0 * p1) / (2.0 * p1),
           (q + p1 - p2) / (p2 - p1), (q + 2.0 * p1) / (2.0 * p2);
    return s;
}

/// The spectrum identities that make the hypergeometric polynomials orthogonal.
/// Sums whose summands are large are compared relative to the summed magnitudes.
inline Report verify_spectral_identities(const ModelParams& params, const SpectralData& s, double tol = 1e-10,
                                         double secular_tol = 1e-12) {
    Report rep("spectrum");
    const int n = s.n();
    const auto sec = secular_residuals(params, s);
    rep.add("secular", *std::max_element(sec.begin(), sec.end()), secular_tol);
    rep.add("interlacing", interlaces(params, s.lambda) ? 0.0 : 1.0, 0.0);
    double char_res = 0.0;
    for (double l : s.lambda) char_res = std::max(char_res, characteristic_residual(params, l));
    rep.add("characteristic_det", char_res, 1e-8);

    const auto& eta = s.eta.eta;
    double mz1 = 0.0, mz2 = 0.0, dz1 = 0.0, dz2 = 0.0;
    for (int j = 0; j < n; ++j) {
        double acc = 0.0, mag = 0.0, dacc = 0.0, dmag = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += eta[static_cast<std::size_t>(i)] * s.u(i, j);
            mag += std::abs(eta[static_cast<std::size_t>(i)] * s.u(i, j));
            dacc += s.eta_dual[static_cast<std::size_t>(i + 1)] * s.u(j, i);
            dmag += std::abs(s.eta_dual[static_cast<std::size_t>(i + 1)] * s.u(j, i));
        }
        mz1 = std::max(mz1, std::abs(acc - 1.0) / std::max(1.0, mag));
        dz1 = std::max(dz1, std::abs(dacc - 1.0) / std::max(1.0, dmag));
        for (int k = j + 1; k < n; ++k) {
            double acc2 = 0.0, mag2 = 0.0, dacc2 = 0.0, dmag2 = 0.0;
            for (int i = 0; i < n; ++i) {
                const double t = eta[static_cast<std::size_t>(i)] * s.u(i, j) * s.u(i, k);
                acc2 += t;
                mag2 += std::abs(t);
                const double dt = s.eta_dual[static_cast<std::size_t>(i + 1)] * s.u(j, i) * s.u(k, i);
                dacc2 += dt;
                dmag2 += std::abs(dt);
            }
            mz2 = std::max(mz2, std::abs(acc2 - 1.0) / std::max(1.0, mag2));
            dz2 = std::max(dz2, std::abs(dacc2 - 1.0) / std::max(1.0, dmag2));
        }
    }
    rep.add("mizukawa_orthogonal_to_one", mz1, tol);
    rep.add("mizukawa_mutually_orthogonal", mz2, tol);
    rep.add("dual_orthogonal_to_one", dz1, tol);
    rep.add("dual_mutually_orthogonal", dz2, tol);

    // A^T D1 A = D2 with D1 = diag(eta_0..eta_n), D2 = diag(1, 1/eta_bar_1, ...).
    const auto all = s.eta.all();
    const Eigen::VectorXd d1 = Eigen::Map<const Eigen::VectorXd>(all.data(), n + 1);
    Eigen::VectorXd d2(n + 1);
    d2(0) = 1.0;
    for (int j = 0; j < n; ++j) d2(j + 1) = 1.0 / s.eta_bar[static_cast<std::size_t>(j)];
    const Eigen::MatrixXd lhs = s.a.transpose() * d1.asDiagonal() * s.a;
    const Eigen::MatrixXd mag = s.a.cwiseAbs().transpose() * d1.asDiagonal() * s.a.cwiseAbs();
    const Eigen::MatrixXd diff = lhs - Eigen::MatrixXd(d2.asDiagonal());
    double worst = 0.0;
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) worst = std::max(worst, std::abs(diff(i, j)) / std::max(1.0, mag(i, j)));
    }
    rep.add("diagonalisation", worst, tol);

    double dual_sum = 0.0;
    for (double v : s.eta_dual) dual_sum += v;
    rep.add("dual_probabilities_sum", std::abs(dual_sum - 1.0), tol);
    return rep;
}

/// Orthonormal eigenbasis of the symmetric operator H, by dense diagonalisation.
struct EigenBasis {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // columns
    double min_gap = 0.0;     // smallest gap between consecutive eigenvalues
    bool non_unique = false;  // some gap < 1e-8 |H|
};

inline EigenBasis numeric_eigenbasis(const RateField& rates, const StateSpace& X, std::size_t cap = dense_cap) {
    if (X.size() > cap) {
        throw CapExceeded("dense eigendecomposition of size " + std::to_string(X.size()) + " exceeds cap " +
                          std::to_string(cap));
    }
    const auto H = build_H(rates, X);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.dense());
    if (es.info() != Eigen::Success) throw NoConvergence("dense symmetric eigensolver failed");
    EigenBasis b;
    b.values = es.eigenvalues();
    b.vectors = es.eigenvectors();
    const double norm = std::max(b.values.cwiseAbs().maxCoeff(), 1.0);
    b.min_gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 1; k < b.values.size(); ++k) b.min_gap = std::min(b.min_gap, b.values(k) - b.values(k - 1));
    b.non_unique = b.min_gap < 1e-8 * norm;
    return b;
}

inline EigenBasis numeric_eigenbasis(const ModelParams& params, const StateSpace& X, std::size_t cap = dense_cap) {
    return numeric_eigenbasis(rates(params), X, cap);
}

}  // namespace mvk
