#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mvk/lattice.hpp"
#include "mvk/rates.hpp"
#include "mvk/report.hpp"

namespace mvk {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

/// Matrices are sized beyond this only in sparse form.
inline constexpr std::size_t dense_cap = 5000;

enum class OperatorKind { generator, symmetric, difference, factor, factor_transpose };

inline std::string to_string(OperatorKind k) {
    switch (k) {
        case OperatorKind::generator: return "L_BD";
        case OperatorKind::symmetric: return "H";
        case OperatorKind::difference: return "Htilde";
        case OperatorKind::factor: return "A_j";
        case OperatorKind::factor_transpose: return "A_j_transpose";
    }
    return "?";
}

/// A nearest-neighbour operator on X, indexed by StateSpace ranks.
/// Vectors act as columns: (M f)(x) = sum_y M(x, y) f(y).
struct GeneratorMatrix {
    OperatorKind kind;
    std::optional<int> direction;
    SparseMatrix entries;

    Eigen::VectorXd apply(const Eigen::VectorXd& f) const { return entries * f; }
    Eigen::MatrixXd dense() const { return Eigen::MatrixXd(entries); }
};

namespace detail {

inline SparseMatrix from_triplets(std::size_t size, const Triplets& t) {
    const auto s = static_cast<Eigen::Index>(size);
    SparseMatrix m(s, s);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

inline Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace detail

/// Birth-death generator: (L P)(x) = -sum_j (B_j + D_j)(x) P(x)
///   + sum_j B_j(x - e_j) P(x - e_j) + sum_j D_j(x + e_j) P(x + e_j).
/// Every column sums to zero.
inline GeneratorMatrix build_L_BD(const RateField& rates, const StateSpace& X) {
    validate_rates(rates, X);
    Triplets t;
    t.reserve(X.size() * static_cast<std::size_t>(2 * X.n() + 1));
    for (std::size_t y = 0; y < X.size(); ++y) {
        const Coords py = X.point(y);
        double out = 0.0;
        for (int j = 0; j < X.n(); ++j) {
            const double b = rates.B(j, py);
            const double d = rates.D(j, py);
            out += b + d;
            if (b != 0.0) t.emplace_back(detail::idx(*X.shift(y, j, +1)), detail::idx(y), b);
            if (d != 0.0) t.emplace_back(detail::idx(*X.shift(y, j, -1)), detail::idx(y), d);
        }
        t.emplace_back(detail::idx(y), detail::idx(y), -out);
    }
    return {OperatorKind::generator, std::nullopt, detail::from_triplets(X.size(), t)};
}

/// Symmetrised operator H = -W^{-1/2} L W^{1/2}, assembled directly from the
/// rates: diagonal sum_j (B_j + D_j)(x), off-diagonal -sqrt(B_j(x) D_j(x + e_j)).
/// Each off-diagonal value is computed once and stored in both triangles.
inline GeneratorMatrix build_H(const RateField& rates, const StateSpace& X) {
    validate_rates(rates, X);
    Triplets t;
    t.reserve(X.size() * static_cast<std::size_t>(2 * X.n() + 1));
    for (std::size_t x = 0; x < X.size(); ++x) {
        const Coords px = X.point(x);
        double diag = 0.0;
        for (int j = 0; j < X.n(); ++j) {
            const double b = rates.B(j, px);
            diag += b + rates.D(j, px);
            if (b == 0.0) continue;
            const std::size_t y = *X.shift(x, j, +1);
            const double v = -std::sqrt(b * rates.D(j, X.point(y)));
            t.emplace_back(detail::idx(x), detail::idx(y), v);
            t.emplace_back(detail::idx(y), detail::idx(x), v);
        }
        t.emplace_back(detail::idx(x), detail::idx(x), diag);
    }
    return {OperatorKind::symmetric, std::nullopt, detail::from_triplets(X.size(), t)};
}

/// The W argument only participates in the similarity check of verify_structure;
/// the entries themselves need the rates alone.
inline GeneratorMatrix build_H(const RateField& rates, const StateSpace& X, const std::vector<double>& /*W*/) {
    return build_H(rates, X);
}

/// Difference operator sum_j [B_j(x)(1 - e^{d_j}) + D_j(x)(1 - e^{-d_j})].
inline GeneratorMatrix build_Htilde(const RateField& rates, const StateSpace& X) {
    validate_rates(rates, X);
    Triplets t;
    t.reserve(X.size() * static_cast<std::size_t>(2 * X.n() + 1));
    for (std::size_t x = 0; x < X.size(); ++x) {
        const Coords px = X.point(x);
        double diag = 0.0;
        for (int j = 0; j < X.n(); ++j) {
            const double b = rates.B(j, px);
            const double d = rates.D(j, px);
            diag += b + d;
            if (b != 0.0) t.emplace_back(detail::idx(x), detail::idx(*X.shift(x, j, +1)), -b);
            if (d != 0.0) t.emplace_back(detail::idx(x), detail::idx(*X.shift(x, j, -1)), -d);
        }
        t.emplace_back(detail::idx(x), detail::idx(x), diag);
    }
    return {OperatorKind::difference, std::nullopt, detail::from_triplets(X.size(), t)};
}

/// Factor A_j = sqrt(B_j(x)) - e^{d_j} sqrt(D_j(x)), i.e.
/// (A_j f)(x) = sqrt(B_j(x)) f(x) - sqrt(D_j(x + e_j)) f(x + e_j).
inline GeneratorMatrix build_A(const RateField& rates, const StateSpace& X, int j) {
    if (j < 0 || j >= X.n()) throw ValidationError("direction " + std::to_string(j) + " out of range");
    validate_rates(rates, X);
    Triplets t;
    t.reserve(2 * X.size());
    for (std::size_t x = 0; x < X.size(); ++x) {
        const Coords px = X.point(x);
        const double b = rates.B(j, px);
        if (b != 0.0) t.emplace_back(detail::idx(x), detail::idx(x), std::sqrt(b));
        if (auto y = X.shift(x, j, +1)) {
            const double d = rates.D(j, X.point(*y));
            if (d != 0.0) t.emplace_back(detail::idx(x), detail::idx(*y), -std::sqrt(d));
        }
    }
    return {OperatorKind::factor, j, detail::from_triplets(X.size(), t)};
}

inline GeneratorMatrix build_A_transpose(const RateField& rates, const StateSpace& X, int j) {
    auto a = build_A(rates, X, j);
    return {OperatorKind::factor_transpose, j, SparseMatrix(a.entries.transpose())};
}

/// Largest total exit rate max_x sum_j (B_j + D_j)(x); used to scale residuals.
inline double max_total_rate(const RateField& rates, const StateSpace& X) {
    double m = 0.0;
    for (std::size_t x = 0; x < X.size(); ++x) {
        double s = 0.0;
        for (int j = 0; j < X.n(); ++j) s += rates.B(j, X.point(x)) + rates.D(j, X.point(x));
        m = std::max(m, s);
    }
    return m;
}

inline double max_abs(const SparseMatrix& m) {
    double r = 0.0;
    for (int k = 0; k < m.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) r = std::max(r, std::abs(it.value()));
    }
    return r;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Structural identities of the operator triple. Residuals are scaled by the
/// largest total exit rate so the tolerance is dimensionless.
///   factorisation    H = sum_j A_j^T A_j
///   symmetry         H = H^T
///   psd              min eig(H) >= -tol |H|   (dense, |X| <= dense_cap)
///   zero_mode_A      A_j sqrt(W) = 0
///   zero_mode_H      H sqrt(W) = 0
///   stationarity     L_BD W = 0
///   constant_mode    Htilde 1 = 0
///   column_sums      1^T L_BD = 0
///   similarity_H     H = -W^{-1/2} L_BD W^{1/2}
///   similarity_Ht    Htilde = W^{-1/2} H W^{1/2}
inline Report verify_structure(const RateField& rates, const StateSpace& X, const std::vector<double>& W,
                               double tol = 1e-10) {
    Report rep("structure");
    const auto L = build_L_BD(rates, X);
    const auto H = build_H(rates, X);
    const auto Ht = build_Htilde(rates, X);
    const double scale = std::max(1.0, max_total_rate(rates, X));

    const Eigen::VectorXd w = to_vector(W);
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::VectorXd isw = sw.cwiseInverse();

    SparseMatrix sum_ata(H.entries.rows(), H.entries.cols());
    double worst_a = 0.0;
    for (int j = 0; j < X.n(); ++j) {
        const auto A = build_A(rates, X, j);
        sum_ata += SparseMatrix(A.entries.transpose()) * A.entries;
        worst_a = std::max(worst_a, (A.apply(sw)).cwiseAbs().maxCoeff());
    }
    rep.add("factorisation", max_abs(SparseMatrix(H.entries - sum_ata)) / scale, tol);
    rep.add("symmetry", max_abs(SparseMatrix(H.entries - SparseMatrix(H.entries.transpose()))) / scale, tol);
    rep.add("zero_mode_A", worst_a / std::sqrt(scale), tol);
    rep.add("zero_mode_H", H.apply(sw).cwiseAbs().maxCoeff() / scale, tol);
    rep.add("stationarity", L.apply(w).cwiseAbs().maxCoeff() / scale, tol);
    rep.add("constant_mode", Ht.apply(Eigen::VectorXd::Ones(w.size())).cwiseAbs().maxCoeff() / scale, tol);
    const Eigen::RowVectorXd col = Eigen::RowVectorXd::Ones(w.size()) * L.entries;
    rep.add("column_sums", col.cwiseAbs().maxCoeff() / scale, tol);

    const SparseMatrix simH = -(isw.asDiagonal() * L.entries * sw.asDiagonal());
    rep.add("similarity_H", max_abs(SparseMatrix(simH - H.entries)) / scale, tol);
    const SparseMatrix simHt = isw.asDiagonal() * H.entries * sw.asDiagonal();
    rep.add("similarity_Htilde", max_abs(SparseMatrix(simHt - Ht.entries)) / scale, tol);

    if (X.size() <= dense_cap) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.dense(), Eigen::EigenvaluesOnly);
        const double norm = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
        const double min_eig = es.eigenvalues().minCoeff();
        rep.add("psd", std::max(0.0, -min_eig) / norm, tol, "min eigenvalue " + std::to_string(min_eig));
    }
    return rep;
}

}  // namespace mvk
