#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mvk/errors.hpp"
#include "mvk/lattice.hpp"

namespace mvk {

/// Per-direction birth and death rates on a lattice. Directions are 0-based.
struct RateField {
    int n = 0;
    std::function<double(int, Coords)> birth;
    std::function<double(int, Coords)> death;

    double B(int j, Coords x) const { return birth(j, x); }
    double D(int j, Coords x) const { return death(j, x); }
};

/// Rates must be finite, nonnegative, and vanish where the move would leave X.
inline void validate_rates(const RateField& rates, const StateSpace& X) {
    if (rates.n != X.n()) {
        throw ValidationError("rate field has n = " + std::to_string(rates.n) + " but lattice has n = " +
                              std::to_string(X.n()));
    }
    for (std::size_t i = 0; i < X.size(); ++i) {
        const Coords x = X.point(i);
        for (int j = 0; j < X.n(); ++j) {
            const double b = rates.B(j, x);
            const double d = rates.D(j, x);
            if (std::isnan(b) || std::isnan(d)) throw ValidationError("NaN rate at " + to_string(x));
            if (!std::isfinite(b) || !std::isfinite(d)) throw ValidationError("infinite rate at " + to_string(x));
            if (b < 0.0 || d < 0.0) {
                throw ValidationError("negative rate in direction " + std::to_string(j + 1) + " at " + to_string(x));
            }
            if (b != 0.0 && !X.shift(i, j, +1)) {
                throw ValidationError("birth rate B_" + std::to_string(j + 1) + " nonzero on the boundary at " +
                                      to_string(x));
            }
            if (d != 0.0 && !X.shift(i, j, -1)) {
                throw ValidationError("death rate D_" + std::to_string(j + 1) + " nonzero on the boundary at " +
                                      to_string(x));
            }
        }
    }
}

struct CompatibilityReport {
    bool passed = true;
    double worst_residual = 0.0;
    std::optional<LatticePoint> witness;
    int direction_j = -1;
    int direction_k = -1;
    std::size_t pairs_checked = 0;
};

/// Checks that the two-step ratio products around every elementary square
/// x -> x+e_j -> x+e_j+e_k and x -> x+e_k -> x+e_k+e_j agree. Squares with a
/// zero denominator are skipped; a NaN rate throws.
inline CompatibilityReport check_compatibility(const RateField& rates, const StateSpace& X, double tol = 1e-10) {
    CompatibilityReport rep;
    const int n = X.n();
    auto rate = [&](bool birth, int j, Coords y) {
        const double v = birth ? rates.B(j, y) : rates.D(j, y);
        if (std::isnan(v)) throw ValidationError("NaN rate at " + to_string(y));
        return v;
    };
    std::vector<int> xj, xk, xjk;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const Coords x = X.point(i);
        if (total(x) + 2 > X.N()) continue;
        for (int j = 0; j < n; ++j) {
            for (int k = j + 1; k < n; ++k) {
                xj.assign(x.begin(), x.end());
                xj[static_cast<std::size_t>(j)] += 1;
                xk.assign(x.begin(), x.end());
                xk[static_cast<std::size_t>(k)] += 1;
                xjk = xj;
                xjk[static_cast<std::size_t>(k)] += 1;
                const double d1 = rate(false, j, xj);
                const double d2 = rate(false, k, xjk);
                const double d3 = rate(false, k, xk);
                const double d4 = rate(false, j, xjk);
                const double b1 = rate(true, j, x);
                const double b2 = rate(true, k, xj);
                const double b3 = rate(true, k, x);
                const double b4 = rate(true, j, xk);
                if (d1 == 0.0 || d2 == 0.0 || d3 == 0.0 || d4 == 0.0) continue;
                const double lhs = (b1 / d1) * (b2 / d2);
                const double rhs = (b3 / d3) * (b4 / d4);
                const double scale = std::max({std::abs(lhs), std::abs(rhs), std::numeric_limits<double>::min()});
                const double res = (lhs == rhs) ? 0.0 : std::abs(lhs - rhs) / scale;
                ++rep.pairs_checked;
                if (res > rep.worst_residual || (!rep.witness && res > tol)) {
                    rep.worst_residual = std::max(rep.worst_residual, res);
                    if (res > tol) {
                        rep.witness = X.lattice_point(i);
                        rep.direction_j = j;
                        rep.direction_k = k;
                    }
                }
            }
        }
    }
    rep.passed = rep.worst_residual <= tol;
    return rep;
}

namespace detail {

// Log-weights built by walking x -> x - e_j back to the origin, choosing the
// first (or last) usable direction at every step.
inline std::vector<double> log_weight_along_path(const RateField& rates, const StateSpace& X, bool first_direction) {
    std::vector<double> logw(X.size(), 0.0);
    std::vector<int> y;
    for (std::size_t i = 1; i < X.size(); ++i) {
        const Coords x = X.point(i);
        std::optional<double> value;
        const int n = X.n();
        for (int t = 0; t < n; ++t) {
            const int j = first_direction ? t : n - 1 - t;
            if (x[static_cast<std::size_t>(j)] == 0) continue;
            y.assign(x.begin(), x.end());
            y[static_cast<std::size_t>(j)] -= 1;
            const double b = rates.B(j, y);
            const double d = rates.D(j, x);
            if (b == 0.0 && d == 0.0) continue;
            if (!(b > 0.0) || !(d > 0.0)) {
                throw ValidationError("zero or negative ratio B_" + std::to_string(j + 1) + to_string(y) + "/D_" +
                                      std::to_string(j + 1) + to_string(x) + " on the way to " + to_string(x));
            }
            // y precedes x in graded order, so its weight is already known.
            const std::size_t prev = X.rank_or_throw(y);
            value = logw[prev] + std::log(b) - std::log(d);
            break;
        }
        if (!value) throw ValidationError("state " + to_string(x) + " is unreachable from the origin");
        logw[i] = *value;
    }
    return logw;
}

inline std::vector<double> normalise_log_weights(const std::vector<double>& logw) {
    double top = -std::numeric_limits<double>::infinity();
    for (double v : logw) top = std::max(top, v);
    std::vector<double> w(logw.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logw.size(); ++i) {
        w[i] = std::exp(logw[i] - top);
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace detail

/// Stationary distribution from the two-term relation
/// W(x + e_j) / W(x) = B_j(x) / D_j(x + e_j), normalised to sum one.
/// Two independent path orders must agree within path_tol (relative).
inline std::vector<double> stationary_weight_generic(const RateField& rates, const StateSpace& X,
                                                     double path_tol = 1e-12) {
    validate_rates(rates, X);
    const auto first = detail::log_weight_along_path(rates, X, true);
    const auto last = detail::log_weight_along_path(rates, X, false);
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double scale = std::max(1.0, std::abs(first[i]));
        if (std::abs(first[i] - last[i]) > path_tol * scale) {
            throw ValidationError("stationary weight is path dependent at " + to_string(X.point(i)) +
                                  " (rates fail the compatibility condition)");
        }
    }
    return detail::normalise_log_weights(first);
}

}  // namespace mvk
