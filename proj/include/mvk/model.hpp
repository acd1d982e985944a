#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mvk/errors.hpp"
#include "mvk/lattice.hpp"
#include "mvk/rates.hpp"

namespace mvk {

/// Parameters of the Krawtchouk birth-death process:
/// B_i(x) = (N - |x|) p_i and D_i(x) = q_i x_i.
struct ModelParams {
    int n = 0;
    int N = 0;
    std::vector<double> p;  // birth intensities
    std::vector<double> q;  // death intensities

    static ModelParams make(int N, std::vector<double> p, std::vector<double> q) {
        ModelParams m{static_cast<int>(p.size()), N, std::move(p), std::move(q)};
        m.validate();
        return m;
    }

    void validate() const {
        if (n < 1) throw ValidationError("n must be >= 1");
        if (N < 1) throw ValidationError("N must be >= 1");
        if (p.size() != static_cast<std::size_t>(n) || q.size() != static_cast<std::size_t>(n)) {
            throw ValidationError("p and q must both have n = " + std::to_string(n) + " entries");
        }
        for (int i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (!(p[k] > 0.0) || !std::isfinite(p[k])) throw ValidationError("p_" + std::to_string(i + 1) + " must be positive");
            if (!(q[k] > 0.0) || !std::isfinite(q[k])) throw ValidationError("q_" + std::to_string(i + 1) + " must be positive");
        }
    }

    /// Scale both p and q by c > 0.
    ModelParams scaled(double c) const {
        ModelParams m = *this;
        for (auto& v : m.p) v *= c;
        for (auto& v : m.q) v *= c;
        return m;
    }
};

/// Default band for treating two death intensities as coincident.
inline double default_q_separation(const ModelParams& params) {
    return 1e-9 * *std::max_element(params.q.begin(), params.q.end());
}

/// Smallest pairwise |q_i - q_j| (infinity when n = 1).
inline double min_q_gap(const ModelParams& params) {
    double gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < params.n; ++i) {
        for (int j = i + 1; j < params.n; ++j) {
            gap = std::min(gap, std::abs(params.q[static_cast<std::size_t>(i)] - params.q[static_cast<std::size_t>(j)]));
        }
    }
    return gap;
}

inline bool is_exceptional(const ModelParams& params, double delta_q) { return min_q_gap(params) <= delta_q; }
inline bool is_exceptional(const ModelParams& params) { return is_exceptional(params, default_q_separation(params)); }

inline RateField rates(const ModelParams& params) {
    params.validate();
    RateField r;
    r.n = params.n;
    r.birth = [N = params.N, p = params.p](int j, Coords x) {
        return static_cast<double>(N - total(x)) * p[static_cast<std::size_t>(j)];
    };
    r.death = [q = params.q](int j, Coords x) {
        return q[static_cast<std::size_t>(j)] * static_cast<double>(x[static_cast<std::size_t>(j)]);
    };
    return r;
}

/// Multinomial probabilities eta_0, eta_1..eta_n.
struct Probabilities {
    double eta0 = 1.0;
    std::vector<double> eta;

    /// eta_0 followed by eta_1..eta_n.
    std::vector<double> all() const {
        std::vector<double> v{eta0};
        v.insert(v.end(), eta.begin(), eta.end());
        return v;
    }
};

/// eta_i = (p_i / q_i) / (1 + sum_j p_j / q_j), eta_0 = 1 / (1 + sum_j p_j / q_j).
inline Probabilities probabilities(const ModelParams& params) {
    params.validate();
    double denom = 1.0;
    std::vector<double> ratio(static_cast<std::size_t>(params.n));
    for (std::size_t i = 0; i < ratio.size(); ++i) {
        ratio[i] = params.p[i] / params.q[i];
        denom += ratio[i];
    }
    Probabilities pr;
    pr.eta0 = 1.0 / denom;
    pr.eta.resize(ratio.size());
    for (std::size_t i = 0; i < ratio.size(); ++i) pr.eta[i] = ratio[i] / denom;
    return pr;
}

/// log of N! / (x_1! ... x_n! x_0!) with x_0 = N - |x|.
inline double log_multinomial(int N, Coords x) {
    double r = std::lgamma(static_cast<double>(N) + 1.0);
    int s = 0;
    for (int v : x) {
        r -= std::lgamma(static_cast<double>(v) + 1.0);
        s += v;
    }
    return r - std::lgamma(static_cast<double>(N - s) + 1.0);
}

/// N! / (x_1! ... x_n! x_0!). Exact integer arithmetic for N <= 20.
inline double multinomial(int N, Coords x) {
    if (N <= 20) {
        std::uint64_t f[21];
        f[0] = 1;
        for (int k = 1; k <= 20; ++k) f[k] = f[k - 1] * static_cast<std::uint64_t>(k);
        std::uint64_t r = f[N];
        int s = 0;
        for (int v : x) {
            r /= f[v];
            s += v;
        }
        return static_cast<double>(r / f[N - s]);
    }
    return std::exp(log_multinomial(N, x));
}

/// Multinomial weight with explicit probabilities (eta0, eta_1..eta_n).
inline double multinomial_weight(int N, double eta0, const std::vector<double>& eta, Coords x) {
    const int x0 = N - total(x);
    if (N <= 20) {
        double w = multinomial(N, x) * std::pow(eta0, x0);
        for (std::size_t i = 0; i < x.size(); ++i) w *= std::pow(eta[i], x[i]);
        return w;
    }
    double lw = log_multinomial(N, x) + x0 * std::log(eta0);
    for (std::size_t i = 0; i < x.size(); ++i) lw += x[i] * std::log(eta[i]);
    return std::exp(lw);
}

/// Stationary multinomial weight W(eta; x).
inline double multinomial_weight(const ModelParams& params, Coords x) {
    const auto pr = probabilities(params);
    return multinomial_weight(params.N, pr.eta0, pr.eta, x);
}

/// W(eta; x) for every x in X, in rank order.
inline std::vector<double> stationary_weight(const ModelParams& params, const StateSpace& X) {
    const auto pr = probabilities(params);
    std::vector<double> w(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) w[i] = multinomial_weight(params.N, pr.eta0, pr.eta, X.point(i));
    return w;
}

}  // namespace mvk
