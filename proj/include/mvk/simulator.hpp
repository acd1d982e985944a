#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mvk/errors.hpp"
#include "mvk/lattice.hpp"
#include "mvk/operators.hpp"
#include "mvk/rates.hpp"

namespace mvk {

inline constexpr const char* rng_family = "mt19937_64";

/// splitmix64 finaliser; derives per-replica seeds from (seed, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct SimConfig {
    std::vector<int> initial_state;  // empty means the origin
    std::uint64_t events = 0;        // stop after this many jumps (0: no limit)
    double horizon_time = 0.0;       // stop at this time (0: no limit)
    std::uint64_t seed = 1;
    int replicas = 1;

    void validate() const {
        if (events == 0 && !(horizon_time > 0.0)) throw ValidationError("simulation horizon must be positive");
        if (horizon_time < 0.0 || !std::isfinite(horizon_time)) throw ValidationError("horizon time must be finite and >= 0");
        if (replicas < 1) throw ValidationError("replicas must be >= 1");
    }
};

struct SimResult {
    std::vector<double> occupation;  // time-weighted, sums to 1
    std::vector<double> dwell;       // raw time spent per state
    std::uint64_t event_count = 0;
    std::vector<int> final_state;
    double elapsed_time = 0.0;
    double tv_distance_to_W = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
    std::string rng = rng_family;
};

inline double tv_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("distributions differ in size");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return 0.5 * s;
}

namespace detail {

/// Per-state jump table: targets and cumulative rates.
struct JumpTable {
    std::vector<std::size_t> offset;
    std::vector<std::size_t> target;
    std::vector<double> rate;
    std::vector<double> total;
};

inline JumpTable jump_table(const RateField& rates, const StateSpace& X) {
    validate_rates(rates, X);
    JumpTable t;
    t.offset.reserve(X.size() + 1);
    t.total.resize(X.size());
    for (std::size_t x = 0; x < X.size(); ++x) {
        t.offset.push_back(t.target.size());
        const Coords px = X.point(x);
        double sum = 0.0;
        for (int j = 0; j < X.n(); ++j) {
            const double b = rates.B(j, px);
            if (b > 0.0) {
                t.target.push_back(*X.shift(x, j, +1));
                t.rate.push_back(b);
                sum += b;
            }
            const double d = rates.D(j, px);
            if (d > 0.0) {
                t.target.push_back(*X.shift(x, j, -1));
                t.rate.push_back(d);
                sum += d;
            }
        }
        t.total[x] = sum;
    }
    t.offset.push_back(t.target.size());
    return t;
}

/// Uniform on (0, 1], 53 bits, identical across standard libraries.
inline double uniform_open0(std::mt19937_64& rng) { return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; }

inline void finish(SimResult& r, const std::vector<double>* W) {
    double total = 0.0;
    for (double v : r.dwell) total += v;
    r.occupation.assign(r.dwell.size(), 0.0);
    if (total > 0.0) {
        for (std::size_t i = 0; i < r.dwell.size(); ++i) r.occupation[i] = r.dwell[i] / total;
    }
    if (W) r.tv_distance_to_W = tv_distance(r.occupation, *W);
}

inline SimResult gillespie_single(const JumpTable& t, const StateSpace& X, const SimConfig& cfg, std::uint64_t seed) {
    std::size_t state = 0;
    if (!cfg.initial_state.empty()) {
        if (static_cast<int>(cfg.initial_state.size()) != X.n()) throw ValidationError("initial state has wrong dimension");
        auto r = X.rank(cfg.initial_state);
        if (!r) throw ValidationError("initial state " + to_string(cfg.initial_state) + " is outside the lattice");
        state = *r;
    }
    std::mt19937_64 rng(seed);
    SimResult res;
    res.seed = seed;
    res.dwell.assign(X.size(), 0.0);
    double now = 0.0;
    const double horizon = cfg.horizon_time > 0.0 ? cfg.horizon_time : std::numeric_limits<double>::infinity();
    while (cfg.events == 0 || res.event_count < cfg.events) {
        const double total = t.total[state];
        if (total <= 0.0) throw AbsorbingState("zero total rate at state " + to_string(X.point(state)));
        const double hold = -std::log(uniform_open0(rng)) / total;
        if (now + hold >= horizon) {
            res.dwell[state] += horizon - now;
            now = horizon;
            break;
        }
        res.dwell[state] += hold;
        now += hold;
        double pick = uniform_open0(rng) * total;
        std::size_t k = t.offset[state];
        const std::size_t end = t.offset[state + 1];
        for (; k + 1 < end; ++k) {
            pick -= t.rate[k];
            if (pick <= 0.0) break;
        }
        state = t.target[k];
        ++res.event_count;
    }
    res.elapsed_time = now;
    const Coords f = X.point(state);
    res.final_state.assign(f.begin(), f.end());
    return res;
}

}  // namespace detail

/// Exact CTMC sampling. With W given, the TV distance of the occupation
/// measure to W is filled in.
inline SimResult gillespie_run(const RateField& rates, const StateSpace& X, const SimConfig& cfg,
                               const std::vector<double>* W = nullptr) {
    cfg.validate();
    const auto table = detail::jump_table(rates, X);
    SimResult r = detail::gillespie_single(table, X, cfg, cfg.seed);
    detail::finish(r, W);
    return r;
}

/// Independent replicas with seeds derive_seed(seed, k), one thread each.
/// Dwell times are summed, so the merge does not depend on completion order.
inline SimResult gillespie_replicas(const RateField& rates, const StateSpace& X, const SimConfig& cfg,
                                    const std::vector<double>* W = nullptr) {
    cfg.validate();
    const auto table = detail::jump_table(rates, X);
    std::vector<SimResult> parts(static_cast<std::size_t>(cfg.replicas));
    {
        std::vector<std::jthread> pool;
        for (int k = 0; k < cfg.replicas; ++k) {
            pool.emplace_back([&, k] {
                parts[static_cast<std::size_t>(k)] =
                    detail::gillespie_single(table, X, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(k)));
            });
        }
    }
    SimResult merged;
    merged.seed = cfg.seed;
    merged.dwell.assign(X.size(), 0.0);
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < X.size(); ++i) merged.dwell[i] += p.dwell[i];
        merged.event_count += p.event_count;
        merged.elapsed_time += p.elapsed_time;
    }
    merged.final_state = parts.back().final_state;
    detail::finish(merged, W);
    return merged;
}

struct DistributionTrace {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> distributions;
    double Lambda = 0.0;               // uniformization rate
    std::vector<double> tv;            // to W, when W was supplied
    std::vector<double> relative_entropy;
    bool entropy_monotone = true;
    double worst_mass_drift = 0.0;
    double most_negative = 0.0;
};

/// Relative entropy sum_x P log(P / W).
inline double relative_entropy(const Eigen::VectorXd& P, const std::vector<double>& W) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < P.size(); ++i) {
        if (P(i) > 0.0) s += P(i) * std::log(P(i) / W[static_cast<std::size_t>(i)]);
    }
    return s;
}

/// Evolves dP/dt = L_BD P by uniformization: over a sub-interval h,
/// P(t + h) = sum_k Pois(k; Lambda h) M^k P(t) with M = I + L_BD / Lambda.
/// Sub-intervals keep Lambda h <= 20 so the Poisson weights stay representable.
inline DistributionTrace evolve_distribution(const RateField& rates, const StateSpace& X, const Eigen::VectorXd& initial,
                                             double T, int steps, const std::vector<double>* W = nullptr) {
    if (initial.size() != static_cast<Eigen::Index>(X.size())) throw ValidationError("initial distribution has wrong size");
    if (initial.minCoeff() < 0.0) throw ValidationError("initial distribution has negative entries");
    if (std::abs(initial.sum() - 1.0) > 1e-12) throw ValidationError("initial distribution must sum to 1");
    if (!(T > 0.0) || steps < 1) throw ValidationError("evolution needs T > 0 and steps >= 1");

    const auto L = build_L_BD(rates, X);
    DistributionTrace tr;
    tr.Lambda = std::max(max_total_rate(rates, X), std::numeric_limits<double>::min());
    if (!std::isfinite(tr.Lambda)) throw Error("uniformization rate overflow");
    SparseMatrix M(L.entries / tr.Lambda);
    for (Eigen::Index i = 0; i < M.rows(); ++i) M.coeffRef(i, i) += 1.0;
    M.makeCompressed();

    const double dt = T / steps;
    const int sub = std::max(1, static_cast<int>(std::ceil(tr.Lambda * dt / 20.0)));
    const double h = dt / sub;
    const double mean = tr.Lambda * h;

    auto record = [&](double t, const Eigen::VectorXd& P) {
        tr.times.push_back(t);
        tr.distributions.push_back(P);
        tr.worst_mass_drift = std::max(tr.worst_mass_drift, std::abs(P.sum() - 1.0));
        tr.most_negative = std::min(tr.most_negative, P.minCoeff());
        if (W) {
            tr.tv.push_back(tv_distance(std::vector<double>(P.data(), P.data() + P.size()), *W));
            const double kl = relative_entropy(P, *W);
            if (!tr.relative_entropy.empty() && kl > tr.relative_entropy.back() + 1e-12) tr.entropy_monotone = false;
            tr.relative_entropy.push_back(kl);
        }
    };

    Eigen::VectorXd P = initial;
    record(0.0, P);
    for (int s = 1; s <= steps; ++s) {
        for (int k = 0; k < sub; ++k) {
            double weight = std::exp(-mean);
            double accumulated = weight;
            Eigen::VectorXd term = P;
            Eigen::VectorXd next = weight * term;
            for (int j = 1; 1.0 - accumulated > 1e-17 && j < 100000; ++j) {
                term = M * term;
                weight *= mean / j;
                accumulated += weight;
                next += weight * term;
            }
            P = next;
        }
        record(s * dt, P);
    }
    return tr;
}

/// Least-squares slope of log TV against time over [t_begin, t_end].
inline double relaxation_slope(const DistributionTrace& tr, double t_begin, double t_end) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < tr.times.size() && i < tr.tv.size(); ++i) {
        const double t = tr.times[i];
        if (t < t_begin || t > t_end || !(tr.tv[i] > 0.0)) continue;
        const double y = std::log(tr.tv[i]);
        sx += t;
        sy += y;
        sxx += t * t;
        sxy += t * y;
        ++n;
    }
    if (n < 2) throw ValidationError("relaxation fit window holds fewer than two samples");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// E[x] under a distribution on X.
inline std::vector<double> mean_coordinates(const StateSpace& X, const Eigen::VectorXd& P) {
    std::vector<double> m(static_cast<std::size_t>(X.n()), 0.0);
    for (std::size_t i = 0; i < X.size(); ++i) {
        const Coords x = X.point(i);
        for (int j = 0; j < X.n(); ++j) m[static_cast<std::size_t>(j)] += P(static_cast<Eigen::Index>(i)) * x[static_cast<std::size_t>(j)];
    }
    return m;
}

inline Eigen::VectorXd delta_distribution(const StateSpace& X, Coords x) {
    Eigen::VectorXd P = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(X.size()));
    P(static_cast<Eigen::Index>(X.rank_or_throw(x))) = 1.0;
    return P;
}

}  // namespace mvk
