#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "mvk/model.hpp"

namespace mvk::testkit {

/// Log-uniform draw in [lo, hi].
inline double draw(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(std::log(lo), std::log(hi));
    return std::exp(d(rng));
}

/// Random ModelParams with p, q in [lo, hi] and pairwise q gaps >= min_gap.
inline ModelParams random_params(std::mt19937_64& rng, int n, int N, double lo = 0.1, double hi = 10.0,
                                 double min_gap = 0.05) {
    for (;;) {
        std::vector<double> p(static_cast<std::size_t>(n)), q(static_cast<std::size_t>(n));
        for (auto& v : p) v = draw(rng, lo, hi);
        for (auto& v : q) v = draw(rng, lo, hi);
        auto m = ModelParams::make(N, p, q);
        if (min_q_gap(m) >= min_gap) return m;
    }
}

}  // namespace mvk::testkit
