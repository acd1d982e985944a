#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvk/errors.hpp"

namespace mvk {

using Coords = std::span<const int>;

inline constexpr std::size_t default_state_cap = 2'000'000;

/// Binomial coefficient C(n, k), saturating at uint64 max.
inline std::uint64_t binomial(std::int64_t n, std::int64_t k) {
    if (k < 0 || n < 0 || k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::int64_t i = 1; i <= k; ++i) {
        r = r * static_cast<unsigned __int128>(n - k + i) / static_cast<unsigned __int128>(i);
        if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(r);
}

inline int total(Coords x) { return std::accumulate(x.begin(), x.end(), 0); }

inline std::string to_string(Coords x) {
    std::string s = "(";
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(x[i]);
    }
    return s + ")";
}

/// A population vector x with |x| <= N.
class LatticePoint {
public:
    LatticePoint() = default;
    explicit LatticePoint(std::vector<int> coords) : coords_(std::move(coords)) {}
    LatticePoint(std::initializer_list<int> coords) : coords_(coords) {}

    Coords coords() const noexcept { return coords_; }
    int operator[](std::size_t i) const { return coords_[i]; }
    std::size_t dim() const noexcept { return coords_.size(); }
    int total() const { return mvk::total(coords_); }
    /// Residual population x0 = N - |x|.
    int residual(int N) const { return N - total(); }

    friend bool operator==(const LatticePoint&, const LatticePoint&) = default;

private:
    std::vector<int> coords_;
};

/// The simplex lattice {x in N0^n : |x| <= N}, enumerated in graded
/// lexicographic order: by |x|, then lexicographically in the coordinates.
class StateSpace {
public:
    StateSpace(int n, int N, std::size_t cap = default_state_cap) : n_(n), N_(N) {
        if (n < 1) throw ValidationError("state space needs n >= 1, got " + std::to_string(n));
        if (N < 1) throw ValidationError("state space needs N >= 1, got " + std::to_string(N));
        const std::uint64_t count = binomial(N + n, n);
        if (count > cap) {
            throw CapExceeded("|X| = C(" + std::to_string(N + n) + "," + std::to_string(n) + ") = " +
                              std::to_string(count) + " exceeds cap " + std::to_string(cap));
        }
        size_ = static_cast<std::size_t>(count);
        build_binomials();
        coords_.reserve(size_ * static_cast<std::size_t>(n_));
        std::vector<int> cur(static_cast<std::size_t>(n_), 0);
        for (int d = 0; d <= N_; ++d) emit_block(cur, 0, d);
    }

    int n() const noexcept { return n_; }
    int N() const noexcept { return N_; }
    std::size_t size() const noexcept { return size_; }

    Coords point(std::size_t i) const {
        return Coords(coords_.data() + i * static_cast<std::size_t>(n_), static_cast<std::size_t>(n_));
    }
    LatticePoint lattice_point(std::size_t i) const {
        auto p = point(i);
        return LatticePoint(std::vector<int>(p.begin(), p.end()));
    }

    bool contains(Coords x) const {
        if (x.size() != static_cast<std::size_t>(n_)) return false;
        int s = 0;
        for (int v : x) {
            if (v < 0) return false;
            s += v;
        }
        return s <= N_;
    }

    /// Index of x in the enumeration; nullopt when x is outside the lattice.
    std::optional<std::size_t> rank(Coords x) const {
        if (!contains(x)) return std::nullopt;
        const int d = total(x);
        std::size_t r = d == 0 ? 0 : static_cast<std::size_t>(binom(d - 1 + n_, n_));
        int remaining = d;
        for (int k = 0; k + 1 < n_; ++k) {
            const int parts_left = n_ - k - 1;
            for (int v = 0; v < x[static_cast<std::size_t>(k)]; ++v) {
                r += static_cast<std::size_t>(binom(remaining - v + parts_left - 1, parts_left - 1));
            }
            remaining -= x[static_cast<std::size_t>(k)];
        }
        return r;
    }

    std::size_t rank_or_throw(Coords x) const {
        auto r = rank(x);
        if (!r) throw ValidationError("point " + to_string(x) + " is outside the lattice");
        return *r;
    }

    /// Index of x + delta * e_j, or nullopt if that leaves the lattice.
    std::optional<std::size_t> shift(std::size_t i, int j, int delta) const {
        std::vector<int> y(point(i).begin(), point(i).end());
        y[static_cast<std::size_t>(j)] += delta;
        return rank(y);
    }

private:
    void build_binomials() {
        const int top = N_ + n_ + 1;
        binom_.assign(static_cast<std::size_t>(top + 1) * static_cast<std::size_t>(top + 1), 0);
        for (int a = 0; a <= top; ++a) {
            for (int b = 0; b <= a; ++b) binom_[idx(a, b)] = binomial(a, b);
        }
    }
    std::size_t idx(int a, int b) const {
        return static_cast<std::size_t>(a) * static_cast<std::size_t>(N_ + n_ + 2) + static_cast<std::size_t>(b);
    }
    std::uint64_t binom(int a, int b) const {
        if (b < 0 || a < 0 || b > a) return 0;
        return binom_[idx(a, b)];
    }

    void emit_block(std::vector<int>& cur, int k, int remaining) {
        if (k == n_ - 1) {
            cur[static_cast<std::size_t>(k)] = remaining;
            coords_.insert(coords_.end(), cur.begin(), cur.end());
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            cur[static_cast<std::size_t>(k)] = v;
            emit_block(cur, k + 1, remaining - v);
        }
    }

    int n_;
    int N_;
    std::size_t size_ = 0;
    std::vector<int> coords_;
    std::vector<std::uint64_t> binom_;
};

inline StateSpace enumerate_states(int n, int N, std::size_t cap = default_state_cap) {
    return StateSpace(n, N, cap);
}

}  // namespace mvk
