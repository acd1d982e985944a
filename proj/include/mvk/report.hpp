#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace mvk {

/// One named numerical check: passes iff residual <= tolerance (and is not NaN).
struct Check {
    std::string name;
    double residual = 0.0;
    double tolerance = 0.0;
    std::string detail;

    bool passed() const { return std::isfinite(residual) && residual <= tolerance; }
};

class Report {
public:
    Report() = default;
    explicit Report(std::string title) : title_(std::move(title)) {}

    Check& add(std::string name, double residual, double tolerance, std::string detail = {}) {
        checks_.push_back(Check{std::move(name), residual, tolerance, std::move(detail)});
        return checks_.back();
    }

    void merge(const Report& other) {
        const std::string prefix = other.title_.empty() ? std::string{} : other.title_ + ".";
        for (const auto& c : other.checks_) checks_.push_back(Check{prefix + c.name, c.residual, c.tolerance, c.detail});
    }

    bool all_passed() const {
        for (const auto& c : checks_) {
            if (!c.passed()) return false;
        }
        return true;
    }

    double worst_residual() const {
        double w = 0.0;
        for (const auto& c : checks_) w = std::max(w, c.residual);
        return w;
    }

    const Check* find(const std::string& name) const {
        for (const auto& c : checks_) {
            if (c.name == name) return &c;
        }
        return nullptr;
    }

    const std::string& title() const noexcept { return title_; }
    const std::vector<Check>& checks() const noexcept { return checks_; }

private:
    std::string title_;
    std::vector<Check> checks_;
};

}  // namespace mvk
