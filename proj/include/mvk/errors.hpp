#pragma once

#include <stdexcept>
#include <string>

namespace mvk {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-domain input (bad parameters, bad rates, bad files).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A lattice or dense problem would exceed the configured size cap.
class CapExceeded : public Error {
public:
    using Error::Error;
};

/// Two death intensities coincide so the hypergeometric formula does not apply.
class ExceptionalParameters : public Error {
public:
    ExceptionalParameters(const std::string& what, double reference_low, double reference_high)
        : Error(what), reference_low_(reference_low), reference_high_(reference_high) {}

    /// For n = 2 these are the limiting eigenvalues q and p1 + p2 + q.
    double reference_low() const noexcept { return reference_low_; }
    double reference_high() const noexcept { return reference_high_; }

private:
    double reference_low_;
    double reference_high_;
};

/// A root bracket failed to shrink to the requested width.
class NoConvergence : public Error {
public:
    using Error::Error;
};

/// Rahman parameters with p1 p4 == p2 p3.
class SingularRahman : public Error {
public:
    using Error::Error;
};

/// The simulated chain reached a state with zero total rate.
class AbsorbingState : public Error {
public:
    using Error::Error;
};

}  // namespace mvk
