#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace critshe {

// Base of everything the library throws on purpose. The CLI maps the
// subclasses onto exit codes, so keep the hierarchy shallow.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller handed us something outside an operation's domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// Configuration is internally inconsistent (CFL, resolution, bad plan...).
class ParameterError : public Error {
public:
    using Error::Error;
};

// A numerical routine ran but could not reach the requested tolerance.
class AccuracyError : public Error {
public:
    AccuracyError(const std::string& what, double estimate, double error_bound)
        : Error(what + " (estimate " + fmt(estimate) + ", error bound " + fmt(error_bound) + ")"),
          estimate_(estimate), error_bound_(error_bound) {}

    double estimate() const noexcept { return estimate_; }
    double error_bound() const noexcept { return error_bound_; }

private:
    static std::string fmt(double v) {
        std::ostringstream os;
        os.precision(6);
        os << v;
        return os.str();
    }
    double estimate_;
    double error_bound_;
};

// NaN, overflow, singular covariance and similar hard numerical failures.
class NumericalError : public Error {
public:
    using Error::Error;
};

class BlowupError : public NumericalError {
public:
    BlowupError(const std::string& what, long step)
        : NumericalError(what + " at step " + std::to_string(step)), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

inline void require(bool ok, const char* msg) {
    if (!ok) throw DomainError(msg);
}

inline void require_param(bool ok, const std::string& msg) {
    if (!ok) throw ParameterError(msg);
}

} // namespace critshe
