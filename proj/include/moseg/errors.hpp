#pragma once

#include <stdexcept>
#include <string>

namespace moseg {

/// Bad user input: malformed files, inconsistent dimensions, invalid options.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: degenerate data, failed eigensolve, infeasible request.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A minimal sample (or least-squares design) is rank deficient beyond the
/// model's scale gauge, e.g. three collinear points for a homography.
class DegenerateSampleError : public NumericalError {
public:
    explicit DegenerateSampleError(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace moseg
