#pragma once

#include <stdexcept>
#include <string>

namespace dampwave {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments or inconsistent inputs (bad grid sizes, mismatched grids, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A coefficient field that is not uniformly elliptic at some quadrature point.
class EllipticityError : public Error {
public:
    EllipticityError(const std::string& what, double x, double y)
        : Error(what), x_(x), y_(y) {}
    double x() const noexcept { return x_; }
    double y() const noexcept { return y_; }

private:
    double x_;
    double y_;
};

/// An iterative method that ran out of iterations. Carries the best value seen.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double best, double residual)
        : Error(what), best_(best), residual_(residual) {}
    double best() const noexcept { return best_; }
    double residual() const noexcept { return residual_; }

private:
    double best_;
    double residual_;
};

} // namespace dampwave
