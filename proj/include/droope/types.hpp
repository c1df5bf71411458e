#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace droope {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr double kNominalHz = 60.0;
inline constexpr double kNominalRadPerSec = 2.0 * std::numbers::pi * kNominalHz;

inline constexpr double rad_per_sec_to_hz(double w) { return w / (2.0 * std::numbers::pi); }
inline constexpr double hz_to_rad_per_sec(double f) { return f * 2.0 * std::numbers::pi; }

// Error hierarchy. The CLI maps InputError to exit code 2 and NumericError to 3.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InputError : public Error {
  public:
    using Error::Error;
};

class NumericError : public Error {
  public:
    using Error::Error;
};

class TopologyError : public InputError {
  public:
    using InputError::InputError;
};

class ArgumentError : public InputError {
  public:
    using InputError::InputError;
};

class ScenarioError : public InputError {
  public:
    using InputError::InputError;
};

class ConvergenceError : public NumericError {
  public:
    ConvergenceError(const std::string& what, double last_mismatch)
        : NumericError(what), last_mismatch_(last_mismatch) {}
    double last_mismatch() const noexcept { return last_mismatch_; }

  private:
    double last_mismatch_;
};

class InitializationError : public NumericError {
  public:
    using NumericError::NumericError;
};

class AlgebraicError : public NumericError {
  public:
    AlgebraicError(const std::string& what, double t) : NumericError(what), t_(t) {}
    double time() const noexcept { return t_; }

  private:
    double t_;
};

}  // namespace droope
