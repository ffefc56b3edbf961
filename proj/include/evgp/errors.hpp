#pragma once

#include <stdexcept>
#include <string>

namespace evgp {

// Coarse classification used by the CLI to pick an exit code.
enum class ErrorKind { Validation, Numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& what) : Error(ErrorKind::Validation, "dimension mismatch: " + what) {}
};

struct NotSymmetric : Error {
    explicit NotSymmetric(const std::string& what) : Error(ErrorKind::Numeric, "matrix not symmetric: " + what) {}
};

struct NotPsdWithinJitter : Error {
    explicit NotPsdWithinJitter(const std::string& what)
        : Error(ErrorKind::Numeric, "matrix not positive definite within jitter ladder: " + what) {}
};

struct NonPositiveVariance : Error {
    explicit NonPositiveVariance(const std::string& what) : Error(ErrorKind::Validation, "non-positive variance: " + what) {}
};

struct NonPositiveDt : Error {
    explicit NonPositiveDt(const std::string& what) : Error(ErrorKind::Validation, "non-positive dt: " + what) {}
};

struct NotARotation : Error {
    explicit NotARotation(const std::string& what) : Error(ErrorKind::Validation, "not a rotation matrix: " + what) {}
};

struct NonFiniteState : Error {
    explicit NonFiniteState(const std::string& what) : Error(ErrorKind::Numeric, "non-finite state: " + what) {}
};

struct NonFiniteLoss : Error {
    NonFiniteLoss(long step, const std::string& what)
        : Error(ErrorKind::Numeric, "non-finite loss at step " + std::to_string(step) + ": " + what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

}  // namespace evgp
