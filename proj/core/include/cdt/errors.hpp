#pragma once

#include <stdexcept>
#include <string>

namespace cdt {

// Shapes of inputs disagree (batch columns vs. input_dim, vector lengths, ...).
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An argument lies outside the domain of the operation (p <= 0, y_hat <= 0 for
// cross-entropy, invalid network spec, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Eigen- or singular-value decomposition did not converge.
class DiagnosticError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Riccati iteration stopped without meeting its tolerance.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double last_residual, int iterations)
        : std::runtime_error(what), last_residual_(last_residual), iterations_(iterations) {}

    double last_residual() const noexcept { return last_residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double last_residual_;
    int iterations_;
};

// R + B^T P B is numerically singular.
class ConditioningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A training step produced non-finite values.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dataset ingestion problems: missing file, bad cell, missing column.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration document.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace cdt
