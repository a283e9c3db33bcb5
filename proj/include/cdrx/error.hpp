#pragma once

#include <stdexcept>
#include <string>

namespace cdrx {

/// Process exit codes used by the CLI. Each error family below maps to one.
enum class ExitCode : int {
    ok = 0,
    config_error = 2,
    dependency_error = 3,
    data_error = 4,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept = 0;
};

/// Invalid parameters, thresholds or configuration files.
class ConfigError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::config_error; }
};

/// A table required by the current layer is missing from the knowledge base.
class DependencyError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::dependency_error; }
};

/// A layer tried to read its own output or the output of a later layer.
class HierarchyViolation : public DependencyError {
public:
    using DependencyError::DependencyError;
};

/// Malformed or infeasible input data (bad files, empty graphs, ...).
class DataError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::data_error; }
};

} // namespace cdrx
