#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hts {

// Base of every error thrown by the toolkit. The category and exit code map
// directly onto the command-line contract (2 config, 3 data, 4 numeric).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;

    virtual int exit_code() const noexcept { return 1; }
    virtual std::string_view category() const noexcept { return "error"; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
    std::string_view category() const noexcept override { return "config"; }
};

class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
    std::string_view category() const noexcept override { return "data"; }
};

// Malformed hierarchy. Carries the id of the node that broke the invariant.
class StructuralError : public DataError {
public:
    StructuralError(std::string node, const std::string &what)
        : DataError("node '" + node + "': " + what), node_(std::move(node)) {}

    const std::string &node() const noexcept { return node_; }
    std::string_view category() const noexcept override { return "structure"; }

private:
    std::string node_;
};

class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
    std::string_view category() const noexcept override { return "numeric"; }
};

class FitError : public NumericError {
public:
    using NumericError::NumericError;
    std::string_view category() const noexcept override { return "fit"; }
};

// Undefined accuracy metric (zero MASE scale, all-zero SMAPE step).
class MetricError : public NumericError {
public:
    using NumericError::NumericError;
    std::string_view category() const noexcept override { return "metric"; }
};

class TrainingError : public NumericError {
public:
    TrainingError(std::size_t epoch, const std::string &what)
        : NumericError("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::string_view category() const noexcept override { return "training"; }

private:
    std::size_t epoch_;
};

} // namespace hts
