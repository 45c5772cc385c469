#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace calibra {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// usage / schema class (cli exit 2)
class ShapeError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };

// numeric class (cli exit 3)
class NumericError : public Error { using Error::Error; };

class SingularityError : public NumericError {
public:
    SingularityError(const std::string& msg, long pivot = -1)
        : NumericError(msg), pivot_(pivot) {}
    long pivot() const { return pivot_; }
private:
    long pivot_;
};

class InsufficientDataError : public NumericError { using NumericError::NumericError; };
class SeparationError : public NumericError { using NumericError::NumericError; };

class ConvergenceError : public NumericError {
public:
    ConvergenceError(const std::string& msg, std::vector<double> trace = {})
        : NumericError(msg), trace_(std::move(trace)) {}
    const std::vector<double>& trace() const { return trace_; }
private:
    std::vector<double> trace_;
};

class ScenarioError : public NumericError { using NumericError::NumericError; };

}
