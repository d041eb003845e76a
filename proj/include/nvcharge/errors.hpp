#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nvcharge {

// Invalid argument or state outside the mathematical domain of an operation
// (negative rate, unsorted grid, degenerate equilibrium, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A linear problem too close to singular to give a meaningful answer
// (e.g. collinear basis spectra).
class ConditioningError : public DomainError {
public:
    using DomainError::DomainError;
};

// An iterative solver stopped without meeting its convergence criteria.
// Carries the last iterate so callers can inspect or restart from it.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> last_iterate, double residual_norm)
        : std::runtime_error(what), last_iterate_(std::move(last_iterate)), residual_norm_(residual_norm) {}

    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
    double residual_norm() const noexcept { return residual_norm_; }

private:
    std::vector<double> last_iterate_;
    double residual_norm_;
};

// Adaptive integration gave up (step size underflow).
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double time)
        : std::runtime_error(what + " at t=" + std::to_string(time)), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

enum class ParseIssue { Syntax, Header, FieldCount, NotANumber, NotFinite, NonMonotonic, Negative, TooShort };

inline const char* to_string(ParseIssue k) {
    switch (k) {
    case ParseIssue::Syntax: return "syntax";
    case ParseIssue::Header: return "header";
    case ParseIssue::FieldCount: return "field_count";
    case ParseIssue::NotANumber: return "not_a_number";
    case ParseIssue::NotFinite: return "not_finite";
    case ParseIssue::NonMonotonic: return "non_monotonic";
    case ParseIssue::Negative: return "negative";
    case ParseIssue::TooShort: return "too_short";
    }
    return "syntax";
}

// Malformed input text. `line` is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0, ParseIssue issue = ParseIssue::Syntax)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line), issue_(issue) {}

    std::size_t line() const noexcept { return line_; }
    ParseIssue issue() const noexcept { return issue_; }

private:
    std::size_t line_;
    ParseIssue issue_;
};

// File could not be read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Structurally valid input that violates a configuration schema; `path` is the
// dotted key path of the offending field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace nvcharge
