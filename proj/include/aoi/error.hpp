#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aoi {

enum class ErrorKind {
    parameter,
    validation,
    parse,
    convergence,
    degenerate_rate,
    io,
    empty_result,
};

/// Process exit codes used by the command-line tool. 0 is success and
/// 2 is reserved for usage errors reported by the argument parser.
inline int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::parameter: return 2;
    case ErrorKind::validation: return 3;
    case ErrorKind::parse: return 3;
    case ErrorKind::convergence: return 4;
    case ErrorKind::degenerate_rate: return 5;
    case ErrorKind::io: return 6;
    case ErrorKind::empty_result: return 7;
    }
    return 1;
}

/// Base of every error thrown by the library. The optional stage label is
/// attached by composite operations (e.g. "fixed point", "variance") so
/// callers can tell which step of a pipeline failed.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& stage() const noexcept { return stage_; }
    void set_stage(std::string stage) { stage_ = std::move(stage); }

    std::string describe() const {
        return stage_.empty() ? std::string(what()) : stage_ + ": " + what();
    }

private:
    ErrorKind kind_;
    std::string stage_;
};

class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& what)
        : Error(ErrorKind::parameter, what) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error(ErrorKind::validation, join(violations)),
          violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "invalid protocol spec";
        for (const auto& s : v) out += "; " + s;
        return out;
    }
    std::vector<std::string> violations_;
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(ErrorKind::parse, what) {}
};

/// Raised when an iterative procedure hits its iteration cap.
/// Carries the residual trace so callers can decide whether to retry
/// (e.g. with damping).
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : Error(ErrorKind::convergence, what), history_(std::move(history)) {}

    const std::vector<double>& residual_history() const noexcept { return history_; }
    double last_residual() const noexcept {
        return history_.empty() ? 0.0 : history_.back();
    }

private:
    std::vector<double> history_;
};

class DegenerateRateError : public Error {
public:
    explicit DegenerateRateError(const std::string& what)
        : Error(ErrorKind::degenerate_rate, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class EmptyResultError : public Error {
public:
    explicit EmptyResultError(const std::string& what)
        : Error(ErrorKind::empty_result, what) {}
};

}  // namespace aoi
