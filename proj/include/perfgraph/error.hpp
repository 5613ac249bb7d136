#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace perfgraph {

enum class ErrorKind {
    CyclicGraph,
    EmptyGraph,
    InvalidArgument,
    InfeasibleAction,
    SchemaMismatch,
    ParseError,
    EmptyDataset,
    ShapeError,
    NumericError,
    InvalidParams,
    EmptyBatch,
    InsufficientData,
    NoSafeAction,
    ConfigError,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::CyclicGraph: return "CyclicGraph";
    case ErrorKind::EmptyGraph: return "EmptyGraph";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InfeasibleAction: return "InfeasibleAction";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::NumericError: return "NumericError";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::NoSafeAction: return "NoSafeAction";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

} // namespace perfgraph
