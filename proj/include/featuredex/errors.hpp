#pragma once

#include <stdexcept>
#include <string>

namespace featuredex {

/// Error categories used across the library. Each maps to a CLI exit code.
enum class Err {
    // I/O and parse failures (exit 2)
    Truncated,
    Malformed,
    NonFinite,
    Empty,
    BadMagic,
    VersionUnsupported,
    IoFailure,
    ZeroArea,
    Degenerate,
    // dimension / configuration mismatches (exit 3)
    InvalidParams,
    MismatchedRows,
    EmptyDomain,
    ShapeMismatch,
    EmptySplit,
    DimensionMismatch,
    DuplicateId,
    EmptyTestSet,
    ConfigMismatch,
    // numeric failures (exit 4)
    Divergence,
};

class Error : public std::runtime_error {
public:
    Error(Err kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Err kind() const { return kind_; }

    /// CLI exit code for this error class (2 = I/O or parse, 3 = config
    /// or dimension mismatch, 4 = numeric failure).
    int exit_code() const {
        switch (kind_) {
            case Err::Truncated:
            case Err::Malformed:
            case Err::NonFinite:
            case Err::Empty:
            case Err::BadMagic:
            case Err::VersionUnsupported:
            case Err::IoFailure:
            case Err::ZeroArea:
            case Err::Degenerate:
                return 2;
            case Err::Divergence:
                return 4;
            default:
                return 3;
        }
    }

private:
    Err kind_;
};

inline const char* err_name(Err e) {
    switch (e) {
        case Err::Truncated: return "Truncated";
        case Err::Malformed: return "Malformed";
        case Err::NonFinite: return "NonFinite";
        case Err::Empty: return "Empty";
        case Err::BadMagic: return "BadMagic";
        case Err::VersionUnsupported: return "VersionUnsupported";
        case Err::IoFailure: return "IoFailure";
        case Err::ZeroArea: return "ZeroArea";
        case Err::Degenerate: return "Degenerate";
        case Err::InvalidParams: return "InvalidParams";
        case Err::MismatchedRows: return "MismatchedRows";
        case Err::EmptyDomain: return "EmptyDomain";
        case Err::ShapeMismatch: return "ShapeMismatch";
        case Err::EmptySplit: return "EmptySplit";
        case Err::DimensionMismatch: return "DimensionMismatch";
        case Err::DuplicateId: return "DuplicateId";
        case Err::EmptyTestSet: return "EmptyTestSet";
        case Err::ConfigMismatch: return "ConfigMismatch";
        case Err::Divergence: return "Divergence";
    }
    return "Unknown";
}

}  // namespace featuredex
