#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tbal {

enum class ErrorKind {
    InvalidArgument,
    NotAPartialOrder,
    NoBottom,
    NonPositiveEntry,
    NonPositiveResult,
    OverflowRisk,
    SizeCap,
    InvalidConstraint,
    SingularJacobian,
    EmptySupport,
    BottomMissing,
    PermutationFailed,
    ShapeMismatch,
    ZeroFiber,
    ParseError,
    NegativeEntry,
    IndexOutOfRange,
    IoError,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::NotAPartialOrder: return "NotAPartialOrder";
        case ErrorKind::NoBottom: return "NoBottom";
        case ErrorKind::NonPositiveEntry: return "NonPositiveEntry";
        case ErrorKind::NonPositiveResult: return "NonPositiveResult";
        case ErrorKind::OverflowRisk: return "OverflowRisk";
        case ErrorKind::SizeCap: return "SizeCap";
        case ErrorKind::InvalidConstraint: return "InvalidConstraint";
        case ErrorKind::SingularJacobian: return "SingularJacobian";
        case ErrorKind::EmptySupport: return "EmptySupport";
        case ErrorKind::BottomMissing: return "BottomMissing";
        case ErrorKind::PermutationFailed: return "PermutationFailed";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::ZeroFiber: return "ZeroFiber";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::NegativeEntry: return "NegativeEntry";
        case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above; the
/// message holds the detail (witness pair, line number, condition estimate).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace tbal
