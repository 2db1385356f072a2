#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lobnet {

enum class Errc {
    // feed
    MalformedFrame,
    MissingField,
    ConnectFailed,
    SubscribeRejected,
    ReplayFileMissing,
    // book
    CrossedSnapshot,
    Uninitialized,
    EmptySide,
    // features
    DegenerateComponent,
    // tensornet / models
    ShapeMismatch,
    DivergenceDetected,
    RankDeficient,
    BadLayout,
    CorruptCheckpoint,
    VariantMismatch,
    // walkthrough
    InsufficientHistory,
    // storage
    DiskFull,
    CorruptLine,
    // evalharness
    InsufficientData,
    DegenerateX,
    EmptyInput,
    SelfCheckFailed,
    // generic
    PreconditionViolation,
    ConfigError,
};

std::string_view to_string(Errc code) noexcept;

/// Exception carrying a machine-readable code. Everything the library throws
/// on a contract failure is an Error.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

inline void require(bool condition, Errc code, const char* message) {
    if (!condition) throw Error(code, message);
}

}  // namespace lobnet
