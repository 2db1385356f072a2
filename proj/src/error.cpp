#include "lobnet/error.hpp"

namespace lobnet {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::MalformedFrame: return "MalformedFrame";
        case Errc::MissingField: return "MissingField";
        case Errc::ConnectFailed: return "ConnectFailed";
        case Errc::SubscribeRejected: return "SubscribeRejected";
        case Errc::ReplayFileMissing: return "ReplayFileMissing";
        case Errc::CrossedSnapshot: return "CrossedSnapshot";
        case Errc::Uninitialized: return "Uninitialized";
        case Errc::EmptySide: return "EmptySide";
        case Errc::DegenerateComponent: return "DegenerateComponent";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::DivergenceDetected: return "DivergenceDetected";
        case Errc::RankDeficient: return "RankDeficient";
        case Errc::BadLayout: return "BadLayout";
        case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
        case Errc::VariantMismatch: return "VariantMismatch";
        case Errc::InsufficientHistory: return "InsufficientHistory";
        case Errc::DiskFull: return "DiskFull";
        case Errc::CorruptLine: return "CorruptLine";
        case Errc::InsufficientData: return "InsufficientData";
        case Errc::DegenerateX: return "DegenerateX";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::SelfCheckFailed: return "SelfCheckFailed";
        case Errc::PreconditionViolation: return "PreconditionViolation";
        case Errc::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace lobnet
