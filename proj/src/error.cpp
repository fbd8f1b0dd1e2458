#include "taskmem/error.hpp"

namespace taskmem {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedLayout: return "MalformedLayout";
        case ErrorKind::CyclicLayout: return "CyclicLayout";
        case ErrorKind::MalformedScreen: return "MalformedScreen";
        case ErrorKind::DuplicateSubTaskName: return "DuplicateSubTaskName";
        case ErrorKind::UnknownNode: return "UnknownNode";
        case ErrorKind::UnknownSubTask: return "UnknownSubTask";
        case ErrorKind::RepairOverwriteDenied: return "RepairOverwriteDenied";
        case ErrorKind::OverwriteDenied: return "OverwriteDenied";
        case ErrorKind::DanglingStep: return "DanglingStep";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::SchemaVersionMismatch: return "SchemaVersionMismatch";
        case ErrorKind::IntegrityViolation: return "IntegrityViolation";
        case ErrorKind::UnknownIndex: return "UnknownIndex";
        case ErrorKind::GeneralizationFailed: return "GeneralizationFailed";
        case ErrorKind::UnboundParameter: return "UnboundParameter";
        case ErrorKind::AdaptationFailed: return "AdaptationFailed";
        case ErrorKind::MissingExample: return "MissingExample";
        case ErrorKind::NoMockRule: return "NoMockRule";
        case ErrorKind::ReplayMiss: return "ReplayMiss";
        case ErrorKind::TransportError: return "TransportError";
        case ErrorKind::NonRetryableApiError: return "NonRetryableApiError";
        case ErrorKind::UnparsableResponse: return "UnparsableResponse";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::SelectedUnknownSubTask: return "SelectedUnknownSubTask";
        case ErrorKind::MaxCorrectionsExceeded: return "MaxCorrectionsExceeded";
        case ErrorKind::UserAbort: return "UserAbort";
        case ErrorKind::NoProgress: return "NoProgress";
        case ErrorKind::RecallDiverged: return "RecallDiverged";
        case ErrorKind::InvalidPhaseTransition: return "InvalidPhaseTransition";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::DanglingRule: return "DanglingRule";
        case ErrorKind::InvalidIndex: return "InvalidIndex";
        case ErrorKind::NotActionable: return "NotActionable";
        case ErrorKind::UnknownList: return "UnknownList";
        case ErrorKind::StaleScreen: return "StaleScreen";
        case ErrorKind::CapabilityUnsupported: return "CapabilityUnsupported";
        case ErrorKind::InvalidTarget: return "InvalidTarget";
        case ErrorKind::NotPaused: return "NotPaused";
        case ErrorKind::MalformedLog: return "MalformedLog";
    }
    return "Unknown";
}

}  // namespace taskmem
