#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace taskmem {

enum class ErrorKind {
    // layout
    MalformedLayout,
    CyclicLayout,
    MalformedScreen,
    // memory
    DuplicateSubTaskName,
    UnknownNode,
    UnknownSubTask,
    RepairOverwriteDenied,
    OverwriteDenied,
    DanglingStep,
    IoError,
    SchemaVersionMismatch,
    IntegrityViolation,
    // adapt
    UnknownIndex,
    GeneralizationFailed,
    UnboundParameter,
    AdaptationFailed,
    MissingExample,
    // llm
    NoMockRule,
    ReplayMiss,
    TransportError,
    NonRetryableApiError,
    UnparsableResponse,
    ConfigError,
    // agent
    SelectedUnknownSubTask,
    MaxCorrectionsExceeded,
    UserAbort,
    NoProgress,
    RecallDiverged,
    InvalidPhaseTransition,
    // sim
    SchemaError,
    DanglingRule,
    InvalidIndex,
    NotActionable,
    UnknownList,
    StaleScreen,
    CapabilityUnsupported,
    // repair
    InvalidTarget,
    NotPaused,
    // cli
    MalformedLog,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    // The message without the kind prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

}  // namespace taskmem
