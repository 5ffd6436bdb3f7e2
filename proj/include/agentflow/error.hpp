// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace agentflow {

enum class Errc {
    // core
    InvalidArgument,
    DuplicateId,
    UnknownDependency,
    CycleDetected,
    UnknownTask,
    InvalidTransition,
    // backend
    BackendUnavailable,
    InvalidRequest,
    ScriptExhausted,
    ScriptMismatch,
    DimensionMismatch,
    // prompts
    UnboundVariable,
    NoJsonFound,
    SchemaViolation,
    MissingStage,
    MalformedAction,
    UnknownAgent,
    NoMention,
    // tools
    EmptyIndex,
    ToolArgument,
    // memory
    MemoryPurged,
    StorageFailure,
    // agents
    EmptySequence,
    MaxIterationsExceeded,
    TaskFailed,
    // coordinator
    WorkflowFailed,
    NoSuchWorkflow,
    NoOutstandingRequest,
    SchemaVersionMismatch,
    ConfigFingerprintMismatch,
    ConfigError,
    TaskAlreadyDone,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// Raised by dependency validation; carries one offending cycle as a closed
/// path (first id repeated at the end).
class CycleError : public Error {
public:
    explicit CycleError(std::vector<std::string> cycle);

    const std::vector<std::string>& cycle() const noexcept { return cycle_; }

private:
    std::vector<std::string> cycle_;
};

} // namespace agentflow
