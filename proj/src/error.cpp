// SPDX-License-Identifier: Apache-2.0
#include "agentflow/error.hpp"

namespace agentflow {

std::string_view to_string(Errc code) {
    switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::UnknownDependency: return "UnknownDependency";
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::UnknownTask: return "UnknownTask";
    case Errc::InvalidTransition: return "InvalidTransition";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::InvalidRequest: return "InvalidRequest";
    case Errc::ScriptExhausted: return "ScriptExhausted";
    case Errc::ScriptMismatch: return "ScriptMismatch";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::UnboundVariable: return "UnboundVariable";
    case Errc::NoJsonFound: return "NoJsonFound";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::MissingStage: return "MissingStage";
    case Errc::MalformedAction: return "MalformedAction";
    case Errc::UnknownAgent: return "UnknownAgent";
    case Errc::NoMention: return "NoMention";
    case Errc::EmptyIndex: return "EmptyIndex";
    case Errc::ToolArgument: return "ToolArgument";
    case Errc::MemoryPurged: return "MemoryPurged";
    case Errc::StorageFailure: return "StorageFailure";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case Errc::TaskFailed: return "TaskFailed";
    case Errc::WorkflowFailed: return "WorkflowFailed";
    case Errc::NoSuchWorkflow: return "NoSuchWorkflow";
    case Errc::NoOutstandingRequest: return "NoOutstandingRequest";
    case Errc::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case Errc::ConfigFingerprintMismatch: return "ConfigFingerprintMismatch";
    case Errc::ConfigError: return "ConfigError";
    case Errc::TaskAlreadyDone: return "TaskAlreadyDone";
    }
    return "Unknown";
}

namespace {

std::string describe_cycle(const std::vector<std::string>& cycle) {
    std::string out = "dependency cycle: ";
    for (std::size_t i = 0; i < cycle.size(); ++i) {
        if (i) out += " -> ";
        out += cycle[i];
    }
    return out;
}

} // namespace

CycleError::CycleError(std::vector<std::string> cycle)
    : Error(Errc::CycleDetected, describe_cycle(cycle)), cycle_(std::move(cycle)) {}

} // namespace agentflow
