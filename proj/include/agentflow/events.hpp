// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace agentflow {

enum class EventKind {
    PlanCreated,
    TaskReleased,
    TaskStarted,
    AgentSelected,
    ModelCall,
    ToolInvoked,
    ObservationAdded,
    TaskCompleted,
    TaskFailed,
    VerdictIssued,
    FeedbackInjected,
    HumanRequested,
    HumanResponded,
    Snapshot,
    Resumed,
};

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view text);

struct WorkflowEvent {
    std::uint64_t sequence_no = 0;
    std::string timestamp;
    EventKind kind = EventKind::PlanCreated;
    nlohmann::json payload = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const WorkflowEvent& e);
void from_json(const nlohmann::json& j, WorkflowEvent& e);

/// Append-only, totally ordered event log. Sequence numbers start at 1 and
/// are gap-free; appends from any thread are serialized.
class EventLog {
public:
    using Listener = std::function<void(const WorkflowEvent&)>;

    EventLog() = default;
    explicit EventLog(std::vector<WorkflowEvent> history);

    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    std::uint64_t append(EventKind kind, nlohmann::json payload = nlohmann::json::object());

    /// Events with sequence_no >= from.
    std::vector<WorkflowEvent> since(std::uint64_t from) const;

    /// Like since(), but blocks up to `timeout` while nothing new is available.
    std::vector<WorkflowEvent> wait_since(std::uint64_t from,
                                          std::chrono::milliseconds timeout) const;

    std::vector<WorkflowEvent> all() const { return since(0); }
    std::size_t size() const;
    std::uint64_t last_sequence() const;

    /// Invoked under the log lock, in sequence order, for every new event.
    void set_listener(Listener listener);

private:
    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::vector<WorkflowEvent> events_;
    Listener listener_;
};

} // namespace agentflow
