// SPDX-License-Identifier: Apache-2.0
#include "agentflow/events.hpp"

#include "agentflow/error.hpp"
#include "agentflow/util.hpp"

#include <array>
#include <utility>

namespace agentflow {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 15> kEventNames{{
    {EventKind::PlanCreated, "PlanCreated"},
    {EventKind::TaskReleased, "TaskReleased"},
    {EventKind::TaskStarted, "TaskStarted"},
    {EventKind::AgentSelected, "AgentSelected"},
    {EventKind::ModelCall, "ModelCall"},
    {EventKind::ToolInvoked, "ToolInvoked"},
    {EventKind::ObservationAdded, "ObservationAdded"},
    {EventKind::TaskCompleted, "TaskCompleted"},
    {EventKind::TaskFailed, "TaskFailed"},
    {EventKind::VerdictIssued, "VerdictIssued"},
    {EventKind::FeedbackInjected, "FeedbackInjected"},
    {EventKind::HumanRequested, "HumanRequested"},
    {EventKind::HumanResponded, "HumanResponded"},
    {EventKind::Snapshot, "Snapshot"},
    {EventKind::Resumed, "Resumed"},
}};

} // namespace

std::string_view to_string(EventKind kind) {
    for (const auto& [k, name] : kEventNames) {
        if (k == kind) return name;
    }
    return "Unknown";
}

EventKind event_kind_from_string(std::string_view text) {
    for (const auto& [k, name] : kEventNames) {
        if (name == text) return k;
    }
    throw Error(Errc::InvalidArgument, "unknown event kind '" + std::string(text) + "'");
}

void to_json(nlohmann::json& j, const WorkflowEvent& e) {
    j = nlohmann::json{{"sequence_no", e.sequence_no},
                       {"timestamp", e.timestamp},
                       {"kind", to_string(e.kind)},
                       {"payload", e.payload}};
}

void from_json(const nlohmann::json& j, WorkflowEvent& e) {
    e.sequence_no = j.at("sequence_no").get<std::uint64_t>();
    e.timestamp = j.value("timestamp", std::string{});
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    e.payload = j.value("payload", nlohmann::json::object());
}

EventLog::EventLog(std::vector<WorkflowEvent> history) : events_(std::move(history)) {
    for (std::size_t i = 0; i < events_.size(); ++i) {
        if (events_[i].sequence_no != i + 1)
            throw Error(Errc::InvalidArgument, "event history is not gap-free");
    }
}

std::uint64_t EventLog::append(EventKind kind, nlohmann::json payload) {
    std::uint64_t seq = 0;
    {
        std::lock_guard lock(mutex_);
        WorkflowEvent event;
        event.sequence_no = events_.size() + 1;
        event.timestamp = util::iso8601_now();
        event.kind = kind;
        event.payload = std::move(payload);
        events_.push_back(std::move(event));
        seq = events_.back().sequence_no;
        if (listener_) listener_(events_.back());
    }
    changed_.notify_all();
    return seq;
}

std::vector<WorkflowEvent> EventLog::since(std::uint64_t from) const {
    std::lock_guard lock(mutex_);
    std::size_t start = from == 0 ? 0 : static_cast<std::size_t>(from - 1);
    if (start >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(start), events_.end()};
}

std::vector<WorkflowEvent> EventLog::wait_since(std::uint64_t from,
                                                std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    std::size_t start = from == 0 ? 0 : static_cast<std::size_t>(from - 1);
    changed_.wait_for(lock, timeout, [&] { return events_.size() > start; });
    if (start >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(start), events_.end()};
}

std::size_t EventLog::size() const {
    std::lock_guard lock(mutex_);
    return events_.size();
}

std::uint64_t EventLog::last_sequence() const {
    std::lock_guard lock(mutex_);
    return events_.size();
}

void EventLog::set_listener(Listener listener) {
    std::lock_guard lock(mutex_);
    listener_ = std::move(listener);
}

} // namespace agentflow
