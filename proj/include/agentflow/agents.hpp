// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentflow/backend.hpp"
#include "agentflow/embedding.hpp"
#include "agentflow/events.hpp"
#include "agentflow/memory.hpp"
#include "agentflow/prompts.hpp"
#include "agentflow/task_queue.hpp"
#include "agentflow/tools.hpp"

#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace agentflow {

enum class Topology { Independent, Sequential, Joint, Hierarchical, Broadcast };

std::string_view to_string(Topology topology);
Topology topology_from_string(std::string_view text);

enum class MatcherKind { Iterative, Semantic, Mention, Composite };

std::string_view to_string(MatcherKind kind);
MatcherKind matcher_kind_from_string(std::string_view text);

struct MatcherConfig {
    MatcherKind kind = MatcherKind::Semantic;
    /// Fallback chain for Composite; ignored otherwise.
    std::vector<MatcherKind> components;
};

struct AgentSpec {
    std::string name;
    std::string persona;
    /// nullopt selects the non-iterative Basic strategy.
    std::optional<StageSequence> strategy = StageSequence::react();
    /// Name of a toolbox in the execution context; empty for none.
    std::string toolbox;
    RefinerConfig refiner;
    double temperature = 0.2;
    int max_tokens = 1024;
    bool may_terminate = true;
    bool is_lead = false;
};

struct AgentUnit {
    std::string name;
    /// Used for unit matching; the concatenated personas when empty.
    std::string description;
    std::vector<AgentSpec> agents;
    Topology topology = Topology::Independent;
    MatcherConfig matcher;
    /// Sequential only: agent names, repeated from the start when exhausted.
    std::vector<std::string> sequence;
    std::size_t max_iterations = 12;
    /// Broadcast only.
    std::size_t max_rounds = 4;
    bool parallel_fanout = false;

    /// Throws Errc::ConfigError.
    void validate() const;
    /// Case-insensitive name lookup.
    const AgentSpec* find(std::string_view agent_name) const;
    const AgentSpec* lead() const;
    std::string profile() const;
};

// ---------------------------------------------------------------------------
// Matchers

const AgentUnit& match_unit(const std::vector<AgentUnit>& units, const Task& task, const Embedder& embedder);

/// sequence[index % size]; throws Errc::EmptySequence.
const AgentSpec& match_iterative(const AgentUnit& unit, std::size_t index);

/// Highest cos(persona, task); ties go to the earlier agent.
const AgentSpec& match_semantic(const AgentUnit& unit, std::string_view task_description,
                                const Embedder& embedder);

struct MentionTarget {
    /// Null when the human proxy was mentioned.
    const AgentSpec* agent = nullptr;
    bool human() const { return agent == nullptr; }
};

/// Requires step.next_agent. Throws Errc::UnknownAgent for names outside the unit.
MentionTarget match_mention(const AgentUnit& unit, const StepOutput& step, const AgentSpec& current);

// ---------------------------------------------------------------------------
// Human channels

/// Per-task incidental feedback inbox plus outstanding human-proxy requests.
class FeedbackHub {
public:
    void post(const std::string& task_id, std::string content);
    std::vector<std::string> take(const std::string& task_id);

    void open_request(const std::string& task_id, std::string question);
    /// Blocks until respond() or the timeout; nullopt on timeout or cancel.
    std::optional<std::string> await_response(const std::string& task_id,
                                              std::optional<std::chrono::milliseconds> timeout);
    /// False when no request is outstanding for the task.
    bool respond(const std::string& task_id, std::string content);
    /// task id -> question.
    std::map<std::string, std::string> outstanding() const;
    void cancel();

private:
    struct Request {
        std::string question;
        std::optional<std::string> response;
    };
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::map<std::string, std::vector<std::string>> inbox_;
    std::map<std::string, Request> requests_;
    bool cancelled_ = false;
};

/// Executors block here between steps while the workflow is paused.
class PauseGate {
public:
    void pause();
    void resume();
    bool paused() const;
    /// Throws Errc::WorkflowFailed once cancelled.
    void wait();
    std::size_t waiting() const;
    void cancel();

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    bool paused_ = false;
    bool cancelled_ = false;
    std::size_t waiting_ = 0;
};

// ---------------------------------------------------------------------------
// Execution

struct TraceStep {
    std::size_t iteration = 0;
    std::string agent;
    std::string summary;
    bool terminal = false;
    std::string next;
    std::optional<std::string> tool;
    /// What the step led to: tool, human, handoff, report, broadcast or none.
    std::string observation_source = "none";
    /// Broadcast round the step belongs to; 0 outside rounds.
    std::size_t round = 0;
};

struct ExecutionTrace {
    std::string task_id;
    std::vector<TraceStep> steps;
};

struct TaskOutcome {
    std::string result;
    ExecutionTrace trace;
};

using ToolboxMap = std::map<std::string, std::shared_ptr<Toolbox>>;

struct ExecutionContext {
    std::string workflow_id;
    ChatBackend* backend = nullptr;
    const Embedder* embedder = nullptr;
    EventLog* events = nullptr;
    const ToolboxMap* toolboxes = nullptr;
    EpisodicStore* episodes = nullptr;
    EpisodeScope scope{true, true, true, {}};
    std::size_t episodic_k = 3;
    std::size_t episode_chars = 1000;
    const TemplateSet* templates = nullptr;
    std::string termination_literal = std::string(kDefaultTerminationLiteral);
    FeedbackHub* feedback = nullptr;
    PauseGate* gate = nullptr;
    std::optional<std::chrono::milliseconds> human_timeout;
    std::optional<std::size_t> memory_capacity;
};

/// Task text, prerequisite results in id order, then retrieved episodes.
std::string initial_task_message(const Task& task, const std::vector<ScoredEpisode>& retrieved,
                                 std::size_t episode_chars);

/// Runs one task through the unit's topology. Stores an episode either way and
/// purges every short memory it created. Throws Errc::MaxIterationsExceeded or
/// whatever the backend/strategy raised.
TaskOutcome execute_task(const AgentUnit& unit, const Task& task, const ExecutionContext& context);

} // namespace agentflow
