// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentflow/agents.hpp"
#include "agentflow/backend.hpp"
#include "agentflow/events.hpp"
#include "agentflow/memory.hpp"
#include "agentflow/prompts.hpp"
#include "agentflow/task_queue.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace agentflow {

inline constexpr int kSnapshotSchemaVersion = 1;

enum class Phase { Planning, Executing, Verifying, Replanning, Done, Failed, Paused };

std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view text);

struct WorkflowConfig {
    std::string name;
    /// Non-iterative agents; only persona and sampling parameters are used.
    AgentSpec planner;
    AgentSpec verifier;
    std::vector<AgentUnit> units;
    std::size_t max_replans = 2;
    std::string termination_literal = std::string(kDefaultTerminationLiteral);
    /// Empty keeps episodes in memory.
    std::string episodic_store;
    std::optional<std::vector<TaskSpec>> predefined_plan;
    std::size_t max_parallel_tasks = 1;
    std::size_t episodic_k = 3;
    EpisodeScope episode_scope{true, true, true, {}};
    std::optional<std::size_t> memory_capacity;
    std::optional<std::chrono::milliseconds> human_timeout;

    /// Throws Errc::ConfigError.
    void validate() const;
};

/// Deterministic digest of everything in the config that affects execution.
std::string config_fingerprint(const WorkflowConfig& config);
nlohmann::json config_digest_source(const WorkflowConfig& config);

/// Each rule becomes "rule-NN" depending on the previous rule.
std::vector<TaskSpec> linear_plan(const std::vector<std::string>& rules);

struct WorkflowState {
    std::string workflow_id;
    std::string instruction;
    TaskQueue queue;
    Phase phase = Phase::Planning;
    std::optional<std::string> final_result;
    std::optional<bool> verdict;
    std::string verdict_reason;
    std::size_t replan_count = 0;
    /// "<phase>: <cause>" when Failed.
    std::string failure;
    std::vector<Phase> phase_history;
};

nlohmann::json to_json(const WorkflowState& state);

struct FeedbackEnvelope {
    enum class Kind { IncidentalObservation, HumanProxyResponse };
    std::string workflow_id;
    std::optional<std::string> task_id;
    Kind kind = Kind::IncidentalObservation;
    std::string content;
};

FeedbackEnvelope::Kind feedback_kind_from_string(std::string_view text);
std::string_view to_string(FeedbackEnvelope::Kind kind);

/// Services a workflow borrows; the caller keeps them alive.
struct Runtime {
    ChatBackend* backend = nullptr;
    std::shared_ptr<const Embedder> embedder;
    ToolboxMap toolboxes;
    std::shared_ptr<EpisodicStore> episodes;
    std::shared_ptr<const TemplateSet> templates;
};

/// Final result from the queue's sinks: the single sink's result, otherwise
/// "## <id>" sections in topological order.
std::string assemble_final_result(const TaskQueue& queue);

/// Planner prompt for the first round or a replanning round.
std::string planner_user_message(const std::string& instruction, const std::optional<std::string>& failed_result,
                                 const std::string& reason);
/// Verifier input: instruction and final result only.
std::string verifier_user_message(const std::string& instruction, const std::string& final_result);

/// Planner call with one corrective re-prompt on NoJsonFound, SchemaViolation
/// or an invalid DAG. Throws Errc::WorkflowFailed after the second failure.
TaskQueue plan(const std::string& instruction, const WorkflowConfig& config, ChatBackend& backend,
               const TemplateSet& templates, const std::optional<std::string>& failed_result = std::nullopt,
               const std::string& reason = "");

Verdict verify(const std::string& instruction, const std::string& final_result, const WorkflowConfig& config,
               ChatBackend& backend, const TemplateSet& templates);

/// One Plan-Execute-Verify run. Public methods are safe to call from any thread
/// while run() is executing on another.
class Workflow {
public:
    Workflow(std::string workflow_id, std::string instruction, WorkflowConfig config, Runtime runtime);

    /// Rebuilds a workflow from a snapshot document. Done tasks keep their
    /// results; tasks Running at snapshot time restart from the beginning.
    /// A ScriptedBackend is fast-forwarded past the calls already answered.
    /// Throws SchemaVersionMismatch or ConfigFingerprintMismatch.
    static std::unique_ptr<Workflow> resume(const nlohmann::json& snapshot, WorkflowConfig config,
                                            Runtime runtime);

    /// Blocks until Done or Failed.
    WorkflowState run();

    /// Throws NoOutstandingRequest, or InvalidArgument for an unknown task.
    void inject_feedback(const FeedbackEnvelope& envelope);

    /// Only from Executing; throws Errc::InvalidTransition otherwise.
    void pause();
    /// Only from Paused; throws Errc::InvalidTransition otherwise.
    void resume_execution();
    /// Aborts blocked waits; run() then fails.
    void cancel();

    WorkflowState state() const;
    Phase phase() const;
    EventLog& events() { return *events_; }
    const EventLog& events() const { return *events_; }
    std::map<std::string, ExecutionTrace> traces() const;
    /// task id -> unit name for tasks that were matched.
    std::map<std::string, std::string> task_units() const;
    std::map<std::string, std::string> outstanding_requests() const { return feedback_.outstanding(); }
    PauseGate& gate() { return gate_; }
    const std::string& id() const { return state_.workflow_id; }
    const std::string& fingerprint() const { return fingerprint_; }

    nlohmann::json snapshot() const;
    /// Snapshots are written here as snapshot-<seq>.json plus latest.json.
    void set_snapshot_dir(std::filesystem::path dir);

private:
    void execute_queue();
    void run_task(const std::string& task_id);
    /// Callers hold mutex_.
    void write_snapshot_locked(const char* reason);
    nlohmann::json snapshot_locked() const;
    void set_phase_locked(Phase phase);

    WorkflowConfig config_;
    Runtime runtime_;
    std::string fingerprint_;
    std::unique_ptr<EventLog> events_;
    std::unique_ptr<EventedBackend> backend_;
    std::shared_ptr<EpisodicStore> episodes_;
    std::shared_ptr<const TemplateSet> templates_;

    mutable std::mutex mutex_;
    std::condition_variable changed_;
    WorkflowState state_;
    Phase paused_from_ = Phase::Executing;
    std::set<std::string> released_;
    std::map<std::string, ExecutionTrace> traces_;
    std::map<std::string, std::string> task_units_;
    std::optional<std::string> previous_result_;
    std::string previous_reason_;
    bool needs_plan_ = true;
    std::filesystem::path snapshot_dir_;
    std::atomic<bool> cancelled_{false};

    FeedbackHub feedback_;
    PauseGate gate_;
};

} // namespace agentflow
