// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentflow/backend.hpp"
#include "agentflow/memory.hpp"
#include "agentflow/message.hpp"
#include "agentflow/task_queue.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agentflow {

inline constexpr std::string_view kDefaultTerminationLiteral = "FINAL ANSWER:";

// ---------------------------------------------------------------------------
// Templates

/// Plain text with {variable} placeholders; "{{" renders a literal brace.
struct PromptTemplate {
    std::string name;
    std::string body;

    /// Throws Errc::UnboundVariable for any placeholder missing from `vars`.
    std::string render(const std::map<std::string, std::string>& vars) const;
    std::vector<std::string> variables() const;
};

/// Built-in templates per agent role: planner, verifier, executor, basic.
const PromptTemplate& builtin_template(std::string_view role);
std::vector<std::string> template_roles();

/// Role templates, optionally overridden by "<dir>/<role>.txt" files.
class TemplateSet {
public:
    TemplateSet() = default;
    explicit TemplateSet(const std::string& directory);

    const PromptTemplate& get(std::string_view role) const;

private:
    std::map<std::string, PromptTemplate, std::less<>> overrides_;
};

// ---------------------------------------------------------------------------
// Stage sequences

namespace stage {
inline constexpr std::string_view Plan = "Plan";
inline constexpr std::string_view Thought = "Thought";
inline constexpr std::string_view TaskThought = "Task Thought";
inline constexpr std::string_view DialogThought = "Dialog Thought";
inline constexpr std::string_view Next = "Next";
inline constexpr std::string_view Action = "Action";
inline constexpr std::string_view Observation = "Observation";
} // namespace stage

struct StageSequence {
    std::vector<std::string> stages;
    std::size_t loop_from = 0;

    static StageSequence react();
    static StageSequence plan_react();
    /// Plan, Task Thought, Dialog Thought, Next, Action, Observation. Action and
    /// Observation are skipped whenever Next names someone other than @Self.
    static StageSequence conv_plan_react();
    static StageSequence ooda();
    static StageSequence pdca();
    /// Any label list; "TaskThought"-style spellings normalize to "Task Thought".
    static StageSequence programmable(std::vector<std::string> labels);

    bool has(std::string_view label) const;
    bool conversational() const { return has(stage::Next); }
    /// Stages the model writes (everything except Observation), in order.
    std::vector<std::string> model_stages() const;

    /// At most one Observation, and labels are unique.
    void validate() const;

    bool operator==(const StageSequence&) const = default;
};

/// Canonical spelling of a stage label ("taskthought" -> "Task Thought").
std::string canonical_stage_label(std::string_view label);

// ---------------------------------------------------------------------------
// Step output

struct ToolCall {
    std::string tool_name;
    nlohmann::json arguments = nlohmann::json::object();

    bool operator==(const ToolCall&) const = default;
};

struct AgentRef {
    enum class Kind { Self, Named, HumanProxy };
    Kind kind = Kind::Self;
    std::string name;

    static AgentRef self() { return {Kind::Self, {}}; }
    static AgentRef named(std::string name) { return {Kind::Named, std::move(name)}; }
    static AgentRef human() { return {Kind::HumanProxy, {}}; }

    bool operator==(const AgentRef&) const = default;
};

std::string to_string(const AgentRef& ref);

struct StepOutput {
    std::map<std::string, std::string> stages;
    std::optional<ToolCall> action;
    std::optional<AgentRef> next_agent;
    std::optional<std::string> terminal;
    /// The normalized assistant message appended to short memory.
    std::string revised;

    bool operator==(const StepOutput&) const = default;
};

// ---------------------------------------------------------------------------
// Rendering

struct SystemPromptInputs {
    std::string persona;
    std::string objective;
    std::string tools_block;
    std::string agents_block;
    std::string stage_format;
    std::string termination_instruction;
};

/// Substitutes the inputs; empty tool/agent blocks leave no section header.
std::string render_system(const PromptTemplate& tmpl, const SystemPromptInputs& inputs);

std::string stage_format_instructions(const StageSequence& sequence);
std::string termination_instruction(std::string_view literal);

// ---------------------------------------------------------------------------
// Non-iterative strategies

struct CallOptions {
    double temperature = 0.0;
    int max_tokens = 1024;
    CallTag tag;
};

/// One chat call: [system, user(instruction)]; returns the trimmed reply.
std::string run_basic(const std::string& system, const std::string& instruction,
                      ChatBackend& backend, const CallOptions& options = {});

/// First JSON object in `text`, tolerating prose and code fences around it.
std::optional<nlohmann::json> extract_json_object(std::string_view text);

/// Throws Errc::NoJsonFound or Errc::SchemaViolation.
std::vector<TaskSpec> parse_plan(std::string_view raw);

struct Verdict {
    bool value = false;
    std::string reason;
    bool parsed = false;
};

Verdict parse_verdict_detail(std::string_view raw);
/// Unparseable text counts as false (with a logged warning).
bool parse_verdict(std::string_view raw);

// ---------------------------------------------------------------------------
// Iterative strategies

std::optional<std::string> detect_termination(std::string_view raw,
                                              std::string_view literal = kDefaultTerminationLiteral);

Message make_observation(std::string_view content, Origin origin = Origin::ToolResult);

/// First @-token wins. Throws Errc::NoMention or Errc::UnknownAgent.
AgentRef parse_next_mention(std::string_view stage_text, const std::vector<std::string>& roster);

/// Same as StageSequence::conv_plan_react().
StageSequence conv_sequence();

struct StepOptions {
    std::string termination_literal = std::string(kDefaultTerminationLiteral);
    /// Names valid after '@' besides Self and HumanProxy.
    std::vector<std::string> roster;
    CallOptions call;
};

/// Parses one raw model reply without side effects. Throws MissingStage,
/// MalformedAction, UnknownAgent or NoMention.
StepOutput parse_step(std::string_view raw, const StageSequence& sequence,
                      const StepOptions& options);

/// One iteration: a chat call over `memory`, parsing, and appending the
/// revised assistant message. Each defect class gets exactly one corrective
/// re-prompt; a second MissingStage/MalformedAction throws, a second mention
/// defect falls back to @Self.
StepOutput step_iterative(const StageSequence& sequence, ShortMemory& memory,
                          ChatBackend& backend, const StepOptions& options);

} // namespace agentflow
