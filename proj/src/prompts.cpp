// SPDX-License-Identifier: Apache-2.0
#include "agentflow/prompts.hpp"

#include "agentflow/error.hpp"
#include "agentflow/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <set>

namespace agentflow {

// ---------------------------------------------------------------------------
// Templates

namespace {

bool is_ident_start(char c) { return std::islower(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) {
    return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
           c == '_';
}

/// Calls on_text / on_var for each segment of a template body.
template <typename Text, typename Var>
void scan_template(std::string_view body, Text on_text, Var on_var) {
    std::size_t i = 0;
    while (i < body.size()) {
        char c = body[i];
        if (c == '{' && i + 1 < body.size() && body[i + 1] == '{') {
            on_text(std::string_view("{"));
            i += 2;
            continue;
        }
        if (c == '{' && i + 1 < body.size() && is_ident_start(body[i + 1])) {
            std::size_t j = i + 1;
            while (j < body.size() && is_ident_char(body[j])) ++j;
            if (j < body.size() && body[j] == '}') {
                on_var(body.substr(i + 1, j - i - 1));
                i = j + 1;
                continue;
            }
        }
        on_text(body.substr(i, 1));
        ++i;
    }
}

const char* const kPlannerTemplate = R"({persona}

Objective: {objective}

Decompose the user's instruction into a small set of simple, self-contained tasks that together accomplish it. A task may depend on the results of earlier tasks; the dependencies must form a directed acyclic graph. When a final answer has to combine several partial results, add a final task that depends on all of them.

{agents_block}

Respond only with a JSON object of this form:
{"tasks": [{"id": "t1", "description": "...", "depends_on": [], "unit_hint": null}]}
)";

const char* const kVerifierTemplate = R"({persona}

Objective: {objective}

You are given a user's original instruction and the final result produced for it. Decide whether the result fully satisfies the instruction. You do not see how the result was produced.

Respond only with a JSON object of this form:
{"verdict": true, "reason": "<one sentence>"}
)";

const char* const kExecutorTemplate = R"({persona}

Objective: {objective}

{tools_block}

{agents_block}

{stage_format}

{termination_instruction}
)";

const char* const kBasicTemplate = R"({persona}

Objective: {objective}
)";

std::string collapse_blank_lines(std::string text) {
    std::string out;
    out.reserve(text.size());
    int newlines = 0;
    for (char c : text) {
        if (c == '\n') {
            if (++newlines > 2) continue;
        } else {
            newlines = 0;
        }
        out.push_back(c);
    }
    while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
    std::size_t start = 0;
    while (start < out.size() && out[start] == '\n') ++start;
    return out.substr(start);
}

} // namespace

std::string PromptTemplate::render(const std::map<std::string, std::string>& vars) const {
    std::string out;
    scan_template(
        body, [&](std::string_view text) { out.append(text); },
        [&](std::string_view var) {
            auto it = vars.find(std::string(var));
            if (it == vars.end())
                throw Error(Errc::UnboundVariable,
                            "template '" + name + "' has unbound variable {" + std::string(var) + "}");
            out += it->second;
        });
    return out;
}

std::vector<std::string> PromptTemplate::variables() const {
    std::vector<std::string> vars;
    scan_template(
        body, [](std::string_view) {},
        [&](std::string_view var) {
            if (std::find(vars.begin(), vars.end(), var) == vars.end()) vars.emplace_back(var);
        });
    return vars;
}

std::vector<std::string> template_roles() { return {"planner", "verifier", "executor", "basic"}; }

const PromptTemplate& builtin_template(std::string_view role) {
    static const std::map<std::string, PromptTemplate, std::less<>> builtins{
        {"planner", {"planner", kPlannerTemplate}},
        {"verifier", {"verifier", kVerifierTemplate}},
        {"executor", {"executor", kExecutorTemplate}},
        {"basic", {"basic", kBasicTemplate}},
    };
    auto it = builtins.find(role);
    if (it == builtins.end())
        throw Error(Errc::InvalidArgument, "no template for role '" + std::string(role) + "'");
    return it->second;
}

TemplateSet::TemplateSet(const std::string& directory) {
    for (const auto& role : template_roles()) {
        auto path = std::filesystem::path(directory) / (role + ".txt");
        if (std::filesystem::exists(path)) overrides_[role] = {role, util::read_file(path.string())};
    }
}

const PromptTemplate& TemplateSet::get(std::string_view role) const {
    auto it = overrides_.find(role);
    if (it != overrides_.end()) return it->second;
    return builtin_template(role);
}

// ---------------------------------------------------------------------------
// Stage sequences

std::string canonical_stage_label(std::string_view label) {
    std::string compact;
    for (char c : label) {
        if (!std::isspace(static_cast<unsigned char>(c)) && c != '_')
            compact.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    for (std::string_view known : {stage::Plan, stage::Thought, stage::TaskThought, stage::DialogThought,
                                   stage::Next, stage::Action, stage::Observation}) {
        std::string k;
        for (char c : known) {
            if (c != ' ') k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
        if (k == compact) return std::string(known);
    }
    return util::trim(label);
}

StageSequence StageSequence::react() {
    return {{std::string(stage::Thought), std::string(stage::Action), std::string(stage::Observation)}, 0};
}

StageSequence StageSequence::plan_react() {
    return {{std::string(stage::Plan), std::string(stage::Thought), std::string(stage::Action),
             std::string(stage::Observation)},
            0};
}

StageSequence StageSequence::conv_plan_react() {
    return {{std::string(stage::Plan), std::string(stage::TaskThought), std::string(stage::DialogThought),
             std::string(stage::Next), std::string(stage::Action), std::string(stage::Observation)},
            0};
}

// Orient/Decide and Check carry no special parsing; they are plain labels.
StageSequence StageSequence::ooda() {
    return programmable({"Observation", "Orient", "Decide", "Action"});
}

StageSequence StageSequence::pdca() { return programmable({"Plan", "Do", "Check", "Action", "Observation"}); }

StageSequence StageSequence::programmable(std::vector<std::string> labels) {
    StageSequence seq;
    for (auto& label : labels) seq.stages.push_back(canonical_stage_label(label));
    seq.validate();
    return seq;
}

bool StageSequence::has(std::string_view label) const {
    return std::find(stages.begin(), stages.end(), label) != stages.end();
}

std::vector<std::string> StageSequence::model_stages() const {
    std::vector<std::string> out;
    for (const auto& s : stages) {
        if (s != stage::Observation) out.push_back(s);
    }
    return out;
}

void StageSequence::validate() const {
    if (stages.empty()) throw Error(Errc::InvalidArgument, "stage sequence is empty");
    std::set<std::string> seen;
    for (const auto& s : stages) {
        if (s.empty()) throw Error(Errc::InvalidArgument, "stage label is empty");
        if (!seen.insert(util::to_lower(s)).second)
            throw Error(Errc::InvalidArgument, "stage '" + s + "' appears twice in the sequence");
    }
    if (loop_from >= stages.size()) throw Error(Errc::InvalidArgument, "loop_from is out of range");
}

std::string to_string(const AgentRef& ref) {
    switch (ref.kind) {
    case AgentRef::Kind::Self: return "@Self";
    case AgentRef::Kind::HumanProxy: return "@HumanProxy";
    case AgentRef::Kind::Named: return "@" + ref.name;
    }
    return "@Self";
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string stage_guidance(const std::string& label, bool conversational) {
    if (label == stage::Plan) return "<the remaining steps to solve the task, revised at every iteration>";
    if (label == stage::Thought) return "<reflect on the task and decide the next step>";
    if (label == stage::TaskThought) return "<reflect on the current task and the next step to solve it>";
    if (label == stage::DialogThought)
        return "<reflect on how the other agents can help; this text is passed to the agent you name next>";
    if (label == stage::Next) return "<@Self to continue yourself, or @AgentName to hand the work over>";
    if (label == stage::Action) {
        std::string format = R"(a JSON object {"tool": "<tool name>", "input": {<parameters>}})";
        return conversational ? "<only when Next is @Self: " + format + ">" : "<" + format + ">";
    }
    return "<your " + util::to_lower(label) + ">";
}

} // namespace

std::string stage_format_instructions(const StageSequence& sequence) {
    std::string out =
        "Respond using the stages below. Start each stage on its own line with its label and a colon:\n";
    for (const auto& label : sequence.model_stages())
        out += label + ": " + stage_guidance(label, sequence.conversational()) + "\n";
    if (sequence.has(stage::Observation))
        out += "The Observation is supplied to you in the following user message; never write it yourself.";
    return util::trim(out);
}

std::string termination_instruction(std::string_view literal) {
    return "When the task is complete, write " + std::string(literal) +
           " followed by the final result instead of an Action.";
}

std::string render_system(const PromptTemplate& tmpl, const SystemPromptInputs& inputs) {
    std::map<std::string, std::string> vars{
        {"persona", inputs.persona},
        {"objective", inputs.objective},
        {"tools_block", inputs.tools_block.empty() ? "" : "Available tools:\n\n" + inputs.tools_block},
        {"agents_block", inputs.agents_block.empty() ? "" : "Available agents:\n" + inputs.agents_block},
        {"stage_format", inputs.stage_format},
        {"termination_instruction", inputs.termination_instruction},
    };
    return collapse_blank_lines(tmpl.render(vars));
}

// ---------------------------------------------------------------------------
// Non-iterative strategies

std::string run_basic(const std::string& system, const std::string& instruction, ChatBackend& backend,
                      const CallOptions& options) {
    ChatRequest request;
    request.messages = {Message::system(system), Message::user(instruction)};
    request.temperature = options.temperature;
    request.max_tokens = options.max_tokens;
    request.tag = options.tag;
    return util::trim(backend.chat(request));
}

namespace {

/// Index one past the brace closing the object opened at `open`, or npos.
std::size_t matching_brace(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

} // namespace

std::optional<nlohmann::json> extract_json_object(std::string_view text) {
    for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
        std::size_t end = matching_brace(text, pos);
        if (end == std::string_view::npos) continue;
        auto parsed = nlohmann::json::parse(text.substr(pos, end - pos), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    }
    return std::nullopt;
}

std::vector<TaskSpec> parse_plan(std::string_view raw) {
    auto doc = extract_json_object(raw);
    if (!doc) throw Error(Errc::NoJsonFound, "no JSON object found in planner output");
    auto violation = [](const std::string& msg) { return Error(Errc::SchemaViolation, msg); };

    if (!doc->contains("tasks")) throw violation("tasks: missing field");
    const auto& tasks = (*doc)["tasks"];
    if (!tasks.is_array()) throw violation("tasks: expected array");
    if (tasks.empty()) throw violation("tasks: expected at least one task");

    std::vector<TaskSpec> specs;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& t = tasks[i];
        std::string where = "tasks[" + std::to_string(i) + "]";
        if (!t.is_object()) throw violation(where + ": expected object");
        TaskSpec spec;
        if (!t.contains("id") || !t["id"].is_string() || t["id"].get<std::string>().empty())
            throw violation(where + ".id: expected non-empty string");
        spec.id = t["id"].get<std::string>();
        if (!t.contains("description") || !t["description"].is_string())
            throw violation(where + ".description: expected string");
        spec.description = t["description"].get<std::string>();
        if (t.contains("depends_on") && !t["depends_on"].is_null()) {
            if (!t["depends_on"].is_array()) throw violation(where + ".depends_on: expected array");
            for (std::size_t d = 0; d < t["depends_on"].size(); ++d) {
                const auto& dep = t["depends_on"][d];
                if (!dep.is_string())
                    throw violation(where + ".depends_on[" + std::to_string(d) + "]: expected string");
                spec.depends_on.push_back(dep.get<std::string>());
            }
        }
        if (t.contains("unit_hint") && !t["unit_hint"].is_null()) {
            if (!t["unit_hint"].is_string()) throw violation(where + ".unit_hint: expected string or null");
            spec.unit_hint = t["unit_hint"].get<std::string>();
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

Verdict parse_verdict_detail(std::string_view raw) {
    if (auto doc = extract_json_object(raw); doc && doc->contains("verdict")) {
        const auto& v = (*doc)["verdict"];
        std::string reason = doc->value("reason", std::string{});
        if (v.is_boolean()) return {v.get<bool>(), reason, true};
        if (v.is_string()) {
            std::string s = util::to_lower(util::trim(v.get<std::string>()));
            if (s == "true" || s == "false") return {s == "true", reason, true};
        }
    }
    std::string token = util::to_lower(util::trim(raw));
    while (!token.empty() && (token.back() == '.' || token.back() == '`' || token.back() == '"'))
        token.pop_back();
    while (!token.empty() && (token.front() == '`' || token.front() == '"')) token.erase(token.begin());
    if (token == "true" || token == "false") return {token == "true", {}, true};

    spdlog::warn("unparseable verdict treated as false: '{}'", util::truncate(raw, 200, "..."));
    return {false, "unparseable verdict", false};
}

bool parse_verdict(std::string_view raw) { return parse_verdict_detail(raw).value; }

// ---------------------------------------------------------------------------
// Iterative strategies

std::optional<std::string> detect_termination(std::string_view raw, std::string_view literal) {
    if (literal.empty()) return std::nullopt;
    auto pos = raw.find(literal);
    if (pos == std::string_view::npos) return std::nullopt;
    return util::trim(raw.substr(pos + literal.size()));
}

Message make_observation(std::string_view content, Origin origin) {
    std::string body = util::trim(content);
    if (body.empty()) body = "Continue";
    return Message::user("Observation: " + body, origin);
}

AgentRef parse_next_mention(std::string_view stage_text, const std::vector<std::string>& roster) {
    auto valid_names = [&] {
        std::string names = "@Self, @HumanProxy";
        for (const auto& r : roster) names += ", @" + r;
        return names;
    };
    auto at = stage_text.find('@');
    while (at != std::string_view::npos) {
        std::size_t end = at + 1;
        while (end < stage_text.size() &&
               (std::isalnum(static_cast<unsigned char>(stage_text[end])) || stage_text[end] == '_' ||
                stage_text[end] == '-'))
            ++end;
        std::string_view token = stage_text.substr(at + 1, end - at - 1);
        if (!token.empty()) {
            if (util::iequals(token, "Self")) return AgentRef::self();
            if (util::iequals(token, "HumanProxy")) return AgentRef::human();
            for (const auto& name : roster) {
                if (util::iequals(token, name)) return AgentRef::named(name);
            }
            throw Error(Errc::UnknownAgent,
                        "'@" + std::string(token) + "' is not an available agent. Valid names: " + valid_names());
        }
        at = stage_text.find('@', end);
    }
    throw Error(Errc::NoMention,
                "the Next stage must name the next agent with @ notation. Valid names: " + valid_names());
}

StageSequence conv_sequence() { return StageSequence::conv_plan_react(); }

namespace {

/// Label of a stage header at the start of `line`, if any, plus the offset of
/// the content after the colon. The longest matching label wins.
std::optional<std::pair<std::string, std::size_t>> match_header(std::string_view line,
                                                                const std::vector<std::string>& labels) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::string_view rest = line.substr(i);
    std::optional<std::pair<std::string, std::size_t>> best;
    std::size_t best_len = 0;
    for (const auto& label : labels) {
        std::string compact;
        for (char c : label) {
            if (c != ' ') compact.push_back(c);
        }
        for (const std::string& variant : {label, compact}) {
            if (variant.size() <= best_len || !util::starts_with_icase(rest, variant)) continue;
            std::size_t j = variant.size();
            while (j < rest.size() && (rest[j] == ' ' || rest[j] == '\t')) ++j;
            if (j < rest.size() && rest[j] == ':') {
                best = {{label, i + j + 1}};
                best_len = variant.size();
            }
        }
    }
    return best;
}

ToolCall parse_action(std::string_view text) {
    auto doc = extract_json_object(text);
    if (!doc)
        throw Error(Errc::MalformedAction,
                    "the Action stage is not a JSON object: '" + util::truncate(text, 200, "...") + "'");
    if (!doc->contains("tool") || !(*doc)["tool"].is_string() ||
        util::trim((*doc)["tool"].get<std::string>()).empty())
        throw Error(Errc::MalformedAction, "the Action object needs a non-empty string field \"tool\"");
    ToolCall call;
    call.tool_name = util::trim((*doc)["tool"].get<std::string>());
    if (doc->contains("input") && !(*doc)["input"].is_null()) {
        if (!(*doc)["input"].is_object())
            throw Error(Errc::MalformedAction, "the Action field \"input\" must be a JSON object");
        call.arguments = (*doc)["input"];
    }
    return call;
}

std::string normalized_action(const ToolCall& call) {
    return nlohmann::json{{"tool", call.tool_name}, {"input", call.arguments}}.dump();
}

StepOutput parse_step_impl(std::string_view raw, const StageSequence& sequence, const StepOptions& options,
                           bool mention_fallback) {
    StepOutput out;
    out.terminal = detect_termination(raw, options.termination_literal);
    std::string_view body = raw;
    if (out.terminal) body = raw.substr(0, raw.find(options.termination_literal));

    const auto labels = sequence.model_stages();
    auto header_labels = labels;
    header_labels.emplace_back(stage::Observation);

    std::map<std::string, std::string> found;
    std::optional<std::string> current;
    std::string buffer;
    auto flush = [&] {
        if (!current) return;
        std::string content = util::trim(buffer);
        if (!content.empty()) found[*current] = std::move(content);
        current.reset();
        buffer.clear();
    };
    for (const auto& line : util::split_lines(body)) {
        auto header = match_header(line, header_labels);
        if (header) {
            if (header->first == stage::Observation || found.count(header->first) ||
                (current && *current == header->first))
                break;
            flush();
            current = header->first;
            buffer = line.substr(header->second);
        } else if (current) {
            buffer += "\n" + line;
        }
    }
    flush();

    if (!out.terminal) {
        std::vector<std::string> missing;
        for (const auto& label : labels) {
            if (label != stage::Action && !found.count(label)) missing.push_back(label);
        }
        if (!missing.empty()) {
            std::string names;
            for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
            throw Error(Errc::MissingStage, "missing required stage(s): " + names);
        }
    }

    bool fell_back = false;
    if (sequence.conversational() && found.count(std::string(stage::Next))) {
        try {
            out.next_agent = parse_next_mention(found[std::string(stage::Next)], options.roster);
        } catch (const Error&) {
            if (out.terminal) {
                // a terminal reply does not need a valid handoff
            } else if (mention_fallback) {
                out.next_agent = AgentRef::self();
                found[std::string(stage::Next)] = "@Self";
                fell_back = true;
            } else {
                throw;
            }
        }
    }

    const bool acting_self = !sequence.conversational() ||
                             (out.next_agent && out.next_agent->kind == AgentRef::Kind::Self);
    const std::string action_key(stage::Action);
    if (!out.terminal && acting_self && sequence.has(stage::Action)) {
        if (found.count(action_key)) {
            out.action = parse_action(found[action_key]);
            found[action_key] = normalized_action(*out.action);
        } else if (!fell_back) {
            throw Error(Errc::MissingStage, "missing required stage(s): Action");
        }
    } else {
        found.erase(action_key);
    }

    std::string revised;
    for (const auto& label : labels) {
        auto it = found.find(label);
        if (it == found.end()) continue;
        if (!revised.empty()) revised += "\n";
        revised += label + ": " + it->second;
    }
    if (out.terminal) {
        if (!revised.empty()) revised += "\n";
        revised += options.termination_literal;
        if (!out.terminal->empty()) revised += " " + *out.terminal;
    }
    out.stages = std::move(found);
    out.revised = std::move(revised);
    return out;
}

std::vector<std::string> stage_tags_of(const StepOutput& out, const StageSequence& sequence) {
    std::vector<std::string> tags;
    for (const auto& label : sequence.model_stages()) {
        if (out.stages.count(label)) tags.push_back(label);
    }
    return tags;
}

std::string corrective_message(const Error& e) {
    switch (e.code()) {
    case Errc::MissingStage:
        return "Your previous response could not be used: " + std::string(e.what()) +
               ". Respond again and start every stage on its own line with its label and a colon.";
    case Errc::MalformedAction:
        return "Your previous response could not be used: " + std::string(e.what()) +
               R"(. The Action must be a JSON object {"tool": "<tool name>", "input": {...}}. Respond again.)";
    default:
        return "Your previous response could not be used: " + std::string(e.what()) +
               ". Respond again with a valid Next stage.";
    }
}

} // namespace

StepOutput parse_step(std::string_view raw, const StageSequence& sequence, const StepOptions& options) {
    return parse_step_impl(raw, sequence, options, false);
}

StepOutput step_iterative(const StageSequence& sequence, ShortMemory& memory, ChatBackend& backend,
                          const StepOptions& options) {
    if (memory.size() < 2 || memory.messages().front().role != Role::System)
        throw Error(Errc::InvalidArgument, "short memory must start with a system message and an instruction");

    bool used_missing = false;
    bool used_action = false;
    bool used_mention = false;
    bool mention_fallback = false;

    for (;;) {
        ChatRequest request;
        request.messages = memory.messages();
        request.temperature = options.call.temperature;
        request.max_tokens = options.call.max_tokens;
        request.tag = options.call.tag;
        if (sequence.has(stage::Observation)) request.stop_sequences = {"\nObservation:"};
        const std::string raw = backend.chat(request);

        std::optional<std::string> correction;
        while (!correction) {
            try {
                StepOutput out = parse_step_impl(raw, sequence, options, mention_fallback);
                memory.append(Message::assistant(out.revised, stage_tags_of(out, sequence)));
                return out;
            } catch (const Error& e) {
                bool* used = nullptr;
                switch (e.code()) {
                case Errc::MissingStage: used = &used_missing; break;
                case Errc::MalformedAction: used = &used_action; break;
                case Errc::UnknownAgent:
                case Errc::NoMention:
                    if (used_mention) {
                        mention_fallback = true;
                        continue;
                    }
                    used = &used_mention;
                    break;
                default: throw;
                }
                if (*used) throw;
                *used = true;
                correction = corrective_message(e);
            }
        }
        std::string bad = util::trim(raw);
        memory.append(Message::assistant(bad.empty() ? "(empty response)" : bad));
        memory.append(Message::user(*correction, Origin::Framework));
    }
}

} // namespace agentflow
