// SPDX-License-Identifier: Apache-2.0
#include "agentflow/agents.hpp"

#include "agentflow/error.hpp"
#include "agentflow/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <future>
#include <set>

namespace agentflow {

std::string_view to_string(Topology topology) {
    switch (topology) {
    case Topology::Independent: return "independent";
    case Topology::Sequential: return "sequential";
    case Topology::Joint: return "joint";
    case Topology::Hierarchical: return "hierarchical";
    case Topology::Broadcast: return "broadcast";
    }
    return "independent";
}

Topology topology_from_string(std::string_view text) {
    for (Topology t : {Topology::Independent, Topology::Sequential, Topology::Joint, Topology::Hierarchical,
                       Topology::Broadcast}) {
        if (util::iequals(to_string(t), text)) return t;
    }
    throw Error(Errc::ConfigError, "unknown topology '" + std::string(text) + "'");
}

std::string_view to_string(MatcherKind kind) {
    switch (kind) {
    case MatcherKind::Iterative: return "iterative";
    case MatcherKind::Semantic: return "semantic";
    case MatcherKind::Mention: return "mention";
    case MatcherKind::Composite: return "composite";
    }
    return "semantic";
}

MatcherKind matcher_kind_from_string(std::string_view text) {
    for (MatcherKind k : {MatcherKind::Iterative, MatcherKind::Semantic, MatcherKind::Mention, MatcherKind::Composite}) {
        if (util::iequals(to_string(k), text)) return k;
    }
    throw Error(Errc::ConfigError, "unknown matcher '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// AgentUnit

void AgentUnit::validate() const {
    auto fail = [&](const std::string& msg) { throw Error(Errc::ConfigError, "unit '" + name + "': " + msg); };
    if (name.empty()) throw Error(Errc::ConfigError, "agent unit without a name");
    if (agents.empty()) fail("has no agents");
    if (max_iterations == 0) fail("max_iterations must be positive");
    std::set<std::string> names;
    for (const auto& a : agents) {
        if (a.name.empty()) fail("agent without a name");
        const std::string key = util::to_lower(a.name);
        if (key == "self" || key == "humanproxy") fail("agent name '" + a.name + "' is reserved");
        if (!names.insert(key).second) fail("duplicate agent '" + a.name + "'");
        if (a.strategy) a.strategy->validate();
    }
    if (matcher.kind == MatcherKind::Composite && matcher.components.empty()) fail("composite matcher is empty");
    for (const auto& s : sequence) {
        if (!find(s)) fail("sequence names unknown agent '" + s + "'");
    }
    if (topology == Topology::Hierarchical || topology == Topology::Broadcast) {
        auto leads = std::count_if(agents.begin(), agents.end(), [](const AgentSpec& a) { return a.is_lead; });
        if (leads != 1) fail("needs exactly one lead agent");
        for (const auto& a : agents) {
            if (!a.is_lead && a.may_terminate) fail("only the lead may terminate; '" + a.name + "' may_terminate");
        }
        if (topology == Topology::Broadcast && max_rounds == 0) fail("max_rounds must be positive");
    }
}

const AgentSpec* AgentUnit::find(std::string_view agent_name) const {
    for (const auto& a : agents) {
        if (util::iequals(a.name, agent_name)) return &a;
    }
    return nullptr;
}

const AgentSpec* AgentUnit::lead() const {
    for (const auto& a : agents) {
        if (a.is_lead) return &a;
    }
    return nullptr;
}

std::string AgentUnit::profile() const {
    if (!description.empty()) return description;
    std::string out;
    for (const auto& a : agents) out += (out.empty() ? "" : "\n") + a.persona;
    return out;
}

// ---------------------------------------------------------------------------
// Matchers

const AgentUnit& match_unit(const std::vector<AgentUnit>& units, const Task& task, const Embedder& embedder) {
    if (units.empty()) throw Error(Errc::InvalidArgument, "no agent units configured");
    if (units.size() == 1) return units.front();
    if (task.unit_hint) {
        for (const auto& u : units) {
            if (util::iequals(u.name, *task.unit_hint)) return u;
        }
        spdlog::warn("task '{}' names unknown unit '{}'; matching by description", task.id, *task.unit_hint);
    }
    EmbeddingVector q = embedder.embed(task.description);
    const AgentUnit* best = nullptr;
    double best_score = 0.0;
    for (const auto& u : units) {
        double s = cosine(embedder.embed(u.profile()), q);
        if (!best || s > best_score) {
            best = &u;
            best_score = s;
        }
    }
    return *best;
}

const AgentSpec& match_iterative(const AgentUnit& unit, std::size_t index) {
    if (unit.sequence.empty()) throw Error(Errc::EmptySequence, "unit '" + unit.name + "' has no agent sequence");
    const std::string& name = unit.sequence[index % unit.sequence.size()];
    const AgentSpec* a = unit.find(name);
    if (!a) throw Error(Errc::UnknownAgent, "sequence names unknown agent '" + name + "'");
    return *a;
}

const AgentSpec& match_semantic(const AgentUnit& unit, std::string_view task_description, const Embedder& embedder) {
    if (unit.agents.empty()) throw Error(Errc::InvalidArgument, "unit '" + unit.name + "' has no agents");
    EmbeddingVector q = embedder.embed(task_description);
    const AgentSpec* best = nullptr;
    double best_score = 0.0;
    for (const auto& a : unit.agents) {
        double s = cosine(embedder.embed(a.persona), q);
        if (!best || s > best_score) {
            best = &a;
            best_score = s;
        }
    }
    return *best;
}

MentionTarget match_mention(const AgentUnit& unit, const StepOutput& step, const AgentSpec& current) {
    if (!step.next_agent) throw Error(Errc::NoMention, "step has no Next mention");
    switch (step.next_agent->kind) {
    case AgentRef::Kind::Self: return {&current};
    case AgentRef::Kind::HumanProxy: return {nullptr};
    case AgentRef::Kind::Named:
        if (const AgentSpec* a = unit.find(step.next_agent->name)) return {a};
        throw Error(Errc::UnknownAgent, "unit '" + unit.name + "' has no agent '" + step.next_agent->name + "'");
    }
    return {&current};
}

// ---------------------------------------------------------------------------
// FeedbackHub / PauseGate

void FeedbackHub::post(const std::string& task_id, std::string content) {
    std::lock_guard lock(mutex_);
    inbox_[task_id].push_back(std::move(content));
}

std::vector<std::string> FeedbackHub::take(const std::string& task_id) {
    std::lock_guard lock(mutex_);
    auto it = inbox_.find(task_id);
    if (it == inbox_.end()) return {};
    auto out = std::move(it->second);
    inbox_.erase(it);
    return out;
}

void FeedbackHub::open_request(const std::string& task_id, std::string question) {
    std::lock_guard lock(mutex_);
    requests_[task_id] = Request{std::move(question), std::nullopt};
}

std::optional<std::string> FeedbackHub::await_response(const std::string& task_id,
                                                       std::optional<std::chrono::milliseconds> timeout) {
    std::unique_lock lock(mutex_);
    auto ready = [&] {
        auto it = requests_.find(task_id);
        return cancelled_ || it == requests_.end() || it->second.response.has_value();
    };
    if (timeout) {
        cv_.wait_for(lock, *timeout, ready);
    } else {
        cv_.wait(lock, ready);
    }
    auto it = requests_.find(task_id);
    if (it == requests_.end()) return std::nullopt;
    auto response = it->second.response;
    requests_.erase(it);
    return response;
}

bool FeedbackHub::respond(const std::string& task_id, std::string content) {
    {
        std::lock_guard lock(mutex_);
        auto it = requests_.find(task_id);
        if (it == requests_.end() || it->second.response) return false;
        it->second.response = std::move(content);
    }
    cv_.notify_all();
    return true;
}

std::map<std::string, std::string> FeedbackHub::outstanding() const {
    std::lock_guard lock(mutex_);
    std::map<std::string, std::string> out;
    for (const auto& [id, r] : requests_) {
        if (!r.response) out[id] = r.question;
    }
    return out;
}

void FeedbackHub::cancel() {
    {
        std::lock_guard lock(mutex_);
        cancelled_ = true;
    }
    cv_.notify_all();
}

void PauseGate::pause() {
    std::lock_guard lock(mutex_);
    paused_ = true;
}

void PauseGate::resume() {
    {
        std::lock_guard lock(mutex_);
        paused_ = false;
    }
    cv_.notify_all();
}

bool PauseGate::paused() const {
    std::lock_guard lock(mutex_);
    return paused_;
}

void PauseGate::wait() {
    std::unique_lock lock(mutex_);
    ++waiting_;
    cv_.notify_all();
    cv_.wait(lock, [&] { return !paused_ || cancelled_; });
    --waiting_;
    if (cancelled_) throw Error(Errc::WorkflowFailed, "workflow cancelled");
}

std::size_t PauseGate::waiting() const {
    std::lock_guard lock(mutex_);
    return waiting_;
}

void PauseGate::cancel() {
    {
        std::lock_guard lock(mutex_);
        cancelled_ = true;
    }
    cv_.notify_all();
}

// ---------------------------------------------------------------------------
// Executor

std::string initial_task_message(const Task& task, const std::vector<ScoredEpisode>& retrieved,
                                 std::size_t episode_chars) {
    std::string out = "Task: " + task.description;
    if (!task.dependency_results.empty()) {
        out += "\n\nResults of prerequisite tasks:";
        for (const auto& [id, result] : task.dependency_results) out += "\n[" + id + "] " + result;
    }
    if (!retrieved.empty()) {
        out += "\n\nRelevant prior results:";
        for (const auto& r : retrieved) {
            out += "\n[" + r.episode.task_id + "] " + r.episode.description + "\n" +
                   util::truncate(r.episode.result, episode_chars, "...");
        }
    }
    return out;
}

namespace {

class Runner {
public:
    Runner(const AgentUnit& unit, const Task& task, const ExecutionContext& ctx)
        : unit_(unit), task_(task), ctx_(ctx) {
        trace_.task_id = task.id;
    }

    ~Runner() {
        for (auto& [name, state] : states_) state.memory.purge();
    }

    std::string run(const std::string& initial) {
        initial_ = initial;
        switch (unit_.topology) {
        case Topology::Independent: return run_independent();
        case Topology::Sequential: return run_sequential();
        case Topology::Joint: return run_joint();
        case Topology::Hierarchical: return run_hierarchical();
        case Topology::Broadcast: return run_broadcast();
        }
        throw Error(Errc::ConfigError, "unknown topology");
    }

    ExecutionTrace& trace() { return trace_; }

private:
    struct AgentState {
        ShortMemory memory;
        std::vector<std::string> allowed;
        std::vector<Message> inbox;
    };

    struct Turn {
        StepOutput out;
        std::optional<std::string> tool_result;
        std::size_t trace_index = 0;
    };

    void emit(EventKind kind, nlohmann::json payload) {
        if (ctx_.events) ctx_.events->append(kind, std::move(payload));
    }

    bool multi_agent() const { return unit_.topology != Topology::Independent && unit_.agents.size() > 1; }

    bool can_finish(const AgentSpec& agent) const {
        if (unit_.topology == Topology::Hierarchical || unit_.topology == Topology::Broadcast) return agent.is_lead;
        return agent.may_terminate;
    }

    std::vector<std::string> roster(const AgentSpec& agent) const {
        std::vector<std::string> out;
        if (!multi_agent()) return out;
        for (const auto& a : unit_.agents) {
            if (a.name != agent.name) out.push_back(a.name);
        }
        return out;
    }

    std::string agents_block(const AgentSpec& agent) const {
        if (!agent.strategy || !agent.strategy->conversational()) return "";
        std::string out = "- @Self: continue working on the task yourself";
        for (const auto& a : unit_.agents) {
            if (a.name == agent.name || !multi_agent()) continue;
            auto lines = util::split_lines(util::trim(a.persona));
            out += "\n- @" + a.name + ": " + (lines.empty() ? std::string() : lines.front());
        }
        out += "\n- @HumanProxy: ask the human operator";
        return out;
    }

    AgentState& state(const AgentSpec& agent) {
        std::lock_guard lock(states_mutex_);
        auto it = states_.find(agent.name);
        if (it != states_.end()) return it->second;

        std::vector<ToolSpec> tools;
        if (!agent.toolbox.empty()) {
            if (!ctx_.toolboxes || !ctx_.toolboxes->count(agent.toolbox))
                throw Error(Errc::ConfigError, "agent '" + agent.name + "' uses unknown toolbox '" + agent.toolbox + "'");
            tools = refine(*ctx_.toolboxes->at(agent.toolbox), task_.description, agent.refiner, *ctx_.embedder);
        }
        SystemPromptInputs inputs;
        inputs.persona = agent.persona;
        inputs.objective = task_.description;
        inputs.tools_block = tools_block(tools);
        inputs.agents_block = agents_block(agent);
        if (agent.strategy) {
            inputs.stage_format = stage_format_instructions(*agent.strategy);
            inputs.termination_instruction =
                can_finish(agent) ? termination_instruction(ctx_.termination_literal)
                                  : "You do not give the final answer; report what you found instead.";
        }
        static const TemplateSet defaults;
        const TemplateSet& templates = ctx_.templates ? *ctx_.templates : defaults;
        const std::string system =
            render_system(templates.get(agent.strategy ? "executor" : "basic"), inputs);

        AgentState st{ShortMemory(ctx_.memory_capacity), {}, {}};
        for (const auto& t : tools) st.allowed.push_back(t.name);
        st.memory.append(Message::system(system));
        st.memory.append(Message::user(initial_, Origin::Framework));
        return states_.emplace(agent.name, std::move(st)).first->second;
    }

    void observe(const AgentSpec& agent, AgentState& st, const std::string& content, Origin origin,
                 std::string_view source) {
        st.memory.append(make_observation(content, origin));
        emit(EventKind::ObservationAdded,
             {{"task_id", task_.id}, {"agent", agent.name}, {"source", source}, {"content", st.memory.back().content}});
    }

    /// Pause gate, then pending feedback and messages; "Continue" when nothing
    /// else follows the agent's last reply.
    void deliver_pending(const AgentSpec& agent, AgentState& st) {
        if (ctx_.gate) ctx_.gate->wait();
        if (ctx_.feedback) {
            for (auto& fb : ctx_.feedback->take(task_.id)) observe(agent, st, fb, Origin::Human, "feedback");
        }
        for (auto& m : st.inbox) st.memory.append(std::move(m));
        st.inbox.clear();
        if (st.memory.back().role == Role::Assistant) observe(agent, st, "", Origin::Framework, "continue");
    }

    StepOutput step(const AgentSpec& agent, AgentState& st) {
        CallOptions call{agent.temperature, agent.max_tokens, {task_.id, agent.name}};
        if (agent.strategy) {
            StepOptions opts;
            opts.termination_literal = ctx_.termination_literal;
            opts.roster = roster(agent);
            opts.call = call;
            return step_iterative(*agent.strategy, st.memory, *ctx_.backend, opts);
        }
        ChatRequest request;
        request.messages = st.memory.messages();
        request.temperature = call.temperature;
        request.max_tokens = call.max_tokens;
        request.tag = call.tag;
        std::string text = util::trim(ctx_.backend->chat(request));
        StepOutput out;
        auto term = detect_termination(text, ctx_.termination_literal);
        out.terminal = term ? *term : text;
        out.revised = text.empty() ? "(empty response)" : text;
        st.memory.append(Message::assistant(out.revised));
        return out;
    }

    void check_budget(std::size_t steps) const {
        if (iteration_ + steps > unit_.max_iterations)
            throw Error(Errc::MaxIterationsExceeded, "task '" + task_.id + "' did not finish within " +
                                                         std::to_string(unit_.max_iterations) + " steps");
    }

    /// One agent step. Tool actions are executed when the step asks for them.
    Turn turn(const AgentSpec& agent, std::size_t round = 0) {
        check_budget(1);
        AgentState& st = state(agent);
        deliver_pending(agent, st);
        const std::size_t iteration = iteration_++;
        emit(EventKind::AgentSelected, {{"task_id", task_.id}, {"agent", agent.name}, {"iteration", iteration}});
        Turn t;
        t.out = step(agent, st);
        TraceStep ts;
        ts.iteration = iteration;
        ts.agent = agent.name;
        ts.summary = t.out.revised;
        ts.terminal = t.out.terminal.has_value();
        ts.next = t.out.next_agent ? to_string(*t.out.next_agent) : "";
        ts.round = round;
        if (t.out.action && !t.out.terminal) {
            ts.tool = t.out.action->tool_name;
            ts.observation_source = "tool";
            t.tool_result = invoke_tool(agent, st, *t.out.action);
        }
        t.trace_index = trace_.steps.size();
        trace_.steps.push_back(std::move(ts));
        return t;
    }

    std::string invoke_tool(const AgentSpec& agent, AgentState& st, const ToolCall& call) {
        emit(EventKind::ToolInvoked,
             {{"task_id", task_.id}, {"agent", agent.name}, {"tool", call.tool_name}, {"arguments", call.arguments}});
        const std::string result = st.allowed.empty()
                                       ? "Error: unknown tool '" + call.tool_name + "'; available: (none)"
                                       : ctx_.toolboxes->at(agent.toolbox)->invoke(call, st.allowed);
        observe(agent, st, result, Origin::ToolResult, "tool");
        return result;
    }

    void ask_human(const AgentSpec& agent, const Turn& t) {
        AgentState& st = state(agent);
        auto dialog = t.out.stages.find(std::string(stage::DialogThought));
        std::string question = dialog != t.out.stages.end() ? dialog->second : t.out.revised;
        emit(EventKind::HumanRequested, {{"task_id", task_.id}, {"agent", agent.name}, {"question", question}});
        trace_.steps[t.trace_index].observation_source = "human";
        std::optional<std::string> response;
        if (ctx_.feedback) {
            ctx_.feedback->open_request(task_.id, question);
            response = ctx_.feedback->await_response(task_.id, ctx_.human_timeout);
        }
        if (response) {
            emit(EventKind::HumanResponded, {{"task_id", task_.id}, {"agent", agent.name}, {"content", *response}});
            observe(agent, st, *response, Origin::Human, "human");
        } else {
            observe(agent, st, "", Origin::Framework, "continue");
        }
    }

    std::string message_body(const AgentSpec& sender, const Turn& t) const {
        std::string body;
        auto dialog = t.out.stages.find(std::string(stage::DialogThought));
        if (dialog != t.out.stages.end()) {
            body = dialog->second;
        } else {
            const auto labels = sender.strategy ? sender.strategy->model_stages() : std::vector<std::string>{};
            for (const auto& label : labels) {
                if (label == stage::Plan || label == stage::Next) continue;
                auto it = t.out.stages.find(label);
                if (it != t.out.stages.end()) body += (body.empty() ? "" : "\n") + label + ": " + it->second;
            }
        }
        if (t.out.terminal && !t.out.terminal->empty())
            body += (body.empty() ? "" : "\n") + std::string("Result: ") + *t.out.terminal;
        if (t.tool_result) body += (body.empty() ? "" : "\n\n") + std::string("Tool result:\n") + *t.tool_result;
        return body.empty() ? "(no message)" : body;
    }

    Message handoff(const AgentSpec& sender, const Turn& t) const {
        return Message::user("Message from " + sender.name + ":\n" + message_body(sender, t) + "\n\nTask: " +
                                 task_.description,
                             Origin::Framework);
    }

    void send(const AgentSpec& to, Message m) { state(to).inbox.push_back(std::move(m)); }

    std::string finish(const Turn& t) { return util::trim(*t.out.terminal); }

    bool finished(const AgentSpec& agent, const Turn& t) const { return t.out.terminal && can_finish(agent); }

    const AgentSpec& first_agent() {
        const auto& m = unit_.matcher;
        std::vector<MatcherKind> chain = m.kind == MatcherKind::Composite ? m.components
                                                                          : std::vector<MatcherKind>{m.kind};
        for (MatcherKind k : chain) {
            if (k == MatcherKind::Iterative && !unit_.sequence.empty()) return match_iterative(unit_, 0);
            if (k == MatcherKind::Semantic) return match_semantic(unit_, task_.description, *ctx_.embedder);
        }
        return unit_.agents.front();
    }

    /// Next agent after `t` by the unit's matcher chain; nullptr means the human proxy.
    const AgentSpec* next_agent(const AgentSpec& current, const Turn& t) {
        const auto& m = unit_.matcher;
        std::vector<MatcherKind> chain = m.kind == MatcherKind::Composite ? m.components
                                                                          : std::vector<MatcherKind>{m.kind};
        for (MatcherKind k : chain) {
            switch (k) {
            case MatcherKind::Mention:
                if (t.out.next_agent) return match_mention(unit_, t.out, current).agent;
                return &current;
            case MatcherKind::Iterative:
                if (!unit_.sequence.empty()) return &match_iterative(unit_, iteration_);
                break;
            case MatcherKind::Semantic:
                return &match_semantic(unit_, task_.description, *ctx_.embedder);
            case MatcherKind::Composite:
                break;
            }
        }
        return &current;
    }

    bool wants_human(const Turn& t) const {
        return !t.out.terminal && t.out.next_agent && t.out.next_agent->kind == AgentRef::Kind::HumanProxy;
    }

    std::string run_independent() {
        const AgentSpec& agent = first_agent();
        for (;;) {
            Turn t = turn(agent);
            if (finished(agent, t)) return finish(t);
            if (wants_human(t)) ask_human(agent, t);
        }
    }

    std::string run_sequential() {
        for (std::size_t i = 0;; ++i) {
            const AgentSpec& agent = unit_.sequence.empty() ? unit_.agents[i % unit_.agents.size()]
                                                            : match_iterative(unit_, i);
            Turn t = turn(agent);
            if (finished(agent, t)) return finish(t);
            if (wants_human(t)) ask_human(agent, t);
            const AgentSpec& next = unit_.sequence.empty() ? unit_.agents[(i + 1) % unit_.agents.size()]
                                                           : match_iterative(unit_, i + 1);
            if (next.name != agent.name) {
                send(next, handoff(agent, t));
                if (!t.tool_result) trace_.steps[t.trace_index].observation_source = "handoff";
            }
        }
    }

    std::string run_joint() {
        const AgentSpec* current = &first_agent();
        for (;;) {
            Turn t = turn(*current);
            if (finished(*current, t)) return finish(t);
            if (t.tool_result) continue;
            if (wants_human(t)) {
                ask_human(*current, t);
                continue;
            }
            const AgentSpec* next = t.out.terminal ? current : next_agent(*current, t);
            if (next && next->name != current->name) {
                send(*next, handoff(*current, t));
                trace_.steps[t.trace_index].observation_source = "handoff";
                current = next;
            }
        }
    }

    /// Non-lead turn whose outcome is reported back to the lead.
    Message report(const AgentSpec& member, std::size_t round, const Message& inbound) {
        send(member, inbound);
        Turn r = turn(member, round);
        trace_.steps[r.trace_index].observation_source = r.tool_result ? "tool" : "report";
        if (wants_human(r)) ask_human(member, r);
        return Message::user("Message from " + member.name + ":\n" + message_body(member, r), Origin::Framework);
    }

    std::string run_hierarchical() {
        const AgentSpec& lead = *unit_.lead();
        for (;;) {
            Turn t = turn(lead);
            if (finished(lead, t)) return finish(t);
            if (t.tool_result) continue;
            if (wants_human(t)) {
                ask_human(lead, t);
                continue;
            }
            const AgentSpec* member = t.out.next_agent && t.out.next_agent->kind == AgentRef::Kind::Named
                                          ? unit_.find(t.out.next_agent->name)
                                          : nullptr;
            if (!member || member->is_lead) continue;
            check_budget(2);
            trace_.steps[t.trace_index].observation_source = "handoff";
            send(lead, report(*member, 0, handoff(lead, t)));
        }
    }

    std::string run_broadcast() {
        const AgentSpec& lead = *unit_.lead();
        std::vector<const AgentSpec*> members;
        for (const auto& a : unit_.agents) {
            if (!a.is_lead) members.push_back(&a);
        }
        std::size_t rounds = 0;
        for (;;) {
            Turn t = turn(lead, rounds + 1);
            if (finished(lead, t)) {
                trace_.steps[t.trace_index].round = 0;
                return finish(t);
            }
            if (t.tool_result || wants_human(t)) {
                trace_.steps[t.trace_index].round = 0;
                if (wants_human(t)) ask_human(lead, t);
                continue;
            }
            if (rounds == unit_.max_rounds)
                throw Error(Errc::MaxIterationsExceeded, "task '" + task_.id + "' exceeded " +
                                                             std::to_string(unit_.max_rounds) + " broadcast rounds");
            check_budget(members.size() + 1);
            ++rounds;
            trace_.steps[t.trace_index].observation_source = "broadcast";
            const Message inbound = handoff(lead, t);
            std::vector<Message> replies;
            if (unit_.parallel_fanout && members.size() > 1) {
                replies = fan_out_parallel(members, rounds, inbound);
            } else {
                for (const AgentSpec* m : members) replies.push_back(report(*m, rounds, inbound));
            }
            std::string joined;
            for (const auto& r : replies) joined += (joined.empty() ? "" : "\n\n") + r.content;
            send(lead, Message::user(joined, Origin::Framework));
        }
    }

    /// Member steps run concurrently; trace entries keep unit order.
    std::vector<Message> fan_out_parallel(const std::vector<const AgentSpec*>& members, std::size_t round,
                                          const Message& inbound) {
        for (const AgentSpec* m : members) {
            AgentState& st = state(*m);
            st.inbox.push_back(inbound);
            deliver_pending(*m, st);
        }
        const std::size_t base = iteration_;
        iteration_ += members.size();
        std::vector<std::future<StepOutput>> futures;
        for (std::size_t i = 0; i < members.size(); ++i) {
            const AgentSpec* m = members[i];
            emit(EventKind::AgentSelected, {{"task_id", task_.id}, {"agent", m->name}, {"iteration", base + i}});
            AgentState* st = &state(*m);
            futures.push_back(std::async(std::launch::async, [this, m, st] { return step(*m, *st); }));
        }
        std::vector<Message> replies;
        for (std::size_t i = 0; i < members.size(); ++i) {
            const AgentSpec& m = *members[i];
            Turn r;
            r.out = futures[i].get();
            TraceStep ts;
            ts.iteration = base + i;
            ts.agent = m.name;
            ts.summary = r.out.revised;
            ts.terminal = r.out.terminal.has_value();
            ts.next = r.out.next_agent ? to_string(*r.out.next_agent) : "";
            ts.round = round;
            ts.observation_source = "report";
            if (r.out.action && !r.out.terminal) {
                ts.tool = r.out.action->tool_name;
                ts.observation_source = "tool";
                r.tool_result = invoke_tool(m, state(m), *r.out.action);
            }
            trace_.steps.push_back(std::move(ts));
            replies.push_back(Message::user("Message from " + m.name + ":\n" + message_body(m, r), Origin::Framework));
        }
        return replies;
    }

    const AgentUnit& unit_;
    const Task& task_;
    const ExecutionContext& ctx_;
    std::string initial_;
    std::mutex states_mutex_;
    std::map<std::string, AgentState> states_;
    ExecutionTrace trace_;
    std::size_t iteration_ = 0;
};

} // namespace

TaskOutcome execute_task(const AgentUnit& unit, const Task& task, const ExecutionContext& ctx) {
    if (!ctx.backend || !ctx.embedder) throw Error(Errc::InvalidArgument, "execution context needs a backend and embedder");
    unit.validate();

    std::vector<ScoredEpisode> retrieved;
    if (ctx.episodes && ctx.episodic_k > 0) {
        QueryContext qc{ctx.workflow_id, task.id, {task.depends_on.begin(), task.depends_on.end()}};
        retrieved = ctx.episodes->query(ctx.embedder->embed(task.description), ctx.scope, qc, ctx.episodic_k);
    }

    auto store = [&](const std::string& result, bool success) {
        if (!ctx.episodes) return;
        Episode e;
        e.workflow_id = ctx.workflow_id;
        e.task_id = task.id;
        e.description = task.description;
        e.result = result;
        e.dependency_ids.assign(task.depends_on.begin(), task.depends_on.end());
        e.success = success;
        e.embed_with(*ctx.embedder);
        ctx.episodes->store(std::move(e));
    };

    Runner runner(unit, task, ctx);
    TaskOutcome outcome;
    try {
        outcome.result = runner.run(initial_task_message(task, retrieved, ctx.episode_chars));
    } catch (const std::exception& e) {
        store(e.what(), false);
        throw;
    }
    store(outcome.result, true);
    outcome.trace = std::move(runner.trace());
    return outcome;
}

} // namespace agentflow
