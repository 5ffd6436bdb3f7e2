// SPDX-License-Identifier: Apache-2.0
#include "agentflow/coordinator.hpp"

#include "agentflow/error.hpp"
#include "agentflow/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <thread>

namespace agentflow {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Phase phase) {
    switch (phase) {
    case Phase::Planning: return "planning";
    case Phase::Executing: return "executing";
    case Phase::Verifying: return "verifying";
    case Phase::Replanning: return "replanning";
    case Phase::Done: return "done";
    case Phase::Failed: return "failed";
    case Phase::Paused: return "paused";
    }
    return "planning";
}

Phase phase_from_string(std::string_view text) {
    for (Phase p : {Phase::Planning, Phase::Executing, Phase::Verifying, Phase::Replanning, Phase::Done,
                    Phase::Failed, Phase::Paused}) {
        if (util::iequals(to_string(p), text)) return p;
    }
    throw Error(Errc::InvalidArgument, "unknown phase '" + std::string(text) + "'");
}

std::string_view to_string(FeedbackEnvelope::Kind kind) {
    return kind == FeedbackEnvelope::Kind::IncidentalObservation ? "IncidentalObservation" : "HumanProxyResponse";
}

FeedbackEnvelope::Kind feedback_kind_from_string(std::string_view text) {
    if (util::iequals(text, "IncidentalObservation") || util::iequals(text, "incidental"))
        return FeedbackEnvelope::Kind::IncidentalObservation;
    if (util::iequals(text, "HumanProxyResponse") || util::iequals(text, "human"))
        return FeedbackEnvelope::Kind::HumanProxyResponse;
    throw Error(Errc::InvalidArgument, "unknown feedback kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Config

void WorkflowConfig::validate() const {
    if (units.empty()) throw Error(Errc::ConfigError, "workflow config has no agent units");
    if (planner.strategy || verifier.strategy)
        throw Error(Errc::ConfigError, "planner and verifier must use the non-iterative strategy");
    if (max_parallel_tasks == 0) throw Error(Errc::ConfigError, "max_parallel_tasks must be positive");
    if (util::trim(termination_literal).empty()) throw Error(Errc::ConfigError, "termination literal is empty");
    for (const auto& u : units) u.validate();
    for (std::size_t i = 0; i < units.size(); ++i) {
        for (std::size_t j = i + 1; j < units.size(); ++j) {
            if (util::iequals(units[i].name, units[j].name))
                throw Error(Errc::ConfigError, "duplicate unit '" + units[i].name + "'");
        }
    }
    if (predefined_plan) TaskQueue::build(*predefined_plan);
}

namespace {

json agent_digest(const AgentSpec& a) {
    json strategy = nullptr;
    if (a.strategy) strategy = json{{"stages", a.strategy->stages}, {"loop_from", a.strategy->loop_from}};
    return json{{"name", a.name},
                {"persona", a.persona},
                {"strategy", strategy},
                {"toolbox", a.toolbox},
                {"refiner",
                 {{"kind", to_string(a.refiner.kind)}, {"k", a.refiner.k}, {"min_similarity", a.refiner.min_similarity}}},
                {"temperature", a.temperature},
                {"max_tokens", a.max_tokens},
                {"may_terminate", a.may_terminate},
                {"is_lead", a.is_lead}};
}

} // namespace

json config_digest_source(const WorkflowConfig& c) {
    json units = json::array();
    for (const auto& u : c.units) {
        json agents = json::array();
        for (const auto& a : u.agents) agents.push_back(agent_digest(a));
        json components = json::array();
        for (auto k : u.matcher.components) components.push_back(to_string(k));
        units.push_back({{"name", u.name},
                         {"description", u.description},
                         {"topology", to_string(u.topology)},
                         {"matcher", {{"kind", to_string(u.matcher.kind)}, {"components", components}}},
                         {"sequence", u.sequence},
                         {"max_iterations", u.max_iterations},
                         {"max_rounds", u.max_rounds},
                         {"parallel_fanout", u.parallel_fanout},
                         {"agents", agents}});
    }
    json plan = nullptr;
    if (c.predefined_plan) plan = *c.predefined_plan;
    return json{{"name", c.name},
                {"planner", agent_digest(c.planner)},
                {"verifier", agent_digest(c.verifier)},
                {"units", units},
                {"max_replans", c.max_replans},
                {"termination_literal", c.termination_literal},
                {"predefined_plan", plan},
                {"max_parallel_tasks", c.max_parallel_tasks},
                {"episodic_k", c.episodic_k},
                {"episode_scope",
                 {{"same_workflow_only", c.episode_scope.same_workflow_only},
                  {"indirect_only", c.episode_scope.indirect_only},
                  {"successful_only", c.episode_scope.successful_only}}},
                {"memory_capacity", c.memory_capacity ? json(*c.memory_capacity) : json()},
                {"human_timeout_ms", c.human_timeout ? json(c.human_timeout->count()) : json()}};
}

std::string config_fingerprint(const WorkflowConfig& config) {
    return util::hex64(util::fnv1a64(config_digest_source(config).dump()));
}

std::vector<TaskSpec> linear_plan(const std::vector<std::string>& rules) {
    std::vector<TaskSpec> out;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "rule-%02zu", i + 1);
        TaskSpec spec{id, rules[i], {}, std::nullopt};
        if (i > 0) spec.depends_on.push_back(out.back().id);
        out.push_back(std::move(spec));
    }
    return out;
}

json to_json(const WorkflowState& s) {
    json history = json::array();
    for (auto p : s.phase_history) history.push_back(to_string(p));
    return json{{"workflow_id", s.workflow_id},
                {"instruction", s.instruction},
                {"queue", s.queue.to_json()},
                {"phase", to_string(s.phase)},
                {"final_result", s.final_result ? json(*s.final_result) : json()},
                {"verdict", s.verdict ? json(*s.verdict) : json()},
                {"verdict_reason", s.verdict_reason},
                {"replan_count", s.replan_count},
                {"failure", s.failure},
                {"phase_history", history}};
}

// ---------------------------------------------------------------------------
// Plan / verify

std::string assemble_final_result(const TaskQueue& queue) {
    const auto sinks = queue.sinks();
    if (sinks.size() == 1) return queue.task(sinks.front()).result.value_or("");
    std::string out;
    for (const auto& id : sinks) {
        if (!out.empty()) out += "\n\n";
        out += "## " + id + "\n" + queue.task(id).result.value_or("");
    }
    return out;
}

std::string planner_user_message(const std::string& instruction, const std::optional<std::string>& failed_result,
                                 const std::string& reason) {
    std::string out = "Instruction: " + instruction;
    if (failed_result) {
        out += "\n\nA previous attempt produced the result below, which was rejected.\n" + *failed_result;
        if (!reason.empty()) out += "\n\nReason: " + reason;
        out += "\n\nProduce a new plan.";
    }
    return out;
}

std::string verifier_user_message(const std::string& instruction, const std::string& final_result) {
    return "Instruction:\n" + instruction + "\n\nFinal result:\n" + final_result;
}

namespace {

std::string units_block(const WorkflowConfig& config) {
    if (config.units.size() < 2) return "";
    std::string out;
    for (const auto& u : config.units) {
        auto lines = util::split_lines(util::trim(u.profile()));
        out += (out.empty() ? "" : "\n") + std::string("- ") + u.name + ": " + (lines.empty() ? "" : lines.front());
    }
    return out + "\nSet unit_hint to the unit best suited for each task.";
}

bool plan_defect(Errc code) {
    switch (code) {
    case Errc::NoJsonFound:
    case Errc::SchemaViolation:
    case Errc::DuplicateId:
    case Errc::UnknownDependency:
    case Errc::CycleDetected:
    case Errc::InvalidArgument: return true;
    default: return false;
    }
}

} // namespace

TaskQueue plan(const std::string& instruction, const WorkflowConfig& config, ChatBackend& backend,
               const TemplateSet& templates, const std::optional<std::string>& failed_result,
               const std::string& reason) {
    SystemPromptInputs inputs;
    inputs.persona = config.planner.persona;
    inputs.objective = "Produce an executable plan for the instruction you are given.";
    inputs.agents_block = units_block(config);
    ChatRequest request;
    request.messages = {Message::system(render_system(templates.get("planner"), inputs)),
                        Message::user(planner_user_message(instruction, failed_result, reason))};
    request.temperature = config.planner.temperature;
    request.max_tokens = config.planner.max_tokens;
    request.tag = {"", config.planner.name.empty() ? "planner" : config.planner.name};

    for (int attempt = 0;; ++attempt) {
        const std::string raw = backend.chat(request);
        try {
            return TaskQueue::build(parse_plan(raw));
        } catch (const Error& e) {
            if (!plan_defect(e.code())) throw;
            if (attempt == 1) throw Error(Errc::WorkflowFailed, std::string("plan rejected twice: ") + e.what());
            std::string bad = util::trim(raw);
            request.messages.push_back(Message::assistant(bad.empty() ? "(empty response)" : bad));
            request.messages.push_back(Message::user("Your plan could not be used: " + std::string(e.what()) +
                                                     ". Respond again with a corrected JSON plan only."));
        }
    }
}

Verdict verify(const std::string& instruction, const std::string& final_result, const WorkflowConfig& config,
               ChatBackend& backend, const TemplateSet& templates) {
    SystemPromptInputs inputs;
    inputs.persona = config.verifier.persona;
    inputs.objective = "Judge whether the final result satisfies the instruction.";
    CallOptions call{config.verifier.temperature, config.verifier.max_tokens,
                     {"", config.verifier.name.empty() ? "verifier" : config.verifier.name}};
    const std::string raw = run_basic(render_system(templates.get("verifier"), inputs),
                                      verifier_user_message(instruction, final_result), backend, call);
    return parse_verdict_detail(raw);
}

// ---------------------------------------------------------------------------
// Workflow

Workflow::Workflow(std::string workflow_id, std::string instruction, WorkflowConfig config, Runtime runtime)
    : config_(std::move(config)), runtime_(std::move(runtime)) {
    config_.validate();
    if (!runtime_.backend) throw Error(Errc::InvalidArgument, "workflow needs a chat backend");
    if (!runtime_.embedder) runtime_.embedder = std::make_shared<HashingEmbedder>();
    episodes_ = runtime_.episodes ? runtime_.episodes : std::make_shared<EpisodicStore>(config_.episodic_store);
    templates_ = runtime_.templates ? runtime_.templates : std::make_shared<TemplateSet>();
    fingerprint_ = config_fingerprint(config_);
    events_ = std::make_unique<EventLog>();
    backend_ = std::make_unique<EventedBackend>(*runtime_.backend, *events_);
    state_.workflow_id = std::move(workflow_id);
    state_.instruction = std::move(instruction);
}

void Workflow::set_phase_locked(Phase phase) {
    state_.phase = phase;
    state_.phase_history.push_back(phase);
    changed_.notify_all();
}

Phase Workflow::phase() const {
    std::lock_guard lock(mutex_);
    return state_.phase;
}

WorkflowState Workflow::state() const {
    std::lock_guard lock(mutex_);
    return state_;
}

std::map<std::string, ExecutionTrace> Workflow::traces() const {
    std::lock_guard lock(mutex_);
    return traces_;
}

std::map<std::string, std::string> Workflow::task_units() const {
    std::lock_guard lock(mutex_);
    return task_units_;
}

void Workflow::set_snapshot_dir(fs::path dir) {
    std::lock_guard lock(mutex_);
    snapshot_dir_ = std::move(dir);
}

WorkflowState Workflow::run() {
    try {
        for (;;) {
            {
                std::lock_guard lock(mutex_);
                if (state_.phase == Phase::Done || state_.phase == Phase::Failed) break;
            }
            if (needs_plan_) {
                std::optional<std::string> failed;
                std::string reason;
                {
                    std::lock_guard lock(mutex_);
                    set_phase_locked(state_.replan_count > 0 ? Phase::Replanning : Phase::Planning);
                    failed = previous_result_;
                    reason = previous_reason_;
                }
                TaskQueue queue;
                try {
                    queue = config_.predefined_plan
                                ? TaskQueue::build(*config_.predefined_plan)
                                : plan(state_.instruction, config_, *backend_, *templates_, failed, reason);
                } catch (const Error& e) {
                    std::lock_guard lock(mutex_);
                    state_.failure = "planning: " + std::string(e.what());
                    set_phase_locked(Phase::Failed);
                    break;
                }
                std::lock_guard lock(mutex_);
                state_.queue = std::move(queue);
                state_.final_result.reset();
                state_.verdict.reset();
                state_.verdict_reason.clear();
                released_.clear();
                traces_.clear();
                task_units_.clear();
                needs_plan_ = false;
                json tasks = state_.queue.specs();
                events_->append(EventKind::PlanCreated, {{"tasks", tasks},
                                                         {"replan_count", state_.replan_count},
                                                         {"predefined", config_.predefined_plan.has_value()}});
                set_phase_locked(Phase::Executing);
            }

            execute_queue();
            if (cancelled_) throw Error(Errc::WorkflowFailed, "workflow cancelled");

            std::string reason;
            std::string final_result;
            bool tasks_failed = false;
            {
                std::lock_guard lock(mutex_);
                if (state_.queue.any_failed()) {
                    tasks_failed = true;
                    for (const auto& [id, t] : state_.queue.tasks()) {
                        if (t.status == TaskStatus::Failed) {
                            reason = "task " + id + " failed: " + t.failure.value_or("");
                            break;
                        }
                    }
                    final_result = reason;
                } else {
                    final_result = assemble_final_result(state_.queue);
                    state_.final_result = final_result;
                    set_phase_locked(Phase::Verifying);
                }
            }

            if (!tasks_failed) {
                Verdict v = verify(state_.instruction, final_result, config_, *backend_, *templates_);
                std::lock_guard lock(mutex_);
                state_.verdict = v.value;
                state_.verdict_reason = v.reason;
                events_->append(EventKind::VerdictIssued, {{"verdict", v.value},
                                                           {"reason", v.reason},
                                                           {"parsed", v.parsed},
                                                           {"replan_count", state_.replan_count}});
                if (v.value) {
                    set_phase_locked(Phase::Done);
                    break;
                }
                reason = v.reason.empty() ? "the verifier rejected the result" : v.reason;
            }

            std::lock_guard lock(mutex_);
            if (state_.replan_count < config_.max_replans) {
                ++state_.replan_count;
                previous_result_ = final_result;
                previous_reason_ = reason;
                needs_plan_ = true;
                continue;
            }
            state_.failure = tasks_failed ? "executing: " + reason : "verifying: " + reason;
            set_phase_locked(Phase::Failed);
            break;
        }
    } catch (const std::exception& e) {
        std::lock_guard lock(mutex_);
        state_.failure = std::string(to_string(state_.phase)) + ": " + e.what();
        set_phase_locked(Phase::Failed);
    }
    std::lock_guard lock(mutex_);
    if (!snapshot_dir_.empty()) write_snapshot_locked("final");
    return state_;
}

void Workflow::execute_queue() {
    std::vector<std::thread> workers;
    std::size_t running = 0;
    std::unique_lock lock(mutex_);
    for (;;) {
        changed_.wait(lock, [&] { return state_.phase != Phase::Paused || cancelled_; });
        if (cancelled_) break;
        const bool halted = state_.queue.any_failed();
        std::vector<std::string> to_start;
        auto ready = state_.queue.ready_tasks();
        for (const auto& t : ready) {
            if (released_.insert(t.id).second) events_->append(EventKind::TaskReleased, {{"task_id", t.id}});
        }
        if (!halted) {
            for (const auto& t : ready) {
                if (running + to_start.size() >= config_.max_parallel_tasks) break;
                to_start.push_back(t.id);
            }
        }
        if (to_start.empty()) {
            if (running == 0) break;
            changed_.wait(lock);
            continue;
        }
        for (const auto& id : to_start) {
            const Task& t = state_.queue.task(id);
            const AgentUnit& unit = match_unit(config_.units, t, *runtime_.embedder);
            state_.queue.start_task(id);
            task_units_[id] = unit.name;
            events_->append(EventKind::TaskStarted, {{"task_id", id}, {"unit", unit.name}});
            ++running;
            if (config_.max_parallel_tasks == 1) {
                lock.unlock();
                run_task(id);
                lock.lock();
                --running;
            } else {
                workers.emplace_back([this, id, &running] {
                    run_task(id);
                    std::lock_guard guard(mutex_);
                    --running;
                    changed_.notify_all();
                });
            }
        }
    }
    changed_.wait(lock, [&] { return running == 0; });
    lock.unlock();
    for (auto& w : workers) w.join();
    lock.lock();
    changed_.wait(lock, [&] { return state_.phase != Phase::Paused || cancelled_; });
}

void Workflow::run_task(const std::string& task_id) {
    Task task;
    const AgentUnit* unit = nullptr;
    {
        std::lock_guard lock(mutex_);
        task = state_.queue.task(task_id);
        for (const auto& u : config_.units) {
            if (u.name == task_units_.at(task_id)) unit = &u;
        }
    }
    ExecutionContext ctx;
    ctx.workflow_id = state_.workflow_id;
    ctx.backend = backend_.get();
    ctx.embedder = runtime_.embedder.get();
    ctx.events = events_.get();
    ctx.toolboxes = &runtime_.toolboxes;
    ctx.episodes = episodes_.get();
    ctx.scope = config_.episode_scope;
    ctx.episodic_k = config_.episodic_k;
    ctx.templates = templates_.get();
    ctx.termination_literal = config_.termination_literal;
    ctx.feedback = &feedback_;
    ctx.gate = &gate_;
    ctx.human_timeout = config_.human_timeout;
    ctx.memory_capacity = config_.memory_capacity;
    try {
        TaskOutcome outcome = execute_task(*unit, task, ctx);
        std::lock_guard lock(mutex_);
        state_.queue.complete_task(task_id, outcome.result);
        events_->append(EventKind::TaskCompleted,
                        {{"task_id", task_id}, {"unit", unit->name}, {"result", outcome.result}});
        traces_[task_id] = std::move(outcome.trace);
        if (!snapshot_dir_.empty()) write_snapshot_locked("task-completed");
    } catch (const std::exception& e) {
        const Error* err = dynamic_cast<const Error*>(&e);
        std::lock_guard lock(mutex_);
        state_.queue.fail_task(task_id, e.what());
        events_->append(EventKind::TaskFailed, {{"task_id", task_id},
                                                {"unit", unit->name},
                                                {"error", err ? std::string(to_string(err->code())) : "Exception"},
                                                {"message", e.what()}});
        spdlog::warn("task '{}' failed: {}", task_id, e.what());
    }
}

void Workflow::inject_feedback(const FeedbackEnvelope& envelope) {
    std::unique_lock lock(mutex_);
    if (state_.phase == Phase::Done || state_.phase == Phase::Failed)
        throw Error(Errc::TaskAlreadyDone, "workflow " + state_.workflow_id + " has finished");

    if (envelope.kind == FeedbackEnvelope::Kind::HumanProxyResponse) {
        auto outstanding = feedback_.outstanding();
        std::string target;
        if (envelope.task_id) {
            if (!outstanding.count(*envelope.task_id))
                throw Error(Errc::NoOutstandingRequest, "no outstanding human request for task " + *envelope.task_id);
            target = *envelope.task_id;
        } else if (outstanding.size() == 1) {
            target = outstanding.begin()->first;
        } else if (outstanding.empty()) {
            throw Error(Errc::NoOutstandingRequest, "no outstanding human request");
        } else {
            throw Error(Errc::InvalidArgument, "several human requests are outstanding; name the task");
        }
        events_->append(EventKind::FeedbackInjected,
                        {{"task_id", target}, {"kind", to_string(envelope.kind)}, {"content", envelope.content}});
        if (!feedback_.respond(target, envelope.content))
            throw Error(Errc::NoOutstandingRequest, "the human request for task " + target + " is no longer open");
        return;
    }

    std::vector<std::string> targets;
    if (envelope.task_id) {
        const auto& tasks = state_.queue.tasks();
        auto it = tasks.find(*envelope.task_id);
        if (it == tasks.end()) throw Error(Errc::UnknownTask, "unknown task '" + *envelope.task_id + "'");
        if (it->second.status == TaskStatus::Done || it->second.status == TaskStatus::Failed) {
            spdlog::warn("feedback for finished task '{}' dropped", *envelope.task_id);
            throw Error(Errc::TaskAlreadyDone, "task '" + *envelope.task_id + "' has already finished");
        }
        targets.push_back(*envelope.task_id);
    } else {
        for (const auto& [id, t] : state_.queue.tasks()) {
            if (t.status == TaskStatus::Running) targets.push_back(id);
        }
        if (targets.empty()) throw Error(Errc::InvalidTransition, "no task is running; name the target task");
    }
    for (const auto& id : targets) {
        events_->append(EventKind::FeedbackInjected,
                        {{"task_id", id}, {"kind", to_string(envelope.kind)}, {"content", envelope.content}});
        feedback_.post(id, envelope.content);
    }
}

void Workflow::pause() {
    std::lock_guard lock(mutex_);
    if (state_.phase != Phase::Executing)
        throw Error(Errc::InvalidTransition,
                    "cannot pause a workflow in phase " + std::string(to_string(state_.phase)));
    gate_.pause();
    paused_from_ = state_.phase;
    set_phase_locked(Phase::Paused);
    if (!snapshot_dir_.empty()) write_snapshot_locked("paused");
}

void Workflow::resume_execution() {
    std::lock_guard lock(mutex_);
    if (state_.phase != Phase::Paused)
        throw Error(Errc::InvalidTransition,
                    "cannot resume a workflow in phase " + std::string(to_string(state_.phase)));
    set_phase_locked(paused_from_);
    gate_.resume();
}

void Workflow::cancel() {
    cancelled_ = true;
    gate_.cancel();
    feedback_.cancel();
    std::lock_guard lock(mutex_);
    changed_.notify_all();
}

// ---------------------------------------------------------------------------
// Snapshots

json Workflow::snapshot() const {
    std::lock_guard lock(mutex_);
    return snapshot_locked();
}

json Workflow::snapshot_locked() const {
    json events = json::array();
    for (const auto& e : events_->all()) events.push_back(e);
    json episodes = json::array();
    for (const auto& e : episodes_->episodes_for(state_.workflow_id)) episodes.push_back(e);
    json running = json::array();
    for (const auto& [id, t] : state_.queue.tasks()) {
        if (t.status == TaskStatus::Running) running.push_back(id);
    }
    json s = to_json(state_);
    s["schema_version"] = kSnapshotSchemaVersion;
    s["config_name"] = config_.name;
    s["config_fingerprint"] = fingerprint_;
    s["paused_from"] = to_string(paused_from_);
    s["released"] = released_;
    s["task_units"] = task_units_;
    s["needs_plan"] = needs_plan_;
    s["previous_result"] = previous_result_ ? json(*previous_result_) : json();
    s["previous_reason"] = previous_reason_;
    s["running_tasks"] = running;
    s["events"] = std::move(events);
    s["episodes"] = std::move(episodes);
    return s;
}

void Workflow::write_snapshot_locked(const char* reason) {
    json s = snapshot_locked();
    const auto seq = events_->last_sequence();
    fs::create_directories(snapshot_dir_);
    char name[64];
    std::snprintf(name, sizeof(name), "snapshot-%06llu.json", static_cast<unsigned long long>(seq));
    const std::string text = s.dump(2);
    util::write_file((snapshot_dir_ / name).string(), text);
    util::write_file((snapshot_dir_ / "latest.json").string(), text);
    events_->append(EventKind::Snapshot, {{"reason", reason}, {"file", name}, {"at_sequence", seq}});
}

std::unique_ptr<Workflow> Workflow::resume(const json& snapshot, WorkflowConfig config, Runtime runtime) {
    const int version = snapshot.value("schema_version", -1);
    if (version != kSnapshotSchemaVersion)
        throw Error(Errc::SchemaVersionMismatch, "snapshot schema version " + std::to_string(version) +
                                                     " is not supported (expected " +
                                                     std::to_string(kSnapshotSchemaVersion) + ")");
    const std::string fp = config_fingerprint(config);
    if (snapshot.value("config_fingerprint", std::string{}) != fp)
        throw Error(Errc::ConfigFingerprintMismatch,
                    "snapshot was taken under a different workflow config (fingerprint " +
                        snapshot.value("config_fingerprint", std::string{}) + ", current " + fp + ")");

    auto w = std::make_unique<Workflow>(snapshot.at("workflow_id").get<std::string>(),
                                        snapshot.at("instruction").get<std::string>(), std::move(config),
                                        std::move(runtime));
    std::vector<WorkflowEvent> history;
    for (const auto& e : snapshot.at("events")) history.push_back(e.get<WorkflowEvent>());
    w->events_ = std::make_unique<EventLog>(history);
    w->backend_ = std::make_unique<EventedBackend>(*w->runtime_.backend, *w->events_);

    WorkflowState& st = w->state_;
    st.queue = TaskQueue::from_json(snapshot.at("queue"));
    st.phase = phase_from_string(snapshot.at("phase").get<std::string>());
    if (snapshot.contains("final_result") && snapshot["final_result"].is_string())
        st.final_result = snapshot["final_result"].get<std::string>();
    if (snapshot.contains("verdict") && snapshot["verdict"].is_boolean()) st.verdict = snapshot["verdict"].get<bool>();
    st.verdict_reason = snapshot.value("verdict_reason", std::string{});
    st.replan_count = snapshot.value("replan_count", std::size_t{0});
    st.failure = snapshot.value("failure", std::string{});
    for (const auto& p : snapshot.value("phase_history", json::array())) st.phase_history.push_back(phase_from_string(p.get<std::string>()));
    w->released_ = snapshot.value("released", std::set<std::string>{});
    w->task_units_ = snapshot.value("task_units", std::map<std::string, std::string>{});
    w->needs_plan_ = snapshot.value("needs_plan", false);
    if (snapshot.contains("previous_result") && snapshot["previous_result"].is_string())
        w->previous_result_ = snapshot["previous_result"].get<std::string>();
    w->previous_reason_ = snapshot.value("previous_reason", std::string{});
    if (st.phase == Phase::Paused) st.phase = phase_from_string(snapshot.value("paused_from", std::string("executing")));

    std::vector<std::string> restarted;
    for (const auto& [id, t] : st.queue.tasks()) {
        if (t.status == TaskStatus::Running) restarted.push_back(id);
    }
    for (const auto& id : restarted) st.queue.restart_task(id);

    std::vector<Episode> episodes;
    for (const auto& e : snapshot.value("episodes", json::array())) episodes.push_back(e.get<Episode>());
    w->episodes_->seed(episodes);

    auto* scripted = dynamic_cast<ScriptedBackend*>(w->runtime_.backend);
    const bool finished = st.phase == Phase::Done || st.phase == Phase::Failed;
    if (scripted && !finished) {
        std::uint64_t last_plan = 0;
        for (const auto& e : history) {
            if (e.kind == EventKind::PlanCreated) last_plan = e.sequence_no;
        }
        std::vector<WorkflowEvent> answered;
        for (const auto& e : history) {
            if (e.kind != EventKind::ModelCall) continue;
            const std::string task = e.payload.value("task_id", std::string{});
            const bool replayed = e.sequence_no > last_plan &&
                                  std::find(restarted.begin(), restarted.end(), task) != restarted.end();
            if (!replayed) answered.push_back(e);
        }
        scripted->fast_forward(answered);
    }

    w->events_->append(EventKind::Resumed,
                       {{"from_sequence", history.empty() ? 0 : history.back().sequence_no}, {"restarted", restarted}});
    return w;
}

} // namespace agentflow
