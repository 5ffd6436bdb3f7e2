// SPDX-License-Identifier: Apache-2.0
#include "agentflow/service.hpp"

#include "agentflow/error.hpp"
#include "agentflow/util.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cstdio>

namespace agentflow {

namespace fs = std::filesystem;
using nlohmann::json;

int http_status(Errc code) {
    switch (code) {
    case Errc::NoSuchWorkflow:
    case Errc::UnknownTask: return 404;
    case Errc::NoOutstandingRequest:
    case Errc::TaskAlreadyDone:
    case Errc::InvalidTransition: return 409;
    case Errc::ConfigError:
    case Errc::InvalidArgument:
    case Errc::InvalidRequest: return 400;
    case Errc::BackendUnavailable: return 502;
    default: return 500;
    }
}

json descriptor_json(const WorkflowState& state, const std::map<std::string, std::string>& units,
                     const std::map<std::string, std::string>& outstanding) {
    json tasks = json::array();
    for (const auto& id : state.queue.empty() ? std::vector<std::string>{} : state.queue.topological_order()) {
        const Task& t = state.queue.task(id);
        json entry{{"id", t.id},
                   {"description", t.description},
                   {"depends_on", t.depends_on},
                   {"status", to_string(t.status)},
                   {"unit", units.count(id) ? json(units.at(id)) : json()}};
        if (t.result) entry["result"] = *t.result;
        if (t.failure) entry["failure"] = *t.failure;
        tasks.push_back(std::move(entry));
    }
    json requests = json::array();
    for (const auto& [task, question] : outstanding) requests.push_back({{"task_id", task}, {"question", question}});
    json history = json::array();
    for (auto p : state.phase_history) history.push_back(to_string(p));
    return json{{"workflow_id", state.workflow_id},
                {"instruction", state.instruction},
                {"phase", to_string(state.phase)},
                {"phase_history", history},
                {"tasks", tasks},
                {"final_result", state.final_result ? json(*state.final_result) : json()},
                {"verdict", state.verdict ? json(*state.verdict) : json()},
                {"verdict_reason", state.verdict_reason},
                {"replan_count", state.replan_count},
                {"failure", state.failure},
                {"outstanding_requests", requests},
                {"links", {{"self", "/workflows/" + state.workflow_id},
                           {"events", "/workflows/" + state.workflow_id + "/events"}}}};
}

WorkflowService::WorkflowService(ServiceOptions options) : options_(std::move(options)) {}

WorkflowService::~WorkflowService() {
    std::lock_guard lock(mutex_);
    for (auto& [id, m] : workflows_) m->workflow->cancel();
    for (auto& [id, m] : workflows_) {
        if (m->runner.joinable()) m->runner.join();
    }
}

std::vector<std::string> WorkflowService::config_names() const {
    std::vector<std::string> out;
    for (const auto& [name, path] : discover_configs(options_.config_dir)) out.push_back(name);
    return out;
}

std::string WorkflowService::start(const std::string& instruction, const std::string& config_name) {
    const auto configs = discover_configs(options_.config_dir);
    auto it = configs.find(config_name);
    if (it == configs.end()) throw Error(Errc::ConfigError, "unknown config '" + config_name + "'");

    auto m = std::make_unique<Managed>();
    {
        std::lock_guard lock(mutex_);
        char id[32];
        std::snprintf(id, sizeof(id), "wf-%04zu", next_id_++);
        m->id = id;
    }
    m->config_name = config_name;
    m->created_at = util::iso8601_now();
    LoadOptions lo;
    if (options_.workspace_root) lo.workspace = *options_.workspace_root / m->id;
    m->loaded = std::make_unique<LoadedWorkflow>(load_workflow(it->second, lo));
    if (!options_.backend_override.empty())
        m->loaded->backend = parse_backend_choice(options_.backend_override, m->loaded->backend);
    m->backend = make_backend(m->loaded->backend);

    const std::string text = util::trim(instruction).empty() ? m->loaded->default_instruction : instruction;
    if (util::trim(text).empty()) throw Error(Errc::InvalidArgument, "instruction is empty");
    Runtime rt{m->backend.get(), m->loaded->embedder, m->loaded->toolboxes, nullptr, m->loaded->templates};
    m->workflow = std::make_unique<Workflow>(m->id, text, m->loaded->config, rt);
    if (options_.snapshot_root) m->workflow->set_snapshot_dir(*options_.snapshot_root / m->id);

    Managed* raw = m.get();
    raw->runner = std::thread([raw] {
        WorkflowState s = raw->workflow->run();
        spdlog::info("workflow {} finished: {}", s.workflow_id, to_string(s.phase));
        std::lock_guard lock(raw->done_mutex);
        raw->done = true;
        raw->done_cv.notify_all();
    });
    std::lock_guard lock(mutex_);
    const std::string id = m->id;
    workflows_.emplace(id, std::move(m));
    return id;
}

WorkflowService::Managed& WorkflowService::get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = workflows_.find(id);
    if (it == workflows_.end()) throw Error(Errc::NoSuchWorkflow, "unknown workflow '" + id + "'");
    return *it->second;
}

json WorkflowService::descriptor(const std::string& id) const {
    Managed& m = get(id);
    json d = descriptor_json(m.workflow->state(), m.workflow->task_units(), m.workflow->outstanding_requests());
    d["config_name"] = m.config_name;
    d["created_at"] = m.created_at;
    d["last_sequence"] = m.workflow->events().last_sequence();
    return d;
}

json WorkflowService::list() const {
    std::vector<std::string> ids;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [id, m] : workflows_) ids.push_back(id);
    }
    json out = json::array();
    for (const auto& id : ids) {
        Managed& m = get(id);
        const auto s = m.workflow->state();
        out.push_back({{"workflow_id", id},
                       {"config_name", m.config_name},
                       {"created_at", m.created_at},
                       {"phase", to_string(s.phase)},
                       {"instruction", s.instruction}});
    }
    return out;
}

std::vector<WorkflowEvent> WorkflowService::events(const std::string& id, std::uint64_t from,
                                                   std::chrono::milliseconds wait) const {
    Managed& m = get(id);
    if (wait.count() <= 0) return m.workflow->events().since(from);
    return m.workflow->events().wait_since(from, std::min(wait, options_.max_wait));
}

void WorkflowService::feedback(const std::string& id, const FeedbackEnvelope& envelope) {
    get(id).workflow->inject_feedback(envelope);
}

void WorkflowService::pause(const std::string& id) { get(id).workflow->pause(); }

void WorkflowService::resume(const std::string& id) { get(id).workflow->resume_execution(); }

WorkflowState WorkflowService::wait(const std::string& id) {
    Managed& m = get(id);
    std::unique_lock lock(m.done_mutex);
    m.done_cv.wait(lock, [&] { return m.done; });
    return m.workflow->state();
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, {{"error", code}, {"message", message}});
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const Error& e) {
        send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, "InvalidRequest", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
    }
}

json parse_body(const httplib::Request& req) {
    if (util::trim(req.body).empty()) return json::object();
    json j = json::parse(req.body);
    if (!j.is_object()) throw Error(Errc::InvalidRequest, "request body must be a JSON object");
    return j;
}

} // namespace

void WorkflowService::mount(httplib::Server& server) {
    server.Get("/configs", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, config_names()); });
    });
    server.Post("/workflows", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const json body = parse_body(req);
            const std::string id =
                start(body.value("instruction", std::string{}), body.value("config_name", std::string{}));
            send_json(res, 201, {{"workflow_id", id}});
        });
    });
    server.Get("/workflows", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, list()); });
    });
    server.Get(R"(/workflows/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, descriptor(req.matches[1])); });
    });
    server.Get(R"(/workflows/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            std::uint64_t from = 0;
            long long wait_ms = 0;
            try {
                if (req.has_param("from")) from = std::stoull(req.get_param_value("from"));
                if (req.has_param("wait")) wait_ms = std::stoll(req.get_param_value("wait"));
            } catch (const std::exception&) {
                throw Error(Errc::InvalidRequest, "from and wait must be non-negative integers");
            }
            json out = json::array();
            for (const auto& e : events(req.matches[1], from, std::chrono::milliseconds(wait_ms))) out.push_back(e);
            send_json(res, 200, out);
        });
    });
    server.Post(R"(/workflows/([^/]+)/feedback)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            get(id);
            const json body = parse_body(req);
            FeedbackEnvelope env;
            env.workflow_id = id;
            if (body.contains("task_id") && body["task_id"].is_string()) env.task_id = body["task_id"].get<std::string>();
            env.kind = feedback_kind_from_string(body.value("kind", std::string("IncidentalObservation")));
            env.content = body.value("content", std::string{});
            if (util::trim(env.content).empty()) throw Error(Errc::InvalidArgument, "feedback content is empty");
            feedback(id, env);
            send_json(res, 202, {{"accepted", true}});
        });
    });
    server.Post(R"(/workflows/([^/]+)/pause)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            pause(req.matches[1]);
            send_json(res, 200, {{"phase", "paused"}});
        });
    });
    server.Post(R"(/workflows/([^/]+)/resume)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            resume(req.matches[1]);
            send_json(res, 200, {{"phase", to_string(get(req.matches[1]).workflow->phase())}});
        });
    });
    if (!options_.static_dir.empty() && fs::is_directory(options_.static_dir)) {
        server.set_mount_point("/", options_.static_dir.string());
    } else {
        server.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("agentflow service; console assets not installed\n", "text/plain");
        });
    }
}

} // namespace agentflow
