// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentflow/config.hpp"
#include "agentflow/coordinator.hpp"
#include "agentflow/error.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace agentflow {

struct ServiceOptions {
    /// Named configs are the *.json files here.
    std::filesystem::path config_dir = "configs";
    /// Console assets served under "/"; skipped when missing.
    std::filesystem::path static_dir;
    /// Per-workflow snapshot directories go below this root when set.
    std::optional<std::filesystem::path> snapshot_root;
    /// Per-workflow workspaces go below this root when set.
    std::optional<std::filesystem::path> workspace_root;
    /// Replaces every config's backend, e.g. "http".
    std::string backend_override;
    /// Upper bound on the events long-poll.
    std::chrono::milliseconds max_wait{30000};
};

/// HTTP status for an engine error code.
int http_status(Errc code);

/// Owns running workflows and exposes them to the HTTP routes. Every
/// workflow runs on its own thread.
class WorkflowService {
public:
    explicit WorkflowService(ServiceOptions options);
    ~WorkflowService();

    WorkflowService(const WorkflowService&) = delete;
    WorkflowService& operator=(const WorkflowService&) = delete;

    /// Throws Errc::ConfigError for an unknown config name.
    std::string start(const std::string& instruction, const std::string& config_name);

    std::vector<std::string> config_names() const;
    nlohmann::json list() const;
    /// Throws Errc::NoSuchWorkflow.
    nlohmann::json descriptor(const std::string& id) const;
    std::vector<WorkflowEvent> events(const std::string& id, std::uint64_t from,
                                      std::chrono::milliseconds wait) const;
    void feedback(const std::string& id, const FeedbackEnvelope& envelope);
    void pause(const std::string& id);
    void resume(const std::string& id);

    /// Blocks until the workflow's run() has returned.
    WorkflowState wait(const std::string& id);

    /// Registers all routes (and the static mount) on `server`.
    void mount(httplib::Server& server);

private:
    struct Managed {
        std::string id;
        std::string config_name;
        std::string created_at;
        std::unique_ptr<LoadedWorkflow> loaded;
        std::unique_ptr<ChatBackend> backend;
        std::unique_ptr<Workflow> workflow;
        std::thread runner;
        mutable std::mutex done_mutex;
        std::condition_variable done_cv;
        bool done = false;
    };

    Managed& get(const std::string& id) const;

    ServiceOptions options_;
    mutable std::mutex mutex_;
    std::map<std::string, std::unique_ptr<Managed>> workflows_;
    std::size_t next_id_ = 1;
};

nlohmann::json descriptor_json(const WorkflowState& state, const std::map<std::string, std::string>& units,
                               const std::map<std::string, std::string>& outstanding);

} // namespace agentflow
