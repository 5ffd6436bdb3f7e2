// SPDX-License-Identifier: Apache-2.0
// Shared setup for tests that run whole workflows: the shipped configs with a
// throwaway workspace, and small hand-built configs with inline scripts.
#pragma once

#include "agentflow/config.hpp"
#include "agentflow/coordinator.hpp"
#include "agentflow/util.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <unistd.h>
#include <vector>

#ifndef AGENTFLOW_SOURCE_DIR
#define AGENTFLOW_SOURCE_DIR "."
#endif

namespace helpers {

using namespace agentflow;
namespace fs = std::filesystem;

inline fs::path source_path(const std::string& rel) { return fs::path(AGENTFLOW_SOURCE_DIR) / rel; }

inline fs::path fresh_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    auto dir = fs::temp_directory_path() /
               ("agentflow-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// One shipped config, loaded with its own workspace and a fresh backend.
struct ConfigRun {
    LoadedWorkflow loaded;
    std::unique_ptr<ChatBackend> backend;
    fs::path workspace;

    explicit ConfigRun(const std::string& name, std::optional<fs::path> ws = std::nullopt)
        : workspace(ws ? *ws : fresh_dir("ws-" + name)) {
        LoadOptions options;
        options.workspace = workspace;
        options.episodic_store = "";
        loaded = load_workflow(source_path("configs/" + name + ".json"), options);
        backend = make_backend(loaded.backend);
    }

    Runtime runtime() const { return Runtime{backend.get(), loaded.embedder, loaded.toolboxes, nullptr, loaded.templates}; }

    std::unique_ptr<Workflow> workflow(const std::string& id = "wf-test") const {
        return std::make_unique<Workflow>(id, loaded.default_instruction, loaded.config, runtime());
    }

    /// Fresh backend so a resumed workflow replays the fixture from the start.
    void reset_backend() { backend = make_backend(loaded.backend); }
};

inline ScriptEntry entry(std::string response, std::string task = "", std::optional<std::string> expect = std::nullopt) {
    return ScriptEntry{std::move(expect), std::move(response), std::move(task)};
}

/// Single independent ReAct agent; the planner and verifier use the defaults.
inline WorkflowConfig tiny_config(std::size_t max_replans = 2) {
    WorkflowConfig c;
    c.name = "tiny";
    c.planner.name = "Planner";
    c.planner.persona = "You are a planner.";
    c.planner.strategy = std::nullopt;
    c.verifier.name = "Verifier";
    c.verifier.persona = "You are a verifier.";
    c.verifier.strategy = std::nullopt;
    c.max_replans = max_replans;
    AgentUnit u;
    u.name = "solo";
    AgentSpec a;
    a.name = "Solo";
    a.persona = "You are Solo, a helpful assistant.";
    a.strategy = StageSequence::conv_plan_react();
    u.agents = {a};
    c.units = {u};
    return c;
}

inline std::string plan_json(const std::vector<std::pair<std::string, std::vector<std::string>>>& tasks) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [id, deps] : tasks) arr.push_back({{"id", id}, {"description", "do " + id}, {"depends_on", deps}});
    return nlohmann::json{{"tasks", arr}}.dump();
}

inline std::string verdict(bool v, const std::string& reason = "checked") {
    return nlohmann::json{{"verdict", v}, {"reason", reason}}.dump();
}

inline std::string finish(const std::string& result) { return "Task Thought: done\nFINAL ANSWER: " + result; }

inline std::string ask_human(const std::string& question) {
    return "Plan: ask\nTask Thought: need input\nDialog Thought: " + question + "\nNext: @HumanProxy";
}

inline std::size_t count(const EventLog& log, EventKind kind) {
    std::size_t n = 0;
    for (const auto& e : log.all()) n += e.kind == kind;
    return n;
}

} // namespace helpers
