// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentflow/backend.hpp"
#include "agentflow/coordinator.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace agentflow {

/// Parsed "backend" section of a workflow config.
struct BackendChoice {
    enum class Kind { Scripted, Http };
    Kind kind = Kind::Scripted;
    std::filesystem::path fixture;
    HttpBackendConfig http;
};

/// "scripted:<fixture>" or "http"; a bare path counts as a fixture.
BackendChoice parse_backend_choice(std::string_view text, const BackendChoice& defaults);

struct LoadOptions {
    /// Overrides the config's workspace directory for file tools.
    std::optional<std::filesystem::path> workspace;
    /// Overrides the config's episodic store path ("" for in-memory).
    std::optional<std::string> episodic_store;
};

/// Everything needed to run one named workflow config.
struct LoadedWorkflow {
    std::filesystem::path path;
    std::filesystem::path base_dir;
    WorkflowConfig config;
    ToolboxMap toolboxes;
    BackendChoice backend;
    std::shared_ptr<const Embedder> embedder;
    std::shared_ptr<const TemplateSet> templates;
    std::filesystem::path workspace;
    /// Optional "instruction" field used when none is given on the command line.
    std::string default_instruction;
};

/// Strategy by preset name (react, plan_react, conv_plan_react, ooda, pdca,
/// basic) or as {"stages": [...], "loop_from": n}. "basic" yields nullopt.
std::optional<StageSequence> parse_strategy(const nlohmann::json& j);

AgentSpec parse_agent(const nlohmann::json& j, const std::filesystem::path& base_dir);
AgentUnit parse_unit(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Workflow section only; toolboxes and backend are ignored. Relative paths
/// resolve against `base_dir`. Throws Errc::ConfigError.
WorkflowConfig parse_workflow_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                     const LoadOptions& options = {});

/// "toolboxes" section: {"<name>": {"categories": [...], "tools": [...]}}.
ToolboxMap build_toolboxes(const nlohmann::json& j, const std::filesystem::path& base_dir,
                           const std::filesystem::path& workspace, std::shared_ptr<const Embedder> embedder);

LoadedWorkflow load_workflow(const std::filesystem::path& path, const LoadOptions& options = {});

std::unique_ptr<ChatBackend> make_backend(const BackendChoice& choice);

/// Named configs: every *.json in `directory`, keyed by file stem.
std::map<std::string, std::filesystem::path> discover_configs(const std::filesystem::path& directory);

} // namespace agentflow
