// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentflow/embedding.hpp"
#include "agentflow/prompts.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace agentflow {

enum class ParamType { String, Int, Real, Bool, List, Object };

std::string_view to_string(ParamType type);
ParamType param_type_from_string(std::string_view text);

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::String;
    bool required = false;
    std::string doc;
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<ParamSpec> input_schema;
    std::string output_doc;
    std::vector<std::string> category_path;
};

/// Receives arguments already validated and coerced against the input schema.
/// Throw ToolArgumentError for bad input; any other exception is a handler
/// failure. Both come back to the agent as "Error: ..." observations.
using ToolHandler = std::function<std::string(const nlohmann::json& arguments)>;

class ToolArgumentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Deterministic prompt block: name, description, one line per parameter,
/// output description.
std::string tool_schema(const ToolSpec& spec);

/// Schemas of `specs` separated by blank lines, in the given order.
std::string tools_block(const std::vector<ToolSpec>& specs);

/// Category tree node; tools attach to nodes through ToolSpec::category_path.
struct CategoryNode {
    std::string label;
    std::string description;
    std::vector<CategoryNode> children;
};

class Toolbox {
public:
    struct Options {
        std::size_t max_output_chars = 4000;
    };

    Toolbox() = default;
    explicit Toolbox(Options options) : options_(options) {}

    /// Registers a category under `parent_path` (empty for a top-level node).
    void add_category(const std::vector<std::string>& parent_path, std::string label,
                      std::string description);

    /// Exclusive handlers are serialized behind a per-tool lock.
    void add(ToolSpec spec, ToolHandler handler, bool exclusive = false);

    /// Registration order.
    std::vector<ToolSpec> specs() const;
    const ToolSpec* find(std::string_view name) const;
    std::size_t size() const noexcept { return tools_.size(); }
    const CategoryNode& hierarchy() const noexcept { return root_; }
    const Options& options() const noexcept { return options_; }

    /// Never throws for tool-level problems: unknown tools, argument
    /// validation failures and handler errors become "Error: ..." text.
    /// `allowed`, when non-empty, restricts which tools may be called.
    std::string invoke(const ToolCall& call, const std::vector<std::string>& allowed = {}) const;

private:
    struct Entry {
        ToolSpec spec;
        ToolHandler handler;
        std::shared_ptr<std::mutex> lock;
    };

    const CategoryNode* find_category(const std::vector<std::string>& path) const;

    Options options_;
    std::vector<Entry> tools_;
    CategoryNode root_;
};

enum class RefinerKind { Identity, Hierarchical, Semantic };

std::string_view to_string(RefinerKind kind);
RefinerKind refiner_kind_from_string(std::string_view text);

struct RefinerConfig {
    RefinerKind kind = RefinerKind::Identity;
    std::size_t k = 5;
    double min_similarity = 0.0;
};

/// Identity: every tool in registration order. Semantic: tools ranked by
/// cos(embed(description), embed(task)), stable on ties, top-k with score >=
/// min_similarity. Hierarchical: greedy best-branch descent through the
/// category tree scoring "label description" per node (ties by registration
/// order); tools of the chosen leaf plus uncategorized tools, registration order.
std::vector<ToolSpec> refine(const Toolbox& toolbox, std::string_view task_description,
                             const RefinerConfig& config, const Embedder& embedder);

/// Argument validation and coercion against the schema; throws
/// ToolArgumentError with a per-field message.
nlohmann::json validate_arguments(const ToolSpec& spec, const nlohmann::json& arguments);

} // namespace agentflow
