// SPDX-License-Identifier: Apache-2.0
#include "agentflow/tools.hpp"

#include "agentflow/error.hpp"
#include "agentflow/util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace agentflow {

std::string_view to_string(ParamType type) {
    switch (type) {
    case ParamType::String: return "string";
    case ParamType::Int: return "int";
    case ParamType::Real: return "real";
    case ParamType::Bool: return "bool";
    case ParamType::List: return "list";
    case ParamType::Object: return "object";
    }
    return "string";
}

ParamType param_type_from_string(std::string_view text) {
    for (ParamType t : {ParamType::String, ParamType::Int, ParamType::Real, ParamType::Bool, ParamType::List,
                        ParamType::Object}) {
        if (to_string(t) == text) return t;
    }
    throw Error(Errc::ConfigError, "unknown parameter type '" + std::string(text) + "'");
}

std::string_view to_string(RefinerKind kind) {
    switch (kind) {
    case RefinerKind::Identity: return "identity";
    case RefinerKind::Hierarchical: return "hierarchical";
    case RefinerKind::Semantic: return "semantic";
    }
    return "identity";
}

RefinerKind refiner_kind_from_string(std::string_view text) {
    for (RefinerKind k : {RefinerKind::Identity, RefinerKind::Hierarchical, RefinerKind::Semantic}) {
        if (util::iequals(to_string(k), text)) return k;
    }
    throw Error(Errc::ConfigError, "unknown refiner '" + std::string(text) + "'");
}

std::string tool_schema(const ToolSpec& spec) {
    std::string out = "Tool: " + spec.name + "\n";
    out += "Description: " + spec.description + "\n";
    if (spec.input_schema.empty()) {
        out += "Parameters: (no parameters)\n";
    } else {
        out += "Parameters:\n";
        for (const auto& p : spec.input_schema) {
            out += "  - " + p.name + " (" + std::string(to_string(p.type)) + ", " +
                   (p.required ? "required" : "optional") + ")";
            if (!p.doc.empty()) out += ": " + p.doc;
            out += "\n";
        }
    }
    out += "Output: " + (spec.output_doc.empty() ? std::string("text") : spec.output_doc);
    return out;
}

std::string tools_block(const std::vector<ToolSpec>& specs) {
    std::string out;
    for (const auto& spec : specs) {
        if (!out.empty()) out += "\n\n";
        out += tool_schema(spec);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Toolbox

void Toolbox::add_category(const std::vector<std::string>& parent_path, std::string label,
                           std::string description) {
    const CategoryNode* parent = find_category(parent_path);
    if (!parent) throw Error(Errc::ConfigError, "unknown parent category for '" + label + "'");
    auto* node = const_cast<CategoryNode*>(parent);
    for (const auto& child : node->children) {
        if (child.label == label) throw Error(Errc::ConfigError, "duplicate category '" + label + "'");
    }
    node->children.push_back({std::move(label), std::move(description), {}});
}

const CategoryNode* Toolbox::find_category(const std::vector<std::string>& path) const {
    const CategoryNode* node = &root_;
    for (const auto& label : path) {
        auto it = std::find_if(node->children.begin(), node->children.end(),
                               [&](const CategoryNode& c) { return c.label == label; });
        if (it == node->children.end()) return nullptr;
        node = &*it;
    }
    return node;
}

void Toolbox::add(ToolSpec spec, ToolHandler handler, bool exclusive) {
    if (spec.name.empty()) throw Error(Errc::ConfigError, "tool name is empty");
    if (find(spec.name)) throw Error(Errc::ConfigError, "duplicate tool '" + spec.name + "'");
    for (const auto& p : spec.input_schema) {
        if (p.required && util::trim(p.doc).empty())
            throw Error(Errc::ConfigError,
                        "required parameter '" + p.name + "' of tool '" + spec.name + "' has no doc");
    }
    if (!spec.category_path.empty() && !find_category(spec.category_path))
        throw Error(Errc::ConfigError, "tool '" + spec.name + "' has an unknown category path");
    if (!handler) throw Error(Errc::ConfigError, "tool '" + spec.name + "' has no handler");
    tools_.push_back({std::move(spec), std::move(handler), exclusive ? std::make_shared<std::mutex>() : nullptr});
}

std::vector<ToolSpec> Toolbox::specs() const {
    std::vector<ToolSpec> out;
    out.reserve(tools_.size());
    for (const auto& e : tools_) out.push_back(e.spec);
    return out;
}

const ToolSpec* Toolbox::find(std::string_view name) const {
    for (const auto& e : tools_) {
        if (e.spec.name == name) return &e.spec;
    }
    return nullptr;
}

namespace {

std::optional<long long> parse_int(std::string_view s) {
    std::string t = util::trim(s);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
    return v;
}

std::optional<double> parse_real(std::string_view s) {
    std::string t = util::trim(s);
    if (t.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        double v = std::stod(t, &used);
        if (used != t.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

nlohmann::json coerce(const ParamSpec& p, const nlohmann::json& v) {
    auto bad = [&] {
        return ToolArgumentError("parameter '" + p.name + "' must be " + std::string(to_string(p.type)));
    };
    switch (p.type) {
    case ParamType::String:
        if (v.is_string()) return v;
        if (v.is_number() || v.is_boolean()) return v.dump();
        throw bad();
    case ParamType::Int:
        if (v.is_number_integer()) return v;
        if (v.is_number_float()) {
            double d = v.get<double>();
            if (std::floor(d) == d) return static_cast<long long>(d);
        }
        if (v.is_string()) {
            if (auto i = parse_int(v.get<std::string>())) return *i;
        }
        throw bad();
    case ParamType::Real:
        if (v.is_number()) return v.get<double>();
        if (v.is_string()) {
            if (auto d = parse_real(v.get<std::string>())) return *d;
        }
        throw bad();
    case ParamType::Bool:
        if (v.is_boolean()) return v;
        if (v.is_string()) {
            std::string s = util::to_lower(util::trim(v.get<std::string>()));
            if (s == "true") return true;
            if (s == "false") return false;
        }
        if (v.is_number_integer() && (v.get<long long>() == 0 || v.get<long long>() == 1))
            return v.get<long long>() == 1;
        throw bad();
    case ParamType::List:
        if (v.is_array()) return v;
        throw bad();
    case ParamType::Object:
        if (v.is_object()) return v;
        throw bad();
    }
    throw bad();
}

} // namespace

nlohmann::json validate_arguments(const ToolSpec& spec, const nlohmann::json& arguments) {
    if (!arguments.is_object()) throw ToolArgumentError("arguments must be a JSON object");
    nlohmann::json out = arguments;
    for (const auto& p : spec.input_schema) {
        if (!arguments.contains(p.name) || arguments[p.name].is_null()) {
            if (p.required) throw ToolArgumentError("missing required parameter '" + p.name + "'");
            out.erase(p.name);
            continue;
        }
        out[p.name] = coerce(p, arguments[p.name]);
    }
    return out;
}

std::string Toolbox::invoke(const ToolCall& call, const std::vector<std::string>& allowed) const {
    auto it = std::find_if(tools_.begin(), tools_.end(),
                           [&](const Entry& e) { return e.spec.name == call.tool_name; });
    bool permitted = allowed.empty() ||
                     std::find(allowed.begin(), allowed.end(), call.tool_name) != allowed.end();
    if (it == tools_.end() || !permitted) {
        std::string names;
        for (const auto& e : tools_) {
            if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), e.spec.name) == allowed.end())
                continue;
            names += (names.empty() ? "" : ", ") + e.spec.name;
        }
        return "Error: unknown tool '" + call.tool_name + "'; available: " + (names.empty() ? "(none)" : names);
    }
    std::string result;
    try {
        nlohmann::json args = validate_arguments(it->spec, call.arguments);
        if (it->lock) {
            std::lock_guard guard(*it->lock);
            result = it->handler(args);
        } else {
            result = it->handler(args);
        }
    } catch (const ToolArgumentError& e) {
        return std::string("Error: ") + e.what();
    } catch (const std::exception& e) {
        return "Error: tool '" + call.tool_name + "' failed: " + e.what();
    } catch (...) {
        return "Error: tool '" + call.tool_name + "' failed";
    }
    return util::truncate(result, options_.max_output_chars, "\n[truncated]");
}

// ---------------------------------------------------------------------------
// Refiners

std::vector<ToolSpec> refine(const Toolbox& toolbox, std::string_view task_description,
                             const RefinerConfig& config, const Embedder& embedder) {
    auto all = toolbox.specs();
    switch (config.kind) {
    case RefinerKind::Identity:
        return all;

    case RefinerKind::Semantic: {
        if (config.k == 0) throw Error(Errc::InvalidArgument, "refiner k must be >= 1");
        EmbeddingVector task = embedder.embed(task_description);
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t i = 0; i < all.size(); ++i)
            scored.emplace_back(cosine(embedder.embed(all[i].description), task), i);
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<ToolSpec> out;
        for (const auto& [score, idx] : scored) {
            if (out.size() >= config.k) break;
            if (score < config.min_similarity) break;
            out.push_back(all[idx]);
        }
        return out;
    }

    case RefinerKind::Hierarchical: {
        EmbeddingVector task = embedder.embed(task_description);
        const CategoryNode* node = &toolbox.hierarchy();
        std::vector<std::string> path;
        while (!node->children.empty()) {
            const CategoryNode* best = nullptr;
            double best_score = 0.0;
            for (const auto& child : node->children) {
                double s = cosine(embedder.embed(child.label + " " + child.description), task);
                if (!best || s > best_score) {
                    best = &child;
                    best_score = s;
                }
            }
            node = best;
            path.push_back(node->label);
        }
        std::vector<ToolSpec> out;
        for (auto& spec : all) {
            if (spec.category_path.empty() || (!path.empty() && spec.category_path == path))
                out.push_back(std::move(spec));
        }
        return out;
    }
    }
    return all;
}

} // namespace agentflow
