// SPDX-License-Identifier: Apache-2.0
#include "agentflow/config.hpp"

#include "agentflow/builtin_tools.hpp"
#include "agentflow/error.hpp"
#include "agentflow/util.hpp"

#include <fstream>

namespace agentflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& message) { throw Error(Errc::ConfigError, message); }

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception& e) {
        config_error(std::string("field '") + key + "': " + e.what());
    }
}

std::string read_text(const fs::path& path, const char* what) {
    try {
        return util::read_file(path.string());
    } catch (const std::exception&) {
        config_error(std::string("cannot read ") + what + " '" + path.string() + "'");
    }
}

std::vector<std::string> path_list(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return {};
    if (j[key].is_string()) return {j[key].get<std::string>()};
    return get_or<std::vector<std::string>>(j, key, {});
}

CategoryNode parse_category(const json& j) {
    CategoryNode node;
    node.label = get_or<std::string>(j, "label", "");
    node.description = get_or<std::string>(j, "description", "");
    if (node.label.empty()) config_error("tool category without a label");
    for (const auto& c : j.value("children", json::array())) node.children.push_back(parse_category(c));
    return node;
}

void register_categories(Toolbox& box, const CategoryNode& node, std::vector<std::string> parent) {
    box.add_category(parent, node.label, node.description);
    parent.push_back(node.label);
    for (const auto& c : node.children) register_categories(box, c, parent);
}

/// Copies seed files into the workspace, leaving files that already exist.
void seed_workspace(const fs::path& seed, const fs::path& workspace) {
    if (!fs::is_directory(seed)) config_error("workspace seed '" + seed.string() + "' is not a directory");
    fs::create_directories(workspace);
    for (const auto& entry : fs::recursive_directory_iterator(seed)) {
        const fs::path target = workspace / fs::relative(entry.path(), seed);
        if (entry.is_directory()) {
            fs::create_directories(target);
        } else if (!fs::exists(target)) {
            fs::copy_file(entry.path(), target);
        }
    }
}

} // namespace

BackendChoice parse_backend_choice(std::string_view text, const BackendChoice& defaults) {
    BackendChoice out = defaults;
    const std::string t = util::trim(text);
    if (t.empty()) return out;
    if (util::iequals(t, "http")) {
        out.kind = BackendChoice::Kind::Http;
        return out;
    }
    out.kind = BackendChoice::Kind::Scripted;
    out.fixture = util::starts_with_icase(t, "scripted:") ? t.substr(9) : t;
    if (out.fixture.empty()) config_error("scripted backend needs a fixture path (scripted:<file>)");
    return out;
}

std::optional<StageSequence> parse_strategy(const json& j) {
    if (j.is_null()) return StageSequence::react();
    if (j.is_string()) {
        std::string name = util::to_lower(j.get<std::string>());
        for (auto& c : name) {
            if (c == '-') c = '_';
        }
        if (name == "basic") return std::nullopt;
        if (name == "react") return StageSequence::react();
        if (name == "plan_react" || name == "planreact") return StageSequence::plan_react();
        if (name == "conv_plan_react" || name == "convplanreact") return StageSequence::conv_plan_react();
        if (name == "ooda") return StageSequence::ooda();
        if (name == "pdca") return StageSequence::pdca();
        config_error("unknown strategy '" + j.get<std::string>() + "'");
    }
    if (j.is_array()) return StageSequence::programmable(j.get<std::vector<std::string>>());
    if (j.is_object()) {
        StageSequence s = StageSequence::programmable(get_or<std::vector<std::string>>(j, "stages", {}));
        s.loop_from = get_or<std::size_t>(j, "loop_from", 0);
        s.validate();
        return s;
    }
    config_error("strategy must be a preset name, a label list or an object");
}

AgentSpec parse_agent(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) config_error("agent entries must be objects");
    AgentSpec a;
    a.name = get_or<std::string>(j, "name", "");
    if (j.contains("persona_file")) {
        a.persona = util::trim(read_text(resolve(base_dir, j["persona_file"].get<std::string>()), "persona file"));
    } else {
        a.persona = get_or<std::string>(j, "persona", "");
    }
    if (a.persona.empty()) config_error("agent '" + a.name + "' has no persona");
    try {
        a.strategy = parse_strategy(j.contains("strategy") ? j["strategy"] : json());
    } catch (const Error& e) {
        config_error("agent '" + a.name + "': " + e.what());
    }
    a.toolbox = get_or<std::string>(j, "toolbox", "");
    if (j.contains("refiner")) {
        const auto& r = j["refiner"];
        if (r.is_string()) {
            a.refiner.kind = refiner_kind_from_string(r.get<std::string>());
        } else {
            a.refiner.kind = refiner_kind_from_string(get_or<std::string>(r, "kind", "identity"));
            a.refiner.k = get_or<std::size_t>(r, "k", a.refiner.k);
            a.refiner.min_similarity = get_or<double>(r, "min_similarity", a.refiner.min_similarity);
        }
        if (a.refiner.k == 0) config_error("agent '" + a.name + "': refiner k must be at least 1");
    }
    a.temperature = get_or<double>(j, "temperature", a.temperature);
    a.max_tokens = get_or<int>(j, "max_tokens", a.max_tokens);
    a.may_terminate = get_or<bool>(j, "may_terminate", a.may_terminate);
    a.is_lead = get_or<bool>(j, "is_lead", a.is_lead);
    if (a.is_lead && !j.contains("may_terminate")) a.may_terminate = true;
    return a;
}

AgentUnit parse_unit(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) config_error("unit entries must be objects");
    AgentUnit u;
    u.name = get_or<std::string>(j, "name", "");
    u.description = get_or<std::string>(j, "description", "");
    try {
        u.topology = topology_from_string(get_or<std::string>(j, "topology", "independent"));
        if (j.contains("matcher")) {
            const auto& m = j["matcher"];
            if (m.is_string()) {
                u.matcher.kind = matcher_kind_from_string(m.get<std::string>());
            } else {
                u.matcher.kind = matcher_kind_from_string(get_or<std::string>(m, "kind", "semantic"));
                for (const auto& c : m.value("components", json::array()))
                    u.matcher.components.push_back(matcher_kind_from_string(c.get<std::string>()));
            }
        }
    } catch (const Error& e) {
        config_error("unit '" + u.name + "': " + e.what());
    }
    u.sequence = get_or<std::vector<std::string>>(j, "sequence", {});
    u.max_iterations = get_or<std::size_t>(j, "max_iterations", u.max_iterations);
    u.max_rounds = get_or<std::size_t>(j, "max_rounds", u.max_rounds);
    u.parallel_fanout = get_or<bool>(j, "parallel_fanout", u.parallel_fanout);
    for (const auto& a : j.value("agents", json::array())) {
        AgentSpec spec = parse_agent(a, base_dir);
        if (u.topology == Topology::Hierarchical || u.topology == Topology::Broadcast) {
            if (!spec.is_lead && !a.contains("may_terminate")) spec.may_terminate = false;
        }
        u.agents.push_back(std::move(spec));
    }
    return u;
}

WorkflowConfig parse_workflow_config(const json& j, const fs::path& base_dir, const LoadOptions& options) {
    if (!j.is_object()) config_error("workflow config must be a JSON object");
    WorkflowConfig c;
    c.name = get_or<std::string>(j, "name", "");
    if (c.name.empty()) config_error("workflow config has no name");

    auto non_iterative = [&](const char* key, const char* default_name, const char* default_persona) {
        AgentSpec a;
        a.name = default_name;
        a.persona = default_persona;
        if (j.contains(key)) {
            json aj = j[key];
            if (!aj.contains("name")) aj["name"] = default_name;
            if (!aj.contains("persona") && !aj.contains("persona_file")) aj["persona"] = default_persona;
            a = parse_agent(aj, base_dir);
            if (aj.contains("strategy") && a.strategy) config_error(std::string(key) + " must use the basic strategy");
        }
        a.strategy.reset();
        if (!j.contains(key) || !j[key].contains("temperature")) a.temperature = 0.0;
        return a;
    };
    c.planner = non_iterative("planner", "Planner", "You are a planning agent.");
    c.verifier = non_iterative("verifier", "Verifier", "You are an impartial verification agent.");

    for (const auto& u : j.value("units", json::array())) c.units.push_back(parse_unit(u, base_dir));
    c.max_replans = get_or<std::size_t>(j, "max_replans", c.max_replans);
    c.termination_literal = get_or<std::string>(j, "termination_literal", c.termination_literal);
    c.max_parallel_tasks = get_or<std::size_t>(j, "max_parallel_tasks", c.max_parallel_tasks);
    c.memory_capacity = j.contains("memory_capacity") && !j["memory_capacity"].is_null()
                            ? std::optional<std::size_t>(j["memory_capacity"].get<std::size_t>())
                            : std::nullopt;
    if (j.contains("human_timeout_ms") && !j["human_timeout_ms"].is_null())
        c.human_timeout = std::chrono::milliseconds(j["human_timeout_ms"].get<long long>());

    const json episodic = j.value("episodic", json::object());
    c.episodic_k = get_or<std::size_t>(episodic, "k", c.episodic_k);
    c.episode_scope.same_workflow_only = get_or<bool>(episodic, "same_workflow_only", true);
    c.episode_scope.indirect_only = get_or<bool>(episodic, "indirect_only", true);
    c.episode_scope.successful_only = get_or<bool>(episodic, "successful_only", true);
    const std::string store = get_or<std::string>(episodic, "store", "");
    c.episodic_store = store.empty() ? "" : resolve(base_dir, store).string();
    if (options.episodic_store) c.episodic_store = *options.episodic_store;

    if (j.contains("predefined_plan") && !j["predefined_plan"].is_null()) {
        const auto& p = j["predefined_plan"];
        if (p.contains("tasks")) {
            c.predefined_plan = p["tasks"].get<std::vector<TaskSpec>>();
        } else {
            std::vector<std::string> rules = get_or<std::vector<std::string>>(p, "rules", {});
            if (p.contains("rules_file")) {
                const auto text = read_text(resolve(base_dir, p["rules_file"].get<std::string>()), "rules file");
                for (const auto& line : util::split_lines(text)) {
                    std::string rule = util::trim(line);
                    if (!rule.empty() && rule[0] != '#') rules.push_back(rule);
                }
            }
            if (rules.empty()) config_error("predefined_plan needs tasks, rules or rules_file");
            c.predefined_plan = linear_plan(rules);
        }
    }
    c.validate();
    return c;
}

ToolboxMap build_toolboxes(const json& j, const fs::path& base_dir, const fs::path& workspace,
                           std::shared_ptr<const Embedder> embedder) {
    ToolboxMap out;
    if (j.is_null()) return out;
    if (!j.is_object()) config_error("toolboxes must be an object keyed by name");
    for (const auto& [name, spec] : j.items()) {
        Toolbox::Options opts;
        opts.max_output_chars = get_or<std::size_t>(spec, "max_output_chars", opts.max_output_chars);
        auto box = std::make_shared<Toolbox>(opts);
        for (const auto& c : spec.value("categories", json::array())) register_categories(*box, parse_category(c), {});
        for (const auto& t : spec.value("tools", json::array())) {
            const std::string type = get_or<std::string>(t, "type", "");
            const auto category = path_list(t, "category");
            try {
                if (type == "semantic_search") {
                    std::shared_ptr<SemanticIndex> index;
                    if (t.contains("index") && fs::exists(resolve(base_dir, t["index"].get<std::string>()))) {
                        index = std::make_shared<SemanticIndex>(
                            SemanticIndex::load(resolve(base_dir, t["index"].get<std::string>()), embedder));
                    } else if (t.contains("corpus")) {
                        index = std::make_shared<SemanticIndex>(embedder);
                        const fs::path corpus = resolve(base_dir, t["corpus"].get<std::string>());
                        if (!fs::is_directory(corpus)) config_error("corpus directory '" + corpus.string() + "' not found");
                        index->ingest_directory(corpus);
                    } else {
                        config_error("semantic_search needs a corpus directory or an index file");
                    }
                    add_semantic_search(*box, index, category);
                } else if (type == "file_io") {
                    add_file_io(*box, workspace, category);
                } else if (type == "web_search") {
                    std::vector<WebSearchFixture> fixtures;
                    if (t.contains("fixtures"))
                        fixtures = load_web_search_fixtures(resolve(base_dir, t["fixtures"].get<std::string>()));
                    add_web_search(*box, std::move(fixtures), category);
                } else if (type == "code_execution") {
                    CodeExecutionConfig cc;
                    const std::string mode = get_or<std::string>(t, "mode", "fixture");
                    if (mode == "process") {
                        cc.mode = CodeExecutionConfig::Mode::Process;
                        cc.interpreter = get_or<std::string>(t, "interpreter", cc.interpreter);
                        cc.timeout = std::chrono::seconds(get_or<long long>(t, "timeout_seconds", 10));
                    } else if (mode != "fixture") {
                        config_error("code_execution mode must be fixture or process");
                    }
                    if (t.contains("fixtures"))
                        cc.fixtures = load_code_fixtures(resolve(base_dir, t["fixtures"].get<std::string>()));
                    cc.workspace = workspace;
                    add_code_execution(*box, std::move(cc), category);
                } else {
                    config_error("unknown tool type '" + type + "'");
                }
            } catch (const Error& e) {
                if (e.code() == Errc::ConfigError) throw;
                config_error("toolbox '" + name + "', tool '" + type + "': " + e.what());
            }
        }
        out.emplace(name, std::move(box));
    }
    return out;
}

LoadedWorkflow load_workflow(const fs::path& path, const LoadOptions& options) {
    LoadedWorkflow out;
    out.path = fs::absolute(path);
    out.base_dir = out.path.parent_path();
    if (!fs::is_regular_file(out.path)) config_error("workflow config '" + path.string() + "' not found");
    json j;
    try {
        j = json::parse(util::read_file(out.path.string()));
    } catch (const json::parse_error& e) {
        config_error("workflow config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    out.config = parse_workflow_config(j, out.base_dir, options);
    out.default_instruction = get_or<std::string>(j, "instruction", "");

    out.workspace = options.workspace ? *options.workspace
                                      : resolve(out.base_dir, get_or<std::string>(j, "workspace", "workspace"));
    if (j.contains("workspace_seed"))
        seed_workspace(resolve(out.base_dir, j["workspace_seed"].get<std::string>()), out.workspace);
    out.embedder = std::make_shared<HashingEmbedder>(get_or<std::size_t>(j, "embedding_dimension",
                                                                        HashingEmbedder::kDefaultDimension));
    out.templates = j.contains("templates")
                        ? std::make_shared<TemplateSet>(resolve(out.base_dir, j["templates"].get<std::string>()).string())
                        : std::make_shared<TemplateSet>();
    out.toolboxes = build_toolboxes(j.value("toolboxes", json::object()), out.base_dir, out.workspace, out.embedder);
    for (const auto& u : out.config.units) {
        for (const auto& a : u.agents) {
            if (!a.toolbox.empty() && !out.toolboxes.count(a.toolbox))
                config_error("agent '" + a.name + "' uses unknown toolbox '" + a.toolbox + "'");
        }
    }

    const json b = j.value("backend", json::object());
    const std::string kind = get_or<std::string>(b, "kind", "scripted");
    if (kind == "http") {
        out.backend.kind = BackendChoice::Kind::Http;
    } else if (kind != "scripted") {
        config_error("backend kind must be scripted or http");
    }
    if (b.contains("fixture")) out.backend.fixture = resolve(out.base_dir, b["fixture"].get<std::string>());
    auto& h = out.backend.http;
    h.base_url = get_or<std::string>(b, "base_url", h.base_url);
    h.model = get_or<std::string>(b, "model", h.model);
    h.embedding_model = get_or<std::string>(b, "embedding_model", h.embedding_model);
    h.auth_env = get_or<std::string>(b, "auth_env", h.auth_env);
    h.timeout_seconds = get_or<int>(b, "timeout_seconds", h.timeout_seconds);
    return out;
}

std::unique_ptr<ChatBackend> make_backend(const BackendChoice& choice) {
    if (choice.kind == BackendChoice::Kind::Http) return std::make_unique<HttpBackend>(choice.http);
    if (choice.fixture.empty()) config_error("no scripted fixture configured; pass --backend scripted:<file>");
    if (!fs::is_regular_file(choice.fixture)) config_error("fixture '" + choice.fixture.string() + "' not found");
    return std::make_unique<ScriptedBackend>(load_script(choice.fixture.string()));
}

std::map<std::string, fs::path> discover_configs(const fs::path& directory) {
    std::map<std::string, fs::path> out;
    if (!fs::is_directory(directory)) return out;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            out.emplace(entry.path().stem().string(), fs::absolute(entry.path()));
    }
    return out;
}

} // namespace agentflow
