// SPDX-License-Identifier: Apache-2.0
#include "agentflow/error.hpp"
#include "workflow_helpers.hpp"

#include <doctest.h>

#include <fstream>

using namespace agentflow;
using namespace helpers;
using nlohmann::json;

namespace {

std::optional<Errc> load_error(const json& config, const fs::path& dir) {
    std::ofstream(dir / "w.json") << config.dump();
    try {
        load_workflow(dir / "w.json", LoadOptions{dir / "ws", ""});
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

json minimal() {
    return json{{"name", "m"},
                {"units", {{{"name", "u"}, {"agents", {{{"name", "A"}, {"persona", "You are A."}}}}}}}};
}

std::string message_of(const json& config, const fs::path& dir) {
    std::ofstream(dir / "w.json") << config.dump();
    try {
        load_workflow(dir / "w.json", LoadOptions{dir / "ws", ""});
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("strategy specs") {
    CHECK(parse_strategy(json()) == StageSequence::react());
    CHECK(parse_strategy("ReAct") == StageSequence::react());
    CHECK(parse_strategy("plan-react") == StageSequence::plan_react());
    CHECK(parse_strategy("conv_plan_react") == StageSequence::conv_plan_react());
    CHECK(parse_strategy("OODA") == StageSequence::ooda());
    CHECK(parse_strategy("pdca") == StageSequence::pdca());
    CHECK_FALSE(parse_strategy("basic").has_value());

    auto listed = parse_strategy(json{"Thought", "Action", "Observation"});
    REQUIRE(listed);
    CHECK(*listed == StageSequence::react());
    auto obj = parse_strategy(json{{"stages", {"Plan", "TaskThought", "Action", "Observation"}}, {"loop_from", 1}});
    REQUIRE(obj);
    CHECK(obj->stages == std::vector<std::string>{"Plan", "Task Thought", "Action", "Observation"});
    CHECK(obj->loop_from == 1);

    CHECK_THROWS_AS(parse_strategy("zen"), Error);
    CHECK_THROWS_AS(parse_strategy(3), Error);
    CHECK_THROWS_AS(parse_strategy(json{"Observation", "Observation"}), Error);
}

TEST_CASE("backend choice strings") {
    BackendChoice defaults;
    defaults.fixture = "default.jsonl";
    CHECK(parse_backend_choice("", defaults).fixture == "default.jsonl");
    CHECK(parse_backend_choice("http", defaults).kind == BackendChoice::Kind::Http);
    auto scripted = parse_backend_choice("scripted:other.jsonl", defaults);
    CHECK(scripted.kind == BackendChoice::Kind::Scripted);
    CHECK(scripted.fixture == "other.jsonl");
    CHECK(parse_backend_choice("bare.jsonl", defaults).fixture == "bare.jsonl");
    CHECK_THROWS_AS(parse_backend_choice("scripted:", defaults), Error);

    BackendChoice none;
    CHECK_THROWS_AS(make_backend(none), Error);
    none.fixture = "/nonexistent/script.jsonl";
    CHECK_THROWS_AS(make_backend(none), Error);
}

TEST_CASE("shipped configs load") {
    const auto found = discover_configs(source_path("configs"));
    REQUIRE(found.size() == 3);
    for (const auto& [name, path] : found) {
        CAPTURE(name);
        ConfigRun run(name);
        CHECK(run.loaded.config.name == name);
        CHECK_FALSE(run.loaded.default_instruction.empty());
        CHECK_FALSE(run.loaded.config.planner.strategy.has_value());
        CHECK_FALSE(run.loaded.config.verifier.strategy.has_value());
        CHECK(run.loaded.config.planner.temperature == 0.0);
        CHECK(run.loaded.backend.kind == BackendChoice::Kind::Scripted);
        CHECK(fs::is_regular_file(run.loaded.backend.fixture));
    }

    ConfigRun rag("rag-qa");
    REQUIRE(rag.loaded.config.units.size() == 1);
    CHECK(rag.loaded.config.units[0].topology == Topology::Independent);
    CHECK(rag.loaded.toolboxes.count("knowledge") == 1);
    CHECK(rag.loaded.config.max_replans == 2);

    ConfigRun critic("actor-critic");
    const auto& plan = critic.loaded.config.predefined_plan;
    REQUIRE(plan);
    REQUIRE(plan->size() == 3);
    CHECK((*plan)[0].id == "rule-01");
    CHECK((*plan)[0].depends_on.empty());
    CHECK((*plan)[2].depends_on == std::vector<std::string>{"rule-02"});
    CHECK((*plan)[1].description.find("in order to") != std::string::npos);
    CHECK(fs::is_regular_file(critic.workspace / "draft.md"));
    const auto& unit = critic.loaded.config.units[0];
    CHECK(unit.topology == Topology::Sequential);
    CHECK(unit.sequence == std::vector<std::string>{"Editor", "Critic"});
    CHECK_FALSE(unit.agents[0].may_terminate);
    CHECK(unit.agents[1].may_terminate);
    CHECK(unit.agents[1].strategy->stages == std::vector<std::string>{"Thought"});

    ConfigRun coding("coding-joint");
    const auto& team = coding.loaded.config.units[0];
    CHECK(team.topology == Topology::Joint);
    CHECK(team.matcher.kind == MatcherKind::Composite);
    CHECK(team.matcher.components == std::vector<MatcherKind>{MatcherKind::Mention, MatcherKind::Semantic});
    CHECK(coding.loaded.toolboxes.size() == 3);
}

TEST_CASE("workspace seed leaves existing files alone") {
    const fs::path ws = fresh_dir("seeded");
    std::ofstream(ws / "draft.md") << "mine";
    ConfigRun run("actor-critic", ws);
    CHECK(util::read_file((ws / "draft.md").string()) == "mine");
}

TEST_CASE("config details: persona files, refiners, leads, rules") {
    const fs::path dir = fresh_dir("cfg");
    std::ofstream(dir / "persona.txt") << "  You are from a file.\n";
    std::ofstream(dir / "rules.txt") << "# header\n\nfirst rule\n  second rule  \n";
    json c = minimal();
    c["units"][0]["agents"][0] = {{"name", "A"}, {"persona_file", "persona.txt"},
                                  {"refiner", {{"kind", "semantic"}, {"k", 2}, {"min_similarity", 0.25}}}};
    c["units"].push_back({{"name", "h"},
                          {"topology", "hierarchical"},
                          {"agents", {{{"name", "Lead"}, {"persona", "lead"}, {"is_lead", true}},
                                      {{"name", "W"}, {"persona", "worker"}}}}});
    c["predefined_plan"] = {{"rules_file", "rules.txt"}, {"rules", {"zeroth rule"}}};
    c["episodic"] = {{"k", 2}, {"successful_only", false}, {"store", "eps.jsonl"}};
    c["human_timeout_ms"] = 1500;
    std::ofstream(dir / "w.json") << c.dump();
    auto loaded = load_workflow(dir / "w.json", LoadOptions{dir / "ws", std::nullopt});

    const auto& a = loaded.config.units[0].agents[0];
    CHECK(a.persona == "You are from a file.");
    CHECK(a.refiner.kind == RefinerKind::Semantic);
    CHECK(a.refiner.k == 2);
    CHECK(a.refiner.min_similarity == 0.25);
    const auto& h = loaded.config.units[1];
    CHECK(h.agents[0].may_terminate);
    CHECK_FALSE(h.agents[1].may_terminate);

    REQUIRE(loaded.config.predefined_plan);
    std::vector<std::string> rules;
    for (const auto& t : *loaded.config.predefined_plan) rules.push_back(t.description);
    CHECK(rules == std::vector<std::string>{"zeroth rule", "first rule", "second rule"});
    CHECK(loaded.config.episodic_k == 2);
    CHECK_FALSE(loaded.config.episode_scope.successful_only);
    CHECK(loaded.config.episode_scope.same_workflow_only);
    CHECK(fs::path(loaded.config.episodic_store) == dir / "eps.jsonl");
    CHECK(loaded.config.human_timeout == std::chrono::milliseconds(1500));
    CHECK(loaded.workspace == dir / "ws");
}

TEST_CASE("config errors") {
    const fs::path dir = fresh_dir("cfg-bad");
    CHECK_FALSE(load_error(minimal(), dir).has_value());

    auto c = minimal();
    c["units"][0]["agents"][0]["toolbox"] = "missing";
    CHECK(load_error(c, dir) == Errc::ConfigError);
    CHECK(message_of(c, dir) == "agent 'A' uses unknown toolbox 'missing'");

    c = minimal();
    c["toolboxes"] = {{"box", {{"tools", {{{"type", "teleport"}}}}}}};
    CHECK(message_of(c, dir) == "unknown tool type 'teleport'");
    c["toolboxes"] = {{"box", {{"tools", {{{"type", "semantic_search"}}}}}}};
    CHECK(load_error(c, dir) == Errc::ConfigError);
    c["toolboxes"] = {{"box", {{"tools", {{{"type", "code_execution"}, {"mode", "cloud"}}}}}}};
    CHECK(load_error(c, dir) == Errc::ConfigError);

    c = minimal();
    c["planner"] = {{"strategy", "react"}};
    CHECK(message_of(c, dir) == "planner must use the basic strategy");
    c = minimal();
    c["units"][0]["agents"][0].erase("persona");
    CHECK(message_of(c, dir) == "agent 'A' has no persona");
    c = minimal();
    c["units"][0]["agents"][0]["strategy"] = "zen";
    CHECK(message_of(c, dir) == "agent 'A': unknown strategy 'zen'");
    c = minimal();
    c["units"][0]["agents"][0]["refiner"] = {{"kind", "semantic"}, {"k", 0}};
    CHECK(load_error(c, dir) == Errc::ConfigError);
    c = minimal();
    c["units"][0]["topology"] = "mesh";
    CHECK(load_error(c, dir) == Errc::ConfigError);
    c = minimal();
    c.erase("name");
    CHECK(message_of(c, dir) == "workflow config has no name");
    c = minimal();
    c["predefined_plan"] = json::object();
    CHECK(load_error(c, dir) == Errc::ConfigError);
    c = minimal();
    c["backend"] = {{"kind", "carrier-pigeon"}};
    CHECK(load_error(c, dir) == Errc::ConfigError);
    c = minimal();
    c["max_replans"] = "two";
    CHECK(load_error(c, dir) == Errc::ConfigError);
    c = minimal();
    c["workspace_seed"] = "no-such-seed";
    CHECK(load_error(c, dir) == Errc::ConfigError);

    std::ofstream(dir / "broken.json") << "{\"name\": ";
    CHECK_THROWS_AS(load_workflow(dir / "broken.json"), Error);
    CHECK_THROWS_AS(load_workflow(dir / "absent.json"), Error);
}

TEST_CASE("config discovery") {
    const fs::path dir = fresh_dir("discover");
    std::ofstream(dir / "one.json") << "{}";
    std::ofstream(dir / "notes.txt") << "x";
    fs::create_directories(dir / "nested.json");
    const auto found = discover_configs(dir);
    REQUIRE(found.size() == 1);
    CHECK(found.begin()->first == "one");
    CHECK(discover_configs(dir / "missing").empty());
}
