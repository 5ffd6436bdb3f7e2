// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion. Every expected value is
// computed here or in oracles.hpp, never taken from the engine under test.
#include "agentflow/agents.hpp"
#include "agentflow/coordinator.hpp"
#include "agentflow/error.hpp"
#include "agentflow/memory.hpp"
#include "oracles.hpp"
#include "topology_fixtures.hpp"
#include "workflow_helpers.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

using namespace agentflow;
using namespace helpers;
using nlohmann::json;

namespace {

// Pinned limits.
constexpr int kDagCases = 500;
constexpr int kDagMaxNodes = 10;
constexpr double kDagBudgetSeconds = 10.0;
constexpr int kStrategyFixtures = 20;
constexpr int kTopologyCases = 50;
constexpr int kOracleInstances = 200;
constexpr int kMaxTools = 20;
constexpr int kMaxUnits = 6;
constexpr int kMaxEpisodes = 100;
constexpr double kScoreTolerance = 1e-12;
constexpr double kEndToEndBudgetSeconds = 5.0;

struct Outcome {
    bool pass = true;
    std::string detail;
};

/// Collects the first few violations of a criterion.
struct Tally {
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::vector<std::string> first;

    void expect(bool ok, const std::string& what) {
        ++checks;
        if (ok) return;
        ++failures;
        if (first.size() < 3) first.push_back(what);
    }
    Outcome outcome(const std::string& summary) const {
        std::string detail = summary + ", " + std::to_string(checks) + " checks";
        for (const auto& f : first) detail += "; " + f;
        return {failures == 0, detail};
    }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, int precision = 3) {
    std::ostringstream s;
    s.precision(precision);
    s << std::fixed << v;
    return s.str();
}

/// Context for running one task directly through a unit.
struct Harness {
    HashingEmbedder embedder;
    ToolboxMap toolboxes{{"kit", fixtures::echo_toolbox()}};
    EventLog events;
    EpisodicStore episodes;
    FeedbackHub feedback;
    std::unique_ptr<ScriptedBackend> backend;
    ExecutionContext ctx;

    explicit Harness(std::vector<ScriptEntry> script) : backend(std::make_unique<ScriptedBackend>(std::move(script))) {
        ctx.workflow_id = "wf";
        ctx.backend = backend.get();
        ctx.embedder = &embedder;
        ctx.events = &events;
        ctx.toolboxes = &toolboxes;
        ctx.episodes = &episodes;
        ctx.feedback = &feedback;
    }
};

template <typename Pred>
bool wait_for(Pred pred, int ms = 5000) {
    for (int i = 0; i < ms && !pred(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    return pred();
}

std::vector<WorkflowEvent> of_kind(const EventLog& log, EventKind kind) {
    std::vector<WorkflowEvent> out;
    for (const auto& e : log.all()) {
        if (e.kind == kind) out.push_back(e);
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome dag_scheduler() {
    std::mt19937 rng(500);
    Tally t;
    const auto start = std::chrono::steady_clock::now();
    for (int round = 0; round < kDagCases; ++round) {
        const int n = fixtures::roll(rng, 1, kDagMaxNodes);
        const double density = std::uniform_real_distribution<double>(0.0, 0.9)(rng);
        std::vector<std::pair<std::string, std::vector<std::string>>> tasks;
        std::map<std::string, std::set<std::string>> parents;
        for (int i = 0; i < n; ++i) {
            const std::string id = "n" + std::to_string(i);
            std::vector<std::string> deps;
            for (int j = 0; j < i; ++j) {
                if (std::bernoulli_distribution(density)(rng)) deps.push_back("n" + std::to_string(j));
            }
            parents[id] = {deps.begin(), deps.end()};
            tasks.push_back({id, deps});
        }
        std::shuffle(tasks.begin(), tasks.end(), rng);
        std::vector<ScriptEntry> script{entry(plan_json(tasks)), entry(verdict(true))};
        for (const auto& [id, deps] : tasks) script.push_back(entry(finish("r-" + id), id));

        ScriptedBackend backend(script);
        WorkflowConfig config = tiny_config(0);
        config.max_parallel_tasks = static_cast<std::size_t>(fixtures::roll(rng, 1, 3));
        Workflow wf("wf-dag", "run the graph", config, Runtime{&backend, {}, {}, {}, {}});
        const auto st = wf.run();
        const std::string label = "case " + std::to_string(round);
        t.expect(st.phase == Phase::Done, label + " did not finish");

        std::set<std::string> finished;
        std::vector<std::string> order;
        for (const auto& e : wf.events().all()) {
            if (e.kind == EventKind::TaskStarted) {
                const std::string id = e.payload["task_id"];
                for (const auto& p : parents[id]) t.expect(finished.count(p) == 1, label + ": " + id + " started before " + p);
            } else if (e.kind == EventKind::TaskCompleted) {
                finished.insert(e.payload["task_id"].get<std::string>());
                order.push_back(e.payload["task_id"]);
            }
        }
        t.expect(oracle::is_linear_extension(order, parents), label + ": completion order breaks an edge");
    }
    const double elapsed = seconds_since(start);
    t.expect(elapsed < kDagBudgetSeconds, "took " + fmt(elapsed) + " s");
    return t.outcome(std::to_string(kDagCases) + " DAGs in " + fmt(elapsed) + " s");
}

Outcome strategy_equivalence() {
    std::mt19937 rng(20);
    Tally t;
    for (int i = 0; i < kStrategyFixtures; ++i) {
        Task task;
        task.id = "T";
        task.description = "Handle " + fixtures::random_words(rng, 4);
        task.status = TaskStatus::Running;
        const int tools = fixtures::roll(rng, 0, 3);
        const std::string answer = "answer-" + std::to_string(rng() % 10000);
        std::vector<ScriptEntry> react, plan_react;
        for (int k = 0; k < tools; ++k) {
            const std::string act = fixtures::action(fixtures::random_words(rng, 2));
            const std::string thought = "Thought: " + fixtures::random_words(rng, 3);
            react.push_back({std::nullopt, thought + "\n" + act, "T"});
            plan_react.push_back({std::nullopt, "Plan: " + fixtures::random_words(rng, 2) + "\n" + thought + "\n" + act, "T"});
        }
        react.push_back({std::nullopt, "Thought: done\nFINAL ANSWER: " + answer, "T"});
        plan_react.push_back({std::nullopt, "Plan: finish\nThought: done\nFINAL ANSWER: " + answer, "T"});

        const std::pair<StageSequence, StageSequence> pairs[] = {
            {StageSequence::react(), StageSequence::programmable({"Thought", "Action", "Observation"})},
            {StageSequence::plan_react(), StageSequence::programmable({"Plan", "Thought", "Action", "Observation"})}};
        for (int p = 0; p < 2; ++p) {
            const auto& script = p == 0 ? react : plan_react;
            std::vector<std::vector<ScriptedBackend::Exchange>> transcripts;
            for (const auto& strategy : {pairs[p].first, pairs[p].second}) {
                AgentUnit unit;
                unit.name = "solo";
                AgentSpec a = fixtures::make_agent("Solo", rng, strategy);
                a.persona = "You are Solo.";
                unit.agents = {a};
                Harness h(script);
                const auto out = execute_task(unit, task, h.ctx);
                t.expect(out.result == answer, "fixture " + std::to_string(i) + " wrong result");
                transcripts.push_back(h.backend->transcript());
            }
            bool same = transcripts[0].size() == transcripts[1].size();
            for (std::size_t k = 0; same && k < transcripts[0].size(); ++k)
                same = transcripts[0][k].prompt == transcripts[1][k].prompt &&
                       transcripts[0][k].response == transcripts[1][k].response;
            t.expect(same, "fixture " + std::to_string(i) + (p == 0 ? " ReAct" : " PlanReAct") + " transcripts differ");
        }
    }
    return t.outcome(std::to_string(kStrategyFixtures) + " fixtures x 2 preset pairs");
}

Outcome topology_contracts() {
    std::mt19937 rng(2025);
    Tally t;
    for (Topology topology : {Topology::Independent, Topology::Sequential, Topology::Joint, Topology::Hierarchical,
                              Topology::Broadcast}) {
        for (int i = 0; i < kTopologyCases; ++i) {
            const std::string label = std::string(to_string(topology)) + " #" + std::to_string(i);
            auto c = fixtures::make_case(topology, rng);
            Harness h(c.script);
            try {
                const auto out = execute_task(c.unit, c.task, h.ctx);
                std::vector<std::string> agents;
                for (const auto& s : out.trace.steps) agents.push_back(s.agent);
                t.expect(out.result == c.expected_result, label + " wrong result");
                t.expect(agents == c.expected_agents, label + " unexpected agent order");
                for (const auto& v : fixtures::check_trace(c.unit, out.trace, c.task.description))
                    t.expect(false, label + ": " + v);
            } catch (const std::exception& e) {
                t.expect(false, label + " threw: " + e.what());
            }
        }
    }
    return t.outcome(std::to_string(kTopologyCases) + " cases x 5 topologies");
}

Outcome refiner_matcher_oracle() {
    std::mt19937 rng(200);
    HashingEmbedder embedder;
    Tally t;
    for (int i = 0; i < kOracleInstances; ++i) {
        const std::string label = "instance " + std::to_string(i);
        const std::string task = fixtures::random_words(rng, fixtures::roll(rng, 2, 6));

        Toolbox box;
        std::vector<std::string> descriptions;
        const int n = fixtures::roll(rng, 1, kMaxTools);
        for (int k = 0; k < n; ++k) {
            descriptions.push_back(fixtures::random_words(rng, fixtures::roll(rng, 1, 6)));
            box.add(ToolSpec{"tool" + std::to_string(k), descriptions.back(), {}, "", {}},
                    [](const json&) { return std::string(); });
        }
        const RefinerConfig cfg{RefinerKind::Semantic, static_cast<std::size_t>(fixtures::roll(rng, 1, n)), 0.0};
        std::vector<std::string> want, got;
        for (std::size_t idx : oracle::rank(descriptions, task)) {
            if (want.size() == cfg.k) break;
            want.push_back("tool" + std::to_string(idx));
        }
        for (const auto& s : refine(box, task, cfg, embedder)) got.push_back(s.name);
        t.expect(got == want, label + " tool ranking differs");

        std::vector<AgentUnit> units;
        std::vector<std::string> profiles;
        const int m = fixtures::roll(rng, 1, kMaxUnits);
        for (int k = 0; k < m; ++k) {
            AgentUnit u;
            u.name = "unit" + std::to_string(k);
            u.description = fixtures::random_words(rng, fixtures::roll(rng, 2, 5));
            profiles.push_back(u.description);
            const int agents = fixtures::roll(rng, 1, static_cast<int>(fixtures::agent_names().size()));
            for (int a = 0; a < agents; ++a)
                u.agents.push_back(fixtures::make_agent(fixtures::agent_names()[a], rng, StageSequence::react()));
            units.push_back(std::move(u));
        }
        Task tk;
        tk.description = task;
        const auto& chosen = match_unit(units, tk, embedder);
        t.expect(chosen.name == units[oracle::rank(profiles, task).front()].name, label + " unit choice differs");
        for (const auto& u : units)
            t.expect(match_semantic(u, task, embedder).name == fixtures::oracle_semantic(u, task),
                     label + " agent choice differs in " + u.name);
    }
    return t.outcome(std::to_string(kOracleInstances) + " instances");
}

// Scope rule written out independently of EpisodeScope::admits.
bool admits(const Episode& e, const QueryContext& ctx, int mask) {
    const bool same_wf = e.workflow_id == ctx.workflow_id;
    const bool direct = std::find(ctx.direct_dependencies.begin(), ctx.direct_dependencies.end(), e.task_id) !=
                        ctx.direct_dependencies.end();
    if ((mask & 1) && !same_wf) return false;
    if ((mask & 2) && same_wf && (direct || e.task_id == ctx.task_id)) return false;
    if ((mask & 4) && !e.success) return false;
    return true;
}

Outcome episodic_memory() {
    std::mt19937 rng(100);
    HashingEmbedder embedder;
    Tally t;
    const auto dir = fresh_dir("accept-episodes");
    const std::vector<std::string> workflows{"wf-a", "wf-b", "wf-c"};
    for (int round = 0; round < 10; ++round) {
        const auto path = dir / ("store-" + std::to_string(round) + ".jsonl");
        const int n = fixtures::roll(rng, 1, kMaxEpisodes);
        std::vector<std::tuple<QueryContext, std::string, std::vector<ScoredEpisode>>> asked;
        {
            EpisodicStore store(path.string());
            for (int i = 0; i < n; ++i) {
                Episode e;
                e.workflow_id = workflows[rng() % 3];
                e.task_id = "t" + std::to_string(rng() % 8);
                e.description = fixtures::random_words(rng, 3);
                e.result = fixtures::random_words(rng, 5);
                e.success = rng() % 4 != 0;
                e.embed_with(embedder);
                store.store(e);
            }
            const auto all = store.episodes();
            for (int q = 0; q < 4; ++q) {
                const QueryContext ctx{"wf-a", "t" + std::to_string(rng() % 8),
                                       {"t" + std::to_string(rng() % 8), "t" + std::to_string(rng() % 8)}};
                const std::string text = fixtures::random_words(rng, 3);
                const auto qv = oracle::embed(text);
                for (int mask = 0; mask < 8; ++mask) {
                    const std::size_t k = static_cast<std::size_t>(fixtures::roll(rng, 1, n));
                    std::vector<std::pair<double, std::size_t>> want;
                    for (std::size_t i = 0; i < all.size(); ++i) {
                        if (!admits(all[i], ctx, mask)) continue;
                        want.push_back({std::max(oracle::cosine(qv, oracle::embed(all[i].description)),
                                                 oracle::cosine(qv, oracle::embed(all[i].result))),
                                        i});
                    }
                    std::stable_sort(want.begin(), want.end(), [](auto& a, auto& b) { return a.first > b.first; });
                    if (want.size() > k) want.resize(k);
                    const EpisodeScope scope{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, {}};
                    const auto got = store.query(embedder.embed(text), scope, ctx, k);
                    const std::string label = "store " + std::to_string(round) + " mask " + std::to_string(mask);
                    bool same = got.size() == want.size();
                    for (std::size_t i = 0; same && i < got.size(); ++i)
                        same = got[i].episode.episode_id == all[want[i].second].episode_id &&
                               std::abs(got[i].score - want[i].first) <= kScoreTolerance;
                    t.expect(same, label + " differs from the scan");
                    if (mask == 7) asked.push_back({ctx, text, got});
                }
            }
        }
        EpisodicStore reopened(path.string());
        t.expect(reopened.size() == static_cast<std::size_t>(n), "reopened store lost episodes");
        for (const auto& [ctx, text, before] : asked) {
            if (before.empty()) continue;
            const auto after = reopened.query(embedder.embed(text), EpisodeScope{true, true, true, {}}, ctx, before.size());
            bool same = after.size() == before.size();
            for (std::size_t i = 0; same && i < after.size(); ++i)
                same = after[i].episode.episode_id == before[i].episode.episode_id &&
                       std::abs(after[i].score - before[i].score) <= kScoreTolerance;
            t.expect(same, "ranking changed after reopen");
        }
    }
    fs::remove_all(dir);
    return t.outcome("10 stores of up to " + std::to_string(kMaxEpisodes) + " episodes, 8 scope masks, reopened");
}

struct Finished {
    std::unique_ptr<ConfigRun> run;
    std::unique_ptr<Workflow> workflow;
    WorkflowState state;
};

Finished run_config(const std::string& name, const std::optional<fs::path>& snapshots = std::nullopt) {
    Finished f;
    f.run = std::make_unique<ConfigRun>(name);
    f.workflow = f.run->workflow();
    if (snapshots) f.workflow->set_snapshot_dir(*snapshots);
    f.state = f.workflow->run();
    return f;
}

std::vector<std::string> call_hashes(const EventLog& log) {
    std::vector<std::string> out;
    for (const auto& e : of_kind(log, EventKind::ModelCall)) out.push_back(e.payload.value("response_hash", ""));
    return out;
}

Outcome end_to_end() {
    Tally t;
    const auto start = std::chrono::steady_clock::now();
    std::map<std::string, Finished> runs;
    for (const std::string name : {"rag-qa", "actor-critic", "coding-joint"}) runs.emplace(name, run_config(name));
    const double elapsed = seconds_since(start);

    for (const auto& [name, f] : runs) {
        t.expect(f.state.phase == Phase::Done, name + " ended " + std::string(to_string(f.state.phase)));
        t.expect(f.state.verdict == std::optional<bool>(true), name + " verdict not true");
        const auto again = run_config(name);
        t.expect(again.state.final_result == f.state.final_result, name + " final result not reproducible");
        t.expect(call_hashes(again.workflow->events()) == call_hashes(f.workflow->events()),
                 name + " model calls not reproducible");
    }

    {
        const auto& f = runs.at("rag-qa");
        const auto& q = f.state.queue;
        const auto sinks = q.sinks();
        t.expect(sinks.size() == 1, "rag-qa plan has no single synthesis task");
        if (sinks.size() == 1) {
            const auto& deps = q.task(sinks[0]).depends_on;
            t.expect(deps.size() >= 2 && q.size() >= 3, "rag-qa synthesis does not join two subquestions");
        }
        std::size_t searches = 0;
        for (const auto& e : of_kind(f.workflow->events(), EventKind::ToolInvoked)) searches += e.payload["tool"] == "semantic_search";
        t.expect(searches >= 2, "rag-qa ran semantic_search " + std::to_string(searches) + " times");
        std::size_t docs = 0;
        for (const auto& e : fs::directory_iterator(source_path("corpus"))) docs += e.is_regular_file();
        t.expect(docs == 10, "corpus has " + std::to_string(docs) + " documents");
    }
    {
        const auto& f = runs.at("actor-critic");
        const auto order = f.state.queue.topological_order();
        t.expect(order.size() == 3, "actor-critic plan does not have 3 rules");
        for (std::size_t i = 0; i < order.size(); ++i) {
            const auto& deps = f.state.queue.task(order[i]).depends_on;
            t.expect(i == 0 ? deps.empty() : deps == std::set<std::string>{order[i - 1]},
                     "actor-critic plan is not a chain at " + order[i]);
        }
        for (const auto& [id, trace] : f.workflow->traces()) {
            for (std::size_t i = 0; i < trace.steps.size(); ++i)
                t.expect(trace.steps[i].agent == (i % 2 == 0 ? "Editor" : "Critic"), id + " does not alternate");
            t.expect(!trace.steps.empty() && trace.steps.back().agent == "Critic", id + " not ended by the critic");
        }
        std::map<std::string, std::string> last_response;
        for (const auto& e : of_kind(f.workflow->events(), EventKind::ModelCall)) {
            if (e.payload.contains("task_id")) last_response[e.payload["task_id"]] = e.payload.value("response", "");
        }
        for (const auto& id : order)
            t.expect(util::to_lower(last_response[id]).find("no further edits") != std::string::npos,
                     id + " did not end on \"no further edits\"");
    }
    {
        const auto& f = runs.at("coding-joint");
        const auto& unit = f.run->loaded.config.units.at(0);
        t.expect(unit.agents.size() == 3, "coding-joint unit does not have 3 agents");
        std::set<std::string> starters, handed_to;
        for (const auto& [id, trace] : f.workflow->traces()) {
            if (trace.steps.empty()) continue;
            starters.insert(trace.steps.front().agent);
            for (std::size_t i = 1; i < trace.steps.size(); ++i) {
                const auto& prev = trace.steps[i - 1];
                const auto& cur = trace.steps[i];
                if (cur.agent == prev.agent) continue;
                t.expect(prev.next == "@" + cur.agent, id + ": switch to " + cur.agent + " without a mention");
                handed_to.insert(cur.agent);
            }
        }
        for (const auto& a : unit.agents) {
            if (!starters.count(a.name)) t.expect(handed_to.count(a.name) == 1, a.name + " never received a handoff");
        }
        std::size_t writes = 0;
        for (const auto& e : of_kind(f.workflow->events(), EventKind::ToolInvoked))
            writes += e.payload["tool"] == "file_io" && e.payload["arguments"].value("mode", "") == "write";
        t.expect(writes >= 1, "coding-joint never wrote through file_io");
        t.expect(fs::is_regular_file(f.run->workspace / "slugify.py"), "slugify.py was not produced");
    }
    t.expect(elapsed < kEndToEndBudgetSeconds, "took " + fmt(elapsed) + " s");
    return t.outcome("3 fixtures in " + fmt(elapsed) + " s");
}

std::vector<ScriptEntry> replan_script() {
    return {entry(plan_json({{"t1", {}}})), entry(verdict(false, "too short")),
            entry(plan_json({{"t1", {}}})), entry(verdict(false, "still short")),
            entry(plan_json({{"t1", {}}})), entry(verdict(true)),
            entry(finish("a"), "t1"), entry(finish("ab"), "t1"), entry(finish("abc"), "t1")};
}

Outcome replanning_bound() {
    Tally t;
    for (std::size_t bound : {2u, 1u}) {
        ScriptedBackend backend(replan_script());
        Workflow wf("wf-replan", "Say hello", tiny_config(bound), Runtime{&backend, {}, {}, {}, {}});
        const auto st = wf.run();
        if (bound == 2) {
            t.expect(st.phase == Phase::Done, "max_replans=2 did not end Done");
            t.expect(st.replan_count == 2, "max_replans=2 replan_count " + std::to_string(st.replan_count));
        } else {
            t.expect(st.phase == Phase::Failed, "max_replans=1 did not end Failed");
            t.expect(st.replan_count == 1, "max_replans=1 replan_count " + std::to_string(st.replan_count));
        }
    }
    return t.outcome("verdicts false, false, true");
}

std::vector<std::pair<EventKind, json>> without_timestamps(const std::vector<WorkflowEvent>& events) {
    std::vector<std::pair<EventKind, json>> out;
    for (const auto& e : events) out.push_back({e.kind, e.payload});
    return out;
}

Outcome resume_equivalence() {
    Tally t;
    std::size_t snapshots = 0;
    for (const std::string name : {"rag-qa", "actor-critic", "coding-joint"}) {
        const auto dir = fresh_dir("accept-snap-" + name);
        const auto reference = run_config(name, dir);
        const auto ref_events = reference.workflow->events().all();
        for (const auto& snap_event : of_kind(reference.workflow->events(), EventKind::Snapshot)) {
            if (snap_event.payload["reason"] != "task-completed") continue;
            ++snapshots;
            const std::string file = snap_event.payload["file"];
            const std::string label = name + "/" + file;
            const auto snap = json::parse(util::read_file((dir / file).string()));
            ConfigRun again(name);
            auto resumed = Workflow::resume(snap, again.loaded.config, again.runtime());
            resumed->set_snapshot_dir(fresh_dir("accept-resnap-" + name));
            const auto st = resumed->run();
            t.expect(st.final_result == reference.state.final_result, label + " final result differs");
            t.expect(st.phase == reference.state.phase, label + " phase differs");

            // events after the reference's Snapshot vs after the resumed Resumed marker
            std::vector<WorkflowEvent> want, got;
            for (const auto& e : ref_events) {
                if (e.sequence_no > snap_event.sequence_no) want.push_back(e);
            }
            bool after = false;
            for (const auto& e : resumed->events().all()) {
                if (after) got.push_back(e);
                after = after || e.kind == EventKind::Resumed;
            }
            t.expect(without_timestamps(got) == without_timestamps(want),
                     label + " post-snapshot events differ (" + std::to_string(got.size()) + " vs " +
                         std::to_string(want.size()) + ")");
        }
        fs::remove_all(dir);
    }
    return t.outcome(std::to_string(snapshots) + " task-boundary snapshots");
}

/// Verifier prompts are the exchanges whose system part is the verifier persona.
void check_purity(Tally& t, const std::string& label, const ScriptedBackend& backend, const WorkflowConfig& config,
                  const WorkflowState& state) {
    std::size_t prompts = 0;
    std::vector<std::string> intermediates;
    const std::string final_result = state.final_result.value_or("");
    for (const auto& [id, task] : state.queue.tasks()) {
        if (task.result && final_result.find(*task.result) == std::string::npos) intermediates.push_back(*task.result);
    }
    for (const auto& ex : backend.transcript()) {
        if (ex.prompt.rfind("system: " + config.verifier.persona, 0) != 0) continue;
        ++prompts;
        t.expect(ex.prompt.find(state.instruction) != std::string::npos, label + " verifier prompt lacks the instruction");
        for (const auto& r : intermediates)
            t.expect(ex.prompt.find(r) == std::string::npos, label + " verifier prompt contains an intermediate result");
    }
    // the last verifier prompt judged the final result
    const auto transcript = backend.transcript();
    for (auto it = transcript.rbegin(); it != transcript.rend(); ++it) {
        if (it->prompt.rfind("system: " + config.verifier.persona, 0) != 0) continue;
        t.expect(it->prompt.find(final_result) != std::string::npos, label + " verifier prompt lacks the final result");
        break;
    }
    t.expect(prompts >= 1, label + " has no verifier prompt");
}

Outcome verifier_purity() {
    Tally t;
    for (const std::string name : {"rag-qa", "actor-critic", "coding-joint"}) {
        const auto f = run_config(name);
        const auto* scripted = dynamic_cast<const ScriptedBackend*>(f.run->backend.get());
        if (!scripted) {
            t.expect(false, name + " is not scripted");
            continue;
        }
        check_purity(t, name, *scripted, f.run->loaded.config, f.state);
    }
    {
        ScriptedBackend backend({entry(plan_json({{"t1", {}}, {"t2", {"t1"}}})), entry(finish("HIDDEN-PARTIAL"), "t1"),
                                 entry(finish("the answer"), "t2"), entry(verdict(true))});
        Workflow wf("wf-pure", "Answer me", tiny_config(), Runtime{&backend, {}, {}, {}, {}});
        const auto st = wf.run();
        check_purity(t, "two-step", backend, tiny_config(), st);
    }
    {
        ScriptedBackend backend(replan_script());
        Workflow wf("wf-pure-replan", "Say hello", tiny_config(2), Runtime{&backend, {}, {}, {}, {}});
        check_purity(t, "replan", backend, tiny_config(2), wf.run());
    }
    return t.outcome("3 end-to-end fixtures and 2 scripted workflows");
}

/// Echo tool that blocks until released, so a test can pause mid-task.
struct HeldTool {
    std::mutex m;
    std::condition_variable cv;
    bool entered = false;
    bool released = false;

    std::shared_ptr<Toolbox> box() {
        auto b = std::make_shared<Toolbox>();
        b->add(ToolSpec{"hold", "Wait for a moment.", {}, "Nothing.", {}}, [this](const json&) {
            std::unique_lock lock(m);
            entered = true;
            cv.notify_all();
            cv.wait(lock, [&] { return released; });
            return std::string("held");
        });
        return b;
    }
    bool is_entered() {
        std::lock_guard lock(m);
        return entered;
    }
    void release() {
        std::lock_guard lock(m);
        released = true;
        cv.notify_all();
    }
};

std::string last_user_block(const std::string& prompt) {
    const auto pos = prompt.rfind("\n\nuser: ");
    return pos == std::string::npos ? "" : prompt.substr(pos + 8);
}

Outcome human_feedback() {
    Tally t;
    {
        // incidental feedback while the workflow is paused on purpose
        HeldTool held;
        WorkflowConfig config = tiny_config();
        config.units[0].agents[0].strategy = StageSequence::react();
        config.units[0].agents[0].toolbox = "kit";
        const std::string hold = "Thought: wait\nAction: {\"tool\": \"hold\", \"input\": {}}";
        ScriptedBackend backend({entry(plan_json({{"t1", {}}})), entry(verdict(true)), entry(hold, "t1"),
                                 entry("Thought: noted\nFINAL ANSWER: short", "t1")});
        Workflow wf("wf-inc", "Say hello", config, Runtime{&backend, {}, {{"kit", held.box()}}, {}, {}});
        std::thread runner([&] { wf.run(); });
        t.expect(wait_for([&] { return held.is_entered(); }), "tool was never reached");
        wf.pause();
        held.release();
        wf.inject_feedback({"wf-inc", "t1", FeedbackEnvelope::Kind::IncidentalObservation, "keep it short, please"});
        t.expect(wait_for([&] { return wf.gate().waiting() == 1; }), "executor not held at the gate");
        t.expect(backend.consumed("t1") == 1, "task advanced while paused");
        wf.resume_execution();
        runner.join();
        t.expect(wf.state().phase == Phase::Done, "paused workflow did not finish");
        const auto tr = backend.transcript();
        const auto next = std::find_if(tr.begin(), tr.end(), [](const auto& ex) { return ex.response.find("noted") != std::string::npos; });
        t.expect(next != tr.end() && last_user_block(next->prompt) == "Observation: keep it short, please",
                 "incidental feedback is not the next observation");
    }
    {
        // @HumanProxy blocks the task until the response arrives
        ScriptedBackend backend({entry(plan_json({{"t1", {}}})), entry(verdict(true)),
                                 entry(ask_human("Which name should I greet?"), "t1"), entry(finish("hello Ada"), "t1")});
        Workflow wf("wf-human", "Greet someone", tiny_config(), Runtime{&backend, {}, {}, {}, {}});
        std::thread runner([&] { wf.run(); });
        t.expect(wait_for([&] { return !wf.outstanding_requests().empty(); }), "no outstanding request");
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        t.expect(backend.consumed("t1") == 1, "task continued without a response");
        t.expect(wf.outstanding_requests().count("t1") == 1 &&
                     wf.outstanding_requests().at("t1") == "Which name should I greet?",
                 "request does not carry the question");
        wf.inject_feedback({"wf-human", std::nullopt, FeedbackEnvelope::Kind::HumanProxyResponse, "Ada"});
        runner.join();
        const auto st = wf.state();
        t.expect(st.phase == Phase::Done && st.final_result == std::optional<std::string>("hello Ada"),
                 "workflow did not finish with the reply");
        const auto tr = backend.transcript();
        const auto next = std::find_if(tr.begin(), tr.end(), [](const auto& ex) { return ex.response.find("hello Ada") != std::string::npos; });
        t.expect(next != tr.end() && last_user_block(next->prompt) == "Observation: Ada",
                 "human reply is not the next observation");
        t.expect(wf.outstanding_requests().empty(), "request still outstanding");
    }
    return t.outcome("incidental injection and HumanProxy round trip");
}

} // namespace

int main() {
    spdlog::set_level(spdlog::level::off);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"dag-scheduler-oracle", dag_scheduler},
        {"strategy-equivalence", strategy_equivalence},
        {"topology-contracts", topology_contracts},
        {"refiner-matcher-oracle", refiner_matcher_oracle},
        {"episodic-memory", episodic_memory},
        {"end-to-end-fixtures", end_to_end},
        {"replanning-bound", replanning_bound},
        {"resume-equivalence", resume_equivalence},
        {"verifier-purity", verifier_purity},
        {"human-feedback", human_feedback},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
