// SPDX-License-Identifier: Apache-2.0
// agentflow command line: run, resume, serve, inspect, ingest.

#include "agentflow/builtin_tools.hpp"
#include "agentflow/config.hpp"
#include "agentflow/coordinator.hpp"
#include "agentflow/error.hpp"
#include "agentflow/service.hpp"
#include "agentflow/util.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace agentflow;

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

void print_outcome(const WorkflowState& s) {
    if (s.final_result) std::cout << *s.final_result << "\n";
    std::cout << "\nverdict: " << (s.verdict ? (*s.verdict ? "true" : "false") : "none");
    if (!s.verdict_reason.empty()) std::cout << " (" << s.verdict_reason << ")";
    std::cout << "\nphase: " << to_string(s.phase) << "\nreplans: " << s.replan_count << "\n";
    if (!s.failure.empty()) std::cerr << "failure: " << s.failure << "\n";
}

void write_events(const fs::path& path, const EventLog& log) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(Errc::StorageFailure, "cannot write event log '" + path.string() + "'");
    for (const auto& e : log.all()) out << json(e).dump() << "\n";
}

void print_traces(const Workflow& wf) {
    for (const auto& [task, trace] : wf.traces()) {
        std::cout << "trace " << task << ":";
        for (const auto& s : trace.steps) {
            std::cout << " " << s.agent;
            if (s.tool) std::cout << "[" << *s.tool << "]";
            if (!s.next.empty() && s.next != "@Self") std::cout << "->" << s.next;
            if (s.terminal) std::cout << "!";
        }
        std::cout << "\n";
    }
}

int exit_code(const WorkflowState& s) { return s.phase == Phase::Done ? 0 : 1; }

struct RunArgs {
    std::string config;
    std::string instruction;
    std::string backend;
    std::string snapshot_dir;
    std::string workspace;
    std::string episodes;
    std::string events_out;
    bool trace = false;
};

LoadOptions load_options(const RunArgs& a) {
    LoadOptions lo;
    if (!a.workspace.empty()) lo.workspace = fs::absolute(a.workspace);
    if (!a.episodes.empty()) lo.episodic_store = fs::absolute(a.episodes).string();
    return lo;
}

int cmd_run(const RunArgs& a) {
    LoadedWorkflow lw = load_workflow(a.config, load_options(a));
    if (!a.backend.empty()) lw.backend = parse_backend_choice(a.backend, lw.backend);
    auto backend = make_backend(lw.backend);
    const std::string instruction = a.instruction.empty() ? lw.default_instruction : a.instruction;
    if (util::trim(instruction).empty())
        throw Error(Errc::ConfigError, "no instruction: pass --instruction or set \"instruction\" in the config");

    Workflow wf("wf-" + lw.config.name, instruction, lw.config,
                Runtime{backend.get(), lw.embedder, lw.toolboxes, nullptr, lw.templates});
    if (!a.snapshot_dir.empty()) wf.set_snapshot_dir(a.snapshot_dir);
    WorkflowState s = wf.run();
    print_outcome(s);
    if (a.trace) print_traces(wf);
    if (!a.events_out.empty()) write_events(a.events_out, wf.events());
    return exit_code(s);
}

int cmd_resume(const std::string& snapshot_path, RunArgs a, const std::string& config_dir) {
    json snap;
    try {
        snap = json::parse(util::read_file(snapshot_path));
    } catch (const json::exception& e) {
        throw Error(Errc::ConfigError, "snapshot '" + snapshot_path + "' is not valid JSON: " + e.what());
    }
    if (a.config.empty()) {
        const std::string name = snap.value("config_name", std::string{});
        const auto configs = discover_configs(config_dir);
        auto it = configs.find(name);
        if (it == configs.end())
            throw Error(Errc::ConfigError, "snapshot was taken with config '" + name + "', which is not in '" +
                                               config_dir + "'; pass --config");
        a.config = it->second.string();
    }
    LoadedWorkflow lw = load_workflow(a.config, load_options(a));
    if (!a.backend.empty()) lw.backend = parse_backend_choice(a.backend, lw.backend);
    auto backend = make_backend(lw.backend);
    auto wf = Workflow::resume(snap, lw.config, Runtime{backend.get(), lw.embedder, lw.toolboxes, nullptr, lw.templates});
    if (!a.snapshot_dir.empty()) wf->set_snapshot_dir(a.snapshot_dir);
    WorkflowState s = wf->run();
    print_outcome(s);
    if (a.trace) print_traces(*wf);
    if (!a.events_out.empty()) write_events(a.events_out, wf->events());
    return exit_code(s);
}

std::string event_summary(const WorkflowEvent& e) {
    const json& p = e.payload;
    auto field = [&](const char* k) { return p.contains(k) && p[k].is_string() ? p[k].get<std::string>() : std::string(); };
    std::string out;
    for (const char* k : {"task_id", "agent", "unit", "tool", "source", "kind", "reason"}) {
        const std::string v = field(k);
        if (!v.empty()) out += std::string(" ") + k + "=" + v;
    }
    if (p.contains("verdict")) out += " verdict=" + p["verdict"].dump();
    if (p.contains("tasks") && p["tasks"].is_array()) out += " tasks=" + std::to_string(p["tasks"].size());
    return out;
}

int cmd_inspect(const std::string& path) {
    const std::string text = util::read_file(path);
    std::vector<WorkflowEvent> events;
    json doc;
    bool snapshot = false;
    try {
        doc = json::parse(text);
        snapshot = doc.is_object() && doc.contains("schema_version");
    } catch (const json::exception&) {
    }
    if (snapshot) {
        std::cout << "snapshot schema " << doc["schema_version"] << ", workflow " << doc.value("workflow_id", "")
                  << ", config " << doc.value("config_name", "") << " (" << doc.value("config_fingerprint", "")
                  << ")\nphase: " << doc.value("phase", "") << "\nreplans: " << doc.value("replan_count", 0) << "\n";
        TaskQueue q = TaskQueue::from_json(doc.at("queue"));
        if (!q.empty()) {
            std::cout << "tasks:\n";
            for (const auto& id : q.topological_order())
                std::cout << "  " << id << " " << to_string(q.task(id).status) << "\n";
        }
        for (const auto& e : doc.value("events", json::array())) events.push_back(e.get<WorkflowEvent>());
    } else {
        for (const auto& line : util::split_lines(text)) {
            if (util::trim(line).empty()) continue;
            try {
                events.push_back(json::parse(line).get<WorkflowEvent>());
            } catch (const json::exception& e) {
                throw Error(Errc::InvalidArgument, "'" + path + "' is neither a snapshot nor an event log: " + e.what());
            }
        }
    }
    std::map<std::string, int> counts;
    std::cout << "events: " << events.size() << "\n";
    for (const auto& e : events) {
        ++counts[std::string(to_string(e.kind))];
        std::cout << "  " << e.sequence_no << " " << to_string(e.kind) << event_summary(e) << "\n";
    }
    for (const auto& [k, n] : counts) std::cout << k << ": " << n << "\n";
    return 0;
}

int cmd_ingest(const std::string& corpus, const std::string& out) {
    auto embedder = std::make_shared<HashingEmbedder>();
    SemanticIndex index(embedder);
    if (!fs::is_directory(corpus)) throw Error(Errc::ConfigError, "corpus directory '" + corpus + "' not found");
    index.ingest_directory(corpus);
    index.save(out);
    std::cout << "indexed " << index.size() << " chunks into " << out << "\n";
    return 0;
}

int cmd_serve(const std::string& host, int port, ServiceOptions options) {
    WorkflowService service(std::move(options));
    httplib::Server server;
    service.mount(server);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    spdlog::info("listening on {}:{}", host, port);
    if (!server.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return 1;
    }
    g_server = nullptr;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Plan-execute-verify multi-agent workflow engine"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run a workflow config to completion");
    run->add_option("config", run_args.config, "Workflow config file")->required();
    run->add_option("-i,--instruction", run_args.instruction, "User instruction (defaults to the config's)");
    run->add_option("--backend", run_args.backend, "scripted:<fixture.jsonl> or http");
    run->add_option("--snapshot-dir", run_args.snapshot_dir, "Write snapshots here");
    run->add_option("--workspace", run_args.workspace, "Workspace directory for file tools");
    run->add_option("--episodes", run_args.episodes, "Episodic memory file");
    run->add_option("--events", run_args.events_out, "Write the event log as JSONL");
    run->add_flag("--trace", run_args.trace, "Print per-task agent traces");

    RunArgs resume_args;
    std::string snapshot_path;
    std::string config_dir = "configs";
    auto* resume = app.add_subcommand("resume", "Resume a workflow from a snapshot");
    resume->add_option("snapshot", snapshot_path, "Snapshot file")->required();
    resume->add_option("--config", resume_args.config, "Workflow config (default: looked up by name)");
    resume->add_option("--config-dir", config_dir, "Directory of named configs");
    resume->add_option("--backend", resume_args.backend, "scripted:<fixture.jsonl> or http");
    resume->add_option("--snapshot-dir", resume_args.snapshot_dir, "Write further snapshots here");
    resume->add_option("--workspace", resume_args.workspace, "Workspace directory for file tools");
    resume->add_option("--episodes", resume_args.episodes, "Episodic memory file");
    resume->add_option("--events", resume_args.events_out, "Write the event log as JSONL");
    resume->add_flag("--trace", resume_args.trace, "Print per-task agent traces");

    std::string host = "127.0.0.1";
    int port = 8080;
    ServiceOptions serve_opts;
    std::string serve_config_dir = "configs", static_dir = "console/dist", snapshot_root, workspace_root, backend;
    auto* serve = app.add_subcommand("serve", "Host the HTTP API and console assets");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port");
    serve->add_option("--config-dir", serve_config_dir, "Directory of named configs");
    serve->add_option("--static-dir", static_dir, "Console assets");
    serve->add_option("--snapshot-root", snapshot_root, "Per-workflow snapshot directories");
    serve->add_option("--workspace-root", workspace_root, "Per-workflow workspaces");
    serve->add_option("--backend", backend, "Backend override for every config");

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "Summarize a snapshot or event log");
    inspect->add_option("file", inspect_path, "Snapshot JSON or event-log JSONL")->required()->check(CLI::ExistingFile);

    std::string corpus, index_out = "index.jsonl";
    auto* ingest = app.add_subcommand("ingest", "Build a semantic-search index from a corpus");
    ingest->add_option("corpus", corpus, "Directory of .txt/.md files")->required();
    ingest->add_option("-o,--out", index_out, "Index file (JSONL)");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));
    spdlog::set_pattern("[%l] %v");

    try {
        if (*run) return cmd_run(run_args);
        if (*resume) return cmd_resume(snapshot_path, resume_args, config_dir);
        if (*inspect) return cmd_inspect(inspect_path);
        if (*ingest) return cmd_ingest(corpus, index_out);
        if (*serve) {
            serve_opts.config_dir = serve_config_dir;
            serve_opts.static_dir = static_dir;
            if (!snapshot_root.empty()) serve_opts.snapshot_root = fs::path(snapshot_root);
            if (!workspace_root.empty()) serve_opts.workspace_root = fs::path(workspace_root);
            serve_opts.backend_override = backend;
            return cmd_serve(host, port, serve_opts);
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
