// SPDX-License-Identifier: Apache-2.0
#include "agentflow/builtin_tools.hpp"

#include "agentflow/error.hpp"
#include "agentflow/util.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace agentflow {

// ---------------------------------------------------------------------------
// semantic_search

std::vector<std::string> split_paragraphs(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        std::string p = util::trim(current);
        if (!p.empty()) out.push_back(std::move(p));
        current.clear();
    };
    for (const auto& line : util::split_lines(text)) {
        if (util::trim(line).empty()) {
            flush();
        } else {
            if (!current.empty()) current += "\n";
            current += line;
        }
    }
    flush();
    return out;
}

SemanticIndex::SemanticIndex(std::shared_ptr<const Embedder> embedder) : embedder_(std::move(embedder)) {
    if (!embedder_) throw Error(Errc::InvalidArgument, "semantic index needs an embedder");
}

void SemanticIndex::add_document(const std::string& source, std::string_view text) {
    std::size_t n = 0;
    for (auto& paragraph : split_paragraphs(text)) {
        Chunk c;
        c.chunk_id = source + "#" + std::to_string(++n);
        c.source = source;
        c.vector = embedder_->embed(paragraph);
        c.text = std::move(paragraph);
        chunks_.push_back(std::move(c));
    }
}

void SemanticIndex::ingest_directory(const fs::path& directory) {
    if (!fs::is_directory(directory))
        throw Error(Errc::StorageFailure, "corpus directory '" + directory.string() + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(directory)) {
        if (!entry.is_regular_file()) continue;
        auto ext = util::to_lower(entry.path().extension().string());
        if (ext == ".txt" || ext == ".md") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        add_document(fs::relative(file, directory).generic_string(), util::read_file(file.string()));
    }
}

void SemanticIndex::save(const fs::path& jsonl) const {
    std::string out;
    for (const auto& c : chunks_) {
        nlohmann::json j{{"chunk_id", c.chunk_id}, {"source", c.source}, {"text", c.text}, {"vector", c.vector}};
        out += j.dump() + "\n";
    }
    if (jsonl.has_parent_path()) fs::create_directories(jsonl.parent_path());
    util::write_file(jsonl.string(), out);
}

SemanticIndex SemanticIndex::load(const fs::path& jsonl, std::shared_ptr<const Embedder> embedder) {
    SemanticIndex index(std::move(embedder));
    std::size_t line_no = 0;
    for (const auto& line : util::split_lines(util::read_file(jsonl.string()))) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            Chunk c;
            c.chunk_id = j.at("chunk_id").get<std::string>();
            c.source = j.at("source").get<std::string>();
            c.text = j.at("text").get<std::string>();
            c.vector = j.at("vector").get<EmbeddingVector>();
            if (c.vector.dimension() != index.embedder_->dimension())
                throw Error(Errc::DimensionMismatch, "index vector dimension differs from the embedder");
            index.chunks_.push_back(std::move(c));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::StorageFailure,
                        jsonl.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return index;
}

std::vector<Passage> SemanticIndex::search(std::string_view query, std::size_t k) const {
    if (chunks_.empty()) throw Error(Errc::EmptyIndex, "the semantic index is empty; ingest a corpus first");
    if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
    EmbeddingVector q = embedder_->embed(query);
    std::vector<Passage> scored;
    scored.reserve(chunks_.size());
    for (const auto& c : chunks_) scored.push_back({c.chunk_id, c.source, c.text, cosine(q, c.vector)});
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Passage& a, const Passage& b) { return a.score > b.score; });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

std::string format_passages(const std::vector<Passage>& passages) {
    std::string out;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        char score[32];
        std::snprintf(score, sizeof(score), "%.4f", passages[i].score);
        if (!out.empty()) out += "\n\n";
        out += "[" + std::to_string(i + 1) + "] " + passages[i].chunk_id + " (score " + score + ")\n" +
               passages[i].text;
    }
    return out;
}

ToolSpec semantic_search_spec() {
    return {"semantic_search",
            "Search the document corpus for passages relevant to a query.",
            {{"query", ParamType::String, true, "What to look for."},
             {"k", ParamType::Int, false, "Number of passages to return (default 3)."}},
            "Ranked passages, each with its source and similarity score.",
            {}};
}

void add_semantic_search(Toolbox& toolbox, std::shared_ptr<const SemanticIndex> index,
                         std::vector<std::string> category_path) {
    ToolSpec spec = semantic_search_spec();
    spec.category_path = std::move(category_path);
    toolbox.add(std::move(spec), [index](const nlohmann::json& args) {
        long long k = args.value("k", 3LL);
        if (k < 1) throw ToolArgumentError("parameter 'k' must be >= 1");
        return format_passages(index->search(args.at("query").get<std::string>(), static_cast<std::size_t>(k)));
    });
}

// ---------------------------------------------------------------------------
// file_io

fs::path jail_path(const fs::path& root, const std::string& relative) {
    fs::path rel(relative);
    if (relative.empty()) rel = ".";
    if (rel.is_absolute()) throw ToolArgumentError("path '" + relative + "' must be relative to the workspace");
    fs::path normal = rel.lexically_normal();
    if (!normal.empty() && *normal.begin() == "..")
        throw ToolArgumentError("path '" + relative + "' escapes the workspace");
    fs::path base = fs::weakly_canonical(root);
    fs::path full = fs::weakly_canonical(base / normal);
    auto [b, f] = std::mismatch(base.begin(), base.end(), full.begin(), full.end());
    if (b != base.end()) throw ToolArgumentError("path '" + relative + "' escapes the workspace");
    return full;
}

ToolSpec file_io_spec() {
    return {"file_io",
            "Read, write or list files in the shared workspace directory.",
            {{"mode", ParamType::String, true, "One of read, write, list."},
             {"path", ParamType::String, false, "Path relative to the workspace (default '.')."},
             {"content", ParamType::String, false, "Text to write (write mode)."}},
            "File contents, a write confirmation, or a directory listing.",
            {}};
}

void add_file_io(Toolbox& toolbox, fs::path workspace, std::vector<std::string> category_path) {
    fs::create_directories(workspace);
    ToolSpec spec = file_io_spec();
    spec.category_path = std::move(category_path);
    toolbox.add(
        std::move(spec),
        [workspace](const nlohmann::json& args) -> std::string {
            const std::string mode = util::to_lower(args.at("mode").get<std::string>());
            const std::string rel = args.value("path", std::string("."));
            fs::path target = jail_path(workspace, rel);
            if (mode == "read") {
                if (!fs::is_regular_file(target)) throw ToolArgumentError("no such file '" + rel + "'");
                return util::read_file(target.string());
            }
            if (mode == "write") {
                if (!args.contains("content")) throw ToolArgumentError("missing required parameter 'content'");
                if (fs::is_directory(target)) throw ToolArgumentError("'" + rel + "' is a directory");
                fs::create_directories(target.parent_path());
                const std::string content = args.at("content").get<std::string>();
                util::write_file(target.string(), content);
                return "Wrote " + std::to_string(content.size()) + " bytes to " + rel;
            }
            if (mode == "list") {
                if (!fs::is_directory(target)) throw ToolArgumentError("no such directory '" + rel + "'");
                std::vector<std::string> names;
                for (const auto& entry : fs::directory_iterator(target))
                    names.push_back(entry.path().filename().string() + (entry.is_directory() ? "/" : ""));
                std::sort(names.begin(), names.end());
                if (names.empty()) return "(empty)";
                std::string out;
                for (const auto& n : names) out += (out.empty() ? "" : "\n") + n;
                return out;
            }
            throw ToolArgumentError("parameter 'mode' must be one of read, write, list");
        },
        true);
}

// ---------------------------------------------------------------------------
// web_search

std::vector<WebSearchFixture> load_web_search_fixtures(const fs::path& path) {
    auto j = nlohmann::json::parse(util::read_file(path.string()));
    std::vector<WebSearchFixture> out;
    for (const auto& f : j) {
        WebSearchFixture fx;
        fx.match = f.at("match").get<std::string>();
        for (const auto& r : f.value("results", nlohmann::json::array()))
            fx.results.push_back(
                {r.value("title", std::string{}), r.value("url", std::string{}), r.value("snippet", std::string{})});
        out.push_back(std::move(fx));
    }
    return out;
}

ToolSpec web_search_spec() {
    return {"web_search",
            "Search the web for pages about a topic.",
            {{"query", ParamType::String, true, "Search terms."}},
            "Numbered results with title, URL and snippet.",
            {}};
}

void add_web_search(Toolbox& toolbox, std::vector<WebSearchFixture> fixtures,
                    std::vector<std::string> category_path) {
    ToolSpec spec = web_search_spec();
    spec.category_path = std::move(category_path);
    toolbox.add(std::move(spec), [fixtures = std::move(fixtures)](const nlohmann::json& args) {
        const std::string query = args.at("query").get<std::string>();
        const std::string lowered = util::to_lower(query);
        for (const auto& fx : fixtures) {
            if (lowered.find(util::to_lower(fx.match)) == std::string::npos) continue;
            std::string out;
            for (std::size_t i = 0; i < fx.results.size(); ++i) {
                const auto& r = fx.results[i];
                if (!out.empty()) out += "\n";
                out += std::to_string(i + 1) + ". " + r.title + "\n   " + r.url + "\n   " + r.snippet;
            }
            return out.empty() ? "No results for '" + query + "'" : out;
        }
        return "No results for '" + query + "'";
    });
}

// ---------------------------------------------------------------------------
// code_execution

std::vector<CodeFixture> load_code_fixtures(const fs::path& path) {
    auto j = nlohmann::json::parse(util::read_file(path.string()));
    std::vector<CodeFixture> out;
    for (const auto& f : j) out.push_back({f.at("match").get<std::string>(), f.at("output").get<std::string>()});
    return out;
}

ToolSpec code_execution_spec() {
    return {"code_execution",
            "Run a program and return what it printed.",
            {{"source", ParamType::String, true, "Program source code."}},
            "Combined stdout and stderr, followed by the exit status.",
            {}};
}

namespace {

std::string run_process(const CodeExecutionConfig& config, const std::string& source) {
    fs::path dir = config.workspace.empty() ? fs::temp_directory_path() : config.workspace;
    fs::create_directories(dir);
    fs::path script = dir / ("snippet-" + util::hex64(util::fnv1a64(source)).substr(0, 8));
    util::write_file(script.string(), source);
    std::string cmd = "cd '" + dir.string() + "' && timeout " + std::to_string(config.timeout.count()) + " " +
                      config.interpreter + " '" + script.string() + "' 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("cannot start interpreter");
    std::string output;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) output.append(buf.data(), n);
    int status = pclose(pipe);
    fs::remove(script);
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (code == 124) return output + "\n[timed out after " + std::to_string(config.timeout.count()) + "s]";
    return output + "\n[exit " + std::to_string(code) + "]";
}

} // namespace

void add_code_execution(Toolbox& toolbox, CodeExecutionConfig config, std::vector<std::string> category_path) {
    ToolSpec spec = code_execution_spec();
    spec.category_path = std::move(category_path);
    const bool exclusive = config.mode == CodeExecutionConfig::Mode::Process;
    toolbox.add(
        std::move(spec),
        [config = std::move(config)](const nlohmann::json& args) -> std::string {
            const std::string source = args.at("source").get<std::string>();
            if (config.mode == CodeExecutionConfig::Mode::Process) return run_process(config, source);
            for (const auto& fx : config.fixtures) {
                if (source.find(fx.match) != std::string::npos) return fx.output;
            }
            throw std::runtime_error("no recorded run matches this source");
        },
        exclusive);
}

} // namespace agentflow
