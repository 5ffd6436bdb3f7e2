// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentflow/embedding.hpp"
#include "agentflow/tools.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace agentflow {

struct Chunk {
    std::string chunk_id;
    std::string source;
    std::string text;
    EmbeddingVector vector;
};

struct Passage {
    std::string chunk_id;
    std::string source;
    std::string text;
    double score = 0.0;
};

/// Paragraph-chunked corpus index over .txt/.md files, persisted as JSONL.
class SemanticIndex {
public:
    explicit SemanticIndex(std::shared_ptr<const Embedder> embedder);

    /// Files are visited in sorted path order; chunk ids are "<source>#<n>".
    void ingest_directory(const std::filesystem::path& directory);
    void add_document(const std::string& source, std::string_view text);

    void save(const std::filesystem::path& jsonl) const;
    static SemanticIndex load(const std::filesystem::path& jsonl, std::shared_ptr<const Embedder> embedder);

    /// Top-k by cosine, stable on ties. Throws Errc::EmptyIndex.
    std::vector<Passage> search(std::string_view query, std::size_t k) const;

    const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
    std::size_t size() const noexcept { return chunks_.size(); }

private:
    std::shared_ptr<const Embedder> embedder_;
    std::vector<Chunk> chunks_;
};

/// Blank-line separated paragraphs, trimmed, empties dropped.
std::vector<std::string> split_paragraphs(std::string_view text);

std::string format_passages(const std::vector<Passage>& passages);

ToolSpec semantic_search_spec();
void add_semantic_search(Toolbox& toolbox, std::shared_ptr<const SemanticIndex> index,
                         std::vector<std::string> category_path = {});

/// Resolves `relative` inside `root`; absolute paths and anything escaping
/// the root throw ToolArgumentError.
std::filesystem::path jail_path(const std::filesystem::path& root, const std::string& relative);

ToolSpec file_io_spec();
/// read/write/list confined to `workspace`, which is created if missing.
void add_file_io(Toolbox& toolbox, std::filesystem::path workspace,
                 std::vector<std::string> category_path = {});

struct SearchResult {
    std::string title;
    std::string url;
    std::string snippet;
};

struct WebSearchFixture {
    /// Case-insensitive substring of the query.
    std::string match;
    std::vector<SearchResult> results;
};

/// JSON array of {"match", "results": [{"title","url","snippet"}]}.
std::vector<WebSearchFixture> load_web_search_fixtures(const std::filesystem::path& path);

ToolSpec web_search_spec();
void add_web_search(Toolbox& toolbox, std::vector<WebSearchFixture> fixtures,
                    std::vector<std::string> category_path = {});

struct CodeFixture {
    /// Substring of the submitted source.
    std::string match;
    std::string output;
};

struct CodeExecutionConfig {
    enum class Mode { Fixture, Process };
    Mode mode = Mode::Fixture;
    std::vector<CodeFixture> fixtures;
    /// Process mode: interpreter run on a temp file inside `workspace`.
    std::string interpreter = "python3";
    std::filesystem::path workspace;
    std::chrono::seconds timeout{10};
};

/// JSON array of {"match", "output"}.
std::vector<CodeFixture> load_code_fixtures(const std::filesystem::path& path);

ToolSpec code_execution_spec();
void add_code_execution(Toolbox& toolbox, CodeExecutionConfig config,
                        std::vector<std::string> category_path = {});

} // namespace agentflow
