// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentflow/embedding.hpp"
#include "agentflow/message.hpp"

#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

namespace agentflow {

/// Per-task, per-agent conversation buffer. The first `pinned_prefix`
/// messages (system prompt and initial instruction) are never evicted.
/// After purge() the instance is dead: every further access throws
/// Errc::MemoryPurged.
class ShortMemory {
public:
    explicit ShortMemory(std::optional<std::size_t> capacity = std::nullopt,
                         std::size_t pinned_prefix = 2);

    void append(Message message);
    const std::vector<Message>& messages() const;
    std::size_t size() const { return messages().size(); }
    const Message& back() const;

    std::optional<std::size_t> capacity() const noexcept { return capacity_; }
    std::size_t pinned_prefix() const noexcept { return pinned_; }

    void purge();
    bool purged() const noexcept { return purged_; }

private:
    void check_alive() const;

    std::vector<Message> messages_;
    std::optional<std::size_t> capacity_;
    std::size_t pinned_;
    bool purged_ = false;
};

struct Episode {
    std::string episode_id;
    std::string workflow_id;
    std::string task_id;
    std::string description;
    std::string result;
    std::vector<std::string> dependency_ids;
    bool success = true;
    EmbeddingVector description_vector;
    EmbeddingVector result_vector;
    std::string created_at;

    /// Fills both vectors from the texts using `embedder`.
    void embed_with(const Embedder& embedder);
};

void to_json(nlohmann::json& j, const Episode& e);
void from_json(const nlohmann::json& j, Episode& e);

/// The task on whose behalf a query runs; scope filters are relative to it.
struct QueryContext {
    std::string workflow_id;
    std::string task_id;
    std::vector<std::string> direct_dependencies;
};

struct EpisodeScope {
    bool same_workflow_only = false;
    bool indirect_only = false;
    bool successful_only = false;
    std::vector<std::function<bool(const Episode&)>> predicates;

    /// All filters, conjunctively.
    bool admits(const Episode& episode, const QueryContext& context) const;
};

struct ScoredEpisode {
    Episode episode;
    double score = 0.0;
};

/// Episodic memory: append-only JSONL file with a full in-memory index.
/// An empty path keeps the store purely in memory. Appends are atomic with
/// respect to queries; a query sees a consistent prefix of appends.
class EpisodicStore {
public:
    explicit EpisodicStore(std::string path = {});

    /// Assigns an episode id when empty, persists, and returns the id.
    /// Throws Errc::StorageFailure when the file cannot be written.
    std::string store(Episode episode);

    /// Adds episodes whose ids are not yet present (snapshot re-seeding).
    void seed(const std::vector<Episode>& episodes);

    /// Filter by scope, rank by max(cos(q, description), cos(q, result)),
    /// ties in insertion order, top-k.
    std::vector<ScoredEpisode> query(const EmbeddingVector& query, const EpisodeScope& scope,
                                     const QueryContext& context, std::size_t k) const;

    std::vector<Episode> episodes() const;
    std::vector<Episode> episodes_for(const std::string& workflow_id) const;
    std::size_t size() const;
    const std::string& path() const noexcept { return path_; }

private:
    void append_line(const Episode& episode);

    std::string path_;
    mutable std::shared_mutex mutex_;
    std::vector<Episode> episodes_;
    std::set<std::string> ids_;
    std::size_t next_id_ = 1;
};

} // namespace agentflow
