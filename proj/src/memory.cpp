// SPDX-License-Identifier: Apache-2.0
#include "agentflow/memory.hpp"

#include "agentflow/error.hpp"
#include "agentflow/util.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace agentflow {

// ---------------------------------------------------------------------------
// ShortMemory

ShortMemory::ShortMemory(std::optional<std::size_t> capacity, std::size_t pinned_prefix)
    : capacity_(capacity), pinned_(pinned_prefix) {
    if (capacity_ && *capacity_ == 0)
        throw Error(Errc::InvalidArgument, "short memory capacity must be positive");
    if (capacity_ && *capacity_ < pinned_)
        throw Error(Errc::InvalidArgument, "short memory capacity is smaller than the pinned prefix");
}

void ShortMemory::check_alive() const {
    if (purged_) throw Error(Errc::MemoryPurged, "short memory was purged at task completion");
}

void ShortMemory::append(Message message) {
    check_alive();
    message.validate();
    messages_.push_back(std::move(message));
    if (!capacity_) return;
    while (messages_.size() > *capacity_ && messages_.size() > pinned_) {
        messages_.erase(messages_.begin() + static_cast<std::ptrdiff_t>(pinned_));
    }
}

const std::vector<Message>& ShortMemory::messages() const {
    check_alive();
    return messages_;
}

const Message& ShortMemory::back() const {
    check_alive();
    if (messages_.empty()) throw Error(Errc::InvalidArgument, "short memory is empty");
    return messages_.back();
}

void ShortMemory::purge() {
    messages_.clear();
    messages_.shrink_to_fit();
    purged_ = true;
}

// ---------------------------------------------------------------------------
// Episodes

void Episode::embed_with(const Embedder& embedder) {
    description_vector = embedder.embed(description);
    result_vector = embedder.embed(result);
}

void to_json(nlohmann::json& j, const Episode& e) {
    j = nlohmann::json{{"episode_id", e.episode_id},
                       {"workflow_id", e.workflow_id},
                       {"task_id", e.task_id},
                       {"description", e.description},
                       {"result", e.result},
                       {"dependency_ids", e.dependency_ids},
                       {"success", e.success},
                       {"description_vector", e.description_vector},
                       {"result_vector", e.result_vector},
                       {"created_at", e.created_at}};
}

void from_json(const nlohmann::json& j, Episode& e) {
    e.episode_id = j.at("episode_id").get<std::string>();
    e.workflow_id = j.at("workflow_id").get<std::string>();
    e.task_id = j.at("task_id").get<std::string>();
    e.description = j.at("description").get<std::string>();
    e.result = j.at("result").get<std::string>();
    e.dependency_ids = j.value("dependency_ids", std::vector<std::string>{});
    e.success = j.value("success", true);
    e.description_vector = j.at("description_vector").get<EmbeddingVector>();
    e.result_vector = j.at("result_vector").get<EmbeddingVector>();
    e.created_at = j.value("created_at", std::string{});
}

bool EpisodeScope::admits(const Episode& episode, const QueryContext& context) const {
    if (same_workflow_only && episode.workflow_id != context.workflow_id) return false;
    if (indirect_only && episode.workflow_id == context.workflow_id) {
        const auto& deps = context.direct_dependencies;
        if (std::find(deps.begin(), deps.end(), episode.task_id) != deps.end()) return false;
        if (episode.task_id == context.task_id) return false;
    }
    if (successful_only && !episode.success) return false;
    for (const auto& predicate : predicates) {
        if (!predicate(episode)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// EpisodicStore

namespace {

std::size_t numeric_suffix(const std::string& id) {
    auto pos = id.find_last_not_of("0123456789");
    std::string digits = pos == std::string::npos ? id : id.substr(pos + 1);
    if (digits.empty() || digits.size() > 18) return 0;
    return static_cast<std::size_t>(std::stoull(digits));
}

std::string format_id(std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ep-%06zu", n);
    return buf;
}

} // namespace

EpisodicStore::EpisodicStore(std::string path) : path_(std::move(path)) {
    if (path_.empty() || !std::filesystem::exists(path_)) return;
    std::ifstream in(path_);
    if (!in) throw Error(Errc::StorageFailure, "cannot open episode store '" + path_ + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        try {
            Episode e = nlohmann::json::parse(line).get<Episode>();
            if (!ids_.insert(e.episode_id).second) continue;
            next_id_ = std::max(next_id_, numeric_suffix(e.episode_id) + 1);
            episodes_.push_back(std::move(e));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::StorageFailure, "episode store '" + path_ + "' line " +
                                                  std::to_string(line_no) + ": " + e.what());
        }
    }
}

void EpisodicStore::append_line(const Episode& episode) {
    if (path_.empty()) return;
    auto parent = std::filesystem::path(path_).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(Errc::StorageFailure, "cannot append to episode store '" + path_ + "'");
    out << nlohmann::json(episode).dump() << '\n';
    out.flush();
    if (!out) throw Error(Errc::StorageFailure, "write to episode store '" + path_ + "' failed");
}

std::string EpisodicStore::store(Episode episode) {
    std::unique_lock lock(mutex_);
    if (episode.episode_id.empty()) {
        do {
            episode.episode_id = format_id(next_id_++);
        } while (ids_.count(episode.episode_id));
    } else if (ids_.count(episode.episode_id)) {
        throw Error(Errc::StorageFailure, "duplicate episode id '" + episode.episode_id + "'");
    } else {
        next_id_ = std::max(next_id_, numeric_suffix(episode.episode_id) + 1);
    }
    if (episode.created_at.empty()) episode.created_at = util::iso8601_now();
    append_line(episode);
    ids_.insert(episode.episode_id);
    episodes_.push_back(std::move(episode));
    return episodes_.back().episode_id;
}

void EpisodicStore::seed(const std::vector<Episode>& episodes) {
    for (const auto& e : episodes) {
        {
            std::shared_lock lock(mutex_);
            if (ids_.count(e.episode_id)) continue;
        }
        store(e);
    }
}

std::vector<ScoredEpisode> EpisodicStore::query(const EmbeddingVector& query,
                                                const EpisodeScope& scope,
                                                const QueryContext& context,
                                                std::size_t k) const {
    if (k == 0) throw Error(Errc::InvalidArgument, "episodic query k must be >= 1");
    std::vector<ScoredEpisode> scored;
    {
        std::shared_lock lock(mutex_);
        for (const auto& e : episodes_) {
            if (!scope.admits(e, context)) continue;
            double s = std::max(cosine(query, e.description_vector), cosine(query, e.result_vector));
            scored.push_back({e, s});
        }
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const ScoredEpisode& a, const ScoredEpisode& b) { return a.score > b.score; });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

std::vector<Episode> EpisodicStore::episodes() const {
    std::shared_lock lock(mutex_);
    return episodes_;
}

std::vector<Episode> EpisodicStore::episodes_for(const std::string& workflow_id) const {
    std::shared_lock lock(mutex_);
    std::vector<Episode> out;
    for (const auto& e : episodes_) {
        if (e.workflow_id == workflow_id) out.push_back(e);
    }
    return out;
}

std::size_t EpisodicStore::size() const {
    std::shared_lock lock(mutex_);
    return episodes_.size();
}

} // namespace agentflow
