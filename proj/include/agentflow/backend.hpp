// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentflow/embedding.hpp"
#include "agentflow/events.hpp"
#include "agentflow/message.hpp"

#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace agentflow {

/// Identifies who is calling; never rendered into the prompt.
struct CallTag {
    std::string task_id;
    std::string agent;
};

struct ChatRequest {
    std::vector<Message> messages;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::vector<std::string> stop_sequences;
    CallTag tag;

    /// Throws Errc::InvalidRequest when the first message is not System or two
    /// Assistant messages are adjacent.
    void validate() const;
};

/// Canonical text form of a request: "<role>: <content>" blocks separated by
/// blank lines. Scripted matching and prompt hashes use this rendering.
std::string render_prompt(const ChatRequest& request);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string chat(const ChatRequest& request) = 0;
};

struct ScriptEntry {
    std::optional<std::string> expect;
    std::string response;
    /// Routes the entry to a per-task stream; empty means the shared stream.
    std::string task;
};

std::vector<ScriptEntry> load_script(const std::string& jsonl_path);
std::vector<ScriptEntry> parse_script(std::string_view jsonl);

/// Deterministic test double replaying fixture responses in strict order.
///
/// Requests tagged with a task id that has its own stream consume from it;
/// everything else consumes from the shared stream. Calls are serialized.
class ScriptedBackend final : public ChatBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptEntry> entries);

    std::string chat(const ChatRequest& request) override;

    /// Skips `count` entries of a stream ("" for the shared one).
    void skip(const std::string& stream, std::size_t count);

    /// Advances past the entries consumed by `calls` (ModelCall events that
    /// completed without error), routed to streams the same way chat() does.
    void fast_forward(const std::vector<WorkflowEvent>& calls);

    std::size_t remaining(const std::string& stream = "") const;
    std::size_t consumed(const std::string& stream = "") const;

    struct Exchange {
        std::string prompt;
        std::string response;
    };
    std::vector<Exchange> transcript() const;

private:
    struct Stream {
        std::vector<ScriptEntry> entries;
        std::size_t cursor = 0;
    };
    Stream& stream_for(const CallTag& tag);

    mutable std::mutex mutex_;
    std::map<std::string, Stream> streams_;
    std::vector<Exchange> transcript_;
};

struct HttpBackendConfig {
    std::string base_url = "http://127.0.0.1:8080/v1";
    std::string model;
    std::string embedding_model;
    std::string auth_env;
    int timeout_seconds = 60;
    int retries = 1;
    std::chrono::milliseconds backoff{200};
};

/// Generic chat-completion client: POST <base>/chat/completions with a
/// messages array, reads choices[0].message.content.
class HttpBackend final : public ChatBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    std::string chat(const ChatRequest& request) override;

private:
    HttpBackendConfig config_;
};

/// POST <base>/embeddings; the returned vector is L2-normalized.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(HttpBackendConfig config, std::size_t dimension);
    EmbeddingVector embed(std::string_view text) const override;
    std::size_t dimension() const override { return dimension_; }

private:
    HttpBackendConfig config_;
    std::size_t dimension_;
};

/// Decorator that records one ModelCall event per chat call, with the
/// prompt hash and the response text.
class EventedBackend final : public ChatBackend {
public:
    EventedBackend(ChatBackend& inner, EventLog& log) : inner_(inner), log_(log) {}
    std::string chat(const ChatRequest& request) override;

private:
    ChatBackend& inner_;
    EventLog& log_;
};

} // namespace agentflow
