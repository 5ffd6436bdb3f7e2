// SPDX-License-Identifier: Apache-2.0
#include "agentflow/backend.hpp"

#include "agentflow/error.hpp"
#include "agentflow/events.hpp"
#include "agentflow/util.hpp"

#include <httplib.h>

#include <cstdlib>
#include <thread>

namespace agentflow {

void ChatRequest::validate() const {
    if (messages.empty() || messages.front().role != Role::System)
        throw Error(Errc::InvalidRequest, "chat request must start with a system message");
    for (std::size_t i = 1; i < messages.size(); ++i) {
        if (messages[i].role == Role::Assistant && messages[i - 1].role == Role::Assistant)
            throw Error(Errc::InvalidRequest, "chat request has consecutive assistant messages");
    }
    if (temperature < 0.0) throw Error(Errc::InvalidRequest, "temperature must be >= 0");
    if (max_tokens <= 0) throw Error(Errc::InvalidRequest, "max_tokens must be positive");
}

std::string render_prompt(const ChatRequest& request) {
    std::string out;
    for (const auto& m : request.messages) {
        if (!out.empty()) out += "\n\n";
        out += to_string(m.role);
        out += ": ";
        out += m.content;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scripted backend

std::vector<ScriptEntry> parse_script(std::string_view jsonl) {
    std::vector<ScriptEntry> entries;
    std::size_t line_no = 0;
    for (const auto& line : util::split_lines(jsonl)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(Errc::InvalidArgument,
                        "fixture line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("response") || !j["response"].is_string())
            throw Error(Errc::InvalidArgument,
                        "fixture line " + std::to_string(line_no) + ": missing string 'response'");
        ScriptEntry entry;
        if (j.contains("expect") && j["expect"].is_string()) entry.expect = j["expect"].get<std::string>();
        entry.response = j["response"].get<std::string>();
        entry.task = j.value("task", std::string{});
        entries.push_back(std::move(entry));
    }
    return entries;
}

std::vector<ScriptEntry> load_script(const std::string& jsonl_path) {
    return parse_script(util::read_file(jsonl_path));
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries) {
    streams_[""];
    for (auto& entry : entries) {
        std::string key = entry.task;
        streams_[key].entries.push_back(std::move(entry));
    }
}

ScriptedBackend::Stream& ScriptedBackend::stream_for(const CallTag& tag) {
    if (!tag.task_id.empty()) {
        auto it = streams_.find(tag.task_id);
        if (it != streams_.end()) return it->second;
    }
    return streams_.at("");
}

std::string ScriptedBackend::chat(const ChatRequest& request) {
    request.validate();
    std::lock_guard lock(mutex_);
    Stream& stream = stream_for(request.tag);
    std::string prompt = render_prompt(request);
    if (stream.cursor >= stream.entries.size()) {
        throw Error(Errc::ScriptExhausted,
                    "scripted backend exhausted after " + std::to_string(stream.cursor) +
                        " responses (task '" + request.tag.task_id + "', agent '" +
                        request.tag.agent + "'); prompt was:\n" + prompt);
    }
    const ScriptEntry& entry = stream.entries[stream.cursor];
    if (entry.expect && prompt.find(*entry.expect) == std::string::npos) {
        throw Error(Errc::ScriptMismatch,
                    "scripted entry " + std::to_string(stream.cursor) + " expects substring '" +
                        *entry.expect + "' which is missing from the prompt (task '" +
                        request.tag.task_id + "', agent '" + request.tag.agent +
                        "'); prompt was:\n" + prompt);
    }
    ++stream.cursor;
    transcript_.push_back({prompt, entry.response});
    return entry.response;
}

void ScriptedBackend::skip(const std::string& stream, std::size_t count) {
    std::lock_guard lock(mutex_);
    auto it = streams_.find(stream);
    if (it == streams_.end()) it = streams_.find("");
    Stream& s = it->second;
    if (s.cursor + count > s.entries.size())
        throw Error(Errc::ScriptExhausted, "cannot skip past the end of stream '" + stream + "'");
    s.cursor += count;
}

void ScriptedBackend::fast_forward(const std::vector<WorkflowEvent>& calls) {
    std::map<std::string, std::size_t> counts;
    for (const auto& event : calls) {
        if (event.kind != EventKind::ModelCall || event.payload.contains("error")) continue;
        std::string task = event.payload.value("task_id", std::string{});
        std::string stream;
        {
            std::lock_guard lock(mutex_);
            stream = (!task.empty() && streams_.count(task)) ? task : "";
        }
        ++counts[stream];
    }
    for (const auto& [stream, n] : counts) skip(stream, n);
}

std::size_t ScriptedBackend::remaining(const std::string& stream) const {
    std::lock_guard lock(mutex_);
    auto it = streams_.find(stream);
    if (it == streams_.end()) return 0;
    return it->second.entries.size() - it->second.cursor;
}

std::size_t ScriptedBackend::consumed(const std::string& stream) const {
    std::lock_guard lock(mutex_);
    auto it = streams_.find(stream);
    return it == streams_.end() ? 0 : it->second.cursor;
}

std::vector<ScriptedBackend::Exchange> ScriptedBackend::transcript() const {
    std::lock_guard lock(mutex_);
    return transcript_;
}

// ---------------------------------------------------------------------------
// HTTP backend

namespace {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(Errc::ConfigError, "base URL '" + url + "' has no scheme");
    auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl parsed;
    if (path_start == std::string::npos) {
        parsed.scheme_host_port = url;
    } else {
        parsed.scheme_host_port = url.substr(0, path_start);
        parsed.path_prefix = url.substr(path_start);
    }
    while (!parsed.path_prefix.empty() && parsed.path_prefix.back() == '/')
        parsed.path_prefix.pop_back();
    return parsed;
}

nlohmann::json post_json(const HttpBackendConfig& config, const std::string& endpoint,
                         const nlohmann::json& body) {
    ParsedUrl url = parse_base_url(config.base_url);
    httplib::Headers headers;
    if (!config.auth_env.empty()) {
        if (const char* token = std::getenv(config.auth_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    std::string payload = body.dump();
    std::string last_error;
    auto backoff = config.backoff;
    for (int attempt = 0; attempt <= config.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        httplib::Client client(url.scheme_host_port);
        client.set_connection_timeout(config.timeout_seconds, 0);
        client.set_read_timeout(config.timeout_seconds, 0);
        client.set_write_timeout(config.timeout_seconds, 0);
        auto res = client.Post(url.path_prefix + endpoint, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500 || res->status == 429) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw Error(Errc::BackendUnavailable,
                        "HTTP " + std::to_string(res->status) + " from " + endpoint + ": " + res->body);
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(Errc::BackendUnavailable, std::string("malformed response body: ") + e.what());
        }
    }
    throw Error(Errc::BackendUnavailable, endpoint + " failed: " + last_error);
}

} // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    parse_base_url(config_.base_url);
}

std::string HttpBackend::chat(const ChatRequest& request) {
    request.validate();
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : request.messages)
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    nlohmann::json body{{"model", config_.model},
                        {"messages", std::move(messages)},
                        {"temperature", request.temperature},
                        {"max_tokens", request.max_tokens}};
    if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;

    nlohmann::json reply = post_json(config_, "/chat/completions", body);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::BackendUnavailable, std::string("unexpected completion shape: ") + e.what());
    }
}

HttpEmbedder::HttpEmbedder(HttpBackendConfig config, std::size_t dimension)
    : config_(std::move(config)), dimension_(dimension) {
    parse_base_url(config_.base_url);
}

EmbeddingVector HttpEmbedder::embed(std::string_view text) const {
    EmbeddingVector v;
    if (tokenize(text).empty()) {
        v.values.assign(dimension_, 0.0);
        return v;
    }
    nlohmann::json body{{"model", config_.embedding_model}, {"input", std::string(text)}};
    nlohmann::json reply = post_json(config_, "/embeddings", body);
    try {
        v.values = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::BackendUnavailable, std::string("unexpected embedding shape: ") + e.what());
    }
    if (v.values.size() != dimension_)
        throw Error(Errc::DimensionMismatch, "embedding endpoint returned dimension " +
                                                 std::to_string(v.values.size()));
    double n = v.norm();
    if (n > 0.0) {
        for (double& x : v.values) x /= n;
    }
    return v;
}

// ---------------------------------------------------------------------------

std::string EventedBackend::chat(const ChatRequest& request) {
    std::string prompt = render_prompt(request);
    nlohmann::json payload{{"task_id", request.tag.task_id},
                           {"agent", request.tag.agent},
                           {"messages", request.messages.size()},
                           {"prompt_hash", util::hex64(util::fnv1a64(prompt))}};
    try {
        std::string response = inner_.chat(request);
        payload["response_hash"] = util::hex64(util::fnv1a64(response));
        payload["response"] = response;
        log_.append(EventKind::ModelCall, std::move(payload));
        return response;
    } catch (const Error& e) {
        payload["error"] = std::string(to_string(e.code()));
        log_.append(EventKind::ModelCall, std::move(payload));
        throw;
    }
}

} // namespace agentflow
