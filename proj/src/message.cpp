// SPDX-License-Identifier: Apache-2.0
#include "agentflow/message.hpp"

#include "agentflow/error.hpp"
#include "agentflow/util.hpp"

namespace agentflow {

std::string_view to_string(Role role) {
    switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    }
    return "user";
}

std::string_view to_string(Origin origin) {
    switch (origin) {
    case Origin::Model: return "model";
    case Origin::ToolResult: return "tool_result";
    case Origin::Human: return "human";
    case Origin::Framework: return "framework";
    }
    return "framework";
}

Role role_from_string(std::string_view text) {
    if (text == "system") return Role::System;
    if (text == "user") return Role::User;
    if (text == "assistant") return Role::Assistant;
    throw Error(Errc::InvalidArgument, "unknown role '" + std::string(text) + "'");
}

Origin origin_from_string(std::string_view text) {
    if (text == "model") return Origin::Model;
    if (text == "tool_result") return Origin::ToolResult;
    if (text == "human") return Origin::Human;
    if (text == "framework") return Origin::Framework;
    throw Error(Errc::InvalidArgument, "unknown origin '" + std::string(text) + "'");
}

Message Message::system(std::string content) {
    Message m{Role::System, std::move(content), {}, Origin::Framework};
    m.validate();
    return m;
}

Message Message::user(std::string content, Origin origin) {
    Message m{Role::User, std::move(content), {}, origin};
    m.validate();
    return m;
}

Message Message::assistant(std::string content, std::vector<std::string> stage_tags) {
    Message m{Role::Assistant, std::move(content), std::move(stage_tags), Origin::Model};
    m.validate();
    return m;
}

void Message::validate() const {
    if (util::trim(content).empty())
        throw Error(Errc::InvalidArgument, "message content is empty");
    if (!stage_tags.empty() && role != Role::Assistant)
        throw Error(Errc::InvalidArgument, "stage tags are only valid on assistant messages");
}

void to_json(nlohmann::json& j, const Message& m) {
    j = nlohmann::json{{"role", to_string(m.role)},
                       {"content", m.content},
                       {"origin", to_string(m.origin)}};
    if (!m.stage_tags.empty()) j["stage_tags"] = m.stage_tags;
}

void from_json(const nlohmann::json& j, Message& m) {
    m.role = role_from_string(j.at("role").get<std::string>());
    m.content = j.at("content").get<std::string>();
    m.origin = origin_from_string(j.value("origin", std::string("framework")));
    m.stage_tags = j.value("stage_tags", std::vector<std::string>{});
}

} // namespace agentflow
