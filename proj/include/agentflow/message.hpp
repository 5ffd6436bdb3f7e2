// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace agentflow {

enum class Role { System, User, Assistant };
enum class Origin { Model, ToolResult, Human, Framework };

std::string_view to_string(Role role);
std::string_view to_string(Origin origin);
Role role_from_string(std::string_view text);
Origin origin_from_string(std::string_view text);

/// One role-tagged entry of a conversation. Construct through the factory
/// functions, which enforce the content and stage-tag invariants.
struct Message {
    Role role = Role::User;
    std::string content;
    std::vector<std::string> stage_tags;
    Origin origin = Origin::Framework;

    static Message system(std::string content);
    static Message user(std::string content, Origin origin = Origin::Framework);
    static Message assistant(std::string content, std::vector<std::string> stage_tags = {});

    /// Throws Errc::InvalidArgument when an invariant does not hold.
    void validate() const;

    bool operator==(const Message&) const = default;
};

void to_json(nlohmann::json& j, const Message& m);
void from_json(const nlohmann::json& j, Message& m);

} // namespace agentflow
