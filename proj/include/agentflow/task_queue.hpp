// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace agentflow {

enum class TaskStatus { Pending, Ready, Running, Done, Failed };

std::string_view to_string(TaskStatus status);
TaskStatus task_status_from_string(std::string_view text);

/// Planner output for one task; the plan interchange format is a list of these.
struct TaskSpec {
    std::string id;
    std::string description;
    std::vector<std::string> depends_on;
    std::optional<std::string> unit_hint;

    bool operator==(const TaskSpec&) const = default;
};

struct Task {
    std::string id;
    std::string description;
    std::set<std::string> depends_on;
    TaskStatus status = TaskStatus::Pending;
    std::optional<std::string> result;
    std::map<std::string, std::string> dependency_results;
    std::optional<std::string> unit_hint;
    std::optional<std::string> failure;
};

/// Dependency-resolving container for a plan DAG.
///
/// Ready tracking: a task is Ready exactly when every dependency is Done and
/// it has not been started. The owner moves Ready tasks to Running with
/// start_task() and reports outcomes with complete_task() / fail_task().
/// Not internally synchronized; the coordinator serializes mutations.
class TaskQueue {
public:
    TaskQueue() = default;

    /// Validates ids, dependency references and acyclicity. Sources start Ready.
    static TaskQueue build(const std::vector<TaskSpec>& specs);

    /// Promotes every Pending task whose dependencies are all Done and returns
    /// all Ready (released, not yet started) tasks, ordered by id.
    std::vector<Task> ready_tasks();

    void start_task(const std::string& id);
    void complete_task(const std::string& id, const std::string& result);
    void fail_task(const std::string& id, const std::string& reason);
    /// Running back to Ready, for tasks interrupted by a snapshot/resume.
    void restart_task(const std::string& id);

    /// Kahn's algorithm with the lexicographically smallest available id first.
    std::vector<std::string> topological_order() const;

    /// Tasks no other task depends on, in topological order.
    std::vector<std::string> sinks() const;

    const Task& task(const std::string& id) const;
    const std::map<std::string, Task>& tasks() const noexcept { return tasks_; }
    std::vector<std::string> dependents(const std::string& id) const;

    bool empty() const noexcept { return tasks_.empty(); }
    std::size_t size() const noexcept { return tasks_.size(); }
    bool all_done() const;
    bool any_failed() const;
    std::size_t count(TaskStatus status) const;

    std::vector<TaskSpec> specs() const;

    /// Restores a queue with stored statuses and results (snapshot resume).
    static TaskQueue from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

private:
    Task& mutable_task(const std::string& id);
    static void check_acyclic(const std::map<std::string, Task>& tasks);

    std::map<std::string, Task> tasks_;
};

void to_json(nlohmann::json& j, const TaskSpec& spec);
void from_json(const nlohmann::json& j, TaskSpec& spec);

} // namespace agentflow
