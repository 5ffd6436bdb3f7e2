// SPDX-License-Identifier: Apache-2.0
#include "agentflow/task_queue.hpp"

#include "agentflow/error.hpp"

#include <algorithm>
#include <functional>
#include <queue>

namespace agentflow {

std::string_view to_string(TaskStatus status) {
    switch (status) {
    case TaskStatus::Pending: return "pending";
    case TaskStatus::Ready: return "ready";
    case TaskStatus::Running: return "running";
    case TaskStatus::Done: return "done";
    case TaskStatus::Failed: return "failed";
    }
    return "pending";
}

TaskStatus task_status_from_string(std::string_view text) {
    if (text == "pending") return TaskStatus::Pending;
    if (text == "ready") return TaskStatus::Ready;
    if (text == "running") return TaskStatus::Running;
    if (text == "done") return TaskStatus::Done;
    if (text == "failed") return TaskStatus::Failed;
    throw Error(Errc::InvalidArgument, "unknown task status '" + std::string(text) + "'");
}

TaskQueue TaskQueue::build(const std::vector<TaskSpec>& specs) {
    if (specs.empty()) throw Error(Errc::InvalidArgument, "plan contains no tasks");

    std::map<std::string, Task> tasks;
    for (const auto& spec : specs) {
        if (spec.id.empty()) throw Error(Errc::InvalidArgument, "task id is empty");
        Task task;
        task.id = spec.id;
        task.description = spec.description;
        task.depends_on.insert(spec.depends_on.begin(), spec.depends_on.end());
        task.unit_hint = spec.unit_hint;
        if (!tasks.emplace(spec.id, std::move(task)).second)
            throw Error(Errc::DuplicateId, "duplicate task id '" + spec.id + "'");
    }
    for (const auto& [id, task] : tasks) {
        for (const auto& dep : task.depends_on) {
            if (!tasks.count(dep))
                throw Error(Errc::UnknownDependency,
                            "task '" + id + "' depends on unknown task '" + dep + "'");
        }
    }
    check_acyclic(tasks);

    TaskQueue queue;
    queue.tasks_ = std::move(tasks);
    for (auto& [id, task] : queue.tasks_)
        task.status = task.depends_on.empty() ? TaskStatus::Ready : TaskStatus::Pending;
    return queue;
}

void TaskQueue::check_acyclic(const std::map<std::string, Task>& tasks) {
    enum class Mark { White, Grey, Black };
    std::map<std::string, Mark> mark;
    for (const auto& [id, task] : tasks) mark[id] = Mark::White;
    std::vector<std::string> stack;

    std::function<void(const std::string&)> visit = [&](const std::string& id) {
        mark[id] = Mark::Grey;
        stack.push_back(id);
        for (const auto& dep : tasks.at(id).depends_on) {
            if (mark[dep] == Mark::Grey) {
                auto start = std::find(stack.begin(), stack.end(), dep);
                std::vector<std::string> cycle(start, stack.end());
                cycle.push_back(dep);
                throw CycleError(std::move(cycle));
            }
            if (mark[dep] == Mark::White) visit(dep);
        }
        stack.pop_back();
        mark[id] = Mark::Black;
    };
    for (const auto& [id, task] : tasks) {
        if (mark[id] == Mark::White) visit(id);
    }
}

std::vector<Task> TaskQueue::ready_tasks() {
    std::vector<Task> ready;
    for (auto& [id, task] : tasks_) {
        if (task.status == TaskStatus::Pending) {
            bool satisfied = std::all_of(task.depends_on.begin(), task.depends_on.end(),
                                         [&](const std::string& dep) {
                                             return tasks_.at(dep).status == TaskStatus::Done;
                                         });
            if (satisfied) task.status = TaskStatus::Ready;
        }
        if (task.status == TaskStatus::Ready) ready.push_back(task);
    }
    return ready;
}

Task& TaskQueue::mutable_task(const std::string& id) {
    auto it = tasks_.find(id);
    if (it == tasks_.end()) throw Error(Errc::UnknownTask, "unknown task '" + id + "'");
    return it->second;
}

const Task& TaskQueue::task(const std::string& id) const {
    auto it = tasks_.find(id);
    if (it == tasks_.end()) throw Error(Errc::UnknownTask, "unknown task '" + id + "'");
    return it->second;
}

void TaskQueue::start_task(const std::string& id) {
    Task& task = mutable_task(id);
    if (task.status != TaskStatus::Ready)
        throw Error(Errc::InvalidTransition,
                    "cannot start task '" + id + "' in state " + std::string(to_string(task.status)));
    task.status = TaskStatus::Running;
}

void TaskQueue::complete_task(const std::string& id, const std::string& result) {
    Task& task = mutable_task(id);
    if (task.status != TaskStatus::Running)
        throw Error(Errc::InvalidTransition, "cannot complete task '" + id + "' in state " +
                                                 std::string(to_string(task.status)));
    task.status = TaskStatus::Done;
    task.result = result;
    for (auto& [other_id, other] : tasks_) {
        if (other.depends_on.count(id)) other.dependency_results[id] = result;
    }
}

void TaskQueue::fail_task(const std::string& id, const std::string& reason) {
    Task& task = mutable_task(id);
    if (task.status != TaskStatus::Running)
        throw Error(Errc::InvalidTransition,
                    "cannot fail task '" + id + "' in state " + std::string(to_string(task.status)));
    task.status = TaskStatus::Failed;
    task.failure = reason;
}

void TaskQueue::restart_task(const std::string& id) {
    Task& task = mutable_task(id);
    if (task.status != TaskStatus::Running)
        throw Error(Errc::InvalidTransition,
                    "cannot restart task '" + id + "' in state " + std::string(to_string(task.status)));
    task.status = TaskStatus::Ready;
}

std::vector<std::string> TaskQueue::topological_order() const {
    check_acyclic(tasks_);
    std::map<std::string, std::size_t> in_degree;
    for (const auto& [id, task] : tasks_) in_degree[id] = task.depends_on.size();

    std::priority_queue<std::string, std::vector<std::string>, std::greater<>> available;
    for (const auto& [id, degree] : in_degree) {
        if (degree == 0) available.push(id);
    }
    std::vector<std::string> order;
    order.reserve(tasks_.size());
    while (!available.empty()) {
        std::string id = available.top();
        available.pop();
        order.push_back(id);
        for (const auto& child : dependents(id)) {
            if (--in_degree[child] == 0) available.push(child);
        }
    }
    return order;
}

std::vector<std::string> TaskQueue::dependents(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& [other_id, other] : tasks_) {
        if (other.depends_on.count(id)) out.push_back(other_id);
    }
    return out;
}

std::vector<std::string> TaskQueue::sinks() const {
    std::vector<std::string> out;
    for (const auto& id : topological_order()) {
        if (dependents(id).empty()) out.push_back(id);
    }
    return out;
}

bool TaskQueue::all_done() const {
    return std::all_of(tasks_.begin(), tasks_.end(),
                       [](const auto& kv) { return kv.second.status == TaskStatus::Done; });
}

bool TaskQueue::any_failed() const { return count(TaskStatus::Failed) > 0; }

std::size_t TaskQueue::count(TaskStatus status) const {
    return static_cast<std::size_t>(std::count_if(
        tasks_.begin(), tasks_.end(), [&](const auto& kv) { return kv.second.status == status; }));
}

std::vector<TaskSpec> TaskQueue::specs() const {
    std::vector<TaskSpec> out;
    for (const auto& [id, task] : tasks_) {
        out.push_back(TaskSpec{id, task.description,
                               {task.depends_on.begin(), task.depends_on.end()},
                               task.unit_hint});
    }
    return out;
}

nlohmann::json TaskQueue::to_json() const {
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& [id, task] : tasks_) {
        nlohmann::json t{{"id", id},
                         {"description", task.description},
                         {"depends_on", task.depends_on},
                         {"status", to_string(task.status)},
                         {"dependency_results", task.dependency_results}};
        t["unit_hint"] = task.unit_hint ? nlohmann::json(*task.unit_hint) : nlohmann::json();
        t["result"] = task.result ? nlohmann::json(*task.result) : nlohmann::json();
        t["failure"] = task.failure ? nlohmann::json(*task.failure) : nlohmann::json();
        tasks.push_back(std::move(t));
    }
    return nlohmann::json{{"tasks", std::move(tasks)}};
}

TaskQueue TaskQueue::from_json(const nlohmann::json& j) {
    std::vector<TaskSpec> specs;
    for (const auto& t : j.at("tasks")) specs.push_back(t.get<TaskSpec>());
    TaskQueue queue = specs.empty() ? TaskQueue{} : build(specs);
    for (const auto& t : j.at("tasks")) {
        Task& task = queue.mutable_task(t.at("id").get<std::string>());
        task.status = task_status_from_string(t.at("status").get<std::string>());
        if (t.contains("result") && !t["result"].is_null()) task.result = t["result"].get<std::string>();
        if (t.contains("failure") && !t["failure"].is_null())
            task.failure = t["failure"].get<std::string>();
        task.dependency_results =
            t.value("dependency_results", std::map<std::string, std::string>{});
    }
    return queue;
}

void to_json(nlohmann::json& j, const TaskSpec& spec) {
    j = nlohmann::json{{"id", spec.id},
                       {"description", spec.description},
                       {"depends_on", spec.depends_on}};
    j["unit_hint"] = spec.unit_hint ? nlohmann::json(*spec.unit_hint) : nlohmann::json();
}

void from_json(const nlohmann::json& j, TaskSpec& spec) {
    spec.id = j.at("id").get<std::string>();
    spec.description = j.at("description").get<std::string>();
    spec.depends_on = j.value("depends_on", std::vector<std::string>{});
    spec.unit_hint.reset();
    if (j.contains("unit_hint") && j["unit_hint"].is_string())
        spec.unit_hint = j["unit_hint"].get<std::string>();
}

} // namespace agentflow
