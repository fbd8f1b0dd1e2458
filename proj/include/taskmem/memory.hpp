#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "taskmem/action.hpp"
#include "taskmem/layout.hpp"

namespace taskmem::memory {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kMaxExampleScreens = 3;

inline constexpr std::string_view kReadScreen = "Read_Screen";
inline constexpr std::string_view kFinish = "Finish";
inline constexpr std::string_view kAskUser = "Ask_User";

using NodeId = int;
using ParamList = std::vector<std::pair<std::string, std::string>>;  // name -> description, ordered

struct SubTask {
    std::string name;
    std::string description;
    ParamList parameters;
    std::vector<UiSignature> key_ui_refs;

    bool has_parameter(std::string_view param) const;
    bool operator==(const SubTask&) const = default;
};

bool is_global_sub_task(std::string_view name);
// Read_Screen, Finish and Ask_User; available on every screen.
const std::vector<SubTask>& global_sub_tasks();

struct PageNode {
    NodeId node_id = 0;
    std::vector<SubTask> sub_tasks;
    std::vector<std::string> example_screens;  // serialized screens, oldest first

    const SubTask* find(std::string_view name) const;
    bool operator==(const PageNode&) const = default;
};

enum class Provenance { llm_derived, user_repaired };
std::string_view to_string(Provenance p);

// One concrete step of the trace an edge was learned from.
struct DemoStep {
    std::string screen;  // serialized screen the action was issued on
    Action action;
    bool operator==(const DemoStep&) const = default;
};

struct EdgeExample {
    std::string instruction;
    ParameterBinding binding;
    std::vector<DemoStep> steps;
    bool operator==(const EdgeExample&) const = default;
};

struct SubTaskEdge {
    NodeId from_node = 0;
    std::string sub_task_name;
    std::vector<GeneralizedAction> actions;
    std::optional<NodeId> to_node;
    Provenance provenance = Provenance::llm_derived;
    std::optional<EdgeExample> example;
    bool operator==(const SubTaskEdge&) const = default;
};

struct TaskStep {
    NodeId node_id = 0;
    std::string sub_task_name;
    std::vector<std::string> parameter_names;  // bound at recall time
    bool operator==(const TaskStep&) const = default;
};

struct TaskRecord {
    std::string task_name;
    ParamList parameter_schema;
    std::vector<TaskStep> steps;
    bool operator==(const TaskRecord&) const = default;
};

using EdgeKey = std::pair<NodeId, std::string>;

struct MemoryData {
    int version = kSchemaVersion;
    std::string app_id;
    std::map<NodeId, PageNode> nodes;
    std::map<EdgeKey, SubTaskEdge> edges;
    std::map<std::string, TaskRecord> tasks;
    bool operator==(const MemoryData&) const = default;
};

// Lowercase with collapsed whitespace.
std::string normalize_task_name(std::string_view name);

// Human-readable integrity problems; empty when the data is consistent.
std::vector<std::string> integrity_problems(const MemoryData& data);

struct EdgeWrite {
    std::vector<GeneralizedAction> actions;
    std::optional<NodeId> to_node;
    Provenance provenance = Provenance::llm_derived;
    std::optional<EdgeExample> example;
    // Allows an llm_derived write to replace another llm_derived edge.
    bool overwrite = false;
};

// Per-app transition graph. Mutations take an exclusive lock; reads take a
// shared lock and return copies, so callers always see a consistent state.
class AppMemory {
public:
    AppMemory() = default;
    explicit AppMemory(std::string app_id);
    explicit AppMemory(MemoryData data);  // throws IntegrityViolation

    AppMemory(const AppMemory& other);
    AppMemory& operator=(const AppMemory& other);

    MemoryData snapshot() const;
    std::string app_id() const;
    std::size_t node_count() const;
    std::size_t edge_count() const;

    NodeId add_node(std::vector<SubTask> sub_tasks, const layout::ScreenRepresentation& screen);
    // Adds sub-tasks whose names the node lacks; never removes any.
    void merge_sub_tasks(NodeId node, const std::vector<SubTask>& sub_tasks);
    void add_sub_task(NodeId node, SubTask sub_task);
    // Drops the sub-task, its edge, and any task record stepping through it.
    void remove_sub_task(NodeId node, std::string_view name);
    void add_example_screen(NodeId node, std::string serialized);

    void record_edge(NodeId from, std::string_view sub_task_name, EdgeWrite write);
    void set_edge_target(NodeId from, std::string_view sub_task_name, NodeId to);
    void record_task(std::string_view task_name, ParamList parameter_schema, std::vector<TaskStep> steps);

    std::optional<TaskRecord> lookup_task(std::string_view task_name) const;
    std::optional<SubTaskEdge> find_edge(NodeId from, std::string_view sub_task_name) const;
    std::optional<PageNode> node(NodeId id) const;

    bool operator==(const AppMemory& other) const { return snapshot() == other.snapshot(); }

private:
    void check_or_rollback(const MemoryData& before);

    mutable std::shared_mutex mutex_;
    MemoryData data_;
};

void save(const AppMemory& mem, const std::filesystem::path& path);
AppMemory load(const std::filesystem::path& path);

Json to_json(const MemoryData& data);
MemoryData memory_from_json(const Json& j);

std::filesystem::path memory_path(const std::filesystem::path& dir, std::string_view app_id);

}  // namespace taskmem::memory
