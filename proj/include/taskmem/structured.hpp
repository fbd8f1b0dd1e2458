#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskmem/action.hpp"
#include "taskmem/memory.hpp"

// Extraction and validation of the JSON payloads the model is asked to emit.
namespace taskmem::llm {

enum class Schema { sub_task_list, selected_sub_task, derived_action, slot_fill, task_name };

std::string_view to_string(Schema s);

// A sub-task as proposed by the model: UI indexes are resolved to signatures
// by the caller.
struct ProposedSubTask {
    memory::SubTask sub_task;  // key_ui_refs empty
    std::vector<int> ui_indexes;
    bool operator==(const ProposedSubTask&) const = default;
};

struct Selection {
    std::string name;
    ParameterBinding parameters;
    bool operator==(const Selection&) const = default;
};

// Either one action or the statement that the sub-task is complete.
struct DerivedAction {
    std::optional<Action> action;
    bool done = false;
    bool operator==(const DerivedAction&) const = default;
};

struct TaskName {
    std::string name;
    memory::ParamList parameters;  // name -> description
    ParameterBinding values;
    bool operator==(const TaskName&) const = default;
};

using Structured = std::variant<std::vector<ProposedSubTask>, Selection, DerivedAction, ParameterBinding, TaskName>;

// First balanced JSON value in the text, skipping prose and code fences.
// Bare object keys are quoted before parsing. Throws UnparsableResponse.
nlohmann::ordered_json extract_json(std::string_view text);

Structured parse_structured(std::string_view text, Schema schema);

std::vector<ProposedSubTask> parse_sub_task_list(std::string_view text);
Selection parse_selection(std::string_view text);
DerivedAction parse_derived_action(std::string_view text);
ParameterBinding parse_slot_fill(std::string_view text);
TaskName parse_task_name(std::string_view text);

// Canonical JSON text for each schema; parse_structured inverts these.
std::string serialize(const std::vector<ProposedSubTask>& v);
std::string serialize(const Selection& v);
std::string serialize(const DerivedAction& v);
std::string serialize(const ParameterBinding& v);
std::string serialize(const TaskName& v);
std::string serialize(const Structured& v);

}  // namespace taskmem::llm
