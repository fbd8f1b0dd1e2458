#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskmem/agent.hpp"

namespace taskmem::repair {

using Json = nlohmann::json;

enum class EventKind { add_sub_task, remove_sub_task, change_selection, edit_parameters, demonstrate_actions, rollback_to };

std::string_view to_string(EventKind k);

struct RepairEvent {
    EventKind kind = EventKind::demonstrate_actions;
    std::optional<memory::NodeId> node;  // defaults to the current screen's node
    std::string sub_task;                // name for all kinds except rollback_to and edit_parameters
    std::optional<memory::SubTask> new_sub_task;  // add_sub_task
    std::vector<int> ui_indexes;                  // add_sub_task: key UI on the current screen
    ParameterBinding parameters;                  // change_selection, edit_parameters, demonstrate_actions
    std::vector<Action> actions;                  // demonstrate_actions
    std::size_t step = 0;                         // rollback_to
};

RepairEvent event_from_json(const Json& j);
Json to_json(const RepairEvent& e);

struct RepairResult {
    std::vector<std::string> warnings;  // e.g. IrreversibleStateWarning
};

// Pauses the session and renders what it has executed so far.
std::string enter_repair(agent::Agent& agent);
std::string execution_summary(const agent::Session& session);

// Throws NotPaused unless the session is paused; InvalidTarget for events
// naming missing nodes, sub-tasks, or steps.
RepairResult apply_repair(agent::Agent& agent, const RepairEvent& event);

// Returns to the phase the session was paused in.
void resume(agent::Agent& agent);

struct ScriptEntry {
    std::size_t breakpoint = 0;
    RepairEvent event;
};

std::vector<ScriptEntry> parse_repair_script(const Json& j);
std::vector<ScriptEntry> load_repair_script(const std::filesystem::path& path);

// Applies each entry once, when the session reaches its breakpoint step.
class ScriptedRepair final : public agent::RepairHook {
public:
    explicit ScriptedRepair(std::vector<ScriptEntry> entries) : entries_(std::move(entries)), applied_(entries_.size(), false) {}

    bool at_breakpoint(agent::Agent& agent, std::size_t step) override;

    const std::vector<std::string>& summaries() const { return summaries_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    std::vector<ScriptEntry> entries_;
    std::vector<bool> applied_;
    std::vector<std::string> summaries_;
    std::vector<std::string> warnings_;
};

// Interactive console: at the chosen breakpoint, prints the summary and reads
// one JSON repair event per line until "resume".
class ConsoleRepair final : public agent::RepairHook {
public:
    ConsoleRepair(std::size_t breakpoint, std::istream& in, std::ostream& out) : breakpoint_(breakpoint), in_(in), out_(out) {}

    bool at_breakpoint(agent::Agent& agent, std::size_t step) override;

private:
    std::size_t breakpoint_;
    bool used_ = false;
    std::istream& in_;
    std::ostream& out_;
};

}  // namespace taskmem::repair
