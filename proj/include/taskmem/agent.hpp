#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskmem/action.hpp"
#include "taskmem/classify.hpp"
#include "taskmem/error.hpp"
#include "taskmem/layout.hpp"
#include "taskmem/llm.hpp"
#include "taskmem/memory.hpp"
#include "taskmem/sim.hpp"
#include "taskmem/structured.hpp"

namespace taskmem::agent {

using Json = nlohmann::json;

enum class Phase { idle, explore, select, derive, recall, slot_fill, repair_paused, done, failed };

std::string_view to_string(Phase p);
bool transition_allowed(Phase from, Phase to);

enum class FeedbackOrigin {
    invalid_ui,
    not_actionable,
    no_change,
    loop_detected,
    user_repair,
    unparsable_response,
    invalid_selection,
    no_progress,
};

std::string_view to_string(FeedbackOrigin o);

struct Feedback {
    std::string message;
    FeedbackOrigin origin = FeedbackOrigin::invalid_ui;
    bool operator==(const Feedback&) const = default;
};

struct InvalidIndexEvent {
    int index = 0;
};
struct NotActionableEvent {
    ActionKind kind = ActionKind::click;
};
struct NoScreenChangeEvent {};
struct ScreenLoopEvent {
    int times = 0;
};
using FeedbackEvent = std::variant<InvalidIndexEvent, NotActionableEvent, NoScreenChangeEvent, ScreenLoopEvent>;

Feedback generate_feedback(const FeedbackEvent& event);
Feedback repair_feedback(const std::string& sub_task_description);

inline constexpr int kMaxCorrections = 3;
inline constexpr int kLoopThreshold = 3;
inline constexpr std::size_t kRecentFeedback = 3;

struct HistoryEntry {
    memory::NodeId node = 0;
    std::string sub_task;
    ParameterBinding binding;
    std::vector<Action> actions;
    bool user_repaired = false;
};

struct Counters {
    std::map<std::string, int> queries_by_phase;
    int reasoning_queries = 0;
    int fast_queries = 0;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    double cost = 0.0;
    int actions_executed = 0;  // device actions issued by the agent
    int memory_hits = 0;       // of those, taken from memory without an LLM call
    int corrections = 0;

    int total_queries() const { return reasoning_queries + fast_queries; }
    std::size_t tokens() const { return prompt_tokens + completion_tokens; }
    double memory_hit_rate() const;
};

struct SnapshotMark {
    std::size_t snapshot = 0;
    std::size_t irreversible = 0;  // device irreversible count when taken
};

struct Session {
    std::string instruction;
    std::string app_id;
    Phase phase = Phase::idle;
    std::string task_name;
    memory::ParamList parameter_schema;
    ParameterBinding task_binding;
    std::vector<HistoryEntry> history;
    std::deque<Feedback> feedback_queue;  // consumed by the next reasoning prompt
    std::vector<Feedback> feedback_log;
    std::vector<std::string> transcript;  // screen answers and user replies
    Counters counters;
    std::map<std::size_t, SnapshotMark> snapshots;  // step -> device snapshot
    std::optional<llm::Selection> forced_selection;
    ParameterBinding parameter_overrides;
    bool recalled = false;  // the task record drove at least the start of the run
    Phase paused_from = Phase::idle;
};

// The human side of a session.
class UserChannel {
public:
    virtual ~UserChannel() = default;
    // std::nullopt when the user gives no answer.
    virtual std::optional<std::string> ask(const std::string& question) = 0;
    virtual bool confirm(const std::string& message) = 0;
    virtual void tell(const std::string& message) = 0;
};

// Canned answers, consumed in order; confirmations use a fixed reply.
class ScriptedUser final : public UserChannel {
public:
    explicit ScriptedUser(std::vector<std::string> answers = {}, bool confirm_reply = true)
        : answers_(answers.begin(), answers.end()), confirm_reply_(confirm_reply) {}

    std::optional<std::string> ask(const std::string& question) override;
    bool confirm(const std::string& message) override;
    void tell(const std::string& message) override;

    const std::vector<std::string>& questions() const { return questions_; }
    const std::vector<std::string>& told() const { return told_; }

private:
    std::deque<std::string> answers_;
    bool confirm_reply_;
    std::vector<std::string> questions_;
    std::vector<std::string> told_;
};

class ConsoleUser final : public UserChannel {
public:
    ConsoleUser(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
    std::optional<std::string> ask(const std::string& question) override;
    bool confirm(const std::string& message) override;
    void tell(const std::string& message) override;

private:
    std::istream& in_;
    std::ostream& out_;
};

// JSON-lines transcript of a session.
class EventLog {
public:
    EventLog() = default;
    explicit EventLog(std::ostream* sink) : sink_(sink) {}

    void write(Json event);
    const std::vector<Json>& events() const { return events_; }
    std::vector<Json> of_type(std::string_view type) const;

private:
    std::ostream* sink_ = nullptr;
    std::vector<Json> events_;
};

class Agent;

// Called after each screen classification and before the next selection.
class RepairHook {
public:
    virtual ~RepairHook() = default;
    // Returns true when it changed the session, device, or memory.
    virtual bool at_breakpoint(Agent& agent, std::size_t step) = 0;
};

struct AgentOptions {
    int max_corrections = kMaxCorrections;
    int loop_threshold = kLoopThreshold;
    std::size_t max_steps = 24;
    std::size_t max_derive_actions = 12;
    // Store a re-derived action when it generalizes differently from the edge.
    bool update_edges_after_incontext = true;
    double dedup_threshold = classify::kDefaultDedupThreshold;
};

enum class Outcome { success, failed, needs_user };
std::string_view to_string(Outcome o);

struct TaskOutcome {
    Outcome outcome = Outcome::failed;
    std::optional<ErrorKind> error;
    std::string message;
};

struct DeriveResult {
    std::vector<Action> actions;
    std::vector<GeneralizedAction> generalized;
    std::vector<memory::DemoStep> steps;
};

class Agent {
public:
    Agent(sim::DeviceAdapter& device, memory::AppMemory& memory, llm::LlmBackend& backend, UserChannel& user,
          EventLog* log = nullptr, AgentOptions options = {});

    TaskOutcome run_instruction(const std::string& instruction);

    // Phases, usable on their own.
    llm::TaskName normalize_task(const std::string& instruction);
    std::vector<memory::SubTask> explore_phase(const layout::ScreenRepresentation& rep);
    llm::Selection select_phase(const layout::ScreenRepresentation& rep, memory::NodeId node);
    DeriveResult derive_phase(const memory::SubTask& sub_task, const ParameterBinding& binding, memory::NodeId node);

    // Screen capture and classification, exploring unknown screens.
    layout::ScreenRepresentation capture();
    std::optional<memory::NodeId> classify_screen(const layout::ScreenRepresentation& rep) const;
    memory::NodeId classify_or_explore(const layout::ScreenRepresentation& rep);

    void set_repair_hook(RepairHook* hook) { hook_ = hook; }

    Session& session() { return session_; }
    const Session& session() const { return session_; }
    sim::DeviceAdapter& device() { return device_; }
    memory::AppMemory& memory() { return memory_; }
    UserChannel& user() { return user_; }
    EventLog* log() { return log_; }

    void transition(Phase to);
    void push_feedback(Feedback f);
    // The edge whose target node is learned from the next classified screen.
    void set_pending_edge(memory::NodeId from, std::string sub_task) { pending_edge_ = memory::EdgeKey{from, std::move(sub_task)}; }
    void clear_pending_edge() { pending_edge_.reset(); }
    void log_action(const Action& a, const std::string& sub_task, std::string_view source);
    void take_snapshot();

private:
    std::string query(const llm::LlmRequest& req);
    std::string consume_feedback(bool include_recent);
    void correction(const std::string& what);

    // Returns the node the task finished on.
    memory::NodeId cold_loop();
    // false when a repair or divergence hands control to the cold loop.
    bool recall(const memory::TaskRecord& rec);
    bool breakpoint();
    void resolve_pending_edge(const std::optional<memory::NodeId>& node);

    ParameterBinding complete_binding(const memory::SubTask& sub_task, ParameterBinding binding);
    ParameterBinding slot_fill(const memory::SubTask& sub_task, const layout::ScreenRepresentation& rep);
    void read_screen(memory::NodeId node, const ParameterBinding& binding, const layout::ScreenRepresentation& rep);
    void ask_user_step(memory::NodeId node, const ParameterBinding& binding);
    std::vector<Action> execute_edge(const memory::SubTaskEdge& edge, const memory::SubTask& sub_task,
                                     const ParameterBinding& binding);
    Action incontext_action(const memory::SubTaskEdge& edge, std::size_t index, const memory::SubTask& sub_task,
                            const ParameterBinding& binding, const layout::ScreenRepresentation& rep);
    bool check_action(const Action& a, const layout::ScreenRepresentation& rep);
    void dispatch(const Action& a);
    void record_task(memory::NodeId final_node);
    void summary(const TaskOutcome& outcome, double ms);

    sim::DeviceAdapter& device_;
    memory::AppMemory& memory_;
    llm::LlmBackend& backend_;
    UserChannel& user_;
    EventLog* log_;
    AgentOptions options_;
    RepairHook* hook_ = nullptr;
    Session session_;
    std::optional<memory::EdgeKey> pending_edge_;
    int step_corrections_ = 0;
};

}  // namespace taskmem::agent
