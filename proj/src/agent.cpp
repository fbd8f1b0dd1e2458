#include "taskmem/agent.hpp"

#include <algorithm>
#include <iostream>
#include <set>

#include "taskmem/adapt.hpp"
#include "taskmem/prompts.hpp"
#include "taskmem/text.hpp"

namespace taskmem::agent {

namespace {

// Raised when the user leaves a question unanswered.
struct NeedsUser {
    std::string question;
};

std::string_view ability_word(ActionKind k) {
    switch (k) {
        case ActionKind::click: return "click";
        case ActionKind::long_click: return "long-click";
        case ActionKind::input: return "edit";
        case ActionKind::scroll: return "scroll";
        default: return to_string(k);
    }
}

bool tag_allows(ActionKind k, layout::Tag tag) {
    switch (k) {
        case ActionKind::click: return tag == layout::Tag::button || tag == layout::Tag::checkbox;
        case ActionKind::long_click: return tag == layout::Tag::button;
        case ActionKind::input: return tag == layout::Tag::input;
        case ActionKind::scroll: return tag == layout::Tag::scroll;
        default: return true;
    }
}

std::string sub_task_line(const memory::SubTask& st) {
    nlohmann::ordered_json j;
    j["name"] = st.name;
    j["description"] = st.description;
    j["parameters"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : st.parameters) j["parameters"][k] = v;
    return j.dump();
}

std::string numbered(const std::vector<std::string>& lines) {
    if (lines.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) out += "\n";
        out += std::to_string(i + 1) + ". " + lines[i];
    }
    return out;
}

std::string bullet_block(const std::string& title, const std::vector<std::string>& lines) {
    if (lines.empty()) return {};
    std::string out = "\n\n" + title + ":";
    for (const auto& l : lines) out += "\n- " + l;
    return out;
}

Json action_json(const Action& a) {
    Json j;
    to_json(j, a);
    return j;
}

const memory::SubTask* find_global(std::string_view name) {
    for (const auto& g : memory::global_sub_tasks()) {
        if (g.name == name) return &g;
    }
    return nullptr;
}

}  // namespace

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::idle: return "idle";
        case Phase::explore: return "explore";
        case Phase::select: return "select";
        case Phase::derive: return "derive";
        case Phase::recall: return "recall";
        case Phase::slot_fill: return "slot_fill";
        case Phase::repair_paused: return "repair_paused";
        case Phase::done: return "done";
        case Phase::failed: return "failed";
    }
    return "?";
}

bool transition_allowed(Phase from, Phase to) {
    using P = Phase;
    if (from == to) return from != P::done && from != P::failed;
    switch (from) {
        case P::idle: return to == P::explore || to == P::select || to == P::recall || to == P::failed || to == P::repair_paused;
        case P::explore: return to == P::select || to == P::failed || to == P::repair_paused;
        case P::select:
            return to == P::derive || to == P::recall || to == P::explore || to == P::done || to == P::failed ||
                   to == P::repair_paused;
        case P::derive: return to == P::select || to == P::explore || to == P::failed || to == P::repair_paused;
        case P::recall:
            return to == P::slot_fill || to == P::select || to == P::explore || to == P::done || to == P::failed ||
                   to == P::repair_paused;
        case P::slot_fill: return to == P::recall || to == P::failed || to == P::repair_paused;
        case P::repair_paused:
            return to == P::explore || to == P::select || to == P::derive || to == P::recall || to == P::slot_fill ||
                   to == P::failed;
        case P::done:
        case P::failed: return false;
    }
    return false;
}

std::string_view to_string(FeedbackOrigin o) {
    switch (o) {
        case FeedbackOrigin::invalid_ui: return "invalid_ui";
        case FeedbackOrigin::not_actionable: return "not_actionable";
        case FeedbackOrigin::no_change: return "no_change";
        case FeedbackOrigin::loop_detected: return "loop_detected";
        case FeedbackOrigin::user_repair: return "user_repair";
        case FeedbackOrigin::unparsable_response: return "unparsable_response";
        case FeedbackOrigin::invalid_selection: return "invalid_selection";
        case FeedbackOrigin::no_progress: return "no_progress";
    }
    return "?";
}

Feedback generate_feedback(const FeedbackEvent& event) {
    struct Visitor {
        Feedback operator()(const InvalidIndexEvent& e) const {
            return {"There is no UI with index " + std::to_string(e.index), FeedbackOrigin::invalid_ui};
        }
        Feedback operator()(const NotActionableEvent& e) const {
            return {"The UI is not " + std::string(ability_word(e.kind)) + "able.", FeedbackOrigin::not_actionable};
        }
        Feedback operator()(const NoScreenChangeEvent&) const {
            return {"There is no change in the screen.", FeedbackOrigin::no_change};
        }
        Feedback operator()(const ScreenLoopEvent& e) const {
            return {"You have looped the same screens " + std::to_string(e.times) + " times.", FeedbackOrigin::loop_detected};
        }
    };
    return std::visit(Visitor{}, event);
}

Feedback repair_feedback(const std::string& sub_task_description) {
    return {"User repaired how to: " + sub_task_description, FeedbackOrigin::user_repair};
}

double Counters::memory_hit_rate() const {
    return actions_executed == 0 ? 0.0 : static_cast<double>(memory_hits) / actions_executed;
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::success: return "success";
        case Outcome::failed: return "failed";
        case Outcome::needs_user: return "needs_user";
    }
    return "?";
}

std::optional<std::string> ScriptedUser::ask(const std::string& question) {
    questions_.push_back(question);
    if (answers_.empty()) return std::nullopt;
    auto a = answers_.front();
    answers_.pop_front();
    return a;
}

bool ScriptedUser::confirm(const std::string& message) {
    questions_.push_back(message);
    return confirm_reply_;
}

void ScriptedUser::tell(const std::string& message) { told_.push_back(message); }

std::optional<std::string> ConsoleUser::ask(const std::string& question) {
    out_ << question << "\n> " << std::flush;
    std::string line;
    if (!std::getline(in_, line) || text::trim(line).empty()) return std::nullopt;
    return text::trim(line);
}

bool ConsoleUser::confirm(const std::string& message) {
    out_ << message << " [y/N] " << std::flush;
    std::string line;
    if (!std::getline(in_, line)) return false;
    auto l = text::to_lower(text::trim(line));
    return l == "y" || l == "yes";
}

void ConsoleUser::tell(const std::string& message) { out_ << message << "\n"; }

void EventLog::write(Json event) {
    if (sink_ != nullptr) *sink_ << event.dump() << "\n" << std::flush;
    events_.push_back(std::move(event));
}

std::vector<Json> EventLog::of_type(std::string_view type) const {
    std::vector<Json> out;
    for (const auto& e : events_) {
        if (e.value("event", "") == type) out.push_back(e);
    }
    return out;
}

Agent::Agent(sim::DeviceAdapter& device, memory::AppMemory& memory, llm::LlmBackend& backend, UserChannel& user,
             EventLog* log, AgentOptions options)
    : device_(device), memory_(memory), backend_(backend), user_(user), log_(log), options_(options) {}

void Agent::transition(Phase to) {
    if (to == session_.phase) return;
    if (!transition_allowed(session_.phase, to)) {
        throw Error(ErrorKind::InvalidPhaseTransition,
                    std::string(to_string(session_.phase)) + " -> " + std::string(to_string(to)));
    }
    if (log_ != nullptr) log_->write({{"event", "phase"}, {"from", to_string(session_.phase)}, {"to", to_string(to)}});
    session_.phase = to;
}

void Agent::push_feedback(Feedback f) {
    if (log_ != nullptr) {
        log_->write({{"event", "feedback"}, {"origin", to_string(f.origin)}, {"message", f.message}});
    }
    session_.feedback_queue.push_back(std::move(f));
}

void Agent::log_action(const Action& a, const std::string& sub_task, std::string_view source) {
    if (log_ != nullptr) {
        log_->write({{"event", "action"}, {"sub_task", sub_task}, {"action", action_json(a)}, {"source", source}});
    }
}

void Agent::take_snapshot() {
    if (!device_.supports_snapshots()) return;
    session_.snapshots[session_.history.size()] = {device_.save_snapshot(), device_.irreversible_count()};
}

std::string Agent::query(const llm::LlmRequest& req) {
    auto resp = backend_.complete(req);
    auto& c = session_.counters;
    ++c.queries_by_phase[req.phase];
    if (req.tier == llm::Tier::reasoning) {
        ++c.reasoning_queries;
    } else {
        ++c.fast_queries;
    }
    c.prompt_tokens += resp.prompt_tokens;
    c.completion_tokens += resp.completion_tokens;
    c.cost += resp.cost;
    if (log_ != nullptr) {
        log_->write({{"event", "llm"},
                     {"phase", req.phase},
                     {"tier", llm::to_string(req.tier)},
                     {"prompt_tokens", resp.prompt_tokens},
                     {"completion_tokens", resp.completion_tokens},
                     {"cost", resp.cost}});
    }
    return resp.text;
}

std::string Agent::consume_feedback(bool include_recent) {
    std::vector<std::string> recent;
    if (include_recent) {
        for (auto it = session_.feedback_log.rbegin(); it != session_.feedback_log.rend() && recent.size() < kRecentFeedback; ++it) {
            if (it->origin != FeedbackOrigin::user_repair) recent.insert(recent.begin(), it->message);
        }
    }
    std::vector<std::string> pending;
    for (auto& f : session_.feedback_queue) {
        pending.push_back(f.message);
        session_.feedback_log.push_back(std::move(f));
    }
    session_.feedback_queue.clear();
    return bullet_block("Earlier feedback", recent) + bullet_block("Feedback", pending);
}

void Agent::correction(const std::string& what) {
    ++session_.counters.corrections;
    if (++step_corrections_ > options_.max_corrections) {
        throw Error(ErrorKind::MaxCorrectionsExceeded,
                    what + " still failing after " + std::to_string(options_.max_corrections) + " corrections");
    }
}

layout::ScreenRepresentation Agent::capture() {
    return layout::to_screen_representation(layout::parse_layout(device_.capture_layout()));
}

std::optional<memory::NodeId> Agent::classify_screen(const layout::ScreenRepresentation& rep) const {
    return classify::classify(memory_, rep).node;
}

memory::NodeId Agent::classify_or_explore(const layout::ScreenRepresentation& rep) {
    if (auto node = classify_screen(rep)) return *node;
    transition(Phase::explore);
    auto sub_tasks = explore_phase(rep);
    auto snap = memory_.snapshot();
    if (auto twin = classify::dedup_candidate(snap, sub_tasks, default_embedder(), options_.dedup_threshold)) {
        memory_.merge_sub_tasks(*twin, sub_tasks);
        memory_.add_example_screen(*twin, rep.serialized());
        if (log_ != nullptr) log_->write({{"event", "node"}, {"node", *twin}, {"merged", true}});
        return *twin;
    }
    auto id = memory_.add_node(std::move(sub_tasks), rep);
    if (log_ != nullptr) log_->write({{"event", "node"}, {"node", id}, {"merged", false}});
    return id;
}

llm::TaskName Agent::normalize_task(const std::string& instruction) {
    step_corrections_ = 0;
    auto req = llm::PromptRegistry::builtin().render("normalize", {{"instruction", instruction}});
    while (true) {
        try {
            auto t = llm::parse_task_name(query(req));
            t.name = memory::normalize_task_name(t.name);
            return t;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::UnparsableResponse) throw;
            correction("task normalization");
        }
    }
}

std::vector<memory::SubTask> Agent::explore_phase(const layout::ScreenRepresentation& rep) {
    step_corrections_ = 0;
    std::vector<llm::ProposedSubTask> proposed;
    while (true) {
        auto req = llm::PromptRegistry::builtin().render("explore", {{"screen", rep.serialized()}, {"feedback", consume_feedback(false)}});
        try {
            proposed = llm::parse_sub_task_list(query(req));
            break;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::UnparsableResponse) throw;
            push_feedback({"The response could not be parsed: " + std::string(e.message()), FeedbackOrigin::unparsable_response});
            correction("explore");
        }
    }
    std::vector<memory::SubTask> out;
    for (auto& p : proposed) {
        auto& st = p.sub_task;
        if (memory::is_global_sub_task(st.name)) continue;
        bool ok = !p.ui_indexes.empty();
        for (int i : p.ui_indexes) {
            if (!rep.contains(i)) {
                ok = false;
                break;
            }
            const auto& el = rep.element(i);
            UiSignature sig = adapt::signature_of(el);
            // A list row shares its id with its siblings: its text is content,
            // not identity, so it becomes the sub-task's first parameter.
            const auto* id = el.attribute(layout::kAttrId);
            bool repeated = false;
            if (id != nullptr) {
                for (int k = 0; k < static_cast<int>(rep.size()) && !repeated; ++k) {
                    const auto* other = rep.element(k).attribute(layout::kAttrId);
                    repeated = k != i && other != nullptr && *other == *id;
                }
            }
            if (repeated && sig.text) {
                if (st.parameters.empty()) {
                    sig.text.reset();
                } else {
                    sig.text = text::make_placeholder(st.parameters.front().first);
                }
            }
            if (std::find(st.key_ui_refs.begin(), st.key_ui_refs.end(), sig) == st.key_ui_refs.end()) st.key_ui_refs.push_back(sig);
        }
        if (!ok) {
            if (log_ != nullptr) {
                log_->write({{"event", "warning"}, {"message", "dropped sub-task '" + st.name + "': unresolvable UI index"}});
            }
            continue;
        }
        out.push_back(std::move(st));
    }
    return out;
}

llm::Selection Agent::select_phase(const layout::ScreenRepresentation& rep, memory::NodeId node) {
    step_corrections_ = 0;
    if (session_.forced_selection) {
        auto s = std::move(*session_.forced_selection);
        session_.forced_selection.reset();
        return s;
    }
    auto page = memory_.node(node);
    std::vector<memory::SubTask> available = page ? page->sub_tasks : std::vector<memory::SubTask>{};
    for (const auto& g : memory::global_sub_tasks()) available.push_back(g);
    std::vector<std::string> lines;
    for (const auto& st : available) lines.push_back(sub_task_line(st));
    std::vector<std::string> done;
    for (const auto& h : session_.history) done.push_back(h.sub_task + "(" + binding_to_display(h.binding) + ")");

    while (true) {
        llm::PromptVars vars{{"instruction", session_.instruction},
                             {"history", numbered(done)},
                             {"sub_tasks", numbered(lines)},
                             {"screen", rep.serialized()},
                             {"feedback", consume_feedback(true)}};
        auto text = query(llm::PromptRegistry::builtin().render("select", vars));
        try {
            auto sel = llm::parse_selection(text);
            auto it = std::find_if(available.begin(), available.end(), [&](const auto& st) { return st.name == sel.name; });
            if (it == available.end()) {
                push_feedback({"There is no sub-task named " + sel.name + ".", FeedbackOrigin::invalid_selection});
                correction("select");
                continue;
            }
            ParameterBinding b;
            for (const auto& [name, desc] : it->parameters) {
                auto v = sel.parameters.find(name);
                b[name] = v == sel.parameters.end() ? std::nullopt : v->second;
            }
            sel.parameters = std::move(b);
            return sel;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::UnparsableResponse) throw;
            push_feedback({"The response could not be parsed: " + std::string(e.message()), FeedbackOrigin::unparsable_response});
            correction("select");
        }
    }
}

bool Agent::check_action(const Action& a, const layout::ScreenRepresentation& rep) {
    if (!a.ui_index) return true;
    if (!rep.contains(*a.ui_index)) {
        push_feedback(generate_feedback(InvalidIndexEvent{*a.ui_index}));
        return false;
    }
    if (!tag_allows(a.kind, rep.element(*a.ui_index).tag)) {
        push_feedback(generate_feedback(NotActionableEvent{a.kind}));
        return false;
    }
    return true;
}

void Agent::dispatch(const Action& a) {
    if (a.kind == ActionKind::get_user_confirm) {
        if (!user_.confirm(a.text.value_or("Proceed with the next action?"))) {
            throw Error(ErrorKind::UserAbort, "user declined to confirm");
        }
    }
    device_.dispatch(a);
}

DeriveResult Agent::derive_phase(const memory::SubTask& sub_task, const ParameterBinding& binding, memory::NodeId node) {
    step_corrections_ = 0;
    DeriveResult out;
    auto rep = capture();
    std::vector<std::string> visited{rep.serialized()};
    std::vector<std::string> done_lines;

    for (std::size_t guard = 0; guard < options_.max_derive_actions + static_cast<std::size_t>(options_.max_corrections) * 4; ++guard) {
        llm::PromptVars vars{{"instruction", session_.instruction},
                             {"sub_task", sub_task.name + ": " + sub_task.description},
                             {"parameters", binding_to_display(binding)},
                             {"actions", numbered(done_lines)},
                             {"screen", rep.serialized()},
                             {"feedback", consume_feedback(false)}};
        auto text = query(llm::PromptRegistry::builtin().render("derive", vars));
        llm::DerivedAction d;
        try {
            d = llm::parse_derived_action(text);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::UnparsableResponse) throw;
            push_feedback({"The response could not be parsed: " + std::string(e.message()), FeedbackOrigin::unparsable_response});
            correction("derive " + sub_task.name);
            continue;
        }
        if (!d.action || d.action->kind == ActionKind::finish) {
            if (out.generalized.empty() && !memory::is_global_sub_task(sub_task.name)) {
                push_feedback({"No action has been performed for this sub-task yet.", FeedbackOrigin::no_progress});
                correction("derive " + sub_task.name);
                continue;
            }
            return out;
        }
        Action a = *d.action;
        if (!is_device_action(a.kind) && a.kind != ActionKind::get_user_confirm) {
            push_feedback({"The action " + std::string(to_string(a.kind)) + " is not available here.", FeedbackOrigin::no_progress});
            correction("derive " + sub_task.name);
            continue;
        }
        if (!check_action(a, rep)) {
            correction("derive " + sub_task.name);
            continue;
        }
        try {
            dispatch(a);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::InvalidIndex) {
                push_feedback(generate_feedback(InvalidIndexEvent{a.ui_index.value_or(-1)}));
            } else if (e.kind() == ErrorKind::NotActionable) {
                push_feedback(generate_feedback(NotActionableEvent{a.kind}));
            } else {
                throw;
            }
            correction("derive " + sub_task.name);
            continue;
        }
        if (is_device_action(a.kind)) ++session_.counters.actions_executed;
        log_action(a, sub_task.name, "llm");
        auto next = capture();
        if (a.kind != ActionKind::get_user_confirm && !layout::diff_screens(rep, next).changed) {
            push_feedback(generate_feedback(NoScreenChangeEvent{}));
            correction("derive " + sub_task.name);
            continue;
        }
        GeneralizedAction g;
        try {
            g = adapt::generalize(a, rep, binding, true);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::GeneralizationFailed) throw;
            g = adapt::generalize(a, rep, binding, false);
            if (log_ != nullptr) log_->write({{"event", "warning"}, {"message", e.message()}});
        }
        out.actions.push_back(a);
        out.generalized.push_back(g);
        out.steps.push_back({rep.serialized(), a});
        done_lines.push_back(a.to_display());
        step_corrections_ = 0;

        if (next.serialized() != visited.back()) visited.push_back(next.serialized());
        int times = static_cast<int>(std::count(visited.begin(), visited.end(), next.serialized()));
        if (times >= options_.loop_threshold) {
            push_feedback(generate_feedback(ScreenLoopEvent{times}));
            correction("derive " + sub_task.name);
        }
        auto now = classify_screen(next);
        rep = std::move(next);
        if (!now || *now != node) return out;
        if (out.actions.size() >= options_.max_derive_actions) break;
    }
    throw Error(ErrorKind::NoProgress, "sub-task '" + sub_task.name + "' did not complete");
}

ParameterBinding Agent::complete_binding(const memory::SubTask& sub_task, ParameterBinding binding) {
    for (const auto& [name, desc] : sub_task.parameters) {
        if (!binding.contains(name)) binding[name] = std::nullopt;
        if (auto o = session_.parameter_overrides.find(name); o != session_.parameter_overrides.end() && o->second) {
            binding[name] = o->second;
        }
    }
    for (auto& [name, value] : binding) {
        if (value) continue;
        std::string desc;
        for (const auto& [n, d] : sub_task.parameters) {
            if (n == name) desc = d;
        }
        std::string question = "Please provide " + name + (desc.empty() ? "" : " (" + desc + ")") + ".";
        auto answer = user_.ask(question);
        if (log_ != nullptr) log_->write({{"event", "user"}, {"question", question}, {"answer", answer ? Json(*answer) : Json()}});
        if (!answer) throw NeedsUser{question};
        session_.transcript.push_back(question + " " + *answer);
        value = *answer;
    }
    return binding;
}

ParameterBinding Agent::slot_fill(const memory::SubTask& sub_task, const layout::ScreenRepresentation& rep) {
    step_corrections_ = 0;
    std::vector<std::string> lines;
    for (const auto& [n, d] : sub_task.parameters) lines.push_back(n + ": " + d);
    llm::PromptVars vars{{"instruction", session_.instruction},
                         {"sub_task", sub_task.name + ": " + sub_task.description},
                         {"parameters", numbered(lines)},
                         {"known", llm::serialize(session_.task_binding)},
                         {"screen", rep.serialized()}};
    auto req = llm::PromptRegistry::builtin().render("slot_fill", vars);
    while (true) {
        try {
            auto filled = llm::parse_slot_fill(query(req));
            ParameterBinding b;
            for (const auto& [n, d] : sub_task.parameters) {
                auto it = filled.find(n);
                b[n] = it == filled.end() ? std::nullopt : it->second;
            }
            return b;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::UnparsableResponse) throw;
            correction("slot fill " + sub_task.name);
        }
    }
}

void Agent::read_screen(memory::NodeId node, const ParameterBinding& binding, const layout::ScreenRepresentation& rep) {
    auto q = binding.find("question");
    std::string question = q != binding.end() && q->second ? *q->second : session_.instruction;
    auto answer = query(llm::PromptRegistry::builtin().render("read_screen", {{"question", question}, {"screen", rep.serialized()}}));
    user_.tell(answer);
    session_.transcript.push_back(answer);
    session_.history.push_back({node, std::string(memory::kReadScreen), binding, {}, false});
}

void Agent::ask_user_step(memory::NodeId node, const ParameterBinding& binding) {
    auto q = binding.find("question");
    std::string question = q != binding.end() && q->second ? *q->second : "Can you help with: " + session_.instruction + "?";
    auto answer = user_.ask(question);
    if (!answer) throw NeedsUser{question};
    session_.transcript.push_back(question + " " + *answer);
    push_feedback({"The user answered: " + *answer, FeedbackOrigin::no_progress});
    session_.history.push_back({node, std::string(memory::kAskUser), binding, {}, false});
}

Action Agent::incontext_action(const memory::SubTaskEdge& edge, std::size_t index, const memory::SubTask& sub_task,
                               const ParameterBinding& binding, const layout::ScreenRepresentation& rep) {
    auto past = adapt::past_example(edge, index);
    step_corrections_ = 0;
    while (true) {
        auto req = adapt::build_incontext_prompt(sub_task, past, session_.instruction, rep, binding, consume_feedback(false));
        llm::DerivedAction d;
        try {
            d = llm::parse_derived_action(query(req));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::UnparsableResponse) throw;
            push_feedback({"The response could not be parsed: " + std::string(e.message()), FeedbackOrigin::unparsable_response});
            correction("adapt " + sub_task.name);
            continue;
        }
        if (!d.action || !is_device_action(d.action->kind)) {
            push_feedback({"An action is required for this step.", FeedbackOrigin::no_progress});
            correction("adapt " + sub_task.name);
            continue;
        }
        if (!check_action(*d.action, rep)) {
            correction("adapt " + sub_task.name);
            continue;
        }
        Action a = *d.action;
        if (options_.update_edges_after_incontext && edge.provenance == memory::Provenance::llm_derived) {
            GeneralizedAction g;
            try {
                g = adapt::generalize(a, rep, binding, true);
            } catch (const Error&) {
                g = adapt::generalize(a, rep, binding, false);
            }
            if (g != edge.actions[index]) {
                memory::EdgeWrite w{edge.actions, edge.to_node, memory::Provenance::llm_derived, edge.example, true};
                w.actions[index] = g;
                if (w.example && index < w.example->steps.size()) w.example->steps[index] = {rep.serialized(), a};
                memory_.record_edge(edge.from_node, edge.sub_task_name, std::move(w));
            }
        }
        return a;
    }
}

std::vector<Action> Agent::execute_edge(const memory::SubTaskEdge& edge, const memory::SubTask& sub_task,
                                        const ParameterBinding& binding) {
    std::vector<Action> out;
    auto rep = capture();
    const auto& acts = edge.actions;
    auto run = [&](const Action& a, bool from_memory) {
        dispatch(a);
        ++session_.counters.actions_executed;
        if (from_memory) ++session_.counters.memory_hits;
        log_action(a, sub_task.name, from_memory ? "memory" : "adapted");
        out.push_back(a);
        rep = capture();
    };
    std::size_t i = 0;
    while (i < acts.size()) {
        const auto& g = acts[i];
        if (g.kind == ActionKind::get_user_confirm) {
            Action a = adapt::apply(g, rep, binding);
            dispatch(a);
            log_action(a, sub_task.name, "memory");
            ++i;
            continue;
        }
        if (!is_device_action(g.kind)) {
            ++i;
            continue;
        }
        if (adapt::is_scroll_run(acts, i)) {
            adapt::ScrollCursor cursor{i, 0};
            while (true) {
                adapt::ScrollStep st;
                try {
                    st = adapt::adapt_scroll(acts, cursor, rep, binding);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::AdaptationFailed) throw;
                    std::size_t target = i;
                    while (acts[target].kind == ActionKind::scroll) ++target;
                    run(incontext_action(edge, target, sub_task, binding, rep), false);
                    i = target + 1;
                    break;
                }
                run(st.action, true);
                if (st.reached_target) {
                    i = st.next_index;
                    break;
                }
            }
            continue;
        }
        std::optional<Action> a;
        try {
            a = adapt::apply(g, rep, binding);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::AdaptationFailed) throw;
        }
        if (a) {
            run(*a, true);
        } else {
            run(incontext_action(edge, i, sub_task, binding, rep), false);
        }
        ++i;
    }
    return out;
}

void Agent::resolve_pending_edge(const std::optional<memory::NodeId>& node) {
    if (!pending_edge_) return;
    auto key = *pending_edge_;
    pending_edge_.reset();
    if (!node || *node == key.first) return;
    if (auto e = memory_.find_edge(key.first, key.second); e && !e->to_node) memory_.set_edge_target(key.first, key.second, *node);
}

bool Agent::breakpoint() {
    if (hook_ == nullptr) return false;
    return hook_->at_breakpoint(*this, session_.history.size());
}

memory::NodeId Agent::cold_loop() {
    for (std::size_t guard = 0; guard < options_.max_steps; ++guard) {
        auto rep = capture();
        auto node = classify_or_explore(rep);
        resolve_pending_edge(node);
        if (breakpoint()) continue;
        transition(Phase::select);
        auto sel = select_phase(rep, node);
        if (log_ != nullptr) {
            log_->write({{"event", "sub_task"}, {"step", session_.history.size()}, {"node", node}, {"name", sel.name},
                         {"parameters", binding_to_json(sel.parameters)}});
        }
        if (sel.name == memory::kFinish) {
            if (session_.history.empty()) throw Error(ErrorKind::NoProgress, "finished without executing any sub-task");
            return node;
        }
        const memory::SubTask* global = find_global(sel.name);
        auto page = memory_.node(node);
        const memory::SubTask* sub = global != nullptr ? global : page->find(sel.name);
        auto binding = complete_binding(*sub, sel.parameters);
        if (sel.name == memory::kReadScreen) {
            read_screen(node, binding, rep);
            continue;
        }
        if (sel.name == memory::kAskUser) {
            ask_user_step(node, binding);
            continue;
        }
        take_snapshot();
        if (auto edge = memory_.find_edge(node, sel.name)) {
            transition(Phase::recall);
            auto actions = execute_edge(*edge, *sub, binding);
            session_.history.push_back({node, sel.name, binding, std::move(actions), false});
            continue;
        }
        transition(Phase::derive);
        auto derived = derive_phase(*sub, binding, node);
        memory::EdgeWrite w;
        w.actions = derived.generalized;
        w.example = memory::EdgeExample{session_.instruction, binding, derived.steps};
        memory_.record_edge(node, sel.name, std::move(w));
        set_pending_edge(node, sel.name);
        session_.history.push_back({node, sel.name, binding, std::move(derived.actions), false});
    }
    throw Error(ErrorKind::NoProgress, "no Finish within " + std::to_string(options_.max_steps) + " steps");
}

bool Agent::recall(const memory::TaskRecord& rec) {
    transition(Phase::recall);
    session_.recalled = true;
    std::size_t k = 0;
    while (k < rec.steps.size()) {
        auto rep = capture();
        auto node = classify_screen(rep);
        if (breakpoint()) return false;
        if (node && *node != rec.steps[k].node_id) {
            std::size_t j = k + 1;
            while (j < rec.steps.size() && rec.steps[j].node_id != *node) ++j;
            if (j == rec.steps.size()) {
                throw Error(ErrorKind::RecallDiverged, "screen classified as node " + std::to_string(*node) +
                                                           ", expected node " + std::to_string(rec.steps[k].node_id));
            }
            k = j;
        }
        const auto& step = rec.steps[k];
        if (step.sub_task_name == memory::kFinish) return true;
        const memory::SubTask* sub = find_global(step.sub_task_name);
        std::optional<memory::PageNode> page = memory_.node(step.node_id);
        if (sub == nullptr) {
            if (!page || page->find(step.sub_task_name) == nullptr) {
                throw Error(ErrorKind::RecallDiverged, "sub-task '" + step.sub_task_name + "' no longer exists");
            }
            sub = page->find(step.sub_task_name);
        }
        if (log_ != nullptr) {
            log_->write({{"event", "sub_task"}, {"step", session_.history.size()}, {"node", step.node_id}, {"name", step.sub_task_name}});
        }
        ParameterBinding binding;
        if (!sub->parameters.empty()) {
            transition(Phase::slot_fill);
            binding = slot_fill(*sub, rep);
            transition(Phase::recall);
        }
        binding = complete_binding(*sub, binding);
        if (step.sub_task_name == memory::kReadScreen) {
            read_screen(step.node_id, binding, rep);
        } else if (step.sub_task_name == memory::kAskUser) {
            ask_user_step(step.node_id, binding);
        } else {
            auto edge = memory_.find_edge(step.node_id, step.sub_task_name);
            if (!edge) throw Error(ErrorKind::RecallDiverged, "no stored actions for '" + step.sub_task_name + "'");
            take_snapshot();
            auto actions = execute_edge(*edge, *sub, binding);
            session_.history.push_back({step.node_id, step.sub_task_name, binding, std::move(actions), false});
        }
        ++k;
    }
    return true;
}

void Agent::record_task(memory::NodeId final_node) {
    std::vector<memory::TaskStep> steps;
    for (const auto& h : session_.history) {
        std::vector<std::string> names;
        for (const auto& [k, v] : h.binding) names.push_back(k);
        steps.push_back({h.node, h.sub_task, std::move(names)});
    }
    steps.push_back({final_node, std::string(memory::kFinish), {}});
    memory_.record_task(session_.task_name, session_.parameter_schema, std::move(steps));
}

void Agent::summary(const TaskOutcome& outcome, double ms) {
    if (log_ == nullptr) return;
    const auto& c = session_.counters;
    Json by_phase = Json::object();
    for (const auto& [p, n] : c.queries_by_phase) by_phase[p] = n;
    log_->write({{"event", "summary"},
                 {"instruction", session_.instruction},
                 {"task", session_.task_name},
                 {"outcome", to_string(outcome.outcome)},
                 {"error", outcome.error ? Json(std::string(taskmem::to_string(*outcome.error))) : Json()},
                 {"reasoning_queries", c.reasoning_queries},
                 {"fast_queries", c.fast_queries},
                 {"queries_by_phase", by_phase},
                 {"tokens", c.tokens()},
                 {"cost", c.cost},
                 {"actions", c.actions_executed},
                 {"memory_hits", c.memory_hits},
                 {"memory_hit_rate", c.memory_hit_rate()},
                 {"corrections", c.corrections},
                 {"ms", ms}});
}

TaskOutcome Agent::run_instruction(const std::string& instruction) {
    auto start = std::chrono::steady_clock::now();
    session_ = Session{};
    session_.instruction = instruction;
    session_.app_id = memory_.app_id();
    pending_edge_.reset();
    TaskOutcome outcome;
    try {
        auto task = normalize_task(instruction);
        session_.task_name = task.name;
        session_.parameter_schema = task.parameters;
        for (const auto& [name, desc] : task.parameters) {
            auto v = task.values.find(name);
            session_.task_binding[name] = v == task.values.end() ? std::nullopt : v->second;
        }
        if (log_ != nullptr) {
            log_->write({{"event", "task"}, {"task", task.name}, {"values", binding_to_json(session_.task_binding)}});
        }
        bool finished = false;
        if (auto rec = memory_.lookup_task(task.name)) {
            try {
                finished = recall(*rec);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::RecallDiverged) throw;
                if (log_ != nullptr) log_->write({{"event", "warning"}, {"message", e.message()}});
            }
            if (finished) {
                transition(Phase::done);
            } else {
                transition(Phase::select);
            }
        }
        if (!finished) {
            auto final_node = cold_loop();
            record_task(final_node);
            transition(Phase::done);
        }
        outcome.outcome = Outcome::success;
    } catch (const NeedsUser& n) {
        outcome.outcome = Outcome::needs_user;
        outcome.message = "unanswered: " + n.question;
        if (transition_allowed(session_.phase, Phase::failed)) session_.phase = Phase::failed;
    } catch (const Error& e) {
        outcome.outcome = Outcome::failed;
        outcome.error = e.kind();
        outcome.message = e.what();
        if (log_ != nullptr) log_->write({{"event", "error"}, {"kind", taskmem::to_string(e.kind())}, {"message", e.message()}});
        if (transition_allowed(session_.phase, Phase::failed)) transition(Phase::failed);
    }
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    summary(outcome, ms);
    return outcome;
}

}  // namespace taskmem::agent
