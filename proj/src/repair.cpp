#include "taskmem/repair.hpp"

#include <fstream>
#include <iostream>

#include "taskmem/adapt.hpp"
#include "taskmem/text.hpp"

namespace taskmem::repair {

namespace {

using agent::Phase;

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorKind::InvalidTarget, why); }

memory::NodeId target_node(agent::Agent& a, const RepairEvent& e) {
    if (e.node) {
        if (!a.memory().node(*e.node)) invalid("no node " + std::to_string(*e.node));
        return *e.node;
    }
    auto node = a.classify_screen(a.capture());
    if (!node) invalid("the current screen matches no node");
    return *node;
}

memory::SubTask sub_task_from_json(const Json& j) {
    memory::SubTask st;
    st.name = j.at("name").get<std::string>();
    st.description = j.value("description", "");
    if (j.contains("parameters")) {
        for (const auto& [k, v] : j.at("parameters").items()) st.parameters.emplace_back(k, v.get<std::string>());
    }
    for (const auto& s : j.value("key_ui", Json::array())) st.key_ui_refs.push_back(s.get<UiSignature>());
    return st;
}

Json sub_task_to_json(const memory::SubTask& st) {
    Json params = Json::object();
    for (const auto& [k, v] : st.parameters) params[k] = v;
    Json key_ui = Json::array();
    for (const auto& s : st.key_ui_refs) key_ui.push_back(s);
    return {{"name", st.name}, {"description", st.description}, {"parameters", params}, {"key_ui", key_ui}};
}

}  // namespace

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::add_sub_task: return "add_sub_task";
        case EventKind::remove_sub_task: return "remove_sub_task";
        case EventKind::change_selection: return "change_selection";
        case EventKind::edit_parameters: return "edit_parameters";
        case EventKind::demonstrate_actions: return "demonstrate_actions";
        case EventKind::rollback_to: return "rollback_to";
    }
    return "?";
}

RepairEvent event_from_json(const Json& j) {
    static const EventKind kinds[] = {EventKind::add_sub_task,   EventKind::remove_sub_task,     EventKind::change_selection,
                                      EventKind::edit_parameters, EventKind::demonstrate_actions, EventKind::rollback_to};
    RepairEvent e;
    try {
        auto kind = j.at("kind").get<std::string>();
        bool known = false;
        for (auto k : kinds) {
            if (to_string(k) == kind) {
                e.kind = k;
                known = true;
            }
        }
        if (!known) invalid("unknown repair event '" + kind + "'");
        if (j.contains("node")) e.node = j.at("node").get<memory::NodeId>();
        e.sub_task = j.value("sub_task", "");
        if (j.contains("definition")) {
            e.new_sub_task = sub_task_from_json(j.at("definition"));
            if (e.sub_task.empty()) e.sub_task = e.new_sub_task->name;
        }
        e.ui_indexes = j.value("ui_indexes", std::vector<int>{});
        if (j.contains("parameters")) e.parameters = binding_from_json(j.at("parameters"));
        for (const auto& a : j.value("actions", Json::array())) e.actions.push_back(a.get<Action>());
        e.step = j.value("step", std::size_t{0});
    } catch (const Json::exception& ex) {
        invalid(std::string("malformed repair event: ") + ex.what());
    } catch (const std::invalid_argument& ex) {
        invalid(std::string("malformed repair event: ") + ex.what());
    }
    if (e.kind == EventKind::demonstrate_actions && e.actions.empty()) invalid("demonstrate_actions needs at least one action");
    if (e.kind == EventKind::add_sub_task && !e.new_sub_task) invalid("add_sub_task needs a definition");
    for (const auto& a : e.actions) {
        if (!a.valid()) invalid("invalid demonstrated action " + a.to_display());
    }
    return e;
}

Json to_json(const RepairEvent& e) {
    Json j{{"kind", to_string(e.kind)}};
    if (e.node) j["node"] = *e.node;
    if (!e.sub_task.empty()) j["sub_task"] = e.sub_task;
    if (e.new_sub_task) j["definition"] = sub_task_to_json(*e.new_sub_task);
    if (!e.ui_indexes.empty()) j["ui_indexes"] = e.ui_indexes;
    if (!e.parameters.empty()) j["parameters"] = binding_to_json(e.parameters);
    if (!e.actions.empty()) {
        j["actions"] = Json::array();
        for (const auto& a : e.actions) j["actions"].push_back(a);
    }
    if (e.kind == EventKind::rollback_to) j["step"] = e.step;
    return j;
}

std::string execution_summary(const agent::Session& s) {
    std::string out = "Task: " + s.instruction + "\n";
    if (s.history.empty()) return out + "Sub-tasks: none\n";
    out += "Sub-tasks:\n";
    for (std::size_t i = 0; i < s.history.size(); ++i) {
        const auto& h = s.history[i];
        out += std::to_string(i + 1) + ". " + h.sub_task + "(" + binding_to_display(h.binding) + ") on node " +
               std::to_string(h.node) + (h.user_repaired ? " [repaired]" : "") + "\n";
        for (const auto& a : h.actions) out += "   - " + a.to_display() + "\n";
    }
    return out;
}

std::string enter_repair(agent::Agent& a) {
    auto& s = a.session();
    if (s.phase != Phase::repair_paused) {
        s.paused_from = s.phase;
        a.transition(Phase::repair_paused);
    }
    if (a.log() != nullptr) a.log()->write({{"event", "repair"}, {"action", "pause"}, {"step", s.history.size()}});
    return execution_summary(s);
}

void resume(agent::Agent& a) {
    auto& s = a.session();
    if (s.phase != Phase::repair_paused) throw Error(ErrorKind::NotPaused, "session is not paused");
    a.transition(s.paused_from == Phase::recall ? Phase::recall : Phase::select);
    if (a.log() != nullptr) a.log()->write({{"event", "repair"}, {"action", "resume"}, {"step", s.history.size()}});
}

RepairResult apply_repair(agent::Agent& a, const RepairEvent& e) {
    auto& s = a.session();
    if (s.phase != Phase::repair_paused) throw Error(ErrorKind::NotPaused, "apply_repair needs a paused session");
    if (a.log() != nullptr) a.log()->write({{"event", "repair"}, {"action", "apply"}, {"repair", to_json(e)}});
    RepairResult result;
    switch (e.kind) {
        case EventKind::add_sub_task: {
            auto node = target_node(a, e);
            auto st = *e.new_sub_task;
            if (!e.ui_indexes.empty()) {
                auto rep = a.capture();
                for (int i : e.ui_indexes) {
                    if (!rep.contains(i)) invalid("There is no UI with index " + std::to_string(i));
                    st.key_ui_refs.push_back(adapt::signature_of(rep.element(i)));
                }
            }
            a.memory().add_sub_task(node, std::move(st));
            break;
        }
        case EventKind::remove_sub_task: {
            auto node = target_node(a, e);
            auto page = a.memory().node(node);
            if (page->find(e.sub_task) == nullptr) invalid("node " + std::to_string(node) + " has no sub-task '" + e.sub_task + "'");
            a.memory().remove_sub_task(node, e.sub_task);
            break;
        }
        case EventKind::change_selection:
            if (e.sub_task.empty()) invalid("change_selection needs a sub-task");
            s.forced_selection = llm::Selection{e.sub_task, e.parameters};
            break;
        case EventKind::edit_parameters:
            for (const auto& [k, v] : e.parameters) s.parameter_overrides[k] = v;
            break;
        case EventKind::demonstrate_actions: {
            auto node = target_node(a, e);
            auto page = a.memory().node(node);
            const auto* st = page->find(e.sub_task);
            if (st == nullptr) invalid("node " + std::to_string(node) + " has no sub-task '" + e.sub_task + "'");
            a.take_snapshot();
            memory::EdgeWrite w;
            w.provenance = memory::Provenance::user_repaired;
            memory::EdgeExample example{s.instruction, e.parameters, {}};
            for (const auto& act : e.actions) {
                auto rep = a.capture();
                GeneralizedAction g;
                try {
                    g = adapt::generalize(act, rep, e.parameters, true);
                } catch (const Error& err) {
                    if (err.kind() == ErrorKind::UnknownIndex) invalid(err.message());
                    if (err.kind() != ErrorKind::GeneralizationFailed) throw;
                    g = adapt::generalize(act, rep, e.parameters, false);
                }
                a.device().dispatch(act);
                a.log_action(act, e.sub_task, "user");
                w.actions.push_back(g);
                example.steps.push_back({rep.serialized(), act});
            }
            w.example = std::move(example);
            a.memory().record_edge(node, e.sub_task, std::move(w));
            a.set_pending_edge(node, e.sub_task);
            s.history.push_back({node, e.sub_task, e.parameters, e.actions, true});
            a.push_feedback(agent::repair_feedback(st->description));
            break;
        }
        case EventKind::rollback_to: {
            if (e.step > s.history.size()) {
                invalid("cannot roll back to step " + std::to_string(e.step) + " of " + std::to_string(s.history.size()));
            }
            if (e.step == s.history.size()) break;
            if (!a.device().supports_snapshots()) throw Error(ErrorKind::CapabilityUnsupported, "device cannot roll back");
            auto mark = s.snapshots.find(e.step);
            if (mark == s.snapshots.end()) invalid("no snapshot for step " + std::to_string(e.step));
            if (a.device().irreversible_count() > mark->second.irreversible) {
                result.warnings.push_back("IrreversibleStateWarning: a critical action since step " + std::to_string(e.step) +
                                          " cannot be undone; only the session was rolled back");
            } else {
                a.device().restore_snapshot(mark->second.snapshot);
            }
            s.history.resize(e.step);
            s.snapshots.erase(s.snapshots.upper_bound(e.step), s.snapshots.end());
            a.clear_pending_edge();
            break;
        }
    }
    for (const auto& w : result.warnings) {
        if (a.log() != nullptr) a.log()->write({{"event", "warning"}, {"message", w}});
    }
    return result;
}

std::vector<ScriptEntry> parse_repair_script(const Json& j) {
    if (!j.is_array()) invalid("repair script must be a list");
    std::vector<ScriptEntry> out;
    for (const auto& e : j) {
        if (!e.is_object() || !e.contains("breakpoint") || !e.contains("event")) invalid("repair script entries need breakpoint and event");
        out.push_back({e.at("breakpoint").get<std::size_t>(), event_from_json(e.at("event"))});
    }
    return out;
}

std::vector<ScriptEntry> load_repair_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::ConfigError, path.string() + " is not valid JSON");
    return parse_repair_script(j);
}

bool ScriptedRepair::at_breakpoint(agent::Agent& a, std::size_t step) {
    bool any = false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (applied_[i] || entries_[i].breakpoint != step) continue;
        if (!any) summaries_.push_back(enter_repair(a));
        any = true;
        applied_[i] = true;
        auto r = apply_repair(a, entries_[i].event);
        warnings_.insert(warnings_.end(), r.warnings.begin(), r.warnings.end());
    }
    if (any) resume(a);
    return any;
}

bool ConsoleRepair::at_breakpoint(agent::Agent& a, std::size_t step) {
    if (used_ || step != breakpoint_) return false;
    used_ = true;
    out_ << enter_repair(a);
    out_ << "Enter repair events as JSON, one per line; 'resume' to continue.\n";
    std::string line;
    while (out_ << "repair> " << std::flush, std::getline(in_, line)) {
        auto t = text::trim(line);
        if (t.empty()) continue;
        if (t == "resume") break;
        if (t == "summary") {
            out_ << execution_summary(a.session());
            continue;
        }
        try {
            auto r = apply_repair(a, event_from_json(Json::parse(t)));
            for (const auto& w : r.warnings) out_ << w << "\n";
            out_ << "ok\n";
        } catch (const std::exception& ex) {
            out_ << ex.what() << "\n";
        }
    }
    resume(a);
    return true;
}

}  // namespace taskmem::repair
