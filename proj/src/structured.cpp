#include "taskmem/structured.hpp"

#include <regex>
#include <set>

#include "taskmem/error.hpp"

namespace taskmem::llm {

namespace {

using OJson = nlohmann::ordered_json;

[[noreturn]] void unparsable(const std::string& why) { throw Error(ErrorKind::UnparsableResponse, why); }

// End (exclusive) of the balanced value opening at `start`, or npos when the
// text ends first.
std::size_t balanced_end(std::string_view text, std::size_t start) {
    std::vector<char> stack;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{' || c == '[') {
            stack.push_back(c == '{' ? '}' : ']');
        } else if (c == '}' || c == ']') {
            if (stack.empty() || stack.back() != c) return std::string_view::npos;
            stack.pop_back();
            if (stack.empty()) return i + 1;
        }
    }
    return std::string_view::npos;
}

std::string quote_bare_keys(std::string_view s) {
    static const std::regex bare(R"(([\{,]\s*)([A-Za-z_][A-Za-z0-9_]*)(\s*:))");
    return std::regex_replace(std::string(s), bare, "$1\"$2\"$3");
}

std::optional<OJson> try_parse(std::string_view s) {
    auto j = OJson::parse(s, nullptr, false);
    if (!j.is_discarded()) return j;
    j = OJson::parse(quote_bare_keys(s), nullptr, false);
    if (!j.is_discarded()) return j;
    return std::nullopt;
}

struct Found {
    OJson value;
    std::size_t end = 0;
};

std::optional<Found> next_value(std::string_view text, std::size_t from) {
    for (std::size_t i = from; i < text.size(); ++i) {
        if (text[i] != '{' && text[i] != '[') continue;
        auto end = balanced_end(text, i);
        if (end == std::string_view::npos) unparsable("truncated JSON in response");
        if (auto v = try_parse(text.substr(i, end - i))) return Found{std::move(*v), end};
    }
    return std::nullopt;
}

std::string string_field(const OJson& o, std::initializer_list<const char*> keys, bool required) {
    for (const char* k : keys) {
        if (!o.contains(k)) continue;
        if (!o.at(k).is_string()) unparsable(std::string("field '") + k + "' must be a string");
        return o.at(k).get<std::string>();
    }
    if (required) unparsable(std::string("missing field '") + *keys.begin() + "'");
    return {};
}

const OJson* field(const OJson& o, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        if (o.contains(k)) return &o.at(k);
    }
    return nullptr;
}

ParameterBinding binding_of(const OJson& o) {
    if (!o.is_object()) unparsable("parameters must be an object");
    ParameterBinding b;
    for (auto it = o.begin(); it != o.end(); ++it) {
        if (it->is_null()) {
            b[it.key()] = std::nullopt;
        } else if (it->is_string()) {
            b[it.key()] = it->get<std::string>();
        } else if (it->is_number() || it->is_boolean()) {
            b[it.key()] = it->dump();
        } else {
            unparsable("parameter '" + it.key() + "' must be a string or null");
        }
    }
    return b;
}

OJson binding_json(const ParameterBinding& b) {
    OJson o = OJson::object();
    for (const auto& [k, v] : b) o[k] = v ? OJson(*v) : OJson(nullptr);
    return o;
}

memory::ParamList param_list_of(const OJson& o) {
    memory::ParamList out;
    std::set<std::string> seen;
    auto add = [&](const std::string& name, const std::string& desc) {
        if (name.empty()) unparsable("empty parameter name");
        if (!seen.insert(name).second) unparsable("duplicate parameter '" + name + "'");
        out.emplace_back(name, desc);
    };
    if (o.is_object()) {
        for (auto it = o.begin(); it != o.end(); ++it) {
            if (!it->is_string()) unparsable("parameter description must be a string");
            add(it.key(), it->get<std::string>());
        }
    } else if (o.is_array()) {
        for (const auto& n : o) {
            if (!n.is_string()) unparsable("parameter name must be a string");
            add(n.get<std::string>(), "");
        }
    } else {
        unparsable("parameters must be an object");
    }
    return out;
}

OJson param_list_json(const memory::ParamList& p) {
    OJson o = OJson::object();
    for (const auto& [k, v] : p) o[k] = v;
    return o;
}

ProposedSubTask proposed_of(const OJson& o) {
    if (!o.is_object()) unparsable("sub-task entry must be an object");
    ProposedSubTask p;
    p.sub_task.name = string_field(o, {"name"}, true);
    if (p.sub_task.name.empty()) unparsable("empty sub-task name");
    p.sub_task.description = string_field(o, {"description", "desc"}, false);
    if (const auto* params = field(o, {"parameters", "params"})) p.sub_task.parameters = param_list_of(*params);
    if (const auto* idx = field(o, {"UI_index", "ui_index", "ui_indexes"})) {
        if (idx->is_number_integer()) {
            p.ui_indexes.push_back(idx->get<int>());
        } else if (idx->is_array()) {
            for (const auto& i : *idx) {
                if (!i.is_number_integer()) unparsable("UI_index entries must be integers");
                p.ui_indexes.push_back(i.get<int>());
            }
        } else if (!idx->is_null()) {
            unparsable("UI_index must be an integer or list");
        }
    }
    return p;
}

}  // namespace

std::string_view to_string(Schema s) {
    switch (s) {
        case Schema::sub_task_list: return "sub_task_list";
        case Schema::selected_sub_task: return "selected_sub_task";
        case Schema::derived_action: return "derived_action";
        case Schema::slot_fill: return "slot_fill";
        case Schema::task_name: return "task_name";
    }
    return "?";
}

nlohmann::ordered_json extract_json(std::string_view text) {
    auto found = next_value(text, 0);
    if (!found) unparsable("no JSON value in response");
    return std::move(found->value);
}

std::vector<ProposedSubTask> parse_sub_task_list(std::string_view text) {
    auto first = next_value(text, 0);
    if (!first) unparsable("no JSON value in response");
    std::vector<OJson> entries;
    if (first->value.is_array()) {
        for (const auto& e : first->value) entries.push_back(e);
    } else if (first->value.is_object() && first->value.contains("sub_tasks")) {
        if (!first->value.at("sub_tasks").is_array()) unparsable("'sub_tasks' must be a list");
        for (const auto& e : first->value.at("sub_tasks")) entries.push_back(e);
    } else {
        // A numbered list of objects, one per line.
        entries.push_back(first->value);
        std::size_t pos = first->end;
        while (auto more = next_value(text, pos)) {
            entries.push_back(std::move(more->value));
            pos = more->end;
        }
    }
    std::vector<ProposedSubTask> out;
    std::set<std::string> names;
    for (const auto& e : entries) {
        auto p = proposed_of(e);
        if (!names.insert(p.sub_task.name).second) unparsable("duplicate sub-task '" + p.sub_task.name + "'");
        out.push_back(std::move(p));
    }
    return out;
}

Selection parse_selection(std::string_view text) {
    auto j = extract_json(text);
    if (!j.is_object()) unparsable("selection must be an object");
    Selection s;
    s.name = string_field(j, {"name", "sub_task"}, true);
    if (s.name.empty()) unparsable("empty sub-task name");
    if (const auto* p = field(j, {"parameters", "params"})) s.parameters = binding_of(*p);
    return s;
}

DerivedAction parse_derived_action(std::string_view text) {
    auto j = extract_json(text);
    if (!j.is_object()) unparsable("action must be an object");
    DerivedAction d;
    if (j.contains("done")) {
        if (!j.at("done").is_boolean()) unparsable("'done' must be a boolean");
        d.done = j.at("done").get<bool>();
    }
    const auto* kind_field = field(j, {"action", "kind"});
    if (kind_field == nullptr) {
        if (!d.done) unparsable("missing field 'action'");
        return d;
    }
    if (!kind_field->is_string()) unparsable("'action' must be a string");
    auto kind = action_kind_from_string(kind_field->get<std::string>());
    if (!kind) unparsable("unknown action '" + kind_field->get<std::string>() + "'");
    Action a;
    a.kind = *kind;
    if (const auto* idx = field(j, {"ui_index", "index", "UI_index"})) {
        if (!idx->is_number_integer()) unparsable("ui_index must be an integer");
        a.ui_index = idx->get<int>();
    }
    if (const auto* t = field(j, {"text"})) {
        if (!t->is_string()) unparsable("text must be a string");
        a.text = t->get<std::string>();
    }
    if (const auto* dir = field(j, {"direction"})) {
        if (!dir->is_string()) unparsable("direction must be a string");
        a.direction = direction_from_string(dir->get<std::string>());
        if (!a.direction) unparsable("unknown direction");
    }
    if (!a.valid()) unparsable("action '" + a.to_display() + "' lacks required fields");
    d.action = a;
    return d;
}

ParameterBinding parse_slot_fill(std::string_view text) {
    auto j = extract_json(text);
    if (!j.is_object()) unparsable("slot fill must be an object");
    if (j.contains("parameters")) return binding_of(j.at("parameters"));
    return binding_of(j);
}

TaskName parse_task_name(std::string_view text) {
    auto j = extract_json(text);
    if (!j.is_object()) unparsable("task must be an object");
    TaskName t;
    t.name = string_field(j, {"task", "name"}, true);
    if (t.name.empty()) unparsable("empty task name");
    if (const auto* p = field(j, {"parameters", "params"})) t.parameters = param_list_of(*p);
    if (const auto* v = field(j, {"values"})) t.values = binding_of(*v);
    return t;
}

Structured parse_structured(std::string_view text, Schema schema) {
    switch (schema) {
        case Schema::sub_task_list: return parse_sub_task_list(text);
        case Schema::selected_sub_task: return parse_selection(text);
        case Schema::derived_action: return parse_derived_action(text);
        case Schema::slot_fill: return parse_slot_fill(text);
        case Schema::task_name: return parse_task_name(text);
    }
    unparsable("unknown schema");
}

std::string serialize(const std::vector<ProposedSubTask>& v) {
    OJson arr = OJson::array();
    for (const auto& p : v) {
        OJson o;
        o["name"] = p.sub_task.name;
        o["description"] = p.sub_task.description;
        o["parameters"] = param_list_json(p.sub_task.parameters);
        o["UI_index"] = p.ui_indexes;
        arr.push_back(std::move(o));
    }
    return arr.dump();
}

std::string serialize(const Selection& v) {
    OJson o;
    o["name"] = v.name;
    o["parameters"] = binding_json(v.parameters);
    return o.dump();
}

std::string serialize(const DerivedAction& v) {
    OJson o = OJson::object();
    if (v.action) {
        o["action"] = std::string(to_string(v.action->kind));
        if (v.action->ui_index) o["ui_index"] = *v.action->ui_index;
        if (v.action->text) o["text"] = *v.action->text;
        if (v.action->direction) o["direction"] = std::string(to_string(*v.action->direction));
    }
    if (v.done || !v.action) o["done"] = v.done;
    return o.dump();
}

std::string serialize(const ParameterBinding& v) {
    OJson o;
    o["parameters"] = binding_json(v);
    return o.dump();
}

std::string serialize(const TaskName& v) {
    OJson o;
    o["task"] = v.name;
    o["parameters"] = param_list_json(v.parameters);
    o["values"] = binding_json(v.values);
    return o.dump();
}

std::string serialize(const Structured& v) {
    return std::visit([](const auto& x) { return serialize(x); }, v);
}

}  // namespace taskmem::llm
