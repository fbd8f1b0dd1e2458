#include "taskmem/action.hpp"

#include <stdexcept>


namespace taskmem {

namespace {

std::string quote_value(std::string_view s) { return Json(std::string(s)).dump(); }

void put_opt(Json& j, const char* key, const std::optional<std::string>& v) {
    if (v) j[key] = *v;
}

std::optional<std::string> get_opt_string(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw std::invalid_argument(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

ActionKind read_kind(const Json& j) {
    auto it = j.find("kind");
    if (it == j.end() || !it->is_string()) throw std::invalid_argument("action requires a string 'kind'");
    auto kind = action_kind_from_string(it->get<std::string>());
    if (!kind) throw std::invalid_argument("unknown action kind '" + it->get<std::string>() + "'");
    return *kind;
}

std::optional<Direction> read_direction(const Json& j) {
    auto d = get_opt_string(j, "direction");
    if (!d) return std::nullopt;
    auto dir = direction_from_string(*d);
    if (!dir) throw std::invalid_argument("unknown direction '" + *d + "'");
    return dir;
}

}  // namespace

bool UiSignature::empty() const {
    auto blank = [](const std::optional<std::string>& v) { return !v || v->empty(); };
    return blank(id) && blank(text) && blank(description) && blank(cls);
}

std::string_view to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::click: return "click";
        case ActionKind::input: return "input";
        case ActionKind::scroll: return "scroll";
        case ActionKind::long_click: return "long_click";
        case ActionKind::read_screen: return "read_screen";
        case ActionKind::ask_user: return "ask_user";
        case ActionKind::finish: return "finish";
        case ActionKind::get_user_confirm: return "get_user_confirm";
    }
    return "click";
}

std::optional<ActionKind> action_kind_from_string(std::string_view s) {
    for (auto k : {ActionKind::click, ActionKind::input, ActionKind::scroll, ActionKind::long_click,
                   ActionKind::read_screen, ActionKind::ask_user, ActionKind::finish, ActionKind::get_user_confirm}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

std::string_view to_string(Direction d) { return d == Direction::up ? "up" : "down"; }

std::optional<Direction> direction_from_string(std::string_view s) {
    if (s == "up") return Direction::up;
    if (s == "down") return Direction::down;
    return std::nullopt;
}

bool is_targeted(ActionKind kind) {
    return kind == ActionKind::click || kind == ActionKind::input || kind == ActionKind::long_click;
}

bool is_device_action(ActionKind kind) { return is_targeted(kind) || kind == ActionKind::scroll; }

bool Action::valid() const {
    if (is_targeted(kind) && !ui_index) return false;
    if (kind == ActionKind::input && !text) return false;
    if (kind != ActionKind::input && kind != ActionKind::ask_user && kind != ActionKind::get_user_confirm && text) {
        return false;
    }
    if (kind == ActionKind::scroll) return direction.has_value();
    if (direction) return false;
    if (!is_targeted(kind) && kind != ActionKind::scroll && ui_index) return false;
    return true;
}

std::string Action::to_display() const {
    std::string out(to_string(kind));
    out += "(";
    bool first = true;
    auto sep = [&]() {
        if (!first) out += ", ";
        first = false;
    };
    if (ui_index) {
        sep();
        out += "ui_index=" + std::to_string(*ui_index);
    }
    if (text) {
        sep();
        out += "text=" + quote_value(*text);
    }
    if (direction) {
        sep();
        out += "direction=" + std::string(to_string(*direction));
    }
    return out + ")";
}

std::string GeneralizedAction::to_display() const {
    std::string out(to_string(kind));
    out += "(";
    bool first = true;
    auto field = [&](std::string_view key, const std::optional<std::string>& v) {
        if (!v) return;
        if (!first) out += ", ";
        first = false;
        out += std::string(key) + ":" + quote_value(*v);
    };
    if (target) {
        field("id", target->id);
        field("text", target->text);
        field("description", target->description);
        field("class", target->cls);
    }
    if (text_template) field("input", text_template);
    if (direction) field("direction", std::string(to_string(*direction)));
    return out + ")";
}

void to_json(Json& j, const UiSignature& s) {
    j = Json::object();
    put_opt(j, "id", s.id);
    put_opt(j, "text", s.text);
    put_opt(j, "description", s.description);
    put_opt(j, "class", s.cls);
}

void from_json(const Json& j, UiSignature& s) {
    if (!j.is_object()) throw std::invalid_argument("signature must be an object");
    s.id = get_opt_string(j, "id");
    s.text = get_opt_string(j, "text");
    s.description = get_opt_string(j, "description");
    s.cls = get_opt_string(j, "class");
}

void to_json(Json& j, const Action& a) {
    j = Json::object();
    j["kind"] = std::string(to_string(a.kind));
    if (a.ui_index) j["ui_index"] = *a.ui_index;
    put_opt(j, "text", a.text);
    if (a.direction) j["direction"] = std::string(to_string(*a.direction));
}

void from_json(const Json& j, Action& a) {
    if (!j.is_object()) throw std::invalid_argument("action must be an object");
    a.kind = read_kind(j);
    a.ui_index.reset();
    if (auto it = j.find("ui_index"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw std::invalid_argument("'ui_index' must be an integer");
        a.ui_index = it->get<int>();
    }
    a.text = get_opt_string(j, "text");
    a.direction = read_direction(j);
}

void to_json(Json& j, const GeneralizedAction& a) {
    j = Json::object();
    j["kind"] = std::string(to_string(a.kind));
    if (a.target) j["target"] = *a.target;
    put_opt(j, "text", a.text_template);
    if (a.direction) j["direction"] = std::string(to_string(*a.direction));
}

void from_json(const Json& j, GeneralizedAction& a) {
    if (!j.is_object()) throw std::invalid_argument("generalized action must be an object");
    a.kind = read_kind(j);
    a.target.reset();
    if (auto it = j.find("target"); it != j.end() && !it->is_null()) a.target = it->get<UiSignature>();
    a.text_template = get_opt_string(j, "text");
    a.direction = read_direction(j);
}

Json binding_to_json(const ParameterBinding& b) {
    Json j = Json::object();
    for (const auto& [k, v] : b) j[k] = v ? Json(*v) : Json(nullptr);
    return j;
}

ParameterBinding binding_from_json(const Json& j) {
    if (!j.is_object()) throw std::invalid_argument("parameters must be an object");
    ParameterBinding b;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it->is_null()) {
            b[it.key()] = std::nullopt;
        } else if (it->is_string()) {
            b[it.key()] = it->get<std::string>();
        } else if (it->is_number() || it->is_boolean()) {
            b[it.key()] = it->dump();
        } else {
            throw std::invalid_argument("parameter '" + it.key() + "' must be a string or null");
        }
    }
    return b;
}

std::string binding_to_display(const ParameterBinding& b) {
    std::string out;
    for (const auto& [k, v] : b) {
        if (!out.empty()) out += ", ";
        out += k + "=" + (v ? quote_value(*v) : std::string("<unknown>"));
    }
    return out;
}

}  // namespace taskmem
