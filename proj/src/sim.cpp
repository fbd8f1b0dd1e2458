#include "taskmem/sim.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <unordered_map>

#include "taskmem/error.hpp"
#include "taskmem/text.hpp"

namespace taskmem::sim {

namespace {

[[noreturn]] void schema_error(const std::string& why) { throw Error(ErrorKind::SchemaError, why); }

std::string scalar_text(const Json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

bool truthy(const Json& v) {
    if (v.is_null()) return false;
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_string()) return !v.get<std::string>().empty() && v.get<std::string>() != "false";
    if (v.is_number()) return v.get<double>() != 0.0;
    if (v.is_array() || v.is_object()) return !v.empty();
    return false;
}

Json state_value(const Json& state, const std::string& key) {
    auto it = state.find(key);
    return it == state.end() ? Json() : *it;
}

// "state.<key>" -> key
std::string condition_key(const Json& cond) {
    if (!cond.is_string()) schema_error("'if' must be a string");
    auto s = cond.get<std::string>();
    if (s.rfind("state.", 0) != 0) schema_error("condition must start with 'state.': " + s);
    return s.substr(6);
}

// Replaces {{name}} using lookup(name); unknown names become empty.
std::string substitute(const std::string& s, const std::function<std::string(const std::string&)>& lookup) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto open = s.find("{{", pos);
        if (open == std::string::npos) break;
        auto close = s.find("}}", open + 2);
        if (close == std::string::npos) break;
        out.append(s, pos, open - pos);
        out += lookup(s.substr(open + 2, close - open - 2));
        pos = close + 2;
    }
    out.append(s, pos);
    return out;
}

void collect_ids(const Json& tmpl, std::set<std::string>& ids) {
    if (!tmpl.is_object()) return;
    if (tmpl.contains("id") && tmpl["id"].is_string()) ids.insert(tmpl["id"].get<std::string>());
    if (tmpl.contains("item")) collect_ids(tmpl["item"], ids);
    if (tmpl.contains("children") && tmpl["children"].is_array()) {
        for (const auto& c : tmpl["children"]) collect_ids(c, ids);
    }
}

Effect parse_effect(const Json& e) {
    static const std::pair<const char*, Effect::Op> ops[] = {
        {"set", Effect::Op::set}, {"append", Effect::Op::append}, {"clear", Effect::Op::clear}, {"toggle", Effect::Op::toggle}};
    Effect out;
    int found = 0;
    for (const auto& [name, op] : ops) {
        if (!e.contains(name)) continue;
        ++found;
        out.op = op;
        if (!e[name].is_string()) schema_error(std::string("effect '") + name + "' needs a state key");
        out.key = e[name].get<std::string>();
    }
    if (found != 1) schema_error("effect needs exactly one of set/append/clear/toggle");
    if (out.op == Effect::Op::set || out.op == Effect::Op::append) {
        if (!e.contains("value")) schema_error("effect on '" + out.key + "' needs a value");
        out.value = e["value"];
    }
    return out;
}

void preorder(const layout::UiNode& n, std::unordered_map<const layout::UiNode*, std::size_t>& pos) {
    pos.emplace(&n, pos.size());
    for (const auto& c : n.children) preorder(c, pos);
}

}  // namespace

std::size_t DeviceAdapter::save_snapshot() {
    throw Error(ErrorKind::CapabilityUnsupported, "device does not support snapshots");
}

void DeviceAdapter::restore_snapshot(std::size_t) {
    throw Error(ErrorKind::CapabilityUnsupported, "device does not support snapshots");
}

AppScript parse_script(const Json& j) {
    if (!j.is_object()) schema_error("app script must be an object");
    AppScript s;
    try {
        s.app_id = j.at("app_id").get<std::string>();
        s.initial_page = j.at("initial_page").get<std::string>();
        s.window_size = j.value("window_size", 4);
        for (const auto& [name, tmpl] : j.at("pages").items()) {
            if (!tmpl.is_object()) schema_error("page '" + name + "' must be an object");
            s.pages.emplace(name, tmpl);
        }
        if (j.contains("state")) {
            if (!j["state"].is_object()) schema_error("'state' must be an object");
            s.state = j["state"];
        }
        for (const auto& r : j.value("rules", Json::array())) {
            Rule rule;
            rule.page = r.at("page").get<std::string>();
            const auto& t = r.at("trigger");
            auto kind = action_kind_from_string(t.at("action").get<std::string>());
            if (!kind || !is_device_action(*kind)) schema_error("rule trigger needs a device action");
            rule.trigger.action = *kind;
            rule.trigger.id = t.at("id").get<std::string>();
            if (t.contains("text")) rule.trigger.text = t["text"].get<std::string>();
            for (const auto& e : r.value("effects", Json::array())) rule.effects.push_back(parse_effect(e));
            if (r.contains("next_page")) rule.next_page = r["next_page"].get<std::string>();
            rule.critical = r.value("critical", false);
            s.rules.push_back(std::move(rule));
        }
    } catch (const Json::exception& e) {
        schema_error(std::string("app script: ") + e.what());
    }
    if (s.window_size < 2) schema_error("window_size must be at least 2");
    if (!s.pages.contains(s.initial_page)) throw Error(ErrorKind::DanglingRule, "initial page '" + s.initial_page + "' is not defined");
    for (std::size_t i = 0; i < s.rules.size(); ++i) {
        const auto& r = s.rules[i];
        auto page = s.pages.find(r.page);
        if (page == s.pages.end()) throw Error(ErrorKind::DanglingRule, "rule " + std::to_string(i) + " names missing page '" + r.page + "'");
        if (r.next_page && !s.pages.contains(*r.next_page)) {
            throw Error(ErrorKind::DanglingRule, "rule " + std::to_string(i) + " leads to missing page '" + *r.next_page + "'");
        }
        std::set<std::string> ids;
        collect_ids(page->second, ids);
        if (!ids.contains(r.trigger.id)) {
            throw Error(ErrorKind::DanglingRule,
                        "rule " + std::to_string(i) + " triggers on id '" + r.trigger.id + "' absent from page '" + r.page + "'");
        }
    }
    return s;
}

AppScript load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) schema_error(path.string() + " is not valid JSON");
    return parse_script(j);
}

Simulator::Simulator(AppScript script) : script_(std::move(script)), page_(script_.initial_page), state_(script_.state) {
    captured_ = render().layout;
}

std::string Simulator::interpolate(const std::string& s, const Json* item) const {
    return substitute(s, [&](const std::string& name) -> std::string {
        if (name.rfind("state.", 0) == 0) return scalar_text(state_value(state_, name.substr(6)));
        if (item != nullptr && name == "item") return scalar_text(*item);
        if (item != nullptr && name.rfind("item.", 0) == 0 && item->is_object()) {
            return scalar_text(state_value(*item, name.substr(5)));
        }
        return "";
    });
}

std::optional<Json> Simulator::render_node(const Json& tmpl, const Json* item, std::vector<ElementMeta>& meta) const {
    if (tmpl.contains("if") && !truthy(state_value(state_, condition_key(tmpl["if"])))) return std::nullopt;
    if (tmpl.contains("if_not") && truthy(state_value(state_, condition_key(tmpl["if_not"])))) return std::nullopt;

    Json node = Json::object();
    static const char* kCopied[] = {"class", "id", "clickable", "editable", "scrollable", "long_clickable", "checkable"};
    for (const char* k : kCopied) {
        if (tmpl.contains(k)) node[k] = tmpl[k];
    }
    if (!node.contains("class")) schema_error("template node without 'class'");
    for (const char* k : {"text", "desc"}) {
        if (tmpl.contains(k)) {
            auto v = interpolate(tmpl[k].get<std::string>(), item);
            if (!v.empty()) node[k] = v;
        }
    }
    ElementMeta m;
    m.id = node.value("id", "");
    if (item != nullptr) m.item = *item;
    if (node.value("editable", false) && !node.contains("text") && !m.id.empty()) {
        auto typed = scalar_text(state_value(state_, "input." + m.id));
        if (!typed.empty()) node["text"] = typed;
    }

    std::size_t slot = meta.size();
    meta.push_back(m);
    Json children = Json::array();
    if (tmpl.contains("list")) {
        if (m.id.empty()) schema_error("list node needs an id");
        node["scrollable"] = true;
        meta[slot].list_id = m.id;
        auto backing = state_value(state_, tmpl["list"].get<std::string>());
        if (!backing.is_null() && !backing.is_array()) schema_error("list state '" + tmpl["list"].get<std::string>() + "' is not an array");
        int size = tmpl.value("window", script_.window_size);
        auto it = offsets_.find(m.id);
        int offset = it == offsets_.end() ? 0 : it->second;
        int n = backing.is_array() ? static_cast<int>(backing.size()) : 0;
        for (int i = offset; i < std::min(n, offset + size); ++i) {
            std::size_t child_slot = meta.size();
            if (auto c = render_node(tmpl.at("item"), &backing[static_cast<std::size_t>(i)], meta)) {
                meta[child_slot].list_item = true;
                children.push_back(std::move(*c));
            }
        }
    } else if (tmpl.contains("children")) {
        for (const auto& c : tmpl["children"]) {
            if (auto r = render_node(c, item, meta)) children.push_back(std::move(*r));
        }
    }
    if (!children.empty()) node["children"] = std::move(children);
    return node;
}

Simulator::Rendered Simulator::render() const {
    Rendered r;
    auto root = render_node(script_.pages.at(page_), nullptr, r.meta);
    r.layout = root ? *root : Json{{"class", "FrameLayout"}};
    return r;
}

Json Simulator::capture_layout() {
    captured_ = render().layout;
    return *captured_;
}

layout::ScreenRepresentation Simulator::screen() const {
    return layout::to_screen_representation(layout::parse_layout(render().layout));
}

std::vector<Json> Simulator::list_window(const std::string& list_id) const {
    auto r = render();
    for (std::size_t i = 0; i < r.meta.size(); ++i) {
        if (r.meta[i].list_id != list_id) continue;
        std::vector<Json> items;
        for (std::size_t k = i + 1; k < r.meta.size() && r.meta[k].item; ++k) {
            if (r.meta[k].list_item) items.push_back(*r.meta[k].item);
        }
        return items;
    }
    throw Error(ErrorKind::UnknownList, "no list '" + list_id + "' on page '" + page_ + "'");
}

void Simulator::change_page(const std::string& next) {
    if (next != page_) offsets_.clear();
    page_ = next;
}

void Simulator::fire(std::size_t rule_index, const ElementMeta& target, const layout::UiNode& node, const Action& action) {
    const auto& rule = script_.rules[rule_index];
    auto lookup = [&](const std::string& name) -> std::string {
        if (name == "target.text") return node.text;
        if (name == "target.description") return node.description;
        if (name == "target.id") return node.resource_id;
        if (name == "input.text") return action.text.value_or("");
        if (name.rfind("state.", 0) == 0) return scalar_text(state_value(state_, name.substr(6)));
        if (target.item && name == "item") return scalar_text(*target.item);
        if (target.item && name.rfind("item.", 0) == 0 && target.item->is_object()) {
            return scalar_text(state_value(*target.item, name.substr(5)));
        }
        return "";
    };
    std::function<Json(const Json&)> expand = [&](const Json& v) -> Json {
        if (v.is_string()) return substitute(v.get<std::string>(), lookup);
        if (v.is_object() || v.is_array()) {
            Json out = v;
            for (auto& [k, x] : out.items()) x = expand(x);
            return out;
        }
        return v;
    };
    for (const auto& e : rule.effects) {
        switch (e.op) {
            case Effect::Op::set: state_[e.key] = expand(e.value); break;
            case Effect::Op::append:
                if (!state_.contains(e.key) || !state_[e.key].is_array()) state_[e.key] = Json::array();
                state_[e.key].push_back(expand(e.value));
                break;
            case Effect::Op::clear: state_.erase(e.key); break;
            case Effect::Op::toggle: state_[e.key] = !truthy(state_value(state_, e.key)); break;
        }
    }
    if (rule.critical) critical_log_.push_back({rule_index, page_, confirm_pending_});
    if (rule.next_page) change_page(*rule.next_page);
}

void Simulator::dispatch(const Action& action) {
    if (action.kind == ActionKind::get_user_confirm) {
        confirm_pending_ = true;
        return;
    }
    if (!is_device_action(action.kind)) return;

    auto current = render();
    if (!captured_ || *captured_ != current.layout) {
        throw Error(ErrorKind::StaleScreen, "screen changed since the last capture");
    }
    auto root = layout::parse_layout(current.layout);
    auto nodes = layout::indexed_nodes(root);
    std::unordered_map<const layout::UiNode*, std::size_t> pos;
    preorder(root, pos);

    const layout::UiNode* node = nullptr;
    const ElementMeta* meta = nullptr;
    if (action.ui_index) {
        int i = *action.ui_index;
        if (i < 0 || static_cast<std::size_t>(i) >= nodes.size()) {
            throw Error(ErrorKind::InvalidIndex, "There is no UI with index " + std::to_string(i));
        }
        node = nodes[static_cast<std::size_t>(i)];
        meta = &current.meta[pos.at(node)];
        bool ok = false;
        switch (action.kind) {
            case ActionKind::click: ok = node->clickable || node->checkable; break;
            case ActionKind::long_click: ok = node->long_clickable; break;
            case ActionKind::input: ok = node->editable; break;
            case ActionKind::scroll: ok = node->scrollable; break;
            default: break;
        }
        if (!ok) throw Error(ErrorKind::NotActionable, std::string(to_string(action.kind)) + " on element " + std::to_string(i));
    }
    ++dispatch_count_;
    bool confirmed = confirm_pending_;
    confirm_pending_ = false;

    if (action.kind == ActionKind::scroll) {
        const ElementMeta* list = nullptr;
        if (meta != nullptr) {
            if (meta->list_id) list = meta;
        } else {
            for (const auto& m : current.meta) {
                if (m.list_id) {
                    list = &m;
                    break;
                }
            }
        }
        if (list == nullptr) return;
        std::size_t total = 0;
        int size = script_.window_size;
        // Recover the backing length and window size from the page template.
        std::function<bool(const Json&)> find = [&](const Json& t) -> bool {
            if (t.contains("list") && t.value("id", "") == *list->list_id) {
                auto backing = state_value(state_, t["list"].get<std::string>());
                total = backing.is_array() ? backing.size() : 0;
                size = t.value("window", script_.window_size);
                return true;
            }
            for (const auto& c : t.value("children", Json::array())) {
                if (find(c)) return true;
            }
            return false;
        };
        find(script_.pages.at(page_));
        int max_offset = std::max(0, static_cast<int>(total) - size);
        int& offset = offsets_[*list->list_id];
        int stride = size - 1;
        offset = action.direction == Direction::up ? std::max(0, offset - stride) : std::min(max_offset, offset + stride);
        return;
    }

    if (action.kind == ActionKind::input && meta != nullptr && !meta->id.empty()) {
        state_["input." + meta->id] = *action.text;
    }
    if (meta == nullptr) return;
    for (std::size_t r = 0; r < script_.rules.size(); ++r) {
        const auto& rule = script_.rules[r];
        if (rule.page != page_ || rule.trigger.action != action.kind || rule.trigger.id != meta->id) continue;
        if (rule.trigger.text && *rule.trigger.text != node->text) continue;
        confirm_pending_ = confirmed;
        fire(r, *meta, *node, action);
        confirm_pending_ = false;
        break;
    }
}

Json Simulator::step(const Action& action) {
    dispatch(action);
    return capture_layout();
}

std::size_t Simulator::save_snapshot() {
    snapshots_.push_back({page_, state_, offsets_});
    return snapshots_.size() - 1;
}

void Simulator::restore_snapshot(std::size_t id) {
    if (id >= snapshots_.size()) throw Error(ErrorKind::InvalidTarget, "no snapshot " + std::to_string(id));
    const auto& s = snapshots_[id];
    page_ = s.page;
    state_ = s.state;
    offsets_ = s.offsets;
    captured_ = render().layout;
}

}  // namespace taskmem::sim
