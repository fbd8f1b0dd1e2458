#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskmem/action.hpp"
#include "taskmem/layout.hpp"

namespace taskmem::sim {

using Json = nlohmann::json;

// What the agent needs from a device. A real device bridge implements the
// first two; snapshots are optional.
class DeviceAdapter {
public:
    virtual ~DeviceAdapter() = default;

    virtual Json capture_layout() = 0;
    // Throws StaleScreen when the screen changed since the last capture.
    virtual void dispatch(const Action& action) = 0;

    virtual bool supports_snapshots() const { return false; }
    virtual std::size_t save_snapshot();            // CapabilityUnsupported by default
    virtual void restore_snapshot(std::size_t id);  // CapabilityUnsupported by default
    // Count of effects that cannot be undone (critical rule firings).
    virtual std::size_t irreversible_count() const { return 0; }
};

struct Trigger {
    ActionKind action = ActionKind::click;
    std::string id;
    std::optional<std::string> text;  // element text must equal this
};

struct Effect {
    enum class Op { set, append, clear, toggle };
    Op op = Op::set;
    std::string key;
    Json value;
};

struct Rule {
    std::string page;
    Trigger trigger;
    std::vector<Effect> effects;
    std::optional<std::string> next_page;
    bool critical = false;
};

struct AppScript {
    std::string app_id;
    std::string initial_page;
    int window_size = 4;
    std::map<std::string, Json> pages;
    Json state = Json::object();
    std::vector<Rule> rules;
};

AppScript parse_script(const Json& j);  // SchemaError, DanglingRule
AppScript load_script(const std::filesystem::path& path);

struct CriticalFiring {
    std::size_t rule = 0;
    std::string page;
    bool confirmed = false;  // a get_user_confirm came right before
};

// Executes actions against a declarative app script.
//
// Page templates are layout documents extended with:
//   {"list": <state key>, "id": ..., "item": <template>, "window": n}
//       a scrollable container showing a window over a state array;
//   {"if": "state.<key>"} / {"if_not": "state.<key>"} on any node;
//   "{{state.<key>}}", "{{item}}", "{{item.<field>}}" inside text and desc.
// Editable nodes show the text last typed into them (state "input.<id>").
class Simulator final : public DeviceAdapter {
public:
    explicit Simulator(AppScript script);

    Json capture_layout() override;
    void dispatch(const Action& action) override;
    // dispatch then capture.
    Json step(const Action& action);

    bool supports_snapshots() const override { return true; }
    std::size_t save_snapshot() override;
    void restore_snapshot(std::size_t id) override;
    std::size_t irreversible_count() const override { return critical_log_.size(); }

    const std::string& page() const { return page_; }
    const Json& state() const { return state_; }
    const AppScript& script() const { return script_; }
    const std::vector<CriticalFiring>& critical_log() const { return critical_log_; }
    std::size_t dispatch_count() const { return dispatch_count_; }

    // Items currently visible in the list with the given container id.
    std::vector<Json> list_window(const std::string& list_id) const;
    layout::ScreenRepresentation screen() const;

private:
    struct ElementMeta {
        std::string id;
        std::optional<std::string> list_id;  // set on list containers
        std::optional<Json> item;            // set inside rendered list items
        bool list_item = false;              // the item's own root node
    };
    struct Rendered {
        Json layout;
        std::vector<ElementMeta> meta;  // pre-order over all rendered nodes
    };
    struct Snapshot {
        std::string page;
        Json state;
        std::map<std::string, int> offsets;
    };

    Rendered render() const;
    std::optional<Json> render_node(const Json& tmpl, const Json* item, std::vector<ElementMeta>& meta) const;
    std::string interpolate(const std::string& s, const Json* item) const;
    void fire(std::size_t rule_index, const ElementMeta& target, const layout::UiNode& node, const Action& action);
    void change_page(const std::string& next);

    AppScript script_;
    std::string page_;
    Json state_;
    std::map<std::string, int> offsets_;
    std::optional<Json> captured_;
    bool confirm_pending_ = false;
    std::vector<CriticalFiring> critical_log_;
    std::vector<Snapshot> snapshots_;
    std::size_t dispatch_count_ = 0;
};

}  // namespace taskmem::sim
