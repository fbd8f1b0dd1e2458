#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace taskmem {

using Json = nlohmann::json;

// Attributes identifying a UI element independent of its screen index.
struct UiSignature {
    std::optional<std::string> id;
    std::optional<std::string> text;
    std::optional<std::string> description;
    std::optional<std::string> cls;

    bool empty() const;
    bool operator==(const UiSignature&) const = default;
};

enum class ActionKind { click, input, scroll, long_click, read_screen, ask_user, finish, get_user_confirm };
enum class Direction { up, down };

std::string_view to_string(ActionKind kind);
std::optional<ActionKind> action_kind_from_string(std::string_view s);
std::string_view to_string(Direction d);
std::optional<Direction> direction_from_string(std::string_view s);

// click, input and long_click address a screen element.
bool is_targeted(ActionKind kind);
// The kinds that reach the device and count as executed actions.
bool is_device_action(ActionKind kind);

// A concrete primitive action against one screen.
struct Action {
    ActionKind kind = ActionKind::click;
    std::optional<int> ui_index;
    std::optional<std::string> text;
    std::optional<Direction> direction;

    static Action click(int index) { return {ActionKind::click, index, std::nullopt, std::nullopt}; }
    static Action long_click(int index) { return {ActionKind::long_click, index, std::nullopt, std::nullopt}; }
    static Action input(int index, std::string value) { return {ActionKind::input, index, std::move(value), std::nullopt}; }
    static Action scroll(Direction d, std::optional<int> index = std::nullopt) {
        return {ActionKind::scroll, index, std::nullopt, d};
    }
    static Action finish() { return {ActionKind::finish, std::nullopt, std::nullopt, std::nullopt}; }

    // Kind-specific field requirements hold.
    bool valid() const;
    std::string to_display() const;

    bool operator==(const Action&) const = default;
};

// An action whose target is described by attributes, with "[param]" placeholders.
struct GeneralizedAction {
    ActionKind kind = ActionKind::click;
    std::optional<UiSignature> target;
    std::optional<std::string> text_template;
    std::optional<Direction> direction;

    std::string to_display() const;
    bool operator==(const GeneralizedAction&) const = default;
};

// Parameter values; std::nullopt marks a value the user has not provided yet.
using ParameterBinding = std::map<std::string, std::optional<std::string>>;

void to_json(Json& j, const UiSignature& s);
void from_json(const Json& j, UiSignature& s);
void to_json(Json& j, const Action& a);
void from_json(const Json& j, Action& a);
void to_json(Json& j, const GeneralizedAction& a);
void from_json(const Json& j, GeneralizedAction& a);

Json binding_to_json(const ParameterBinding& b);
ParameterBinding binding_from_json(const Json& j);
std::string binding_to_display(const ParameterBinding& b);

}  // namespace taskmem
