#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace taskmem::layout {

using Json = nlohmann::json;

// One node of a captured UI tree. Absent boolean properties parse as false.
struct UiNode {
    std::string class_name;
    std::string resource_id;
    std::string text;
    std::string description;
    bool clickable = false;
    bool editable = false;
    bool scrollable = false;
    bool long_clickable = false;
    bool checkable = false;
    std::vector<UiNode> children;

    bool interactive() const { return clickable || editable || scrollable || long_clickable || checkable; }
    std::size_t subtree_size() const;

    bool operator==(const UiNode&) const = default;
};

enum class Tag { button, input, scroll, checkbox, text, layout };

std::string_view to_string(Tag tag);
std::optional<Tag> tag_from_string(std::string_view s);

// Attribute names in canonical emission order.
inline constexpr std::string_view kAttrId = "id";
inline constexpr std::string_view kAttrText = "text";
inline constexpr std::string_view kAttrDescription = "description";
inline constexpr std::string_view kAttrClass = "class";

struct HtmlElement {
    int index = 0;
    Tag tag = Tag::layout;
    // Non-empty attributes only, in canonical order (id, text, description, class).
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<HtmlElement> children;

    const std::string* attribute(std::string_view name) const;
    // Text and description joined by a single space.
    std::string content() const;

    bool operator==(const HtmlElement&) const = default;
};

// Indexed simplified-HTML view of a screen. Elements are addressed by their
// dense pre-order index; the tree and the flat index always agree.
class ScreenRepresentation {
public:
    ScreenRepresentation() = default;
    ScreenRepresentation(std::optional<HtmlElement> root, std::size_t source_tokens);

    ScreenRepresentation(const ScreenRepresentation& other);
    ScreenRepresentation& operator=(const ScreenRepresentation& other);
    ScreenRepresentation(ScreenRepresentation&& other) noexcept;
    ScreenRepresentation& operator=(ScreenRepresentation&& other) noexcept;

    bool empty() const { return flat_.empty(); }
    std::size_t size() const { return flat_.size(); }
    const std::optional<HtmlElement>& root() const { return root_; }

    bool contains(int index) const { return index >= 0 && static_cast<std::size_t>(index) < flat_.size(); }
    // Precondition: contains(index).
    const HtmlElement& element(int index) const { return *flat_.at(static_cast<std::size_t>(index)); }
    // -1 for the root.
    int parent_of(int index) const { return parents_.at(static_cast<std::size_t>(index)); }
    int depth_of(int index) const { return depths_.at(static_cast<std::size_t>(index)); }

    const std::string& serialized() const { return serialized_; }
    std::size_t source_token_count() const { return source_tokens_; }
    std::size_t pruned_token_count() const { return pruned_tokens_; }

    // Structural equality of the element tree; token bookkeeping is not compared.
    bool operator==(const ScreenRepresentation& other) const { return root_ == other.root_; }

private:
    void rebuild();

    std::optional<HtmlElement> root_;
    std::vector<const HtmlElement*> flat_;
    std::vector<int> parents_;
    std::vector<int> depths_;
    std::string serialized_;
    std::size_t source_tokens_ = 0;
    std::size_t pruned_tokens_ = 0;
};

struct ScreenDelta {
    bool changed = false;
    // Indexes present in only one screen, or present in both with a different
    // tag, attribute set, or parent.
    std::set<int> indexes;
};

UiNode parse_layout(const Json& document);
UiNode parse_layout_text(std::string_view raw);

// Uiautomator-style dump with every attribute spelled out; the source side of
// the token-reduction ratio.
std::string raw_dump(const UiNode& root);

ScreenRepresentation to_screen_representation(const UiNode& root);

// Source nodes of the retained elements, ordered by element index.
std::vector<const UiNode*> indexed_nodes(const UiNode& root);

double token_reduction(const ScreenRepresentation& rep);

ScreenDelta diff_screens(const ScreenRepresentation& a, const ScreenRepresentation& b);

// Parses the canonical serialized form back into a representation. The source
// token count of the result equals its pruned token count.
ScreenRepresentation parse_screen(std::string_view serialized);

// Serialized excerpt containing only the given elements and their ancestors.
std::string serialize_excerpt(const ScreenRepresentation& rep, const std::set<int>& keep);

}  // namespace taskmem::layout
