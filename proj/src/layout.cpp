#include "taskmem/layout.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

#include "taskmem/error.hpp"
#include "taskmem/text.hpp"

namespace taskmem::layout {

namespace {

struct NodeKeys {
    static constexpr const char* kClass = "class";
    static constexpr const char* kId = "id";
    static constexpr const char* kText = "text";
    static constexpr const char* kDesc = "desc";
    static constexpr const char* kChildren = "children";
};

std::string optional_string(const Json& node, const char* key) {
    auto it = node.find(key);
    if (it == node.end() || it->is_null()) return {};
    if (!it->is_string()) {
        throw Error(ErrorKind::MalformedLayout, std::string("field '") + key + "' must be a string");
    }
    return it->get<std::string>();
}

bool optional_bool(const Json& node, const char* key) {
    auto it = node.find(key);
    if (it == node.end() || it->is_null()) return false;
    if (!it->is_boolean()) {
        throw Error(ErrorKind::MalformedLayout, std::string("field '") + key + "' must be a boolean");
    }
    return it->get<bool>();
}

class LayoutReader {
public:
    explicit LayoutReader(const Json* named) : named_(named) {}

    UiNode read(const Json& node) {
        if (node.is_string()) return read_ref(node.get<std::string>());
        if (!node.is_object()) throw Error(ErrorKind::MalformedLayout, "layout node must be an object");

        auto cls = node.find(NodeKeys::kClass);
        if (cls == node.end() || !cls->is_string()) {
            throw Error(ErrorKind::MalformedLayout, "layout node requires a string 'class'");
        }
        UiNode out;
        out.class_name = cls->get<std::string>();
        out.resource_id = optional_string(node, NodeKeys::kId);
        out.text = optional_string(node, NodeKeys::kText);
        out.description = optional_string(node, NodeKeys::kDesc);
        out.clickable = optional_bool(node, "clickable");
        out.editable = optional_bool(node, "editable");
        out.scrollable = optional_bool(node, "scrollable");
        out.long_clickable = optional_bool(node, "long_clickable");
        out.checkable = optional_bool(node, "checkable");

        auto kids = node.find(NodeKeys::kChildren);
        if (kids != node.end() && !kids->is_null()) {
            if (!kids->is_array()) throw Error(ErrorKind::MalformedLayout, "'children' must be an array");
            out.children.reserve(kids->size());
            for (const auto& child : *kids) out.children.push_back(read(child));
        }
        return out;
    }

private:
    UiNode read_ref(const std::string& name) {
        if (named_ == nullptr) {
            throw Error(ErrorKind::MalformedLayout, "node reference '" + name + "' outside a graph document");
        }
        auto it = named_->find(name);
        if (it == named_->end()) throw Error(ErrorKind::MalformedLayout, "unknown node reference '" + name + "'");
        if (std::find(stack_.begin(), stack_.end(), name) != stack_.end()) {
            throw Error(ErrorKind::CyclicLayout, "node '" + name + "' is its own ancestor");
        }
        stack_.push_back(name);
        UiNode out = read(*it);
        stack_.pop_back();
        return out;
    }

    const Json* named_;
    std::vector<std::string> stack_;
};

std::string short_class(std::string_view cls) {
    auto dot = cls.rfind('.');
    return std::string(dot == std::string_view::npos ? cls : cls.substr(dot + 1));
}

Tag tag_for(const UiNode& n, bool has_content) {
    if (n.editable) return Tag::input;
    if (n.scrollable) return Tag::scroll;
    if (n.clickable || n.long_clickable) return Tag::button;
    if (n.checkable) return Tag::checkbox;
    return has_content ? Tag::text : Tag::layout;
}

bool mark_retained(const UiNode& n, std::map<const UiNode*, bool>& keep) {
    bool any_child = false;
    for (const auto& c : n.children) any_child = mark_retained(c, keep) || any_child;
    bool kept = n.interactive() || !text::trim(n.text).empty() || !text::trim(n.description).empty() ||
                !text::trim(n.resource_id).empty() || any_child;
    keep[&n] = kept;
    return kept;
}

// Builds the retained element for `n`; returns the elements of retained
// children spliced in place of dropped nodes.
void build(const UiNode& n, const std::map<const UiNode*, bool>& keep, int& next_index,
           std::vector<HtmlElement>& out, std::vector<const UiNode*>* order) {
    if (!keep.at(&n)) {
        for (const auto& c : n.children) build(c, keep, next_index, out, order);
        return;
    }
    HtmlElement el;
    el.index = next_index++;
    if (order != nullptr) order->push_back(&n);
    auto id = text::trim(n.resource_id);
    auto txt = text::trim(n.text);
    auto desc = text::trim(n.description);
    if (!id.empty()) el.attributes.emplace_back(kAttrId, id);
    if (!txt.empty()) el.attributes.emplace_back(kAttrText, txt);
    if (!desc.empty()) el.attributes.emplace_back(kAttrDescription, desc);
    if (id.empty() && txt.empty() && desc.empty()) {
        auto cls = short_class(text::trim(n.class_name));
        if (!cls.empty()) el.attributes.emplace_back(kAttrClass, cls);
    }
    el.tag = tag_for(n, !txt.empty() || !desc.empty());
    for (const auto& c : n.children) build(c, keep, next_index, el.children, order);
    out.push_back(std::move(el));
}

std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '\n': out += "&#10;"; break;
            case '\r': out += "&#13;"; break;
            case '\t': out += "&#9;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string unescape(std::string_view s) {
    static const std::pair<std::string_view, char> kEntities[] = {
        {"&amp;", '&'}, {"&quot;", '"'}, {"&lt;", '<'}, {"&gt;", '>'},
        {"&#10;", '\n'}, {"&#13;", '\r'}, {"&#9;", '\t'},
    };
    std::string out;
    for (std::size_t i = 0; i < s.size();) {
        if (s[i] == '&') {
            bool matched = false;
            for (const auto& [ent, ch] : kEntities) {
                if (s.substr(i, ent.size()) == ent) {
                    out.push_back(ch);
                    i += ent.size();
                    matched = true;
                    break;
                }
            }
            if (!matched) throw Error(ErrorKind::MalformedScreen, "unknown entity in attribute value");
        } else {
            out.push_back(s[i++]);
        }
    }
    return out;
}

std::string open_tag(const HtmlElement& el, bool self_closing) {
    std::string line = "<";
    line += to_string(el.tag);
    line += " index=" + std::to_string(el.index);
    for (const auto& [k, v] : el.attributes) line += " " + k + "=\"" + escape(v) + "\"";
    line += self_closing ? "/>" : ">";
    return line;
}

void serialize_into(const HtmlElement& el, int depth, std::string& out) {
    std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    if (el.children.empty()) {
        out += indent + open_tag(el, true) + "\n";
        return;
    }
    out += indent + open_tag(el, false) + "\n";
    for (const auto& c : el.children) serialize_into(c, depth + 1, out);
    out += indent + "</" + std::string(to_string(el.tag)) + ">\n";
}

void dump_into(const UiNode& n, int depth, std::string& out) {
    std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    auto b = [](bool v) { return v ? "\"true\"" : "\"false\""; };
    out += indent + "<node class=\"" + escape(n.class_name) + "\" resource-id=\"" + escape(n.resource_id) +
           "\" text=\"" + escape(n.text) + "\" content-desc=\"" + escape(n.description) + "\" clickable=" +
           b(n.clickable) + " editable=" + b(n.editable) + " scrollable=" + b(n.scrollable) +
           " long-clickable=" + b(n.long_clickable) + " checkable=" + b(n.checkable);
    if (n.children.empty()) {
        out += "/>\n";
        return;
    }
    out += ">\n";
    for (const auto& c : n.children) dump_into(c, depth + 1, out);
    out += indent + "</node>\n";
}

// Line-oriented parser for the canonical serialized form.
class ScreenParser {
public:
    explicit ScreenParser(std::string_view src) : src_(src) {}

    std::optional<HtmlElement> parse() {
        std::vector<HtmlElement> stack;
        std::optional<HtmlElement> root;
        std::istringstream in{std::string(src_)};
        std::string raw;
        while (std::getline(in, raw)) {
            auto line = text::trim(raw);
            if (line.empty()) continue;
            if (root.has_value()) throw Error(ErrorKind::MalformedScreen, "content after the root element");
            if (line.rfind("</", 0) == 0) {
                auto name = line.substr(2, line.size() - 3);
                if (line.back() != '>' || stack.empty() || to_string(stack.back().tag) != name) {
                    throw Error(ErrorKind::MalformedScreen, "unbalanced closing tag: " + line);
                }
                HtmlElement done = std::move(stack.back());
                stack.pop_back();
                attach(std::move(done), stack, root);
                continue;
            }
            bool self_closing = false;
            HtmlElement el = parse_open(line, self_closing);
            if (self_closing) {
                attach(std::move(el), stack, root);
            } else {
                stack.push_back(std::move(el));
            }
        }
        if (!stack.empty()) throw Error(ErrorKind::MalformedScreen, "unterminated element");
        return root;
    }

private:
    static void attach(HtmlElement el, std::vector<HtmlElement>& stack, std::optional<HtmlElement>& root) {
        if (stack.empty()) {
            root = std::move(el);
        } else {
            stack.back().children.push_back(std::move(el));
        }
    }

    static HtmlElement parse_open(const std::string& line, bool& self_closing) {
        if (line.size() < 3 || line.front() != '<' || line.back() != '>') {
            throw Error(ErrorKind::MalformedScreen, "not an element line: " + line);
        }
        self_closing = line.size() >= 2 && line[line.size() - 2] == '/';
        std::string_view body(line);
        body = body.substr(1, body.size() - (self_closing ? 3 : 2));
        std::size_t pos = 0;
        auto read_word = [&]() {
            std::size_t start = pos;
            while (pos < body.size() && body[pos] != ' ' && body[pos] != '=') ++pos;
            return std::string(body.substr(start, pos - start));
        };
        HtmlElement el;
        auto tag = tag_from_string(read_word());
        if (!tag) throw Error(ErrorKind::MalformedScreen, "unknown tag in: " + line);
        el.tag = *tag;
        bool have_index = false;
        while (pos < body.size()) {
            if (body[pos] != ' ') throw Error(ErrorKind::MalformedScreen, "expected attribute in: " + line);
            ++pos;
            auto key = read_word();
            if (pos >= body.size() || body[pos] != '=') throw Error(ErrorKind::MalformedScreen, "expected '=' in: " + line);
            ++pos;
            if (key == "index") {
                std::size_t start = pos;
                while (pos < body.size() && body[pos] >= '0' && body[pos] <= '9') ++pos;
                if (start == pos) throw Error(ErrorKind::MalformedScreen, "bad index in: " + line);
                el.index = std::stoi(std::string(body.substr(start, pos - start)));
                have_index = true;
                continue;
            }
            if (pos >= body.size() || body[pos] != '"') throw Error(ErrorKind::MalformedScreen, "unquoted value in: " + line);
            auto close = body.find('"', pos + 1);
            if (close == std::string_view::npos) throw Error(ErrorKind::MalformedScreen, "unterminated value in: " + line);
            el.attributes.emplace_back(key, unescape(body.substr(pos + 1, close - pos - 1)));
            pos = close + 1;
        }
        if (!have_index) throw Error(ErrorKind::MalformedScreen, "missing index in: " + line);
        return el;
    }

    std::string_view src_;
};

void excerpt_into(const HtmlElement& el, const std::set<int>& visible, int depth, std::string& out) {
    if (!visible.contains(el.index)) return;
    std::vector<const HtmlElement*> kids;
    for (const auto& c : el.children) {
        if (visible.contains(c.index)) kids.push_back(&c);
    }
    std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    if (kids.empty()) {
        out += indent + open_tag(el, true) + "\n";
        return;
    }
    out += indent + open_tag(el, false) + "\n";
    for (const auto* c : kids) excerpt_into(*c, visible, depth + 1, out);
    out += indent + "</" + std::string(to_string(el.tag)) + ">\n";
}

}  // namespace

std::size_t UiNode::subtree_size() const {
    std::size_t n = 1;
    for (const auto& c : children) n += c.subtree_size();
    return n;
}

std::string_view to_string(Tag tag) {
    switch (tag) {
        case Tag::button: return "button";
        case Tag::input: return "input";
        case Tag::scroll: return "scroll";
        case Tag::checkbox: return "checkbox";
        case Tag::text: return "text";
        case Tag::layout: return "layout";
    }
    return "layout";
}

std::optional<Tag> tag_from_string(std::string_view s) {
    for (Tag t : {Tag::button, Tag::input, Tag::scroll, Tag::checkbox, Tag::text, Tag::layout}) {
        if (to_string(t) == s) return t;
    }
    return std::nullopt;
}

const std::string* HtmlElement::attribute(std::string_view name) const {
    for (const auto& [k, v] : attributes) {
        if (k == name) return &v;
    }
    return nullptr;
}

std::string HtmlElement::content() const {
    const auto* t = attribute(kAttrText);
    const auto* d = attribute(kAttrDescription);
    if (t && d) return *t + " " + *d;
    if (t) return *t;
    if (d) return *d;
    return {};
}

ScreenRepresentation::ScreenRepresentation(std::optional<HtmlElement> root, std::size_t source_tokens)
    : root_(std::move(root)), source_tokens_(source_tokens) {
    rebuild();
}

ScreenRepresentation::ScreenRepresentation(const ScreenRepresentation& other)
    : root_(other.root_), source_tokens_(other.source_tokens_) {
    rebuild();
}

ScreenRepresentation& ScreenRepresentation::operator=(const ScreenRepresentation& other) {
    if (this != &other) {
        root_ = other.root_;
        source_tokens_ = other.source_tokens_;
        rebuild();
    }
    return *this;
}

ScreenRepresentation::ScreenRepresentation(ScreenRepresentation&& other) noexcept
    : root_(std::move(other.root_)), source_tokens_(other.source_tokens_) {
    rebuild();
    other.root_.reset();
    other.rebuild();
}

ScreenRepresentation& ScreenRepresentation::operator=(ScreenRepresentation&& other) noexcept {
    if (this != &other) {
        root_ = std::move(other.root_);
        source_tokens_ = other.source_tokens_;
        rebuild();
        other.root_.reset();
        other.rebuild();
    }
    return *this;
}

void ScreenRepresentation::rebuild() {
    flat_.clear();
    parents_.clear();
    depths_.clear();
    serialized_.clear();
    if (root_) {
        std::function<void(const HtmlElement&, int, int)> walk = [&](const HtmlElement& el, int parent, int depth) {
            auto slot = static_cast<std::size_t>(el.index);
            if (el.index < 0) throw Error(ErrorKind::MalformedScreen, "negative element index");
            if (flat_.size() <= slot) {
                flat_.resize(slot + 1, nullptr);
                parents_.resize(slot + 1, -1);
                depths_.resize(slot + 1, 0);
            }
            if (flat_[slot] != nullptr) throw Error(ErrorKind::MalformedScreen, "duplicate element index");
            flat_[slot] = &el;
            parents_[slot] = parent;
            depths_[slot] = depth;
            for (const auto& c : el.children) walk(c, el.index, depth + 1);
        };
        walk(*root_, -1, 0);
        if (std::find(flat_.begin(), flat_.end(), nullptr) != flat_.end()) {
            throw Error(ErrorKind::MalformedScreen, "element indexes are not dense");
        }
        serialize_into(*root_, 0, serialized_);
    }
    pruned_tokens_ = text::count_tokens(serialized_);
}

UiNode parse_layout(const Json& document) {
    if (document.is_object() && document.contains("nodes") && document.contains("root")) {
        const auto& named = document.at("nodes");
        if (!named.is_object()) throw Error(ErrorKind::MalformedLayout, "'nodes' must be an object");
        LayoutReader reader(&named);
        return reader.read(document.at("root"));
    }
    LayoutReader reader(nullptr);
    return reader.read(document);
}

UiNode parse_layout_text(std::string_view raw) {
    Json doc;
    try {
        doc = Json::parse(raw);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::MalformedLayout, e.what());
    }
    return parse_layout(doc);
}

std::string raw_dump(const UiNode& root) {
    std::string out;
    dump_into(root, 0, out);
    return out;
}

ScreenRepresentation to_screen_representation(const UiNode& root) {
    std::map<const UiNode*, bool> keep;
    mark_retained(root, keep);
    int next = 0;
    std::vector<HtmlElement> top;
    build(root, keep, next, top, nullptr);
    std::optional<HtmlElement> tree;
    if (!top.empty()) tree = std::move(top.front());
    return ScreenRepresentation(std::move(tree), text::count_tokens(raw_dump(root)));
}

std::vector<const UiNode*> indexed_nodes(const UiNode& root) {
    std::map<const UiNode*, bool> keep;
    mark_retained(root, keep);
    int next = 0;
    std::vector<HtmlElement> scratch;
    std::vector<const UiNode*> order;
    build(root, keep, next, scratch, &order);
    return order;
}

double token_reduction(const ScreenRepresentation& rep) {
    if (rep.source_token_count() == 0) return 0.0;
    return 1.0 - static_cast<double>(rep.pruned_token_count()) / static_cast<double>(rep.source_token_count());
}

ScreenDelta diff_screens(const ScreenRepresentation& a, const ScreenRepresentation& b) {
    ScreenDelta delta;
    if (a.serialized() == b.serialized()) return delta;
    delta.changed = true;
    auto n = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        int idx = static_cast<int>(i);
        if (!a.contains(idx) || !b.contains(idx)) {
            delta.indexes.insert(idx);
            continue;
        }
        const auto& ea = a.element(idx);
        const auto& eb = b.element(idx);
        if (ea.tag != eb.tag || ea.attributes != eb.attributes || a.parent_of(idx) != b.parent_of(idx)) {
            delta.indexes.insert(idx);
        }
    }
    return delta;
}

ScreenRepresentation parse_screen(std::string_view serialized) {
    ScreenParser parser(serialized);
    auto root = parser.parse();
    ScreenRepresentation rep(std::move(root), 0);
    return ScreenRepresentation(rep.root(), rep.pruned_token_count());
}

std::string serialize_excerpt(const ScreenRepresentation& rep, const std::set<int>& keep) {
    if (!rep.root()) return {};
    std::set<int> visible;
    for (int idx : keep) {
        for (int cur = rep.contains(idx) ? idx : -1; cur >= 0; cur = rep.parent_of(cur)) visible.insert(cur);
    }
    std::string out;
    excerpt_into(*rep.root(), visible, 0, out);
    return out;
}

}  // namespace taskmem::layout
