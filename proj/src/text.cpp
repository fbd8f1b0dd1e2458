#include "taskmem/text.hpp"

#include <cctype>

namespace taskmem::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_'; }

bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

bool is_ident(std::string_view s) {
    if (s.empty() || !is_ident_start(s.front())) return false;
    for (char c : s) {
        if (!is_ident_char(c)) return false;
    }
    return true;
}

}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string normalize_phrase(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

std::size_t count_tokens(std::string_view s) {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : s) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++n;
        }
    }
    return n;
}

bool is_placeholder(std::string_view s) { return placeholder_name(s).has_value(); }

std::optional<std::string> placeholder_name(std::string_view s) {
    if (s.size() < 3 || s.front() != '[' || s.back() != ']') return std::nullopt;
    auto inner = s.substr(1, s.size() - 2);
    if (!is_ident(inner)) return std::nullopt;
    return std::string(inner);
}

std::string make_placeholder(std::string_view name) { return "[" + std::string(name) + "]"; }

std::vector<std::string> placeholders_in(std::string_view tmpl) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = tmpl.find('[', pos)) != std::string_view::npos) {
        auto close = tmpl.find(']', pos + 1);
        if (close == std::string_view::npos) break;
        auto inner = tmpl.substr(pos + 1, close - pos - 1);
        if (is_ident(inner)) {
            out.emplace_back(inner);
            pos = close + 1;
        } else {
            pos += 1;
        }
    }
    return out;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace taskmem::text
