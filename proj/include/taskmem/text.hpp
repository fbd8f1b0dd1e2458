#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared across modules.
namespace taskmem::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Lowercase, trim, and collapse internal whitespace runs to one space.
std::string normalize_phrase(std::string_view s);

bool iequals(std::string_view a, std::string_view b);

std::size_t count_tokens(std::string_view s);

// A placeholder is the whole string "[name]" with name = [A-Za-z_][A-Za-z0-9_]*.
bool is_placeholder(std::string_view s);
std::optional<std::string> placeholder_name(std::string_view s);
std::string make_placeholder(std::string_view name);

// Every "[name]" occurrence inside a template, in order of appearance.
std::vector<std::string> placeholders_in(std::string_view tmpl);

// 64-bit FNV-1a; stable across platforms, used for feature hashing.
std::uint64_t fnv1a(std::string_view s);

// Lowercased alphanumeric words; underscores and punctuation split words.
std::vector<std::string> words(std::string_view s);

}  // namespace taskmem::text
