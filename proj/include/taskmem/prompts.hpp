#pragma once

#include <map>
#include <string>
#include <string_view>

#include "taskmem/llm.hpp"

namespace taskmem::llm {

using PromptVars = std::map<std::string, std::string>;

// Replaces every "{{name}}" with vars[name]. Inserted values are not scanned
// again. Throws ConfigError for a name missing from vars.
std::string render_template(std::string_view tmpl, const PromptVars& vars);

struct PromptTemplate {
    Tier tier = Tier::reasoning;
    std::string system;
    std::string user;
};

// Named, versioned prompt templates.
class PromptRegistry {
public:
    static PromptRegistry from_json(const Json& j);
    // The registry compiled into the binary from data/prompts.json.
    static const PromptRegistry& builtin();

    int version() const { return version_; }
    bool contains(std::string_view name) const { return templates_.contains(std::string(name)); }
    const PromptTemplate& get(std::string_view name) const;

    // Request with a system and a user message; phase = template name.
    LlmRequest render(std::string_view name, const PromptVars& vars) const;

private:
    int version_ = 0;
    std::map<std::string, PromptTemplate> templates_;
};

}  // namespace taskmem::llm
