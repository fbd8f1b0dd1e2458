#include "taskmem/prompts.hpp"

#include "taskmem/error.hpp"
#include "taskmem_prompts_data.hpp"

namespace taskmem::llm {

std::string render_template(std::string_view tmpl, const PromptVars& vars) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        out.append(tmpl.substr(pos, open - pos));
        std::string name(tmpl.substr(open + 2, close - open - 2));
        auto it = vars.find(name);
        if (it == vars.end()) throw Error(ErrorKind::ConfigError, "prompt variable '" + name + "' is not bound");
        out += it->second;
        pos = close + 2;
    }
    out.append(tmpl.substr(pos));
    return out;
}

PromptRegistry PromptRegistry::from_json(const Json& j) {
    PromptRegistry r;
    try {
        r.version_ = j.at("version").get<int>();
        for (auto it = j.at("templates").begin(); it != j.at("templates").end(); ++it) {
            PromptTemplate t;
            auto tier = tier_from_string(it->at("tier").get<std::string>());
            if (!tier) throw Error(ErrorKind::ConfigError, "unknown tier in prompt '" + it.key() + "'");
            t.tier = *tier;
            t.system = it->at("system").get<std::string>();
            t.user = it->at("user").get<std::string>();
            r.templates_.emplace(it.key(), std::move(t));
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("prompt registry: ") + e.what());
    }
    return r;
}

const PromptRegistry& PromptRegistry::builtin() {
    static const PromptRegistry registry = from_json(Json::parse(kBuiltinPrompts));
    return registry;
}

const PromptTemplate& PromptRegistry::get(std::string_view name) const {
    auto it = templates_.find(std::string(name));
    if (it == templates_.end()) throw Error(ErrorKind::ConfigError, "no prompt template '" + std::string(name) + "'");
    return it->second;
}

LlmRequest PromptRegistry::render(std::string_view name, const PromptVars& vars) const {
    const auto& t = get(name);
    LlmRequest req;
    req.tier = t.tier;
    req.phase = std::string(name);
    req.messages.push_back({"system", render_template(t.system, vars)});
    req.messages.push_back({"user", render_template(t.user, vars)});
    return req;
}

}  // namespace taskmem::llm
