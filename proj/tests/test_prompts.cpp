#include <gtest/gtest.h>

#include "taskmem/error.hpp"
#include "taskmem/prompts.hpp"
#include "taskmem/text.hpp"

using namespace taskmem;
using namespace taskmem::llm;

namespace {

std::set<std::string> variables_of(const PromptTemplate& t) {
    std::set<std::string> out;
    for (const auto* s : {&t.system, &t.user}) {
        for (std::size_t pos = s->find("{{"); pos != std::string::npos; pos = s->find("{{", pos + 2)) {
            out.insert(s->substr(pos + 2, s->find("}}", pos) - pos - 2));
        }
    }
    return out;
}

}  // namespace

TEST(Prompts, RenderTemplate) {
    EXPECT_EQ(render_template("Hi {{name}}, {{name}}!", {{"name", "Bob"}}), "Hi Bob, Bob!");
    // Inserted values are not expanded again.
    EXPECT_EQ(render_template("{{a}}", {{"a", "{{b}}"}, {"b", "x"}}), "{{b}}");
    EXPECT_EQ(render_template("no vars", {}), "no vars");
    EXPECT_EQ(render_template("open {{ only", {}), "open {{ only");
    try {
        render_template("{{missing}}", {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
        EXPECT_NE(e.message().find("missing"), std::string::npos);
    }
}

TEST(Prompts, BuiltinTemplates) {
    const auto& reg = PromptRegistry::builtin();
    EXPECT_EQ(reg.version(), 1);
    const std::map<std::string, Tier> expected = {
        {"normalize", Tier::fast},      {"explore", Tier::reasoning}, {"select", Tier::reasoning},
        {"derive", Tier::reasoning},    {"slot_fill", Tier::fast},    {"read_screen", Tier::fast},
        {"adapt", Tier::reasoning},
    };
    for (const auto& [name, tier] : expected) {
        SCOPED_TRACE(name);
        ASSERT_TRUE(reg.contains(name));
        const auto& t = reg.get(name);
        EXPECT_EQ(t.tier, tier);
        auto vars = variables_of(t);
        EXPECT_FALSE(vars.empty());
        PromptVars bound;
        for (const auto& v : vars) bound[v] = "<" + v + ">";
        auto req = reg.render(name, bound);
        EXPECT_EQ(req.phase, name);
        EXPECT_EQ(req.tier, tier);
        ASSERT_EQ(req.messages.size(), 2u);
        EXPECT_EQ(req.messages[0].role, "system");
        EXPECT_EQ(req.messages[1].role, "user");
        EXPECT_EQ(req.messages[1].content.find("{{"), std::string::npos);
        EXPECT_EQ(req.messages[1].content.rfind("Phase: " + name, 0), 0u);

        auto missing = bound;
        missing.erase(missing.begin());
        EXPECT_THROW(reg.render(name, missing), Error);
    }
    EXPECT_FALSE(reg.contains("nope"));
    EXPECT_THROW(reg.get("nope"), Error);
}

TEST(Prompts, RegistryFromJson) {
    auto reg = PromptRegistry::from_json(Json::parse(
        R"({"version":3,"templates":{"t":{"tier":"fast","system":"S {{x}}","user":"U {{x}}"}}})"));
    EXPECT_EQ(reg.version(), 3);
    auto req = reg.render("t", {{"x", "1"}});
    EXPECT_EQ(req.prompt_text(), "S 1\n\nU 1");
    EXPECT_THROW(PromptRegistry::from_json(Json::parse(R"({"version":1,"templates":{"t":{"tier":"slow"}}})")), Error);
    EXPECT_THROW(PromptRegistry::from_json(Json::parse(R"({"templates":{}})")), Error);
}
