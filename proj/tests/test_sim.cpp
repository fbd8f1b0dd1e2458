#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "taskmem/error.hpp"
#include "taskmem/sim.hpp"
#include "test_support.hpp"

using namespace taskmem;
using namespace taskmem::sim;
using taskmem::testing::app_path;
using taskmem::testing::make_sim;
using taskmem::testing::read_json;

namespace {

template <typename F>
ErrorKind error_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::MalformedLog;
}

layout::ScreenRepresentation capture(Simulator& sim) {
    return layout::to_screen_representation(layout::parse_layout(sim.capture_layout()));
}

std::vector<std::string> names_of(const std::vector<Json>& items) {
    std::vector<std::string> out;
    for (const auto& i : items) out.push_back(i.at("name").get<std::string>());
    return out;
}

Json minimal_script() {
    return Json::parse(R"({"app_id":"t","initial_page":"a",
        "pages":{"a":{"class":"Frame","children":[{"class":"Button","id":"go","clickable":true}]},
                 "b":{"class":"Frame","children":[{"class":"TextView","text":"B"}]}},
        "rules":[{"page":"a","trigger":{"action":"click","id":"go"},"next_page":"b"}]})");
}

class NoSnapshots final : public DeviceAdapter {
public:
    Json capture_layout() override { return Json::object(); }
    void dispatch(const Action&) override {}
};

}  // namespace

TEST(Sim, TelegramScriptLoads) {
    auto script = load_script(app_path("telegram"));
    EXPECT_EQ(script.app_id, "telegram");
    EXPECT_EQ(script.initial_page, "home");
    EXPECT_EQ(script.pages.size(), 5u);
    for (const char* p : {"home", "search_results", "chat", "menu", "settings"}) EXPECT_TRUE(script.pages.contains(p)) << p;
    EXPECT_EQ(script.rules.size(), 17u);
    EXPECT_EQ(error_of([] { load_script("/nonexistent/app.sim.json"); }), ErrorKind::IoError);
}

TEST(Sim, SearchFlow) {
    auto sim = make_sim("telegram");
    auto home = capture(sim);
    EXPECT_EQ(home.size(), 9u);
    EXPECT_EQ(*home.element(3).attribute("id"), "search_button");
    sim.dispatch(Action::click(3));
    auto open = capture(sim);
    EXPECT_EQ(*open.element(5).attribute("id"), "search_field");
    sim.dispatch(Action::input(5, "Bob"));
    EXPECT_EQ(sim.page(), "search_results");
    EXPECT_EQ(sim.state().at("query"), "Bob");
    auto results = capture(sim);
    EXPECT_EQ(*results.element(3).attribute("text"), "Bob");
    EXPECT_EQ(*results.element(6).attribute("text"), "Alice");
    sim.dispatch(Action::click(6));
    EXPECT_EQ(sim.page(), "chat");
    EXPECT_EQ(sim.state().at("chat_with"), "Alice");
    auto chat = capture(sim);
    EXPECT_EQ(*chat.element(3).attribute("text"), "Alice");
    EXPECT_EQ(sim.dispatch_count(), 3u);
}

TEST(Sim, DispatchChecks) {
    auto sim = make_sim("telegram");
    // The launch screen counts as captured.
    try {
        sim.dispatch(Action::click(99));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidIndex);
        EXPECT_EQ(e.message(), "There is no UI with index 99");
    }
    EXPECT_EQ(error_of([&] { sim.dispatch(Action::click(4)); }), ErrorKind::NotActionable);
    EXPECT_EQ(error_of([&] { sim.dispatch(Action::input(3, "x")); }), ErrorKind::NotActionable);
    EXPECT_EQ(error_of([&] { sim.dispatch(Action::scroll(Direction::down, 3)); }), ErrorKind::NotActionable);
    EXPECT_EQ(sim.dispatch_count(), 0u);
    sim.dispatch(Action::click(3));
    // The screen changed; a second action needs a fresh capture.
    EXPECT_EQ(error_of([&] { sim.dispatch(Action::click(3)); }), ErrorKind::StaleScreen);
    // Non-device actions never touch the screen.
    sim.dispatch(Action::finish());
}

TEST(Sim, ScrollWindow) {
    auto sim = make_sim("telegram");
    capture(sim);
    sim.dispatch(Action::click(3));
    capture(sim);
    sim.dispatch(Action::input(5, "a"));
    capture(sim);
    using V = std::vector<std::string>;
    EXPECT_EQ(names_of(sim.list_window("search_results")), (V{"Bob", "Alice", "Carol", "Dave"}));
    sim.dispatch(Action::scroll(Direction::down));
    capture(sim);
    EXPECT_EQ(names_of(sim.list_window("search_results")), (V{"Dave", "Erin", "Frank", "Zane"}));
    sim.dispatch(Action::scroll(Direction::down, 4));
    capture(sim);
    EXPECT_EQ(names_of(sim.list_window("search_results")), (V{"Dave", "Erin", "Frank", "Zane"}));
    sim.dispatch(Action::scroll(Direction::up));
    capture(sim);
    EXPECT_EQ(names_of(sim.list_window("search_results")), (V{"Bob", "Alice", "Carol", "Dave"}));
    EXPECT_EQ(error_of([&] { sim.list_window("chat_list"); }), ErrorKind::UnknownList);
}

TEST(Sim, ContactsWindowStride) {
    auto sim = make_sim("contacts");
    using V = std::vector<std::string>;
    capture(sim);
    EXPECT_EQ(names_of(sim.list_window("contact_list")), (V{"Ann", "Bea", "Cal", "Dee"}));
    sim.dispatch(Action::scroll(Direction::down));
    capture(sim);
    EXPECT_EQ(names_of(sim.list_window("contact_list")), (V{"Dee", "Eve", "Fay", "Gus"}));
    sim.dispatch(Action::scroll(Direction::down));
    capture(sim);
    EXPECT_EQ(names_of(sim.list_window("contact_list")), (V{"Gus", "Hal", "Ivy", "Jon"}));
    sim.dispatch(Action::scroll(Direction::down));
    capture(sim);
    EXPECT_EQ(names_of(sim.list_window("contact_list")), (V{"Jon", "Kim", "Lou", "Max"}));
}

TEST(Sim, SnapshotsRestoreState) {
    auto sim = make_sim("telegram");
    auto before = sim.capture_layout();
    auto snap = sim.save_snapshot();
    sim.dispatch(Action::click(3));
    capture(sim);
    sim.dispatch(Action::input(5, "Bob"));
    EXPECT_EQ(sim.page(), "search_results");
    sim.restore_snapshot(snap);
    EXPECT_EQ(sim.page(), "home");
    EXPECT_EQ(sim.capture_layout(), before);
    // A restore counts as a capture.
    sim.restore_snapshot(snap);
    sim.dispatch(Action::click(3));
    EXPECT_EQ(error_of([&] { sim.restore_snapshot(7); }), ErrorKind::InvalidTarget);

    NoSnapshots plain;
    EXPECT_FALSE(plain.supports_snapshots());
    EXPECT_EQ(error_of([&] { plain.save_snapshot(); }), ErrorKind::CapabilityUnsupported);
    EXPECT_EQ(error_of([&] { plain.restore_snapshot(0); }), ErrorKind::CapabilityUnsupported);
    EXPECT_EQ(plain.irreversible_count(), 0u);
}

TEST(Sim, CriticalLog) {
    auto sim = make_sim("telegram");
    capture(sim);
    sim.dispatch(Action::click(6));  // Bob's chat
    auto chat = capture(sim);
    EXPECT_EQ(*chat.element(9).attribute("id"), "message_input");
    sim.dispatch(Action::input(9, "hello"));
    capture(sim);
    sim.dispatch(Action::click(10));
    capture(sim);
    ASSERT_EQ(sim.critical_log().size(), 1u);
    EXPECT_FALSE(sim.critical_log()[0].confirmed);
    EXPECT_EQ(sim.critical_log()[0].page, "chat");
    EXPECT_EQ(sim.state().at("messages").back(), "hello");
    EXPECT_FALSE(sim.state().contains("input.message_input"));

    sim.dispatch({ActionKind::get_user_confirm, std::nullopt, std::string("Call Bob?"), std::nullopt});
    sim.dispatch(Action::click(4));
    ASSERT_EQ(sim.critical_log().size(), 2u);
    EXPECT_TRUE(sim.critical_log()[1].confirmed);
    EXPECT_EQ(sim.irreversible_count(), 2u);
    auto calling = capture(sim);
    EXPECT_EQ(*calling.element(5).attribute("text"), "Calling Bob");
}

TEST(Sim, ScriptValidation) {
    EXPECT_NO_THROW(parse_script(minimal_script()));
    auto j = minimal_script();
    j["rules"][0]["next_page"] = "zzz";
    EXPECT_EQ(error_of([&] { parse_script(j); }), ErrorKind::DanglingRule);
    j = minimal_script();
    j["rules"][0]["page"] = "zzz";
    EXPECT_EQ(error_of([&] { parse_script(j); }), ErrorKind::DanglingRule);
    j = minimal_script();
    j["rules"][0]["trigger"]["id"] = "absent";
    EXPECT_EQ(error_of([&] { parse_script(j); }), ErrorKind::DanglingRule);
    j = minimal_script();
    j["initial_page"] = "zzz";
    EXPECT_EQ(error_of([&] { parse_script(j); }), ErrorKind::DanglingRule);
    j = minimal_script();
    j["rules"][0]["trigger"]["action"] = "finish";
    EXPECT_EQ(error_of([&] { parse_script(j); }), ErrorKind::SchemaError);
    j = minimal_script();
    j["window_size"] = 1;
    EXPECT_EQ(error_of([&] { parse_script(j); }), ErrorKind::SchemaError);
    j = minimal_script();
    j.erase("pages");
    EXPECT_EQ(error_of([&] { parse_script(j); }), ErrorKind::SchemaError);
    EXPECT_EQ(error_of([&] { parse_script(Json::array()); }), ErrorKind::SchemaError);
}

TEST(Sim, RandomWalkStaysConsistent) {
    for (const char* app : {"telegram", "contacts", "telegram_v2"}) {
        std::mt19937 rng(static_cast<unsigned>(std::strlen(app)));
        auto sim = make_sim(app);
        for (int step = 0; step < 300; ++step) {
            auto rep = capture(sim);
            ASSERT_FALSE(rep.empty());
            ASSERT_EQ(layout::parse_screen(rep.serialized()), rep);
            int idx = static_cast<int>(rng() % (rep.size() + 2));
            Action a;
            switch (rng() % 4) {
                case 0: a = Action::input(idx, "x"); break;
                case 1: a = Action::scroll(rng() % 2 ? Direction::up : Direction::down); break;
                default: a = Action::click(idx);
            }
            try {
                sim.dispatch(a);
            } catch (const Error& e) {
                ASSERT_TRUE(e.kind() == ErrorKind::InvalidIndex || e.kind() == ErrorKind::NotActionable)
                    << app << ": " << e.what();
            }
            ASSERT_TRUE(sim.script().pages.contains(sim.page()));
        }
    }
}
