#include <gtest/gtest.h>

#include <sstream>

#include "taskmem/agent.hpp"
#include "taskmem/error.hpp"
#include "test_support.hpp"

using namespace taskmem;
using namespace taskmem::agent;
using taskmem::testing::make_sim;
using taskmem::testing::mock_path;

namespace {

// A simulator, memory, mock backend and scripted user wired to one agent.
struct Rig {
    explicit Rig(const std::string& app = "telegram", const std::string& rules = "telegram",
                 std::vector<std::string> answers = {})
        : sim(make_sim(app)), mem(app), backend(llm::MockBackend::load(mock_path(rules))), user(std::move(answers)),
          agent(sim, mem, backend, user, &log) {}

    sim::Simulator sim;
    memory::AppMemory mem;
    llm::MockBackend backend;
    ScriptedUser user;
    EventLog log;
    Agent agent;
};

std::vector<Json> actions_with_source(const EventLog& log, const std::string& source) {
    std::vector<Json> out;
    for (const auto& e : log.of_type("action")) {
        if (e.at("source") == source) out.push_back(e);
    }
    return out;
}

}  // namespace

TEST(Agent, TransitionTable) {
    EXPECT_TRUE(transition_allowed(Phase::idle, Phase::explore));
    EXPECT_TRUE(transition_allowed(Phase::idle, Phase::recall));
    EXPECT_TRUE(transition_allowed(Phase::explore, Phase::select));
    EXPECT_TRUE(transition_allowed(Phase::select, Phase::derive));
    EXPECT_TRUE(transition_allowed(Phase::derive, Phase::select));
    EXPECT_TRUE(transition_allowed(Phase::recall, Phase::slot_fill));
    EXPECT_TRUE(transition_allowed(Phase::slot_fill, Phase::recall));
    EXPECT_TRUE(transition_allowed(Phase::repair_paused, Phase::derive));
    EXPECT_TRUE(transition_allowed(Phase::select, Phase::select));
    EXPECT_FALSE(transition_allowed(Phase::idle, Phase::derive));
    EXPECT_FALSE(transition_allowed(Phase::explore, Phase::derive));
    EXPECT_FALSE(transition_allowed(Phase::slot_fill, Phase::select));
    EXPECT_FALSE(transition_allowed(Phase::repair_paused, Phase::done));
    const Phase all[] = {Phase::idle,      Phase::explore,       Phase::select, Phase::derive, Phase::recall,
                         Phase::slot_fill, Phase::repair_paused, Phase::done,   Phase::failed};
    for (Phase p : all) {
        EXPECT_FALSE(transition_allowed(Phase::done, p));
        EXPECT_FALSE(transition_allowed(Phase::failed, p));
        if (p != Phase::done && p != Phase::failed && p != Phase::idle) {
            EXPECT_TRUE(transition_allowed(p, Phase::failed)) << to_string(p);
            EXPECT_TRUE(transition_allowed(p, Phase::repair_paused) || p == Phase::repair_paused) << to_string(p);
        }
    }

    Rig rig;
    rig.agent.transition(Phase::explore);
    EXPECT_EQ(rig.agent.session().phase, Phase::explore);
    try {
        rig.agent.transition(Phase::done);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidPhaseTransition);
        EXPECT_EQ(e.message(), "explore -> done");
    }
}

TEST(Agent, FeedbackStrings) {
    EXPECT_EQ(generate_feedback(InvalidIndexEvent{99}).message, "There is no UI with index 99");
    EXPECT_EQ(generate_feedback(NotActionableEvent{ActionKind::click}).message, "The UI is not clickable.");
    EXPECT_EQ(generate_feedback(NotActionableEvent{ActionKind::input}).message, "The UI is not editable.");
    EXPECT_EQ(generate_feedback(NotActionableEvent{ActionKind::scroll}).message, "The UI is not scrollable.");
    EXPECT_EQ(generate_feedback(NoScreenChangeEvent{}).message, "There is no change in the screen.");
    EXPECT_EQ(generate_feedback(ScreenLoopEvent{3}).message, "You have looped the same screens 3 times.");
    EXPECT_EQ(generate_feedback(ScreenLoopEvent{3}).origin, FeedbackOrigin::loop_detected);
    auto r = repair_feedback("Search for a contact");
    EXPECT_EQ(r.message, "User repaired how to: Search for a contact");
    EXPECT_EQ(r.origin, FeedbackOrigin::user_repair);
}

TEST(Agent, CountersHitRate) {
    Counters c;
    EXPECT_EQ(c.memory_hit_rate(), 0.0);
    c.actions_executed = 4;
    c.memory_hits = 3;
    c.reasoning_queries = 2;
    c.fast_queries = 5;
    c.prompt_tokens = 10;
    c.completion_tokens = 3;
    EXPECT_DOUBLE_EQ(c.memory_hit_rate(), 0.75);
    EXPECT_EQ(c.total_queries(), 7);
    EXPECT_EQ(c.tokens(), 13u);
}

TEST(Agent, ScriptedAndConsoleUsers) {
    ScriptedUser u({"a", "b"}, false);
    EXPECT_EQ(u.ask("q1"), "a");
    EXPECT_EQ(u.ask("q2"), "b");
    EXPECT_EQ(u.ask("q3"), std::nullopt);
    EXPECT_FALSE(u.confirm("sure?"));
    u.tell("done");
    EXPECT_EQ(u.questions().size(), 4u);
    EXPECT_EQ(u.told(), std::vector<std::string>{"done"});

    std::istringstream in("Bob\ny\n");
    std::ostringstream out;
    ConsoleUser c(in, out);
    EXPECT_EQ(c.ask("Who?"), "Bob");
    EXPECT_TRUE(c.confirm("Send?"));
    EXPECT_EQ(c.ask("More?"), std::nullopt);
    EXPECT_NE(out.str().find("Who?"), std::string::npos);
}

TEST(Agent, EventLogWritesJsonLines) {
    std::ostringstream sink;
    EventLog log(&sink);
    log.write({{"event", "a"}, {"x", 1}});
    log.write({{"event", "b"}});
    log.write({{"event", "a"}, {"x", 2}});
    EXPECT_EQ(log.events().size(), 3u);
    EXPECT_EQ(log.of_type("a").size(), 2u);
    std::istringstream lines(sink.str());
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        EXPECT_TRUE(Json::parse(line).contains("event"));
        ++n;
    }
    EXPECT_EQ(n, 3);
}

TEST(Agent, ExplorePhaseOnHome) {
    Rig rig;
    auto subs = rig.agent.explore_phase(rig.agent.capture());
    ASSERT_EQ(subs.size(), 2u);
    EXPECT_EQ(subs[0].name, "Search");
    EXPECT_EQ(subs[0].parameters, (memory::ParamList{{"query", "who are you looking for?"}}));
    ASSERT_EQ(subs[0].key_ui_refs.size(), 1u);
    EXPECT_EQ(subs[0].key_ui_refs[0].id, "search_button");
    EXPECT_EQ(subs[1].name, "Open_Menu");
    EXPECT_TRUE(subs[1].parameters.empty());
    EXPECT_EQ(rig.agent.session().counters.reasoning_queries, 1);
}

TEST(Agent, ExploreTurnsRowTextIntoParameter) {
    Rig rig;
    rig.sim.capture_layout();
    rig.sim.dispatch(Action::click(3));
    rig.sim.capture_layout();
    rig.sim.dispatch(Action::input(5, "Bob"));
    auto subs = rig.agent.explore_phase(rig.agent.capture());
    ASSERT_EQ(subs[0].name, "Select_Contact");
    EXPECT_EQ(subs[0].key_ui_refs[0].id, "contact");
    EXPECT_EQ(subs[0].key_ui_refs[0].text, "[name]");
}

TEST(Agent, DeriveSearch) {
    Rig rig;
    auto node = rig.agent.classify_or_explore(rig.agent.capture());
    EXPECT_EQ(node, 0);
    rig.agent.session().instruction = "Send a message to Bob saying hello";
    auto search = rig.mem.node(0)->sub_tasks[0];
    auto result = rig.agent.derive_phase(search, {{"query", "Bob"}}, node);
    EXPECT_EQ(result.actions, (std::vector<Action>{Action::click(3), Action::input(5, "Bob")}));
    ASSERT_EQ(result.generalized.size(), 2u);
    EXPECT_EQ(result.generalized[1].text_template, "[query]");
    EXPECT_EQ(result.generalized[1].target->id, "search_field");
    ASSERT_EQ(result.steps.size(), 2u);
    EXPECT_EQ(result.steps[0].action, Action::click(3));
    EXPECT_EQ(rig.sim.page(), "search_results");
    EXPECT_EQ(rig.agent.session().counters.actions_executed, 2);
}

TEST(Agent, ColdThenWarmRun) {
    Rig rig("telegram", "telegram", {"hi"});
    auto cold = rig.agent.run_instruction("Send a message to Bob saying hello");
    ASSERT_EQ(cold.outcome, Outcome::success) << cold.message;
    EXPECT_EQ(rig.sim.state().at("messages").back(), "hello");
    EXPECT_EQ(rig.sim.state().at("chat_with"), "Bob");
    auto snap = rig.mem.snapshot();
    EXPECT_EQ(snap.tasks.size(), 1u);
    EXPECT_GE(snap.edges.size(), 3u);
    auto rec = rig.mem.lookup_task("send message");
    ASSERT_TRUE(rec);
    EXPECT_EQ(rec->steps.back().sub_task_name, "Finish");
    EXPECT_GT(rig.agent.session().counters.reasoning_queries, 0);
    EXPECT_EQ(rig.agent.session().counters.memory_hits, 0);
    EXPECT_TRUE(memory::integrity_problems(snap).empty());

    // Same app, a new device session.
    sim::Simulator fresh = make_sim("telegram");
    EventLog log;
    Agent warm(fresh, rig.mem, rig.backend, rig.user, &log);
    auto out = warm.run_instruction("Send a message to Alice");
    ASSERT_EQ(out.outcome, Outcome::success) << out.message;
    EXPECT_EQ(warm.session().counters.reasoning_queries, 0);
    EXPECT_EQ(fresh.state().at("chat_with"), "Alice");
    EXPECT_EQ(fresh.state().at("messages").back(), "hi");
    EXPECT_DOUBLE_EQ(warm.session().counters.memory_hit_rate(), 1.0);
    auto mem_actions = actions_with_source(log, "memory");
    ASSERT_GE(mem_actions.size(), 3u);
    EXPECT_EQ(mem_actions[2].at("action"), Json::parse(R"({"kind":"click","ui_index":6})"));
    ASSERT_EQ(log.of_type("summary").size(), 1u);
    EXPECT_EQ(log.of_type("summary")[0].at("outcome"), "success");
}

TEST(Agent, MissingValueNeedsUser) {
    Rig rig;
    ASSERT_EQ(rig.agent.run_instruction("Send a message to Bob saying hello").outcome, Outcome::success);
    auto sim = make_sim("telegram");
    ScriptedUser silent;
    Agent warm(sim, rig.mem, rig.backend, silent);
    auto out = warm.run_instruction("Send a message to Bob");
    EXPECT_EQ(out.outcome, Outcome::needs_user);
    EXPECT_NE(out.message.find("message"), std::string::npos);
    EXPECT_EQ(silent.questions().size(), 1u);
    EXPECT_TRUE(sim.critical_log().empty());
}

TEST(Agent, UnknownInstructionFails) {
    Rig rig;
    auto out = rig.agent.run_instruction("Dance the tango");
    EXPECT_EQ(out.outcome, Outcome::failed);
    EXPECT_EQ(out.error, ErrorKind::NoMockRule);
    EXPECT_EQ(rig.log.of_type("summary").size(), 1u);
}

TEST(Agent, FeedbackScenarios) {
    struct Case {
        const char* app;
        const char* instruction;
        const char* feedback;
    };
    const Case cases[] = {
        {"telegram", "Look up Bob", "There is no UI with index 99"},
        {"telegram", "Search the chats for Bob", "The UI is not clickable."},
        {"telegram", "Toggle the search bar", "You have looped the same screens 3 times."},
        {"contacts", "Open the contact Zed", "There is no change in the screen."},
    };
    for (const auto& c : cases) {
        SCOPED_TRACE(c.instruction);
        Rig rig(c.app, "feedback");
        rig.agent.run_instruction(c.instruction);
        bool seen = false;
        for (const auto& f : rig.agent.session().feedback_log) seen = seen || f.message == c.feedback;
        for (const auto& f : rig.agent.session().feedback_queue) seen = seen || f.message == c.feedback;
        EXPECT_TRUE(seen);
    }
}

TEST(Agent, SuiteReusesMemory) {
    const char* tasks[] = {"Send a message to Bob saying hello", "Open the chat with Carol", "Turn on dark mode",
                           "Open saved messages", "Call Alice", "Save a note saying buy milk",
                           "Read the last message from Bob", "Open settings"};
    Rig rig;
    int cold = 0;
    for (const char* t : tasks) {
        auto sim = make_sim("telegram");
        Agent a(sim, rig.mem, rig.backend, rig.user);
        auto out = a.run_instruction(t);
        ASSERT_EQ(out.outcome, Outcome::success) << t << ": " << out.message;
        cold += a.session().counters.total_queries();
    }
    int warm = 0;
    for (const char* t : tasks) {
        auto sim = make_sim("telegram");
        Agent a(sim, rig.mem, rig.backend, rig.user);
        auto out = a.run_instruction(t);
        ASSERT_EQ(out.outcome, Outcome::success) << t << ": " << out.message;
        EXPECT_EQ(a.session().counters.reasoning_queries, 0) << t;
        warm += a.session().counters.total_queries();
    }
    EXPECT_LE(warm * 100, cold * 40);
}
