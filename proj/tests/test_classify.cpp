#include <gtest/gtest.h>

#include <cmath>

#include "taskmem/classify.hpp"
#include "taskmem/embed.hpp"
#include "test_support.hpp"

using namespace taskmem;
using namespace taskmem::classify;
using taskmem::testing::load_screen;

namespace {

UiSignature sig(std::optional<std::string> id, std::optional<std::string> txt = std::nullopt,
                std::optional<std::string> desc = std::nullopt) {
    UiSignature s;
    s.id = std::move(id);
    s.text = std::move(txt);
    s.description = std::move(desc);
    return s;
}

memory::AppMemory home_and_chat() {
    memory::AppMemory mem("telegram");
    mem.add_node({{"Search", "Search chats", {{"query", "q"}}, {sig("search_button", std::nullopt, "Search")}},
                  {"Open_Menu", "Open the menu", {}, {sig("menu_button")}}},
                 {});
    mem.add_node({{"Send", "Send a message", {{"message", "m"}}, {sig("message_input"), sig("send_button")}}}, {});
    return mem;
}

}  // namespace

TEST(Classify, SignatureMatching) {
    auto rep = load_screen("telegram_home.json");
    EXPECT_EQ(match_signature(sig("search_button"), rep), 3);
    EXPECT_EQ(match_signature(sig(std::nullopt, std::nullopt, "Search"), rep), 3);
    EXPECT_EQ(match_signature(sig("search_button", std::nullopt, "Find"), rep), std::nullopt);
    EXPECT_EQ(match_signature(UiSignature{}, rep), std::nullopt);
    // A placeholder accepts any non-empty value of that attribute.
    EXPECT_EQ(match_signature(sig("search_button", std::nullopt, "[anything]"), rep), 3);
    EXPECT_EQ(match_signature(sig("search_button", "[x]"), rep), std::nullopt);
    EXPECT_EQ(match_signature(sig("  menu_button "), rep), 2);
}

TEST(Classify, MatchingElementsAreAscending) {
    auto rep = load_screen("contact_list.json");
    auto all = matching_elements(sig("contact", "[name]"), rep);
    ASSERT_GE(all.size(), 2u);
    EXPECT_EQ(all[0], 5);
    EXPECT_EQ(all[1], 6);
    EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
    EXPECT_EQ(matching_elements(sig("contact", "Alice"), rep), std::vector<int>{6});
}

TEST(Classify, HomeScreenClassifiesToNodeZero) {
    auto mem = home_and_chat();
    std::vector<NodeTrace> trace;
    auto r = classify::classify(mem.snapshot(), load_screen("telegram_home.json"), &trace);
    ASSERT_TRUE(r.matched());
    EXPECT_EQ(*r.node, 0);
    EXPECT_EQ(r.bindings.at({"Search", 0}), 3);
    EXPECT_EQ(r.bindings.at({"Open_Menu", 0}), 2);
    ASSERT_EQ(trace.size(), 2u);
    EXPECT_TRUE(trace[0].matched);
    EXPECT_FALSE(trace[1].matched);
    EXPECT_NE(trace[1].detail.find("Send"), std::string::npos);

    auto chat = classify::classify(mem, load_screen("telegram_chat.json"));
    ASSERT_TRUE(chat.matched());
    EXPECT_EQ(*chat.node, 1);
    EXPECT_FALSE(classify::classify(mem, load_screen("telegram_settings.json")).matched());
    EXPECT_FALSE(classify::classify(mem, load_screen("tiny_blank.json")).matched());
}

TEST(Classify, AllKeyUiOfEverySubTaskMustBind) {
    memory::AppMemory mem("telegram");
    mem.add_node({{"Search", "s", {}, {sig("search_button")}}, {"Settings", "x", {}, {sig("settings_item")}}}, {});
    EXPECT_FALSE(classify::classify(mem, load_screen("telegram_home.json")).matched());
}

TEST(Classify, SignaturesBindToDistinctElements) {
    memory::AppMemory mem("telegram");
    // Two references to the same single element cannot both bind.
    mem.add_node({{"Twice", "t", {}, {sig("search_button"), sig(std::nullopt, std::nullopt, "Search")}}}, {});
    EXPECT_FALSE(classify::classify(mem, load_screen("telegram_home.json")).matched());
}

TEST(Classify, MostSpecificNodeWins) {
    memory::AppMemory mem("telegram");
    mem.add_node({{"Search", "s", {}, {sig("search_button")}}}, {});
    mem.add_node({{"Search", "s", {}, {sig("search_button")}}, {"Open_Menu", "m", {}, {sig("menu_button")}}}, {});
    auto r = classify::classify(mem, load_screen("telegram_home.json"));
    ASSERT_TRUE(r.matched());
    EXPECT_EQ(*r.node, 1);
}

TEST(Classify, EmbedderAndSimilarity) {
    HashingEmbedder e;
    auto v = e.embed("Open the Menu, open_menu!");
    double total = 0;
    for (double x : v) total += x;
    EXPECT_EQ(total, 5.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(v, v), 1.0);
    EXPECT_EQ(cosine_similarity(v, e.embed("")), 0.0);
    EXPECT_THROW(cosine_similarity({1.0}, {1.0, 2.0}), std::invalid_argument);

    // Values from tools/oracles/embed_oracle.py.
    const auto& def = default_embedder();
    EXPECT_NEAR(cosine_similarity(def.embed("order pizza"),
                                  def.embed("Food delivery: order pizza, burgers and meals from nearby restaurants "
                                            "to your address")),
                0.36514837167, 1e-9);
    EXPECT_NEAR(cosine_similarity(def.embed("call a phone number"),
                                  def.embed("Address book: browse people, open a contact, call or text a phone number")),
                0.645497224368, 1e-9);
}

TEST(Classify, DedupCandidate) {
    auto mem = home_and_chat().snapshot();
    std::vector<memory::SubTask> same = mem.nodes.at(0).sub_tasks;
    same.push_back(memory::global_sub_tasks()[0]);
    EXPECT_NEAR(sub_task_similarity(same, mem.nodes.at(0).sub_tasks), 1.0, 1e-12);
    EXPECT_EQ(dedup_candidate(mem, same), 0);
    std::vector<memory::SubTask> other = {{"Toggle_Dark_Mode", "Switch dark theme", {}, {sig("dark")}}};
    EXPECT_EQ(dedup_candidate(mem, other), std::nullopt);
    EXPECT_EQ(dedup_candidate(mem, other, default_embedder(), 0.0), 0);
    EXPECT_EQ(sub_task_document(mem.nodes.at(0).sub_tasks), "Search: Search chats\nOpen_Menu: Open the menu\n");
}
