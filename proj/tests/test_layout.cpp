#include <gtest/gtest.h>

#include <random>

#include "taskmem/error.hpp"
#include "taskmem/layout.hpp"
#include "taskmem/text.hpp"
#include "test_support.hpp"

using namespace taskmem;
using namespace taskmem::layout;
using taskmem::testing::load_screen;
using taskmem::testing::layout_path;
using taskmem::testing::read_json;

namespace {

struct FixtureCounts {
    const char* name;
    std::size_t nodes;
    std::size_t elements;
    std::size_t source_tokens;
    std::size_t pruned_tokens;
};

// Produced by tools/oracles/layout_oracle.py.
const FixtureCounts kFixtures[] = {
    {"calendar_day", 23, 19, 243, 73},      {"contact_list", 11, 9, 113, 35},
    {"email_compose", 17, 14, 176, 52},     {"email_inbox", 35, 31, 379, 130},
    {"food_cart", 17, 17, 180, 66},         {"food_menu", 29, 25, 307, 100},
    {"maps_search", 14, 11, 148, 48},       {"music_player", 12, 12, 127, 52},
    {"telegram_chat", 28, 24, 298, 101},    {"telegram_home", 41, 28, 429, 105},
    {"telegram_menu", 14, 12, 150, 53},     {"telegram_search", 16, 13, 169, 54},
    {"telegram_settings", 21, 20, 225, 81}, {"tiny_blank", 1, 0, 10, 0},
};

UiNode random_tree(std::mt19937& rng, int depth) {
    static const char* kClasses[] = {"android.widget.TextView", "android.widget.Button", "android.widget.FrameLayout",
                                     "android.widget.EditText", "View", ""};
    static const char* kValues[] = {"", "", "Search", "Bob & Alice", "say \"hi\"", "a<b>c", "two\nlines",
                                    "  padded  ", "tab\there", "x=y", "/>"};
    auto pick = [&](auto& arr) { return arr[rng() % std::size(arr)]; };
    UiNode n;
    n.class_name = pick(kClasses);
    n.resource_id = rng() % 3 == 0 ? std::string("id_") + std::to_string(rng() % 50) : "";
    n.text = pick(kValues);
    n.description = pick(kValues);
    n.clickable = rng() % 4 == 0;
    n.editable = rng() % 10 == 0;
    n.scrollable = rng() % 10 == 0;
    n.long_clickable = rng() % 12 == 0;
    n.checkable = rng() % 12 == 0;
    if (depth < 4) {
        int kids = static_cast<int>(rng() % 4);
        for (int i = 0; i < kids; ++i) n.children.push_back(random_tree(rng, depth + 1));
    }
    return n;
}

}  // namespace

TEST(Layout, HomeScreenIndexes) {
    auto root = parse_layout(read_json(layout_path("telegram_home.json")));
    EXPECT_EQ(root.subtree_size(), 41u);
    auto rep = to_screen_representation(root);
    ASSERT_TRUE(rep.contains(3));
    const auto& search = rep.element(3);
    EXPECT_EQ(search.tag, Tag::button);
    ASSERT_NE(search.attribute("id"), nullptr);
    EXPECT_EQ(*search.attribute("id"), "search_button");
    EXPECT_EQ(*rep.element(2).attribute("id"), "menu_button");
    EXPECT_NE(rep.serialized().find("<button index=3 id=\"search_button\" description=\"Search\"/>"),
              std::string::npos);
}

TEST(Layout, FixtureCountsMatchOracle) {
    for (const auto& f : kFixtures) {
        SCOPED_TRACE(f.name);
        auto root = parse_layout(read_json(layout_path(std::string(f.name) + ".json")));
        EXPECT_EQ(root.subtree_size(), f.nodes);
        auto rep = to_screen_representation(root);
        EXPECT_EQ(rep.size(), f.elements);
        EXPECT_EQ(rep.source_token_count(), f.source_tokens);
        EXPECT_EQ(rep.pruned_token_count(), f.pruned_tokens);
        EXPECT_EQ(text::count_tokens(raw_dump(root)), f.source_tokens);
        EXPECT_EQ(indexed_nodes(root).size(), f.elements);
    }
}

TEST(Layout, TokenReductionArithmetic) {
    HtmlElement el;
    el.tag = Tag::button;
    ScreenRepresentation rep(el, 100);
    // "<button index=0/>" splits into two whitespace tokens.
    EXPECT_EQ(rep.pruned_token_count(), 2u);
    EXPECT_DOUBLE_EQ(token_reduction(rep), 0.98);
    el.attributes = {{"text", "a b c d e f g h i j k l m n o p q r"}};
    ScreenRepresentation rep20(el, 100);
    EXPECT_EQ(rep20.pruned_token_count(), 20u);
    EXPECT_DOUBLE_EQ(token_reduction(rep20), 0.8);
    EXPECT_DOUBLE_EQ(token_reduction(ScreenRepresentation(std::nullopt, 0)), 0.0);
}

TEST(Layout, EmptyScreen) {
    auto rep = load_screen("tiny_blank.json");
    EXPECT_TRUE(rep.empty());
    EXPECT_EQ(rep.serialized(), "");
    EXPECT_FALSE(rep.contains(0));
}

TEST(Layout, PruningKeepsInteractiveAndLabelled) {
    auto root = parse_layout_text(R"({"class":"FrameLayout","children":[
        {"class":"LinearLayout","children":[{"class":"View"}]},
        {"class":"LinearLayout","children":[{"class":"TextView","text":"  Hello  "}]},
        {"class":"android.widget.ImageButton","clickable":true},
        {"class":"EditText","editable":true,"clickable":true,"id":"field"}]})");
    auto rep = to_screen_representation(root);
    ASSERT_EQ(rep.size(), 5u);
    EXPECT_EQ(rep.serialized(),
              "<layout index=0 class=\"FrameLayout\">\n"
              "  <layout index=1 class=\"LinearLayout\">\n"
              "    <text index=2 text=\"Hello\"/>\n"
              "  </layout>\n"
              "  <button index=3 class=\"ImageButton\"/>\n"
              "  <input index=4 id=\"field\"/>\n"
              "</layout>\n");
    EXPECT_EQ(rep.parent_of(2), 1);
    EXPECT_EQ(rep.depth_of(2), 2);
    EXPECT_EQ(rep.parent_of(0), -1);
}

TEST(Layout, GraphDocumentsAndCycles) {
    auto root = parse_layout_text(R"({"nodes":{"b":{"class":"Button","text":"Go","clickable":true}},
        "root":{"class":"Frame","children":["b","b"]}})");
    EXPECT_EQ(root.subtree_size(), 3u);
    try {
        parse_layout_text(R"({"nodes":{"a":{"class":"X","children":["b"]},"b":{"class":"Y","children":["a"]}},
            "root":"a"})");
        FAIL() << "expected CyclicLayout";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::CyclicLayout);
    }
}

TEST(Layout, MalformedInputs) {
    const char* bad[] = {
        "not json",
        R"({"text":"no class"})",
        R"({"class":"X","clickable":"yes"})",
        R"({"class":"X","children":{}})",
        R"({"class":"X","children":["ref"]})",
        R"({"nodes":{},"root":"missing"})",
        R"([1,2])",
    };
    for (const char* doc : bad) {
        SCOPED_TRACE(doc);
        try {
            parse_layout_text(doc);
            FAIL() << "expected MalformedLayout";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::MalformedLayout);
        }
    }
}

TEST(Layout, DiffHomeAgainstSearch) {
    auto home = load_screen("telegram_home.json");
    auto search = load_screen("telegram_search.json");
    auto same = diff_screens(home, load_screen("telegram_home.json"));
    EXPECT_FALSE(same.changed);
    EXPECT_TRUE(same.indexes.empty());
    auto d = diff_screens(home, search);
    EXPECT_TRUE(d.changed);
    // Expected indexes from the layout oracle's --diff mode.
    std::set<int> expected = {2, 3, 4};
    for (int i = 6; i <= 27; ++i) expected.insert(i);
    EXPECT_EQ(d.indexes, expected);
    auto d2 = diff_screens(search, load_screen("contact_list.json"));
    std::set<int> expected2;
    for (int i = 3; i <= 12; ++i) expected2.insert(i);
    EXPECT_EQ(d2.indexes, expected2);
}

TEST(Layout, ParseScreenRoundTripsFixtures) {
    for (const auto& f : kFixtures) {
        SCOPED_TRACE(f.name);
        auto rep = load_screen(std::string(f.name) + ".json");
        auto back = parse_screen(rep.serialized());
        EXPECT_EQ(back, rep);
        EXPECT_EQ(back.serialized(), rep.serialized());
        EXPECT_EQ(back.source_token_count(), back.pruned_token_count());
    }
}

TEST(Layout, ParseScreenRejectsGarbage) {
    const char* bad[] = {
        "hello\n",
        "<button index=0/>\n<button index=1/>\n",
        "<layout index=0>\n",
        "<widget index=0/>\n",
        "<button id=\"x\"/>\n",
        "<button index=1/>\n",
        "<button index=0 text=\"a &bogus; b\"/>\n",
        "<layout index=0>\n</button>\n",
    };
    for (const char* s : bad) {
        SCOPED_TRACE(s);
        try {
            parse_screen(s);
            FAIL() << "expected MalformedScreen";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::MalformedScreen);
        }
    }
}

TEST(Layout, RandomTreesRoundTrip) {
    std::mt19937 rng(20240611);
    for (int i = 0; i < 300; ++i) {
        auto root = random_tree(rng, 0);
        auto rep = to_screen_representation(root);
        auto back = parse_screen(rep.serialized());
        ASSERT_EQ(back, rep) << rep.serialized();
        ASSERT_EQ(back.serialized(), rep.serialized());
        ASSERT_EQ(indexed_nodes(root).size(), rep.size());
        for (std::size_t k = 0; k < rep.size(); ++k) {
            int idx = static_cast<int>(k);
            ASSERT_EQ(rep.element(idx).index, idx);
            if (idx > 0) {
                ASSERT_LT(rep.parent_of(idx), idx);
            }
        }
        ASSERT_LE(rep.size(), root.subtree_size());
        ASSERT_FALSE(diff_screens(rep, back).changed);
    }
}

TEST(Layout, CopiedRepresentationKeepsIndex) {
    auto rep = load_screen("telegram_home.json");
    ScreenRepresentation copy = rep;
    ScreenRepresentation moved = std::move(rep);
    EXPECT_EQ(*copy.element(3).attribute("id"), "search_button");
    EXPECT_EQ(*moved.element(3).attribute("id"), "search_button");
    EXPECT_EQ(copy.serialized(), moved.serialized());
}

TEST(Layout, ExcerptKeepsAncestors) {
    auto rep = load_screen("telegram_home.json");
    auto ex = serialize_excerpt(rep, {3});
    EXPECT_NE(ex.find("index=0"), std::string::npos);
    EXPECT_NE(ex.find("index=1"), std::string::npos);
    EXPECT_NE(ex.find("<button index=3 id=\"search_button\" description=\"Search\"/>"), std::string::npos);
    EXPECT_EQ(ex.find("index=2 "), std::string::npos);
    EXPECT_EQ(serialize_excerpt(rep, {}), "");
    EXPECT_EQ(serialize_excerpt(rep, {999}), "");
}
