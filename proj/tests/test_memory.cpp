#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <thread>

#include "taskmem/error.hpp"
#include "taskmem/memory.hpp"
#include "test_support.hpp"

using namespace taskmem;
using namespace taskmem::memory;
using taskmem::testing::load_screen;
using taskmem::testing::TempDir;

namespace {

UiSignature sig_id(const std::string& id) {
    UiSignature s;
    s.id = id;
    return s;
}

SubTask search_sub_task() {
    return {"Search", "Search for a contact or chat by name", {{"query", "what to search for"}}, {sig_id("search_button")}};
}

SubTask menu_sub_task() { return {"Open_Menu", "Open the side menu", {}, {sig_id("menu_button")}}; }

GeneralizedAction click_on(const std::string& id) {
    GeneralizedAction a;
    a.kind = ActionKind::click;
    a.target = sig_id(id);
    return a;
}

GeneralizedAction input_into(const std::string& id, const std::string& tmpl) {
    GeneralizedAction a;
    a.kind = ActionKind::input;
    a.target = sig_id(id);
    a.text_template = tmpl;
    return a;
}

EdgeWrite write_of(std::vector<GeneralizedAction> actions, Provenance p = Provenance::llm_derived,
                   bool overwrite = false) {
    EdgeWrite w;
    w.actions = std::move(actions);
    w.provenance = p;
    w.overwrite = overwrite;
    return w;
}

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

// Home node with Search and Open_Menu, a results node, and one task.
AppMemory sample_memory() {
    AppMemory mem("telegram");
    auto home = mem.add_node({search_sub_task(), menu_sub_task()}, load_screen("telegram_home.json"));
    auto results = mem.add_node({{"Select_Contact", "Open a contact", {{"name", "contact"}}, {sig_id("contact")}}},
                                load_screen("telegram_search.json"));
    mem.record_edge(home, "Search", write_of({click_on("search_button"), input_into("search_field", "[query]")}));
    mem.set_edge_target(home, "Search", results);
    mem.record_edge(results, "Select_Contact", write_of({click_on("contact")}));
    mem.record_task("Find Contact", {{"query", "name"}},
                    {{home, "Search", {"query"}}, {results, "Select_Contact", {"name"}}, {results, "Finish", {}}});
    return mem;
}

}  // namespace

TEST(Memory, NodesAndEdges) {
    auto mem = sample_memory();
    EXPECT_EQ(mem.node_count(), 2u);
    EXPECT_EQ(mem.edge_count(), 2u);
    auto home = mem.node(0);
    ASSERT_TRUE(home);
    ASSERT_EQ(home->sub_tasks.size(), 2u);
    EXPECT_EQ(home->sub_tasks[0].name, "Search");
    EXPECT_EQ(home->sub_tasks[1].name, "Open_Menu");
    EXPECT_EQ(home->example_screens.size(), 1u);
    auto edge = mem.find_edge(0, "Search");
    ASSERT_TRUE(edge);
    EXPECT_EQ(edge->to_node, 1);
    EXPECT_EQ(edge->actions.size(), 2u);
    EXPECT_EQ(edge->provenance, Provenance::llm_derived);
    EXPECT_FALSE(mem.find_edge(0, "Open_Menu"));
    EXPECT_FALSE(mem.node(7));
}

TEST(Memory, TaskLookupNormalizesName) {
    auto mem = sample_memory();
    auto t = mem.lookup_task("  find   CONTACT ");
    ASSERT_TRUE(t);
    EXPECT_EQ(t->task_name, "find contact");
    EXPECT_EQ(t->steps.size(), 3u);
    EXPECT_FALSE(mem.lookup_task("other"));
}

TEST(Memory, OverwriteRules) {
    auto mem = sample_memory();
    EXPECT_EQ(error_of([&] { mem.record_edge(0, "Search", write_of({click_on("x")})); }), ErrorKind::OverwriteDenied);
    mem.record_edge(0, "Search", write_of({click_on("search_button")}, Provenance::llm_derived, true));
    EXPECT_EQ(mem.find_edge(0, "Search")->actions.size(), 1u);

    mem.record_edge(0, "Search", write_of({click_on("search_button"), input_into("search_field", "[query]")},
                                          Provenance::user_repaired));
    EXPECT_EQ(mem.find_edge(0, "Search")->provenance, Provenance::user_repaired);
    EXPECT_EQ(error_of([&] {
                  mem.record_edge(0, "Search", write_of({click_on("x")}, Provenance::llm_derived, true));
              }),
              ErrorKind::RepairOverwriteDenied);
    // A repair may replace a repair.
    mem.record_edge(0, "Search", write_of({click_on("search_button")}, Provenance::user_repaired));
    EXPECT_EQ(mem.find_edge(0, "Search")->actions.size(), 1u);
}

TEST(Memory, RejectsBadWrites) {
    auto mem = sample_memory();
    EXPECT_EQ(error_of([&] { mem.record_edge(9, "Search", write_of({click_on("a")})); }), ErrorKind::UnknownNode);
    EXPECT_EQ(error_of([&] { mem.record_edge(0, "Nope", write_of({click_on("a")})); }), ErrorKind::UnknownSubTask);
    EXPECT_EQ(error_of([&] { mem.record_edge(0, "Open_Menu", write_of({})); }), ErrorKind::IntegrityViolation);
    EXPECT_EQ(error_of([&] { mem.record_edge(0, "Open_Menu", write_of({input_into("f", "[who]")})); }),
              ErrorKind::IntegrityViolation);
    EXPECT_FALSE(mem.find_edge(0, "Open_Menu"));
    EXPECT_EQ(error_of([&] { mem.add_sub_task(0, search_sub_task()); }), ErrorKind::DuplicateSubTaskName);
    EXPECT_EQ(error_of([&] { mem.add_node({menu_sub_task(), menu_sub_task()}, {}); }), ErrorKind::DuplicateSubTaskName);
    EXPECT_EQ(error_of([&] { mem.add_node({{"NoKey", "x", {}, {}}}, {}); }), ErrorKind::IntegrityViolation);
    EXPECT_EQ(mem.node_count(), 2u);
    EXPECT_EQ(error_of([&] { mem.record_task("t", {}, {{0, "Search", {}}}); }), ErrorKind::DanglingStep);
    EXPECT_EQ(error_of([&] { mem.record_task("t", {}, {{0, "Open_Menu", {}}, {0, "Finish", {}}}); }),
              ErrorKind::DanglingStep);
    EXPECT_EQ(error_of([&] { mem.record_task("  ", {}, {{0, "Finish", {}}}); }), ErrorKind::DanglingStep);
    EXPECT_EQ(error_of([&] { mem.set_edge_target(0, "Search", 42); }), ErrorKind::UnknownNode);
    EXPECT_EQ(error_of([&] { mem.set_edge_target(0, "Open_Menu", 1); }), ErrorKind::UnknownSubTask);
}

TEST(Memory, MergeKeepsExistingSubTasks) {
    auto mem = sample_memory();
    SubTask changed = search_sub_task();
    changed.description = "different";
    mem.merge_sub_tasks(0, {changed, {"Open_Settings", "Open settings", {}, {sig_id("settings")}}});
    auto home = mem.node(0);
    ASSERT_EQ(home->sub_tasks.size(), 3u);
    EXPECT_EQ(home->find("Search")->description, "Search for a contact or chat by name");
    EXPECT_NE(home->find("Open_Settings"), nullptr);
}

TEST(Memory, RemoveSubTaskCascades) {
    auto mem = sample_memory();
    mem.remove_sub_task(1, "Select_Contact");
    EXPECT_FALSE(mem.find_edge(1, "Select_Contact"));
    EXPECT_FALSE(mem.lookup_task("find contact"));
    EXPECT_TRUE(mem.find_edge(0, "Search"));
    EXPECT_TRUE(integrity_problems(mem.snapshot()).empty());
    EXPECT_EQ(error_of([&] { mem.remove_sub_task(1, "Select_Contact"); }), ErrorKind::UnknownSubTask);
}

TEST(Memory, ExampleScreensAreCapped) {
    auto mem = sample_memory();
    for (int i = 0; i < 5; ++i) mem.add_example_screen(0, "<text index=0 text=\"" + std::to_string(i) + "\"/>\n");
    mem.add_example_screen(0, "<text index=0 text=\"4\"/>\n");
    auto home = mem.node(0);
    ASSERT_EQ(home->example_screens.size(), kMaxExampleScreens);
    EXPECT_EQ(home->example_screens.back(), "<text index=0 text=\"4\"/>\n");
    EXPECT_EQ(home->example_screens.front(), "<text index=0 text=\"2\"/>\n");
}

TEST(Memory, SaveLoadRoundTrip) {
    TempDir dir;
    auto mem = sample_memory();
    EdgeWrite w = write_of({click_on("menu_button")}, Provenance::user_repaired);
    w.example = EdgeExample{"open the menu", {{"x", std::nullopt}, {"y", "1"}}, {{"<button index=0/>\n", Action::click(2)}}};
    mem.record_edge(0, "Open_Menu", w);
    auto path = memory_path(dir.path(), "telegram");
    EXPECT_EQ(path.filename(), "telegram.memory.json");
    save(mem, path);
    auto back = load(path);
    EXPECT_EQ(back, mem);
    EXPECT_EQ(back.snapshot(), mem.snapshot());
    // Saving again is byte-stable.
    auto first = taskmem::testing::read_text(path);
    save(back, path);
    EXPECT_EQ(taskmem::testing::read_text(path), first);
}

TEST(Memory, LoadFailures) {
    TempDir dir;
    EXPECT_EQ(error_of([&] { load(dir / "missing.json"); }), ErrorKind::IoError);

    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream(dir / name) << body;
        return dir / name;
    };
    EXPECT_EQ(error_of([&] { load(write("garbage.json", "{not json")); }), ErrorKind::IntegrityViolation);
    EXPECT_EQ(error_of([&] { load(write("noversion.json", "{}")); }), ErrorKind::IntegrityViolation);

    auto j = to_json(sample_memory().snapshot());
    j["version"] = kSchemaVersion + 1;
    EXPECT_EQ(error_of([&] { load(write("future.json", j.dump())); }), ErrorKind::SchemaVersionMismatch);

    j = to_json(sample_memory().snapshot());
    j["edges"][0]["to_node"] = 99;
    EXPECT_EQ(error_of([&] { load(write("dangling.json", j.dump())); }), ErrorKind::IntegrityViolation);

    j = to_json(sample_memory().snapshot());
    j["edges"][0]["provenance"] = "guessed";
    EXPECT_EQ(error_of([&] { load(write("prov.json", j.dump())); }), ErrorKind::IntegrityViolation);

    j = to_json(sample_memory().snapshot());
    j["tasks"][0]["steps"].erase(2);
    EXPECT_EQ(error_of([&] { load(write("nofinish.json", j.dump())); }), ErrorKind::IntegrityViolation);

    j = to_json(sample_memory().snapshot());
    j["nodes"].push_back(j["nodes"][0]);
    EXPECT_EQ(error_of([&] { load(write("dupnode.json", j.dump())); }), ErrorKind::IntegrityViolation);
}

TEST(Memory, ConcurrentReadersSeeConsistentState) {
    auto mem = sample_memory();
    std::atomic<bool> stop{false};
    std::atomic<int> bad{0};
    std::thread reader([&] {
        while (!stop) {
            if (!integrity_problems(mem.snapshot()).empty()) ++bad;
        }
    });
    for (int i = 0; i < 200; ++i) {
        mem.record_edge(0, "Open_Menu", write_of({click_on("menu_button")}, Provenance::llm_derived, true));
        mem.add_example_screen(1, "<text index=0 text=\"" + std::to_string(i) + "\"/>\n");
    }
    stop = true;
    reader.join();
    EXPECT_EQ(bad.load(), 0);
}

TEST(Memory, RandomOperationsKeepIntegrity) {
    std::mt19937 rng(7);
    const std::vector<std::string> names = {"A", "B", "C", "D", "E"};
    for (int round = 0; round < 40; ++round) {
        AppMemory mem("app");
        for (int op = 0; op < 60; ++op) {
            int nodes = static_cast<int>(mem.node_count());
            NodeId n = nodes == 0 ? 0 : static_cast<NodeId>(rng() % static_cast<unsigned>(nodes + 1));
            const auto& name = names[rng() % names.size()];
            try {
                switch (rng() % 6) {
                    case 0:
                        mem.add_node({{name, "d", {{"p", "param"}}, {sig_id(name)}}}, {});
                        break;
                    case 1:
                        mem.add_sub_task(n, {name, "d", {}, {sig_id(name)}});
                        break;
                    case 2:
                        mem.record_edge(n, name,
                                        write_of({input_into(name, rng() % 2 ? "[p]" : "[q]")},
                                                 rng() % 3 == 0 ? Provenance::user_repaired : Provenance::llm_derived,
                                                 rng() % 2 == 0));
                        break;
                    case 3:
                        mem.remove_sub_task(n, name);
                        break;
                    case 4:
                        mem.record_task("task " + name, {}, {{n, name, {}}, {n, "Finish", {}}});
                        break;
                    case 5:
                        if (nodes > 0) mem.set_edge_target(n, name, static_cast<NodeId>(rng() % nodes));
                        break;
                }
            } catch (const Error&) {
            }
            ASSERT_TRUE(integrity_problems(mem.snapshot()).empty()) << "round " << round << " op " << op;
        }
        AppMemory copy(memory_from_json(to_json(mem.snapshot())));
        ASSERT_EQ(copy, mem);
    }
}
