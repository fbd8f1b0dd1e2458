#include "taskmem/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "taskmem/adapt.hpp"
#include "taskmem/classify.hpp"
#include "taskmem/repair.hpp"
#include "taskmem/text.hpp"

namespace taskmem::cli {

namespace {

std::filesystem::path script_path(const std::filesystem::path& apps_dir, const std::string& app) {
    return apps_dir / (app + ".sim.json");
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::string step_display(const memory::TaskStep& s) {
    return "(" + std::to_string(s.node_id) + "," + s.sub_task_name + ")";
}

}  // namespace

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ConfigError:
        case ErrorKind::IoError:
        case ErrorKind::SchemaError:
        case ErrorKind::DanglingRule:
        case ErrorKind::SchemaVersionMismatch:
            return kExitConfig;
        case ErrorKind::NoMockRule:
        case ErrorKind::ReplayMiss:
        case ErrorKind::TransportError:
        case ErrorKind::NonRetryableApiError:
            return kExitBackend;
        default:
            return kExitTaskFailed;
    }
}

AppRegistry AppRegistry::load(const std::filesystem::path& path, const Embedder& embedder) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("apps") || !j["apps"].is_array()) {
        throw Error(ErrorKind::ConfigError, path.string() + ": expected {\"apps\": [...]}");
    }
    AppRegistry r(embedder);
    for (const auto& a : j["apps"]) {
        if (!a.contains("app_id") || !a.contains("description")) throw Error(ErrorKind::ConfigError, "registry entry needs app_id and description");
        r.put(a["app_id"].get<std::string>(), a["description"].get<std::string>());
    }
    return r;
}

void AppRegistry::put(const std::string& app_id, const std::string& description) {
    auto emb = embedder_->embed(description);
    for (auto& e : entries_) {
        if (e.app_id == app_id) {
            e.description = description;
            e.embedding = std::move(emb);
            return;
        }
    }
    entries_.push_back({app_id, description, std::move(emb)});
}

std::vector<std::pair<std::string, double>> AppRegistry::rank(const std::string& query, std::size_t k) const {
    auto q = embedder_->embed(query);
    std::vector<std::pair<std::string, double>> out;
    for (const auto& e : entries_) out.emplace_back(e.app_id, cosine_similarity(q, e.embedding));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

std::unique_ptr<llm::LlmBackend> make_backend(const std::string& spec, const llm::CostRates& rates) {
    if (spec.rfind("mock:", 0) == 0) return std::make_unique<llm::MockBackend>(llm::MockBackend::load(spec.substr(5), rates));
    if (spec.rfind("replay:", 0) == 0) {
        std::filesystem::path p = spec.substr(7);
        if (!std::filesystem::exists(p)) {
            // Nothing recorded yet: every request misses.
            return std::make_unique<llm::ReplayBackend>(std::vector<llm::Recorded>{});
        }
        return std::make_unique<llm::ReplayBackend>(llm::ReplayBackend::load(p));
    }
    if (spec == "http") return std::make_unique<llm::HttpBackend>(llm::HttpConfig::from_env(), rates);
    throw Error(ErrorKind::ConfigError, "unknown --llm '" + spec + "' (expected mock:FILE, replay:FILE or http)");
}

memory::AppMemory load_or_create(const std::filesystem::path& memory_dir, const std::string& app_id) {
    auto path = memory::memory_path(memory_dir, app_id);
    if (std::filesystem::exists(path)) return memory::load(path);
    return memory::AppMemory(app_id);
}

ExploreResult random_explore(sim::DeviceAdapter& device, memory::AppMemory& mem, llm::LlmBackend& backend,
                             std::size_t budget, std::uint32_t seed, agent::EventLog* log) {
    ExploreResult r;
    agent::ScriptedUser user;
    agent::Agent agent(device, mem, backend, user, log);
    std::mt19937 rng(seed);
    std::set<std::string> seen;
    // Tried elements are keyed by page node and element signature, so screens
    // that differ only in content share one record.
    std::set<std::string> tried;
    for (; r.steps < budget; ++r.steps) {
        auto rep = agent.capture();
        std::optional<memory::NodeId> node;
        if (seen.insert(rep.serialized()).second) {
            ++r.screens_explored;
            node = agent.classify_or_explore(rep);
        } else {
            node = agent.classify_screen(rep);
        }
        std::string page_key = node ? std::to_string(*node) : rep.serialized();
        std::vector<std::pair<int, std::string>> candidates;
        for (int i = 0; i < static_cast<int>(rep.size()); ++i) {
            const auto& el = rep.element(i);
            if (el.tag == layout::Tag::button || el.tag == layout::Tag::checkbox || el.tag == layout::Tag::input ||
                el.tag == layout::Tag::scroll) {
                nlohmann::json sig = adapt::signature_of(el);
                candidates.emplace_back(i, page_key + "|" + std::string(layout::to_string(el.tag)) + sig.dump());
            }
        }
        if (candidates.empty()) break;
        std::vector<std::pair<int, std::string>> untried;
        for (const auto& c : candidates) {
            if (!tried.contains(c.second)) untried.push_back(c);
        }
        const auto& pool = untried.empty() ? candidates : untried;
        const auto& chosen = pool[rng() % pool.size()];
        tried.insert(chosen.second);
        int pick = chosen.first;
        Action a;
        switch (rep.element(pick).tag) {
            case layout::Tag::input: a = Action::input(pick, "test"); break;
            case layout::Tag::scroll: a = Action::scroll(Direction::down, pick); break;
            default: a = Action::click(pick); break;
        }
        try {
            device.dispatch(a);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NotActionable && e.kind() != ErrorKind::InvalidIndex) throw;
        }
    }
    r.nodes = mem.node_count();
    return r;
}

RunStats stats_from_summary(const nlohmann::json& s) {
    RunStats r;
    r.task = s.value("task", "");
    r.reasoning_queries = s.value("reasoning_queries", 0);
    r.fast_queries = s.value("fast_queries", 0);
    r.tokens = s.value("tokens", std::size_t{0});
    r.cost = s.value("cost", 0.0);
    r.actions = s.value("actions", 0);
    r.memory_hit_rate = s.value("memory_hit_rate", 0.0);
    r.outcome = s.value("outcome", "");
    r.ms = s.value("ms", 0.0);
    return r;
}

std::vector<RunStats> parse_log(std::istream& in, const std::string& name) {
    std::vector<RunStats> out;
    std::string line;
    std::size_t lineno = 0;
    std::size_t events = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("event")) {
            throw Error(ErrorKind::MalformedLog, name + ":" + std::to_string(lineno) + ": not an event");
        }
        ++events;
        if (j["event"] == "summary") out.push_back(stats_from_summary(j));
    }
    if (events == 0) throw Error(ErrorKind::MalformedLog, name + ": empty log");
    if (out.empty()) throw Error(ErrorKind::MalformedLog, name + ": no summary event");
    return out;
}

std::vector<RunStats> parse_log_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    return parse_log(in, path.string());
}

std::string stats_csv(const std::vector<RunStats>& runs) {
    std::string out = "task,phase_queries_reasoning,phase_queries_fast,tokens,cost,actions,memory_hit_rate,outcome,ms\n";
    for (const auto& r : runs) {
        out += csv_field(r.task) + "," + std::to_string(r.reasoning_queries) + "," + std::to_string(r.fast_queries) + "," +
               std::to_string(r.tokens) + "," + fixed(r.cost, 6) + "," + std::to_string(r.actions) + "," +
               fixed(r.memory_hit_rate, 4) + "," + csv_field(r.outcome) + "," + fixed(r.ms, 1) + "\n";
    }
    return out;
}

std::string stats_table(const std::vector<RunStats>& runs) {
    std::set<std::string> seen;
    std::vector<std::pair<std::string, const RunStats*>> rows;
    for (const auto& r : runs) rows.emplace_back(seen.insert(r.task).second ? "cold" : "warm", &r);
    std::ostringstream os;
    os << std::left << std::setw(6) << "group" << std::setw(24) << "task" << std::right << std::setw(10) << "reasoning"
       << std::setw(6) << "fast" << std::setw(8) << "tokens" << std::setw(10) << "cost" << std::setw(8) << "actions"
       << std::setw(9) << "hit_rate" << "  " << std::left << std::setw(11) << "outcome" << std::right << std::setw(9) << "ms"
       << "\n";
    for (const char* group : {"cold", "warm"}) {
        RunStats total;
        int n = 0;
        for (const auto& [g, r] : rows) {
            if (g != group) continue;
            ++n;
            os << std::left << std::setw(6) << g << std::setw(24) << r->task << std::right << std::setw(10)
               << r->reasoning_queries << std::setw(6) << r->fast_queries << std::setw(8) << r->tokens << std::setw(10)
               << fixed(r->cost, 4) << std::setw(8) << r->actions << std::setw(9) << fixed(r->memory_hit_rate, 3) << "  "
               << std::left << std::setw(11) << r->outcome << std::right << std::setw(9) << fixed(r->ms, 1) << "\n";
            total.reasoning_queries += r->reasoning_queries;
            total.fast_queries += r->fast_queries;
            total.tokens += r->tokens;
            total.cost += r->cost;
            total.actions += r->actions;
        }
        if (n > 0) {
            os << std::left << std::setw(6) << group << std::setw(24) << "(total)" << std::right << std::setw(10)
               << total.reasoning_queries << std::setw(6) << total.fast_queries << std::setw(8) << total.tokens << std::setw(10)
               << fixed(total.cost, 4) << std::setw(8) << total.actions << "\n";
        }
    }
    return os.str();
}

int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err, std::istream& in) {
    try {
        auto rates = opt.costs ? llm::CostRates::load(*opt.costs) : llm::CostRates{};
        std::string app;
        if (opt.app) {
            app = *opt.app;
        } else {
            auto registry = AppRegistry::load(opt.apps_dir / "registry.json");
            auto top = registry.rank(opt.instruction, 3);
            if (top.empty()) throw Error(ErrorKind::ConfigError, "app registry is empty");
            for (std::size_t i = 0; i < top.size(); ++i) {
                out << (i + 1) << ". " << top[i].first << " (" << fixed(top[i].second, 3) << ")\n";
            }
            std::size_t choice = 1;
            if (!opt.auto_app) {
                out << "Select an app [1-" << top.size() << "]: " << std::flush;
                std::string line;
                if (!std::getline(in, line)) throw Error(ErrorKind::ConfigError, "no app selected");
                try {
                    choice = std::stoul(text::trim(line));
                } catch (const std::exception&) {
                    choice = 0;
                }
                if (choice < 1 || choice > top.size()) throw Error(ErrorKind::ConfigError, "invalid app choice");
            }
            app = top[choice - 1].first;
        }
        sim::Simulator device(sim::load_script(script_path(opt.apps_dir, app)));
        auto mem = load_or_create(opt.memory_dir, app);
        auto backend = make_backend(opt.llm, rates);
        std::optional<llm::RecordingBackend> recorder;
        llm::LlmBackend* llm_backend = backend.get();
        if (opt.record) llm_backend = &recorder.emplace(*backend);

        std::ofstream log_file;
        if (opt.log) {
            log_file.open(*opt.log, std::ios::app);
            if (!log_file) throw Error(ErrorKind::IoError, "cannot write " + opt.log->string());
        }
        agent::EventLog log(opt.log ? &log_file : nullptr);

        std::unique_ptr<agent::UserChannel> user;
        if (!opt.answers.empty()) {
            user = std::make_unique<agent::ScriptedUser>(opt.answers);
        } else {
            user = std::make_unique<agent::ConsoleUser>(in, out);
        }
        agent::Agent agent(device, mem, *llm_backend, *user, &log);
        std::optional<repair::ScriptedRepair> scripted;
        std::optional<repair::ConsoleRepair> console;
        if (opt.repair_script) {
            agent.set_repair_hook(&scripted.emplace(repair::load_repair_script(*opt.repair_script)));
        } else if (opt.repair_console_at) {
            agent.set_repair_hook(&console.emplace(*opt.repair_console_at, in, out));
        }

        auto outcome = agent.run_instruction(opt.instruction);
        std::filesystem::create_directories(opt.memory_dir);
        memory::save(mem, memory::memory_path(opt.memory_dir, app));
        if (recorder) recorder->save(*opt.record);

        auto summary = log.of_type("summary");
        if (!summary.empty()) out << stats_csv({stats_from_summary(summary.back())});
        if (outcome.outcome == agent::Outcome::success) return kExitOk;
        err << "task " << agent::to_string(outcome.outcome) << ": " << outcome.message << "\n";
        return outcome.error ? exit_code_for(*outcome.error) : kExitTaskFailed;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return exit_code_for(e.kind());
    }
}

int cmd_explore(const ExploreOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        auto rates = opt.costs ? llm::CostRates::load(*opt.costs) : llm::CostRates{};
        sim::Simulator device(sim::load_script(script_path(opt.apps_dir, opt.app)));
        auto mem = load_or_create(opt.memory_dir, opt.app);
        auto backend = make_backend(opt.llm, rates);
        std::ofstream log_file;
        if (opt.log) log_file.open(*opt.log, std::ios::app);
        agent::EventLog log(opt.log ? &log_file : nullptr);
        auto r = random_explore(device, mem, *backend, opt.budget, opt.seed, &log);
        std::filesystem::create_directories(opt.memory_dir);
        memory::save(mem, memory::memory_path(opt.memory_dir, opt.app));
        out << "steps " << r.steps << "\nscreens " << r.screens_explored << "\nnodes " << r.nodes << "\n";
        return kExitOk;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return exit_code_for(e.kind());
    }
}

int cmd_memory(const std::string& sub, const std::string& app, const std::filesystem::path& memory_dir, std::ostream& out,
               std::ostream& err) {
    auto path = memory::memory_path(memory_dir, app);
    try {
        if (!std::filesystem::exists(path)) throw Error(ErrorKind::IoError, "no memory file " + path.string());
        auto data = memory::load(path).snapshot();
        if (sub == "verify") {
            out << "ok: " << data.nodes.size() << " nodes, " << data.edges.size() << " edges, " << data.tasks.size() << " tasks\n";
            return kExitOk;
        }
        if (sub == "show") {
            out << "app " << data.app_id << "\nnodes " << data.nodes.size() << "\nedges " << data.edges.size() << "\ntasks "
                << data.tasks.size() << "\n";
            for (const auto& [id, node] : data.nodes) {
                out << "node " << id << ":";
                for (const auto& st : node.sub_tasks) out << " " << st.name;
                out << "\n";
            }
        }
        if (sub == "show" || sub == "edges") {
            for (const auto& [key, e] : data.edges) {
                out << "(" << key.first << "," << key.second << ") -> "
                    << (e.to_node ? std::to_string(*e.to_node) : std::string("-")) << " [" << memory::to_string(e.provenance) << "]";
                for (std::size_t i = 0; i < e.actions.size(); ++i) out << (i == 0 ? " " : ", ") << e.actions[i].to_display();
                out << "\n";
            }
        }
        if (sub == "show" || sub == "tasks") {
            for (const auto& [name, t] : data.tasks) {
                out << name << ":";
                for (std::size_t i = 0; i < t.steps.size(); ++i) out << (i == 0 ? " " : " -> ") << step_display(t.steps[i]);
                out << "\n";
            }
        }
        if (sub != "show" && sub != "tasks" && sub != "edges") throw Error(ErrorKind::ConfigError, "unknown memory subcommand '" + sub + "'");
        return kExitOk;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return exit_code_for(e.kind());
    }
}

int cmd_stats(const std::vector<std::filesystem::path>& logs, std::ostream& out, std::ostream& err) {
    try {
        std::vector<RunStats> runs;
        for (const auto& p : logs) {
            auto r = parse_log_file(p);
            runs.insert(runs.end(), r.begin(), r.end());
        }
        out << stats_csv(runs) << "\n" << stats_table(runs);
        return kExitOk;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return e.kind() == ErrorKind::MalformedLog ? kExitTaskFailed : exit_code_for(e.kind());
    }
}

int cmd_rank(const std::string& query, const std::filesystem::path& apps_dir, std::ostream& out, std::ostream& err) {
    try {
        auto top = AppRegistry::load(apps_dir / "registry.json").rank(query, 3);
        for (std::size_t i = 0; i < top.size(); ++i) out << (i + 1) << ". " << top[i].first << " " << fixed(top[i].second, 4) << "\n";
        return kExitOk;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return exit_code_for(e.kind());
    }
}

}  // namespace taskmem::cli
