#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "taskmem/agent.hpp"
#include "taskmem/embed.hpp"
#include "taskmem/error.hpp"
#include "taskmem/llm.hpp"
#include "taskmem/memory.hpp"
#include "taskmem/sim.hpp"

namespace taskmem::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitTaskFailed = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitBackend = 4;

int exit_code_for(ErrorKind kind);

struct AppRegistryEntry {
    std::string app_id;
    std::string description;
    std::vector<double> embedding;
};

class AppRegistry {
public:
    explicit AppRegistry(const Embedder& embedder = default_embedder()) : embedder_(&embedder) {}

    // {"apps": [{"app_id": ..., "description": ...}]}
    static AppRegistry load(const std::filesystem::path& path, const Embedder& embedder = default_embedder());

    // Replaces the description (and embedding) of an existing app.
    void put(const std::string& app_id, const std::string& description);
    const std::vector<AppRegistryEntry>& entries() const { return entries_; }

    // Highest cosine similarity first; ties by app id.
    std::vector<std::pair<std::string, double>> rank(const std::string& query, std::size_t k = 3) const;

private:
    const Embedder* embedder_;
    std::vector<AppRegistryEntry> entries_;
};

// "mock:FILE", "replay:FILE" or "http".
std::unique_ptr<llm::LlmBackend> make_backend(const std::string& spec, const llm::CostRates& rates);

memory::AppMemory load_or_create(const std::filesystem::path& memory_dir, const std::string& app_id);

struct ExploreResult {
    std::size_t steps = 0;
    std::size_t screens_explored = 0;
    std::size_t nodes = 0;
};

// Seeded random walk: each step clicks, types into, or scrolls an interactive
// element, drawn uniformly from those not yet tried on the current screen (or
// from all of them once every one has been tried). Screens not seen before are
// classified and, when unknown, explored.
ExploreResult random_explore(sim::DeviceAdapter& device, memory::AppMemory& mem, llm::LlmBackend& backend,
                             std::size_t budget, std::uint32_t seed, agent::EventLog* log = nullptr);

struct RunStats {
    std::string task;
    int reasoning_queries = 0;
    int fast_queries = 0;
    std::size_t tokens = 0;
    double cost = 0.0;
    int actions = 0;
    double memory_hit_rate = 0.0;
    std::string outcome;
    double ms = 0.0;
};

RunStats stats_from_summary(const nlohmann::json& summary);
// Summary events of a JSON-lines log. Throws MalformedLog.
std::vector<RunStats> parse_log(std::istream& in, const std::string& name = "log");
std::vector<RunStats> parse_log_file(const std::filesystem::path& path);

std::string stats_csv(const std::vector<RunStats>& runs);
// Rows grouped into cold (first run of a task name) and warm (later runs).
std::string stats_table(const std::vector<RunStats>& runs);

struct RunOptions {
    std::string instruction;
    std::optional<std::string> app;
    bool auto_app = false;
    std::string llm = "http";
    std::filesystem::path memory_dir = ".";
    std::filesystem::path apps_dir;
    std::optional<std::filesystem::path> costs;
    std::optional<std::filesystem::path> repair_script;
    std::optional<std::size_t> repair_console_at;
    std::optional<std::filesystem::path> log;
    std::optional<std::filesystem::path> record;
    std::vector<std::string> answers;  // scripted user replies; console when empty
};

int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err, std::istream& in);

struct ExploreOptions {
    std::string app;
    std::string llm = "http";
    std::filesystem::path memory_dir = ".";
    std::filesystem::path apps_dir;
    std::optional<std::filesystem::path> costs;
    std::size_t budget = 100;
    std::uint32_t seed = 0;
    std::optional<std::filesystem::path> log;
};

int cmd_explore(const ExploreOptions& opt, std::ostream& out, std::ostream& err);

// show, tasks, edges or verify.
int cmd_memory(const std::string& sub, const std::string& app, const std::filesystem::path& memory_dir, std::ostream& out,
               std::ostream& err);

int cmd_stats(const std::vector<std::filesystem::path>& logs, std::ostream& out, std::ostream& err);

int cmd_rank(const std::string& query, const std::filesystem::path& apps_dir, std::ostream& out, std::ostream& err);

}  // namespace taskmem::cli
