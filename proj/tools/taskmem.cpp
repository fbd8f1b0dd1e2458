#include <CLI11.hpp>

#include <iostream>

#include "taskmem/cli.hpp"

namespace cli = taskmem::cli;

int main(int argc, char** argv) {
    CLI::App app{"taskmem: task-level memory agent for simulated mobile apps"};
    app.require_subcommand(1);

    const std::string data_dir = TASKMEM_DATA_DIR;

    cli::RunOptions run;
    run.apps_dir = data_dir + "/apps";
    std::string app_id;
    std::size_t console_at = 0;
    auto* run_cmd = app.add_subcommand("run", "Run one instruction against an app");
    run_cmd->add_option("instruction", run.instruction, "Natural-language instruction")->required();
    run_cmd->add_option("--app", app_id, "App id; ranked from the registry when omitted");
    run_cmd->add_flag("--auto-app", run.auto_app, "Take the top-ranked app without asking");
    run_cmd->add_option("--llm", run.llm, "mock:FILE, replay:FILE or http")->capture_default_str();
    run_cmd->add_option("--memory-dir", run.memory_dir, "Directory of <app>.memory.json files")->capture_default_str();
    run_cmd->add_option("--apps-dir", run.apps_dir, "Directory of app scripts and registry.json")->capture_default_str();
    auto* costs_opt = run_cmd->add_option("--costs", "Cost rates JSON");
    auto* repair_opt = run_cmd->add_option("--repair-script", "Scripted repair events JSON");
    auto* console_opt = run_cmd->add_option("--repair-at", console_at, "Open the repair console at this step");
    auto* log_opt = run_cmd->add_option("--log", "Append JSON-lines events to this file");
    auto* record_opt = run_cmd->add_option("--record", "Write a replay recording of all LLM exchanges");
    run_cmd->add_option("--answer", run.answers, "Scripted user answer (repeatable)");

    cli::ExploreOptions explore;
    explore.apps_dir = data_dir + "/apps";
    auto* explore_cmd = app.add_subcommand("explore", "Random exploration to pre-populate memory");
    explore_cmd->add_option("--app", explore.app, "App id")->required();
    explore_cmd->add_option("--budget", explore.budget, "Number of random actions")->capture_default_str();
    explore_cmd->add_option("--seed", explore.seed, "RNG seed")->capture_default_str();
    explore_cmd->add_option("--llm", explore.llm, "mock:FILE, replay:FILE or http")->capture_default_str();
    explore_cmd->add_option("--memory-dir", explore.memory_dir)->capture_default_str();
    explore_cmd->add_option("--apps-dir", explore.apps_dir)->capture_default_str();
    auto* explore_costs = explore_cmd->add_option("--costs", "Cost rates JSON");
    auto* explore_log = explore_cmd->add_option("--log", "Append JSON-lines events to this file");

    std::string mem_sub;
    std::string mem_app;
    std::filesystem::path mem_dir = ".";
    auto* memory_cmd = app.add_subcommand("memory", "Inspect a memory file");
    memory_cmd->add_option("action", mem_sub, "show, tasks, edges or verify")
        ->required()
        ->check(CLI::IsMember({"show", "tasks", "edges", "verify"}));
    memory_cmd->add_option("--app", mem_app, "App id")->required();
    memory_cmd->add_option("--memory-dir", mem_dir)->capture_default_str();

    std::vector<std::filesystem::path> logs;
    auto* stats_cmd = app.add_subcommand("stats", "Aggregate run logs");
    stats_cmd->add_option("logs", logs, "JSON-lines log files")->required();

    std::string query;
    std::filesystem::path rank_apps = data_dir + "/apps";
    auto* rank_cmd = app.add_subcommand("rank", "Rank registered apps for an instruction");
    rank_cmd->add_option("instruction", query)->required();
    rank_cmd->add_option("--apps-dir", rank_apps)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kExitConfig;
    }

    if (*run_cmd) {
        if (!app_id.empty()) run.app = app_id;
        if (*costs_opt) run.costs = costs_opt->as<std::string>();
        if (*repair_opt) run.repair_script = repair_opt->as<std::string>();
        if (*console_opt) run.repair_console_at = console_at;
        if (*log_opt) run.log = log_opt->as<std::string>();
        if (*record_opt) run.record = record_opt->as<std::string>();
        return cli::cmd_run(run, std::cout, std::cerr, std::cin);
    }
    if (*explore_cmd) {
        if (*explore_costs) explore.costs = explore_costs->as<std::string>();
        if (*explore_log) explore.log = explore_log->as<std::string>();
        return cli::cmd_explore(explore, std::cout, std::cerr);
    }
    if (*memory_cmd) return cli::cmd_memory(mem_sub, mem_app, mem_dir, std::cout, std::cerr);
    if (*stats_cmd) return cli::cmd_stats(logs, std::cout, std::cerr);
    return cli::cmd_rank(query, rank_apps, std::cout, std::cerr);
}
