// harness: run agent paradigms over a task suite, re-score logs, render reports.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/core.h>

#include "geobench/errors.hpp"
#include "geobench/suite.hpp"

namespace fs = std::filesystem;
using namespace geobench;

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void write_text(const fs::path& file, const std::string& text) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", file.string()));
}

struct RunArgs {
    std::string tasks;
    std::string paradigms = "base";
    std::string models = "scripted";
    int jobs = 1;
    bool no_judge = false;
    std::string judge_backend = "mock";
    int judge_repeats = kDefaultJudgeRepeats;
    int max_steps = kDefaultMaxSteps;
    double timeout = kDefaultCallTimeoutSeconds;
    int retry_budget = kDefaultRetryBudget;
    std::string out = "runs";
    std::string tools;
};

int cmd_run(const RunArgs& a) {
    std::vector<Paradigm> paradigms;
    for (const auto& p : split_list(a.paradigms)) {
        auto parsed = parse_paradigm(p);
        if (!parsed) throw std::invalid_argument(fmt::format("unknown paradigm '{}'", p));
        paradigms.push_back(*parsed);
    }
    const auto models = split_list(a.models);
    if (paradigms.empty() || models.empty()) throw std::invalid_argument("need at least one paradigm and model");

    const auto registry = load_registry(a.tools.empty() ? std::nullopt : std::optional<fs::path>(a.tools));
    std::unique_ptr<JudgeClient> judge;
    if (!a.no_judge) judge = make_judge(a.judge_backend);

    SuiteConfig config;
    config.tasks_dir = a.tasks;
    config.out_dir = a.out;
    config.jobs = a.jobs;
    config.judge = !a.no_judge;
    config.judge_repeats = a.judge_repeats;
    config.limits.max_steps = a.max_steps;
    config.limits.call_timeout = Seconds{a.timeout};
    config.agent.retry_budget = a.retry_budget;

    std::vector<ResultRow> rows;
    bool failed = false;
    for (auto p : paradigms) {
        for (const auto& m : models) {
            config.paradigm = p;
            config.model_id = m;
            auto outcome = run_suite(config, registry, judge.get());
            std::vector<ResultRow> group;
            for (const auto& t : outcome.tasks) {
                if (t.harness_error) {
                    failed = true;
                    fmt::print(stderr, "[{} {}] {}: ERROR {}\n", to_string(p), m, t.task_id, *t.harness_error);
                    continue;
                }
                if (t.aborted) fmt::print(stderr, "[{} {}] {}: aborted: {}\n", to_string(p), m, t.task_id, *t.aborted);
                group.push_back(result_row(t.task_id, t.report, std::string(to_string(p)), m));
                fmt::print(stderr, "[{} {}] {}: tio={:.3f} pea={:.3f} steps={} success={}\n", to_string(p), m,
                           t.task_id, t.report.tio, t.report.pea, t.report.n_pred, t.report.success);
            }
            if (!group.empty()) group.push_back(aggregate_row(group));
            rows.insert(rows.end(), group.begin(), group.end());
        }
    }
    if (rows.empty()) throw EmptyResults("no task produced a result");
    const auto csv = results_csv(rows, !a.no_judge);
    const auto report = render_report(rows);
    write_text(fs::path(a.out) / "results.csv", csv);
    write_text(fs::path(a.out) / "report.md", report);
    std::cout << report;
    return failed ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-loop evaluation harness for tool-using GIS agents"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run paradigm x model sweeps over a task suite");
    run_cmd->add_option("--tasks", run.tasks, "Task suite directory")->required()->check(CLI::ExistingDirectory);
    run_cmd->add_option("--paradigm", run.paradigms, "base, react, plan-solve, plan-react (comma-separated)")
        ->capture_default_str();
    run_cmd->add_option("--model", run.models, "scripted or openai:<model> (comma-separated)")->capture_default_str();
    run_cmd->add_option("--jobs", run.jobs, "Parallel tasks")->capture_default_str()->check(CLI::PositiveNumber);
    run_cmd->add_flag("--no-judge", run.no_judge, "Skip visual judging");
    run_cmd->add_option("--judge-backend", run.judge_backend, "mock, mock:<s1,s2,...> or openai:<model>")
        ->capture_default_str();
    run_cmd->add_option("--judge-repeats", run.judge_repeats)->capture_default_str()->check(CLI::PositiveNumber);
    run_cmd->add_option("--max-steps", run.max_steps)->capture_default_str()->check(CLI::PositiveNumber);
    run_cmd->add_option("--timeout", run.timeout, "Per-call timeout, seconds")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    run_cmd->add_option("--retry-budget", run.retry_budget, "Attempts per plan step (plan-react)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
    run_cmd->add_option("--tools", run.tools, "Tool manifest served by a worker (default: built-in tools)")
        ->check(CLI::ExistingFile);

    std::string log, task, workspace, tools;
    auto* score_cmd = app.add_subcommand("score", "Re-score a trajectory log against its workspace");
    score_cmd->add_option("--log", log)->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--task", task)->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--workspace", workspace)->required()->check(CLI::ExistingDirectory);
    score_cmd->add_option("--tools", tools)->check(CLI::ExistingFile);

    std::string results;
    auto* report_cmd = app.add_subcommand("report", "Render a results file as Markdown tables");
    report_cmd->add_option("--results", results)->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return cmd_run(run);
        if (*score_cmd) {
            const auto registry = load_registry(tools.empty() ? std::nullopt : std::optional<fs::path>(tools));
            const auto report = score_offline(log, task, workspace, registry);
            const auto spec = load_task_spec(task);
            std::cout << results_csv({result_row(spec.id, report, "", "")}, false);
            return 0;
        }
        if (*report_cmd) {
            std::cout << render_report(load_results(results));
            return 0;
        }
    } catch (const std::exception& e) {
        fmt::print(stderr, "harness: {}\n", e.what());
        return 2;
    }
    return 0;
}
