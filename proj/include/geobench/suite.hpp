#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geobench/judge.hpp"
#include "geobench/metrics.hpp"
#include "geobench/model.hpp"
#include "geobench/paradigms.hpp"
#include "geobench/registry.hpp"
#include "geobench/sandbox.hpp"

namespace geobench {

// Suite layout: <dir>/<id>.task.json, optional <dir>/<id>.script.json for the
// scripted backend, input layers under <dir>/data/.
inline constexpr std::string_view kTaskSuffix = ".task.json";
inline constexpr std::string_view kScriptSuffix = ".script.json";

std::vector<std::filesystem::path> find_task_files(const std::filesystem::path& dir);  // NoTasksFound

// "scripted" reads the task's script file; "openai:<model>" uses a chat endpoint.
std::unique_ptr<ModelClient> make_model(const std::string& model_id, const TaskSpec& task,
                                        const std::filesystem::path& tasks_dir);
// "mock", "mock:60,70,80" or "openai:<model>".
std::unique_ptr<JudgeClient> make_judge(const std::string& backend_id);

// Synthetic tools when `manifest` is empty, otherwise the manifest's tools
// served by its worker.
ToolRegistry load_registry(const std::optional<std::filesystem::path>& manifest);

struct SuiteConfig {
    std::filesystem::path tasks_dir;
    std::filesystem::path out_dir;
    Paradigm paradigm = Paradigm::base;
    std::string model_id = "scripted";
    int jobs = 1;
    bool judge = true;
    int judge_repeats = kDefaultJudgeRepeats;
    Limits limits;
    AgentConfig agent;
};

struct TaskOutcome {
    std::string task_id;
    MetricReport report;
    std::filesystem::path log;
    std::filesystem::path workspace;
    std::optional<std::string> aborted;        // the model broke the turn protocol
    std::optional<std::string> harness_error;  // configuration trouble, not agent failure
};

struct SuiteOutcome {
    std::filesystem::path run_dir;  // <out>/<paradigm>/<model>
    std::vector<TaskOutcome> tasks;  // in task-id order
    bool any_harness_error() const;
};

// Runs every task of the suite. `judge` may be null when config.judge is off.
SuiteOutcome run_suite(const SuiteConfig& config, const ToolRegistry& registry, JudgeClient* judge);

MetricReport score_offline(const std::filesystem::path& log, const std::filesystem::path& task_doc,
                           const std::filesystem::path& workspace, const ToolRegistry& registry);

// One line of the results file.
struct ResultRow {
    std::string task_id;  // "ALL" for the aggregate row
    double tao_p = 0, tao_r = 0, tao_f1 = 0, tio = 0, tem = 0, pea = 0;
    std::optional<double> judge_mean, judge_std;
    std::optional<double> eff, eff_micro;  // only defined for successful tasks
    int n_gt = 0, n_pred = 0;
    double success = 0;  // 0/1 per task, success rate in the aggregate
    std::string paradigm, model;

    bool is_aggregate() const { return task_id == kAggregateId; }
    static constexpr std::string_view kAggregateId = "ALL";
};

ResultRow result_row(const std::string& task_id, const MetricReport& report, std::string paradigm,
                     std::string model);
// Means over the task rows; eff is the macro and eff_micro the micro average
// over successful tasks.
ResultRow aggregate_row(const std::vector<ResultRow>& rows);

std::string results_csv(const std::vector<ResultRow>& rows, bool with_judge);
std::vector<ResultRow> parse_results_csv(std::string_view text);
std::vector<ResultRow> load_results(const std::filesystem::path& file);

// Markdown, one table per paradigm, one row per model, best value per
// column in bold. Raises EmptyResults.
std::string render_report(const std::vector<ResultRow>& rows);

} // namespace geobench
