#include "geobench/suite.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/core.h>

#include "geobench/errors.hpp"
#include "geobench/http_backends.hpp"
#include "geobench/synthetic_tools.hpp"
#include "geobench/worker.hpp"

namespace geobench {

namespace fs = std::filesystem;

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string judge_description(const TaskSpec& task) {
    if (task.drawing_style.empty()) return task.task_description;
    return fmt::format("{}\nDrawing style: {}", task.task_description, task.drawing_style);
}

std::string safe_name(std::string_view s) {
    std::string out;
    for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_';
    return out;
}

std::string read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw MalformedDocument(fmt::format("cannot read '{}'", file.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

std::vector<fs::path> find_task_files(const fs::path& dir) {
    std::vector<fs::path> files;
    std::error_code ec;
    if (fs::is_directory(dir, ec)) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && ends_with(entry.path().filename().string(), kTaskSuffix)) {
                files.push_back(entry.path());
            }
        }
    }
    if (files.empty()) throw NoTasksFound(fmt::format("no *{} files in '{}'", kTaskSuffix, dir.string()));
    std::sort(files.begin(), files.end());
    return files;
}

std::unique_ptr<ModelClient> make_model(const std::string& model_id, const TaskSpec& task,
                                        const fs::path& tasks_dir) {
    if (model_id == "scripted") {
        return std::make_unique<ScriptedModel>(
            ScriptedModel::load(tasks_dir / (task.id + std::string(kScriptSuffix))));
    }
    if (model_id.rfind("openai:", 0) == 0) {
        return std::make_unique<ChatModel>(endpoint_from_env(model_id.substr(7)));
    }
    throw std::invalid_argument(fmt::format("unknown model backend '{}'", model_id));
}

std::unique_ptr<JudgeClient> make_judge(const std::string& backend_id) {
    if (backend_id == "mock") return std::make_unique<MockJudge>(std::vector<std::string>{"Score: 70"});
    if (backend_id.rfind("mock:", 0) == 0) {
        std::vector<int> scores;
        std::stringstream ss(backend_id.substr(5));
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                scores.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw std::invalid_argument(fmt::format("bad mock judge score '{}'", item));
            }
        }
        if (scores.empty()) throw std::invalid_argument("mock judge needs scores");
        return std::make_unique<MockJudge>(MockJudge::score_replies(scores));
    }
    if (backend_id.rfind("openai:", 0) == 0) {
        return std::make_unique<ChatJudge>(endpoint_from_env(backend_id.substr(7)));
    }
    throw std::invalid_argument(fmt::format("unknown judge backend '{}'", backend_id));
}

ToolRegistry load_registry(const std::optional<fs::path>& manifest) {
    ToolRegistry registry;
    if (!manifest) {
        register_synthetic_tools(registry);
        return registry;
    }
    auto m = load_tool_manifest(*manifest);
    if (m.worker_command.empty()) throw RegistryLoadError("tool manifest names no worker command");
    auto executor = std::make_shared<WorkerToolExecutor>(m.worker_command);
    for (auto& schema : m.tools) registry.register_tool(std::move(schema), executor);
    if (registry.empty()) throw EmptyRegistry("tool manifest lists no tools");
    return registry;
}

bool SuiteOutcome::any_harness_error() const {
    return std::any_of(tasks.begin(), tasks.end(), [](const auto& t) { return t.harness_error.has_value(); });
}

namespace {

// Renders the gold toolchain's map in its own workspace.
Image reference_image(const TaskSpec& task, const ToolRegistry& registry, const fs::path& data_root,
                      const fs::path& ref_root, const Limits& limits) {
    auto ws = Workspace::create(task, data_root, ref_root, limits);
    for (const auto& step : task.gold_toolchain.steps) {
        auto r = ws.execute_tool(registry, step.tool, step.args);
        if (r.status != CallStatus::success) {
            throw Error(fmt::format("gold step {} ({}) failed: {}", step.index, step.tool,
                                    r.error_message.value_or(std::string(to_string(r.status)))));
        }
    }
    return read_image(ws.root() / task.result_filename);
}

TaskOutcome run_task(const SuiteConfig& config, const TaskSpec& task, const ToolRegistry& registry,
                     JudgeClient* judge, const fs::path& run_dir) {
    TaskOutcome out;
    out.task_id = task.id;
    const auto data_root = config.tasks_dir / "data";
    auto ws = Workspace::create(task, data_root, run_dir / "workspaces", config.limits);
    out.workspace = ws.root();

    auto model = make_model(config.model_id, task, config.tasks_dir);
    Trajectory trajectory;
    try {
        trajectory = run_paradigm(config.paradigm, task, registry, ws, *model, config.agent);
    } catch (const ModelProtocolViolation& e) {
        trajectory = {task.id, ws.records(), Terminal::aborted, std::nullopt};
        out.aborted = e.what();
    } catch (const MissingPlan& e) {
        trajectory = {task.id, ws.records(), Terminal::aborted, std::nullopt};
        out.aborted = e.what();
    }
    out.log = run_dir / "logs" / (task.id + ".trajectory.json");
    save_trajectory(trajectory, out.log);
    out.report = score_trajectory(trajectory, task, registry, ws.root());

    if (config.judge && judge) {
        auto gt = reference_image(task, registry, data_root, run_dir / "reference", config.limits);
        const auto alignment = pea(trajectory, task.gold_toolchain, registry, ws.root()).alignment;
        const auto pred_path = ws.root() / mapped_result_path(task, alignment);
        std::optional<Image> pred;
        try {
            pred = read_image(pred_path);
        } catch (const UndecodableImage&) {
        }
        if (pred) {
            const auto contrastive = compose_contrastive(*pred, gt);
            write_png(contrastive, run_dir / "judge" / (task.id + ".png"));
            const auto verdict = judge_pair(judge_description(task), contrastive, *judge, config.judge_repeats);
            out.report.judge = JudgeSummary{verdict.mean, verdict.std};
        } else {
            out.report.judge = JudgeSummary{0, 0};
        }
    }
    return out;
}

} // namespace

SuiteOutcome run_suite(const SuiteConfig& config, const ToolRegistry& registry, JudgeClient* judge) {
    std::vector<TaskSpec> tasks;
    std::set<std::string> ids;
    for (const auto& file : find_task_files(config.tasks_dir)) {
        tasks.push_back(load_task_spec(file));
        if (!ids.insert(tasks.back().id).second) {
            throw MalformedDocument(fmt::format("duplicate task id '{}'", tasks.back().id));
        }
    }
    std::sort(tasks.begin(), tasks.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    SuiteOutcome outcome;
    outcome.run_dir = config.out_dir / std::string(to_string(config.paradigm)) / safe_name(config.model_id);
    fs::create_directories(outcome.run_dir / "logs");
    fs::create_directories(outcome.run_dir / "judge");
    outcome.tasks.resize(tasks.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            auto& slot = outcome.tasks[i];
            try {
                slot = run_task(config, tasks[i], registry, judge, outcome.run_dir);
            } catch (const std::exception& e) {
                slot.task_id = tasks[i].id;
                slot.harness_error = e.what();
            }
        }
    };
    const int jobs = std::clamp(config.jobs, 1, static_cast<int>(tasks.size()));
    std::vector<std::thread> threads;
    for (int j = 1; j < jobs; ++j) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    return outcome;
}

MetricReport score_offline(const fs::path& log, const fs::path& task_doc, const fs::path& workspace,
                           const ToolRegistry& registry) {
    return score_trajectory(load_trajectory(log), load_task_spec(task_doc), registry, workspace);
}

ResultRow result_row(const std::string& task_id, const MetricReport& report, std::string paradigm,
                     std::string model) {
    ResultRow row;
    row.task_id = task_id;
    row.tao_p = report.tao.precision;
    row.tao_r = report.tao.recall;
    row.tao_f1 = report.tao.f1;
    row.tio = report.tio;
    row.tem = report.tem;
    row.pea = report.pea;
    if (report.judge) {
        row.judge_mean = report.judge->mean;
        row.judge_std = report.judge->std;
    }
    if (report.success) {
        row.eff = report.eff_task;
        row.eff_micro = report.eff_task;
    }
    row.n_gt = report.n_gt;
    row.n_pred = report.n_pred;
    row.success = report.success ? 1 : 0;
    row.paradigm = std::move(paradigm);
    row.model = std::move(model);
    return row;
}

ResultRow aggregate_row(const std::vector<ResultRow>& rows) {
    ResultRow all;
    all.task_id = std::string(ResultRow::kAggregateId);
    std::vector<const ResultRow*> tasks;
    for (const auto& r : rows) {
        if (!r.is_aggregate()) tasks.push_back(&r);
    }
    if (tasks.empty()) throw EmptyResults("no task rows to aggregate");
    all.paradigm = tasks.front()->paradigm;
    all.model = tasks.front()->model;

    const double n = static_cast<double>(tasks.size());
    double judge_mean = 0, judge_std = 0;
    int judged = 0;
    std::vector<EffSample> successful;
    for (const auto* r : tasks) {
        all.tao_p += r->tao_p / n;
        all.tao_r += r->tao_r / n;
        all.tao_f1 += r->tao_f1 / n;
        all.tio += r->tio / n;
        all.tem += r->tem / n;
        all.pea += r->pea / n;
        all.success += r->success / n;
        all.n_gt += r->n_gt;
        all.n_pred += r->n_pred;
        if (r->judge_mean) {
            judge_mean += *r->judge_mean;
            judge_std += r->judge_std.value_or(0);
            ++judged;
        }
        if (r->success > 0) successful.push_back({r->n_gt, r->n_pred});
    }
    if (judged > 0) {
        all.judge_mean = judge_mean / judged;
        all.judge_std = judge_std / judged;
    }
    if (auto eff = efficiency(successful)) {
        all.eff = eff->macro;
        all.eff_micro = eff->micro;
    }
    return all;
}

namespace {

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols{"task_id", "tao_p",    "tao_r",     "tao_f1", "tio",    "tem",
                                               "pea",     "judge_mean", "judge_std", "eff",    "eff_micro",
                                               "n_gt",    "n_pred",   "success",   "paradigm", "model"};
    return cols;
}

std::string num(double v) { return fmt::format("{:.6f}", v); }
std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

} // namespace

std::string results_csv(const std::vector<ResultRow>& rows, bool with_judge) {
    std::string out;
    bool first = true;
    for (const auto& c : csv_columns()) {
        if (!with_judge && (c == "judge_mean" || c == "judge_std")) continue;
        out += first ? c : "," + c;
        first = false;
    }
    out += "\n";
    for (const auto& r : rows) {
        std::vector<std::string> f{r.task_id, num(r.tao_p), num(r.tao_r), num(r.tao_f1), num(r.tio),
                                   num(r.tem), num(r.pea)};
        if (with_judge) {
            f.push_back(num(r.judge_mean));
            f.push_back(num(r.judge_std));
        }
        f.insert(f.end(), {num(r.eff), num(r.eff_micro), std::to_string(r.n_gt), std::to_string(r.n_pred),
                           num(r.success), r.paradigm, r.model});
        for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
        out += "\n";
    }
    return out;
}

std::vector<ResultRow> parse_results_csv(std::string_view text) {
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(item);
        if (!line.empty() && line.back() == ',') out.emplace_back();
        return out;
    };
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) throw EmptyResults("results file is empty");
    const auto header = split(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const auto& required : {"task_id", "tao_p", "tao_r", "tao_f1", "tio", "tem", "pea", "eff"}) {
        if (!col.contains(required)) throw MalformedDocument(fmt::format("results file lacks column '{}'", required));
    }

    std::vector<ResultRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != header.size()) {
            throw MalformedDocument(fmt::format("results line {}: {} fields, expected {}", line_no, f.size(),
                                                header.size()));
        }
        auto text_of = [&](const char* name) { return col.contains(name) ? f[col[name]] : std::string(); };
        auto opt = [&](const char* name) -> std::optional<double> {
            const auto s = text_of(name);
            if (s.empty()) return std::nullopt;
            try {
                return std::stod(s);
            } catch (const std::exception&) {
                throw MalformedDocument(fmt::format("results line {}: bad {} '{}'", line_no, name, s));
            }
        };
        auto req = [&](const char* name) {
            auto v = opt(name);
            if (!v) throw MalformedDocument(fmt::format("results line {}: missing {}", line_no, name));
            return *v;
        };
        ResultRow r;
        r.task_id = text_of("task_id");
        r.tao_p = req("tao_p");
        r.tao_r = req("tao_r");
        r.tao_f1 = req("tao_f1");
        r.tio = req("tio");
        r.tem = req("tem");
        r.pea = req("pea");
        r.judge_mean = opt("judge_mean");
        r.judge_std = opt("judge_std");
        r.eff = opt("eff");
        r.eff_micro = opt("eff_micro");
        r.n_gt = static_cast<int>(opt("n_gt").value_or(0));
        r.n_pred = static_cast<int>(opt("n_pred").value_or(0));
        r.success = opt("success").value_or(0);
        r.paradigm = text_of("paradigm");
        r.model = text_of("model");
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ResultRow> load_results(const fs::path& file) { return parse_results_csv(read_file(file)); }

std::string render_report(const std::vector<ResultRow>& rows) {
    if (rows.empty()) throw EmptyResults("no result rows");

    // One summary row per (paradigm, model): the aggregate row when present,
    // otherwise the single task row or an aggregate over the task rows.
    std::map<std::string, std::map<std::string, std::vector<ResultRow>>> groups;
    for (const auto& r : rows) groups[r.paradigm][r.model].push_back(r);

    struct Column {
        std::string title;
        std::function<std::optional<double>(const ResultRow&)> value;  // already in display units
    };
    auto pct = [](double ResultRow::*field) {
        return [field](const ResultRow& r) -> std::optional<double> { return r.*field * 100.0; };
    };
    auto pct_opt = [](std::optional<double> ResultRow::*field) {
        return [field](const ResultRow& r) -> std::optional<double> {
            if (!(r.*field)) return std::nullopt;
            return *(r.*field) * 100.0;
        };
    };
    const std::vector<Column> columns{
        {"TAO R", pct(&ResultRow::tao_r)},
        {"TAO P", pct(&ResultRow::tao_p)},
        {"TAO F1", pct(&ResultRow::tao_f1)},
        {"TIO", pct(&ResultRow::tio)},
        {"TEM", pct(&ResultRow::tem)},
        {"PEA", pct(&ResultRow::pea)},
        {"VLM", [](const ResultRow& r) { return r.judge_mean; }},
        {"Eff-macro", pct_opt(&ResultRow::eff)},
        {"Eff-micro", pct_opt(&ResultRow::eff_micro)},
    };

    // Known paradigms in their canonical order, anything else after them.
    auto rank = [](const std::string& name) {
        const auto p = parse_paradigm(name);
        if (!p) return all_paradigms().size();
        return static_cast<std::size_t>(std::find(all_paradigms().begin(), all_paradigms().end(), *p) -
                                        all_paradigms().begin());
    };
    std::vector<std::string> order;
    for (const auto& [paradigm, _] : groups) order.push_back(paradigm);
    std::stable_sort(order.begin(), order.end(),
                     [&](const std::string& a, const std::string& b) { return rank(a) < rank(b); });

    std::string out = "# Results\n";
    for (const auto& paradigm : order) {
        const auto& models = groups.at(paradigm);
        std::vector<std::pair<std::string, ResultRow>> summary;
        for (const auto& [model, group] : models) {
            auto it = std::find_if(group.begin(), group.end(), [](const auto& r) { return r.is_aggregate(); });
            summary.emplace_back(model, it != group.end() ? *it : group.size() == 1 ? group.front() : aggregate_row(group));
        }
        out += fmt::format("\n## Paradigm: {}\n\n| Model |", paradigm.empty() ? "-" : paradigm);
        for (const auto& c : columns) out += " " + c.title + " |";
        out += "\n|---|";
        for (std::size_t i = 0; i < columns.size(); ++i) out += "---:|";
        out += "\n";

        std::vector<std::optional<std::string>> best(columns.size());
        for (std::size_t c = 0; c < columns.size(); ++c) {
            for (const auto& [model, row] : summary) {
                if (auto v = columns[c].value(row)) {
                    auto text = fmt::format("{:.2f}", *v);
                    if (!best[c] || std::stod(text) > std::stod(*best[c])) best[c] = text;
                }
            }
        }
        for (const auto& [model, row] : summary) {
            out += fmt::format("| {} |", model.empty() ? "-" : model);
            for (std::size_t c = 0; c < columns.size(); ++c) {
                const auto v = columns[c].value(row);
                if (!v) {
                    out += " - |";
                    continue;
                }
                const auto text = fmt::format("{:.2f}", *v);
                out += text == best[c] ? fmt::format(" **{}** |", text) : fmt::format(" {} |", text);
            }
            out += "\n";
        }
    }
    return out;
}

} // namespace geobench
