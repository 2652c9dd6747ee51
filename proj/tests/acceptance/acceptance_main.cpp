// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "geobench/errors.hpp"
#include "geobench/judge.hpp"
#include "geobench/layer.hpp"
#include "geobench/metrics.hpp"
#include "geobench/paradigms.hpp"
#include "geobench/suite.hpp"
#include "geobench/synthetic_tools.hpp"
#include "support/oracles.hpp"
#include "support/pea_cases.hpp"
#include "support/temp_dir.hpp"

using namespace geobench;
using test_support::TempDir;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr int kOraclePairs = 1000;
constexpr double kOracleSeconds = 5.0;
constexpr int kPeaCases = 200;
constexpr int kOrderingSamples = 10000;
constexpr int kSeparationRuns = 10;
constexpr double kJudgeStdTolerance = 1e-9;
constexpr double kJudgeStdPublished = 8.1649658;  // 8 significant digits
constexpr double kEndToEndSeconds = 60.0;

const fs::path kSuite = SYNTHETIC_SUITE_DIR;
const fs::path kHarness = HARNESS_PATH;

int failures = 0;

void report(bool ok, std::string_view name, const std::string& detail) {
    if (!ok) ++failures;
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
}

using Seq = std::vector<std::string>;

Seq random_seq(std::mt19937& rng, int max_len, int alphabet, int min_len) {
    Seq s(static_cast<std::size_t>(std::uniform_int_distribution<int>(min_len, max_len)(rng)));
    for (auto& x : s) x = std::string(1, static_cast<char>('a' + rng() % alphabet));
    return s;
}

void metric_oracle() {
    std::mt19937 rng(20250101);
    int mismatches = 0;
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < kOraclePairs; ++i) {
        const int alphabet = std::uniform_int_distribution<int>(1, 8)(rng);
        const auto pred = random_seq(rng, 12, alphabet, 0);
        const auto gold = random_seq(rng, 12, alphabet, 1);
        const auto t = tao(pred, gold);
        const auto o = oracle::set_scores(pred, gold);
        const double n = static_cast<double>(gold.size());
        if (t.precision != o.p || t.recall != o.r || t.f1 != o.f1) ++mismatches;
        if (tio(pred, gold) != static_cast<double>(oracle::lcs(pred, gold)) / n) ++mismatches;
        if (tem(pred, gold) != static_cast<double>(oracle::prefix(pred, gold)) / n) ++mismatches;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(mismatches == 0 && secs < kOracleSeconds, "metric-oracle",
           fmt::format("{} pairs, {} mismatches, {:.2f} s (limit {} s, oracle time included)", kOraclePairs,
                       mismatches, secs, kOracleSeconds));
}

void pea_properties() {
    std::mt19937 rng(7);
    const auto reg = test_support::property_registry();
    int a = 0, b = 0, c = 0, d = 0, deletions = 0;
    for (int i = 0; i < kPeaCases; ++i) {
        auto pc = test_support::make_pea_case(rng, i % 2 == 0);
        const auto& ws = pc.workspace->path();
        const auto base = pea(pc.trajectory, pc.gold, reg, ws);
        const double n = static_cast<double>(pc.gold.size());

        if (pea(test_support::with_failed_retries(rng, pc), pc.gold, reg, ws).score != base.score) ++a;
        if (pea(test_support::with_restyled_maps(rng, pc), pc.gold, reg, ws).score != base.score) ++d;

        // Deleting the file of a passing step costs exactly that step.
        for (std::size_t g = 0; g < pc.gold_record.size(); ++g) {
            if (!base.alignment.per_step_pass[g]) continue;
            const auto file = ws / pc.trajectory.records[pc.gold_record[g]].args["out"].get<std::string>();
            fs::rename(file, file.string() + ".bak");
            const double after = pea(pc.trajectory, pc.gold, reg, ws).score;
            if (!(after < base.score) || std::abs(base.score - after - 1.0 / n) > 1e-12) ++c;
            fs::rename(file.string() + ".bak", file);
            ++deletions;
        }

        // Renaming moves files on disk, so it goes last.
        if (pea(test_support::with_renamed_outputs(rng, pc), pc.gold, reg, ws).score != base.score) ++b;
    }
    report(a + b + c + d == 0 && deletions > 0, "pea-properties",
           fmt::format("{} trajectories; violations (a) retries {} (b) renaming {} (c) deletion {} of {} (d) style {}",
                       kPeaCases, a, b, c, deletions, d));
}

void ordering() {
    std::mt19937 rng(99);
    int violations = 0;
    for (int i = 0; i < kOrderingSamples; ++i) {
        const int alphabet = std::uniform_int_distribution<int>(1, 8)(rng);
        const auto pred = random_seq(rng, 12, alphabet, 0);
        const auto gold = random_seq(rng, 12, alphabet, 1);
        if (tem(pred, gold) > tio(pred, gold)) ++violations;
    }
    report(violations == 0, "tem-le-tio", fmt::format("{} samples, {} violations", kOrderingSamples, violations));
}

TaskSpec limits_task(const fs::path& data) {
    write_layer({"EPSG:4326", {{1, 0, 0, 1, 1, 5, true}}}, data / "parcels.json");
    TaskSpec t;
    t.id = "limits";
    t.domain = "Spatial Data Management";
    t.task_description = "limits";
    t.data_description = {{"parcels.json", ""}};
    t.gold_toolchain = {{{1, "copy_layer", {{"input", "parcels.json"}, {"output", "c.json"}}}}};
    t.toolchain_length = 1;
    t.result_filename = "c.json";
    return t;
}

void sandbox_limits() {
    ToolRegistry reg;
    register_synthetic_tools(reg);
    TempDir data, runs;
    const auto task = limits_task(data.path());

    ManualClock clock;
    auto ws = Workspace::create(task, data.path(), runs.path(), {}, clock);
    const auto slow = ws.execute_tool(reg, "sleep_tool", {{"seconds", 400}});
    const bool timeout_ok = slow.status == CallStatus::timeout && slow.duration >= 360.0 && slow.duration <= 361.0;

    // The same enforcement on the wall clock, scaled down.
    auto real = Workspace::create(task, data.path(), runs.path(), {.call_timeout = Seconds{0.5}});
    const auto real_slow = real.execute_tool(reg, "sleep_tool", {{"seconds", 3}});
    const bool real_ok = real_slow.status == CallStatus::timeout && real_slow.duration >= 0.5 &&
                         real_slow.duration <= 0.5 + kTimeoutGrace.count();

    auto capped = Workspace::create(task, data.path(), runs.path(), {}, clock);
    bool cap_ok = false;
    for (int i = 0; i < 30; ++i) capped.execute_tool(reg, "inspect_layer", {{"input", "parcels.json"}});
    try {
        capped.execute_tool(reg, "inspect_layer", {{"input", "parcels.json"}});
    } catch (const StepCapExceeded&) {
        cap_ok = capped.records().size() == 30;
    }

    auto locked = Workspace::create(task, data.path(), runs.path(), {}, clock);
    const ArgMap copy{{"input", "parcels.json"}, {"output", "c.json"}};
    locked.execute_tool(reg, "copy_layer", copy);
    const auto second = locked.execute_tool(reg, "copy_layer", copy);
    const bool lock_ok = second.error_category == ErrorCategory::file_locked;

    report(timeout_ok && real_ok && cap_ok && lock_ok, "sandbox-limits",
           fmt::format("400 s call stopped at {:.3f} s (virtual clock, window [360, 361]); 3 s call under a 0.5 s "
                       "wall-clock limit stopped at {:.3f} s; call 31 {}; second write {}",
                       slow.duration, real_slow.duration, cap_ok ? "raised StepCapExceeded" : "was not refused",
                       lock_ok ? "file_locked" : "not locked"));
}

void paradigm_separation() {
    ToolRegistry reg;
    register_synthetic_tools(reg);
    const auto task = load_task_spec(kSuite / "road-corridors.task.json");
    const auto script = kSuite / "road-corridors.script.json";

    struct Seen {
        std::set<std::string> logs;
        double pea = -1, eff = -1;
        bool stable = true;
        bool corrected = false;
    };
    auto replay = [&](Paradigm p) {
        Seen s;
        for (int i = 0; i < kSeparationRuns; ++i) {
            TempDir runs;
            ManualClock clock;
            auto ws = Workspace::create(task, kSuite / "data", runs.path(), {}, clock);
            auto model = ScriptedModel::load(script);
            const auto t = run_paradigm(p, task, reg, ws, model);
            const auto r = score_trajectory(t, task, reg, ws.root());
            if (i > 0 && (r.pea != s.pea || r.eff_task != s.eff)) s.stable = false;
            s.pea = r.pea;
            s.eff = r.eff_task;
            s.logs.insert(serialize_trajectory(t));
            for (const auto& rec : t.records) {
                if (rec.tool == "buffer_features" && rec.status == CallStatus::success) s.corrected = true;
            }
        }
        s.stable = s.stable && s.logs.size() == 1;
        return s;
    };
    const auto ps = replay(Paradigm::plan_solve);
    const auto pr = replay(Paradigm::plan_react);
    const bool ok = ps.eff == 1.0 && ps.pea < 1.0 && !ps.corrected && pr.pea == 1.0 && pr.eff < 1.0 &&
                    pr.corrected && ps.stable && pr.stable;
    report(ok, "paradigm-separation",
           fmt::format("plan-solve Eff {:.4f} PEA {:.4f}; plan-react Eff {:.4f} PEA {:.4f}; identical logs over {} "
                       "runs: {}",
                       ps.eff, ps.pea, pr.eff, pr.pea, kSeparationRuns, ps.stable && pr.stable ? "yes" : "no"));
}

void efficiency_arithmetic() {
    const std::vector<EffSample> tasks{{5, 5}, {5, 10}};
    const auto e = efficiency(tasks);
    const bool ok = e && e->macro == 0.75 && e->micro == 10.0 / 15.0;
    report(ok, "efficiency",
           fmt::format("macro {:.17g} (want 0.75), micro {:.17g} (want 2/3)", e ? e->macro : -1, e ? e->micro : -1));
}

void judge_aggregation() {
    const int scores[] = {60, 70, 80};
    MockJudge mock(MockJudge::score_replies(scores));
    const auto v = judge_pair("Map the corridors.", Image(16, 16), mock, kDefaultJudgeRepeats);
    const double exact = std::sqrt(200.0 / 3.0);
    const bool ok = mock.calls() == 3 && v.mean == 70.0 && std::abs(v.std - exact) <= kJudgeStdTolerance &&
                    std::abs(v.std - kJudgeStdPublished) < 5e-8;
    report(ok, "judge-aggregation",
           fmt::format("{} calls, mean {}, std {:.10f} (|std - sqrt(200/3)| = {:.1e}, tolerance {:.0e}; "
                       "8.1649658 is its 8-digit rounding)",
                       mock.calls(), v.mean, v.std, std::abs(v.std - exact), kJudgeStdTolerance));
}

std::string read_text(const fs::path& file) {
    std::ifstream in(file);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void end_to_end() {
    TempDir out;
    const auto cmd = fmt::format("\"{}\" run --tasks \"{}\" --paradigm plan-react --model scripted "
                                 "--judge-backend mock --out \"{}\" > \"{}\" 2>&1",
                                 kHarness.string(), kSuite.string(), out.path().string(), (out / "log.txt").string());
    const auto start = std::chrono::steady_clock::now();
    const int rc = std::system(cmd.c_str());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const auto md = read_text(out / "report.md");
    const std::string header = "| Model | TAO R | TAO P | TAO F1 | TIO | TEM | PEA | VLM | Eff-macro | Eff-micro |";
    bool rows_ok = false;
    std::size_t task_rows = 0;
    try {
        const auto rows = load_results(out / "results.csv");
        rows_ok = !rows.empty() && rows.back().is_aggregate();
        for (const auto& r : rows) {
            if (!r.is_aggregate()) ++task_rows;
            rows_ok = rows_ok && r.judge_mean && r.judge_std && r.eff && r.eff_micro;
        }
    } catch (const std::exception&) {
    }
    const bool ok = rc == 0 && secs < kEndToEndSeconds && md.find(header) != std::string::npos && rows_ok &&
                    task_rows == 5;
    report(ok, "end-to-end",
           fmt::format("exit {}, {:.2f} s (limit {} s), {} task rows + aggregate, all columns populated: {}, "
                       "report columns match: {}",
                       rc, secs, kEndToEndSeconds, task_rows, rows_ok ? "yes" : "no",
                       md.find(header) != std::string::npos ? "yes" : "no"));
}

} // namespace

int main() {
    auto guarded = [](std::string_view name, void (*fn)()) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(false, name, fmt::format("raised: {}", e.what()));
        }
    };
    guarded("metric-oracle", metric_oracle);
    guarded("pea-properties", pea_properties);
    guarded("tem-le-tio", ordering);
    guarded("sandbox-limits", sandbox_limits);
    guarded("paradigm-separation", paradigm_separation);
    guarded("efficiency", efficiency_arithmetic);
    guarded("judge-aggregation", judge_aggregation);
    guarded("end-to-end", end_to_end);
    std::cout << (failures == 0 ? "ALL PASS" : fmt::format("{} FAILED", failures)) << std::endl;
    return failures == 0 ? 0 : 1;
}
