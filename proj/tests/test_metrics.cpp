#include <gtest/gtest.h>

#include <random>

#include "geobench/errors.hpp"
#include "geobench/metrics.hpp"
#include "support/oracles.hpp"
#include "support/pea_cases.hpp"
#include "support/temp_dir.hpp"

using namespace geobench;
using geobench::test_support::TempDir;

namespace {

using Seq = std::vector<std::string>;

Seq random_seq(std::mt19937& rng, int max_len, int alphabet, int min_len = 0) {
    Seq s(std::uniform_int_distribution<int>(min_len, max_len)(rng));
    for (auto& x : s) x = std::string(1, static_cast<char>('a' + rng() % alphabet));
    return s;
}

ToolCallRecord rec(int step, std::string tool, ArgMap args, CallStatus status = CallStatus::success) {
    ToolCallRecord r;
    r.step = step;
    r.tool = std::move(tool);
    r.args = std::move(args);
    r.status = status;
    if (status != CallStatus::success) {
        r.error_message = "failed";
        r.error_category = ErrorCategory::bad_parameter;
    }
    return r;
}

ToolRegistry gis_registry() {
    ToolRegistry reg;
    auto exec = std::make_shared<test_support::NullExecutor>();
    reg.register_tool({"buffer",
                       "",
                       {{.name = "in", .kind = ParamKind::path, .role = ParamRole::input_path},
                        {.name = "dist", .kind = ParamKind::real},
                        {.name = "out", .kind = ParamKind::path, .role = ParamRole::output_path}}},
                      exec);
    reg.register_tool({"clip",
                       "",
                       {{.name = "in", .kind = ParamKind::path, .role = ParamRole::input_path},
                        {.name = "mask", .kind = ParamKind::path, .role = ParamRole::input_path},
                        {.name = "out", .kind = ParamKind::path, .role = ParamRole::output_path}}},
                      exec);
    reg.register_tool({"classify",
                       "",
                       {{.name = "in", .kind = ParamKind::path, .role = ParamRole::input_path},
                        {.name = "breaks", .kind = ParamKind::list},
                        {.name = "fields", .kind = ParamKind::list, .set_semantics = true},
                        {.name = "out", .kind = ParamKind::path, .role = ParamRole::output_path}}},
                      exec);
    return reg;
}

GoldToolchain buffer_clip_gold() {
    return {{{1, "buffer", {{"in", "r.geojson"}, {"dist", 100}, {"out", "b.geojson"}}},
             {2, "clip", {{"in", "b.geojson"}, {"mask", "m.geojson"}, {"out", "c.geojson"}}}}};
}

Trajectory recovered_run() {
    Trajectory t;
    t.task_id = "t";
    t.records = {rec(1, "buffer", {{"in", "r.geojson"}, {"dist", "100m"}, {"out", "b.geojson"}},
                     CallStatus::rejected),
                 rec(2, "buffer", {{"in", "r.geojson"}, {"dist", 100}, {"out", "buf1.geojson"}}),
                 rec(3, "clip", {{"in", "buf1.geojson"}, {"mask", "m.geojson"}, {"out", "c.geojson"}})};
    return t;
}

} // namespace

TEST(Tao, SpecExamples) {
    EXPECT_EQ(tao(Seq{"a", "b", "c"}, Seq{"a", "b", "c"}), (TaoScore{1, 1, 1}));
    EXPECT_EQ(tao(Seq{"a", "b"}, Seq{"c", "d"}).f1, 0.0);
    auto s = tao(Seq{"a", "b", "c", "d"}, Seq{"a", "b", "c"});
    EXPECT_DOUBLE_EQ(s.precision, 0.75);
    EXPECT_DOUBLE_EQ(s.recall, 1.0);
    EXPECT_DOUBLE_EQ(s.f1, 6.0 / 7.0);
}

TEST(Tao, DuplicatesCollapse) {
    auto s = tao(Seq{"a", "a", "a"}, Seq{"a", "b"});
    EXPECT_DOUBLE_EQ(s.precision, 1.0);
    EXPECT_DOUBLE_EQ(s.recall, 0.5);
}

TEST(Tao, EmptyPrediction) {
    auto s = tao(Seq{}, Seq{"a"});
    EXPECT_EQ(s, (TaoScore{0, 0, 0}));
}

TEST(Metrics, EmptyGoldThrows) {
    EXPECT_THROW(tao(Seq{"a"}, Seq{}), EmptyGold);
    EXPECT_THROW(tio(Seq{"a"}, Seq{}), EmptyGold);
    EXPECT_THROW(tem(Seq{"a"}, Seq{}), EmptyGold);
}

TEST(Tio, SpecExamples) {
    EXPECT_DOUBLE_EQ(tio(Seq{"a", "b"}, Seq{"a", "b"}), 1.0);
    EXPECT_DOUBLE_EQ(tio(Seq{"a", "x", "b", "d"}, Seq{"a", "b", "c", "d"}), 0.75);
    EXPECT_DOUBLE_EQ(tio(Seq{}, Seq{"a"}), 0.0);
}

TEST(Tem, SpecExamples) {
    EXPECT_DOUBLE_EQ(tem(Seq{"a", "b"}, Seq{"a", "b"}), 1.0);
    EXPECT_DOUBLE_EQ(tem(Seq{"a", "b", "x", "c"}, Seq{"a", "b", "c"}), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(tem(Seq{"x", "a"}, Seq{"a"}), 0.0);
}

TEST(SequenceMetrics, MatchOracles) {
    std::mt19937 rng(7);
    for (int i = 0; i < 500; ++i) {
        const auto pred = random_seq(rng, 12, 8);
        const auto gold = random_seq(rng, 12, 8, 1);
        ASSERT_EQ(lcs_length(pred, gold), oracle::lcs(pred, gold));
        ASSERT_EQ(common_prefix_length(pred, gold), oracle::prefix(pred, gold));
        const auto o = oracle::set_scores(pred, gold);
        const auto s = tao(pred, gold);
        ASSERT_EQ(s.precision, o.p);
        ASSERT_EQ(s.recall, o.r);
        ASSERT_EQ(s.f1, o.f1);
        ASSERT_LE(tem(pred, gold), tio(pred, gold));
    }
}

TEST(SequenceMetrics, NonGoldInsertionsKeepTioAndRecall) {
    std::mt19937 rng(11);
    for (int i = 0; i < 300; ++i) {
        const auto pred = random_seq(rng, 10, 5);
        const auto gold = random_seq(rng, 10, 5, 1);
        auto noisy = pred;
        const int extra = 1 + rng() % 4;
        for (int k = 0; k < extra; ++k) {
            noisy.insert(noisy.begin() + rng() % (noisy.size() + 1), "zz" + std::to_string(k));
        }
        ASSERT_EQ(tio(noisy, gold), tio(pred, gold));
        ASSERT_EQ(tao(noisy, gold).recall, tao(pred, gold).recall);
        ASSERT_LE(tao(noisy, gold).precision, tao(pred, gold).precision);
    }
}

TEST(Pea, RecoveredRetryWithRenamedOutput) {
    TempDir ws;
    ws.write("buf1.geojson");
    ws.write("c.geojson");
    auto result = pea(recovered_run(), buffer_clip_gold(), gis_registry(), ws.path());
    EXPECT_DOUBLE_EQ(result.score, 1.0);
    EXPECT_EQ(result.alignment.mapping, (std::map<std::string, std::string>{{"b.geojson", "buf1.geojson"}}));
    EXPECT_EQ(result.alignment.pairs[0].record_step, 2);
    EXPECT_EQ(result.alignment.pairs[1].record_step, 3);
    EXPECT_EQ(result.alignment.per_step_pass, (std::vector<bool>{true, true}));
}

TEST(Pea, MissingSecondToolHalves) {
    TempDir ws;
    ws.write("buf1.geojson");
    auto t = recovered_run();
    t.records.pop_back();
    auto result = pea(t, buffer_clip_gold(), gis_registry(), ws.path());
    EXPECT_DOUBLE_EQ(result.score, 0.5);
    EXPECT_FALSE(result.alignment.pairs[1].record_step);
}

TEST(Pea, DeletedResultFailsExistence) {
    TempDir ws;
    ws.write("buf1.geojson");
    auto result = pea(recovered_run(), buffer_clip_gold(), gis_registry(), ws.path());
    EXPECT_DOUBLE_EQ(result.score, 0.5);
    EXPECT_EQ(result.alignment.per_step_pass, (std::vector<bool>{true, false}));
}

TEST(Pea, UnmappedDownstreamReferenceFails) {
    TempDir ws;
    ws.write("buf1.geojson");
    ws.write("c.geojson");
    auto t = recovered_run();
    t.records[2].args["in"] = "b.geojson";
    EXPECT_DOUBLE_EQ(pea(t, buffer_clip_gold(), gis_registry(), ws.path()).score, 0.5);
}

TEST(Pea, LastAttemptFailingCounts) {
    TempDir ws;
    ws.write("b.geojson");
    ws.write("c.geojson");
    Trajectory t;
    t.records = {rec(1, "buffer", {{"in", "r.geojson"}, {"dist", 100}, {"out", "b.geojson"}}),
                 rec(2, "buffer", {{"in", "r.geojson"}, {"dist", "abc"}, {"out", "b2.geojson"}},
                     CallStatus::rejected),
                 rec(3, "clip", {{"in", "b.geojson"}, {"mask", "m.geojson"}, {"out", "c.geojson"}})};
    auto result = pea(t, buffer_clip_gold(), gis_registry(), ws.path());
    EXPECT_EQ(result.alignment.pairs[0].record_step, 2);
    EXPECT_FALSE(result.alignment.per_step_pass[0]);
    // b.geojson is now mapped to b2.geojson, which clip did not read.
    EXPECT_FALSE(result.alignment.per_step_pass[1]);
}

TEST(Pea, AlignmentIsMonotone) {
    TempDir ws;
    Trajectory t;
    t.records = {rec(1, "clip", {}), rec(2, "buffer", {})};
    auto result = pea(t, buffer_clip_gold(), gis_registry(), ws.path());
    EXPECT_FALSE(result.alignment.pairs[0].record_step);
    EXPECT_EQ(result.alignment.pairs[1].record_step, 1);
}

TEST(Pea, RetryOfRepeatedGoldToolShiftsAlignment) {
    // Gold uses buffer twice. A failed retry of the second buffer sits before
    // its final attempt, so the backward pass hands it to the first gold step.
    TempDir ws;
    ws.write("b1.geojson");
    ws.write("b2.geojson");
    GoldToolchain gold{{{1, "buffer", {{"in", "r.geojson"}, {"dist", 1}, {"out", "b1.geojson"}}},
                        {2, "buffer", {{"in", "b1.geojson"}, {"dist", 2}, {"out", "b2.geojson"}}}}};
    Trajectory t;
    t.records = {rec(1, "buffer", {{"in", "r.geojson"}, {"dist", 1}, {"out", "b1.geojson"}}),
                 rec(2, "buffer", {{"in", "b1.geojson"}, {"dist", "x"}, {"out", "b2.geojson"}},
                     CallStatus::rejected),
                 rec(3, "buffer", {{"in", "b1.geojson"}, {"dist", 2}, {"out", "b2.geojson"}})};
    auto result = pea(t, gold, gis_registry(), ws.path());
    EXPECT_EQ(result.alignment.pairs[0].record_step, 2);
    // Its output name then maps b1 to b2, which breaks the second step too.
    EXPECT_DOUBLE_EQ(result.score, 0.0);
}

TEST(Pea, UnknownGoldToolIsConfigurationError) {
    TempDir ws;
    GoldToolchain gold{{{1, "nope", {}}}};
    EXPECT_THROW(pea(Trajectory{}, gold, gis_registry(), ws.path()), UnknownTool);
}

TEST(Pea, EmptyGold) {
    TempDir ws;
    EXPECT_THROW(pea(Trajectory{}, GoldToolchain{}, gis_registry(), ws.path()), EmptyGold);
}

TEST(Pea, MissingGoldParamInRecordFails) {
    TempDir ws;
    ws.write("b.geojson");
    GoldToolchain gold{{buffer_clip_gold().steps[0]}};
    Trajectory t;
    t.records = {rec(1, "buffer", {{"in", "r.geojson"}, {"out", "b.geojson"}})};
    EXPECT_DOUBLE_EQ(pea(t, gold, gis_registry(), ws.path()).score, 0.0);
}

TEST(EquivalentParam, NumericTolerance) {
    ParamSpec real{.name = "d", .kind = ParamKind::real};
    EXPECT_TRUE(equivalent_param(real, 100, 100.0));
    EXPECT_TRUE(equivalent_param(real, 100, "100"));
    EXPECT_TRUE(equivalent_param(real, 100, 100 * (1 + 1e-12)));
    EXPECT_FALSE(equivalent_param(real, 100, 100.01));
    EXPECT_FALSE(equivalent_param(real, 100, "100m"));
    real.numeric_tolerance = 1e-3;
    EXPECT_TRUE(equivalent_param(real, 100, 100.01));
}

TEST(EquivalentParam, Lists) {
    ParamSpec ordered{.name = "l", .kind = ParamKind::list};
    EXPECT_TRUE(equivalent_param(ordered, Json::array({1, 2, 3}), Json::array({1, 2, 3})));
    EXPECT_FALSE(equivalent_param(ordered, Json::array({1, 2, 3}), Json::array({3, 2, 1})));
    ParamSpec unordered = ordered;
    unordered.set_semantics = true;
    EXPECT_TRUE(equivalent_param(unordered, Json::array({"a", "b"}), Json::array({"b", "a"})));
    EXPECT_FALSE(equivalent_param(unordered, Json::array({"a", "b"}), Json::array({"a", "a"})));
}

TEST(EquivalentParam, PathsThroughMapping) {
    ParamSpec in{.name = "in", .kind = ParamKind::path, .role = ParamRole::input_path};
    EXPECT_TRUE(equivalent_param(in, "./a/b.json", "a/b.json"));
    EXPECT_TRUE(equivalent_param(in, "b.json", "x.json", {{"b.json", "x.json"}}));
    EXPECT_FALSE(equivalent_param(in, "b.json", "b.json", {{"b.json", "x.json"}}));
}

TEST(PeaProperties, FailedRetriesRenamesDeletionsAndStyle) {
    std::mt19937 rng(2024);
    const auto reg = test_support::property_registry();
    for (int i = 0; i < 60; ++i) {
        auto c = test_support::make_pea_case(rng, true);
        const double base = pea(c.trajectory, c.gold, reg, c.workspace->path()).score;
        ASSERT_EQ(pea(test_support::with_failed_retries(rng, c), c.gold, reg, c.workspace->path()).score, base);
        ASSERT_EQ(pea(test_support::with_restyled_maps(rng, c), c.gold, reg, c.workspace->path()).score, base);
        ASSERT_EQ(pea(test_support::with_renamed_outputs(rng, c), c.gold, reg, c.workspace->path()).score, base);
    }
    for (int i = 0; i < 60; ++i) {
        auto c = test_support::make_pea_case(rng, false);
        const auto n = static_cast<double>(c.gold.size());
        ASSERT_EQ(pea(c.trajectory, c.gold, reg, c.workspace->path()).score, 1.0);
        for (int idx : c.gold_record) {
            const auto file = c.workspace->path() / c.trajectory.records[idx].args["out"].get<std::string>();
            std::filesystem::remove(file);
            ASSERT_NEAR(pea(c.trajectory, c.gold, reg, c.workspace->path()).score, 1.0 - 1.0 / n, 1e-12);
            std::ofstream(file) << "x";
        }
    }
}

TEST(Efficiency, SpecExamples) {
    std::vector<EffSample> one{{5, 5}};
    EXPECT_EQ(efficiency(one)->macro, 1.0);
    EXPECT_EQ(efficiency(one)->micro, 1.0);
    EXPECT_EQ(step_efficiency({5, 3}), 1.0);
    std::vector<EffSample> two{{5, 5}, {5, 10}};
    EXPECT_EQ(efficiency(two)->macro, 0.75);
    EXPECT_EQ(efficiency(two)->micro, 10.0 / 15.0);
}

TEST(Efficiency, EmptyIsAbsent) {
    EXPECT_FALSE(efficiency({}).has_value());
}

TEST(Efficiency, Bounds) {
    std::mt19937 rng(3);
    for (int i = 0; i < 200; ++i) {
        std::vector<EffSample> xs(1 + rng() % 8);
        for (auto& x : xs) x = {1 + static_cast<int>(rng() % 9), static_cast<int>(rng() % 30)};
        auto e = *efficiency(xs);
        ASSERT_GE(e.macro, 0.0);
        ASSERT_LE(e.macro, 1.0);
        ASSERT_GE(e.micro, 0.0);
        ASSERT_LE(e.micro, 1.0);
    }
}

TEST(Efficiency, MacroEqualsMicroWhenDenominatorsAgree) {
    // Equal n_gt alone is not enough: {(5,5),(5,10)} gives 0.75 vs 2/3.
    std::mt19937 rng(4);
    for (int i = 0; i < 200; ++i) {
        std::vector<EffSample> xs(1 + rng() % 8);
        const int denom = 1 + static_cast<int>(rng() % 20);
        for (auto& x : xs) {
            const int gt = 1 + static_cast<int>(rng() % denom);
            x = {gt, gt == denom ? static_cast<int>(rng() % (denom + 1)) : denom};
        }
        auto e = *efficiency(xs);
        ASSERT_NEAR(e.macro, e.micro, 1e-12);
    }
}

TEST(ScoreTrajectory, SuccessNeedsCompletedRunAndMappedResult) {
    TempDir ws;
    ws.write("buf1.geojson");
    ws.write("c.geojson");
    TaskSpec task;
    task.gold_toolchain = buffer_clip_gold();
    task.result_filename = "c.geojson";
    auto r = score_trajectory(recovered_run(), task, gis_registry(), ws.path());
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.n_pred, 3);
    EXPECT_DOUBLE_EQ(r.eff_task, 2.0 / 3.0);
    auto aborted = recovered_run();
    aborted.terminal = Terminal::aborted;
    EXPECT_FALSE(score_trajectory(aborted, task, gis_registry(), ws.path()).success);
    std::filesystem::remove(ws / "c.geojson");
    EXPECT_FALSE(score_trajectory(recovered_run(), task, gis_registry(), ws.path()).success);
}
