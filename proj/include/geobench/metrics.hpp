#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geobench/registry.hpp"
#include "geobench/trajectory.hpp"

namespace geobench {

struct TaoScore {
    double precision = 0;
    double recall = 0;
    double f1 = 0;

    bool operator==(const TaoScore&) const = default;
};

// Sequence forms work on tool-name lists; the Trajectory forms use every
// record regardless of status. All throw EmptyGold on an empty gold list.
TaoScore tao(const std::vector<std::string>& pred, const std::vector<std::string>& gold);
double tio(const std::vector<std::string>& pred, const std::vector<std::string>& gold);
double tem(const std::vector<std::string>& pred, const std::vector<std::string>& gold);

TaoScore tao(const Trajectory& trajectory, const GoldToolchain& gold);
double tio(const Trajectory& trajectory, const GoldToolchain& gold);
double tem(const Trajectory& trajectory, const GoldToolchain& gold);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);
std::size_t common_prefix_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct PeaAlignment {
    struct Pair {
        int gold_index = 0;              // 1-based gold step index
        std::optional<int> record_step;  // matched record, if any
        bool operator==(const Pair&) const = default;
    };
    std::vector<Pair> pairs;                          // in gold order
    std::map<std::string, std::string> mapping;      // gold path -> predicted path
    std::vector<bool> per_step_pass;                  // in gold order
    std::vector<std::string> notes;                   // why a step failed

    bool operator==(const PeaAlignment&) const = default;
};

struct PeaResult {
    double score = 0;
    PeaAlignment alignment;
};

// Last-attempt alignment against the gold toolchain, with output-path mapping
// and a physical existence check of every output the matched records declare.
// `workspace` is the directory the trajectory ran in. Throws UnknownTool when
// a gold tool is missing from the registry, EmptyGold on an empty toolchain.
PeaResult pea(const Trajectory& trajectory, const GoldToolchain& gold, const ToolRegistry& registry,
              const std::filesystem::path& workspace);

// True when `pred` carries the same value as `gold` under `spec`. Input paths
// in `gold` are rewritten through `mapping` first.
bool equivalent_param(const ParamSpec& spec, const Json& gold, const Json& pred,
                      const std::map<std::string, std::string>& mapping = {});

struct EffSample {
    int n_gt = 0;
    int n_pred = 0;
};

struct Efficiency {
    double macro = 0;
    double micro = 0;
};

double step_efficiency(EffSample sample);
// nullopt when no task completed: the averages are undefined, not zero.
std::optional<Efficiency> efficiency(std::span<const EffSample> successful);

struct JudgeSummary {
    double mean = 0;
    double std = 0;
};

struct MetricReport {
    TaoScore tao;
    double tio = 0;
    double tem = 0;
    double pea = 0;
    std::optional<JudgeSummary> judge;
    double eff_task = 0;
    int n_gt = 0;
    int n_pred = 0;
    bool success = false;
};

// Path the task's result file has in the workspace: the gold name pushed
// through the PEA mapping.
std::string mapped_result_path(const TaskSpec& task, const PeaAlignment& alignment);

// Everything but the judge. A task succeeds when the run completed and its
// (mapped) result file exists.
MetricReport score_trajectory(const Trajectory& trajectory, const TaskSpec& task,
                              const ToolRegistry& registry, const std::filesystem::path& workspace);

} // namespace geobench
