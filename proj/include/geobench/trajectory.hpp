#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace geobench {

using Json = nlohmann::json;

// Tool arguments: parameter name -> scalar, flat list of scalars, or path string.
using ArgMap = std::map<std::string, Json>;

inline constexpr int kDefaultMaxSteps = 30;
inline constexpr double kDefaultCallTimeoutSeconds = 360.0;

enum class ErrorCategory {
    crs_mismatch,
    topology_error,
    file_locked,
    missing_file,
    bad_parameter,
    timeout,
    internal,
};

std::string_view to_string(ErrorCategory category);
std::optional<ErrorCategory> parse_error_category(std::string_view text);

enum class CallStatus { success, error, timeout, rejected };

std::string_view to_string(CallStatus status);
std::optional<CallStatus> parse_call_status(std::string_view text);

enum class Terminal { completed, step_cap_exceeded, aborted };

std::string_view to_string(Terminal terminal);
std::optional<Terminal> parse_terminal(std::string_view text);

struct DataInput {
    std::string path;      // relative to the data root
    std::string metadata;  // free-text description

    bool operator==(const DataInput&) const = default;
};

struct GoldStep {
    int index = 0;  // 1-based
    std::string tool;
    ArgMap args;

    bool operator==(const GoldStep&) const = default;
};

struct GoldToolchain {
    std::vector<GoldStep> steps;

    std::size_t size() const { return steps.size(); }
    bool empty() const { return steps.empty(); }
    std::vector<std::string> tool_sequence() const;

    bool operator==(const GoldToolchain&) const = default;
};

struct TaskSpec {
    std::string id;
    std::string domain;
    std::string task_description;
    std::vector<DataInput> data_description;
    std::string drawing_style;
    int toolchain_length = 0;
    GoldToolchain gold_toolchain;
    std::string result_filename;
    std::vector<std::string> layers;  // bottom-first stacking order

    bool operator==(const TaskSpec&) const = default;
};

struct ToolCallRecord {
    int step = 0;  // 1-based
    std::string tool;
    ArgMap args;  // as issued by the agent, before normalization
    CallStatus status = CallStatus::success;
    std::optional<std::string> error_message;
    std::optional<ErrorCategory> error_category;
    double duration = 0.0;  // seconds
    std::vector<std::string> outputs_declared;
    std::optional<std::string> observation;  // tool output text on success
    std::optional<int> plan_step;            // set by plan-based paradigms

    bool operator==(const ToolCallRecord&) const = default;
};

struct Trajectory {
    std::string task_id;
    std::vector<ToolCallRecord> records;
    Terminal terminal = Terminal::completed;
    std::optional<std::string> final_answer;

    std::vector<std::string> tool_sequence() const;

    bool operator==(const Trajectory&) const = default;
};

// The six GIS domains a task may belong to, in canonical spelling.
const std::vector<std::string>& known_domains();

// Accepts any case and '_' / '-' / ' ' as separators; returns the canonical name.
std::optional<std::string> canonical_domain(std::string_view text);

// True for a relative path that stays inside its root after lexical normalization.
bool is_contained_relative(std::string_view path);

// Lexically normalized, '/'-separated relative form ("./a//b.geojson" -> "a/b.geojson").
std::string normalize_relative_path(std::string_view path);

// Argument values must be scalars or flat lists of scalars.
bool is_flat_arg_value(const Json& value);

TaskSpec parse_task_spec(std::string_view document);
std::string serialize_task_spec(const TaskSpec& task);
TaskSpec load_task_spec(const std::filesystem::path& file);

// Throws SchemaViolation when an invariant of TaskSpec does not hold.
void check_task_invariants(const TaskSpec& task);

// Line-delimited log: a header line followed by one line per record.
std::string serialize_trajectory(const Trajectory& trajectory);
Trajectory parse_trajectory(std::string_view document);
Trajectory load_trajectory(const std::filesystem::path& file);
void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& file);

Json to_json(const ToolCallRecord& record);
ToolCallRecord record_from_json(const Json& j);

} // namespace geobench
