#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geobench/registry.hpp"
#include "geobench/trajectory.hpp"

namespace geobench {

using Seconds = std::chrono::duration<double>;

// Time source for the sandbox. Deadlines, durations and cooperative sleeps
// all go through a Clock so that limits can be exercised on a virtual
// timeline as well as in real time.
class Clock {
public:
    virtual ~Clock() = default;
    virtual Seconds now() const = 0;
    virtual void sleep_for(Seconds duration) = 0;
};

class SteadyClock final : public Clock {
public:
    Seconds now() const override;
    void sleep_for(Seconds duration) override;

    static SteadyClock& instance();
};

// Virtual clock: sleeping advances time instantly. Thread-safe.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Seconds start = Seconds{0}) : now_(start) {}
    Seconds now() const override;
    void sleep_for(Seconds duration) override;
    void advance(Seconds duration) { sleep_for(duration); }

private:
    mutable std::mutex mutex_;
    Seconds now_;
};

struct Limits {
    int max_steps = kDefaultMaxSteps;
    Seconds call_timeout{kDefaultCallTimeoutSeconds};
};

// Maximum slack allowed between the configured timeout and the recorded duration.
inline constexpr Seconds kTimeoutGrace{1.0};

struct DenoisedError {
    ErrorCategory category = ErrorCategory::internal;
    std::string message;  // single line, at most kMaxDenoisedLength bytes
    std::optional<std::string> hint;

    bool operator==(const DenoisedError&) const = default;
};

inline constexpr std::size_t kMaxDenoisedLength = 300;

// Distills raw failure text (tracebacks, multi-line logs) into a categorized
// one-line message. A category hint, when given, wins over pattern rules.
DenoisedError denoise(std::string_view raw, std::optional<ErrorCategory> hint = std::nullopt);

// Fixed remediation advice shown to agents next to a categorized error.
std::optional<std::string> remediation_hint(ErrorCategory category);

// Raised inside tool bodies once their deadline has passed.
class DeadlineExceeded : public std::exception {
public:
    const char* what() const noexcept override { return "call deadline exceeded"; }
};

class WorkerProcess;

// Handed to a tool body for the duration of one call.
class CallContext {
public:
    CallContext(std::string tool, const std::filesystem::path& root, Clock& clock,
                Seconds deadline, std::map<std::string, std::unique_ptr<WorkerProcess>>& workers);

    const std::string& tool() const { return tool_; }
    const std::filesystem::path& root() const { return root_; }
    // Absolute location of a workspace-relative path. Throws PathEscapesWorkspace.
    std::filesystem::path resolve(std::string_view relpath) const;

    Clock& clock() { return clock_; }
    Seconds deadline() const { return deadline_; }
    Seconds remaining() const;
    bool expired() const { return remaining() <= Seconds{0}; }
    // Throws DeadlineExceeded once the deadline has passed.
    void checkpoint() const;
    // Sleeps for `duration` or until the deadline, whichever is first; throws
    // DeadlineExceeded when the deadline cut the sleep short.
    void sleep_for(Seconds duration);

    // Worker process serving `command` for this workspace, spawned on first use.
    WorkerProcess& worker(const std::vector<std::string>& command);

private:
    std::string tool_;
    std::filesystem::path root_;
    Clock& clock_;
    Seconds deadline_;
    std::map<std::string, std::unique_ptr<WorkerProcess>>& workers_;
};

// HARNESS_RUN_ROOT when set, otherwise "./runs".
std::filesystem::path default_run_root();

// Per-task isolated directory. One agent loop drives a workspace at a time;
// distinct workspaces are independent.
class Workspace {
public:
    // Creates <run_root>/<task_id>/<attempt>/ and stages the task inputs from
    // data_root. Without an explicit attempt the next free number is taken.
    static Workspace create(const TaskSpec& task, const std::filesystem::path& data_root,
                            const std::filesystem::path& run_root, Limits limits = {},
                            Clock& clock = SteadyClock::instance(),
                            std::optional<int> attempt = std::nullopt);

    // Opens an existing directory read-only for scoring a recorded run.
    static Workspace attach(const std::filesystem::path& root, std::string task_id,
                            Limits limits = {}, Clock& clock = SteadyClock::instance());

    Workspace(Workspace&&) noexcept;
    Workspace& operator=(Workspace&&) noexcept;
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;
    ~Workspace();

    // Runs one tool call. Always yields a record (validation failures become
    // rejected records) except past the step cap, which raises StepCapExceeded.
    ToolCallRecord execute_tool(const ToolRegistry& registry, std::string_view tool,
                                const ArgMap& args, std::optional<int> plan_step = std::nullopt);

    // True iff the file exists under the root. Throws PathEscapesWorkspace.
    bool exists(std::string_view relpath) const;
    std::filesystem::path resolve(std::string_view relpath) const;

    const std::string& task_id() const { return task_id_; }
    const std::filesystem::path& root() const { return root_; }
    const Limits& limits() const { return limits_; }
    int step_count() const { return step_count_; }
    const std::map<std::string, int>& write_ledger() const { return ledger_; }
    const std::vector<ToolCallRecord>& records() const { return records_; }

private:
    Workspace(std::string task_id, std::filesystem::path root, Limits limits, Clock& clock);

    ToolCallRecord run_call(const ToolRegistry& registry, ToolCallRecord record);

    std::string task_id_;
    std::filesystem::path root_;
    Limits limits_;
    Clock* clock_;
    int step_count_ = 0;
    std::map<std::string, int> ledger_;  // relative path -> producing step (0 = staged input)
    std::vector<ToolCallRecord> records_;
    std::map<std::string, std::unique_ptr<WorkerProcess>> workers_;
};

} // namespace geobench
