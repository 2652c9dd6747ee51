#include "geobench/sandbox.hpp"

#include <cstdlib>
#include <thread>

#include <fmt/core.h>

#include "geobench/errors.hpp"
#include "geobench/worker.hpp"

namespace fs = std::filesystem;

namespace geobench {

Seconds SteadyClock::now() const {
    return std::chrono::duration_cast<Seconds>(
        std::chrono::steady_clock::now().time_since_epoch());
}

void SteadyClock::sleep_for(Seconds duration) {
    if (duration > Seconds{0}) std::this_thread::sleep_for(duration);
}

SteadyClock& SteadyClock::instance() {
    static SteadyClock clock;
    return clock;
}

Seconds ManualClock::now() const {
    std::lock_guard lock(mutex_);
    return now_;
}

void ManualClock::sleep_for(Seconds duration) {
    std::lock_guard lock(mutex_);
    if (duration > Seconds{0}) now_ += duration;
}

namespace {

bool is_within(const fs::path& root, const fs::path& candidate) {
    auto r = root.begin();
    auto c = candidate.begin();
    for (; r != root.end(); ++r, ++c) {
        if (c == candidate.end() || *r != *c) return false;
    }
    return true;
}

fs::path resolve_under(const fs::path& root, std::string_view relpath) {
    if (!is_contained_relative(relpath)) {
        throw PathEscapesWorkspace(fmt::format("path '{}' escapes the workspace", relpath));
    }
    // Symlinks inside the workspace must not lead outside it either.
    auto resolved = fs::weakly_canonical(root / normalize_relative_path(relpath));
    if (!is_within(root, resolved)) {
        throw PathEscapesWorkspace(fmt::format("path '{}' escapes the workspace", relpath));
    }
    return resolved;
}

std::vector<std::string> declared_outputs(const ToolSchema* schema, const ArgMap& args) {
    std::vector<std::string> out;
    if (!schema) return out;
    for (const auto& name : schema->output_params()) {
        auto it = args.find(name);
        if (it == args.end() || !it->second.is_string()) continue;
        const auto& value = it->second.get_ref<const std::string&>();
        out.push_back(is_contained_relative(value) ? normalize_relative_path(value) : value);
    }
    return out;
}

void fail(ToolCallRecord& record, CallStatus status, const DenoisedError& error) {
    record.status = status;
    record.error_message = error.message;
    record.error_category = error.category;
}

} // namespace

CallContext::CallContext(std::string tool, const fs::path& root, Clock& clock, Seconds deadline,
                         std::map<std::string, std::unique_ptr<WorkerProcess>>& workers)
    : tool_(std::move(tool)), root_(root), clock_(clock), deadline_(deadline), workers_(workers) {}

fs::path CallContext::resolve(std::string_view relpath) const { return resolve_under(root_, relpath); }

Seconds CallContext::remaining() const { return deadline_ - clock_.now(); }

void CallContext::checkpoint() const {
    if (expired()) throw DeadlineExceeded();
}

void CallContext::sleep_for(Seconds duration) {
    const auto left = remaining();
    if (duration < left) {
        clock_.sleep_for(duration);
        return;
    }
    clock_.sleep_for(std::max(left, Seconds{0}));
    throw DeadlineExceeded();
}

WorkerProcess& CallContext::worker(const std::vector<std::string>& command) {
    std::string key;
    for (const auto& part : command) {
        key += part;
        key.push_back('\0');
    }
    auto& slot = workers_[key];
    if (!slot) slot = std::make_unique<WorkerProcess>(command);
    return *slot;
}

fs::path default_run_root() {
    if (const char* env = std::getenv("HARNESS_RUN_ROOT"); env && *env) return fs::path(env);
    return fs::path("runs");
}

Workspace::Workspace(std::string task_id, fs::path root, Limits limits, Clock& clock)
    : task_id_(std::move(task_id)), root_(std::move(root)), limits_(limits), clock_(&clock) {}

Workspace::Workspace(Workspace&&) noexcept = default;
Workspace& Workspace::operator=(Workspace&&) noexcept = default;
Workspace::~Workspace() = default;

Workspace Workspace::create(const TaskSpec& task, const fs::path& data_root,
                            const fs::path& run_root, Limits limits, Clock& clock,
                            std::optional<int> attempt) {
    if (task.id.empty() || task.id.find('/') != std::string::npos ||
        !is_contained_relative(task.id)) {
        throw SchemaViolation(fmt::format("task id '{}' is not usable as a directory name", task.id));
    }
    for (const auto& input : task.data_description) {
        if (!is_contained_relative(input.path) || !fs::is_regular_file(data_root / input.path)) {
            throw MissingInputData(fmt::format("task '{}': input '{}' not found under '{}'", task.id,
                                               input.path, data_root.string()));
        }
    }

    const auto task_dir = fs::absolute(run_root) / task.id;
    fs::create_directories(task_dir);
    fs::path root;
    if (attempt) {
        root = task_dir / std::to_string(*attempt);
        if (!fs::create_directory(root)) {
            throw WorkspaceCollision(fmt::format("workspace '{}' already exists", root.string()));
        }
    } else {
        // create_directory is atomic, so concurrent runs never share an attempt.
        for (int n = 1;; ++n) {
            root = task_dir / std::to_string(n);
            if (fs::create_directory(root)) break;
        }
    }
    root = fs::canonical(root);

    Workspace ws(task.id, root, limits, clock);
    for (const auto& input : task.data_description) {
        const auto rel = normalize_relative_path(input.path);
        const auto target = root / rel;
        fs::create_directories(target.parent_path());
        fs::copy_file(data_root / input.path, target, fs::copy_options::overwrite_existing);
        ws.ledger_[rel] = 0;
    }
    return ws;
}

Workspace Workspace::attach(const fs::path& root, std::string task_id, Limits limits, Clock& clock) {
    if (!fs::is_directory(root)) {
        throw MissingInputData(fmt::format("workspace '{}' does not exist", root.string()));
    }
    return Workspace(std::move(task_id), fs::canonical(root), limits, clock);
}

fs::path Workspace::resolve(std::string_view relpath) const { return resolve_under(root_, relpath); }

bool Workspace::exists(std::string_view relpath) const {
    return fs::is_regular_file(resolve(relpath));
}

ToolCallRecord Workspace::execute_tool(const ToolRegistry& registry, std::string_view tool,
                                       const ArgMap& args, std::optional<int> plan_step) {
    if (step_count_ >= limits_.max_steps) {
        throw StepCapExceeded(fmt::format("task '{}': step cap of {} calls reached", task_id_,
                                          limits_.max_steps));
    }
    ++step_count_;

    ToolCallRecord record;
    record.step = step_count_;
    record.tool = std::string(tool);
    record.args = args;
    record.plan_step = plan_step;
    record.outputs_declared = declared_outputs(registry.find(tool), args);

    record = run_call(registry, std::move(record));
    records_.push_back(record);
    return record;
}

ToolCallRecord Workspace::run_call(const ToolRegistry& registry, ToolCallRecord record) {
    const ToolSchema* schema = registry.find(record.tool);
    if (!schema) {
        fail(record, CallStatus::rejected,
             denoise(fmt::format("unknown tool '{}'", record.tool), ErrorCategory::bad_parameter));
        return record;
    }

    ValidatedArgs validated;
    try {
        validated = registry.validate_args(record.tool, record.args);
    } catch (const Error& e) {
        fail(record, CallStatus::rejected, denoise(e.what(), ErrorCategory::bad_parameter));
        return record;
    }

    std::vector<std::string> outputs;
    for (const auto& name : schema->output_params()) {
        if (auto it = validated.args.find(name); it != validated.args.end()) {
            outputs.push_back(it->second.get<std::string>());
        }
    }

    // Write-once policy: a path written earlier is locked unless overwrite=true.
    const auto grant = validated.args.find(std::string(kOverwriteParam));
    const bool overwrite = grant != validated.args.end() && grant->second.get<bool>();
    if (!overwrite) {
        for (const auto& out : outputs) {
            if (auto it = ledger_.find(out); it != ledger_.end()) {
                const auto owner = it->second == 0 ? std::string("a staged input")
                                                   : fmt::format("written by step {}", it->second);
                fail(record, CallStatus::error,
                     denoise(fmt::format("file locked: '{}' is {} and cannot be written again",
                                         out, owner),
                             ErrorCategory::file_locked));
                return record;
            }
        }
    }

    const auto start = clock_->now();
    const auto deadline = start + limits_.call_timeout;
    CallContext ctx(record.tool, root_, *clock_, deadline, workers_);

    ToolOutcome outcome;
    bool timed_out = false;
    try {
        outcome = registry.executor(record.tool).run(ctx, validated.args);
    } catch (const DeadlineExceeded&) {
        timed_out = true;
    } catch (const std::exception& e) {
        outcome = ToolOutcome::failure(e.what());
    }
    const auto elapsed = clock_->now() - start;
    record.duration = elapsed.count();
    if (elapsed > limits_.call_timeout) timed_out = true;

    if (timed_out) {
        // Partial outputs of a timed-out call stay on disk but are not ledgered.
        fail(record, CallStatus::timeout,
             denoise(fmt::format("call timed out after {:.0f} s", limits_.call_timeout.count()),
                     ErrorCategory::timeout));
        return record;
    }
    if (!outcome.ok) {
        fail(record, CallStatus::error, denoise(outcome.text, outcome.category_hint));
        return record;
    }
    for (const auto& out : outputs) {
        if (!fs::is_regular_file(resolve(out))) {
            fail(record, CallStatus::error,
                 denoise(fmt::format("tool reported success but did not write '{}'", out),
                         ErrorCategory::internal));
            return record;
        }
    }
    for (const auto& out : outputs) ledger_[out] = record.step;
    if (!outcome.text.empty()) record.observation = outcome.text;
    return record;
}

} // namespace geobench
