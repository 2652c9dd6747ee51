#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <sys/types.h>

#include "geobench/registry.hpp"
#include "geobench/sandbox.hpp"

namespace geobench {

// Framing used between the harness and out-of-process tool workers:
// a 4-byte big-endian body length followed by a UTF-8 JSON body.
namespace wire {

inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

std::string encode_frame(std::string_view body);

// Incremental decoder for a byte stream carrying frames.
class FrameDecoder {
public:
    void feed(std::string_view bytes);
    // Next complete body, if any. Throws MalformedDocument on an oversized frame.
    std::optional<std::string> next();
    std::size_t buffered() const { return buffer_.size(); }

private:
    std::string buffer_;
};

} // namespace wire

struct WorkerRequest {
    std::string id;
    std::string tool;
    ArgMap args;
    std::string workspace;  // absolute workspace root

    bool operator==(const WorkerRequest&) const = default;
};

struct WorkerError {
    ErrorCategory category = ErrorCategory::internal;
    std::string message;

    bool operator==(const WorkerError&) const = default;
};

struct WorkerResponse {
    std::string id;
    bool ok = false;
    std::vector<std::string> outputs;
    std::optional<WorkerError> error;

    bool operator==(const WorkerResponse&) const = default;
};

std::string encode_request(const WorkerRequest& request);
WorkerRequest decode_request(std::string_view body);  // MalformedDocument
std::string encode_response(const WorkerResponse& response);
WorkerResponse decode_response(std::string_view body);  // MalformedDocument

// Failure of the worker channel itself (crash, desync, spawn failure).
class WorkerFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A child process speaking the framed protocol on stdin/stdout. The process
// is spawned lazily and killed on timeout or desync; the next request
// respawns it.
class WorkerProcess {
public:
    explicit WorkerProcess(std::vector<std::string> argv);
    ~WorkerProcess();
    WorkerProcess(const WorkerProcess&) = delete;
    WorkerProcess& operator=(const WorkerProcess&) = delete;

    void send(const WorkerRequest& request);
    // Waits at most `timeout` for the next response. Throws DeadlineExceeded
    // (after killing the child) or WorkerFailure.
    WorkerResponse receive(Seconds timeout);
    WorkerResponse call(const WorkerRequest& request, Seconds timeout);

    bool running() const { return pid_ > 0; }
    pid_t pid() const { return pid_; }
    void terminate();

private:
    void spawn();

    std::vector<std::string> argv_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    wire::FrameDecoder decoder_;
};

// Dispatches a tool to the workspace's worker process.
class WorkerToolExecutor final : public ToolExecutor {
public:
    explicit WorkerToolExecutor(std::vector<std::string> command) : command_(std::move(command)) {}
    ToolOutcome run(CallContext& ctx, const ArgMap& args) override;

private:
    std::vector<std::string> command_;
};

} // namespace geobench
