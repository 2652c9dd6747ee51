#include "geobench/worker.hpp"

#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <mutex>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/core.h>

#include "geobench/errors.hpp"

namespace geobench {

namespace wire {

std::string encode_frame(std::string_view body) {
    if (body.size() > kMaxFrameBytes) throw MalformedDocument("frame body too large");
    const auto n = static_cast<std::uint32_t>(body.size());
    std::string out;
    out.reserve(4 + body.size());
    out.push_back(static_cast<char>((n >> 24) & 0xFF));
    out.push_back(static_cast<char>((n >> 16) & 0xFF));
    out.push_back(static_cast<char>((n >> 8) & 0xFF));
    out.push_back(static_cast<char>(n & 0xFF));
    out.append(body);
    return out;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<std::string> FrameDecoder::next() {
    if (buffer_.size() < 4) return std::nullopt;
    const auto* p = reinterpret_cast<const unsigned char*>(buffer_.data());
    const std::uint32_t n = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                            (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
    if (n > kMaxFrameBytes) throw MalformedDocument(fmt::format("frame of {} bytes exceeds limit", n));
    if (buffer_.size() < 4 + std::size_t{n}) return std::nullopt;
    std::string body = buffer_.substr(4, n);
    buffer_.erase(0, 4 + std::size_t{n});
    return body;
}

} // namespace wire

std::string encode_request(const WorkerRequest& r) {
    Json args = Json::object();
    for (const auto& [k, v] : r.args) args[k] = v;
    return Json{{"id", r.id}, {"tool", r.tool}, {"args", std::move(args)}, {"workspace", r.workspace}}
        .dump();
}

WorkerRequest decode_request(std::string_view body) {
    try {
        const auto j = Json::parse(body);
        WorkerRequest r;
        r.id = j.at("id").get<std::string>();
        r.tool = j.at("tool").get<std::string>();
        for (const auto& [k, v] : j.at("args").items()) r.args.emplace(k, v);
        r.workspace = j.at("workspace").get<std::string>();
        return r;
    } catch (const Json::exception& e) {
        throw MalformedDocument(fmt::format("worker request: {}", e.what()));
    }
}

std::string encode_response(const WorkerResponse& r) {
    Json j{{"id", r.id}, {"status", r.ok ? "ok" : "error"}, {"outputs", r.outputs}};
    if (r.error) {
        j["error"] = {{"category", to_string(r.error->category)}, {"message", r.error->message}};
    }
    return j.dump();
}

WorkerResponse decode_response(std::string_view body) {
    try {
        const auto j = Json::parse(body);
        WorkerResponse r;
        r.id = j.at("id").get<std::string>();
        const auto status = j.at("status").get<std::string>();
        if (status != "ok" && status != "error") {
            throw MalformedDocument(fmt::format("worker response: unknown status '{}'", status));
        }
        r.ok = status == "ok";
        r.outputs = j.value("outputs", std::vector<std::string>{});
        if (j.contains("error") && !j["error"].is_null()) {
            WorkerError e;
            e.category = parse_error_category(j["error"].value("category", std::string{"internal"}))
                             .value_or(ErrorCategory::internal);
            e.message = j["error"].value("message", std::string{});
            r.error = std::move(e);
        }
        return r;
    } catch (const Json::exception& e) {
        throw MalformedDocument(fmt::format("worker response: {}", e.what()));
    }
}

namespace {

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

void write_all(int fd, std::string_view bytes) {
    while (!bytes.empty()) {
        const auto n = ::write(fd, bytes.data(), bytes.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw WorkerFailure(fmt::format("write to worker failed: {}", std::strerror(errno)));
        }
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
}

} // namespace

WorkerProcess::WorkerProcess(std::vector<std::string> argv) : argv_(std::move(argv)) {
    if (argv_.empty()) throw WorkerFailure("worker command is empty");
}

WorkerProcess::~WorkerProcess() { terminate(); }

void WorkerProcess::spawn() {
    ignore_sigpipe();
    int in[2];
    int out[2];
    if (::pipe2(in, O_CLOEXEC) != 0) throw WorkerFailure("pipe() failed");
    if (::pipe2(out, O_CLOEXEC) != 0) {
        ::close(in[0]);
        ::close(in[1]);
        throw WorkerFailure("pipe() failed");
    }

    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {in[0], in[1], out[0], out[1]}) ::close(fd);
        throw WorkerFailure("fork() failed");
    }
    if (pid == 0) {
        ::dup2(in[0], STDIN_FILENO);
        ::dup2(out[1], STDOUT_FILENO);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(in[0]);
    ::close(out[1]);
    pid_ = pid;
    to_child_ = in[1];
    from_child_ = out[0];
    decoder_ = {};
}

void WorkerProcess::terminate() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        int status = 0;
        while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
        }
    }
    pid_ = -1;
    decoder_ = {};
}

void WorkerProcess::send(const WorkerRequest& request) {
    if (!running()) spawn();
    try {
        write_all(to_child_, wire::encode_frame(encode_request(request)));
    } catch (const WorkerFailure&) {
        terminate();
        throw;
    }
}

WorkerResponse WorkerProcess::receive(Seconds timeout) {
    if (!running()) throw WorkerFailure("worker is not running");
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout);
    char buf[65536];
    for (;;) {
        std::optional<std::string> body;
        try {
            body = decoder_.next();
        } catch (const MalformedDocument& e) {
            terminate();
            throw WorkerFailure(fmt::format("worker protocol desync: {}", e.what()));
        }
        if (body) {
            try {
                return decode_response(*body);
            } catch (const MalformedDocument& e) {
                terminate();
                throw WorkerFailure(fmt::format("worker protocol desync: {}", e.what()));
            }
        }

        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            terminate();
            throw DeadlineExceeded();
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count() + 1, 1 << 30)));
        if (ready < 0) {
            if (errno == EINTR) continue;
            terminate();
            throw WorkerFailure("poll() on worker failed");
        }
        if (ready == 0) continue;
        const auto n = ::read(from_child_, buf, sizeof buf);
        if (n < 0) {
            if (errno == EINTR) continue;
            terminate();
            throw WorkerFailure("read from worker failed");
        }
        if (n == 0) {
            terminate();
            throw WorkerFailure("worker exited before responding");
        }
        decoder_.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    }
}

WorkerResponse WorkerProcess::call(const WorkerRequest& request, Seconds timeout) {
    send(request);
    auto response = receive(timeout);
    if (response.id != request.id) {
        terminate();
        throw WorkerFailure(fmt::format("worker answered '{}' to request '{}'", response.id, request.id));
    }
    return response;
}

ToolOutcome WorkerToolExecutor::run(CallContext& ctx, const ArgMap& args) {
    static std::atomic<unsigned long long> counter{0};
    WorkerRequest request{fmt::format("req-{}", ++counter), ctx.tool(), args, ctx.root().string()};
    WorkerResponse response;
    try {
        response = ctx.worker(command_).call(request, ctx.remaining());
    } catch (const WorkerFailure& e) {
        return ToolOutcome::failure(e.what(), ErrorCategory::internal);
    }
    if (!response.ok) {
        const auto error = response.error.value_or(WorkerError{ErrorCategory::internal, "worker error"});
        return ToolOutcome::failure(error.message, error.category);
    }
    std::string text;
    for (const auto& out : response.outputs) {
        text += text.empty() ? "wrote " : ", ";
        text += out;
    }
    return ToolOutcome::success(std::move(text));
}

} // namespace geobench
