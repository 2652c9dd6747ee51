// Minimal worker speaking the framed protocol, for exercising the harness side.
//   echo    -> writes args.output (if any) and answers ok
//   fail    -> error response with the category given in args.category
//   hang    -> never answers
//   crash   -> exits without answering
//   garbage -> answers with a frame that is not a response

#include <chrono>
#include <cstdio>
#include <fstream>
#include <string>
#include <thread>

#include <unistd.h>

#include "geobench/worker.hpp"

using namespace geobench;

namespace {

void write_frame(const std::string& body) {
    const auto frame = wire::encode_frame(body);
    std::size_t off = 0;
    while (off < frame.size()) {
        const auto n = ::write(STDOUT_FILENO, frame.data() + off, frame.size() - off);
        if (n <= 0) std::_Exit(2);
        off += static_cast<std::size_t>(n);
    }
}

WorkerResponse handle(const WorkerRequest& req) {
    WorkerResponse res;
    res.id = req.id;
    if (req.tool == "echo") {
        res.ok = true;
        if (auto it = req.args.find("output"); it != req.args.end()) {
            const auto rel = it->second.get<std::string>();
            std::ofstream(req.workspace + "/" + rel) << "echo\n";
            res.outputs.push_back(rel);
        }
    } else if (req.tool == "fail") {
        auto cat = req.args.count("category") ? req.args.at("category").get<std::string>() : "internal";
        res.error = WorkerError{parse_error_category(cat).value_or(ErrorCategory::internal), "worker says no"};
    } else if (req.tool == "hang") {
        for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
    } else if (req.tool == "crash") {
        std::_Exit(3);
    } else {
        res.error = WorkerError{ErrorCategory::bad_parameter, "unknown tool " + req.tool};
    }
    return res;
}

} // namespace

int main() {
    wire::FrameDecoder decoder;
    char buf[4096];
    for (;;) {
        while (auto body = decoder.next()) {
            const auto req = decode_request(*body);
            if (req.tool == "garbage") {
                write_frame("{\"not\": \"a response\"}");
                continue;
            }
            write_frame(encode_response(handle(req)));
        }
        const auto n = ::read(STDIN_FILENO, buf, sizeof buf);
        if (n <= 0) return 0;
        decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    }
}
