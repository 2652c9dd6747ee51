#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "geobench/errors.hpp"
#include "geobench/http_backends.hpp"

using namespace geobench;

namespace {

class ChatServer : public ::testing::Test {
protected:
    void SetUp() override {
        server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            requests.push_back(Json::parse(req.body));
            auth = req.get_header_value("Authorization");
            if (status != 200) {
                res.status = status;
                res.set_content("overloaded", "text/plain");
                return;
            }
            Json reply{{"choices", Json::array({{{"message", {{"role", "assistant"}, {"content", answer}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    void TearDown() override {
        server.stop();
        thread.join();
    }

    HttpEndpoint endpoint() const {
        return {fmt_url(), "sk-test", "test-model", std::chrono::seconds(5)};
    }
    std::string fmt_url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1"; }

    httplib::Server server;
    std::thread thread;
    int port = 0;
    int status = 200;
    std::string answer = R"({"kind": "final_answer"})";
    std::vector<Json> requests;
    std::string auth;
};

} // namespace

TEST(Base64, KnownVectors) {
    auto enc = [](std::string s) {
        return base64_encode({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
    };
    EXPECT_EQ(enc(""), "");
    EXPECT_EQ(enc("f"), "Zg==");
    EXPECT_EQ(enc("fo"), "Zm8=");
    EXPECT_EQ(enc("hello"), "aGVsbG8=");
}

TEST_F(ChatServer, ModelSendsContext) {
    ChatModel model(endpoint());
    const std::vector<Message> ctx{{Role::system, "rules"}, {Role::user, "task"}};
    EXPECT_EQ(model.generate(ctx, "manifest"), answer);
    ASSERT_EQ(requests.size(), 1u);
    EXPECT_EQ(requests[0]["model"], "test-model");
    EXPECT_EQ(requests[0]["messages"][0]["role"], "system");
    EXPECT_EQ(requests[0]["messages"][1]["content"], "task");
    EXPECT_EQ(auth, "Bearer sk-test");
}

TEST_F(ChatServer, JudgeSendsImage) {
    answer = "Score: 64";
    ChatJudge judge(endpoint());
    const std::vector<std::uint8_t> png{0x89, 'P', 'N', 'G'};
    EXPECT_EQ(judge.ask("grade this", png), "Score: 64");
    const auto& content = requests.at(0)["messages"][0]["content"];
    EXPECT_EQ(content[0]["text"], "grade this");
    EXPECT_EQ(content[1]["image_url"]["url"], "data:image/png;base64,iVBORw==");
}

TEST_F(ChatServer, ServerErrors) {
    status = 503;
    ChatModel model(endpoint());
    EXPECT_THROW(model.generate({{Role::user, "x"}}, ""), BackendUnavailable);
}

TEST_F(ChatServer, MalformedReply) {
    server.stop();
    thread.join();
    httplib::Server bad;
    bad.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"choices": []})", "application/json");
    });
    port = bad.bind_to_any_port("127.0.0.1");
    thread = std::thread([&] { bad.listen_after_bind(); });
    bad.wait_until_ready();
    ChatModel model(endpoint());
    EXPECT_THROW(model.generate({{Role::user, "x"}}, ""), BackendUnavailable);
    bad.stop();
    thread.join();
    thread = std::thread([] {});
}

TEST(ChatBackend, Unreachable) {
    ChatModel model({"http://127.0.0.1:1", "", "m", std::chrono::seconds(2)});
    EXPECT_THROW(model.generate({{Role::user, "x"}}, ""), BackendUnavailable);
    ChatModel bad_url({"ftp://example", "", "m", std::chrono::seconds(2)});
    EXPECT_THROW(bad_url.generate({{Role::user, "x"}}, ""), BackendUnavailable);
}
