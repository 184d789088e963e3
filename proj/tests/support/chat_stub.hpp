#pragma once
// In-process chat-completions endpoint with scripted replies.

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace testing_support {

class ChatStub {
public:
    // Called with the zero-based attempt number and the user message; returns
    // the assistant text.
    using Script = std::function<std::string(int attempt, const std::string& message)>;

    explicit ChatStub(Script script, int http_status = 200) : script_(std::move(script)), status_(http_status) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body);
            const std::string message = body.at("messages").at(0).at("content").get<std::string>();
            int attempt = 0;
            {
                std::lock_guard lock(mutex_);
                attempt = static_cast<int>(messages_.size());
                messages_.push_back(message);
                requests_.push_back(body);
                authorization_ = req.get_header_value("Authorization");
            }
            if (status_ != 200) {
                res.status = status_;
                res.set_content("{}", "application/json");
                return;
            }
            nlohmann::json reply = {
                {"choices", nlohmann::json::array({{{"message", {{"role", "assistant"},
                                                                 {"content", script_(attempt, message)}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~ChatStub() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    ChatStub(const ChatStub&) = delete;
    ChatStub& operator=(const ChatStub&) = delete;

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

    int calls() const {
        std::lock_guard lock(mutex_);
        return static_cast<int>(messages_.size());
    }
    std::vector<std::string> messages() const {
        std::lock_guard lock(mutex_);
        return messages_;
    }
    std::vector<nlohmann::json> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }
    std::string authorization() const {
        std::lock_guard lock(mutex_);
        return authorization_;
    }

private:
    Script script_;
    int status_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    mutable std::mutex mutex_;
    std::vector<std::string> messages_;
    std::vector<nlohmann::json> requests_;
    std::string authorization_;
};

} // namespace testing_support
