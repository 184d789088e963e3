#pragma once
// OpenAI-compatible chat-completions backend.

#include "trajsim/outcome_model.hpp"
#include "trajsim/prompt.hpp"

#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <mutex>
#include <string>

namespace trajsim {

struct RemoteConfig {
    // Full URL of the chat-completions endpoint. A URL without a path gets
    // /v1/chat/completions appended.
    std::string endpoint_url;
    std::string model_name;
    std::string auth_token_env_var;  // empty: no Authorization header
    double temperature = 0.0;
    int max_retries = 2;
    std::chrono::milliseconds timeout{60'000};
    std::string prompt_template_path;  // empty: built-in template
    int max_concurrency = 4;
    std::size_t max_history = 64;
};

void validate(const RemoteConfig& cfg);

// Relative template paths are resolved against `base_dir`.
RemoteConfig remote_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

// Bounds the number of in-flight requests.
class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(int limit) : available_(limit > 0 ? limit : 1) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard lock(mutex_);
            ++available_;
        }
        cv_.notify_one();
    }

    class Permit {
    public:
        explicit Permit(ConcurrencyLimiter& l) : limiter_(l) { limiter_.acquire(); }
        ~Permit() { limiter_.release(); }
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;

    private:
        ConcurrencyLimiter& limiter_;
    };

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

// One user message in, assistant text out. Throws Error(Transport) or
// Error(Auth).
class ChatClient {
public:
    explicit ChatClient(RemoteConfig cfg);

    std::string complete(const std::string& user_message) const;

    const RemoteConfig& config() const { return cfg_; }

private:
    RemoteConfig cfg_;
    std::string scheme_host_port_;
    std::string path_;
    mutable ConcurrencyLimiter limiter_;
};

std::string corrective_instruction(const std::string& error);

// render -> request -> parse, retrying parse failures up to cfg.max_retries
// times. Throws Error(ExhaustedRetries) carrying the last parse error.
std::vector<Outcome> remote_predict(const ChatClient& client, std::string_view tmpl, const PatientState& state,
                                    std::span<const Action> actions);

class RemoteBackend final : public OutcomeModel {
public:
    RemoteBackend(std::string id, RemoteConfig cfg);

    const std::string& id() const override { return id_; }

    std::vector<Outcome> predict(const PatientState& state, std::span<const Action> actions,
                                 const SamplingContext& ctx) const override;

private:
    std::string id_;
    ChatClient client_;
    std::string template_;
};

} // namespace trajsim
