#include "trajsim/remote.hpp"

#include "trajsim/episode_io.hpp"
#include "trajsim/error.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>

namespace trajsim {

using nlohmann::json;

namespace {

constexpr const char* kDefaultPath = "/v1/chat/completions";

std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::ConfigError, "endpoint_url must include a scheme: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, kDefaultPath};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace

void validate(const RemoteConfig& cfg) {
    if (cfg.endpoint_url.empty()) throw Error(ErrorCode::ConfigError, "remote config: endpoint_url is required");
    if (!std::isfinite(cfg.temperature) || cfg.temperature < 0.0)
        throw Error(ErrorCode::ConfigError, "remote config: temperature must be finite and >= 0");
    if (cfg.max_retries < 0) throw Error(ErrorCode::ConfigError, "remote config: max_retries must be >= 0");
    if (cfg.max_concurrency < 1) throw Error(ErrorCode::ConfigError, "remote config: max_concurrency must be >= 1");
    split_url(cfg.endpoint_url);
}

RemoteConfig remote_config_from_json(const json& j, const std::filesystem::path& base_dir) {
    RemoteConfig cfg;
    try {
        cfg.endpoint_url = j.at("endpoint_url").get<std::string>();
        cfg.model_name = j.value("model_name", "");
        cfg.auth_token_env_var = j.value("auth_token_env_var", "");
        cfg.temperature = j.value("temperature", 0.0);
        cfg.max_retries = j.value("max_retries", 2);
        cfg.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60'000));
        cfg.max_concurrency = j.value("max_concurrency", 4);
        cfg.max_history = j.value("max_history", std::size_t{64});
        cfg.prompt_template_path = j.value("prompt_template_path", "");
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::ConfigError, std::string("remote config: ") + ex.what());
    }
    if (!cfg.prompt_template_path.empty()) {
        std::filesystem::path p(cfg.prompt_template_path);
        if (p.is_relative() && !base_dir.empty()) cfg.prompt_template_path = (base_dir / p).string();
    }
    validate(cfg);
    return cfg;
}

ChatClient::ChatClient(RemoteConfig cfg) : cfg_(std::move(cfg)), limiter_(cfg_.max_concurrency) {
    validate(cfg_);
    std::tie(scheme_host_port_, path_) = split_url(cfg_.endpoint_url);
}

std::string ChatClient::complete(const std::string& user_message) const {
    json body{{"model", cfg_.model_name},
              {"temperature", cfg_.temperature},
              {"messages", json::array({json{{"role", "user"}, {"content", user_message}}})}};

    httplib::Headers headers;
    if (!cfg_.auth_token_env_var.empty()) {
        const char* token = std::getenv(cfg_.auth_token_env_var.c_str());
        if (!token || !*token)
            throw Error(ErrorCode::Auth, "environment variable " + cfg_.auth_token_env_var + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    ConcurrencyLimiter::Permit permit(limiter_);
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw Error(ErrorCode::Transport, "request to " + cfg_.endpoint_url + " failed: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
        throw Error(ErrorCode::Auth, "endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
    if (res->status < 200 || res->status >= 300)
        throw Error(ErrorCode::Transport, "endpoint returned HTTP " + std::to_string(res->status));

    auto reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) throw Error(ErrorCode::Transport, "endpoint returned a non-JSON body");
    try {
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw Error(ErrorCode::Transport, "message content is not a string");
        return content.get<std::string>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::Transport, "response lacks choices[0].message.content");
    }
}

std::string corrective_instruction(const std::string& error) {
    return "\n\nYour previous reply could not be used (" + error +
           "). Reply again with only the JSON object described above, one entry per order.";
}

std::vector<Outcome> remote_predict(const ChatClient& client, std::string_view tmpl, const PatientState& state,
                                    std::span<const Action> actions) {
    PromptOptions options;
    options.max_history = client.config().max_history;
    const std::string prompt = render_prompt(tmpl, state, actions, options);
    std::string message = prompt;
    std::string last_error;
    for (int attempt = 0; attempt <= client.config().max_retries; ++attempt) {
        const std::string reply = client.complete(message);
        try {
            return parse_model_reply(reply, actions);
        } catch (const Error& ex) {
            last_error = std::string(to_string(ex.code())) + ": " + ex.what();
            message = prompt + corrective_instruction(ex.what());
        }
    }
    throw Error(ErrorCode::ExhaustedRetries, "no usable reply after " + std::to_string(client.config().max_retries + 1) +
                                                 " attempts; last error: " + last_error);
}

RemoteBackend::RemoteBackend(std::string id, RemoteConfig cfg)
    : id_(std::move(id)), client_(std::move(cfg)) {
    const auto& path = client_.config().prompt_template_path;
    template_ = path.empty() ? default_simulator_template() : read_text_file(path);
}

std::vector<Outcome> RemoteBackend::predict(const PatientState& state, std::span<const Action> actions,
                                            const SamplingContext&) const {
    return remote_predict(client_, template_, state, actions);
}

} // namespace trajsim
