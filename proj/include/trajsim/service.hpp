#pragma once
// HTTP session service.
//
//   POST /sessions                 {profile, diagnostics, backend, seed?, start?}  -> 201 descriptor
//   GET  /sessions/{id}            -> 200 {session, profile, diagnostics, history}
//   POST /sessions/{id}/step       {at, actions}  -> 200 {event_set, session}
//   POST /sessions/{id}/branch     {at_step}      -> 200 descriptor
//   POST /evaluate                 {predicted|predicted_path, truth|truth_path, ranges|ranges_path}
//   GET  /healthz
//
// Errors are {"error": {"code": "...", "message": "..."}} with 400 for
// malformed requests, 401 for a missing bearer token, 404 for unknown
// sessions or backends, 409 for concurrent or non-monotonic steps, 416 for
// out-of-range branches and 502 for backend failures.
//
// With a persistence directory every session is kept as "<id>.jsonl", an
// episode corpus with one full snapshot appended per mutation, next to
// "<id>.meta.json". Restarting on the same directory restores them.

#include "trajsim/engine.hpp"
#include "trajsim/error.hpp"

#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace trajsim {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path backends_path;
    std::chrono::seconds session_ttl{24 * 3600};
    std::filesystem::path persist_dir;  // empty: in-memory only
    // Directory that corpus and range paths in /evaluate must lie under;
    // empty disables path references.
    std::filesystem::path data_dir;
    std::filesystem::path ranges_path;  // default table for /evaluate
    std::string auth_token_env_var;     // empty: no authentication
    std::uint64_t id_seed = 0;
    int max_malformed_retries = 2;
    unsigned evaluate_jobs = 1;
};

// Relative paths resolve against `base_dir`. Throws Error(ConfigError).
ServiceConfig service_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
// TRAJSIM_PORT, TRAJSIM_BACKENDS, TRAJSIM_SESSION_TTL (seconds),
// TRAJSIM_PERSIST_DIR.
void apply_env_overrides(ServiceConfig& cfg);

int http_status(ErrorCode code);
nlohmann::json error_body(ErrorCode code, const std::string& message);

class Service {
public:
    Service(ServiceConfig cfg, std::shared_ptr<const BackendRegistry> registry);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds cfg.host:cfg.port (port 0 picks a free port). Returns false if
    // the address is unavailable.
    bool bind();
    int port() const { return port_; }
    // Blocks until stop().
    void run();
    void stop();

    // Writes snapshots for sessions changed since their last write.
    void flush();
    // Loads sessions from the persistence directory; returns how many.
    std::size_t restore();
    // Drops idle sessions now; their files are renamed with ".expired".
    std::size_t expire_now();

    SessionStore& store() { return store_; }

private:
    struct Meta {
        std::string created_at;
        std::size_t persisted_length = 0;
        bool persisted = false;
    };

    void routes();
    nlohmann::json descriptor(const Session& s);
    void persist(const std::string& id);
    void sweeper();

    ServiceConfig cfg_;
    std::shared_ptr<const BackendRegistry> registry_;
    SessionStore store_;
    std::unique_ptr<httplib::Server> server_;
    int port_ = 0;

    std::mutex meta_mutex_;
    std::map<std::string, Meta> meta_;

    std::mutex sweep_mutex_;
    std::condition_variable sweep_cv_;
    bool stopping_ = false;
    std::thread sweeper_;
};

} // namespace trajsim
