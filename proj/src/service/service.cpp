#include "trajsim/service.hpp"

#include "trajsim/episode_io.hpp"
#include "trajsim/metrics.hpp"

#include <httplib.h>

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

namespace trajsim {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
    return p.empty() || p.is_absolute() || base.empty() ? p : base / p;
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

const char* env(const char* name) {
    const char* v = std::getenv(name);
    return v && *v ? v : nullptr;
}

} // namespace

ServiceConfig service_config_from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "service config must be an object");
    ServiceConfig cfg;
    try {
        cfg.host = j.value("host", cfg.host);
        cfg.port = j.value("port", cfg.port);
        cfg.backends_path = resolve(base_dir, j.value("backends_path", std::string()));
        cfg.session_ttl = std::chrono::seconds(j.value("session_ttl_seconds", cfg.session_ttl.count()));
        cfg.persist_dir = resolve(base_dir, j.value("persist_dir", std::string()));
        cfg.data_dir = resolve(base_dir, j.value("data_dir", std::string()));
        cfg.ranges_path = resolve(base_dir, j.value("ranges_path", std::string()));
        cfg.auth_token_env_var = j.value("auth_token_env_var", std::string());
        cfg.id_seed = j.value("id_seed", cfg.id_seed);
        cfg.max_malformed_retries = j.value("max_malformed_retries", cfg.max_malformed_retries);
        cfg.evaluate_jobs = j.value("evaluate_jobs", cfg.evaluate_jobs);
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::ConfigError, std::string("service config: ") + ex.what());
    }
    if (cfg.port < 0 || cfg.port > 65535) throw Error(ErrorCode::ConfigError, "port must be in [0, 65535]");
    if (cfg.max_malformed_retries < 0) throw Error(ErrorCode::ConfigError, "max_malformed_retries must be >= 0");
    return cfg;
}

void apply_env_overrides(ServiceConfig& cfg) {
    try {
        if (const char* v = env("TRAJSIM_PORT")) cfg.port = std::stoi(v);
        if (const char* v = env("TRAJSIM_SESSION_TTL")) cfg.session_ttl = std::chrono::seconds(std::stoll(v));
    } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigError, "TRAJSIM_PORT and TRAJSIM_SESSION_TTL must be integers");
    }
    if (const char* v = env("TRAJSIM_BACKENDS")) cfg.backends_path = v;
    if (const char* v = env("TRAJSIM_PERSIST_DIR")) cfg.persist_dir = v;
    if (cfg.port < 0 || cfg.port > 65535) throw Error(ErrorCode::ConfigError, "port must be in [0, 65535]");
}

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownBackend: return 404;
    case ErrorCode::ConcurrentStep:
    case ErrorCode::NonMonotonicTime: return 409;
    case ErrorCode::OutOfRange: return 416;
    case ErrorCode::BackendFailure:
    case ErrorCode::MalformedOutcome:
    case ErrorCode::Transport:
    case ErrorCode::ExhaustedRetries: return 502;
    case ErrorCode::Auth: return 401;
    case ErrorCode::ParseError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::SchemaViolation:
    case ErrorCode::AlignmentError:
    case ErrorCode::EmptyInput:
    case ErrorCode::EmptyCode:
    case ErrorCode::EmptyCorpus:
    case ErrorCode::NoRangedPairs:
    case ErrorCode::MalformedRow:
    case ErrorCode::UnsupportedActionKind:
    case ErrorCode::UnknownAnalyte:
    case ErrorCode::ConfigError: return 400;
    default: return 500;
    }
}

json error_body(ErrorCode code, const std::string& message) {
    return {{"error", {{"code", std::string(to_string(code))}, {"message", message}}}};
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
    send_json(res, http_status(code), error_body(code, message));
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const Error& ex) {
        send_error(res, ex.code(), ex.what());
    } catch (const json::exception& ex) {
        send_error(res, ErrorCode::ParseError, ex.what());
    } catch (const std::exception& ex) {
        send_json(res, 500, {{"error", {{"code", "internal"}, {"message", ex.what()}}}});
    }
}

json parse_body(const httplib::Request& req) {
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw Error(ErrorCode::ParseError, "request body must be a JSON object");
        return j;
    } catch (const json::parse_error& ex) {
        throw Error(ErrorCode::ParseError, std::string("request body is not JSON: ") + ex.what());
    }
}

const json& required(const json& body, const char* key) {
    const auto it = body.find(key);
    if (it == body.end()) throw Error(ErrorCode::SchemaViolation, std::string("missing '") + key + "'");
    return *it;
}

Episode snapshot_of(const Session& s) {
    Episode e;
    e.subject_id = s.id;
    e.admission_id = s.id;
    e.profile = s.state.profile;
    e.diagnostics = s.state.diagnostics;
    e.timeline = s.state.history;
    e.length_of_stay = std::max(s.state.now, s.start).days();
    return e;
}

fs::path data_path(const fs::path& root, const std::string& ref) {
    if (root.empty()) throw Error(ErrorCode::InvalidArgument, "path references are disabled on this service");
    const auto base = fs::weakly_canonical(root);
    const auto p = fs::weakly_canonical(base / ref);
    const auto rel = p.lexically_relative(base);
    if (rel.empty() || *rel.begin() == "..") throw Error(ErrorCode::InvalidArgument, "path escapes the data directory");
    return p;
}

std::vector<Episode> corpus_from(const json& body, const char* inline_key, const char* path_key, const fs::path& root) {
    if (const auto it = body.find(inline_key); it != body.end()) {
        if (!it->is_array()) throw Error(ErrorCode::SchemaViolation, std::string("'") + inline_key + "' must be a list");
        std::vector<Episode> out;
        for (const auto& e : *it) out.push_back(episode_from_json(e));
        return out;
    }
    if (const auto it = body.find(path_key); it != body.end())
        return read_corpus_file(data_path(root, it->get<std::string>()));
    throw Error(ErrorCode::SchemaViolation, std::string("need '") + inline_key + "' or '" + path_key + "'");
}

} // namespace

Service::Service(ServiceConfig cfg, std::shared_ptr<const BackendRegistry> registry)
    : cfg_(std::move(cfg)),
      registry_(std::move(registry)),
      store_(registry_, cfg_.id_seed, StepOptions{cfg_.max_malformed_retries}),
      server_(std::make_unique<httplib::Server>()) {
    server_->set_payload_max_length(std::size_t{256} << 20);
    // httplib's defaults include SO_REUSEPORT, which would let a second
    // instance share a port that is already serving.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
    });
    routes();
    if (cfg_.session_ttl.count() > 0) sweeper_ = std::thread([this] { sweeper(); });
}

Service::~Service() {
    {
        std::lock_guard lock(sweep_mutex_);
        stopping_ = true;
    }
    sweep_cv_.notify_all();
    if (sweeper_.joinable()) sweeper_.join();
    server_->stop();
}

bool Service::bind() {
    if (cfg_.port == 0) {
        port_ = server_->bind_to_any_port(cfg_.host);
        return port_ > 0;
    }
    if (!server_->bind_to_port(cfg_.host, cfg_.port)) return false;
    port_ = cfg_.port;
    return true;
}

void Service::run() { server_->listen_after_bind(); }

void Service::stop() {
    server_->stop();
    flush();
}

json Service::descriptor(const Session& s) {
    std::string created_at;
    {
        std::lock_guard lock(meta_mutex_);
        created_at = meta_[s.id].created_at;
    }
    json parent = nullptr;
    if (s.parent) parent = {{"session_id", s.parent->session_id}, {"step", s.parent->step}};
    return {{"id", s.id},
            {"created_at", created_at},
            {"backend", s.backend_ref},
            {"now", s.state.now.minutes},
            {"start", s.start.minutes},
            {"history_length", s.state.history.size()},
            {"parent", parent},
            {"seed", s.rng_seed}};
}

void Service::persist(const std::string& id) {
    if (cfg_.persist_dir.empty()) return;
    std::lock_guard lock(meta_mutex_);
    Session s;
    try {
        s = store_.get(id);
    } catch (const Error&) {
        return;  // expired meanwhile
    }
    auto& meta = meta_[id];
    const auto base = cfg_.persist_dir / id;
    auto jsonl = base;
    jsonl += ".jsonl";
    auto meta_path = base;
    meta_path += ".meta.json";
    fs::create_directories(cfg_.persist_dir);
    {
        std::ofstream out(jsonl, std::ios::app | std::ios::binary);
        if (!meta.persisted) out << corpus_header().dump() << '\n';
        out << serialize_episode(snapshot_of(s)) << '\n';
        out.flush();
        if (!out) throw Error(ErrorCode::Transport, "cannot write session snapshot " + jsonl.string());
    }
    json m{{"id", s.id},
           {"backend", s.backend_ref},
           {"rng_seed", s.rng_seed},
           {"created_at", meta.created_at},
           {"start", s.start.minutes},
           {"parent", s.parent ? json{{"session_id", s.parent->session_id}, {"step", s.parent->step}} : json(nullptr)}};
    write_text_file(meta_path, m.dump(2) + "\n");
    meta.persisted = true;
    meta.persisted_length = s.state.history.size();
}

void Service::flush() {
    if (cfg_.persist_dir.empty()) return;
    for (const auto& id : store_.ids()) {
        bool stale;
        {
            std::lock_guard lock(meta_mutex_);
            const auto& m = meta_[id];
            std::size_t len = 0;
            try {
                len = store_.get(id).state.history.size();
            } catch (const Error&) {
                continue;
            }
            stale = !m.persisted || m.persisted_length != len;
        }
        if (stale) persist(id);
    }
}

std::size_t Service::restore() {
    if (cfg_.persist_dir.empty() || !fs::exists(cfg_.persist_dir)) return 0;
    std::size_t restored = 0;
    for (const auto& entry : fs::directory_iterator(cfg_.persist_dir)) {
        const auto name = entry.path().filename().string();
        const std::string suffix = ".meta.json";
        if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
            continue;
        try {
            const auto m = read_json_file(entry.path());
            const auto id = m.at("id").get<std::string>();
            const auto backend = m.at("backend").get<std::string>();
            if (!registry_->contains(backend)) {
                std::cerr << "restore: skipping session " << id << ": backend '" << backend << "' not registered\n";
                continue;
            }
            const auto episodes = read_corpus_file(cfg_.persist_dir / (id + ".jsonl"));
            if (episodes.empty()) continue;
            const auto& e = episodes.back();
            Session s;
            s.id = id;
            s.backend_ref = backend;
            s.rng_seed = m.at("rng_seed").get<std::uint64_t>();
            s.start = Timestamp{m.at("start").get<std::int64_t>()};
            if (m.contains("parent") && !m["parent"].is_null())
                s.parent = ParentRef{m["parent"].at("session_id").get<std::string>(),
                                     m["parent"].at("step").get<std::size_t>()};
            s.state.profile = e.profile;
            s.state.diagnostics = e.diagnostics;
            s.state.history = e.timeline;
            s.state.now = s.state.history.empty() ? s.start : s.state.history.back().timestamp;
            {
                std::lock_guard lock(meta_mutex_);
                meta_[id] = Meta{m.value("created_at", ""), s.state.history.size(), true};
            }
            store_.insert(std::move(s));
            ++restored;
        } catch (const std::exception& ex) {
            std::cerr << "restore: skipping " << entry.path() << ": " << ex.what() << '\n';
        }
    }
    return restored;
}

std::size_t Service::expire_now() {
    const auto expired = store_.expire_idle(cfg_.session_ttl);
    std::lock_guard lock(meta_mutex_);
    for (const auto& id : expired) {
        meta_.erase(id);
        if (cfg_.persist_dir.empty()) continue;
        for (const char* ext : {".jsonl", ".meta.json"}) {
            const auto p = cfg_.persist_dir / (id + ext);
            std::error_code ec;
            if (fs::exists(p, ec)) fs::rename(p, fs::path(p.string() + ".expired"), ec);
        }
    }
    return expired.size();
}

void Service::sweeper() {
    const auto interval = std::clamp<std::chrono::seconds>(cfg_.session_ttl / 10, std::chrono::seconds(1),
                                                           std::chrono::seconds(60));
    std::unique_lock lock(sweep_mutex_);
    while (!sweep_cv_.wait_for(lock, interval, [&] { return stopping_; })) {
        lock.unlock();
        expire_now();
        lock.lock();
    }
}

void Service::routes() {
    auto& srv = *server_;

    if (!cfg_.auth_token_env_var.empty()) {
        const char* token = env(cfg_.auth_token_env_var.c_str());
        if (!token)
            throw Error(ErrorCode::ConfigError, "auth token variable " + cfg_.auth_token_env_var + " is not set");
        const std::string expected = std::string("Bearer ") + token;
        srv.set_pre_routing_handler([expected](const httplib::Request& req, httplib::Response& res) {
            if (req.path == "/healthz" || req.get_header_value("Authorization") == expected)
                return httplib::Server::HandlerResponse::Unhandled;
            send_error(res, ErrorCode::Auth, "missing or invalid bearer token");
            return httplib::Server::HandlerResponse::Handled;
        });
    }

    srv.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}, {"sessions", store_.ids().size()}, {"backends", registry_->ids()}});
    });

    srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = parse_body(req);
            StaticProfile profile;
            DiagnosticProfile diagnostics;
            try {
                profile = static_profile_from_json(required(body, "profile"));
                diagnostics = diagnostic_profile_from_json(required(body, "diagnostics"));
            } catch (const Error& ex) {
                throw Error(ErrorCode::SchemaViolation, ex.what());
            }
            const auto backend = required(body, "backend").get<std::string>();
            const auto seed = body.value("seed", std::uint64_t{0});
            const Timestamp start{body.value("start", std::int64_t{0})};
            if (start.minutes < 0) throw Error(ErrorCode::SchemaViolation, "'start' must be non-negative");
            if (!registry_->contains(backend))
                throw Error(ErrorCode::UnknownBackend, "unknown backend '" + backend + "'");
            const auto s = store_.create(std::move(profile), std::move(diagnostics), backend, start, seed);
            {
                std::lock_guard lock(meta_mutex_);
                meta_[s.id].created_at = utc_now();
            }
            persist(s.id);
            send_json(res, 201, descriptor(s));
        });
    });

    srv.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto s = store_.get(req.matches[1]);
            json history = json::array();
            for (const auto& set : s.state.history) history.push_back(to_json(set));
            send_json(res, 200,
                      {{"session", descriptor(s)},
                       {"profile", to_json(s.state.profile)},
                       {"diagnostics", to_json(s.state.diagnostics)},
                       {"history", history}});
        });
    });

    srv.Post(R"(/sessions/([^/]+)/step)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            store_.get(id);  // 404 before body errors
            const auto body = parse_body(req);
            StepRequest step;
            const auto& at = required(body, "at");
            if (!at.is_number_integer()) throw Error(ErrorCode::SchemaViolation, "'at' must be integer minutes");
            step.at = Timestamp{at.get<std::int64_t>()};
            const auto& actions = required(body, "actions");
            if (!actions.is_array()) throw Error(ErrorCode::SchemaViolation, "'actions' must be a list");
            for (const auto& a : actions) step.actions.push_back(action_from_json(a));
            const auto result = store_.step(id, step);
            persist(id);
            send_json(res, 200, {{"event_set", to_json(result.event_set)}, {"session", descriptor(result.session)}});
        });
    });

    srv.Post(R"(/sessions/([^/]+)/branch)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            store_.get(id);
            const auto body = parse_body(req);
            const auto& at = required(body, "at_step");
            if (!at.is_number_integer() || at.get<std::int64_t>() < 0)
                throw Error(ErrorCode::SchemaViolation, "'at_step' must be a non-negative integer");
            const auto b = store_.branch(id, at.get<std::size_t>());
            {
                std::lock_guard lock(meta_mutex_);
                meta_[b.id].created_at = utc_now();
            }
            persist(b.id);
            send_json(res, 200, descriptor(b));
        });
    });

    srv.Post("/evaluate", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = parse_body(req);
            const auto pred = corpus_from(body, "predicted", "predicted_path", cfg_.data_dir);
            const auto truth = corpus_from(body, "truth", "truth_path", cfg_.data_dir);
            ReferenceRangeTable ranges;
            if (const auto it = body.find("ranges"); it != body.end())
                ranges = reference_ranges_from_json(*it);
            else if (const auto p = body.find("ranges_path"); p != body.end())
                ranges = load_reference_ranges(data_path(cfg_.data_dir, p->get<std::string>()));
            else if (!cfg_.ranges_path.empty())
                ranges = load_reference_ranges(cfg_.ranges_path);
            const auto ev = evaluate_corpus(pred, truth, ranges, cfg_.evaluate_jobs);
            json episodes = json::array();
            for (std::size_t i = 0; i < ev.admission_ids.size(); ++i)
                episodes.push_back({{"admission_id", ev.admission_ids[i]},
                                    {"report", ev.per_episode[i] ? to_json(*ev.per_episode[i]) : json(nullptr)}});
            send_json(res, 200, {{"aggregate", to_json(ev.aggregate)}, {"episodes", episodes}});
        });
    });
}

} // namespace trajsim
