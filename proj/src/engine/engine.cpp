#include "trajsim/engine.hpp"

#include "trajsim/error.hpp"
#include "trajsim/random.hpp"
#include "trajsim/validation.hpp"

#include <cmath>
#include <cstdio>

namespace trajsim {

std::string IdGenerator::next() {
    const auto n = counter_.fetch_add(1);
    char buf[24];
    std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(derive(seed_, {n})));
    return buf;
}

std::uint64_t session_stream(std::uint64_t rng_seed) { return derive(rng_seed, {0x5E55'10A5ULL}); }

Session init_session(IdGenerator& ids, const BackendRegistry& registry, const std::string& backend_id,
                     StaticProfile profile, DiagnosticProfile diagnostics, Timestamp start, std::uint64_t seed) {
    if (!registry.contains(backend_id)) throw Error(ErrorCode::UnknownBackend, "unknown backend '" + backend_id + "'");
    if (start.minutes < 0) throw Error(ErrorCode::InvalidArgument, "start timestamp must be non-negative");
    Session s;
    s.id = ids.next();
    s.state.now = start;
    s.state.profile = std::move(profile);
    s.state.diagnostics = std::move(diagnostics);
    s.backend_ref = backend_id;
    s.rng_seed = seed;
    s.start = start;
    return s;
}

namespace {

void check_request(const Session& session, const StepRequest& request) {
    if (request.actions.empty()) throw Error(ErrorCode::InvalidArgument, "step needs at least one action");
    const bool fresh = session.state.history.empty();
    if (fresh ? request.at < session.state.now : !(session.state.now < request.at))
        throw Error(ErrorCode::NonMonotonicTime, "step at t=" + std::to_string(request.at.minutes) +
                                                     " does not follow t=" + std::to_string(session.state.now.minutes));
    for (const auto& a : request.actions) {
        bool canonical = false;
        try {
            canonical = canonicalize_code(a.code) == a.code;
        } catch (const Error&) {
        }
        if (!canonical) throw Error(ErrorCode::InvalidArgument, "action code '" + a.code + "' is not canonical");
    }
}

// Empty string when the outcomes honor the backend contract.
std::string contract_breach(std::span<const Action> actions, const std::vector<Outcome>& outcomes) {
    if (outcomes.size() != actions.size())
        return "expected " + std::to_string(actions.size()) + " outcomes, got " + std::to_string(outcomes.size());
    for (std::size_t i = 0; i < actions.size(); ++i) {
        auto problems = validate_event(Event{actions[i], outcomes[i]});
        if (!problems.empty()) return "action " + std::to_string(i + 1) + " ('" + actions[i].code + "'): " +
                                      format_violations(problems);
    }
    return {};
}

} // namespace

StepResult step(const Session& session, const StepRequest& request, const OutcomeModel& backend,
                const StepOptions& options) {
    check_request(session, request);

    std::vector<Action> actions = request.actions;
    sort_canonical(actions);

    PatientState conditioning{request.at, session.state.profile, session.state.diagnostics, session.state.history};
    const SamplingContext ctx{session_stream(session.rng_seed)};

    std::vector<Outcome> outcomes;
    std::string breach;
    for (int attempt = 0; attempt <= options.max_malformed_retries; ++attempt) {
        try {
            outcomes = backend.predict(conditioning, actions, ctx);
        } catch (const Error& ex) {
            throw Error(ErrorCode::BackendFailure, "backend '" + backend.id() + "' failed: " +
                                                       std::string(to_string(ex.code())) + ": " + ex.what());
        } catch (const std::exception& ex) {
            throw Error(ErrorCode::BackendFailure, "backend '" + backend.id() + "' failed: " + ex.what());
        }
        breach = contract_breach(actions, outcomes);
        if (breach.empty()) break;
    }
    if (!breach.empty()) throw Error(ErrorCode::MalformedOutcome, "backend '" + backend.id() + "': " + breach);

    StepResult result;
    result.event_set.timestamp = request.at;
    result.event_set.events.reserve(actions.size());
    for (std::size_t i = 0; i < actions.size(); ++i)
        result.event_set.events.push_back(Event{std::move(actions[i]), std::move(outcomes[i])});

    result.session = session;
    result.session.state.history = std::move(conditioning.history);
    result.session.state.history.push_back(result.event_set);
    result.session.state.now = request.at;
    return result;
}

Session branch(const Session& session, std::size_t at_step, IdGenerator& ids) {
    const auto& history = session.state.history;
    if (at_step > history.size())
        throw Error(ErrorCode::OutOfRange, "branch step " + std::to_string(at_step) + " exceeds history length " +
                                               std::to_string(history.size()));
    Session b;
    b.id = ids.next();
    b.state.profile = session.state.profile;
    b.state.diagnostics = session.state.diagnostics;
    b.state.history.assign(history.begin(), history.begin() + static_cast<std::ptrdiff_t>(at_step));
    b.state.now = at_step == 0 ? session.start : b.state.history.back().timestamp;
    b.backend_ref = session.backend_ref;
    b.parent = ParentRef{session.id, at_step};
    b.rng_seed = session.rng_seed;
    b.start = session.start;
    return b;
}

SessionStore::SessionStore(std::shared_ptr<const BackendRegistry> registry, std::uint64_t id_seed,
                           StepOptions options)
    : registry_(std::move(registry)), options_(options), ids_(id_seed) {}

SessionStore::Slot& SessionStore::slot(const std::string& id) {
    auto it = slots_.find(id);
    if (it == slots_.end()) throw Error(ErrorCode::UnknownSession, "unknown session '" + id + "'");
    it->second.last_access = std::chrono::steady_clock::now();
    return it->second;
}

Session SessionStore::create(StaticProfile profile, DiagnosticProfile diagnostics, const std::string& backend_id,
                             Timestamp start, std::uint64_t seed) {
    auto s = init_session(ids_, *registry_, backend_id, std::move(profile), std::move(diagnostics), start, seed);
    std::lock_guard lock(mutex_);
    while (slots_.count(s.id)) s.id = ids_.next();  // ids restored from disk
    slots_[s.id] = Slot{s, false, std::chrono::steady_clock::now()};
    return s;
}

StepResult SessionStore::step(const std::string& id, const StepRequest& request) {
    Session snapshot;
    {
        std::lock_guard lock(mutex_);
        auto& s = slot(id);
        if (s.busy) throw Error(ErrorCode::ConcurrentStep, "session '" + id + "' already has a step in flight");
        s.busy = true;
        snapshot = s.session;
    }
    try {
        auto backend = registry_->get(snapshot.backend_ref);
        auto result = trajsim::step(snapshot, request, *backend, options_);
        std::lock_guard lock(mutex_);
        auto& s = slot(id);
        s.session = result.session;
        s.busy = false;
        return result;
    } catch (...) {
        std::lock_guard lock(mutex_);
        if (auto it = slots_.find(id); it != slots_.end()) it->second.busy = false;
        throw;
    }
}

Session SessionStore::branch(const std::string& id, std::size_t at_step) {
    std::lock_guard lock(mutex_);
    auto b = trajsim::branch(slot(id).session, at_step, ids_);
    while (slots_.count(b.id)) b.id = ids_.next();
    slots_[b.id] = Slot{b, false, std::chrono::steady_clock::now()};
    return b;
}

Session SessionStore::get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = slots_.find(id);
    if (it == slots_.end()) throw Error(ErrorCode::UnknownSession, "unknown session '" + id + "'");
    return it->second.session;
}

void SessionStore::insert(Session session) {
    std::lock_guard lock(mutex_);
    const auto id = session.id;
    slots_[id] = Slot{std::move(session), false, std::chrono::steady_clock::now()};
}

bool SessionStore::erase(const std::string& id) {
    std::lock_guard lock(mutex_);
    return slots_.erase(id) > 0;
}

std::vector<std::string> SessionStore::ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : slots_) out.push_back(id);
    return out;
}

std::vector<std::string> SessionStore::expire_idle(std::chrono::steady_clock::duration ttl) {
    const auto now = std::chrono::steady_clock::now();
    std::lock_guard lock(mutex_);
    std::vector<std::string> expired;
    for (auto it = slots_.begin(); it != slots_.end();) {
        if (!it->second.busy && now - it->second.last_access > ttl) {
            expired.push_back(it->first);
            it = slots_.erase(it);
        } else {
            ++it;
        }
    }
    return expired;
}

} // namespace trajsim
