#pragma once
// Sequential simulation: one step turns a set of actions at a timestamp into
// an event set, appends it to the history and advances the clock.

#include "trajsim/outcome_model.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace trajsim {

struct ParentRef {
    std::string session_id;
    std::size_t step = 0;

    bool operator==(const ParentRef&) const = default;
};

// After a step, state.now equals the timestamp of the last event set; the
// conditioning state handed to the backend always has history strictly
// before its `now`.
struct Session {
    std::string id;
    PatientState state;
    std::string backend_ref;
    std::optional<ParentRef> parent;
    std::uint64_t rng_seed = 0;
    Timestamp start;

    bool operator==(const Session&) const = default;
};

struct StepRequest {
    Timestamp at;
    std::vector<Action> actions;
};

struct StepOptions {
    // Extra backend calls allowed when the backend returns outcomes that break
    // the kind/outcome contract.
    int max_malformed_retries = 2;
};

struct StepResult {
    EventSet event_set;
    Session session;
};

// Opaque ids from a seeded counter; replayable given the seed.
class IdGenerator {
public:
    explicit IdGenerator(std::uint64_t seed = 0) : seed_(seed) {}

    std::string next();

private:
    std::uint64_t seed_;
    std::atomic<std::uint64_t> counter_{0};
};

// Noise substream of a session.
std::uint64_t session_stream(std::uint64_t rng_seed);

// Throws Error(UnknownBackend) when `backend_id` is not registered.
Session init_session(IdGenerator& ids, const BackendRegistry& registry, const std::string& backend_id,
                     StaticProfile profile, DiagnosticProfile diagnostics, Timestamp start, std::uint64_t seed);

// Pure step. The first step of a session may be stamped at the start time;
// later steps must be strictly later than state.now. Actions are put in
// canonical order before the backend sees them.
//
// Throws NonMonotonicTime, InvalidArgument, MalformedOutcome or
// BackendFailure. The input session is never modified.
StepResult step(const Session& session, const StepRequest& request, const OutcomeModel& backend,
                const StepOptions& options = {});

// Copy of the first `at_step` event sets with the same profile, diagnostics
// and seed. Throws Error(OutOfRange).
Session branch(const Session& session, std::size_t at_step, IdGenerator& ids);

// Thread-safe owner of live sessions. A session accepts one step at a time;
// a second concurrent step fails with ConcurrentStep and leaves the session
// unchanged.
class SessionStore {
public:
    SessionStore(std::shared_ptr<const BackendRegistry> registry, std::uint64_t id_seed = 0,
                 StepOptions options = {});

    Session create(StaticProfile profile, DiagnosticProfile diagnostics, const std::string& backend_id,
                   Timestamp start, std::uint64_t seed);
    StepResult step(const std::string& id, const StepRequest& request);
    Session branch(const std::string& id, std::size_t at_step);
    Session get(const std::string& id) const;

    // Adds a restored session verbatim.
    void insert(Session session);
    bool erase(const std::string& id);
    std::vector<std::string> ids() const;

    // Removes sessions idle for longer than `ttl`; returns their ids.
    std::vector<std::string> expire_idle(std::chrono::steady_clock::duration ttl);

    const BackendRegistry& registry() const { return *registry_; }

private:
    struct Slot {
        Session session;
        bool busy = false;
        std::chrono::steady_clock::time_point last_access;
    };

    Slot& slot(const std::string& id);

    std::shared_ptr<const BackendRegistry> registry_;
    StepOptions options_;
    IdGenerator ids_;
    mutable std::mutex mutex_;
    std::map<std::string, Slot> slots_;
};

} // namespace trajsim
