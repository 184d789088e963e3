#pragma once

#include "trajsim/domain.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace trajsim {

struct Capabilities {
    bool numeric = true;
    bool label = true;
};

// Per-call sampling information supplied by the engine. `stream` is the
// session's noise substream; backends combine it with the step count
// (history length) and the action index.
struct SamplingContext {
    std::uint64_t stream = 0;
};

// Contract for P(outcomes | state, actions).
//
// predict() receives the whole action set of one step and must return one
// outcome per action, index-aligned. Interventions map to EmptyOutcome.
// Implementations must be safe to call concurrently.
class OutcomeModel {
public:
    virtual ~OutcomeModel() = default;

    virtual const std::string& id() const = 0;
    virtual Capabilities capabilities() const { return {}; }

    virtual std::vector<Outcome> predict(const PatientState& state,
                                         std::span<const Action> actions,
                                         const SamplingContext& ctx) const = 0;
};

class BackendRegistry {
public:
    void add(std::shared_ptr<const OutcomeModel> backend);

    // Throws Error(UnknownBackend).
    std::shared_ptr<const OutcomeModel> get(const std::string& id) const;
    bool contains(const std::string& id) const { return backends_.count(id) != 0; }
    std::vector<std::string> ids() const;

private:
    std::map<std::string, std::shared_ptr<const OutcomeModel>> backends_;
};

} // namespace trajsim
