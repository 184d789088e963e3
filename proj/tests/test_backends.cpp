#include "support/builders.hpp"
#include "support/chat_stub.hpp"

#include "trajsim/backend_config.hpp"
#include "trajsim/error.hpp"
#include "trajsim/oracle.hpp"
#include "trajsim/prompt.hpp"
#include "trajsim/random.hpp"
#include "trajsim/remote.hpp"
#include "trajsim/replay.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>

using namespace trajsim;
using namespace testing_support;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::InvalidArgument;
}

PatientState state_at(std::int64_t now, std::vector<EventSet> history = {}) {
    PatientState s;
    s.now = Timestamp{now};
    s.profile = profile();
    s.diagnostics = diagnostics();
    s.history = std::move(history);
    return s;
}

// Heun integration of dx/dt = -lambda (x - b) in one-second steps,
// applying intervention deltas when their minute is reached.
double euler_latent(const OracleConfig& cfg, const std::string& code, const std::vector<EventSet>& history,
                    std::int64_t at_minutes) {
    const auto& spec = cfg.analytes.at(code);
    double x = spec.baseline;
    const double dt_hours = 1.0 / 3600.0;
    std::size_t next = 0;
    for (std::int64_t minute = 0;; ++minute) {
        while (next < history.size() && history[next].timestamp.minutes == minute) {
            for (const auto& ev : history[next].events) {
                if (ev.action.kind != ActionKind::Intervention) continue;
                auto it = cfg.interventions.find(ev.action.code);
                if (it == cfg.interventions.end()) continue;
                for (const auto& eff : it->second)
                    if (eff.target == code) x += eff.delta;
            }
            ++next;
        }
        if (minute == at_minutes) return x;
        for (int s = 0; s < 60; ++s) {
            const double k1 = -spec.decay_rate * (x - spec.baseline);
            const double k2 = -spec.decay_rate * (x + k1 * dt_hours - spec.baseline);
            x += 0.5 * (k1 + k2) * dt_hours;
        }
    }
}

} // namespace

TEST_CASE("latent at a fixed point stays at baseline") {
    const auto cfg = small_oracle();
    for (std::int64_t t : {0, 1, 600, 100000}) CHECK(oracle_latent(cfg, "sodium", {}, Timestamp{t}) == 140.0);
}

TEST_CASE("relaxation from 150 toward 140 over ten hours") {
    OracleConfig cfg;
    cfg.analytes["sodium"] = {140.0, "mEq/L", 0.1};
    cfg.interventions["bump"] = {{"sodium", 10.0}};
    const std::vector<EventSet> history{at(0, {given("bump")})};
    const double closed = oracle_latent(cfg, "sodium", history, Timestamp{600});
    CHECK(closed == doctest::Approx(143.679).epsilon(1e-5));
    CHECK(std::abs(closed - (140.0 + 10.0 * std::exp(-1.0))) < 1e-12);
    CHECK(std::abs(closed - euler_latent(cfg, "sodium", history, 600)) < 1e-3);
}

TEST_CASE("zero decay keeps an intervention delta forever") {
    OracleConfig cfg;
    cfg.analytes["x"] = {100.0, "u", 0.0};
    cfg.interventions["push"] = {{"x", 20.0}};
    const std::vector<EventSet> history{at(0, {given("push")})};
    for (std::int64_t t : {1, 60, 10000}) CHECK(oracle_latent(cfg, "x", history, Timestamp{t}) == 120.0);
}

TEST_CASE("closed form agrees with a fine-step integrator on random configs") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        OracleConfig cfg;
        cfg.analytes["a"] = {rng.uniform(1.0, 200.0), "u", rng.uniform(0.0, 0.3)};
        cfg.interventions["up"] = {{"a", rng.uniform(0.0, 50.0)}};
        cfg.interventions["down"] = {{"a", -rng.uniform(0.0, 50.0)}};
        std::vector<EventSet> history;
        std::int64_t t = 0;
        const int n = static_cast<int>(rng.uniform_int(0, 5));
        for (int i = 0; i < n; ++i) {
            t += rng.uniform_int(1, 240);
            history.push_back(at(t, {rng.bernoulli(0.5) ? given("up") : given("down"), numeric("a", 1.0)}));
        }
        const std::int64_t query = t + rng.uniform_int(0, 600);
        const double closed = oracle_latent(cfg, "a", history, Timestamp{query});
        CHECK(std::abs(closed - euler_latent(cfg, "a", history, query)) < 1e-3);
    }
}

TEST_CASE("interventions only affect later times") {
    const auto cfg = small_oracle();
    const std::vector<EventSet> without{at(0, {numeric("sodium", 140)})};
    std::vector<EventSet> with = without;
    with.push_back(at(300, {given("normal saline bolus")}));
    for (std::int64_t t : {0, 100, 299}) CHECK(oracle_latent(cfg, "sodium", without, Timestamp{t}) ==
                                               oracle_latent(cfg, "sodium", with, Timestamp{t}));
    for (std::int64_t t : {300, 301, 1000}) CHECK(oracle_latent(cfg, "sodium", without, Timestamp{t}) !=
                                                  oracle_latent(cfg, "sodium", with, Timestamp{t}));
}

TEST_CASE("inquiries never move the latent") {
    const auto cfg = small_oracle();
    const std::vector<EventSet> history{at(0, {numeric("sodium", 170)}), at(30, {numeric("sodium", 10)})};
    CHECK(oracle_latent(cfg, "sodium", history, Timestamp{60}) == 140.0);
}

TEST_CASE("unknown analyte is reported") {
    const auto cfg = small_oracle();
    CHECK(code_of([&] { oracle_latent(cfg, "lactate", {}, Timestamp{0}); }) == ErrorCode::UnknownAnalyte);
    const std::vector<Action> actions{inquiry("lactate")};
    CHECK(code_of([&] { oracle_predict(cfg, state_at(0), actions); }) == ErrorCode::UnknownAnalyte);
}

TEST_CASE("oracle predict at admission with no noise") {
    const auto cfg = small_oracle();
    const std::vector<Action> actions{inquiry("sodium"), intervention("normal saline bolus")};
    const auto out = oracle_predict(cfg, state_at(0), actions);
    REQUIRE(out.size() == 2);
    CHECK(std::get<NumericOutcome>(out[0]) == NumericOutcome{140.0, "mEq/L"});
    CHECK(is_empty(out[1]));
}

TEST_CASE("label rules follow the driver threshold") {
    const auto cfg = small_oracle();
    const std::vector<Action> actions{inquiry("blood culture")};
    auto out = oracle_predict(cfg, state_at(0), actions);
    CHECK(std::get<LabelOutcome>(out[0]).values == std::set<std::string>{"no growth"});
    // wbc 8 + 7 = 15 > 11 with no decay.
    out = oracle_predict(cfg, state_at(60, {at(0, {given("infection")})}), actions);
    CHECK(std::get<LabelOutcome>(out[0]).values == std::set<std::string>{"culture positive"});
}

TEST_CASE("every intervention maps to empty") {
    auto cfg = small_oracle(0.2);
    const std::vector<Action> actions{intervention("infection"), intervention("potassium chloride"),
                                      intervention("normal saline bolus")};
    for (const auto& o : oracle_predict(cfg, state_at(10), actions, 99)) CHECK(is_empty(o));
}

TEST_CASE("oracle noise is keyed by stream, step and index") {
    const auto cfg = small_oracle(0.05);
    const std::vector<Action> actions{inquiry("sodium"), inquiry("potassium")};
    const auto s = state_at(30);
    const auto a = oracle_predict(cfg, s, actions, 1);
    const auto b = oracle_predict(cfg, s, actions, 1);
    const auto c = oracle_predict(cfg, s, actions, 2);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(std::get<NumericOutcome>(a[0]).value != 140.0);
    CHECK(oracle_noise(cfg, 1, 0, 0) == oracle_noise(cfg, 1, 0, 0));
    CHECK(oracle_noise(cfg, 1, 0, 0) != oracle_noise(cfg, 1, 1, 0));
    CHECK(oracle_noise(cfg, 1, 0, 0) != oracle_noise(cfg, 1, 0, 1));
    CHECK(oracle_noise(small_oracle(0.0), 1, 0, 0) == 0.0);
}

TEST_CASE("noise magnitude tracks sigma") {
    const auto cfg = small_oracle(0.05);
    double sum = 0, sum_sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double e = oracle_noise(cfg, 7, static_cast<std::size_t>(i), 0);
        sum += e;
        sum_sq += e * e;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum_sq / n - mean * mean);
    CHECK(std::abs(mean) < 0.002);
    CHECK(sd == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("anchored latent follows the last observation") {
    auto cfg = small_oracle();
    cfg.anchor_to_observations = true;
    cfg.analytes["sodium"].decay_rate = 0.0;
    const std::vector<EventSet> history{at(0, {numeric("sodium", 150.0, "mEq/L")})};
    CHECK(oracle_anchored_latent(cfg, "sodium", history, Timestamp{60}) == 150.0);
    CHECK(oracle_latent(cfg, "sodium", history, Timestamp{60}) == 140.0);
}

TEST_CASE("oracle config validation") {
    auto cfg = small_oracle();
    cfg.interventions["ghost"] = {{"lactate", 1.0}};
    CHECK(code_of([&] { validate(cfg); }) == ErrorCode::ConfigError);
    cfg = small_oracle();
    cfg.noise_sigma = -1;
    CHECK(code_of([&] { validate(cfg); }) == ErrorCode::ConfigError);
    cfg = small_oracle();
    cfg.label_rules["urine culture"] = {"lactate", 1.0, {}, {}};
    CHECK(code_of([&] { validate(cfg); }) == ErrorCode::ConfigError);
}

TEST_CASE("oracle config json round-trip") {
    const auto cfg = small_oracle(0.05);
    CHECK(oracle_config_from_json(to_json(cfg)) == cfg);
    const auto shipped = default_oracle();
    CHECK(shipped.analytes.count("sodium") == 1);
    CHECK(shipped.noise_sigma == 0.0);
}

// ---- prompts -----------------------------------------------------------------

TEST_CASE("empty history renders the sentinel") {
    const std::vector<Action> actions{inquiry("sodium")};
    const auto text = render_prompt(default_simulator_template(), state_at(0), actions);
    CHECK(text.find("no prior events") != std::string::npos);
}

TEST_CASE("rendering is deterministic and enumerates actions in order") {
    const std::vector<Action> actions{inquiry("sodium"), inquiry("potassium"), intervention("aspirin")};
    const auto s = state_at(120, {at(0, {numeric("sodium", 140, "mEq/L"), given("normal saline bolus")})});
    const auto a = render_prompt(default_simulator_template(), s, actions);
    CHECK(a == render_prompt(default_simulator_template(), s, actions));
    const auto listed = render_actions(actions);
    CHECK(listed == "1. [INQUIRY] sodium\n2. [INQUIRY] potassium\n3. [INTERVENTION] aspirin");
    CHECK(a.find(listed) != std::string::npos);
    CHECK(a.find("[t+0 min] INQUIRY sodium -> 140.0 mEq/L; INTERVENTION normal saline bolus -> (no value)") !=
          std::string::npos);
    CHECK(a.find("\"1\" to \"3\"") != std::string::npos);
}

TEST_CASE("history truncation keeps the most recent sets") {
    std::vector<EventSet> history;
    for (int i = 0; i < 5; ++i) history.push_back(at(i * 10, {numeric("sodium", 140 + i)}));
    const auto text = render_history(history, 2);
    CHECK(text.find("(3 earlier event sets omitted)") != std::string::npos);
    CHECK(text.find("t+20 min") == std::string::npos);
    CHECK(text.find("t+30 min") != std::string::npos);
    CHECK(text.find("t+40 min") != std::string::npos);
}

TEST_CASE("unknown placeholders are rejected") {
    const std::vector<Action> actions{inquiry("sodium")};
    CHECK(code_of([&] { render_prompt("{{profile}} {{weather}}", state_at(0), actions); }) ==
          ErrorCode::UnknownPlaceholder);
    CHECK(code_of([&] { render_prompt("{{profile", state_at(0), actions); }) == ErrorCode::UnknownPlaceholder);
}

TEST_CASE("built-in template matches the shipped asset") {
    CHECK(default_simulator_template() == read_text_file(asset_dir() / "simulator_prompt.txt"));
}

TEST_CASE("reply parsing maps entries to actions") {
    const std::vector<Action> one{inquiry("potassium")};
    auto out = parse_model_reply(R"(Sure. {"1": {"value": 3.9, "unit": "mEq/L"}})", one);
    REQUIRE(out.size() == 1);
    CHECK(std::get<NumericOutcome>(out[0]) == NumericOutcome{3.9, "mEq/L"});

    out = parse_model_reply("```json\n{\"1\": {\"value\": \"4.4 mEq/L\"}}\n```", one);
    CHECK(std::get<NumericOutcome>(out[0]) == NumericOutcome{4.4, "mEq/L"});

    const std::vector<Action> mixed{inquiry("blood culture"), intervention("aspirin")};
    out = parse_model_reply(R"({"1": {"labels": ["E. Coli"]}, "2": null})", mixed);
    CHECK(std::get<LabelOutcome>(out[0]).values == std::set<std::string>{"e. coli"});
    CHECK(is_empty(out[1]));
}

TEST_CASE("reply parsing errors") {
    const std::vector<Action> three{inquiry("sodium"), inquiry("potassium"), inquiry("glucose")};
    CHECK(code_of([&] { parse_model_reply(R"({"1": 1, "2": 2})", three); }) == ErrorCode::CountMismatch);
    CHECK(code_of([&] { parse_model_reply(R"({"1": 1, "2": 2, "4": 3})", three); }) == ErrorCode::CountMismatch);
    CHECK(code_of([&] { parse_model_reply("no json here", three); }) == ErrorCode::NoStructuredBlock);

    const std::vector<Action> inter{intervention("aspirin")};
    CHECK(code_of([&] { parse_model_reply(R"({"1": {"value": 5}})", inter); }) == ErrorCode::TypeMismatch);
    const std::vector<Action> inq{inquiry("sodium")};
    CHECK(code_of([&] { parse_model_reply(R"({"1": {"value": "high"}})", inq); }) == ErrorCode::TypeMismatch);
    CHECK(code_of([&] { parse_model_reply(R"({"1": null})", inq); }) == ErrorCode::TypeMismatch);
}

// ---- remote ------------------------------------------------------------------

namespace {

RemoteConfig stub_config(const ChatStub& stub, int retries) {
    RemoteConfig cfg;
    cfg.endpoint_url = stub.url();
    cfg.model_name = "stub";
    cfg.max_retries = retries;
    cfg.timeout = std::chrono::milliseconds(5000);
    return cfg;
}

} // namespace

TEST_CASE("remote predict returns parsed outcomes") {
    ChatStub stub([](int, const std::string&) { return R"({"1": {"value": 3.9, "unit": "mEq/L"}, "2": null})"; });
    ChatClient client(stub_config(stub, 0));
    const std::vector<Action> actions{inquiry("potassium"), intervention("aspirin")};
    const auto out = remote_predict(client, default_simulator_template(), state_at(0), actions);
    CHECK(std::get<NumericOutcome>(out[0]).value == 3.9);
    CHECK(is_empty(out[1]));
    CHECK(stub.calls() == 1);
    const auto req = stub.requests().at(0);
    CHECK(req.at("model") == "stub");
    CHECK(req.at("temperature") == 0.0);
    CHECK(stub.messages()[0].find("1. [INQUIRY] potassium") != std::string::npos);
}

TEST_CASE("remote predict retries with a corrective instruction") {
    ChatStub stub([](int attempt, const std::string&) {
        return attempt == 0 ? std::string("garbage") : std::string(R"({"1": 4.0})");
    });
    ChatClient client(stub_config(stub, 1));
    const std::vector<Action> actions{inquiry("potassium")};
    const auto out = remote_predict(client, default_simulator_template(), state_at(0), actions);
    CHECK(std::get<NumericOutcome>(out[0]).value == 4.0);
    CHECK(stub.calls() == 2);
    const auto msgs = stub.messages();
    CHECK(msgs[1].size() > msgs[0].size());
    CHECK(msgs[1].rfind(msgs[0], 0) == 0);
}

TEST_CASE("remote predict gives up after max_retries + 1 attempts") {
    ChatStub stub([](int, const std::string&) { return std::string("still not json"); });
    ChatClient client(stub_config(stub, 2));
    const std::vector<Action> actions{inquiry("potassium")};
    try {
        remote_predict(client, default_simulator_template(), state_at(0), actions);
        FAIL("expected ExhaustedRetries");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ExhaustedRetries);
        CHECK(std::string(e.what()).find("no_structured_block") != std::string::npos);
    }
    CHECK(stub.calls() == 3);
}

TEST_CASE("remote transport and auth failures") {
    {
        ChatStub stub([](int, const std::string&) { return std::string("{}"); }, 401);
        ChatClient client(stub_config(stub, 2));
        CHECK(code_of([&] { client.complete("hi"); }) == ErrorCode::Auth);
        CHECK(stub.calls() == 1);
    }
    {
        ChatStub stub([](int, const std::string&) { return std::string("{}"); }, 500);
        ChatClient client(stub_config(stub, 2));
        CHECK(code_of([&] { client.complete("hi"); }) == ErrorCode::Transport);
    }
    RemoteConfig cfg;
    cfg.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
    cfg.timeout = std::chrono::milliseconds(500);
    ChatClient dead(cfg);
    CHECK(code_of([&] { dead.complete("hi"); }) == ErrorCode::Transport);
}

TEST_CASE("remote bearer token comes from the named variable") {
    ChatStub stub([](int, const std::string&) { return std::string("ok"); });
    auto cfg = stub_config(stub, 0);
    cfg.auth_token_env_var = "TRAJSIM_TEST_TOKEN_VAR";
    ::unsetenv("TRAJSIM_TEST_TOKEN_VAR");
    ChatClient missing(cfg);
    CHECK(code_of([&] { missing.complete("hi"); }) == ErrorCode::Auth);
    ::setenv("TRAJSIM_TEST_TOKEN_VAR", "s3cret", 1);
    ChatClient client(cfg);
    CHECK(client.complete("hi") == "ok");
    CHECK(stub.authorization() == "Bearer s3cret");
    ::unsetenv("TRAJSIM_TEST_TOKEN_VAR");
}

TEST_CASE("remote config validation") {
    auto j = nlohmann::json{{"endpoint_url", "http://x/v1/chat/completions"}, {"max_retries", -1}};
    CHECK(code_of([&] { remote_config_from_json(j); }) == ErrorCode::ConfigError);
    j = {{"model_name", "m"}};
    CHECK(code_of([&] { remote_config_from_json(j); }) == ErrorCode::ConfigError);
    const auto shipped = remote_config_from_json(read_json_file(config_dir() / "remote_example.json"), config_dir());
    CHECK(shipped.temperature == 0.0);
    CHECK(read_text_file(shipped.prompt_template_path) == default_simulator_template());
}

// ---- replay ------------------------------------------------------------------

TEST_CASE("replay returns recorded outcomes") {
    const auto src = episode("p1", "a1",
                             {at(0, {numeric("sodium", 141, "mEq/L"), given("aspirin")}),
                              at(60, {labels("blood culture", {"e. coli"})})});
    const std::vector<Action> actions{intervention("aspirin"), inquiry("sodium")};
    auto out = replay_predict(src, state_at(0), actions);
    CHECK(is_empty(out[0]));
    CHECK(std::get<NumericOutcome>(out[1]).value == 141);

    CHECK(code_of([&] { replay_predict(src, state_at(30), actions); }) == ErrorCode::PositionNotFound);
    const std::vector<Action> other{inquiry("glucose")};
    CHECK(code_of([&] { replay_predict(src, state_at(0), other); }) == ErrorCode::PositionNotFound);
}

TEST_CASE("replay backend picks the source by profile") {
    auto a = episode("p1", "a1", {at(0, {numeric("sodium", 141)})});
    auto b = episode("p2", "a2", {at(0, {numeric("sodium", 150)})});
    b.profile.age = 30;
    ReplayBackend backend("truth", std::vector<Episode>{a, b});
    auto s = state_at(0);
    s.profile = b.profile;
    const std::vector<Action> actions{inquiry("sodium")};
    CHECK(std::get<NumericOutcome>(backend.predict(s, actions, {})[0]).value == 150);
}

// ---- registry ----------------------------------------------------------------

TEST_CASE("registry loads the shipped backends with overrides") {
    const auto reg = load_backend_registry_file(config_dir() / "backends.json");
    CHECK(reg.ids() == std::vector<std::string>{"oracle", "oracle-tracking"});
    const auto tracking = std::dynamic_pointer_cast<const OracleBackend>(reg.get("oracle-tracking"));
    REQUIRE(tracking);
    CHECK(tracking->config().noise_sigma == 0.05);
    CHECK(tracking->config().anchor_to_observations);
    CHECK(code_of([&] { reg.get("missing"); }) == ErrorCode::UnknownBackend);
}

TEST_CASE("registry rejects malformed entries") {
    CHECK(code_of([] { load_backend_registry(nlohmann::json::object(), {}); }) == ErrorCode::ConfigError);
    const auto bad_kind = nlohmann::json{{"backends", {{{"id", "x"}, {"kind", "quantum"}}}}};
    CHECK(code_of([&] { load_backend_registry(bad_kind, {}); }) == ErrorCode::ConfigError);
    const auto dup = nlohmann::json{{"backends",
                                     {{{"id", "o"}, {"kind", "oracle"}, {"config", to_json(small_oracle())}},
                                      {{"id", "o"}, {"kind", "oracle"}, {"config", to_json(small_oracle())}}}}};
    CHECK(code_of([&] { load_backend_registry(dup, {}); }) == ErrorCode::ConfigError);
}
