#include "trajsim/cli.hpp"

#include "trajsim/backend_config.hpp"
#include "trajsim/digest.hpp"
#include "trajsim/episode_io.hpp"
#include "trajsim/extraction.hpp"
#include "trajsim/generator.hpp"
#include "trajsim/metrics.hpp"
#include "trajsim/parallel.hpp"
#include "trajsim/pipeline.hpp"
#include "trajsim/replay.hpp"
#include "trajsim/rollout.hpp"
#include "trajsim/service.hpp"
#include "trajsim/validation.hpp"

#include <CLI11.hpp>

#include <pthread.h>
#include <signal.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#ifndef TRAJSIM_DEFAULT_ASSET_DIR
#define TRAJSIM_DEFAULT_ASSET_DIR "assets"
#endif

namespace trajsim {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownBackend:
    case ErrorCode::UnknownPlaceholder:
    case ErrorCode::InvalidArgument: return kExitConfig;
    case ErrorCode::ParseError:
    case ErrorCode::SchemaViolation:
    case ErrorCode::AlignmentError:
    case ErrorCode::EmptyCorpus:
    case ErrorCode::EmptyInput:
    case ErrorCode::MalformedRow:
    case ErrorCode::NoRangedPairs:
    case ErrorCode::EmptyCode:
    case ErrorCode::NonMonotonicTime:
    case ErrorCode::PositionNotFound: return kExitData;
    default: return kExitRuntime;
    }
}

namespace {

void log(const std::string& cmd, const std::string& msg) { std::cerr << "trajsim " << cmd << ": " << msg << '\n'; }

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Run record written next to the primary output as "<out>.manifest.json".
class Manifest {
public:
    Manifest(std::string command, const std::vector<std::string>& args)
        : command_(std::move(command)), args_(args), started_(utc_now()), t0_(std::chrono::steady_clock::now()) {}

    void config(const fs::path& p) { configs_[p.string()] = sha256_file(p); }
    void input(const fs::path& p) { inputs_[p.string()] = sha256_file(p); }
    void output(const fs::path& p) { outputs_.push_back(p); }
    void seed(const std::string& name, std::uint64_t v) { seeds_[name] = v; }
    void set(const std::string& key, json v) { extra_[key] = std::move(v); }

    void write(const fs::path& path) const {
        json outs = json::object();
        for (const auto& p : outputs_) outs[p.string()] = fs::exists(p) ? json(sha256_file(p)) : json(nullptr);
        const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        json m{{"command", command_},
               {"tool_version", kToolVersion},
               {"args", args_},
               {"config_digests", configs_},
               {"input_digests", inputs_},
               {"output_digests", outs},
               {"seeds", seeds_},
               {"started_at", started_},
               {"finished_at", utc_now()},
               {"wall_clock_seconds", secs}};
        if (!extra_.empty()) m["details"] = extra_;
        write_text_file(path, m.dump(2) + "\n");
    }

private:
    std::string command_;
    std::vector<std::string> args_;
    std::string started_;
    std::chrono::steady_clock::time_point t0_;
    json configs_ = json::object();
    json inputs_ = json::object();
    json seeds_ = json::object();
    json extra_ = json::object();
    std::vector<fs::path> outputs_;
};

fs::path manifest_path(const std::string& override_path, const fs::path& primary) {
    if (!override_path.empty()) return override_path;
    auto p = primary;
    p += ".manifest.json";
    return p;
}

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

void check_corpus(const std::vector<Episode>& corpus, const std::string& what) {
    for (const auto& e : corpus) {
        const auto v = validate_episode(e);
        if (!v.ok())
            throw Error(ErrorCode::SchemaViolation,
                        what + " episode " + e.admission_id + ": " + format_violations(v.violations));
    }
}

// ---- generate ----------------------------------------------------------------

struct GenerateArgs {
    std::string config, oracle, out, report, manifest;
    std::uint64_t seed = 0;
    std::optional<std::size_t> n;
};

int cmd_generate(const GenerateArgs& a, const std::vector<std::string>& argv) {
    Manifest m("generate", argv);
    const fs::path cfg_path(a.config);
    const auto cfg_json = read_json_file(cfg_path);
    m.config(cfg_path);
    auto gen = gen_config_from_json(cfg_json);
    if (a.n) gen.n_episodes = *a.n;

    fs::path oracle_path = a.oracle;
    if (oracle_path.empty()) {
        if (!cfg_json.contains("oracle_path"))
            throw Error(ErrorCode::ConfigError, "no oracle config: pass --oracle or set 'oracle_path'");
        oracle_path = cfg_path.parent_path() / cfg_json["oracle_path"].get<std::string>();
    }
    const auto oracle = oracle_config_from_json(read_json_file(oracle_path));
    m.config(oracle_path);
    m.seed("seed", a.seed);

    GenerationReport rep;
    const auto corpus = generate_synthetic_corpus(oracle, gen, a.seed, &rep);
    write_corpus_file(a.out, corpus);
    m.output(a.out);
    const json rj{{"episodes", rep.episodes},
                  {"injections", rep.injections},
                  {"suppressed_observations", rep.suppressed_observations}};
    if (!a.report.empty()) {
        write_json(a.report, rj);
        m.output(a.report);
    }
    m.set("generation", rj);
    m.write(manifest_path(a.manifest, a.out));
    log("generate", std::to_string(rep.episodes) + " episodes, " + std::to_string(rep.injections) +
                        " injected jumps -> " + a.out);
    return kExitOk;
}

// ---- assemble ----------------------------------------------------------------

struct AssembleArgs {
    std::string statics, events, out, report, manifest;
};

int cmd_assemble(const AssembleArgs& a, const std::vector<std::string>& argv) {
    Manifest m("assemble", argv);
    std::ifstream s(a.statics, std::ios::binary), e(a.events, std::ios::binary);
    if (!s) throw Error(ErrorCode::Io, "cannot open '" + a.statics + "'");
    if (!e) throw Error(ErrorCode::Io, "cannot open '" + a.events + "'");
    m.input(a.statics);
    m.input(a.events);
    AssemblyReport rep;
    const auto corpus = assemble_episodes(s, e, &rep);
    write_corpus_file(a.out, corpus);
    m.output(a.out);
    if (!a.report.empty()) {
        write_json(a.report, rep.to_json());
        m.output(a.report);
    }
    for (const auto& msg : rep.messages) log("assemble", msg);
    m.set("assembly", rep.to_json());
    m.write(manifest_path(a.manifest, a.out));
    log("assemble", std::to_string(rep.episodes) + " episodes from " + std::to_string(rep.rows_read) + " rows");
    return kExitOk;
}

// ---- filter ------------------------------------------------------------------

struct FilterArgs {
    std::string in, out, report, config, thresholds, manifest;
};

int cmd_filter(const FilterArgs& a, const std::vector<std::string>& argv) {
    Manifest m("filter", argv);
    const auto corpus = read_corpus_file(a.in);
    m.input(a.in);
    check_corpus(corpus, "input");
    FilterResult result;
    if (!a.thresholds.empty()) {
        const auto j = read_json_file(a.thresholds);
        m.config(a.thresholds);
        result = filter_corpus(corpus, filter_thresholds_from_json(j.contains("thresholds") ? j["thresholds"] : j));
    } else {
        FilterConfig cfg;
        if (!a.config.empty()) {
            cfg = filter_config_from_json(read_json_file(a.config));
            m.config(a.config);
        }
        if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "input corpus is empty");
        result = filter_corpus(corpus, cfg);
    }
    write_corpus_file(a.out, result.kept);
    m.output(a.out);
    if (!a.report.empty()) {
        write_json(a.report, result.report.to_json());
        m.output(a.report);
    }
    m.set("thresholds", to_json(result.report.thresholds));
    m.write(manifest_path(a.manifest, a.out));
    log("filter", "kept " + std::to_string(result.report.kept) + " of " + std::to_string(result.report.input));
    for (const auto& [rule, n] : result.report.rejected_by_rule) log("filter", "  " + rule + ": " + std::to_string(n));
    return kExitOk;
}

// ---- split -------------------------------------------------------------------

struct SplitArgs {
    std::string in, train, test, manifest_out, stratify_by = "primary_diagnosis", manifest;
    double test_fraction = 0.1;
    std::uint64_t seed = 0;
};

int cmd_split(const SplitArgs& a, const std::vector<std::string>& argv) {
    Manifest m("split", argv);
    auto corpus = read_corpus_file(a.in);
    m.input(a.in);
    check_corpus(corpus, "input");
    SplitConfig cfg{a.test_fraction, a.seed, a.stratify_by};
    m.seed("seed", a.seed);
    const auto result = split_by_patient(std::move(corpus), cfg);

    std::set<std::string> train_subjects;
    for (const auto& e : result.train) train_subjects.insert(e.subject_id);
    for (const auto& e : result.test)
        if (train_subjects.count(e.subject_id))
            throw Error(ErrorCode::SchemaViolation, "subject " + e.subject_id + " appears in both splits");

    write_corpus_file(a.train, result.train);
    write_corpus_file(a.test, result.test);
    m.output(a.train);
    m.output(a.test);
    if (!a.manifest_out.empty()) {
        write_json(a.manifest_out, result.manifest());
        m.output(a.manifest_out);
    }
    for (const auto& w : result.warnings) log("split", w);
    m.write(manifest_path(a.manifest, a.test));
    log("split", std::to_string(result.train.size()) + " train, " + std::to_string(result.test.size()) + " test");
    return kExitOk;
}

// ---- stats -------------------------------------------------------------------

struct StatsArgs {
    std::string in, out, manifest;
    std::size_t bins = 20;
    double min_los = kDefaultMinLos;
};

int cmd_stats(const StatsArgs& a, const std::vector<std::string>& argv) {
    Manifest m("stats", argv);
    const auto corpus = read_corpus_file(a.in);
    m.input(a.in);
    const auto stats = compute_corpus_stats(corpus, a.min_los, a.bins);
    write_json(a.out, stats.to_json());
    m.output(a.out);
    m.write(manifest_path(a.manifest, a.out));
    std::cout << "metric                  max        mean      median\n";
    for (const auto& [name, s] : stats.metrics) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-20s %10.3f %10.3f %10.3f\n", name.c_str(), s.max, s.mean, s.median);
        std::cout << buf;
    }
    return kExitOk;
}

// ---- rollout -----------------------------------------------------------------

struct RolloutArgs {
    std::string in, backends, backend, mode = "full", out, manifest;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    int max_malformed_retries = 2;
};

int cmd_rollout(const RolloutArgs& a, const std::vector<std::string>& argv) {
    Manifest m("rollout", argv);
    const auto mode = parse_rollout_mode(a.mode);
    const auto corpus = read_corpus_file(a.in);
    m.input(a.in);
    check_corpus(corpus, "input");

    std::shared_ptr<const OutcomeModel> backend;
    if (!a.backends.empty()) {
        const auto registry = load_backend_registry_file(a.backends);
        m.config(a.backends);
        if (registry.contains(a.backend)) backend = registry.get(a.backend);
    }
    if (!backend && a.backend == "replay") backend = std::make_shared<ReplayBackend>("replay", corpus);
    if (!backend) throw Error(ErrorCode::UnknownBackend, "unknown backend '" + a.backend + "'");
    m.seed("seed", a.seed);

    StepOptions opts;
    opts.max_malformed_retries = a.max_malformed_retries;
    std::vector<RolloutResult> results(corpus.size());
    parallel_for(corpus.size(), a.jobs, [&](std::size_t i) {
        try {
            results[i] = rollout(corpus[i], *backend, mode, a.seed, opts);
        } catch (const Error& ex) {
            throw Error(ex.code(), "episode " + corpus[i].admission_id + ": " + ex.what());
        }
    });
    write_rollout_file(a.out, results);
    m.output(a.out);
    m.output(rollout_meta_path(a.out));
    m.set("mode", std::string(to_string(mode)));
    m.set("backend", a.backend);
    m.write(manifest_path(a.manifest, a.out));
    log("rollout", std::to_string(results.size()) + " episodes (" + a.mode + ", " + a.backend + ") -> " + a.out);
    return kExitOk;
}

// ---- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
    std::string pred, truth, ranges, out, retention, manifest;
    bool high_sensitivity = false, buckets = false, per_episode = false;
    unsigned jobs = 1;
};

bool looks_like_corpus(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::string first;
    std::getline(in, first);
    return first.find(kEpisodeFormat) != std::string::npos;
}

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
    Manifest m("evaluate", argv);
    if (fs::exists(a.pred) && !looks_like_corpus(a.pred)) {
        // Two saved reports: only retention can be computed.
        if (a.retention.empty())
            throw Error(ErrorCode::InvalidArgument, "--pred is a report; pass the next-step report with --retention");
        const auto full = metrics_report_from_json(read_json_file(a.pred));
        const auto next = metrics_report_from_json(read_json_file(a.retention));
        m.input(a.pred);
        m.input(a.retention);
        const auto ret = retention(next, full);
        std::cout << format_retention(ret);
        if (!a.out.empty()) {
            write_json(a.out, json{{"retention", to_json(ret)}});
            m.output(a.out);
            m.write(manifest_path(a.manifest, a.out));
        }
        return kExitOk;
    }
    if (a.truth.empty()) throw Error(ErrorCode::InvalidArgument, "--truth is required when --pred is a corpus");
    const auto pred = read_corpus_file(a.pred);
    const auto truth = read_corpus_file(a.truth);
    m.input(a.pred);
    m.input(a.truth);
    ReferenceRangeTable ranges;
    if (!a.ranges.empty()) {
        ranges = load_reference_ranges(a.ranges);
        m.config(a.ranges);
    }
    const auto ev = evaluate_corpus(pred, truth, ranges, a.jobs);

    json out{{"aggregate", to_json(ev.aggregate)}};
    if (a.per_episode) {
        json eps = json::array();
        for (std::size_t i = 0; i < ev.admission_ids.size(); ++i)
            eps.push_back({{"admission_id", ev.admission_ids[i]},
                           {"report", ev.per_episode[i] ? to_json(*ev.per_episode[i]) : json(nullptr)}});
        out["episodes"] = eps;
    }
    std::cout << format_report(ev.aggregate);
    if (a.high_sensitivity && ev.aggregate.high_sensitivity) {
        const auto& h = *ev.aggregate.high_sensitivity;
        std::cout << "high-sensitivity subset: n=" << h.n << " S@25=" << h.s_at_25 << " SMAPE=" << h.smape
                  << " (zero baselines excluded: " << h.zero_baseline_excluded << ")\n";
    }
    if (a.buckets) {
        out["buckets"] = to_json(ev.aggregate.buckets);
        std::cout << format_buckets(ev.aggregate.buckets);
    }
    if (!a.retention.empty()) {
        // The file given here is the next-step side: either its rollout
        // corpus or a report written by an earlier evaluate run.
        MetricsReport next;
        m.input(a.retention);
        if (looks_like_corpus(a.retention))
            next = evaluate_corpus(read_corpus_file(a.retention), truth, ranges, a.jobs).aggregate;
        else
            next = metrics_report_from_json(read_json_file(a.retention));
        const auto ret = retention(next, ev.aggregate);
        out["retention"] = to_json(ret);
        std::cout << format_retention(ret);
    }
    if (!a.out.empty()) {
        write_json(a.out, out);
        m.output(a.out);
        m.write(manifest_path(a.manifest, a.out));
    } else if (!a.manifest.empty()) {
        m.write(a.manifest);
    }
    return kExitOk;
}

// ---- serve -------------------------------------------------------------------

struct ServeArgs {
    std::string config, backends, persist_dir, manifest;
    std::optional<int> port;
};

int cmd_serve(const ServeArgs& a, const std::vector<std::string>& argv) {
    Manifest m("serve", argv);
    ServiceConfig cfg;
    if (!a.config.empty()) {
        cfg = service_config_from_json(read_json_file(a.config), fs::path(a.config).parent_path());
        m.config(a.config);
    }
    apply_env_overrides(cfg);
    if (a.port) cfg.port = *a.port;
    if (!a.backends.empty()) cfg.backends_path = a.backends;
    if (!a.persist_dir.empty()) cfg.persist_dir = a.persist_dir;
    if (cfg.backends_path.empty()) throw Error(ErrorCode::ConfigError, "no backend registry configured");
    auto registry = std::make_shared<BackendRegistry>(load_backend_registry_file(cfg.backends_path));
    m.config(cfg.backends_path);

    // Signals go to a dedicated thread; every other thread inherits the mask.
    sigset_t set, old;
    sigemptyset(&set);
    sigaddset(&set, SIGTERM);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGUSR1);
    pthread_sigmask(SIG_BLOCK, &set, &old);
    struct MaskGuard {
        sigset_t old;
        ~MaskGuard() { pthread_sigmask(SIG_SETMASK, &old, nullptr); }
    } mask_guard{old};

    Service service(cfg, registry);
    const auto restored = service.restore();
    if (!service.bind()) {
        log("serve", "cannot bind " + cfg.host + ":" + std::to_string(cfg.port) + " (address in use?)");
        return kExitRuntime;
    }
    log("serve", "listening on " + cfg.host + ":" + std::to_string(service.port()) + ", restored " +
                     std::to_string(restored) + " sessions");

    std::thread signals([&] {
        int sig = 0;
        sigwait(&set, &sig);
        if (sig != SIGUSR1) log("serve", "signal " + std::to_string(sig) + ", shutting down");
        service.stop();
    });
    service.run();
    pthread_kill(signals.native_handle(), SIGUSR1);
    signals.join();
    service.flush();
    if (!a.manifest.empty() || !cfg.persist_dir.empty())
        m.write(a.manifest.empty() ? cfg.persist_dir / "serve.manifest.json" : fs::path(a.manifest));
    log("serve", "stopped");
    return kExitOk;
}

// ---- extract -----------------------------------------------------------------

struct ExtractArgs {
    std::string notes, remote, out, prompt = std::string(TRAJSIM_DEFAULT_ASSET_DIR) + "/static_extraction_prompt.txt",
                                     manifest;
    unsigned jobs = 1;
};

int cmd_extract(const ExtractArgs& a, const std::vector<std::string>& argv) {
    Manifest m("extract", argv);
    const auto remote = remote_config_from_json(read_json_file(a.remote), fs::path(a.remote).parent_path());
    m.config(a.remote);
    const auto tmpl = read_text_file(a.prompt);
    m.config(a.prompt);

    std::ifstream in(a.notes, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + a.notes + "'");
    m.input(a.notes);
    std::vector<json> notes;
    std::string line;
    std::size_t line_no = 0, skipped = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = json::parse(line);
            if (!j.is_object() || !j.contains("text") || !j.contains("admission_id"))
                throw Error(ErrorCode::SchemaViolation, "note rows need 'admission_id' and 'text'");
            notes.push_back(std::move(j));
        } catch (const std::exception& ex) {
            ++skipped;
            log("extract", "line " + std::to_string(line_no) + ": " + ex.what());
        }
    }

    const ChatClient client(remote);
    std::vector<std::optional<json>> rows(notes.size());
    parallel_for(notes.size(), a.jobs, [&](std::size_t i) {
        const auto& n = notes[i];
        try {
            const auto p = extract_static_profile(n["text"].get<std::string>(), client, tmpl);
            json row{{"subject_id", n.value("subject_id", n["admission_id"].dump())},
                     {"admission_id", n["admission_id"]},
                     {"profile", to_json(p.profile)},
                     {"diagnostics", to_json(p.diagnostics)}};
            if (row["admission_id"].is_number()) row["admission_id"] = row["admission_id"].dump();
            rows[i] = std::move(row);
        } catch (const Error& ex) {
            if (ex.code() == ErrorCode::Transport || ex.code() == ErrorCode::Auth) throw;
            log("extract", "note " + n["admission_id"].dump() + ": " + ex.what());
        }
    });
    std::ostringstream os;
    std::size_t written = 0;
    for (const auto& r : rows)
        if (r) {
            os << r->dump() << '\n';
            ++written;
        }
    skipped += rows.size() - written;
    write_text_file(a.out, os.str());
    m.output(a.out);
    m.set("extracted", written);
    m.set("skipped", skipped);
    m.write(manifest_path(a.manifest, a.out));
    log("extract", std::to_string(written) + " profiles written, " + std::to_string(skipped) + " skipped");
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"trajsim: patient trajectory simulation, corpus tools and evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "generate a synthetic episode corpus from the oracle");
    g->add_option("--config", gen.config, "generator config (JSON)")->required();
    g->add_option("--oracle", gen.oracle, "oracle config; defaults to the generator config's oracle_path");
    g->add_option("--seed", gen.seed, "generation seed");
    g->add_option("--n", gen.n, "override n_episodes");
    g->add_option("--out", gen.out, "output corpus")->required();
    g->add_option("--report", gen.report, "generation report (JSON)");
    g->add_option("--manifest", gen.manifest, "manifest path (default <out>.manifest.json)");

    AssembleArgs asm_args;
    auto* as = app.add_subcommand("assemble", "assemble episodes from static records and event rows");
    as->add_option("--static", asm_args.statics, "static records (JSON lines)")->required();
    as->add_option("--events", asm_args.events, "event rows (JSON lines)")->required();
    as->add_option("--out", asm_args.out, "output corpus")->required();
    as->add_option("--report", asm_args.report, "assembly report (JSON)");
    as->add_option("--manifest", asm_args.manifest, "manifest path");

    FilterArgs flt;
    auto* f = app.add_subcommand("filter", "percentile filtering of a corpus");
    f->add_option("--in", flt.in, "input corpus")->required();
    f->add_option("--out", flt.out, "kept episodes")->required();
    f->add_option("--report", flt.report, "filter report with frozen thresholds (JSON)");
    f->add_option("--config", flt.config, "filter config (JSON)");
    f->add_option("--thresholds", flt.thresholds, "reuse thresholds from an earlier filter report");
    f->add_option("--manifest", flt.manifest, "manifest path");

    SplitArgs spl;
    auto* s = app.add_subcommand("split", "patient-level stratified train/test split");
    s->add_option("--in", spl.in, "input corpus")->required();
    s->add_option("--train", spl.train, "train corpus")->required();
    s->add_option("--test", spl.test, "test corpus")->required();
    s->add_option("--split-manifest", spl.manifest_out, "admission ids per split (JSON)");
    s->add_option("--test-fraction", spl.test_fraction, "share of episodes in test");
    s->add_option("--seed", spl.seed, "shuffle seed");
    s->add_option("--stratify-by", spl.stratify_by, "primary_diagnosis | none");
    s->add_option("--manifest", spl.manifest, "manifest path (default <test>.manifest.json)");

    StatsArgs st;
    auto* sc = app.add_subcommand("stats", "corpus statistics");
    sc->add_option("--in", st.in, "input corpus")->required();
    sc->add_option("--out", st.out, "statistics (JSON)")->required();
    sc->add_option("--bins", st.bins, "histogram bins");
    sc->add_option("--min-los", st.min_los, "LOS floor in days for event intensity");
    sc->add_option("--manifest", st.manifest, "manifest path");

    RolloutArgs ro;
    auto* r = app.add_subcommand("rollout", "roll a backend over recorded episodes");
    r->add_option("--in", ro.in, "source corpus")->required();
    r->add_option("--backends", ro.backends, "backend registry (JSON)");
    r->add_option("--backend", ro.backend, "backend id; 'replay' replays the source")->required();
    r->add_option("--mode", ro.mode, "full | next");
    r->add_option("--seed", ro.seed, "rollout seed");
    r->add_option("--out", ro.out, "predicted corpus")->required();
    r->add_option("--jobs", ro.jobs, "worker threads");
    r->add_option("--max-malformed-retries", ro.max_malformed_retries, "extra backend calls per malformed step");
    r->add_option("--manifest", ro.manifest, "manifest path");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "score predictions against ground truth");
    e->add_option("--pred", ev.pred, "predicted corpus, or a saved report when only retention is wanted")->required();
    e->add_option("--truth", ev.truth, "ground-truth corpus (not needed when --pred is a report)");
    e->add_option("--ranges", ev.ranges, "reference ranges (JSON)");
    e->add_option("--out", ev.out, "report (JSON)");
    e->add_flag("--high-sensitivity", ev.high_sensitivity, "print the high-sensitivity sub-report");
    e->add_flag("--buckets", ev.buckets, "print error buckets");
    e->add_flag("--per-episode", ev.per_episode, "include per-episode reports");
    e->add_option("--retention", ev.retention, "next-step predictions or report; --pred is the full-trajectory side");
    e->add_option("--jobs", ev.jobs, "worker threads");
    e->add_option("--manifest", ev.manifest, "manifest path");

    ServeArgs sv;
    auto* srv = app.add_subcommand("serve", "run the HTTP session service");
    srv->add_option("--config", sv.config, "service config (JSON)");
    srv->add_option("--port", sv.port, "listen port (0 picks a free port)");
    srv->add_option("--backends", sv.backends, "backend registry (JSON)");
    srv->add_option("--persist-dir", sv.persist_dir, "session snapshot directory");
    srv->add_option("--manifest", sv.manifest, "manifest path");

    ExtractArgs ex;
    auto* x = app.add_subcommand("extract", "extract static profiles from discharge notes");
    x->add_option("--notes", ex.notes, "notes (JSON lines with admission_id, text)")->required();
    x->add_option("--remote", ex.remote, "remote backend config (JSON)")->required();
    x->add_option("--out", ex.out, "static records (JSON lines)")->required();
    x->add_option("--prompt", ex.prompt, "extraction prompt template");
    x->add_option("--jobs", ex.jobs, "concurrent requests");
    x->add_option("--manifest", ex.manifest, "manifest path");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err, std::cout, std::cerr);
        return code == 0 ? kExitOk : kExitConfig;
    }

    const auto* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    try {
        if (cmd == g) return cmd_generate(gen, args);
        if (cmd == as) return cmd_assemble(asm_args, args);
        if (cmd == f) return cmd_filter(flt, args);
        if (cmd == s) return cmd_split(spl, args);
        if (cmd == sc) return cmd_stats(st, args);
        if (cmd == r) return cmd_rollout(ro, args);
        if (cmd == e) return cmd_evaluate(ev, args);
        if (cmd == srv) return cmd_serve(sv, args);
        if (cmd == x) return cmd_extract(ex, args);
    } catch (const Error& err) {
        log(name, std::string(to_string(err.code())) + ": " + err.what());
        return exit_code_for(err.code());
    } catch (const std::exception& err) {
        log(name, err.what());
        return kExitRuntime;
    }
    return kExitConfig;
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

} // namespace trajsim
