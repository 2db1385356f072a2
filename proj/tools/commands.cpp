#include "commands.hpp"

#include "lobnet/config.hpp"
#include "lobnet/evalharness.hpp"
#include "lobnet/live.hpp"
#include "lobnet/nn/checkpoint.hpp"
#include "lobnet/pipeline.hpp"
#include "lobnet/storage.hpp"
#include "lobnet/synthetic.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#ifndef LOBNET_DATA_DIR
#define LOBNET_DATA_DIR "data"
#endif

namespace lobnet::cli {

namespace fs = std::filesystem;
using config::RunConfig;
using features::Sample;
using walkthrough::PolicyKind;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string quote(const std::string& v) {
    const bool plain = !v.empty() && v.find_first_of(" \t\n\"=\\") == std::string::npos;
    if (plain) return v;
    std::string q = "\"";
    for (char c : v) {
        if (c == '"' || c == '\\') q += '\\';
        if (c == '\n') {
            q += "\\n";
            continue;
        }
        q += c;
    }
    return q + "\"";
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Log {
public:
    explicit Log(std::ostream& out) : out_(out) {}

    void line(const std::string& level, const std::string& event,
              const std::vector<std::pair<std::string, std::string>>& fields = {}) {
        out_ << "ts=" << utc_now() << " level=" << level << " event=" << event;
        for (const auto& [k, v] : fields) out_ << ' ' << k << '=' << quote(v);
        out_ << '\n';
        out_.flush();
    }
    void info(const std::string& event, const std::vector<std::pair<std::string, std::string>>& fields = {}) {
        line("info", event, fields);
    }

private:
    std::ostream& out_;
};

template <typename T>
std::string str(const T& v) {
    if constexpr (std::is_floating_point_v<T>) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return buf;
    } else if constexpr (std::is_same_v<T, bool>) {
        return v ? "true" : "false";
    } else if constexpr (std::is_convertible_v<T, std::string>) {
        return std::string(v);
    } else {
        return std::to_string(v);
    }
}

std::string join(const std::vector<std::string>& v, const char* sep = ",") {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
}

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::ConfigError:
        case Errc::PreconditionViolation:
        case Errc::BadLayout: return kConfigError;
        case Errc::MalformedFrame:
        case Errc::MissingField:
        case Errc::ReplayFileMissing:
        case Errc::CorruptLine:
        case Errc::CrossedSnapshot:
        case Errc::DegenerateComponent:
        case Errc::InsufficientData:
        case Errc::InsufficientHistory:
        case Errc::DegenerateX:
        case Errc::EmptyInput:
        case Errc::CorruptCheckpoint:
        case Errc::VariantMismatch:
        case Errc::ShapeMismatch: return kDataError;
        default: return kRuntimeError;
    }
}

std::string sha256_text(const std::string& text) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(text.data());
    return nn::to_hex(nn::sha256(std::span<const std::uint8_t>(bytes, text.size())));
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return sha256_text(buf.str());
}

/// YYYY-MM-DD (UTC midnight) or integer nanoseconds.
std::int64_t parse_time(const std::string& text) {
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') return storage::date_start_ns(text);
    try {
        std::size_t used = 0;
        const auto v = std::stoll(text, &used);
        if (used == text.size()) return v;
    } catch (const std::logic_error&) {
    }
    throw Error(Errc::ConfigError, "time must be YYYY-MM-DD or integer nanoseconds: " + text);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::DiskFull, "cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw Error(Errc::DiskFull, "write failed for " + path.string());
}

// ------------------------------------------------------------------ options

struct Common {
    std::string config_path;
    bool dry_run = false;
    std::optional<std::uint64_t> seed;
};

struct Options {
    Common common;
    std::vector<std::string> products;
    std::vector<std::string> channels;
    std::string root;
    std::string url;
    bool compress = false;
    std::size_t max_messages = 0;
    double duration = 0.0;
    std::string start;
    std::string end;
    std::string out;
    std::string features_csv;
    std::size_t synthetic = 0;
    std::string variant;
    int head = 0;
    std::size_t steps = 0;
    std::optional<std::size_t> epochs;
    std::string model;
    bool live = false;
    std::string replay_root;
    std::string policy;
    std::string original_features;
    std::size_t max_predictions = 0;
    std::string experiment;
    std::optional<std::size_t> repeats;
    std::optional<std::size_t> threads;
    std::string table5;
    bool sweep = false;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_flag("--dry-run", c.dry_run, "validate the configuration and exit without side effects");
    sub->add_option("--seed", c.seed, "seed override");
}

RunConfig resolve(const Options& o, Log& log, const std::string& command) {
    RunConfig cfg = o.common.config_path.empty() ? RunConfig{} : config::load(o.common.config_path);
    if (!o.products.empty()) cfg.subscription.products = o.products;
    if (!o.channels.empty()) cfg.subscription.channels = o.channels;
    if (!o.root.empty()) cfg.storage_root = o.root;
    if (!o.url.empty()) cfg.url = o.url;
    if (o.compress) cfg.compress = true;
    if (!o.variant.empty()) cfg.variant = models::variant_from_string(o.variant);
    if (o.head != 0) cfg.head = o.head;
    if (o.steps != 0) cfg.steps = o.steps;
    if (o.epochs) cfg.training.epochs = *o.epochs;
    if (!o.policy.empty()) cfg.policy.kind = walkthrough::policy_from_string(o.policy);
    if (o.repeats) cfg.repeats = *o.repeats;
    if (o.threads) cfg.threads = *o.threads;
    if (o.common.seed) cfg.seed = *o.common.seed;
    cfg.training.seed = cfg.seed;
    config::apply_environment(cfg);
    config::validate(cfg);
    log.info("config", {{"command", command}, {"hash", config::hash(cfg)}, {"resolved", config::to_json(cfg).dump()}});
    return cfg;
}

int dry_run_done(Log& log, const std::string& command, const std::vector<std::pair<std::string, std::string>>& plan = {}) {
    auto fields = plan;
    fields.insert(fields.begin(), {"command", command});
    log.info("dry_run", fields);
    return kOk;
}

storage::ReplayOptions replay_options(const RunConfig& cfg, const fs::path& root, const Options& o) {
    storage::ReplayOptions ro;
    ro.subscription = cfg.subscription;
    if (ro.subscription.products.empty()) ro.subscription.products = storage::list_products(root);
    if (ro.subscription.products.empty()) throw Error(Errc::ReplayFileMissing, "no captured products under " + root.string());
    if (!o.start.empty()) ro.start_ns = parse_time(o.start);
    if (!o.end.empty()) ro.end_ns = parse_time(o.end);
    if (ro.start_ns >= ro.end_ns) throw Error(Errc::ConfigError, "--start must precede --end");
    return ro;
}

features::TickAssembler::Options assembler_options(const RunConfig& cfg) {
    features::TickAssembler::Options a;
    a.depth_levels = cfg.depth_levels;
    return a;
}

std::vector<features::FeatureVector> featurize_root(const RunConfig& cfg, const fs::path& root, const Options& o,
                                                   pipeline::Counters* counters) {
    storage::ReplaySource src(root, replay_options(cfg, root, o));
    pipeline::FeedPipeline pipe(nullptr, assembler_options(cfg));
    std::vector<features::FeatureVector> ticks;
    while (auto f = src.next()) {
        if (auto v = pipe.on_frame(*f)) ticks.push_back(std::move(*v));
    }
    if (counters) *counters = pipe.counters();
    return ticks;
}

std::vector<features::FeatureVector> read_features(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ReplayFileMissing, "cannot read features " + path);
    return features::read_csv(in);
}

void log_counters(Log& log, const std::string& event, const pipeline::Counters& c,
                  std::vector<std::pair<std::string, std::string>> extra = {}) {
    std::vector<std::pair<std::string, std::string>> f{
        {"frames", str(c.frames)},         {"messages", str(c.messages)}, {"ignored", str(c.ignored)},
        {"quarantined", str(c.quarantined)}, {"gaps", str(c.gaps)},       {"suppressed", str(c.suppressed)},
        {"stale", str(c.stale)},           {"resyncs", str(c.resyncs)},   {"ticks", str(c.ticks)}};
    f.insert(f.end(), extra.begin(), extra.end());
    log.info(event, f);
}

// ---------------------------------------------------------------- commands

int cmd_record(const Options& o, Log& log) {
    auto cfg = resolve(o, log, "record");
    feed::validate(cfg.subscription);
    (void)feed::parse_endpoint(cfg.url);
    if (o.common.dry_run) {
        return dry_run_done(log, "record", {{"url", cfg.url}, {"products", join(cfg.subscription.products)},
                                            {"root", cfg.storage_root}});
    }

    feed::LiveOptions lo;
    lo.url = cfg.url;
    lo.subscription = cfg.subscription;
    feed::LiveSource src(lo);
    storage::Recorder recorder(cfg.storage_root, {cfg.compress});
    pipeline::FeedPipeline pipe(&recorder, assembler_options(cfg));

    g_stop = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    src.start();
    log.info("connected", {{"url", cfg.url}, {"products", join(cfg.subscription.products)}});
    const auto started = std::chrono::steady_clock::now();
    const auto expired = [&] {
        return o.duration > 0 &&
               std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() >= o.duration;
    };
    std::size_t frames = 0;
    try {
        while (!g_stop && !expired() && (o.max_messages == 0 || frames < o.max_messages)) {
            auto f = src.next_for(std::chrono::milliseconds(200));
            if (!f) continue;
            ++frames;
            pipe.on_frame(*f);
        }
    } catch (const Error& e) {
        src.stop();
        recorder.close();
        if (e.code() == Errc::DiskFull) log.line("error", "feed_stopped", {{"reason", "disk_full"}});
        throw;
    }
    src.stop();
    recorder.close();
    log_counters(log, "record_done", pipe.counters(),
                 {{"written", str(recorder.written())}, {"reconnects", str(src.reconnects())}, {"dropped", str(src.dropped())}});
    return kOk;
}

int cmd_stats(const Options& o, std::ostream& out, Log& log) {
    auto cfg = resolve(o, log, "stats");
    if (o.common.dry_run) return dry_run_done(log, "stats", {{"root", cfg.storage_root}});
    const auto stats = storage::dataset_stats(cfg.storage_root);
    for (const auto& [product, kinds] : stats.counts) {
        for (const auto& [kind, n] : kinds) out << "product=" << product << " kind=" << kind << " count=" << n << '\n';
    }
    log.info("stats", {{"products", str(stats.counts.size())},
                       {"corrupt_lines", str(stats.corrupt_lines)},
                       {"quarantined", str(stats.quarantined)}});
    return kOk;
}

int cmd_featurize(const Options& o, Log& log) {
    auto cfg = resolve(o, log, "featurize");
    if (o.out.empty()) throw Error(Errc::ConfigError, "featurize needs --out");
    const auto ro = replay_options(cfg, cfg.storage_root, o);
    if (o.common.dry_run) {
        return dry_run_done(log, "featurize", {{"root", cfg.storage_root}, {"products", join(ro.subscription.products)},
                                               {"out", o.out}});
    }
    pipeline::Counters counters;
    const auto ticks = featurize_root(cfg, cfg.storage_root, o, &counters);
    std::ostringstream csv;
    features::write_csv(csv, ticks);
    write_text(o.out, csv.str());
    log_counters(log, "featurized", counters, {{"out", o.out}, {"sha256", sha256_text(csv.str())}});
    return kOk;
}

std::vector<Sample> training_samples(const RunConfig& cfg, const Options& o, Log& log) {
    if (o.synthetic > 0) {
        synthetic::StreamConfig sc;
        sc.samples = o.synthetic;
        sc.steps = cfg.steps;
        sc.seed = cfg.seed;
        sc.noise = 0.1;
        log.info("training_data", {{"source", "synthetic"}, {"samples", str(o.synthetic)}});
        return synthetic::generate(sc);
    }
    std::vector<features::FeatureVector> ticks;
    if (!o.features_csv.empty()) {
        ticks = read_features(o.features_csv);
    } else {
        ticks = featurize_root(cfg, cfg.storage_root, o, nullptr);
    }
    features::WindowStats ws;
    auto samples = pipeline::make_samples(ticks, cfg.steps, &ws);
    log.info("training_data", {{"source", o.features_csv.empty() ? cfg.storage_root : o.features_csv},
                               {"ticks", str(ticks.size())},
                               {"samples", str(samples.size())},
                               {"dropped_degraded", str(ws.dropped_degraded)},
                               {"dropped_unlabeled", str(ws.dropped_unlabeled)}});
    return samples;
}

int cmd_train(const Options& o, Log& log) {
    auto cfg = resolve(o, log, "train");
    if (o.out.empty()) throw Error(Errc::ConfigError, "train needs --out");
    if (o.common.dry_run) {
        return dry_run_done(log, "train", {{"variant", std::string(models::to_string(cfg.variant))},
                                           {"head", str(cfg.head)}, {"out", o.out}});
    }
    const auto samples = training_samples(cfg, o, log);
    if (samples.empty()) throw Error(Errc::InsufficientData, "no training samples");
    auto bundle = models::build(cfg.variant, cfg.head, cfg.dims, cfg.seed);
    const auto report = models::train(bundle, samples, cfg.training);
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
        const auto& s = report.epochs[e];
        log.info("epoch", {{"n", str(e + 1)},
                           {"train_loss", str(s.train_loss)},
                           {"train_accuracy", str(s.train_accuracy)},
                           {"val_loss", str(s.val_loss)},
                           {"val_accuracy", str(s.val_accuracy)}});
    }
    models::save(bundle, o.out);
    log.info("trained", {{"out", o.out},
                         {"bundle", bundle.content_hash()},
                         {"best_epoch", str(report.best_epoch)},
                         {"train_samples", str(report.train_samples)},
                         {"val_samples", str(report.val_samples)},
                         {"excluded", str(report.excluded_samples)}});
    return kOk;
}

/// Predicts each tick once its successor resolves the label.
class PredictLoop {
public:
    PredictLoop(walkthrough::Runner& runner, std::size_t steps, int head, std::ostream& rows)
        : runner_(runner), steps_(steps), head_(head), rows_(rows) {
        rows_ << "product,t,time_ns,prediction,truth,correct,rolling_accuracy,retrain\n";
    }

    void on_tick(const features::FeatureVector& v) {
        auto [it, fresh] = products_.try_emplace(v.product, steps_);
        auto& st = it->second;
        if (st.pending && st.prev) {
            const auto labels = features::derive_labels({*st.prev, v});
            if (labels[0].resolved) {
                auto s = *st.pending;
                s.binary = labels[0].binary;
                s.multi = labels[0].multi;
                s.r = labels[0].r;
                emit(s, runner_.observe(s));
            }
        }
        st.pending = st.windowizer.push(v);
        st.prev = v;
    }

    std::size_t predictions() const noexcept { return predictions_; }
    std::size_t correct() const noexcept { return correct_; }

private:
    struct State {
        explicit State(std::size_t steps) : windowizer(steps) {}
        features::StreamingWindowizer windowizer;
        std::optional<features::FeatureVector> prev;
        std::optional<Sample> pending;
    };

    void emit(const Sample& s, const walkthrough::StepResult& r) {
        ++predictions_;
        const int truth = features::target_index(s, head_);
        if (r.correct && *r.correct) ++correct_;
        char acc[32];
        std::snprintf(acc, sizeof acc, "%.6f", runner_.window().current());
        rows_ << s.product << ',' << s.t << ',' << s.time_ns << ',' << r.prediction.label << ',' << truth << ','
              << (r.correct ? (*r.correct ? "1" : "0") : "") << ',' << acc << ',' << (r.retrain_triggered ? 1 : 0)
              << '\n';
    }

    walkthrough::Runner& runner_;
    std::size_t steps_;
    int head_;
    std::ostream& rows_;
    std::map<std::string, State> products_;
    std::size_t predictions_ = 0;
    std::size_t correct_ = 0;
};

int cmd_predict(const Options& o, std::ostream& out, Log& log) {
    auto cfg = resolve(o, log, "predict");
    if (o.model.empty()) throw Error(Errc::ConfigError, "predict needs --model");
    if (o.live == !o.replay_root.empty()) throw Error(Errc::ConfigError, "predict needs exactly one of --live or --replay");
    std::optional<storage::ReplayOptions> ro;
    if (o.live) {
        feed::validate(cfg.subscription);
        (void)feed::parse_endpoint(cfg.url);
    } else {
        ro = replay_options(cfg, o.replay_root, o);
    }
    if (!fs::exists(o.model)) throw Error(Errc::CorruptCheckpoint, "no checkpoint at " + o.model);
    if (o.common.dry_run) {
        return dry_run_done(log, "predict", {{"model", o.model},
                                             {"source", o.live ? cfg.url : o.replay_root},
                                             {"policy", std::string(walkthrough::to_string(cfg.policy.kind))}});
    }

    auto bundle = models::load(o.model);
    std::vector<Sample> original;
    if (!o.original_features.empty()) original = pipeline::make_samples(read_features(o.original_features), bundle.metadata.steps);
    const auto steps = bundle.metadata.steps;
    const int head = bundle.head;
    log.info("model", {{"bundle", bundle.content_hash()},
                       {"variant", std::string(models::to_string(bundle.variant))},
                       {"head", str(head)},
                       {"steps", str(steps)}});

    auto rc = config::runner_config(cfg);
    rc.mode = o.live ? walkthrough::Mode::Background : walkthrough::Mode::Inline;
    rc.on_event = [&log](const walkthrough::RetrainEvent& e) { log.line("info", "retrain_log", {{"line", walkthrough::format_event(e)}}); };
    walkthrough::Runner runner(std::move(bundle), std::move(original), cfg.policy, rc);

    std::ofstream file;
    std::ostringstream rows;
    PredictLoop loop(runner, steps, head, rows);
    pipeline::FeedPipeline pipe(nullptr, assembler_options(cfg));
    const auto flush_rows = [&] {
        if (!o.out.empty()) {
            file << rows.str();
        } else {
            out << rows.str();
        }
        rows.str("");
    };
    if (!o.out.empty()) {
        file.open(o.out, std::ios::binary | std::ios::trunc);
        if (!file) throw Error(Errc::DiskFull, "cannot write " + o.out);
    }
    std::string all_rows;
    const auto drain = [&] {
        all_rows += rows.str();
        flush_rows();
    };

    if (o.live) {
        feed::LiveOptions lo;
        lo.url = cfg.url;
        lo.subscription = cfg.subscription;
        feed::LiveSource src(lo);
        g_stop = false;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        src.start();
        const auto started = std::chrono::steady_clock::now();
        while (!g_stop && (o.max_predictions == 0 || loop.predictions() < o.max_predictions)) {
            if (o.duration > 0 &&
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() >= o.duration) {
                break;
            }
            auto f = src.next_for(std::chrono::milliseconds(200));
            if (!f) continue;
            if (auto v = pipe.on_frame(*f)) {
                loop.on_tick(*v);
                drain();
            }
        }
        src.stop();
    } else {
        storage::ReplaySource src(o.replay_root, *ro);
        while (auto f = src.next()) {
            if (auto v = pipe.on_frame(*f)) loop.on_tick(*v);
            if (o.max_predictions != 0 && loop.predictions() >= o.max_predictions) break;
        }
        drain();
    }
    runner.wait_idle();
    const double acc = loop.predictions() == 0 ? 0.0 : static_cast<double>(loop.correct()) / static_cast<double>(loop.predictions());
    log_counters(log, "predict_done", pipe.counters(),
                 {{"predictions", str(loop.predictions())},
                  {"accuracy", str(acc)},
                  {"retrains", str(runner.retrains())},
                  {"failed_retrains", str(runner.failed_retrains())},
                  {"output_sha256", sha256_text(all_rows)}});
    return kOk;
}

// -------------------------------------------------------------- experiments

eval::ExperimentConfig experiment_config(const RunConfig& cfg) {
    eval::ExperimentConfig ec;
    ec.seed = cfg.seed;
    ec.threads = cfg.threads;
    ec.steps = cfg.steps;
    ec.train = eval::experiment_training(cfg.seed);
    if (cfg.experiment_uses_model) {
        ec.variant = cfg.variant;
        ec.head = cfg.head;
        ec.dims = cfg.dims;
        ec.train = cfg.training;
    }
    return ec;
}

eval::WalkthroughConfig walkthrough_config(const RunConfig& cfg) {
    eval::WalkthroughConfig wc;
    wc.repeats = cfg.repeats;
    wc.seed = cfg.seed;
    wc.threads = cfg.threads;
    wc.policy = cfg.policy;
    wc.runner = config::runner_config(cfg);
    wc.train = eval::experiment_training(cfg.seed);
    if (cfg.experiment_uses_model) {
        wc.variant = cfg.variant;
        wc.head = cfg.head;
        wc.dims = cfg.dims;
        wc.train = cfg.training;
    }
    return wc;
}

/// Two identically distributed planted-pattern products.
eval::SampleProvider synthetic_corpus(std::uint64_t seed) {
    return [seed](const std::string& product, std::size_t steps) {
        synthetic::StreamConfig sc;
        sc.samples = 1500;
        sc.noise = 0.1;
        sc.product = product;
        sc.seed = seed * 1000 + (product == "SYN-B" ? 1 : 0);
        return eval::rewindow(synthetic::generate(sc), steps);
    };
}

struct Corpus {
    std::vector<std::string> products;
    eval::SampleProvider provider;
    std::string source;
};

Corpus corpus(const RunConfig& cfg, const Options& o) {
    if (o.root.empty()) return {{"SYN-A", "SYN-B"}, synthetic_corpus(cfg.seed), "synthetic"};
    auto ticks = featurize_root(cfg, cfg.storage_root, o, nullptr);
    std::vector<std::string> products = cfg.subscription.products;
    if (products.empty()) products = storage::list_products(cfg.storage_root);
    return {products, eval::tick_provider(std::move(ticks)), cfg.storage_root};
}

std::vector<std::string> class_names(int head) {
    if (head == 2) return {"up", "down"};
    return {"sig_inc", "insig_inc", "insig_dec", "sig_dec"};
}

int cmd_experiment(const Options& o, Log& log) {
    auto cfg = resolve(o, log, "experiment");
    if (o.out.empty()) throw Error(Errc::ConfigError, "experiment needs --out");
    const std::string which = o.experiment;
    fs::path table5 = o.table5.empty() ? fs::path(LOBNET_DATA_DIR) / "timestep_accuracy_reference.csv" : fs::path(o.table5);
    if (which == "rq2" && !o.sweep && !fs::exists(table5)) throw Error(Errc::ConfigError, "no time-step table at " + table5.string());
    if (!o.root.empty() && !fs::is_directory(cfg.storage_root)) throw Error(Errc::ReplayFileMissing, "no capture root " + cfg.storage_root);
    if (o.common.dry_run) return dry_run_done(log, "experiment", {{"experiment", which}, {"out", o.out}});

    const fs::path dir = o.out;
    fs::create_directories(dir);
    std::vector<std::string> files;
    const auto emit = [&](const std::string& name, const std::string& text) {
        write_text(dir / name, text);
        files.push_back(name);
        log.info("wrote", {{"file", (dir / name).string()}, {"sha256", sha256_text(text)}});
    };
    std::vector<std::uint64_t> seeds{cfg.seed};

    if (which == "rq1") {
        const auto c = corpus(cfg, o);
        const auto r = eval::run_split_sweep(c.products, c.provider, experiment_config(cfg));
        for (const auto& s : r.skipped) log.line("warn", "product_skipped", {{"product", s.product}, {"reason", s.reason}});
        std::ostringstream t3, t4;
        eval::write_table3(t3, r);
        eval::write_table4(t4, r);
        emit("table3.csv", t3.str());
        emit("table4.csv", t4.str());
        log.info("rq1", {{"source", c.source}, {"products", str(r.products.size())}, {"leakage_free", str(r.leakage_free)}});
    } else if (which == "rq2") {
        eval::TimestepSweepResult t;
        if (o.sweep) {
            const auto c = corpus(cfg, o);
            t = eval::run_timestep_sweep(c.products, c.provider, experiment_config(cfg));
        } else {
            std::ifstream in(table5);
            t = eval::read_table5(in);
        }
        const std::vector<double> x(t.steps.begin(), t.steps.end());
        const auto u = eval::ols_fit(x, t.universal);
        const auto s = eval::ols_fit(x, t.universal_selected);
        std::ostringstream t5, t6;
        eval::write_table5(t5, t);
        eval::write_table6(t6, u, s);
        emit("table5.csv", t5.str());
        emit("table6.csv", t6.str());
        log.info("rq2", {{"source", o.sweep ? "sweep" : table5.string()},
                         {"universal_const", str(u.intercept)},
                         {"universal_x", std::to_string(u.slope)},
                         {"selected_const", str(s.intercept)},
                         {"selected_x", std::to_string(s.slope)}});
    } else if (which == "rq3") {
        auto wc = walkthrough_config(cfg);
        wc.repeats = 1;
        wc.setup = eval::drift_setup;
        wc.policies = {PolicyKind::Static};
        const auto decay = eval::run_walkthrough_comparison(wc);
        std::ostringstream f7;
        eval::write_curve_csv(f7, decay.repeats[0].runs[0].curve);
        emit("fig7_curve.csv", f7.str());

        std::string report;
        std::ostringstream f9;
        wc.policies = {PolicyKind::StableEveryN};
        for (const auto variant : {models::Variant::Denoiser, models::Variant::Reducer}) {
            wc.variant = variant;
            const auto res = eval::run_walkthrough_comparison(wc);
            const auto& run = res.repeats[0].runs[0];
            const auto rep = eval::classification_report(run.predicted, run.truth, class_names(wc.head));
            report += eval::format_report(rep, "Classification report of autoencoder as " +
                                                   std::string(models::to_string(variant))) + "\n";
            if (variant == models::Variant::Reducer && wc.head == 2) {
                const auto to_label = [](int c) { return c == 0 ? features::BinaryLabel::Up : features::BinaryLabel::Down; };
                std::vector<features::BinaryLabel> p, t;
                for (int c : run.predicted) p.push_back(to_label(c));
                for (int c : run.truth) t.push_back(to_label(c));
                const auto rp = eval::downtick_ratio_series(p);
                const auto rt = eval::downtick_ratio_series(t);
                f9 << "block,predicted_down_ratio,target_down_ratio\n";
                for (std::size_t b = 0; b < rp.ratios.size(); ++b) f9 << b << ',' << rp.ratios[b] << ',' << rt.ratios[b] << '\n';
            }
        }
        emit("table7.txt", report);
        if (!f9.str().empty()) emit("fig9_downticks.csv", f9.str());

        eval::RecoveryConfig rc;
        auto rw = walkthrough_config(cfg);
        rw.setup = eval::regime_flip_setup;
        rc.walkthrough = rw;
        const auto rec = eval::run_decay_recovery(rc);
        std::ostringstream rcsv;
        rcsv << "seed,pre_flip_accuracy,first_retrain,recovered_after,static_mk_s,static_mk_z,passed\n";
        seeds.clear();
        for (const auto& r : rec.repeats) {
            seeds.push_back(r.seed);
            rcsv << r.seed << ',' << str(r.pre_flip_accuracy) << ',' << (r.first_retrain ? str(*r.first_retrain) : "") << ','
                 << (r.recovered_after ? str(*r.recovered_after) : "") << ',' << r.static_trend.s << ','
                 << str(r.static_trend.z) << ',' << (r.static_non_increasing() && r.recovered(rc.horizon) ? 1 : 0) << '\n';
        }
        emit("rq3_recovery.csv", rcsv.str());
        log.info("rq3", {{"recovered", str(rec.passes()) + "/" + str(rec.repeats.size())}, {"horizon", str(rc.horizon)}});
    } else if (which == "rq4") {
        auto wc = walkthrough_config(cfg);
        wc.setup = eval::drift_setup;
        const auto res = eval::run_walkthrough_comparison(wc);
        std::ostringstream curves, markers, summary;
        eval::write_curves_csv(curves, res);
        eval::write_markers_csv(markers, res);
        summary << "repeat,seed,policy,final_accuracy,retrains,failed_retrains\n";
        seeds.clear();
        for (std::size_t r = 0; r < res.repeats.size(); ++r) {
            seeds.push_back(res.repeats[r].seed);
            for (const auto& run : res.repeats[r].runs) {
                summary << r << ',' << res.repeats[r].seed << ',' << walkthrough::to_string(run.policy) << ','
                        << str(run.final_accuracy) << ',' << run.retrains << ',' << run.failed_retrains << '\n';
            }
        }
        emit("fig13_curves.csv", curves.str());
        emit("fig13_markers.csv", markers.str());
        emit("rq4_summary.csv", summary.str());
        log.info("rq4", {{"ordered", str(res.ordered_repeats()) + "/" + str(res.repeats.size())},
                         {"mdd_fewer_retrains", str(res.fewer_mdd_retrains()) + "/" + str(res.repeats.size())}});
    }

    nlohmann::ordered_json manifest;
    manifest["experiment"] = which;
    manifest["config_hash"] = config::hash(cfg);
    manifest["config"] = config::to_json(cfg);
    manifest["seeds"] = seeds;
    manifest["files"] = nlohmann::ordered_json::array();
    for (const auto& f : files) manifest["files"].push_back({{"name", f}, {"sha256", sha256_file(dir / f)}});
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    log.info("experiment_done", {{"experiment", which}, {"out", dir.string()}, {"files", str(files.size())}});
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Log log(err);
    Options o;
    CLI::App app{"Limit order book capture, featurization and mid-price prediction", "lobnet"};
    app.require_subcommand(1);

    auto* record = app.add_subcommand("record", "capture a live feed to the storage root");
    add_common(record, o.common);
    record->add_option("--products", o.products, "product ids")->delimiter(',');
    record->add_option("--channels", o.channels, "ticker, level2, heartbeat")->delimiter(',');
    record->add_option("--root", o.root, "storage root");
    record->add_option("--url", o.url, "feed endpoint");
    record->add_flag("--compress", o.compress, "gzip the capture files");
    record->add_option("--max-messages", o.max_messages, "stop after this many frames");
    record->add_option("--duration", o.duration, "stop after this many seconds");

    auto* stats = app.add_subcommand("stats", "message counts per product and kind");
    add_common(stats, o.common);
    stats->add_option("--root", o.root, "storage root");

    auto* featurize = app.add_subcommand("featurize", "replay a capture into a feature CSV");
    add_common(featurize, o.common);
    featurize->add_option("--root", o.root, "storage root");
    featurize->add_option("--products", o.products, "product ids")->delimiter(',');
    featurize->add_option("--start", o.start, "YYYY-MM-DD or ns");
    featurize->add_option("--end", o.end, "YYYY-MM-DD or ns (exclusive)");
    featurize->add_option("--out", o.out, "output CSV");

    auto* train = app.add_subcommand("train", "train a model bundle");
    add_common(train, o.common);
    auto* train_features = train->add_option("--features", o.features_csv, "feature CSV from featurize");
    auto* train_root = train->add_option("--root", o.root, "storage root to replay");
    auto* train_syn = train->add_option("--synthetic", o.synthetic, "train on N planted-pattern samples");
    train_features->excludes(train_root)->excludes(train_syn);
    train_root->excludes(train_syn);
    train->add_option("--products", o.products, "product ids")->delimiter(',');
    train->add_option("--variant", o.variant, "plain, denoiser or reducer");
    train->add_option("--head", o.head, "2 or 4")->check(CLI::IsMember({2, 4}));
    train->add_option("--steps", o.steps, "window length");
    train->add_option("--epochs", o.epochs, "epoch override");
    train->add_option("--out", o.out, "checkpoint path");

    auto* predict = app.add_subcommand("predict", "stream predictions with walkthrough retraining");
    add_common(predict, o.common);
    predict->add_option("--model", o.model, "checkpoint");
    auto* p_replay = predict->add_option("--replay", o.replay_root, "storage root to replay");
    auto* p_live = predict->add_flag("--live", o.live, "connect to the live feed");
    p_replay->excludes(p_live);
    predict->add_option("--products", o.products, "product ids")->delimiter(',');
    predict->add_option("--url", o.url, "feed endpoint (live)");
    predict->add_option("--start", o.start, "YYYY-MM-DD or ns");
    predict->add_option("--end", o.end, "YYYY-MM-DD or ns (exclusive)");
    predict->add_option("--policy", o.policy, "static, stable or mdd");
    predict->add_option("--original", o.original_features, "feature CSV of the original training data (replay share)");
    predict->add_option("--max-predictions", o.max_predictions, "stop after this many predictions");
    predict->add_option("--duration", o.duration, "stop after this many seconds (live)");
    predict->add_option("--out", o.out, "prediction CSV (default stdout)");

    auto* experiment = app.add_subcommand("experiment", "reproduce an experiment protocol");
    add_common(experiment, o.common);
    experiment->add_option("which", o.experiment, "rq1, rq2, rq3 or rq4")->required()->check(CLI::IsMember({"rq1", "rq2", "rq3", "rq4"}));
    experiment->add_option("--out", o.out, "output directory");
    experiment->add_option("--root", o.root, "recorded data instead of the synthetic corpus (rq1, rq2 --sweep)");
    experiment->add_option("--products", o.products, "product ids")->delimiter(',');
    experiment->add_option("--repeats", o.repeats, "seeded repeats (rq3, rq4)");
    experiment->add_option("--threads", o.threads, "worker threads");
    experiment->add_option("--table5", o.table5, "time-step accuracy table for rq2");
    experiment->add_flag("--sweep", o.sweep, "rq2: run the time-step sweep instead of reading the table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kOk;
        }
        log.line("error", "error", {{"code", "UsageError"}, {"exit", str(kConfigError)}, {"message", e.what()}});
        return kConfigError;
    }

    try {
        if (record->parsed()) return cmd_record(o, log);
        if (stats->parsed()) return cmd_stats(o, out, log);
        if (featurize->parsed()) return cmd_featurize(o, log);
        if (train->parsed()) return cmd_train(o, log);
        if (predict->parsed()) return cmd_predict(o, out, log);
        if (experiment->parsed()) return cmd_experiment(o, log);
    } catch (const Error& e) {
        const int code = exit_code_for(e.code());
        log.line("error", "error", {{"code", std::string(to_string(e.code()))}, {"exit", str(code)}, {"message", e.what()}});
        return code;
    } catch (const std::exception& e) {
        log.line("error", "error", {{"code", "Internal"}, {"exit", str(kRuntimeError)}, {"message", e.what()}});
        return kRuntimeError;
    }
    return kConfigError;
}

}  // namespace lobnet::cli
