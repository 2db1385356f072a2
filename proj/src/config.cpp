#include "lobnet/config.hpp"

#include "lobnet/nn/checkpoint.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace lobnet::config {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

/// Walks one JSON object, rejecting keys nobody asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw Error(Errc::ConfigError, where() + " must be an object");
    }

    /// Call after the last read.
    void done() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw Error(Errc::ConfigError, "unknown key " + (path_.empty() ? key : path_ + "." + key));
        }
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw std::invalid_argument("boolean");
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer()) throw std::invalid_argument("integer");
                if (std::is_unsigned_v<T> && it->template get<std::int64_t>() < 0) throw std::invalid_argument("non-negative integer");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!it->is_number()) throw std::invalid_argument("number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!it->is_string()) throw std::invalid_argument("string");
            }
            out = it->template get<T>();
        } catch (const std::invalid_argument& e) {
            throw Error(Errc::ConfigError, name(key) + " must be a " + e.what());
        } catch (const json::exception&) {
            throw Error(Errc::ConfigError, name(key) + " has the wrong type");
        }
    }

    std::optional<Section> child(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return std::nullopt;
        return std::optional<Section>(std::in_place, *it, name(key));
    }

    template <typename Parse>
    void read_enum(const char* key, Parse parse) {
        std::string value;
        seen_.insert(key);
        if (!j_.contains(key)) return;
        read(key, value);
        try {
            parse(value);
        } catch (const Error& e) {
            throw Error(Errc::ConfigError, name(key) + ": " + e.what());
        }
    }

    std::string name(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }
    std::string where() const { return path_.empty() ? "config" : path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace

ordered_json to_json(const RunConfig& c) {
    ordered_json j;
    j["schema_version"] = c.schema_version;
    j["feed"] = {{"url", c.url}, {"products", c.subscription.products}, {"channels", c.subscription.channels}};
    j["storage"] = {{"root", c.storage_root}, {"compress", c.compress}};
    j["features"] = {{"schema_version", c.feature_schema}, {"steps", c.steps}, {"depth_levels", c.depth_levels}};
    j["model"] = {{"variant", models::to_string(c.variant)},
                  {"head", c.head},
                  {"dims",
                   {{"lstm1", c.dims.lstm1},
                    {"lstm2", c.dims.lstm2},
                    {"dense", c.dims.dense},
                    {"ae", c.dims.ae},
                    {"pca", c.dims.pca}}}};
    const auto& t = c.training;
    j["training"] = {{"epochs", t.epochs},
                     {"batch_size", t.batch_size},
                     {"patience", t.patience},
                     {"validation_fraction", t.validation_fraction},
                     {"optimizer",
                      {{"kind", nn::to_string(t.optimizer.kind)},
                       {"learning_rate", t.optimizer.learning_rate},
                       {"rho", t.optimizer.rho},
                       {"epsilon", t.optimizer.epsilon},
                       {"beta1", t.optimizer.beta1},
                       {"beta2", t.optimizer.beta2}}},
                     {"clip_norm", t.clip_norm},
                     {"class_weights", t.class_weights},
                     {"ae_epochs", t.ae_epochs}};
    j["walkthrough"] = {{"policy", walkthrough::to_string(c.policy.kind)},
                        {"n", c.policy.n},
                        {"mdd_threshold", c.policy.mdd_threshold},
                        {"buffer_cap", c.policy.buffer_cap},
                        {"granularity", c.granularity},
                        {"span", c.span},
                        {"replay_fraction", c.replay_fraction},
                        {"history_cap", c.history_cap}};
    j["seed"] = c.seed;
    j["experiment"] = {{"repeats", c.repeats}, {"threads", c.threads}, {"use_model", c.experiment_uses_model}};
    return j;
}

RunConfig from_json(const json& j) {
    RunConfig c;
    {
        Section root(j, "");
        root.read("schema_version", c.schema_version);
        if (c.schema_version != kSchemaVersion) {
            throw Error(Errc::ConfigError, "schema_version " + std::to_string(c.schema_version) + " is not supported (expected " +
                                               std::to_string(kSchemaVersion) + ")");
        }
        if (auto s = root.child("feed")) {
            s->read("url", c.url);
            s->read("products", c.subscription.products);
            s->read("channels", c.subscription.channels);
            s->done();
        }
        if (auto s = root.child("storage")) {
            s->read("root", c.storage_root);
            s->read("compress", c.compress);
            s->done();
        }
        if (auto s = root.child("features")) {
            s->read("schema_version", c.feature_schema);
            s->read("steps", c.steps);
            s->read("depth_levels", c.depth_levels);
            s->done();
        }
        if (auto s = root.child("model")) {
            s->read_enum("variant", [&](const std::string& v) { c.variant = models::variant_from_string(v); });
            s->read("head", c.head);
            if (auto d = s->child("dims")) {
                d->read("lstm1", c.dims.lstm1);
                d->read("lstm2", c.dims.lstm2);
                d->read("dense", c.dims.dense);
                d->read("ae", c.dims.ae);
                d->read("pca", c.dims.pca);
                d->done();
            }
            s->done();
        }
        if (auto s = root.child("training")) {
            auto& t = c.training;
            s->read("epochs", t.epochs);
            s->read("batch_size", t.batch_size);
            s->read("patience", t.patience);
            s->read("validation_fraction", t.validation_fraction);
            if (auto o = s->child("optimizer")) {
                o->read_enum("kind", [&](const std::string& v) { t.optimizer.kind = nn::optimizer_from_string(v); });
                o->read("learning_rate", t.optimizer.learning_rate);
                o->read("rho", t.optimizer.rho);
                o->read("epsilon", t.optimizer.epsilon);
                o->read("beta1", t.optimizer.beta1);
                o->read("beta2", t.optimizer.beta2);
                o->done();
            }
            s->read("clip_norm", t.clip_norm);
            s->read("class_weights", t.class_weights);
            s->read("ae_epochs", t.ae_epochs);
            s->done();
        }
        if (auto s = root.child("walkthrough")) {
            s->read_enum("policy", [&](const std::string& v) { c.policy.kind = walkthrough::policy_from_string(v); });
            s->read("n", c.policy.n);
            s->read("mdd_threshold", c.policy.mdd_threshold);
            s->read("buffer_cap", c.policy.buffer_cap);
            s->read("granularity", c.granularity);
            s->read("span", c.span);
            s->read("replay_fraction", c.replay_fraction);
            s->read("history_cap", c.history_cap);
            s->done();
        }
        root.read("seed", c.seed);
        if (auto s = root.child("experiment")) {
            s->read("repeats", c.repeats);
            s->read("threads", c.threads);
            s->read("use_model", c.experiment_uses_model);
            s->done();
        }
        root.done();
    }
    c.training.seed = c.seed;
    return c;
}

RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigError, "cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const auto j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw Error(Errc::ConfigError, "config " + path.string() + " is not valid JSON");
    return from_json(j);
}

void apply_environment(RunConfig& config, const EnvLookup& lookup) {
    const char* url = lookup(kEndpointEnv);
    if (url != nullptr && *url != '\0') config.url = url;
}

void apply_environment(RunConfig& config) {
    apply_environment(config, [](const char* name) { return std::getenv(name); });
}

void validate(const RunConfig& c) {
    const auto fail = [](const std::string& m) { throw Error(Errc::ConfigError, m); };
    if (c.schema_version != kSchemaVersion) fail("unsupported schema_version");
    if (c.url.rfind("ws://", 0) != 0 && c.url.rfind("wss://", 0) != 0) fail("feed.url must be ws:// or wss://");
    for (const auto& ch : c.subscription.channels) {
        if (ch != feed::kChannelTicker && ch != feed::kChannelLevel2 && ch != feed::kChannelHeartbeat) {
            fail("feed.channels has unknown channel " + ch);
        }
    }
    if (c.subscription.channels.empty()) fail("feed.channels is empty");
    for (const auto& p : c.subscription.products) {
        if (p.empty()) fail("feed.products has an empty entry");
    }
    if (c.storage_root.empty()) fail("storage.root is empty");
    if (c.feature_schema != features::kSchemaVersion) {
        fail("features.schema_version " + std::to_string(c.feature_schema) + " does not match this build (" +
             std::to_string(features::kSchemaVersion) + ")");
    }
    if (c.steps == 0) fail("features.steps must be >= 1");
    if (c.depth_levels < 1 || c.depth_levels > 50) fail("features.depth_levels must be in [1, 50]");
    if (c.head != 2 && c.head != 4) fail("model.head must be 2 or 4");
    try {
        (void)models::build(c.variant, c.head, c.dims, 1);
    } catch (const Error& e) {
        fail(std::string("model.dims: ") + e.what());
    }
    const auto& t = c.training;
    if (t.batch_size == 0) fail("training.batch_size must be >= 1");
    if (!(t.validation_fraction >= 0.0 && t.validation_fraction < 1.0)) fail("training.validation_fraction must be in [0, 1)");
    if (!(t.optimizer.learning_rate > 0.0)) fail("training.optimizer.learning_rate must be > 0");
    if (!(t.optimizer.rho > 0.0 && t.optimizer.rho < 1.0)) fail("training.optimizer.rho must be in (0, 1)");
    if (!(t.optimizer.beta1 >= 0.0 && t.optimizer.beta1 < 1.0)) fail("training.optimizer.beta1 must be in [0, 1)");
    if (!(t.optimizer.beta2 >= 0.0 && t.optimizer.beta2 < 1.0)) fail("training.optimizer.beta2 must be in [0, 1)");
    if (!(t.optimizer.epsilon > 0.0)) fail("training.optimizer.epsilon must be > 0");
    if (!(t.clip_norm > 0.0)) fail("training.clip_norm must be > 0");
    try {
        walkthrough::validate(c.policy);
    } catch (const Error& e) {
        fail(std::string("walkthrough: ") + e.what());
    }
    if (c.granularity == 0 || c.span == 0) fail("walkthrough.granularity and span must be >= 1");
    if (!(c.replay_fraction >= 0.0 && c.replay_fraction <= 1.0)) fail("walkthrough.replay_fraction must be in [0, 1]");
    if (c.repeats == 0) fail("experiment.repeats must be >= 1");
    if (c.threads == 0) fail("experiment.threads must be >= 1");
}

std::string hash(const RunConfig& config) {
    const std::string text = to_json(config).dump();
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(text.data());
    return nn::to_hex(nn::sha256(std::span<const std::uint8_t>(bytes, text.size())));
}

walkthrough::RunnerConfig runner_config(const RunConfig& c) {
    walkthrough::RunnerConfig rc;
    rc.granularity = c.granularity;
    rc.span = c.span;
    rc.train = c.training;
    rc.replay_fraction = c.replay_fraction;
    rc.history_cap = c.history_cap;
    rc.seed = c.seed;
    return rc;
}

}  // namespace lobnet::config
