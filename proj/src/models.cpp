#include "lobnet/models.hpp"

#include "lobnet/nn/checkpoint.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lobnet::models {

using features::Sample;
using nlohmann::json;

std::string_view to_string(Variant v) noexcept {
    switch (v) {
        case Variant::Plain: return "plain";
        case Variant::Denoiser: return "denoiser";
        case Variant::Reducer: return "reducer";
    }
    return "plain";
}

Variant variant_from_string(std::string_view name) {
    if (name == "plain") return Variant::Plain;
    if (name == "denoiser") return Variant::Denoiser;
    if (name == "reducer") return Variant::Reducer;
    throw Error(Errc::ConfigError, "unknown variant " + std::string(name));
}

std::vector<double> TrainReport::train_loss_curve() const {
    std::vector<double> out;
    for (const auto& e : epochs) out.push_back(e.train_loss);
    return out;
}

std::size_t ModelBundle::classifier_input() const noexcept {
    return variant == Variant::Plain ? dims.input : dims.pca;
}

void ModelBundle::preprocess_row(std::span<const double> raw, std::span<double> out) const {
    if (raw.size() != dims.input || out.size() != classifier_input()) {
        throw Error(Errc::ShapeMismatch, "preprocess: expected " + std::to_string(dims.input) + " inputs");
    }
    if (variant == Variant::Plain) {
        norm.apply_fixed(raw, out);
        return;
    }
    std::vector<double> z(dims.input);
    norm.apply_fixed(raw, z);
    std::vector<double> code(ae->code_dim());
    ae->encode(z, code);
    if (variant == Variant::Denoiser) {
        std::vector<double> x_hat(dims.input);
        ae->decode(code, x_hat);
        pca->transform(x_hat, out);
    } else {
        pca->transform(code, out);
    }
}

std::vector<double> ModelBundle::preprocess(std::span<const double> window, std::size_t steps) const {
    if (steps == 0 || window.size() != steps * dims.input) throw Error(Errc::ShapeMismatch, "window does not match bundle input");
    const std::size_t m = classifier_input();
    std::vector<double> feats(steps * m);
    for (std::size_t t = 0; t < steps; ++t) {
        preprocess_row(window.subspan(t * dims.input, dims.input), std::span<double>(feats).subspan(t * m, m));
    }
    return feats;
}

Prediction ModelBundle::classify(std::span<const double> feats, std::size_t steps) const {
    if (steps == 0 || feats.size() != steps * classifier_input()) throw Error(Errc::ShapeMismatch, "classifier input size");
    std::vector<double> hs1(steps * dims.lstm1);
    std::vector<double> hs2(steps * dims.lstm2);
    lstm1.forward(feats, steps, hs1, nullptr);
    lstm2.forward(hs1, steps, hs2, nullptr);
    std::vector<double> d(dims.dense);
    dense.forward(std::span<const double>(hs2).subspan((steps - 1) * dims.lstm2, dims.lstm2), d);
    std::vector<double> logits(static_cast<std::size_t>(head));
    out.forward(d, logits);
    Prediction p;
    p.probs.resize(logits.size());
    nn::softmax(logits, p.probs);
    p.label = static_cast<int>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
    return p;
}

Prediction ModelBundle::predict(std::span<const double> window, std::size_t steps) const {
    return classify(preprocess(window, steps), steps);
}

Prediction ModelBundle::predict(const Sample& sample) const { return predict(sample.window, sample.steps); }

std::vector<nn::Parameter*> ModelBundle::classifier_parameters() {
    return {&lstm1.weight, &lstm1.bias, &lstm2.weight, &lstm2.bias, &dense.weight, &dense.bias, &out.weight, &out.bias};
}

std::vector<const nn::Parameter*> ModelBundle::classifier_parameters() const {
    return {&lstm1.weight, &lstm1.bias, &lstm2.weight, &lstm2.bias, &dense.weight, &dense.bias, &out.weight, &out.bias};
}

std::string ModelBundle::content_hash() const {
    nn::Sha256 h;
    h.update(std::string_view("lobnet-bundle/1"));
    h.update(to_string(variant));
    h.update_u64(static_cast<std::uint64_t>(head));
    for (auto v : {dims.input, dims.lstm1, dims.lstm2, dims.dense, dims.pca}) h.update_u64(v);
    h.update_u64(dims.ae.size());
    for (auto v : dims.ae) h.update_u64(v);
    h.update_f64(norm.mean);
    h.update_f64(norm.stddev);
    if (ae) {
        for (const auto* p : ae->parameters()) h.update_f64(p->value.data());
    }
    if (pca) {
        h.update_f64(pca->mean);
        h.update_f64(pca->components.data());
    }
    for (const auto* p : classifier_parameters()) h.update_f64(p->value.data());
    const auto digest = h.finish();
    return nn::to_hex(digest);
}

ModelBundle::Flops ModelBundle::forward_flops(std::size_t steps) const noexcept {
    Flops f;
    if (ae) {
        f.encode = steps * ae->encode_flops();
        if (variant == Variant::Denoiser) f.decode = steps * ae->decode_flops();
    }
    if (pca) f.pca = steps * pca->forward_flops();
    f.lstm = lstm1.forward_flops(steps) + lstm2.forward_flops(steps);
    f.head = dense.forward_flops() + out.forward_flops();
    return f;
}

namespace {

features::NormalizationStats identity_norm(std::size_t d) {
    features::NormalizationStats st;
    st.mean.assign(d, 0.0);
    st.stddev.assign(d, 1.0);
    return st;
}

nn::PcaModel identity_pca(std::size_t d, std::size_t m) {
    nn::PcaModel p;
    p.mean.assign(d, 0.0);
    p.components = nn::Tensor::matrix(m, d);
    for (std::size_t k = 0; k < m; ++k) p.components(k, k) = 1.0;
    p.explained_variance.assign(m, 0.0);
    p.explained_ratio.assign(m, 0.0);
    return p;
}

}  // namespace

ModelBundle build(Variant variant, int head, const Dims& dims, std::uint64_t seed) {
    if (head != 2 && head != 4) throw Error(Errc::BadLayout, "head must be 2 or 4, got " + std::to_string(head));
    if (dims.input == 0 || dims.lstm1 == 0 || dims.lstm2 == 0 || dims.dense == 0) {
        throw Error(Errc::BadLayout, "model widths must be positive");
    }
    ModelBundle b;
    b.variant = variant;
    b.head = head;
    b.dims = dims;
    b.metadata.seed = seed;
    b.norm = identity_norm(dims.input);
    nn::Rng rng(seed);
    if (variant != Variant::Plain) {
        if (dims.ae.empty() || dims.ae.front() != dims.input) throw Error(Errc::BadLayout, "autoencoder input must equal feature width");
        nn::AutoencoderLayout layout;
        layout.widths = dims.ae;
        b.ae.emplace(layout, "ae");
        const std::size_t pca_in = variant == Variant::Denoiser ? dims.input : b.ae->code_dim();
        if (dims.pca == 0 || dims.pca > pca_in) {
            throw Error(Errc::BadLayout, "pca width " + std::to_string(dims.pca) + " exceeds its input " + std::to_string(pca_in));
        }
        b.ae->init(rng);
        b.pca = identity_pca(pca_in, dims.pca);
    }
    b.lstm1 = nn::Lstm("lstm1", b.classifier_input(), dims.lstm1);
    b.lstm2 = nn::Lstm("lstm2", dims.lstm1, dims.lstm2);
    b.dense = nn::Dense("dense", dims.lstm2, dims.dense, nn::Activation::Tanh);
    b.out = nn::Dense("out", dims.dense, static_cast<std::size_t>(head), nn::Activation::Identity);
    b.lstm1.init(rng);
    b.lstm2.init(rng);
    b.dense.init(rng);
    b.out.init(rng);
    return b;
}

namespace {

struct Prepared {
    std::vector<double> feats;  // n x steps x m
    std::vector<int> targets;
    std::size_t steps = 1;
    std::size_t width = 0;
    std::size_t size() const noexcept { return targets.size(); }
    std::span<const double> at(std::size_t i) const {
        return std::span<const double>(feats).subspan(i * steps * width, steps * width);
    }
};

Prepared prepare(const ModelBundle& b, const std::vector<const Sample*>& samples, std::size_t steps) {
    Prepared p;
    p.steps = steps;
    p.width = b.classifier_input();
    p.feats.reserve(samples.size() * steps * p.width);
    for (const Sample* s : samples) {
        auto f = b.preprocess(s->window, s->steps);
        p.feats.insert(p.feats.end(), f.begin(), f.end());
        p.targets.push_back(features::target_index(*s, b.head));
    }
    return p;
}

/// Forward + backward of one sample; returns its cross-entropy.
class Trainer {
public:
    explicit Trainer(ModelBundle& b) : b_(b) {}

    double forward(std::span<const double> feats, std::size_t steps, std::vector<double>& probs) {
        const auto& d = b_.dims;
        hs1_.assign(steps * d.lstm1, 0.0);
        hs2_.assign(steps * d.lstm2, 0.0);
        b_.lstm1.forward(feats, steps, hs1_, &c1_);
        b_.lstm2.forward(hs1_, steps, hs2_, &c2_);
        last_.assign(hs2_.end() - static_cast<std::ptrdiff_t>(d.lstm2), hs2_.end());
        dense_.assign(d.dense, 0.0);
        b_.dense.forward(last_, dense_);
        logits_.assign(static_cast<std::size_t>(b_.head), 0.0);
        b_.out.forward(dense_, logits_);
        probs.resize(logits_.size());
        nn::softmax(logits_, probs);
        return 0.0;
    }

    void backward(const std::vector<double>& probs, int target, double weight, std::size_t steps) {
        const auto& d = b_.dims;
        dlogits_.assign(probs.size(), 0.0);
        nn::softmax_cross_entropy_grad(probs, static_cast<std::size_t>(target), weight, dlogits_);
        ddense_.assign(d.dense, 0.0);
        b_.out.backward(dense_, logits_, dlogits_, ddense_);
        dlast_.assign(d.lstm2, 0.0);
        b_.dense.backward(last_, dense_, ddense_, dlast_);
        dhs2_.assign(steps * d.lstm2, 0.0);
        std::copy(dlast_.begin(), dlast_.end(), dhs2_.end() - static_cast<std::ptrdiff_t>(d.lstm2));
        dhs1_.assign(steps * d.lstm1, 0.0);
        b_.lstm2.backward(c2_, dhs2_, dhs1_);
        b_.lstm1.backward(c1_, dhs1_, {});
    }

private:
    ModelBundle& b_;
    nn::Lstm::Cache c1_, c2_;
    std::vector<double> hs1_, hs2_, last_, dense_, logits_, dlogits_, ddense_, dlast_, dhs2_, dhs1_;
};

struct Eval {
    double loss = 0.0;
    double accuracy = 0.0;
};

Eval evaluate(ModelBundle& b, const Prepared& data, const std::vector<double>* weights) {
    if (data.size() == 0) return {};
    Trainer tr(b);
    std::vector<double> probs;
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        tr.forward(data.at(i), data.steps, probs);
        const auto t = static_cast<std::size_t>(data.targets[i]);
        const double w = weights != nullptr ? (*weights)[t] : 1.0;
        loss += w * nn::cross_entropy(probs, t);
        const auto label = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        if (label == t) ++correct;
    }
    const double n = static_cast<double>(data.size());
    return {loss / n, static_cast<double>(correct) / n};
}

bool parameters_finite(const ModelBundle& b) {
    for (const auto* p : b.classifier_parameters()) {
        if (!nn::all_finite(p->value.data())) return false;
    }
    return true;
}

void fit_preprocessing(ModelBundle& b, const std::vector<const Sample*>& train_set, const TrainConfig& config,
                       TrainReport& report) {
    std::vector<double> rows;
    for (const Sample* s : train_set) rows.insert(rows.end(), s->window.begin(), s->window.end());
    b.norm = features::fit_normalizer_rows(rows, b.dims.input);
    if (b.variant == Variant::Plain) return;

    // One row per sample (its newest tick) so overlapping windows are not repeated.
    nn::Tensor x = nn::Tensor::matrix(train_set.size(), b.dims.input);
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        const Sample& s = *train_set[i];
        b.norm.apply_fixed(s.row(s.steps - 1), x.row(i));
    }
    nn::AutoencoderTrainConfig ae_cfg;
    ae_cfg.epochs = config.ae_epochs;
    ae_cfg.batch_size = config.batch_size;
    ae_cfg.optimizer = config.optimizer;
    ae_cfg.optimizer.kind = nn::OptimizerKind::RMSprop;
    ae_cfg.clip_norm = config.clip_norm;
    ae_cfg.seed = config.seed ^ 0xAEAEAEAEull;
    auto ae_result = nn::autoencoder_train(*b.ae, x, ae_cfg);
    report.ae_loss_curve = std::move(ae_result.loss_curve);
    report.clip_events += ae_result.clip_events;

    const std::size_t pca_in = b.variant == Variant::Denoiser ? b.dims.input : b.ae->code_dim();
    nn::Tensor stage = nn::Tensor::matrix(x.rows(), pca_in);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (b.variant == Variant::Denoiser) {
            const auto r = b.ae->reconstruct(x.row(i));
            std::copy(r.begin(), r.end(), stage.row(i).begin());
        } else {
            b.ae->encode(x.row(i), stage.row(i));
        }
    }
    nn::PcaOptions opts;
    opts.pad_to_requested = true;
    b.pca = nn::pca_fit(stage, b.dims.pca, opts);
}

}  // namespace

TrainReport train(ModelBundle& bundle, const std::vector<Sample>& samples, const TrainConfig& config,
                  const std::vector<Sample>* validation) {
    TrainReport report;
    if (config.epochs == 0) return report;
    if (config.batch_size == 0) throw Error(Errc::PreconditionViolation, "batch size must be positive");

    std::vector<const Sample*> usable;
    std::size_t steps = 0;
    for (const auto& s : samples) {
        if (features::target_index(s, bundle.head) < 0) {
            ++report.excluded_samples;
            continue;
        }
        if (steps == 0) steps = s.steps;
        if (s.steps != steps || s.dim != bundle.dims.input) throw Error(Errc::ShapeMismatch, "training samples differ in shape");
        usable.push_back(&s);
    }
    if (usable.empty()) throw Error(Errc::InsufficientData, "no labeled samples for this head");

    std::vector<const Sample*> train_set;
    std::vector<const Sample*> val_set;
    if (validation != nullptr) {
        train_set = usable;
        for (const auto& s : *validation) {
            if (features::target_index(s, bundle.head) >= 0 && s.steps == steps) val_set.push_back(&s);
        }
    } else {
        std::size_t n_val = 0;
        if (config.validation_fraction > 0.0 && usable.size() >= 10) {
            n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(usable.size() * config.validation_fraction)));
        }
        train_set.assign(usable.begin(), usable.end() - static_cast<std::ptrdiff_t>(n_val));
        val_set.assign(usable.end() - static_cast<std::ptrdiff_t>(n_val), usable.end());
    }
    if (train_set.size() < 2) throw Error(Errc::InsufficientData, "need at least 2 training samples");
    report.train_samples = train_set.size();
    report.val_samples = val_set.size();

    fit_preprocessing(bundle, train_set, config, report);

    const Prepared train_data = prepare(bundle, train_set, steps);
    const Prepared val_data = prepare(bundle, val_set, steps);

    const auto k = static_cast<std::size_t>(bundle.head);
    std::vector<double> weights(k, 1.0);
    if (config.class_weights) {
        std::vector<std::size_t> counts(k, 0);
        for (int t : train_data.targets) ++counts[static_cast<std::size_t>(t)];
        const double n = static_cast<double>(train_data.size());
        for (std::size_t c = 0; c < k; ++c) {
            weights[c] = counts[c] == 0 ? 0.0 : n / (static_cast<double>(k) * static_cast<double>(counts[c]));
        }
    }
    report.class_weights = weights;

    auto params = bundle.classifier_parameters();
    nn::Optimizer opt(config.optimizer);
    nn::Rng rng(config.seed);
    std::vector<std::size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), 0);
    Trainer tr(bundle);
    std::vector<double> probs;

    std::vector<nn::Tensor> best;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, order.size() - start);
            for (auto* p : params) p->zero_grad();
            const double scale = 1.0 / static_cast<double>(len);
            for (std::size_t j = start; j < start + len; ++j) {
                const std::size_t i = order[j];
                tr.forward(train_data.at(i), steps, probs);
                const int t = train_data.targets[i];
                tr.backward(probs, t, weights[static_cast<std::size_t>(t)] * scale, steps);
            }
            if (nn::clip_gradients(params, config.clip_norm)) ++report.clip_events;
            opt.step(params);
        }
        if (!parameters_finite(bundle)) {
            throw Error(Errc::DivergenceDetected, "non-finite parameters after epoch " + std::to_string(epoch));
        }
        EpochStats st;
        const Eval tr_eval = evaluate(bundle, train_data, &weights);
        st.train_loss = tr_eval.loss;
        st.train_accuracy = tr_eval.accuracy;
        if (!std::isfinite(st.train_loss)) {
            throw Error(Errc::DivergenceDetected, "non-finite training loss at epoch " + std::to_string(epoch));
        }
        if (val_data.size() > 0) {
            const Eval v = evaluate(bundle, val_data, nullptr);
            st.val_loss = v.loss;
            st.val_accuracy = v.accuracy;
        } else {
            st.val_loss = st.train_loss;
            st.val_accuracy = st.train_accuracy;
        }
        report.epochs.push_back(st);

        if (st.val_loss < best_val) {
            best_val = st.val_loss;
            report.best_epoch = epoch;
            since_best = 0;
            best.clear();
            for (const auto* p : params) best.push_back(p->value);
        } else if (++since_best >= config.patience) {
            report.stopped_early = epoch < config.epochs;
            break;
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];

    bundle.metadata.train_start_ns = train_set.front()->time_ns;
    bundle.metadata.train_end_ns = train_set.back()->time_ns;
    bundle.metadata.train_samples = train_set.size();
    bundle.metadata.epochs_run = report.epochs.size();
    bundle.metadata.steps = steps;
    return report;
}

double accuracy(const ModelBundle& bundle, const std::vector<Sample>& samples) {
    std::size_t n = 0;
    std::size_t correct = 0;
    for (const auto& s : samples) {
        const int t = features::target_index(s, bundle.head);
        if (t < 0) continue;
        ++n;
        if (bundle.predict(s).label == t) ++correct;
    }
    if (n == 0) throw Error(Errc::EmptyInput, "no labeled samples to score");
    return static_cast<double>(correct) / static_cast<double>(n);
}

namespace {

template <typename Bundle>
auto all_parameters(Bundle& b) {
    auto out = b.classifier_parameters();
    if (b.ae) {
        auto ae = b.ae->parameters();
        out.insert(out.begin(), ae.begin(), ae.end());
    }
    return out;
}

}  // namespace

void save(const ModelBundle& bundle, const std::filesystem::path& path) {
    nn::Checkpoint ck;
    json meta = json::object();
    meta["format"] = "lobnet-bundle";
    meta["variant"] = to_string(bundle.variant);
    meta["head"] = bundle.head;
    meta["dims"] = {{"input", bundle.dims.input}, {"lstm1", bundle.dims.lstm1}, {"lstm2", bundle.dims.lstm2},
                    {"dense", bundle.dims.dense}, {"ae", bundle.dims.ae},         {"pca", bundle.dims.pca}};
    const auto& md = bundle.metadata;
    meta["metadata"] = {{"seed", md.seed},
                        {"train_start_ns", md.train_start_ns},
                        {"train_end_ns", md.train_end_ns},
                        {"train_samples", md.train_samples},
                        {"epochs_run", md.epochs_run},
                        {"steps", md.steps}};
    meta["norm_dropped"] = bundle.norm.dropped;
    if (bundle.pca) meta["pca"] = {{"informative", bundle.pca->informative}, {"rank_deficient", bundle.pca->rank_deficient}};
    meta["content_hash"] = bundle.content_hash();
    ck.metadata = meta.dump();

    ck.add("norm.mean", nn::Tensor({bundle.norm.mean.size()}, bundle.norm.mean));
    ck.add("norm.stddev", nn::Tensor({bundle.norm.stddev.size()}, bundle.norm.stddev));
    if (bundle.pca) {
        const auto& p = *bundle.pca;
        ck.add("pca.mean", nn::Tensor({p.mean.size()}, p.mean));
        ck.add("pca.components", p.components);
        ck.add("pca.explained_variance", nn::Tensor({p.explained_variance.size()}, p.explained_variance));
        ck.add("pca.explained_ratio", nn::Tensor({p.explained_ratio.size()}, p.explained_ratio));
    }
    for (const auto* p : all_parameters(bundle)) ck.add(p->name, p->value);
    nn::save_checkpoint(ck, path);
}

ModelBundle load(const std::filesystem::path& path, std::optional<Variant> expected) {
    const nn::Checkpoint ck = nn::load_checkpoint(path);
    const json meta = json::parse(ck.metadata, nullptr, false);
    if (meta.is_discarded() || !meta.is_object() || meta.value("format", "") != "lobnet-bundle") {
        throw Error(Errc::CorruptCheckpoint, "checkpoint is not a model bundle");
    }
    ModelBundle b;
    try {
        const Variant variant = variant_from_string(meta.at("variant").get<std::string>());
        if (expected && *expected != variant) {
            throw Error(Errc::VariantMismatch, "checkpoint holds a " + std::string(to_string(variant)) + " bundle, expected " +
                                                   std::string(to_string(*expected)));
        }
        Dims dims;
        const auto& jd = meta.at("dims");
        dims.input = jd.at("input");
        dims.lstm1 = jd.at("lstm1");
        dims.lstm2 = jd.at("lstm2");
        dims.dense = jd.at("dense");
        dims.ae = jd.at("ae").get<std::vector<std::size_t>>();
        dims.pca = jd.at("pca");
        b = build(variant, meta.at("head").get<int>(), dims, 0);
        const auto& jm = meta.at("metadata");
        b.metadata.seed = jm.at("seed");
        b.metadata.train_start_ns = jm.at("train_start_ns");
        b.metadata.train_end_ns = jm.at("train_end_ns");
        b.metadata.train_samples = jm.at("train_samples");
        b.metadata.epochs_run = jm.at("epochs_run");
        b.metadata.steps = jm.at("steps");
    } catch (const json::exception& e) {
        throw Error(Errc::CorruptCheckpoint, std::string("bad bundle manifest: ") + e.what());
    }

    auto vec = [&](const char* name, std::size_t n) {
        const auto& t = ck.get(name);
        if (t.size() != n) throw Error(Errc::CorruptCheckpoint, std::string("bad size for ") + name);
        return std::vector<double>(t.data().begin(), t.data().end());
    };
    b.norm.mean = vec("norm.mean", b.dims.input);
    b.norm.stddev = vec("norm.stddev", b.dims.input);
    b.norm.dropped.clear();
    for (std::size_t i = 0; i < b.norm.stddev.size(); ++i) {
        if (b.norm.stddev[i] == 0.0) b.norm.dropped.push_back(i);
    }
    if (b.pca) {
        auto& p = *b.pca;
        p.mean = vec("pca.mean", p.input_dim());
        const auto& comps = ck.get("pca.components");
        if (comps.shape() != p.components.shape()) throw Error(Errc::CorruptCheckpoint, "bad shape for pca.components");
        p.components = comps;
        p.explained_variance = vec("pca.explained_variance", b.dims.pca);
        p.explained_ratio = vec("pca.explained_ratio", b.dims.pca);
        if (meta.contains("pca")) {
            p.informative = meta["pca"].value("informative", std::size_t{0});
            p.rank_deficient = meta["pca"].value("rank_deficient", false);
        }
    }
    for (auto* p : all_parameters(b)) {
        const auto& t = ck.get(p->name);
        if (t.shape() != p->value.shape()) throw Error(Errc::CorruptCheckpoint, "bad shape for " + p->name);
        p->value = t;
    }
    if (meta.value("content_hash", "") != b.content_hash()) {
        throw Error(Errc::CorruptCheckpoint, "bundle content hash mismatch");
    }
    return b;
}

}  // namespace lobnet::models
