#include "lobnet/evalharness.hpp"

#include "lobnet/pipeline.hpp"
#include "lobnet/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace lobnet::eval {

using features::Sample;
using walkthrough::PolicyKind;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool chronological(const Sample& a, const Sample& b) {
    if (a.time_ns != b.time_ns) return a.time_ns < b.time_ns;
    if (a.product != b.product) return a.product < b.product;
    return a.t < b.t;
}

std::size_t labeled(const std::vector<Sample>& samples, int head) {
    return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(),
                                                  [&](const Sample& s) { return features::target_index(s, head) >= 0; }));
}

/// Runs f(0..n-1) on up to `threads` workers; f writes to its own slot.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::string fmt(double v, int digits = 6) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

bool is_excluded(const ExperimentConfig& config, const std::string& product) {
    return std::find(config.excluded.begin(), config.excluded.end(), product) != config.excluded.end();
}

std::vector<Sample> joined(const std::vector<const std::vector<Sample>*>& parts) {
    std::vector<Sample> out;
    for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
    std::stable_sort(out.begin(), out.end(), chronological);
    return out;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return kNaN;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

/// Accuracy over the newest `span` outcomes before stream index `end`.
std::optional<double> sliding(const std::vector<std::int8_t>& outcomes, std::size_t end, std::size_t span) {
    std::size_t n = 0;
    std::size_t ok = 0;
    for (std::size_t i = end; i > 0 && n < span; --i) {
        const auto o = outcomes[i - 1];
        if (o < 0) continue;
        ++n;
        ok += static_cast<std::size_t>(o);
    }
    if (n < span) return std::nullopt;
    return static_cast<double>(ok) / static_cast<double>(n);
}

}  // namespace

const std::vector<std::string>& default_excluded() {
    static const std::vector<std::string> pairs{"BCH-EUR", "BTC-GBP", "ETH-EUR", "BTC-EUR"};
    return pairs;
}

Split leading_split(std::vector<Sample> samples, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error(Errc::PreconditionViolation, "split fraction must be in (0, 1)");
    std::stable_sort(samples.begin(), samples.end(), chronological);
    std::size_t cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(samples.size())));
    while (cut > 0 && cut < samples.size() && samples[cut].time_ns == samples[cut - 1].time_ns) ++cut;
    Split split;
    split.train.assign(std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(cut)));
    split.test.assign(std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(cut)), std::make_move_iterator(samples.end()));
    return split;
}

bool leakage_free(const Split& split) noexcept {
    if (split.train.empty() || split.test.empty()) return true;
    std::int64_t max_train = std::numeric_limits<std::int64_t>::min();
    std::int64_t min_test = std::numeric_limits<std::int64_t>::max();
    for (const auto& s : split.train) max_train = std::max(max_train, s.time_ns);
    for (const auto& s : split.test) min_test = std::min(min_test, s.time_ns);
    return max_train < min_test;
}

std::vector<Sample> rewindow(const std::vector<Sample>& single_row, std::size_t steps) {
    if (steps == 0) throw Error(Errc::PreconditionViolation, "steps must be positive");
    for (const auto& s : single_row) {
        if (s.steps != 1) throw Error(Errc::PreconditionViolation, "rewindow expects single-row samples");
    }
    std::vector<Sample> out;
    std::size_t run = 0;  // consecutive samples ending at i
    for (std::size_t i = 0; i < single_row.size(); ++i) {
        const auto& s = single_row[i];
        const bool continues = i > 0 && single_row[i - 1].product == s.product && single_row[i - 1].t + 1 == s.t;
        run = continues ? run + 1 : 1;
        if (run < steps) continue;
        Sample w = s;
        w.steps = steps;
        w.window.clear();
        w.window.reserve(steps * s.dim);
        for (std::size_t k = i + 1 - steps; k <= i; ++k) {
            w.window.insert(w.window.end(), single_row[k].window.begin(), single_row[k].window.end());
        }
        out.push_back(std::move(w));
    }
    return out;
}

SampleProvider tick_provider(std::vector<features::FeatureVector> ticks) {
    auto shared = std::make_shared<const std::vector<features::FeatureVector>>(std::move(ticks));
    return [shared](const std::string& product, std::size_t steps) {
        std::vector<features::FeatureVector> mine;
        for (const auto& v : *shared) {
            if (v.product == product) mine.push_back(v);
        }
        return pipeline::make_samples(mine, steps);
    };
}

models::Dims experiment_dims() {
    models::Dims d;
    d.lstm1 = 16;
    d.lstm2 = 8;
    d.dense = 8;
    return d;
}

models::TrainConfig experiment_training(std::uint64_t seed) {
    models::TrainConfig tc;
    tc.epochs = 10;
    tc.batch_size = 32;
    tc.patience = 3;
    tc.optimizer.learning_rate = 0.005;
    tc.ae_epochs = 10;
    tc.seed = seed;
    return tc;
}

double fit_and_score(const std::vector<Sample>& train, const std::vector<Sample>& test, const ExperimentConfig& config) {
    auto bundle = models::build(config.variant, config.head, config.dims, config.seed);
    auto tc = config.train;
    tc.seed = config.seed;
    models::train(bundle, train, tc);
    return models::accuracy(bundle, test);
}

SplitSweepResult run_split_sweep(const std::vector<std::string>& products, const SampleProvider& provider,
                                 const ExperimentConfig& config, std::span<const double> fractions) {
    SplitSweepResult result;
    result.fractions.assign(fractions.begin(), fractions.end());
    const std::size_t nf = fractions.size();

    std::vector<std::vector<Split>> splits;  // [product][fraction]
    for (const auto& p : products) {
        std::vector<Split> mine;
        std::string reason;
        const auto samples = provider(p, config.steps);
        for (double f : fractions) {
            auto s = leading_split(samples, f);
            const auto ntr = labeled(s.train, config.head);
            const auto nte = labeled(s.test, config.head);
            if (ntr < config.min_train || nte < config.min_test) {
                reason = "fraction " + fmt(f, 2) + " leaves " + std::to_string(ntr) + " train / " +
                         std::to_string(nte) + " test samples";
                break;
            }
            result.leakage_free = result.leakage_free && leakage_free(s);
            mine.push_back(std::move(s));
        }
        if (!reason.empty()) {
            result.skipped.push_back({p, reason});
            continue;
        }
        result.products.push_back(p);
        splits.push_back(std::move(mine));
    }
    if (result.products.empty()) throw Error(Errc::InsufficientData, "no product has enough samples for the split sweep");

    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < result.products.size(); ++i) {
        if (!is_excluded(config, result.products[i])) chosen.push_back(i);
    }

    // cells: products x fractions, then universal and universal-selected per fraction
    const std::size_t np = result.products.size();
    std::vector<double> acc((np + 2) * nf, kNaN);
    parallel_for(acc.size(), config.threads, [&](std::size_t cell) {
        const std::size_t row = cell / nf;
        const std::size_t f = cell % nf;
        if (row < np) {
            acc[cell] = fit_and_score(splits[row][f].train, splits[row][f].test, config);
            return;
        }
        std::vector<const std::vector<Sample>*> tr;
        std::vector<const std::vector<Sample>*> te;
        for (std::size_t i = 0; i < np; ++i) {
            if (row == np + 1 && std::find(chosen.begin(), chosen.end(), i) == chosen.end()) continue;
            tr.push_back(&splits[i][f].train);
            te.push_back(&splits[i][f].test);
        }
        if (tr.empty()) return;
        acc[cell] = fit_and_score(joined(tr), joined(te), config);
    });

    for (std::size_t i = 0; i < np; ++i) {
        result.accuracy[result.products[i]].assign(acc.begin() + static_cast<std::ptrdiff_t>(i * nf),
                                                   acc.begin() + static_cast<std::ptrdiff_t>((i + 1) * nf));
    }
    for (std::size_t f = 0; f < nf; ++f) {
        std::vector<double> all;
        std::vector<double> sel;
        for (std::size_t i = 0; i < np; ++i) all.push_back(acc[i * nf + f]);
        for (std::size_t i : chosen) sel.push_back(acc[i * nf + f]);
        result.avg.push_back(mean(all));
        result.selected.push_back(mean(sel));
        result.universal.push_back(acc[np * nf + f]);
        result.universal_selected.push_back(acc[(np + 1) * nf + f]);
    }
    return result;
}

TimestepSweepResult run_timestep_sweep(const std::vector<std::string>& products, const SampleProvider& provider,
                                       const ExperimentConfig& config, std::span<const std::size_t> steps,
                                       double fraction) {
    TimestepSweepResult result;
    result.steps.assign(steps.begin(), steps.end());
    const std::size_t ns = steps.size();

    std::vector<std::string> kept;
    std::vector<std::vector<Split>> splits;  // [product][steps]
    for (const auto& p : products) {
        std::vector<Split> mine;
        std::string reason;
        for (std::size_t s : steps) {
            auto split = leading_split(provider(p, s), fraction);
            const auto ntr = labeled(split.train, config.head);
            const auto nte = labeled(split.test, config.head);
            if (ntr < config.min_train || nte < config.min_test) {
                reason = std::to_string(s) + " steps leave " + std::to_string(ntr) + " train / " + std::to_string(nte) +
                         " test samples";
                break;
            }
            mine.push_back(std::move(split));
        }
        if (!reason.empty()) {
            result.skipped.push_back({p, reason});
            continue;
        }
        kept.push_back(p);
        splits.push_back(std::move(mine));
    }
    if (kept.empty()) throw Error(Errc::InsufficientData, "no product has enough samples for the time-step sweep");

    std::vector<double> acc(2 * ns, kNaN);
    parallel_for(acc.size(), config.threads, [&](std::size_t cell) {
        const bool selected_only = cell >= ns;
        const std::size_t k = cell % ns;
        std::vector<const std::vector<Sample>*> tr;
        std::vector<const std::vector<Sample>*> te;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            if (selected_only && is_excluded(config, kept[i])) continue;
            tr.push_back(&splits[i][k].train);
            te.push_back(&splits[i][k].test);
        }
        if (tr.empty()) return;
        acc[cell] = fit_and_score(joined(tr), joined(te), config);
    });
    result.universal.assign(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(ns));
    result.universal_selected.assign(acc.begin() + static_cast<std::ptrdiff_t>(ns), acc.end());
    return result;
}

OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(Errc::PreconditionViolation, "x and y differ in length");
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2) throw Error(Errc::DegenerateX, "need at least two points");
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw Error(Errc::DegenerateX, "all x values are equal");
    OlsFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    for (std::size_t i = 0; i < x.size(); ++i) fit.residuals.push_back(y[i] - (fit.intercept + fit.slope * x[i]));
    return fit;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(Errc::PreconditionViolation, "x and y differ in length");
    if (x.size() < 2) throw Error(Errc::InsufficientData, "need at least two points");
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double m = (static_cast<double>(x.size()) + 1.0) / 2.0;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - m) * (ry[i] - m);
        sxx += (rx[i] - m) * (rx[i] - m);
        syy += (ry[i] - m) * (ry[i] - m);
    }
    if (sxx == 0.0 || syy == 0.0) return kNaN;
    return sxy / std::sqrt(sxx * syy);
}

namespace {

ClassRow make_row(std::string label, std::size_t tp, std::size_t predicted, std::size_t support) {
    ClassRow r;
    r.label = std::move(label);
    r.support = support;
    r.precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
    r.recall = support == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(support);
    r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

}  // namespace

ClassReport classification_report(std::span<const int> predictions, std::span<const int> truths,
                                  const std::vector<std::string>& names) {
    if (predictions.size() != truths.size()) throw Error(Errc::PreconditionViolation, "predictions and truths differ in length");
    if (predictions.empty()) throw Error(Errc::EmptyInput, "no samples to report on");
    const std::size_t k = names.size();
    const auto in_range = [k](int c) { return c >= 0 && static_cast<std::size_t>(c) < k; };

    ClassReport rep;
    rep.confusion.assign(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (!in_range(truths[i]) || !in_range(predictions[i])) throw Error(Errc::PreconditionViolation, "class index out of range");
        ++rep.confusion[static_cast<std::size_t>(truths[i])][static_cast<std::size_t>(predictions[i])];
    }
    std::size_t hits = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t predicted = 0;
        std::size_t support = 0;
        for (std::size_t o = 0; o < k; ++o) {
            predicted += rep.confusion[o][c];
            support += rep.confusion[c][o];
        }
        hits += rep.confusion[c][c];
        rep.classes.push_back(make_row(names[c], rep.confusion[c][c], predicted, support));
    }
    const auto n = static_cast<double>(truths.size());
    rep.accuracy = static_cast<double>(hits) / n;
    rep.average.label = "avg / total";
    for (const auto& r : rep.classes) {
        const double w = static_cast<double>(r.support) / n;
        rep.average.precision += w * r.precision;
        rep.average.recall += w * r.recall;
        rep.average.f1 += w * r.f1;
        rep.average.support += r.support;
    }

    // brute-force recount straight from the sequences
    std::vector<std::size_t> tp(k, 0);
    std::vector<std::size_t> fp(k, 0);
    std::vector<std::size_t> fn(k, 0);
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const auto t = static_cast<std::size_t>(truths[i]);
        const auto p = static_cast<std::size_t>(predictions[i]);
        if (t == p) {
            ++tp[t];
        } else {
            ++fp[p];
            ++fn[t];
        }
    }
    std::size_t total_support = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const auto check = make_row(names[c], tp[c], tp[c] + fp[c], tp[c] + fn[c]);
        const auto& r = rep.classes[c];
        total_support += check.support;
        if (check.support != r.support || std::abs(check.precision - r.precision) > 1e-12 ||
            std::abs(check.recall - r.recall) > 1e-12 || std::abs(check.f1 - r.f1) > 1e-12) {
            throw Error(Errc::SelfCheckFailed, "classification report disagrees with recount for class " + names[c]);
        }
    }
    if (total_support != truths.size() || rep.average.support != truths.size()) {
        throw Error(Errc::SelfCheckFailed, "supports do not sum to the sample count");
    }
    return rep;
}

std::string format_report(const ClassReport& report, const std::string& title) {
    std::ostringstream out;
    char line[160];
    out << title << '\n';
    std::snprintf(line, sizeof line, "%-12s %10s %10s %10s %10s\n", "", "precision", "accuracy", "f1-score", "support");
    out << line;
    const auto row = [&](const ClassRow& r) {
        std::snprintf(line, sizeof line, "%-12s %10.2f %10.2f %10.2f %10zu\n", r.label.c_str(), r.precision, r.recall, r.f1,
                      r.support);
        out << line;
    };
    for (const auto& r : report.classes) row(r);
    out << '\n';
    row(report.average);
    return out.str();
}

RatioSeries downtick_ratio_series(std::span<const features::BinaryLabel> labels, std::size_t group) {
    if (group == 0) throw Error(Errc::PreconditionViolation, "group must be positive");
    RatioSeries out;
    std::size_t down = 0;
    std::size_t in_block = 0;
    for (const auto l : labels) {
        if (l == features::BinaryLabel::Excluded) throw Error(Errc::PreconditionViolation, "downtick ratio needs binary labels");
        down += l == features::BinaryLabel::Down ? 1 : 0;
        if (++in_block == group) {
            out.ratios.push_back(static_cast<double>(down) / static_cast<double>(group));
            down = 0;
            in_block = 0;
        }
    }
    out.dropped = in_block;
    return out;
}

WalkthroughSetup drift_setup(std::uint64_t seed) {
    synthetic::StreamConfig c;
    c.pattern = synthetic::Pattern::RotatingDrift;
    c.samples = 5000;
    c.drift_rate = std::numbers::pi / 4000.0;
    c.seed = seed;
    auto all = synthetic::generate(c);
    WalkthroughSetup s;
    s.initial.assign(all.begin(), all.begin() + 1000);
    s.stream.assign(all.begin() + 1000, all.end());
    return s;
}

WalkthroughSetup regime_flip_setup(std::uint64_t seed) {
    synthetic::StreamConfig c;
    c.pattern = synthetic::Pattern::RegimeFlip;
    c.samples = 4000;
    c.flip_at = 2000;
    c.seed = seed;
    auto all = synthetic::generate(c);
    WalkthroughSetup s;
    s.initial.assign(all.begin(), all.begin() + 1000);
    s.stream.assign(all.begin() + 1000, all.end());
    s.flip_at = 1000;
    return s;
}

PolicyRun run_policy(const models::ModelBundle& initial_bundle, const WalkthroughSetup& setup, PolicyKind kind,
                     const WalkthroughConfig& config, std::uint64_t seed) {
    auto policy = config.policy;
    policy.kind = kind;
    auto rc = config.runner;
    rc.train = config.train;
    rc.train.seed = seed;
    rc.seed = seed;
    rc.on_event = nullptr;

    PolicyRun run;
    run.policy = kind;
    walkthrough::Runner runner(initial_bundle, setup.initial, policy, rc);
    walkthrough::AccuracyWindow curve(rc.granularity, rc.span);
    run.outcomes.reserve(setup.stream.size());
    for (std::size_t i = 0; i < setup.stream.size(); ++i) {
        const auto& sample = setup.stream[i];
        const auto step = runner.observe(sample);
        if (step.retrain_triggered) run.triggered_at.push_back(i);
        if (!step.correct) {
            run.outcomes.push_back(-1);
            continue;
        }
        run.outcomes.push_back(*step.correct ? 1 : 0);
        const int truth = features::target_index(sample, initial_bundle.head);
        run.predicted.push_back(step.prediction.label);
        run.truth.push_back(truth);
        const std::size_t before = curve.rolling().size();
        curve.record(step.prediction.label, truth);
        if (curve.rolling().size() > before) run.curve.push_back({curve.count(), curve.rolling().back()});
    }
    runner.wait_idle();
    run.events = runner.events();
    run.retrains = runner.retrains();
    run.failed_retrains = runner.failed_retrains();

    std::size_t n = 0;
    std::size_t ok = 0;
    for (auto it = run.outcomes.rbegin(); it != run.outcomes.rend() && n < config.final_window; ++it) {
        if (*it < 0) continue;
        ++n;
        ok += static_cast<std::size_t>(*it);
    }
    run.final_accuracy = n == 0 ? kNaN : static_cast<double>(ok) / static_cast<double>(n);
    return run;
}

const PolicyRun* Repeat::find(PolicyKind kind) const {
    for (const auto& r : runs) {
        if (r.policy == kind) return &r;
    }
    return nullptr;
}

std::size_t ComparisonResult::ordered_repeats() const {
    std::size_t n = 0;
    for (const auto& r : repeats) {
        const auto* st = r.find(PolicyKind::Static);
        const auto* md = r.find(PolicyKind::MddDynamic);
        const auto* sb = r.find(PolicyKind::StableEveryN);
        if (st && md && sb && st->final_accuracy < md->final_accuracy && md->final_accuracy <= sb->final_accuracy) ++n;
    }
    return n;
}

std::size_t ComparisonResult::below(PolicyKind a, PolicyKind b) const {
    std::size_t n = 0;
    for (const auto& r : repeats) {
        const auto* x = r.find(a);
        const auto* y = r.find(b);
        if (x && y && x->final_accuracy < y->final_accuracy) ++n;
    }
    return n;
}

std::size_t ComparisonResult::fewer_mdd_retrains() const {
    std::size_t n = 0;
    for (const auto& r : repeats) {
        const auto* md = r.find(PolicyKind::MddDynamic);
        const auto* sb = r.find(PolicyKind::StableEveryN);
        if (md && sb && md->retrains < sb->retrains) ++n;
    }
    return n;
}

namespace {

models::ModelBundle initial_bundle(const WalkthroughConfig& config, const WalkthroughSetup& setup, std::uint64_t seed) {
    auto bundle = models::build(config.variant, config.head, config.dims, seed);
    auto tc = config.train;
    tc.seed = seed;
    models::train(bundle, setup.initial, tc);
    return bundle;
}

}  // namespace

ComparisonResult run_walkthrough_comparison(const WalkthroughConfig& config) {
    if (!config.setup) throw Error(Errc::PreconditionViolation, "walkthrough comparison needs a stream setup");
    ComparisonResult result;
    result.policies = config.policies;
    result.repeats.resize(config.repeats);
    parallel_for(config.repeats, config.threads, [&](std::size_t r) {
        const std::uint64_t seed = config.seed + r;
        const auto setup = config.setup(seed);
        if (setup.stream.empty()) throw Error(Errc::InsufficientData, "empty walkthrough stream");
        const auto bundle = initial_bundle(config, setup, seed);
        Repeat rep;
        rep.seed = seed;
        for (const auto kind : config.policies) rep.runs.push_back(run_policy(bundle, setup, kind, config, seed));
        result.repeats[r] = std::move(rep);
    });
    return result;
}

void write_curves_csv(std::ostream& out, const ComparisonResult& result) {
    out << "repeat,seed,policy,prediction,accuracy\n";
    for (std::size_t r = 0; r < result.repeats.size(); ++r) {
        const auto& rep = result.repeats[r];
        for (const auto& run : rep.runs) {
            for (const auto& p : run.curve) {
                out << r << ',' << rep.seed << ',' << walkthrough::to_string(run.policy) << ',' << p.prediction << ','
                    << fmt(p.accuracy) << '\n';
            }
        }
    }
}

void write_markers_csv(std::ostream& out, const ComparisonResult& result) {
    out << "repeat,seed,policy,prediction,trigger,value,samples,status\n";
    for (std::size_t r = 0; r < result.repeats.size(); ++r) {
        const auto& rep = result.repeats[r];
        for (const auto& run : rep.runs) {
            for (const auto& e : run.events) {
                out << r << ',' << rep.seed << ',' << walkthrough::to_string(run.policy) << ',' << e.at_prediction << ','
                    << e.trigger << ',' << fmt(e.trigger_value) << ',' << e.samples << ','
                    << (e.diverged ? "diverged" : "ok") << '\n';
            }
        }
    }
}

RecoveryConfig::RecoveryConfig() { walkthrough.setup = regime_flip_setup; }

std::size_t RecoveryResult::passes() const {
    return static_cast<std::size_t>(std::count_if(repeats.begin(), repeats.end(), [&](const RecoveryRepeat& r) {
        return r.static_non_increasing() && r.recovered(horizon);
    }));
}

RecoveryResult run_decay_recovery(const RecoveryConfig& config) {
    const auto& wc = config.walkthrough;
    if (!wc.setup) throw Error(Errc::PreconditionViolation, "decay recovery needs a stream setup");
    RecoveryResult result;
    result.horizon = config.horizon;
    result.repeats.resize(wc.repeats);
    const std::size_t span = wc.runner.span;
    parallel_for(wc.repeats, wc.threads, [&](std::size_t r) {
        const std::uint64_t seed = wc.seed + r;
        const auto setup = wc.setup(seed);
        if (!setup.flip_at || *setup.flip_at >= setup.stream.size()) {
            throw Error(Errc::PreconditionViolation, "decay recovery needs a stream with a regime change");
        }
        const std::size_t flip = *setup.flip_at;
        const auto bundle = initial_bundle(wc, setup, seed);

        RecoveryRepeat rep;
        rep.seed = seed;
        rep.static_run = run_policy(bundle, setup, PolicyKind::Static, wc, seed);
        rep.stable_run = run_policy(bundle, setup, PolicyKind::StableEveryN, wc, seed);

        std::size_t outcomes_before_flip = 0;
        for (std::size_t i = 0; i < flip; ++i) outcomes_before_flip += rep.static_run.outcomes[i] >= 0 ? 1 : 0;
        std::vector<double> after;
        for (const auto& p : rep.static_run.curve) {
            if (p.prediction > outcomes_before_flip) after.push_back(p.accuracy);
        }
        if (after.size() >= 2) rep.static_trend = walkthrough::mann_kendall(after);

        const auto& stable = rep.stable_run;
        rep.pre_flip_accuracy = sliding(stable.outcomes, flip, span).value_or(kNaN);
        for (std::size_t at : stable.triggered_at) {
            if (at >= flip) {
                rep.first_retrain = at;
                break;
            }
        }
        if (rep.first_retrain && !std::isnan(rep.pre_flip_accuracy)) {
            const double target = config.ratio * rep.pre_flip_accuracy;
            for (std::size_t end = *rep.first_retrain + 1; end <= stable.outcomes.size(); ++end) {
                const auto acc = sliding(stable.outcomes, end, span);
                if (acc && *acc >= target) {
                    rep.recovered_after = end - *rep.first_retrain;
                    break;
                }
            }
        }
        result.repeats[r] = std::move(rep);
    });
    return result;
}

void write_table3(std::ostream& out, const SplitSweepResult& result) {
    out << "product";
    for (double f : result.fractions) out << ',' << fmt(f, 2);
    out << '\n';
    const auto row = [&](const std::string& name, const std::vector<double>& v) {
        out << name;
        for (double a : v) out << ',' << fmt(a);
        out << '\n';
    };
    for (const auto& p : result.products) row(p, result.accuracy.at(p));
    row("AVG", result.avg);
    row("Selected", result.selected);
}

void write_table4(std::ostream& out, const SplitSweepResult& result) {
    out << "fraction,avg,selected,universal,universal_selected\n";
    for (std::size_t f = 0; f < result.fractions.size(); ++f) {
        out << fmt(result.fractions[f], 2) << ',' << fmt(result.avg[f]) << ',' << fmt(result.selected[f]) << ','
            << fmt(result.universal[f]) << ',' << fmt(result.universal_selected[f]) << '\n';
    }
}

void write_table5(std::ostream& out, const TimestepSweepResult& result) {
    out << "steps,universal,universal_selected\n";
    for (std::size_t i = 0; i < result.steps.size(); ++i) {
        out << result.steps[i] << ',' << fmt(result.universal[i]) << ',' << fmt(result.universal_selected[i]) << '\n';
    }
}

TimestepSweepResult read_table5(std::istream& in) {
    TimestepSweepResult result;
    std::string line;
    if (!std::getline(in, line) || line.rfind("steps,universal,universal_selected", 0) != 0) {
        throw Error(Errc::ConfigError, "time-step table must start with steps,universal,universal_selected");
    }
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream cells(line);
        std::string a, b, c;
        if (!std::getline(cells, a, ',') || !std::getline(cells, b, ',') || !std::getline(cells, c)) {
            throw Error(Errc::ConfigError, "bad time-step row: " + line);
        }
        try {
            std::size_t used = 0;
            const auto steps = std::stoul(a, &used);
            if (used != a.size()) throw std::invalid_argument(a);
            result.steps.push_back(steps);
            result.universal.push_back(std::stod(b));
            result.universal_selected.push_back(std::stod(c));
        } catch (const std::logic_error&) {
            throw Error(Errc::ConfigError, "bad time-step row: " + line);
        }
    }
    return result;
}

void write_table6(std::ostream& out, const OlsFit& universal, const OlsFit& selected) {
    out << "term,universal,universal_selected\n";
    out << "Const," << fmt(universal.intercept, 8) << ',' << fmt(selected.intercept, 8) << '\n';
    out << "X," << fmt(universal.slope, 8) << ',' << fmt(selected.slope, 8) << '\n';
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
    out << "prediction,accuracy\n";
    for (const auto& p : curve) out << p.prediction << ',' << fmt(p.accuracy) << '\n';
}

}  // namespace lobnet::eval
