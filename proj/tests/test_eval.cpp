#include "lobnet/evalharness.hpp"
#include "lobnet/nn/checkpoint.hpp"
#include "lobnet/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace lobnet::eval {
namespace {

using features::BinaryLabel;
using features::Sample;
using walkthrough::PolicyKind;

const std::vector<double> kSteps{1, 3, 5, 7, 10, 20, 40};
const std::vector<double> kUniversal{.7111, .7263, .7200, .7086, .7146, .7116, .7131};
const std::vector<double> kSelected{.7312, .7445, .7419, .7369, .7389, .7421, .7275};

// Normal equations by Cramer's rule, independent of the centred formula.
std::pair<double, double> cramer(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    return {(sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det};
}

TEST(Ols, TwoPointsExact) {
    const std::vector<double> x{0, 1}, y{1, 2};
    const auto f = ols_fit(x, y);
    EXPECT_EQ(f.intercept, 1.0);
    EXPECT_EQ(f.slope, 1.0);
}

TEST(Ols, TimestepTableUniversal) {
    const auto f = ols_fit(kSteps, kUniversal);
    EXPECT_NEAR(f.intercept, 0.7166, 0.001);
    EXPECT_NEAR(f.slope, -0.000126, 0.00003);
    const auto [a, b] = cramer(kSteps, kUniversal);
    EXPECT_NEAR(f.intercept, a, 1e-12);
    EXPECT_NEAR(f.slope, b, 1e-12);
}

TEST(Ols, TimestepTableSelected) {
    const auto f = ols_fit(kSteps, kSelected);
    EXPECT_NEAR(f.intercept, 0.7406, 0.001);
    EXPECT_NEAR(f.slope, -0.0002, 0.00005);
}

TEST(Ols, NormalEquationsHold) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(12), y(12);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = u(rng);
            y[i] = 0.3 - 0.7 * x[i] + u(rng);
        }
        const auto f = ols_fit(x, y);
        double r = 0, xr = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            r += f.residuals[i];
            xr += x[i] * f.residuals[i];
        }
        EXPECT_NEAR(r, 0.0, 1e-10);
        EXPECT_NEAR(xr, 0.0, 1e-10);
    }
}

TEST(Ols, DegenerateX) {
    const std::vector<double> one{1}, x{2, 2, 2}, y{1, 2, 3};
    try {
        ols_fit(one, one);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DegenerateX);
    }
    try {
        ols_fit(x, y);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DegenerateX);
    }
    EXPECT_THROW(ols_fit(x, one), Error);
}

TEST(Spearman, RanksAndTies) {
    const std::vector<double> x{1, 2, 3, 4, 5};
    EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{.1, .2, .3, .4, .5}), 1.0);
    EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0);
    EXPECT_NEAR(spearman(x, std::vector<double>{.1, .3, .2, .4, .5}), 0.9, 1e-12);
    // ties take the mean rank: ranks 1, 2.5, 2.5, 4, 5
    EXPECT_NEAR(spearman(x, std::vector<double>{1, 2, 2, 3, 4}), 0.9746794344808963, 1e-12);
}

TEST(ClassReport, AllCorrect) {
    const std::vector<int> v{0, 1, 1, 0, 1};
    const auto r = classification_report(v, v, {"up", "down"});
    for (const auto& row : r.classes) {
        EXPECT_EQ(row.precision, 1.0);
        EXPECT_EQ(row.recall, 1.0);
        EXPECT_EQ(row.f1, 1.0);
    }
    EXPECT_EQ(r.average.f1, 1.0);
    EXPECT_EQ(r.accuracy, 1.0);
}

TEST(ClassReport, HandComputedConfusion) {
    // truth up: 3 predicted up, 1 down; truth down: 2 up, 4 down
    std::vector<int> truth, pred;
    const auto add = [&](int t, int p, int n) {
        for (int i = 0; i < n; ++i) {
            truth.push_back(t);
            pred.push_back(p);
        }
    };
    add(0, 0, 3);
    add(0, 1, 1);
    add(1, 0, 2);
    add(1, 1, 4);
    const auto r = classification_report(pred, truth, {"up", "down"});
    EXPECT_DOUBLE_EQ(r.classes[0].precision, 3.0 / 5.0);
    EXPECT_DOUBLE_EQ(r.classes[0].recall, 3.0 / 4.0);
    EXPECT_NEAR(r.classes[0].f1, 2.0 / (5.0 / 3.0 + 4.0 / 3.0), 1e-15);
    EXPECT_DOUBLE_EQ(r.classes[1].precision, 4.0 / 5.0);
    EXPECT_DOUBLE_EQ(r.classes[1].recall, 4.0 / 6.0);
    EXPECT_EQ(r.classes[0].support + r.classes[1].support, 10u);
    EXPECT_EQ(r.average.support, 10u);
    EXPECT_EQ(r.confusion[1][0], 2u);
    EXPECT_NEAR(r.average.recall, 0.7, 1e-15);  // weighted recall equals accuracy
    const auto text = format_report(r, "report");
    EXPECT_NE(text.find("avg / total"), std::string::npos);
    EXPECT_NE(text.find("precision"), std::string::npos);
}

TEST(ClassReport, RandomFourClassInvariants) {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> c(0, 3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> t(300), p(300);
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i] = c(rng);
            p[i] = rng() % 3 == 0 ? c(rng) : t[i];
        }
        const auto r = classification_report(p, t, {"a", "b", "c", "d"});
        std::size_t support = 0;
        for (const auto& row : r.classes) {
            support += row.support;
            if (row.precision + row.recall > 0) EXPECT_NEAR(row.f1, 2 * row.precision * row.recall / (row.precision + row.recall), 1e-15);
        }
        EXPECT_EQ(support, t.size());
    }
}

TEST(ClassReport, NeverPredictedClassAndErrors) {
    const std::vector<int> t{0, 1, 1}, p{0, 0, 0};
    const auto r = classification_report(p, t, {"up", "down"});
    EXPECT_EQ(r.classes[1].precision, 0.0);
    EXPECT_EQ(r.classes[1].f1, 0.0);
    try {
        classification_report(std::vector<int>{}, std::vector<int>{}, {"up", "down"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::EmptyInput);
    }
    EXPECT_THROW(classification_report(std::vector<int>{2}, std::vector<int>{0}, {"up", "down"}), Error);
    EXPECT_THROW(classification_report(std::vector<int>{0, 1}, std::vector<int>{0}, {"up", "down"}), Error);
}

TEST(Downticks, Blocks) {
    std::vector<BinaryLabel> a(20, BinaryLabel::Up);
    for (int i = 0; i < 12; ++i) a[static_cast<std::size_t>(i)] = BinaryLabel::Down;
    EXPECT_EQ(downtick_ratio_series(a).ratios, std::vector<double>{0.6});

    const std::vector<BinaryLabel> b(19, BinaryLabel::Down);
    const auto rb = downtick_ratio_series(b);
    EXPECT_TRUE(rb.ratios.empty());
    EXPECT_EQ(rb.dropped, 19u);

    std::vector<BinaryLabel> c;
    for (int i = 0; i < 40; ++i) c.push_back(i % 2 ? BinaryLabel::Down : BinaryLabel::Up);
    EXPECT_EQ(downtick_ratio_series(c).ratios, (std::vector<double>{0.5, 0.5}));

    const std::vector<BinaryLabel> bad{BinaryLabel::Excluded};
    EXPECT_THROW(downtick_ratio_series(bad), Error);
    EXPECT_THROW(downtick_ratio_series(c, 0), Error);
}

std::vector<Sample> stream(std::size_t n, std::uint64_t seed, const std::string& product = "SYN-A",
                           synthetic::Pattern pattern = synthetic::Pattern::Planted, double noise = 0.05) {
    synthetic::StreamConfig c;
    c.pattern = pattern;
    c.samples = n;
    c.noise = noise;
    c.product = product;
    c.seed = seed;
    return synthetic::generate(c);
}

TEST(Split, LeadingPrefixIsChronological) {
    auto s = stream(100, 1);
    std::reverse(s.begin(), s.end());
    const auto split = leading_split(s, 0.7);
    ASSERT_EQ(split.train.size(), 70u);
    ASSERT_EQ(split.test.size(), 30u);
    EXPECT_TRUE(leakage_free(split));
    EXPECT_EQ(split.train.front().t, 0);
    EXPECT_EQ(split.test.front().t, 70);
    for (double f : kSplitFractions) EXPECT_TRUE(leakage_free(leading_split(s, f)));
    EXPECT_THROW(leading_split(s, 0.0), Error);
    EXPECT_THROW(leading_split(s, 1.0), Error);
}

TEST(Split, TiedTimestampsStayTogether) {
    auto s = stream(10, 1);
    for (auto& x : s) x.time_ns = x.t / 2;  // pairs share a timestamp
    const auto split = leading_split(s, 0.3);  // cut 3 splits the pair (2, 3)
    EXPECT_EQ(split.train.size(), 4u);
    EXPECT_TRUE(leakage_free(split));
    Split leaky{{s[3]}, {s[2]}};
    EXPECT_FALSE(leakage_free(leaky));
}

TEST(Rewindow, RowsAndGaps) {
    auto s = stream(6, 2);
    s.erase(s.begin() + 3);  // t: 0 1 2 4 5
    const auto w = rewindow(s, 2);
    ASSERT_EQ(w.size(), 3u);  // ends at t = 1, 2, 5
    EXPECT_EQ(w[0].t, 1);
    EXPECT_EQ(w[2].t, 5);
    EXPECT_EQ(w[2].steps, 2u);
    EXPECT_EQ(w[2].binary, s[4].binary);
    for (std::size_t j = 0; j < w[2].dim; ++j) {
        EXPECT_EQ(w[2].row(0)[j], s[3].window[j]);
        EXPECT_EQ(w[2].row(1)[j], s[4].window[j]);
    }
    EXPECT_EQ(rewindow(s, 1).size(), s.size());
    EXPECT_THROW(rewindow(w, 2), Error);
}

SampleProvider synthetic_provider(std::size_t n, std::uint64_t seed, synthetic::Pattern pattern, double noise,
                                  std::set<std::pair<std::string, std::size_t>>* calls = nullptr) {
    return [=](const std::string& product, std::size_t steps) {
        if (calls) calls->insert({product, steps});
        const std::uint64_t offset = std::hash<std::string>{}(product) % 1000;
        return rewindow(stream(n, seed * 1000 + offset, product, pattern, noise), steps);
    };
}

TEST(SplitSweep, OneProductAvgEqualsRow) {
    ExperimentConfig ec;
    const double fractions[] = {0.5, 0.7};
    const auto r = run_split_sweep({"SYN-A"}, synthetic_provider(400, 1, synthetic::Pattern::Planted, 0.05), ec, fractions);
    ASSERT_EQ(r.products, std::vector<std::string>{"SYN-A"});
    EXPECT_EQ(r.avg, r.accuracy.at("SYN-A"));
    EXPECT_EQ(r.selected, r.avg);
    EXPECT_EQ(r.universal, r.avg);  // pooling one product changes nothing
    EXPECT_TRUE(r.leakage_free);
}

TEST(SplitSweep, AccuracyGrowsWithTrainingShare) {
    ExperimentConfig ec;
    const auto r = run_split_sweep({"SYN-A"}, synthetic_provider(1500, 1, synthetic::Pattern::Planted, 0.0), ec);
    ASSERT_EQ(r.avg.size(), 5u);
    EXPECT_GE(spearman(r.fractions, r.avg), 0.8);
}

TEST(SplitSweep, UniversalOnIdenticalProducts) {
    ExperimentConfig ec;
    const double fractions[] = {0.7};
    const auto r =
        run_split_sweep({"SYN-A", "SYN-B"}, synthetic_provider(600, 3, synthetic::Pattern::Planted, 0.1), ec, fractions);
    EXPECT_GE(r.universal[0], r.accuracy.at("SYN-A")[0] - 0.02);
    EXPECT_GE(r.universal[0], r.accuracy.at("SYN-B")[0] - 0.02);
}

TEST(SplitSweep, SelectedLeavesOutExcludedPairs) {
    ExperimentConfig ec;
    const double fractions[] = {0.7};
    const auto r =
        run_split_sweep({"BTC-USD", "BTC-EUR"}, synthetic_provider(300, 4, synthetic::Pattern::Planted, 0.1), ec, fractions);
    EXPECT_EQ(r.selected[0], r.accuracy.at("BTC-USD")[0]);
    EXPECT_DOUBLE_EQ(r.avg[0], (r.accuracy.at("BTC-USD")[0] + r.accuracy.at("BTC-EUR")[0]) / 2);
    EXPECT_FALSE(std::isnan(r.universal_selected[0]));

    const auto only_excluded =
        run_split_sweep({"BCH-EUR"}, synthetic_provider(300, 4, synthetic::Pattern::Planted, 0.1), ec, fractions);
    EXPECT_TRUE(std::isnan(only_excluded.selected[0]));
    EXPECT_TRUE(std::isnan(only_excluded.universal_selected[0]));
}

TEST(SplitSweep, SmallProductsSkipped) {
    ExperimentConfig ec;
    const auto big = synthetic_provider(400, 1, synthetic::Pattern::Planted, 0.05);
    const auto small = synthetic_provider(60, 1, synthetic::Pattern::Planted, 0.05);
    const SampleProvider mixed = [&](const std::string& p, std::size_t s) { return p == "TINY" ? small(p, s) : big(p, s); };
    const double fractions[] = {0.1, 0.5};
    const auto r = run_split_sweep({"SYN-A", "TINY"}, mixed, ec, fractions);
    EXPECT_EQ(r.products, std::vector<std::string>{"SYN-A"});
    ASSERT_EQ(r.skipped.size(), 1u);
    EXPECT_EQ(r.skipped[0].product, "TINY");
    try {
        run_split_sweep({"TINY"}, mixed, ec, fractions);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InsufficientData);
    }
}

TEST(SplitSweep, ThreadCountDoesNotChangeResults) {
    ExperimentConfig ec;
    const double fractions[] = {0.5, 0.7};
    const auto provider = synthetic_provider(300, 2, synthetic::Pattern::Planted, 0.1);
    const auto a = run_split_sweep({"SYN-A", "SYN-B"}, provider, ec, fractions);
    ec.threads = 3;
    const auto b = run_split_sweep({"SYN-A", "SYN-B"}, provider, ec, fractions);
    EXPECT_EQ(a.accuracy, b.accuracy);
    EXPECT_EQ(a.universal, b.universal);
    std::ostringstream ta, tb;
    write_table3(ta, a);
    write_table3(tb, b);
    EXPECT_EQ(ta.str(), tb.str());
    std::ostringstream t4;
    write_table4(t4, a);
    EXPECT_EQ(t4.str().substr(0, t4.str().find('\n')), "fraction,avg,selected,universal,universal_selected");
}

TEST(TimestepSweep, SevenRowsAndSingleStepUnwindowed) {
    ExperimentConfig ec;
    ec.train.epochs = 2;
    std::set<std::pair<std::string, std::size_t>> calls;
    const auto r = run_timestep_sweep({"SYN-A"}, synthetic_provider(300, 1, synthetic::Pattern::Planted, 0.1, &calls), ec);
    EXPECT_EQ(r.steps.size(), 7u);
    EXPECT_EQ(r.universal.size(), 7u);
    EXPECT_TRUE(calls.count({"SYN-A", 1}));
    EXPECT_EQ(calls.size(), 7u);
    std::ostringstream out;
    write_table5(out, r);
    std::istringstream in(out.str());
    const auto back = read_table5(in);
    EXPECT_EQ(back.steps, r.steps);
}

TEST(TimestepSweep, FlatOnMemorylessData) {
    ExperimentConfig ec;
    ec.train.epochs = 3;
    const auto r = run_timestep_sweep({"SYN-A"}, synthetic_provider(5000, 1, synthetic::Pattern::Memoryless, 0.0), ec);
    const auto [lo, hi] = std::minmax_element(r.universal.begin(), r.universal.end());
    EXPECT_LT(*hi - *lo, 0.05);
}

TEST(Table5, BundledReferenceReproducesOls) {
    std::ifstream in(std::string(LOBNET_SOURCE_DIR) + "/data/timestep_accuracy_reference.csv");
    ASSERT_TRUE(in);
    const auto t = read_table5(in);
    ASSERT_EQ(t.steps.size(), 7u);
    const std::vector<double> x(t.steps.begin(), t.steps.end());
    const auto u = ols_fit(x, t.universal);
    const auto s = ols_fit(x, t.universal_selected);
    EXPECT_NEAR(u.intercept, 0.7166, 0.001);
    EXPECT_NEAR(s.intercept, 0.7406, 0.001);
    std::ostringstream out;
    write_table6(out, u, s);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "term,universal,universal_selected");
    std::istringstream bad("steps,x\n");
    EXPECT_THROW(read_table5(bad), Error);
}

WalkthroughSetup short_drift(std::uint64_t seed) {
    synthetic::StreamConfig c;
    c.pattern = synthetic::Pattern::RotatingDrift;
    c.samples = 900;
    c.drift_rate = 0.002;
    c.seed = seed;
    auto all = synthetic::generate(c);
    WalkthroughSetup s;
    s.initial.assign(all.begin(), all.begin() + 300);
    s.stream.assign(all.begin() + 300, all.end());
    return s;
}

std::string digest(const std::string& text) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(text.data());
    const auto d = nn::sha256(std::span<const std::uint8_t>(bytes, text.size()));
    return nn::to_hex(d);
}

WalkthroughConfig short_config() {
    WalkthroughConfig wc;
    wc.repeats = 2;
    wc.setup = short_drift;
    wc.policy.n = 100;
    wc.train.epochs = 3;
    return wc;
}

TEST(Walkthrough, StaticAloneHasNoMarkers) {
    auto wc = short_config();
    wc.policies = {PolicyKind::Static};
    const auto r = run_walkthrough_comparison(wc);
    ASSERT_EQ(r.repeats.size(), 2u);
    for (const auto& rep : r.repeats) {
        EXPECT_EQ(rep.runs.at(0).retrains, 0u);
        EXPECT_TRUE(rep.runs.at(0).events.empty());
        EXPECT_EQ(rep.runs.at(0).outcomes.size(), 600u);
        EXPECT_EQ(rep.runs.at(0).curve.size(), 30u);
    }
    std::ostringstream markers;
    write_markers_csv(markers, r);
    EXPECT_EQ(markers.str(), "repeat,seed,policy,prediction,trigger,value,samples,status\n");
    EXPECT_EQ(r.ordered_repeats(), 0u);
}

TEST(Walkthrough, StableRetrainsEveryN) {
    auto wc = short_config();
    wc.repeats = 1;
    wc.policies = {PolicyKind::StableEveryN};
    const auto r = run_walkthrough_comparison(wc);
    const auto& run = r.repeats[0].runs[0];
    EXPECT_EQ(run.retrains + run.failed_retrains, 6u);
    EXPECT_EQ(run.triggered_at, (std::vector<std::size_t>{99, 199, 299, 399, 499, 599}));
}

TEST(Walkthrough, SeedDeterministicCsv) {
    const auto wc = short_config();
    const auto a = run_walkthrough_comparison(wc);
    auto threaded = wc;
    threaded.threads = 2;
    const auto b = run_walkthrough_comparison(threaded);
    std::ostringstream ca, cb, ma, mb;
    write_curves_csv(ca, a);
    write_curves_csv(cb, b);
    write_markers_csv(ma, a);
    write_markers_csv(mb, b);
    EXPECT_EQ(digest(ca.str()), digest(cb.str()));
    EXPECT_EQ(ma.str(), mb.str());
    const std::string markers = ma.str();
    EXPECT_GT(std::count(markers.begin(), markers.end(), '\n'), 1);
}

TEST(Walkthrough, DecayRecoveryBookkeeping) {
    RecoveryConfig rc;
    rc.walkthrough.repeats = 1;
    rc.walkthrough.policy.n = 100;
    rc.walkthrough.train.epochs = 3;
    rc.walkthrough.setup = [](std::uint64_t seed) {
        synthetic::StreamConfig c;
        c.pattern = synthetic::Pattern::RegimeFlip;
        c.samples = 1200;
        c.flip_at = 700;
        c.seed = seed;
        auto all = synthetic::generate(c);
        WalkthroughSetup s;
        s.initial.assign(all.begin(), all.begin() + 300);
        s.stream.assign(all.begin() + 300, all.end());
        s.flip_at = 400;
        return s;
    };
    const auto r = run_decay_recovery(rc);
    ASSERT_EQ(r.repeats.size(), 1u);
    const auto& rep = r.repeats[0];
    ASSERT_TRUE(rep.first_retrain);
    EXPECT_EQ(*rep.first_retrain, 499u);
    EXPECT_GT(rep.pre_flip_accuracy, 0.6);
    EXPECT_LT(rep.static_trend.s, 0.0);  // inverted rule: the static model collapses
    EXPECT_EQ(rep.static_run.retrains, 0u);

    rc.walkthrough.setup = short_drift;  // no flip marked
    EXPECT_THROW(run_decay_recovery(rc), Error);
}

TEST(Presets, StreamShapes) {
    const auto d = drift_setup(1);
    EXPECT_EQ(d.initial.size(), 1000u);
    EXPECT_EQ(d.stream.size(), 4000u);
    EXPECT_FALSE(d.flip_at);
    const auto f = regime_flip_setup(1);
    EXPECT_EQ(f.stream.size(), 3000u);
    ASSERT_TRUE(f.flip_at);
    EXPECT_EQ(*f.flip_at, 1000u);
    EXPECT_EQ(default_excluded().size(), 4u);
}

}  // namespace
}  // namespace lobnet::eval
