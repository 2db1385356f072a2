#include "lobnet/synthetic.hpp"
#include "lobnet/walkthrough.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

namespace lobnet::walkthrough {
namespace {

using features::Sample;

AccuracyWindow with_points(std::initializer_list<double> points) {
    AccuracyWindow w;
    for (double p : points) w.push_rolling(p);
    return w;
}

TEST(AccuracyWindow, TwentyOutcomesFifteenCorrect) {
    AccuracyWindow w;
    for (int i = 0; i < 20; ++i) w.record(1, i < 15 ? 1 : 0);
    ASSERT_EQ(w.rolling().size(), 1u);
    EXPECT_DOUBLE_EQ(w.rolling()[0], 0.75);
}

TEST(AccuracyWindow, NineteenOutcomesNoPoint) {
    AccuracyWindow w;
    for (int i = 0; i < 19; ++i) w.record(0, 0);
    EXPECT_TRUE(w.rolling().empty());
}

TEST(AccuracyWindow, AlternatingForty) {
    AccuracyWindow w;
    for (int i = 0; i < 40; ++i) w.record(0, i % 2);
    EXPECT_EQ(w.rolling(), (std::vector<double>{0.5, 0.5}));
}

TEST(AccuracyWindow, ExtremaOnlyFromFullSpan) {
    AccuracyWindow w(20, 100);
    for (int i = 0; i < 80; ++i) w.record(0, 0);
    EXPECT_EQ(w.rolling().size(), 4u);
    EXPECT_EQ(w.extrema_points(), 0u);
    EXPECT_THROW(w.max_acc(), Error);
    for (int i = 0; i < 20; ++i) w.record(0, 1);
    EXPECT_EQ(w.extrema_points(), 1u);
    EXPECT_DOUBLE_EQ(w.max_acc(), 0.8);
    for (int i = 0; i < 20; ++i) w.record(0, 0);
    EXPECT_DOUBLE_EQ(w.max_acc(), 0.8);
    EXPECT_DOUBLE_EQ(w.min_acc(), 0.8);
}

TEST(AccuracyWindow, ResetClearsExtrema) {
    auto w = with_points({0.9, 0.6});
    EXPECT_GE(w.max_acc(), w.min_acc());
    w.reset();
    EXPECT_EQ(w.extrema_points(), 0u);
    EXPECT_TRUE(w.rolling().empty());
    EXPECT_EQ(w.count(), 0u);
}

TEST(AccuracyWindow, RejectsOutOfRangePoint) {
    AccuracyWindow w;
    EXPECT_THROW(w.push_rolling(1.5), Error);
    EXPECT_THROW(w.push_rolling(-0.1), Error);
}

TEST(ModifiedMdd, Examples) {
    EXPECT_NEAR(modified_mdd(with_points({0.78, 0.65})), 0.2, 1e-12);
    EXPECT_EQ(modified_mdd(with_points({0.7, 0.7})), 0.0);
    EXPECT_NEAR(modified_mdd(with_points({0.80, 0.70})), 0.1 / 0.7, 1e-12);
}

TEST(ModifiedMdd, InsufficientHistory) {
    for (const auto& w : {with_points({}), with_points({0.8})}) {
        try {
            modified_mdd(w);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::InsufficientHistory);
        }
    }
}

TEST(ModifiedMdd, ScaleFreeDecision) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> acc(0.3, 1.0);
    std::uniform_real_distribution<double> scale(0.1, 1.0);
    RetrainPolicy p{PolicyKind::MddDynamic};
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> pts(6);
        for (auto& v : pts) v = acc(rng);
        const double c = scale(rng);
        AccuracyWindow a;
        AccuracyWindow b;
        for (double v : pts) {
            a.push_rolling(v);
            b.push_rolling(c * v);
        }
        const double ma = modified_mdd(a);
        if (std::abs(ma - p.mdd_threshold) < 1e-9) continue;
        EXPECT_EQ(retrain_due(p, a, 0), retrain_due(p, b, 0));
        EXPECT_NEAR(ma, modified_mdd(b), 1e-12);
    }
}

TEST(RetrainDue, Policies) {
    const RetrainPolicy st{PolicyKind::Static};
    const RetrainPolicy stable{PolicyKind::StableEveryN};
    const RetrainPolicy mdd{PolicyKind::MddDynamic};
    const auto hi = with_points({0.78, 0.65});
    const auto lo = with_points({0.80, 0.70});
    EXPECT_FALSE(retrain_due(st, hi, 100000));
    EXPECT_TRUE(retrain_due(stable, lo, 196));
    EXPECT_FALSE(retrain_due(stable, lo, 195));
    EXPECT_TRUE(retrain_due(mdd, hi, 0));
    EXPECT_FALSE(retrain_due(mdd, lo, 0));
    EXPECT_FALSE(retrain_due(mdd, with_points({0.9}), 0));
}

TEST(RetrainPolicy, Validation) {
    EXPECT_NO_THROW(validate(RetrainPolicy{}));
    EXPECT_THROW(validate(RetrainPolicy{PolicyKind::StableEveryN, 0}), Error);
    EXPECT_THROW(validate(RetrainPolicy{PolicyKind::MddDynamic, 196, 0.0}), Error);
    EXPECT_THROW(validate(RetrainPolicy{PolicyKind::MddDynamic, 196, 1.0}), Error);
    EXPECT_EQ(policy_from_string("stable"), PolicyKind::StableEveryN);
    EXPECT_THROW(policy_from_string("weekly"), Error);
}

std::vector<Sample> stream(std::size_t n, std::uint64_t seed, synthetic::Pattern pattern = synthetic::Pattern::Planted,
                           std::size_t flip_at = 0) {
    synthetic::StreamConfig c;
    c.pattern = pattern;
    c.samples = n;
    c.seed = seed;
    c.flip_at = flip_at;
    return synthetic::generate(c);
}

TEST(RetrainSet, StableMixesRecentAndReplay) {
    const auto original = stream(1000, 1);
    const auto recent = stream(900, 2);
    const RetrainPolicy p{PolicyKind::StableEveryN, 196};
    const auto set = retrain_set(p, recent, {}, original, 0.25, 7);
    ASSERT_EQ(set.size(), 784u + 196u);
    for (std::size_t i = 0; i < 784; ++i) EXPECT_EQ(set[196 + i].window, recent[116 + i].window);
    std::set<std::int64_t> ticks;
    for (std::size_t i = 0; i < 196; ++i) ticks.insert(set[i].t);
    EXPECT_EQ(ticks.size(), 196u);
    for (std::size_t i = 1; i < 196; ++i) EXPECT_LT(set[i - 1].t, set[i].t);
    EXPECT_EQ(retrain_set(p, recent, {}, original, 0.25, 7)[0].t, set[0].t);
}

TEST(RetrainSet, DynamicUsesHistory) {
    const auto history = stream(1500, 1);
    const auto recent = stream(10, 2);
    const auto set = retrain_set(RetrainPolicy{PolicyKind::MddDynamic}, recent, history, {}, 0.25, 1);
    EXPECT_EQ(set.size(), 1500u);
}

TEST(RetrainSet, EmptyBufferIsPreconditionViolation) {
    try {
        retrain_set(RetrainPolicy{PolicyKind::StableEveryN}, {}, {}, stream(10, 1), 0.25, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::PreconditionViolation);
    }
}

models::Dims tiny() {
    models::Dims d;
    d.lstm1 = 8;
    d.lstm2 = 4;
    d.dense = 4;
    return d;
}

models::TrainConfig quick() {
    models::TrainConfig t;
    t.epochs = 3;
    t.batch_size = 32;
    t.optimizer.learning_rate = 0.005;
    return t;
}

TEST(ExecuteRetrain, DivergenceKeepsOldBundle) {
    const auto b = models::build(models::Variant::Plain, 2, tiny(), 1);
    const auto hash = b.content_hash();
    auto cfg = quick();
    cfg.optimizer.learning_rate = 1e308;
    cfg.clip_norm = 1e308;
    const auto r = execute_retrain(b, stream(200, 1), cfg);
    EXPECT_TRUE(r.diverged);
    EXPECT_EQ(r.bundle, nullptr);
    EXPECT_EQ(b.content_hash(), hash);
}

TEST(Runner, StableFiresAtMultiplesOfN) {
    const auto data = stream(1000, 4);
    const std::vector<Sample> original(data.begin(), data.begin() + 300);
    RunnerConfig rc;
    rc.train = quick();
    rc.train.epochs = 1;
    Runner r(models::build(models::Variant::Plain, 2, tiny(), 4), original, RetrainPolicy{PolicyKind::StableEveryN, 50},
             rc);
    std::vector<std::size_t> fired;
    for (std::size_t i = 300; i < 1000; ++i) {
        if (r.observe(data[i]).retrain_triggered) fired.push_back(r.predictions());
    }
    std::vector<std::size_t> expected;
    for (std::size_t k = 50; k <= 700; k += 50) expected.push_back(k);
    EXPECT_EQ(fired, expected);
    EXPECT_EQ(r.retrains(), expected.size());
    for (std::size_t i = 0; i < r.events().size(); ++i) {
        EXPECT_EQ(r.events()[i].at_prediction, expected[i]);
        EXPECT_EQ(r.events()[i].samples, std::min<std::size_t>(200, expected[i]) + (std::min<std::size_t>(200, expected[i]) + 2) / 4);
    }
}

TEST(Runner, StaticNeverRetrains) {
    const auto data = stream(600, 5);
    const std::vector<Sample> original(data.begin(), data.begin() + 200);
    auto b = models::build(models::Variant::Plain, 2, tiny(), 5);
    const auto hash = b.content_hash();
    Runner r(b, original, RetrainPolicy{PolicyKind::Static}, RunnerConfig{});
    for (std::size_t i = 200; i < 600; ++i) EXPECT_FALSE(r.observe(data[i]).retrain_triggered);
    EXPECT_TRUE(r.events().empty());
    EXPECT_EQ(r.active()->content_hash(), hash);
    EXPECT_EQ(r.window().count(), 400u);
}

TEST(Runner, FailedRetrainContinuesWithOldBundle) {
    const auto data = stream(500, 6);
    const std::vector<Sample> original(data.begin(), data.begin() + 100);
    RunnerConfig rc;
    rc.train = quick();
    rc.train.optimizer.learning_rate = 1e308;
    rc.train.clip_norm = 1e308;
    auto b = models::build(models::Variant::Plain, 2, tiny(), 6);
    const auto hash = b.content_hash();
    Runner r(b, original, RetrainPolicy{PolicyKind::StableEveryN, 100}, rc);
    for (std::size_t i = 100; i < 500; ++i) r.observe(data[i]);
    EXPECT_EQ(r.failed_retrains(), 4u);
    EXPECT_EQ(r.retrains(), 0u);
    EXPECT_EQ(r.active()->content_hash(), hash);
    EXPECT_NE(format_event(r.events()[0]).find("status=diverged"), std::string::npos);
}

TEST(Runner, EventLineFields) {
    RetrainEvent e;
    e.ts_ns = 42;
    e.policy = PolicyKind::MddDynamic;
    e.trigger = "mdd";
    e.trigger_value = 0.2;
    e.samples = 980;
    e.at_prediction = 300;
    e.bundle_hash = "abc";
    EXPECT_EQ(format_event(e),
              "event=retrain ts=42 policy=mdd trigger=mdd value=0.2 samples=980 prediction=300 bundle=abc status=ok");
}

TEST(Runner, BackgroundSwapIsAtomic) {
    const auto data = stream(3000, 8);
    const std::vector<Sample> original(data.begin(), data.begin() + 500);
    auto b = models::build(models::Variant::Plain, 2, tiny(), 8);
    models::train(b, original, quick());
    const auto initial_hash = b.content_hash();

    RunnerConfig rc;
    rc.train = quick();
    rc.mode = Mode::Background;
    std::vector<std::string> logged;
    rc.on_event = [&](const RetrainEvent& e) { logged.push_back(format_event(e)); };
    Runner r(b, original, RetrainPolicy{PolicyKind::StableEveryN, 100}, rc);

    std::set<std::string> published{initial_hash};
    std::string previous = initial_hash;
    for (std::size_t i = 500; i < 3000; ++i) {
        const auto active = r.active();
        const auto hash = active->content_hash();
        // the bundle in use is either the previous one or a freshly published one
        if (hash != previous) EXPECT_FALSE(published.count(hash)) << "bundle reappeared";
        published.insert(hash);
        previous = hash;
        r.observe(data[i]);
    }
    r.wait_idle();
    EXPECT_GE(r.retrains(), 1u);
    EXPECT_EQ(logged.size(), r.events().size());
    for (const auto& e : r.events()) EXPECT_TRUE(published.count(e.bundle_hash) || e.bundle_hash == r.active()->content_hash());
    EXPECT_EQ(r.predictions(), 2500u);
}

TEST(MannKendall, KnownSeries) {
    const std::vector<double> up{1, 2, 3, 4, 5};
    const auto t = mann_kendall(up);
    EXPECT_EQ(t.s, 10.0);
    EXPECT_NEAR(t.variance, 5.0 * 4 * 15 / 18.0, 1e-12);
    EXPECT_GT(t.z, 0.0);
    const std::vector<double> down{5, 4, 4, 1};
    const auto d = mann_kendall(down);
    EXPECT_EQ(d.s, -5.0);
    EXPECT_NEAR(d.variance, (4.0 * 3 * 13 - 2.0 * 1 * 9) / 18.0, 1e-12);
    EXPECT_LT(d.z, 0.0);
    EXPECT_EQ(mann_kendall(std::vector<double>{3.0}).s, 0.0);
}

TEST(Runner, StaticDecaysOnRegimeFlip) {
    const auto data = stream(2600, 9, synthetic::Pattern::RegimeFlip, 1400);
    const std::vector<Sample> original(data.begin(), data.begin() + 600);
    auto b = models::build(models::Variant::Plain, 2, tiny(), 9);
    auto cfg = quick();
    cfg.epochs = 10;
    models::train(b, original, cfg);
    Runner r(b, original, RetrainPolicy{PolicyKind::Static}, RunnerConfig{});
    for (std::size_t i = 600; i < data.size(); ++i) r.observe(data[i]);
    EXPECT_LT(mann_kendall(r.window().rolling()).s, 0.0);
}

}  // namespace
}  // namespace lobnet::walkthrough
