#include "lobnet/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace lobnet::features {

const std::array<std::string_view, kFeatureDim>& component_names() noexcept {
    static const std::array<std::string_view, kFeatureDim> names = {
        "mid",        "spread",    "best_bid",  "best_ask",    "best_bid_size",
        "best_ask_size", "depth_bid", "depth_ask", "imbalance", "slope_bid",
        "slope_ask",  "trade_price", "trade_size", "tick_direction"};
    return names;
}

FeatureVector vectorize(const feed::TickerBody& ticker, const book::BookSummary& summary,
                        const FeatureVector* prev) {
    FeatureVector v;
    v.values.assign(kFeatureDim, 0.0);
    auto& x = v.values;
    x[kMid] = summary.mid;
    x[kSpread] = summary.spread;
    x[kBestBid] = summary.best_bid;
    x[kBestAsk] = summary.best_ask;
    x[kBestBidSize] = summary.best_bid_size;
    x[kBestAskSize] = summary.best_ask_size;
    x[kDepthBid] = summary.depth_bid;
    x[kDepthAsk] = summary.depth_ask;
    x[kImbalance] = summary.imbalance;
    x[kSlopeBid] = summary.slope_bid;
    x[kSlopeAsk] = summary.slope_ask;
    x[kTradePrice] = ticker.price.to_double();
    x[kTradeSize] = ticker.last_size.to_double();
    if (prev != nullptr) {
        const double diff = x[kTradePrice] - prev->values[kTradePrice];
        x[kTickDirection] = diff > 0.0 ? 1.0 : diff < 0.0 ? -1.0 : prev->values[kTickDirection];
    }
    return v;
}

std::string_view to_string(BinaryLabel label) noexcept {
    switch (label) {
        case BinaryLabel::Up: return "up";
        case BinaryLabel::Down: return "down";
        case BinaryLabel::Excluded: return "excluded";
    }
    return "?";
}

std::string_view to_string(MultiLabel label) noexcept {
    switch (label) {
        case MultiLabel::SigInc: return "sig_inc";
        case MultiLabel::InsigInc: return "insig_inc";
        case MultiLabel::InsigDec: return "insig_dec";
        case MultiLabel::SigDec: return "sig_dec";
    }
    return "?";
}

BinaryLabel label_binary(double mid_t, double mid_next) noexcept {
    if (mid_next > mid_t) return BinaryLabel::Up;
    if (mid_next < mid_t) return BinaryLabel::Down;
    return BinaryLabel::Excluded;
}

MultiLabel classify_relative_change(double r) noexcept {
    if (r > kSignificanceThreshold + kBoundaryTolerance) return MultiLabel::SigInc;
    if (r > -kBoundaryTolerance) return MultiLabel::InsigInc;  // includes r == 0
    if (r >= -kSignificanceThreshold - kBoundaryTolerance) return MultiLabel::InsigDec;
    return MultiLabel::SigDec;
}

MultiLabel label_multiclass(double close_t, double close_next) {
    if (!(close_t > 0.0)) throw Error(Errc::PreconditionViolation, "close price must be > 0");
    return classify_relative_change((close_next - close_t) / close_t);
}

std::vector<TickLabel> derive_labels(const std::vector<FeatureVector>& ticks) {
    std::vector<TickLabel> out(ticks.size());
    for (std::size_t i = 0; i + 1 < ticks.size(); ++i) {
        const auto& cur = ticks[i];
        const auto& next = ticks[i + 1];
        if (next.degraded || next.product != cur.product || next.t != cur.t + 1) continue;
        TickLabel& l = out[i];
        l.resolved = true;
        l.binary = label_binary(cur.values[kMid], next.values[kMid]);
        const double close = cur.values[kTradePrice];
        l.r = close > 0.0 ? (next.values[kTradePrice] - close) / close : 0.0;
        l.multi = classify_relative_change(l.r);
    }
    return out;
}

int target_index(const Sample& sample, int head) noexcept {
    if (head == 2) {
        switch (sample.binary) {
            case BinaryLabel::Up: return 0;
            case BinaryLabel::Down: return 1;
            case BinaryLabel::Excluded: return -1;
        }
        return -1;
    }
    return static_cast<int>(sample.multi);
}

std::vector<std::size_t> window_ends(const std::vector<FeatureVector>& ticks, std::size_t steps,
                                     WindowStats* stats) {
    if (steps < 1) throw Error(Errc::PreconditionViolation, "time steps must be >= 1");
    std::vector<std::size_t> ends;
    std::size_t run = 0;      // clean consecutive ticks ending at i
    std::size_t segment = 0;  // consecutive ticks ending at i, degraded or not
    std::size_t candidates = 0;
    for (std::size_t i = 0; i < ticks.size(); ++i) {
        const bool continues =
            i > 0 && ticks[i].product == ticks[i - 1].product && ticks[i].t == ticks[i - 1].t + 1;
        segment = continues ? segment + 1 : 1;
        if (segment >= steps) ++candidates;
        if (ticks[i].degraded) {
            run = 0;
            continue;
        }
        run = continues && run > 0 ? run + 1 : 1;
        if (run >= steps) ends.push_back(i);
    }
    if (stats != nullptr) {
        stats->emitted += ends.size();
        stats->dropped_degraded += candidates - ends.size();
    }
    return ends;
}

std::vector<Sample> windowize(const std::vector<FeatureVector>& ticks, const std::vector<TickLabel>& labels,
                              std::size_t steps, WindowStats* stats) {
    if (labels.size() != ticks.size()) throw Error(Errc::ShapeMismatch, "labels must align with ticks");
    WindowStats local;
    const auto ends = window_ends(ticks, steps, &local);
    std::vector<Sample> out;
    out.reserve(ends.size());
    for (std::size_t end : ends) {
        const TickLabel& label = labels[end];
        if (!label.resolved) {
            ++local.dropped_unlabeled;
            continue;
        }
        Sample s;
        s.steps = steps;
        s.dim = ticks[end].values.size();
        s.window.reserve(steps * s.dim);
        for (std::size_t i = end + 1 - steps; i <= end; ++i) {
            s.window.insert(s.window.end(), ticks[i].values.begin(), ticks[i].values.end());
        }
        s.t = ticks[end].t;
        s.time_ns = ticks[end].time_ns;
        s.product = ticks[end].product;
        s.binary = label.binary;
        s.multi = label.multi;
        s.r = label.r;
        out.push_back(std::move(s));
    }
    local.emitted = out.size();
    if (stats != nullptr) {
        stats->emitted += local.emitted;
        stats->dropped_degraded += local.dropped_degraded;
        stats->dropped_unlabeled += local.dropped_unlabeled;
    }
    return out;
}

StreamingWindowizer::StreamingWindowizer(std::size_t steps) : steps_(steps) {
    if (steps < 1) throw Error(Errc::PreconditionViolation, "time steps must be >= 1");
    ring_.reserve(steps);
}

std::optional<Sample> StreamingWindowizer::push(const FeatureVector& v) {
    if (v.degraded) {
        ring_.clear();
        return std::nullopt;
    }
    if (!ring_.empty() && (ring_.back().product != v.product || ring_.back().t + 1 != v.t)) ring_.clear();
    if (ring_.size() == steps_) ring_.erase(ring_.begin());
    ring_.push_back(v);
    if (ring_.size() < steps_) return std::nullopt;
    Sample s;
    s.steps = steps_;
    s.dim = v.values.size();
    s.window.reserve(steps_ * s.dim);
    for (const auto& f : ring_) s.window.insert(s.window.end(), f.values.begin(), f.values.end());
    s.t = v.t;
    s.time_ns = v.time_ns;
    s.product = v.product;
    return s;
}

bool NormalizationStats::is_dropped(std::size_t component) const noexcept {
    return std::binary_search(dropped.begin(), dropped.end(), component);
}

std::vector<double> NormalizationStats::apply(std::span<const double> x) const {
    if (x.size() != dim()) throw Error(Errc::ShapeMismatch, "normalizer dimension mismatch");
    std::vector<double> out;
    out.reserve(retained_dim());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!is_dropped(i)) out.push_back((x[i] - mean[i]) / stddev[i]);
    }
    return out;
}

std::vector<double> NormalizationStats::invert(std::span<const double> z) const {
    if (z.size() != retained_dim()) throw Error(Errc::ShapeMismatch, "normalizer dimension mismatch");
    std::vector<double> out(dim());
    std::size_t k = 0;
    for (std::size_t i = 0; i < dim(); ++i) {
        out[i] = is_dropped(i) ? mean[i] : z[k++] * stddev[i] + mean[i];
    }
    return out;
}

void NormalizationStats::apply_fixed(std::span<const double> x, std::span<double> out) const {
    if (x.size() != dim() || out.size() != dim()) throw Error(Errc::ShapeMismatch, "normalizer dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = stddev[i] > 0.0 ? (x[i] - mean[i]) / stddev[i] : 0.0;
    }
}

NormalizationStats fit_normalizer_rows(std::span<const double> rows, std::size_t dim) {
    if (dim == 0 || rows.size() % dim != 0) throw Error(Errc::ShapeMismatch, "row matrix not divisible by dim");
    const std::size_t n = rows.size() / dim;
    if (n == 0) throw Error(Errc::EmptyInput, "no training rows for normalizer");
    NormalizationStats st;
    st.mean.assign(dim, 0.0);
    st.stddev.assign(dim, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < dim; ++c) st.mean[c] += rows[r * dim + c];
    }
    for (auto& m : st.mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            const double d = rows[r * dim + c] - st.mean[c];
            st.stddev[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < dim; ++c) {
        st.stddev[c] = std::sqrt(st.stddev[c] / static_cast<double>(n));
        if (st.stddev[c] <= 1e-12 * std::max(1.0, std::abs(st.mean[c]))) {
            st.stddev[c] = 0.0;
            st.dropped.push_back(c);
        }
    }
    return st;
}

NormalizationStats fit_normalizer(const std::vector<Sample>& training) {
    if (training.empty()) throw Error(Errc::EmptyInput, "no training samples for normalizer");
    const std::size_t dim = training.front().dim;
    std::vector<double> rows;
    for (const auto& s : training) {
        if (s.dim != dim) throw Error(Errc::ShapeMismatch, "mixed sample dimensions");
        rows.insert(rows.end(), s.window.begin(), s.window.end());
    }
    return fit_normalizer_rows(rows, dim);
}

TickAssembler::TickAssembler() : TickAssembler(Options{}) {}

TickAssembler::TickAssembler(Options options) : options_(std::move(options)) {}

TickAssembler::ProductState& TickAssembler::state_for(const std::string& product) {
    auto it = products_.find(product);
    if (it == products_.end()) {
        int decimals = book::default_price_decimals(product);
        if (auto o = options_.price_decimals.find(product); o != options_.price_decimals.end()) decimals = o->second;
        it = products_.emplace(product, ProductState{book::OrderBook(product, decimals), std::nullopt, 0, false}).first;
    }
    return it->second;
}

std::optional<FeatureVector> TickAssembler::on_message(const feed::FeedMessage& msg) {
    ProductState& st = state_for(msg.product);
    switch (msg.kind) {
        case feed::MessageKind::Snapshot:
            try {
                st.book.apply_snapshot(std::get<feed::SnapshotBody>(msg.payload), msg.sequence);
            } catch (const Error& e) {
                if (e.code() != Errc::CrossedSnapshot) throw;
                ++counters_.crossed_snapshots;
                st.book.reset();
            }
            return std::nullopt;
        case feed::MessageKind::L2Update:
            if (!st.book.initialized()) {
                ++counters_.updates_before_snapshot;
                return std::nullopt;
            }
            if (st.book.apply_update(std::get<feed::L2UpdateBody>(msg.payload), msg.sequence).degraded) {
                st.pending_degraded = true;
            }
            return std::nullopt;
        case feed::MessageKind::Heartbeat:
            return std::nullopt;
        case feed::MessageKind::Ticker:
            break;
    }
    const std::int64_t t = st.next_t++;
    if (!st.book.initialized() || st.book.bid_levels() == 0 || st.book.ask_levels() == 0) {
        ++counters_.skipped_no_book;
        st.prev.reset();
        return std::nullopt;
    }
    const auto summary = st.book.summarize(options_.depth_levels);
    const FeatureVector* prev = st.prev && st.prev->t + 1 == t ? &*st.prev : nullptr;
    FeatureVector v = vectorize(std::get<feed::TickerBody>(msg.payload), summary, prev);
    v.t = t;
    v.time_ns = msg.recv_time_ns;
    v.product = msg.product;
    v.degraded = st.pending_degraded;
    st.pending_degraded = false;
    if (v.degraded) ++counters_.degraded_ticks;
    ++counters_.ticks;
    st.prev = v;
    return v;
}

void TickAssembler::on_gap(const std::string& product) {
    ProductState& st = state_for(product);
    st.book.reset();
    st.prev.reset();
}

const book::OrderBook* TickAssembler::book_for(const std::string& product) const {
    auto it = products_.find(product);
    return it == products_.end() ? nullptr : &it->second.book;
}

namespace {

void put_double(std::ostream& out, double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(Errc::MalformedFrame, "bad number in CSV: " + s);
    return v;
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<FeatureVector>& ticks) {
    out << "product,t,time_ns,degraded";
    for (auto name : component_names()) out << ',' << name;
    out << '\n';
    for (const auto& v : ticks) {
        out << v.product << ',' << v.t << ',' << v.time_ns << ',' << (v.degraded ? 1 : 0);
        for (double x : v.values) {
            out << ',';
            put_double(out, x);
        }
        out << '\n';
    }
}

std::vector<FeatureVector> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::EmptyInput, "empty feature CSV");
    const auto header = split(line);
    if (header.size() != 4 + kFeatureDim || header[0] != "product") {
        throw Error(Errc::MalformedFrame, "feature CSV header does not match schema v1");
    }
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
        if (header[4 + i] != component_names()[i]) throw Error(Errc::MalformedFrame, "unexpected column " + header[4 + i]);
    }
    std::vector<FeatureVector> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) throw Error(Errc::MalformedFrame, "short feature CSV row");
        FeatureVector v;
        v.product = cells[0];
        v.t = std::stoll(cells[1]);
        v.time_ns = std::stoll(cells[2]);
        v.degraded = cells[3] == "1";
        v.values.reserve(kFeatureDim);
        for (std::size_t i = 0; i < kFeatureDim; ++i) v.values.push_back(parse_double(cells[4 + i]));
        out.push_back(std::move(v));
    }
    return out;
}

void write_samples_csv(std::ostream& out, const std::vector<Sample>& samples) {
    out << "product,t,binary,multi,r";
    if (!samples.empty()) {
        const auto& names = component_names();
        for (std::size_t s = 0; s < samples.front().steps; ++s) {
            for (std::size_t c = 0; c < samples.front().dim; ++c) {
                out << ",s" << s << '_' << (c < names.size() ? names[c] : std::string_view("x"));
            }
        }
    }
    out << '\n';
    for (const auto& s : samples) {
        out << s.product << ',' << s.t << ',' << to_string(s.binary) << ',' << to_string(s.multi) << ',';
        put_double(out, s.r);
        for (double x : s.window) {
            out << ',';
            put_double(out, x);
        }
        out << '\n';
    }
}

}  // namespace lobnet::features
