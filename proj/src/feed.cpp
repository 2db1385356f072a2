#include "lobnet/feed.hpp"

#include "json.hpp"

namespace lobnet::feed {

using nlohmann::json;

std::string_view to_string(MessageKind kind) noexcept {
    switch (kind) {
        case MessageKind::Ticker: return "ticker";
        case MessageKind::Snapshot: return "snapshot";
        case MessageKind::L2Update: return "l2update";
        case MessageKind::Heartbeat: return "heartbeat";
    }
    return "unknown";
}

std::optional<MessageKind> kind_from_string(std::string_view wire_type) noexcept {
    if (wire_type == "ticker") return MessageKind::Ticker;
    if (wire_type == "snapshot") return MessageKind::Snapshot;
    if (wire_type == "l2update") return MessageKind::L2Update;
    if (wire_type == "heartbeat") return MessageKind::Heartbeat;
    return std::nullopt;
}

std::string_view to_string(Side side) noexcept { return side == Side::Buy ? "buy" : "sell"; }

namespace {

// Internal control flow for the parser; never escapes parse_message.
struct Reject {
    Errc code;
    std::string detail;
};

[[noreturn]] void malformed(std::string detail) { throw Reject{Errc::MalformedFrame, std::move(detail)}; }
[[noreturn]] void missing(std::string field) { throw Reject{Errc::MissingField, std::move(field)}; }

const json& field(const json& obj, const char* name) {
    auto it = obj.find(name);
    if (it == obj.end() || it->is_null()) missing(name);
    return *it;
}

Decimal decimal_of(const json& value, const char* what) {
    std::optional<Decimal> d;
    if (value.is_string()) {
        d = Decimal::parse(value.get_ref<const std::string&>());
    } else if (value.is_number()) {
        d = Decimal::parse(value.dump());
    }
    if (!d) malformed(std::string("not a decimal: ") + what);
    return *d;
}

Decimal positive_price(const json& value) {
    Decimal d = decimal_of(value, "price");
    if (d.negative() || d.zero()) malformed("price must be > 0: " + d.text());
    return d;
}

Decimal nonnegative_size(const json& value) {
    Decimal d = decimal_of(value, "size");
    if (d.negative()) malformed("size must be >= 0: " + d.text());
    return d;
}

Side side_of(const json& value) {
    if (!value.is_string()) malformed("side must be a string");
    const auto& s = value.get_ref<const std::string&>();
    if (s == "buy") return Side::Buy;
    if (s == "sell") return Side::Sell;
    malformed("unknown side: " + s);
}

std::int64_t integer_of(const json& value, const char* what) {
    if (value.is_number_integer()) return value.get<std::int64_t>();
    if (value.is_string()) {
        const auto& s = value.get_ref<const std::string&>();
        try {
            std::size_t used = 0;
            const long long v = std::stoll(s, &used);
            if (used == s.size()) return v;
        } catch (const std::exception&) {
        }
    }
    malformed(std::string("not an integer: ") + what);
}

std::vector<PriceLevel> levels_of(const json& side, bool descending) {
    if (!side.is_array()) malformed("book side must be an array");
    std::vector<PriceLevel> out;
    out.reserve(std::min<std::size_t>(side.size(), kSnapshotDepthLimit));
    double prev = 0.0;
    for (std::size_t i = 0; i < side.size(); ++i) {
        const json& level = side[i];
        if (!level.is_array() || level.size() < 2) malformed("book level must be [price, size]");
        PriceLevel pl{positive_price(level[0]), nonnegative_size(level[1])};
        const double p = pl.price.to_double();
        if (i > 0) {
            if (p == prev) malformed("duplicate price level " + pl.price.text());
            if (descending ? p > prev : p < prev) malformed("book side out of order at " + pl.price.text());
        }
        prev = p;
        if (out.size() < static_cast<std::size_t>(kSnapshotDepthLimit)) out.push_back(std::move(pl));
    }
    return out;
}

FeedMessage parse_known(const json& j, MessageKind kind, std::string_view raw, std::int64_t recv_time_ns) {
    FeedMessage msg;
    msg.kind = kind;
    msg.recv_time_ns = recv_time_ns;
    msg.raw = std::string(raw);
    const json& product = field(j, "product_id");
    if (!product.is_string() || product.get_ref<const std::string&>().empty()) malformed("product_id");
    msg.product = product.get<std::string>();
    msg.sequence = integer_of(field(j, "sequence"), "sequence");

    switch (kind) {
        case MessageKind::Ticker: {
            TickerBody body;
            body.price = positive_price(field(j, "price"));
            body.last_size = nonnegative_size(field(j, "last_size"));
            body.trade_side = side_of(field(j, "side"));
            if (auto it = j.find("best_bid"); it != j.end() && !it->is_null()) body.best_bid = positive_price(*it);
            if (auto it = j.find("best_ask"); it != j.end() && !it->is_null()) body.best_ask = positive_price(*it);
            if (body.best_bid && body.best_ask && body.best_bid->to_double() > body.best_ask->to_double()) {
                malformed("ticker best_bid above best_ask");
            }
            if (auto it = j.find("time"); it != j.end() && it->is_string()) body.exchange_time = it->get<std::string>();
            msg.payload = std::move(body);
            break;
        }
        case MessageKind::Snapshot: {
            SnapshotBody body;
            body.bids = levels_of(field(j, "bids"), true);
            body.asks = levels_of(field(j, "asks"), false);
            msg.payload = std::move(body);
            break;
        }
        case MessageKind::L2Update: {
            const json& changes = field(j, "changes");
            if (!changes.is_array()) malformed("changes must be an array");
            L2UpdateBody body;
            body.changes.reserve(changes.size());
            for (const json& c : changes) {
                if (!c.is_array() || c.size() < 3) malformed("change must be [side, price, size]");
                body.changes.push_back(L2Change{side_of(c[0]), positive_price(c[1]), nonnegative_size(c[2])});
            }
            msg.payload = std::move(body);
            break;
        }
        case MessageKind::Heartbeat: {
            HeartbeatBody body;
            if (auto it = j.find("last_trade_id"); it != j.end() && !it->is_null()) {
                body.last_trade_id = integer_of(*it, "last_trade_id");
            }
            msg.payload = body;
            break;
        }
    }
    return msg;
}

}  // namespace

ParseResult parse_message(std::string_view raw, std::int64_t recv_time_ns) {
    json j = json::parse(raw.begin(), raw.end(), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
        return ParseFailure{Errc::MalformedFrame, "not a JSON object", std::string(raw)};
    }
    auto type_it = j.find("type");
    if (type_it == j.end() || !type_it->is_string()) {
        return ParseFailure{Errc::MissingField, "type", std::string(raw)};
    }
    const auto& type = type_it->get_ref<const std::string&>();
    const auto kind = kind_from_string(type);
    if (!kind) return Ignored{type, std::string(raw)};
    try {
        return parse_known(j, *kind, raw, recv_time_ns);
    } catch (const Reject& r) {
        return ParseFailure{r.code, r.detail, std::string(raw)};
    } catch (const Error& e) {
        return ParseFailure{e.code(), e.what(), std::string(raw)};
    }
}

std::string render_message(const FeedMessage& msg) {
    nlohmann::ordered_json j;
    j["type"] = std::string(to_string(msg.kind));
    j["product_id"] = msg.product;
    j["sequence"] = msg.sequence;
    std::visit(
        [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, TickerBody>) {
                j["price"] = body.price.text();
                if (body.best_bid) j["best_bid"] = body.best_bid->text();
                if (body.best_ask) j["best_ask"] = body.best_ask->text();
                j["last_size"] = body.last_size.text();
                j["side"] = std::string(to_string(body.trade_side));
                if (!body.exchange_time.empty()) j["time"] = body.exchange_time;
            } else if constexpr (std::is_same_v<T, SnapshotBody>) {
                auto side = [](const std::vector<PriceLevel>& levels) {
                    auto arr = nlohmann::ordered_json::array();
                    for (const auto& l : levels) arr.push_back({l.price.text(), l.size.text()});
                    return arr;
                };
                j["bids"] = side(body.bids);
                j["asks"] = side(body.asks);
            } else if constexpr (std::is_same_v<T, L2UpdateBody>) {
                auto arr = nlohmann::ordered_json::array();
                for (const auto& c : body.changes) {
                    arr.push_back({std::string(to_string(c.side)), c.price.text(), c.new_size.text()});
                }
                j["changes"] = std::move(arr);
            } else {
                j["last_trade_id"] = body.last_trade_id;
            }
        },
        msg.payload);
    return j.dump();
}

SequenceGate::Verdict SequenceGate::admit(const FeedMessage& msg) {
    auto it = state_.find(msg.product);
    if (it == state_.end()) it = state_.emplace(msg.product, ProductState{}).first;
    ProductState& st = it->second;

    if (st.last && msg.sequence <= *st.last) {
        ++stale_;
        return {Action::Stale, std::nullopt};
    }
    if (msg.kind == MessageKind::Snapshot) {
        st.last = msg.sequence;
        st.awaiting_snapshot = false;
        return {Action::Pass, std::nullopt};
    }
    if (st.awaiting_snapshot) {
        ++suppressed_;
        return {Action::Suppressed, std::nullopt};
    }
    if (st.last && msg.sequence > *st.last + 1) {
        GapSignal gap{msg.product, *st.last + 1, msg.sequence};
        st.awaiting_snapshot = true;
        ++suppressed_;
        return {Action::Gap, std::move(gap)};
    }
    st.last = msg.sequence;
    return {Action::Pass, std::nullopt};
}

void SequenceGate::invalidate(const std::string& product) {
    state_[product].awaiting_snapshot = true;
}

bool SequenceGate::awaiting_snapshot(const std::string& product) const {
    auto it = state_.find(product);
    return it != state_.end() && it->second.awaiting_snapshot;
}

std::vector<GateOutput> sequence_gate(const std::vector<FeedMessage>& messages) {
    SequenceGate gate;
    std::vector<GateOutput> out;
    out.reserve(messages.size());
    for (const auto& m : messages) {
        auto v = gate.admit(m);
        if (v.action == SequenceGate::Action::Pass) {
            out.emplace_back(m);
        } else if (v.action == SequenceGate::Action::Gap) {
            out.emplace_back(std::move(*v.gap));
        }
    }
    return out;
}

}  // namespace lobnet::feed
