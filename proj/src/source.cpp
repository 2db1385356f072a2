#include "lobnet/source.hpp"

#include "json.hpp"

#include <algorithm>

namespace lobnet::feed {

void validate(const Subscription& sub) {
    if (sub.products.empty()) throw Error(Errc::PreconditionViolation, "subscription needs at least one product");
    if (sub.channels.empty()) throw Error(Errc::PreconditionViolation, "subscription needs at least one channel");
    for (const auto& c : sub.channels) {
        if (c != kChannelTicker && c != kChannelLevel2 && c != kChannelHeartbeat) {
            throw Error(Errc::PreconditionViolation, "unknown channel " + c);
        }
    }
    for (const auto& p : sub.products) {
        if (p.empty()) throw Error(Errc::PreconditionViolation, "empty product id");
    }
}

std::string subscribe_frame(const Subscription& sub) {
    validate(sub);
    nlohmann::ordered_json j;
    j["type"] = "subscribe";
    j["product_ids"] = sub.products;
    j["channels"] = sub.channels;
    return j.dump();
}

}  // namespace lobnet::feed
