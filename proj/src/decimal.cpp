#include "lobnet/decimal.hpp"

#include "lobnet/error.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <limits>

namespace lobnet {

std::optional<Decimal> Decimal::parse(std::string_view text) {
    if (text.empty()) return std::nullopt;
    std::size_t i = 0;
    if (text[0] == '-' || text[0] == '+') ++i;
    std::size_t digits = 0;
    bool seen_dot = false;
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '.') {
            if (seen_dot) return std::nullopt;
            seen_dot = true;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            ++digits;
        } else {
            return std::nullopt;
        }
    }
    if (digits == 0) return std::nullopt;
    return Decimal(std::string(text));
}

Decimal Decimal::from_double(double value) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    std::string out(buf.data(), ptr);
    // to_chars may pick scientific notation for very small/large magnitudes.
    if (out.find_first_of("eE") != std::string::npos) {
        auto [p2, ec2] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                       std::chars_format::fixed);
        out.assign(buf.data(), p2);
    }
    return Decimal(std::move(out));
}

Decimal Decimal::from_scaled(std::int64_t units, int decimals) {
    const bool neg = units < 0;
    // Work on the magnitude as unsigned to survive INT64_MIN.
    std::uint64_t mag = neg ? static_cast<std::uint64_t>(-(units + 1)) + 1
                            : static_cast<std::uint64_t>(units);
    std::string digits = std::to_string(mag);
    if (decimals > 0) {
        if (digits.size() <= static_cast<std::size_t>(decimals)) {
            digits.insert(0, static_cast<std::size_t>(decimals) - digits.size() + 1, '0');
        }
        digits.insert(digits.size() - static_cast<std::size_t>(decimals), 1, '.');
    }
    if (neg && mag != 0) digits.insert(0, 1, '-');
    return Decimal(std::move(digits));
}

double Decimal::to_double() const noexcept {
    return std::strtod(text_.c_str(), nullptr);
}

bool Decimal::negative() const noexcept {
    return !text_.empty() && text_[0] == '-' && !zero();
}

bool Decimal::zero() const noexcept {
    for (char c : text_) {
        if (c >= '1' && c <= '9') return false;
    }
    return true;
}

std::int64_t Decimal::to_scaled(int decimals) const {
    constexpr std::int64_t kMax = std::numeric_limits<std::int64_t>::max();
    std::size_t i = 0;
    bool neg = false;
    if (text_[0] == '-' || text_[0] == '+') {
        neg = text_[0] == '-';
        ++i;
    }
    std::int64_t units = 0;
    int frac_seen = -1;  // -1 until the decimal point is passed
    bool round_up = false;
    for (; i < text_.size(); ++i) {
        const char c = text_[i];
        if (c == '.') {
            frac_seen = 0;
            continue;
        }
        const int d = c - '0';
        if (frac_seen >= decimals) {
            // First dropped digit decides rounding.
            if (frac_seen == decimals) round_up = d >= 5;
            ++frac_seen;
            continue;
        }
        if (units > (kMax - d) / 10) throw Error(Errc::MalformedFrame, "decimal overflow: " + text_);
        units = units * 10 + d;
        if (frac_seen >= 0) ++frac_seen;
    }
    const int have = frac_seen < 0 ? 0 : std::min(frac_seen, decimals);
    for (int k = have; k < decimals; ++k) {
        if (units > kMax / 10) throw Error(Errc::MalformedFrame, "decimal overflow: " + text_);
        units *= 10;
    }
    if (round_up) ++units;
    return neg ? -units : units;
}

}  // namespace lobnet
