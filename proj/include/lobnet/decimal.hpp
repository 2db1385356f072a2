#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace lobnet {

/// Exact decimal number carried as its canonical wire text ("6400.01").
///
/// Prices and sizes stay textual from the wire until the book converts them,
/// so captured frames and logs never pick up binary rounding.
class Decimal {
public:
    Decimal() : text_("0") {}

    /// Accepts `[-]digits[.digits]` (also `.5` and `5.`). No exponents.
    static std::optional<Decimal> parse(std::string_view text);

    /// Shortest text that round-trips `value` through strtod.
    static Decimal from_double(double value);

    /// `units * 10^-decimals`, e.g. from_scaled(640001, 2) == "6400.01".
    static Decimal from_scaled(std::int64_t units, int decimals);

    const std::string& text() const noexcept { return text_; }
    double to_double() const noexcept;
    bool negative() const noexcept;
    bool zero() const noexcept;

    /// Integer number of `10^-decimals` units, rounded half away from zero.
    /// Throws Error(MalformedFrame) on overflow.
    std::int64_t to_scaled(int decimals) const;

    friend bool operator==(const Decimal&, const Decimal&) = default;

private:
    explicit Decimal(std::string text) : text_(std::move(text)) {}
    std::string text_;
};

}  // namespace lobnet
