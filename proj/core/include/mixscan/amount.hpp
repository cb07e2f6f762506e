#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace mixscan {

inline constexpr std::uint64_t kSatsPerBtc = 100'000'000;

// Monetary value in satoshis. All arithmetic is exact integer arithmetic;
// BTC decimal strings are parsed and formatted without ever touching floats.
struct Amount {
    std::uint64_t sats = 0;

    constexpr Amount() = default;
    constexpr explicit Amount(std::uint64_t s) : sats(s) {}

    auto operator<=>(const Amount&) const = default;

    constexpr Amount& operator+=(Amount other) {
        sats += other.sats;
        return *this;
    }
    constexpr Amount& operator-=(Amount other) {
        sats -= other.sats;
        return *this;
    }

    constexpr double btc() const { return static_cast<double>(sats) / kSatsPerBtc; }
};

constexpr Amount operator+(Amount a, Amount b) { return Amount{a.sats + b.sats}; }
constexpr Amount operator-(Amount a, Amount b) { return Amount{a.sats - b.sats}; }

// Parses a BTC decimal string ("0.1", "12.00000001") into satoshis.
// Throws PrecisionExceeded past 8 fractional digits, BadAmount otherwise.
Amount parse_btc(std::string_view text);

// Canonical 8-digit decimal form: 10000000 sat -> "0.10000000".
std::string format_btc(Amount amount);

// BTC string with trailing fractional zeros stripped: 10000000 sat -> "0.1".
std::string format_btc_trimmed(Amount amount);

// Significant fractional digits of the BTC value, trailing zeros not
// counted: 0.10000000 -> 1, 0.05 -> 2, 7.00000000 -> 0.
int decimal_places(Amount amount);

}  // namespace mixscan
