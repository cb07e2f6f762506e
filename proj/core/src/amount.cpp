#include "mixscan/amount.hpp"

#include <array>
#include <cstdio>

#include "mixscan/error.hpp"

namespace mixscan {

Amount parse_btc(std::string_view text) {
    if (text.empty()) {
        raise(ErrorCode::BadAmount, "empty amount");
    }
    std::size_t i = 0;
    std::uint64_t whole = 0;
    std::size_t whole_digits = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
        std::uint64_t digit = static_cast<std::uint64_t>(text[i] - '0');
        if (whole > (UINT64_MAX - digit) / 10) {
            raise(ErrorCode::BadAmount, "amount overflow: " + std::string(text));
        }
        whole = whole * 10 + digit;
        ++whole_digits;
        ++i;
    }
    if (whole_digits == 0) {
        raise(ErrorCode::BadAmount, "amount must start with a digit: " + std::string(text));
    }
    std::uint64_t frac = 0;
    std::size_t frac_digits = 0;
    if (i < text.size() && text[i] == '.') {
        ++i;
        while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
            if (frac_digits == 8) {
                raise(ErrorCode::PrecisionExceeded,
                      "more than 8 fractional digits: " + std::string(text));
            }
            frac = frac * 10 + static_cast<std::uint64_t>(text[i] - '0');
            ++frac_digits;
            ++i;
        }
        if (frac_digits == 0) {
            raise(ErrorCode::BadAmount, "trailing decimal point: " + std::string(text));
        }
    }
    if (i != text.size()) {
        raise(ErrorCode::BadAmount, "unexpected character in amount: " + std::string(text));
    }
    for (std::size_t d = frac_digits; d < 8; ++d) {
        frac *= 10;
    }
    if (whole > UINT64_MAX / kSatsPerBtc || whole * kSatsPerBtc > UINT64_MAX - frac) {
        raise(ErrorCode::BadAmount, "amount overflow: " + std::string(text));
    }
    return Amount{whole * kSatsPerBtc + frac};
}

std::string format_btc(Amount amount) {
    std::array<char, 32> buf{};
    std::uint64_t whole = amount.sats / kSatsPerBtc;
    std::uint64_t frac = amount.sats % kSatsPerBtc;
    int n = std::snprintf(buf.data(), buf.size(), "%llu.%08llu",
                          static_cast<unsigned long long>(whole),
                          static_cast<unsigned long long>(frac));
    return std::string(buf.data(), static_cast<std::size_t>(n));
}

std::string format_btc_trimmed(Amount amount) {
    std::string s = format_btc(amount);
    std::size_t last = s.find_last_not_of('0');
    if (s[last] == '.') {
        --last;
    }
    s.resize(last + 1);
    return s;
}

int decimal_places(Amount amount) {
    std::uint64_t frac = amount.sats % kSatsPerBtc;
    if (frac == 0) {
        return 0;
    }
    int places = 8;
    while (frac % 10 == 0) {
        frac /= 10;
        --places;
    }
    return places;
}

}  // namespace mixscan
