#pragma once

#include <boost/rational.hpp>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace pitc {

// Exact rational arithmetic. All probability weights in the calculus are
// kept exact; nothing in the library ever rounds to floating point.
using Rat = boost::rational<long long>;

inline Rat rat(long long num, long long den = 1) { return Rat(num, den); }

inline std::string to_string(const Rat& r) {
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

// Accepts "n" or "n/d".
inline std::optional<Rat> parse_rational(const std::string& text) {
    auto slash = text.find('/');
    try {
        if (slash == std::string::npos) {
            size_t used = 0;
            long long n = std::stoll(text, &used);
            if (used != text.size()) return std::nullopt;
            return Rat(n);
        }
        size_t used = 0;
        long long n = std::stoll(text.substr(0, slash), &used);
        if (used != slash) return std::nullopt;
        long long d = std::stoll(text.substr(slash + 1), &used);
        if (used != text.size() - slash - 1) return std::nullopt;
        if (d == 0) return std::nullopt;
        return Rat(n, d);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace pitc
