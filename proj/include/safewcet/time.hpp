#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace safewcet {

/// Exact time in milliseconds, stored as an integer count of microseconds.
///
/// All schedule arithmetic happens on the integer representation so that
/// sums, differences and LCMs never drift. A system description may impose a
/// coarser resolution (e.g. 0.1 ms); see `is_multiple_of`.
class Time {
public:
    using rep = std::int64_t;
    static constexpr rep kUnitsPerMs = 1000;

    constexpr Time() = default;
    static constexpr Time from_units(rep units) { return Time(units); }
    static constexpr Time from_ms_int(rep ms) { return Time(ms * kUnitsPerMs); }
    /// Nearest representable time; only for values produced by sampling.
    static Time from_ms(double ms) { return Time(static_cast<rep>(std::llround(ms * kUnitsPerMs))); }
    static constexpr Time max() { return Time(std::numeric_limits<rep>::max()); }

    /// Parses a decimal millisecond string such as "44.075". At most three
    /// fractional digits are accepted.
    static Time parse(std::string_view text);

    constexpr rep units() const { return units_; }
    constexpr double ms() const { return static_cast<double>(units_) / kUnitsPerMs; }
    std::string str() const;

    constexpr bool is_multiple_of(Time resolution) const {
        return resolution.units_ > 0 && units_ % resolution.units_ == 0;
    }

    constexpr Time& operator+=(Time o) { units_ += o.units_; return *this; }
    constexpr Time& operator-=(Time o) { units_ -= o.units_; return *this; }
    friend constexpr Time operator+(Time a, Time b) { return Time(a.units_ + b.units_); }
    friend constexpr Time operator-(Time a, Time b) { return Time(a.units_ - b.units_); }
    friend constexpr Time operator*(Time a, rep k) { return Time(a.units_ * k); }
    friend constexpr Time operator*(rep k, Time a) { return Time(a.units_ * k); }
    friend constexpr auto operator<=>(Time, Time) = default;

private:
    constexpr explicit Time(rep units) : units_(units) {}
    rep units_ = 0;
};

inline Time Time::parse(std::string_view text) {
    auto fail = [&] { return std::invalid_argument("malformed time value '" + std::string(text) + "'"); };
    if (text.empty()) throw fail();
    bool negative = false;
    std::size_t i = 0;
    if (text[0] == '-') { negative = true; ++i; }
    if (i >= text.size()) throw fail();
    rep whole = 0;
    bool digits = false;
    for (; i < text.size() && text[i] != '.'; ++i) {
        if (text[i] < '0' || text[i] > '9') throw fail();
        if (whole > std::numeric_limits<rep>::max() / 10 / kUnitsPerMs) throw fail();
        whole = whole * 10 + (text[i] - '0');
        digits = true;
    }
    rep frac = 0;
    int frac_digits = 0;
    if (i < text.size()) {
        ++i;  // '.'
        for (; i < text.size(); ++i) {
            if (text[i] < '0' || text[i] > '9') throw fail();
            if (frac_digits == 3) {
                if (text[i] != '0') throw std::invalid_argument("time value '" + std::string(text) + "' is finer than 0.001 ms");
                continue;
            }
            frac = frac * 10 + (text[i] - '0');
            ++frac_digits;
            digits = true;
        }
    }
    if (!digits) throw fail();
    for (; frac_digits < 3; ++frac_digits) frac *= 10;
    const rep units = whole * kUnitsPerMs + frac;
    return Time(negative ? -units : units);
}

inline std::string Time::str() const {
    rep u = units_;
    std::string sign;
    if (u < 0) { sign = "-"; u = -u; }
    std::string out = sign + std::to_string(u / kUnitsPerMs);
    rep frac = u % kUnitsPerMs;
    if (frac != 0) {
        std::string f = std::to_string(frac);
        f.insert(0, 3 - f.size(), '0');
        while (!f.empty() && f.back() == '0') f.pop_back();
        out += "." + f;
    }
    return out;
}

inline std::ostream& operator<<(std::ostream& os, Time t) { return os << t.str(); }

inline Time min(Time a, Time b) { return a < b ? a : b; }
inline Time max(Time a, Time b) { return a < b ? b : a; }

/// Least common multiple; saturates at Time::max() instead of overflowing.
inline Time lcm(Time a, Time b) {
    if (a.units() <= 0 || b.units() <= 0) throw std::invalid_argument("lcm of non-positive time");
    const auto g = std::gcd(a.units(), b.units());
    const __int128 l = static_cast<__int128>(a.units() / g) * b.units();
    if (l > std::numeric_limits<Time::rep>::max()) return Time::max();
    return Time::from_units(static_cast<Time::rep>(l));
}

/// Rounds to the nearest multiple of `step` (ties away from zero).
inline Time round_to(Time t, Time step) {
    const auto s = step.units();
    const auto u = t.units();
    const auto q = (u >= 0 ? (u + s / 2) : (u - s / 2)) / s;
    return Time::from_units(q * s);
}

}  // namespace safewcet
