#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>

namespace uavsfc {

// Exact rational arithmetic for election scores. Score comparison must give
// the same total order at every candidate, which rules out floating point.
struct Rational {
    std::int64_t num{0};
    std::int64_t den{1};

    constexpr Rational() = default;

    explicit constexpr Rational(std::int64_t n) : num(n), den(1) {}

    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
        if (den == 0) throw std::invalid_argument("rational with zero denominator");
        normalize();
    }

    static Rational from_int(std::int64_t n) { return Rational(n, 1); }

    // Parses "0.35", "1", ".5" etc. exactly (num/10^k).
    static Rational from_decimal(std::string_view s) {
        if (s.empty()) throw std::invalid_argument("empty decimal");
        bool neg = false;
        std::size_t i = 0;
        if (s[0] == '-' || s[0] == '+') {
            neg = s[0] == '-';
            i = 1;
        }
        std::int64_t num = 0, den = 1;
        bool seen_digit = false, seen_dot = false;
        for (; i < s.size(); ++i) {
            char c = s[i];
            if (c == '.') {
                if (seen_dot) throw std::invalid_argument("malformed decimal");
                seen_dot = true;
                continue;
            }
            if (c < '0' || c > '9') throw std::invalid_argument("malformed decimal");
            seen_digit = true;
            num = num * 10 + (c - '0');
            if (seen_dot) den *= 10;
            if (den > 1'000'000'000'000'000LL) throw std::invalid_argument("decimal too precise");
        }
        if (!seen_digit) throw std::invalid_argument("malformed decimal");
        return Rational(neg ? -num : num, den);
    }

    void normalize() {
        if (den < 0) {
            num = -num;
            den = -den;
        }
        std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
        if (num == 0) den = 1;
    }

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }

    friend Rational operator+(const Rational& a, const Rational& b) {
        return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
    }

    friend Rational operator*(const Rational& a, const Rational& b) {
        return Rational(a.num * b.num, a.den * b.den);
    }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num == b.num && a.den == b.den;
    }

    friend bool operator<(const Rational& a, const Rational& b) {
        return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
    }

    friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
    friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
    friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
};

}  // namespace uavsfc
