#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <type_traits>

#include "condrep/error.hpp"

namespace condrep {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline BigInt pow_int(long base, unsigned exponent) {
    return boost::multiprecision::pow(BigInt(base), exponent);
}

/// 4^{-k} as an exact rational; k may be negative.
inline Rational pow4_inv(int k) {
    if (k >= 0) return Rational(BigInt(1), pow_int(4, static_cast<unsigned>(k)));
    return Rational(pow_int(4, static_cast<unsigned>(-k)));
}

inline Rational pow2_inv(int k) {
    if (k >= 0) return Rational(BigInt(1), pow_int(2, static_cast<unsigned>(k)));
    return Rational(pow_int(2, static_cast<unsigned>(-k)));
}

/// Parses "7", "-3/8", "0.375", "1.5e-3". Throws InvalidInput.
inline Rational parse_rational(std::string_view text) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    std::string_view s = trim(text);
    if (s.empty()) throw InvalidInput("empty rational literal");

    auto parse_int = [&](std::string_view digits) -> BigInt {
        if (digits.empty()) throw InvalidInput("malformed rational literal '" + std::string(text) + "'");
        for (char c : digits)
            if (c < '0' || c > '9') throw InvalidInput("malformed rational literal '" + std::string(text) + "'");
        // cpp_int reads a leading 0 as an octal prefix.
        while (digits.size() > 1 && digits.front() == '0') digits.remove_prefix(1);
        return BigInt(std::string(digits));
    };

    bool negative = false;
    if (s.front() == '-' || s.front() == '+') {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }

    Rational value;
    if (auto slash = s.find('/'); slash != std::string_view::npos) {
        BigInt num = parse_int(trim(s.substr(0, slash)));
        BigInt den = parse_int(trim(s.substr(slash + 1)));
        if (den == 0) throw InvalidInput("zero denominator in '" + std::string(text) + "'");
        value = Rational(num, den);
    } else {
        long exponent = 0;
        if (auto e = s.find_first_of("eE"); e != std::string_view::npos) {
            std::string_view exp_text = s.substr(e + 1);
            bool exp_negative = false;
            if (!exp_text.empty() && (exp_text.front() == '-' || exp_text.front() == '+')) {
                exp_negative = exp_text.front() == '-';
                exp_text.remove_prefix(1);
            }
            auto [ptr, ec] = std::from_chars(exp_text.data(), exp_text.data() + exp_text.size(), exponent);
            if (ec != std::errc() || ptr != exp_text.data() + exp_text.size() || exp_text.empty())
                throw InvalidInput("malformed exponent in '" + std::string(text) + "'");
            if (exp_negative) exponent = -exponent;
            s = s.substr(0, e);
        }
        std::string digits;
        long fraction_digits = 0;
        if (auto dot = s.find('.'); dot != std::string_view::npos) {
            digits = std::string(s.substr(0, dot)) + std::string(s.substr(dot + 1));
            fraction_digits = static_cast<long>(s.size() - dot - 1);
        } else {
            digits = std::string(s);
        }
        if (digits.empty()) throw InvalidInput("malformed rational literal '" + std::string(text) + "'");
        BigInt mantissa = parse_int(digits);
        long shift = exponent - fraction_digits;
        if (shift >= 0)
            value = Rational(mantissa * pow_int(10, static_cast<unsigned>(shift)));
        else
            value = Rational(mantissa, pow_int(10, static_cast<unsigned>(-shift)));
    }
    return negative ? Rational(-value) : value;
}

/// Exact value of a binary double (every finite double is a dyadic rational).
inline Rational rational_from_double_exact(double v) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite value cannot be converted to a rational");
    int exp = 0;
    double mant = std::frexp(v, &exp);
    // mant * 2^53 is an integer.
    auto scaled = static_cast<long long>(std::ldexp(mant, 53));
    exp -= 53;
    Rational r(scaled);
    if (exp >= 0) r *= Rational(pow_int(2, static_cast<unsigned>(exp)));
    else r /= Rational(pow_int(2, static_cast<unsigned>(-exp)));
    return r;
}

/// Decimal reading of a double: 0.1 becomes 1/10 via the shortest
/// round-trip representation, which is what a user typing 0.1 means.
inline Rational rational_from_double_decimal(double v) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite value cannot be converted to a rational");
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw InvalidInput("cannot format double");
    return parse_rational(std::string_view(buf, static_cast<std::size_t>(ptr - buf)));
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }
inline double to_double(double d) { return d; }

/// Terminating decimal when the denominator is 2^a 5^b, "p/q" otherwise.
inline std::string to_string(const Rational& r) {
    BigInt num = boost::multiprecision::numerator(r);
    BigInt den = boost::multiprecision::denominator(r);
    if (den == 1) return num.str();
    BigInt d = den;
    unsigned twos = 0, fives = 0;
    while (d % 2 == 0) { d /= 2; ++twos; }
    while (d % 5 == 0) { d /= 5; ++fives; }
    if (d != 1) return num.str() + "/" + den.str();
    unsigned places = std::max(twos, fives);
    BigInt scaled = num * pow_int(10, places) / den;
    bool negative = scaled < 0;
    if (negative) scaled = -scaled;
    std::string digits = scaled.str();
    if (digits.size() <= places) digits.insert(0, places - digits.size() + 1, '0');
    digits.insert(digits.size() - places, ".");
    return negative ? "-" + digits : digits;
}

inline std::string to_string(double d) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
    return std::string(buf, ptr);
}

/// Arithmetic-mode traits: exact rationals compare exactly, doubles against a
/// tolerance supplied by the caller.
template <class Scalar>
struct scalar_traits;

template <>
struct scalar_traits<Rational> {
    static constexpr bool exact = true;
    static constexpr const char* name = "rational";
    static Rational from_double(double v) { return rational_from_double_decimal(v); }
    static Rational from_rational(const Rational& r) { return r; }
    static Rational abs(const Rational& r) { return r < 0 ? Rational(-r) : r; }
};

template <>
struct scalar_traits<double> {
    static constexpr bool exact = false;
    static constexpr const char* name = "float";
    static double from_double(double v) { return v; }
    static double from_rational(const Rational& r) { return to_double(r); }
    static double abs(double v) { return std::fabs(v); }
};

template <class Scalar>
concept ArithmeticMode = requires { scalar_traits<Scalar>::exact; };

} // namespace condrep
