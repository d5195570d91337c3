#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "condrep/error.hpp"
#include "condrep/interval_set.hpp"
#include "condrep/parallel.hpp"
#include "condrep/rational.hpp"
#include "condrep/rng.hpp"

namespace condrep::mixing {

/// Decimal digits D_1, D_2, ... of a number in [0, 1]. Terminating
/// expansions are taken with an all-zero tail.
class DigitSource {
public:
    virtual ~DigitSource() = default;
    virtual int digit(std::uint64_t n) const = 0;  // n >= 1
};

class RationalDigits : public DigitSource {
public:
    explicit RationalDigits(Rational x) : x_(std::move(x)) {
        if (x_ < 0 || x_ > 1) throw DomainError("x must lie in [0,1]");
        num_ = boost::multiprecision::numerator(x_);
        den_ = boost::multiprecision::denominator(x_);
    }
    int digit(std::uint64_t n) const override {
        if (n == 0) throw InvalidInput("digit positions start at 1");
        // D_n = floor(10 * r) with r = frac(10^{n-1} x) = (num 10^{n-1} mod den) / den.
        BigInt r = boost::multiprecision::powm(BigInt(10), BigInt(n - 1), den_);
        r = (r * (num_ % den_)) % den_;
        return static_cast<int>((r * 10) / den_);
    }

private:
    Rational x_;
    BigInt num_, den_;
};

class StringDigits : public DigitSource {
public:
    /// Accepts "0.d1d2d3...", ".d1d2...", "0" or "1".
    explicit StringDigits(const std::string& text) {
        std::string s = text;
        if (s == "1" || s == "1." || (s.rfind("1.", 0) == 0 && s.find_first_not_of('0', 2) == std::string::npos)) return;
        auto dot = s.find('.');
        std::string whole = dot == std::string::npos ? s : s.substr(0, dot);
        if (!(whole.empty() || whole == "0")) throw DomainError("decimal string must lie in [0,1]: " + text);
        if (dot == std::string::npos) return;
        digits_ = s.substr(dot + 1);
        for (char c : digits_)
            if (c < '0' || c > '9') throw InvalidInput("malformed decimal string: " + text);
    }
    int digit(std::uint64_t n) const override {
        if (n == 0) throw InvalidInput("digit positions start at 1");
        return n <= digits_.size() ? digits_[n - 1] - '0' : 0;
    }

private:
    std::string digits_;
};

/// Digits of a uniform random number, generated lazily and addressed by
/// (seed, sample, position) so any digit can be read in any order.
class RandomDigits : public DigitSource {
public:
    RandomDigits(std::uint64_t seed, std::uint64_t sample) : seed_(seed), sample_(sample) {}
    int digit(std::uint64_t n) const override {
        if (n == 0) throw InvalidInput("digit positions start at 1");
        const std::uint64_t block = (n - 1) / 2;
        auto out = Philox4x32::block({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                                      static_cast<std::uint32_t>(sample_), static_cast<std::uint32_t>(sample_ >> 32)},
                                     {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32) ^ 0x6d697869u});
        const std::size_t w = ((n - 1) % 2) * 2;
        const std::uint64_t bits = (std::uint64_t{out[w]} << 32) | out[w + 1];
        // floor(10 * bits / 2^64): bias below 10 / 2^64 per digit.
        return static_cast<int>((static_cast<unsigned __int128>(bits) * 10u) >> 64);
    }

private:
    std::uint64_t seed_, sample_;
};

/// Position of the p-th digit of U_m in the expansion of x: 2^m (2p - 1).
inline std::uint64_t phi(unsigned m, std::uint64_t p) {
    if (m >= 63 || p == 0) throw RangeError("digit position out of range");
    return (std::uint64_t{1} << m) * (2 * p - 1);
}

/// P-digit truncation of U_m(x) = sum_p D_{phi(m,p)} / 10^p, exact.
inline Rational u_m(const DigitSource& x, unsigned m, unsigned P) {
    if (P < 1) throw InvalidInput("P must be at least 1");
    BigInt acc = 0;
    for (unsigned p = 1; p <= P; ++p) acc = acc * 10 + x.digit(phi(m, p));
    return Rational(acc, pow_int(10, P));
}

inline Rational u_m(const Rational& x, unsigned m, unsigned P) { return u_m(RationalDigits(x), m, P); }

/// Diffuse reference measure eta on [0,1] given by its distribution function.
struct Eta {
    std::string name = "uniform";
    std::function<Rational(const Rational&)> cdf = [](const Rational& x) { return x; };
    std::function<double(double)> cdf_inv = [](double u) { return u; };

    static Eta uniform() { return {}; }

    /// F(x) = x^k on [0,1].
    static Eta power(unsigned k) {
        if (k == 0) throw InvalidInput("power must be positive");
        Eta e;
        e.name = "power:" + std::to_string(k);
        e.cdf = [k](const Rational& x) {
            Rational r(1);
            for (unsigned i = 0; i < k; ++i) r *= x;
            return r;
        };
        e.cdf_inv = [k](double u) { return std::pow(u, 1.0 / k); };
        return e;
    }

    static Eta parse(const std::string& spec) {
        if (spec == "uniform") return uniform();
        if (spec.rfind("power:", 0) == 0) return power(static_cast<unsigned>(std::stoul(spec.substr(6))));
        throw InvalidInput("unknown eta '" + spec + "' (expected uniform or power:k)");
    }
};

struct DigitScheme {
    Rational a;
    unsigned P = 12;
    Eta eta;

    void validate() const {
        if (!(a > 0 && a < 1)) throw InvalidInput("a must lie in (0,1)");
        if (P < 1) throw InvalidInput("P must be at least 1");
    }
};

/// x in A_m iff U_m(F_eta(x)) <= a, evaluated on the P-digit truncation; the
/// truncation can only misclassify points within 10^-P of the threshold.
inline bool membership(const Rational& x, unsigned m, const DigitScheme& scheme) {
    scheme.validate();
    if (x < 0 || x > 1) throw DomainError("x must lie in [0,1]");
    return u_m(RationalDigits(scheme.eta.cdf(x)), m, scheme.P) <= scheme.a;
}

inline bool membership_digits(const DigitSource& u, unsigned m, const DigitScheme& scheme) {
    return u_m(u, m, scheme.P) <= scheme.a;
}

struct Estimate {
    double value = 0.0;
    double se = 0.0;
    double target = 0.0;
    bool within_3se = false;
};

struct MixingReport {
    std::size_t N = 0;
    std::vector<unsigned> m_list;
    std::vector<Estimate> mass;                 // eta(A_m), target a
    std::vector<std::pair<unsigned, unsigned>> pairs;
    std::vector<Estimate> pair_mass;            // eta(A_m cap A_m'), target a^2
    std::vector<Estimate> hat_mass;             // eta(A_hat cap A_m), target a eta(A_hat)
    double eta_hat = 0.0;                       // eta(A_hat), exact
    bool trend_ok = false;                      // last hat estimate within 3 SE and errors shrink overall
};

namespace detail {
inline Estimate bernoulli_estimate(double hits, double n, double target) {
    Estimate e;
    e.value = hits / n;
    e.se = std::sqrt(std::max(target * (1 - target), 1e-300) / n);
    e.target = target;
    e.within_3se = std::fabs(e.value - target) <= 3 * e.se;
    return e;
}

// x = F_eta^{-1}(U) lies in A_hat; U is read to 18 digits, enough to separate it
// from rational endpoints except on a set of probability ~1e-18.
inline bool in_hat(const DigitSource& u, const IntervalSet& hat, const Eta& eta) {
    if (hat.empty()) return false;
    double v = 0.0, scale = 0.1;
    for (std::uint64_t n = 1; n <= 18; ++n, scale /= 10) v += u.digit(n) * scale;
    const double x = eta.cdf_inv(v);
    for (const auto& p : hat.intervals())
        if (x >= to_double(p.lo) && x < to_double(p.hi)) return true;
    return false;
}
} // namespace detail

/// Monte Carlo estimates of eta(A_m), eta(A_m cap A_m'), eta(A_hat cap A_m).
/// Samples draw U uniform (so F_eta^{-1}(U) ~ eta) with lazily generated digits.
inline MixingReport mixing_check(const DigitScheme& scheme, const IntervalSet& A_hat, const std::vector<unsigned>& m_list,
                                 std::size_t N, std::uint64_t seed,
                                 std::vector<std::pair<unsigned, unsigned>> pairs = {}) {
    scheme.validate();
    if (N < 10000) throw InvalidInput("N must be at least 10^4");
    if (m_list.empty()) throw InvalidInput("m list is empty");
    if (pairs.empty())
        for (std::size_t i = 0; i + 1 < m_list.size(); ++i) pairs.emplace_back(m_list[i], m_list[i + 1]);
    const std::size_t M = m_list.size();
    const std::size_t chunks = 256;
    std::vector<std::vector<double>> hit(chunks, std::vector<double>(M, 0.0)), hat_hit = hit;
    std::vector<std::vector<double>> pair_hit(chunks, std::vector<double>(pairs.size(), 0.0));
    parallel_chunks(N, chunks, [&](std::size_t b, std::size_t e, std::size_t c) {
        std::vector<char> in(M);
        for (std::size_t s = b; s < e; ++s) {
            RandomDigits u(seed, s);
            const bool h = detail::in_hat(u, A_hat, scheme.eta);
            for (std::size_t k = 0; k < M; ++k) {
                in[k] = membership_digits(u, m_list[k], scheme);
                hit[c][k] += in[k];
                hat_hit[c][k] += in[k] && h;
            }
            for (std::size_t q = 0; q < pairs.size(); ++q) {
                auto find = [&](unsigned m) -> bool {
                    for (std::size_t k = 0; k < M; ++k)
                        if (m_list[k] == m) return in[k];
                    return membership_digits(u, m, scheme);
                };
                pair_hit[c][q] += find(pairs[q].first) && find(pairs[q].second);
            }
        }
    });

    MixingReport rep;
    rep.N = N;
    rep.m_list = m_list;
    rep.pairs = pairs;
    const double a = to_double(scheme.a);
    const double n = static_cast<double>(N);
    // eta(A_hat) = sum over components of F(hi) - F(lo).
    Rational eh(0);
    for (const auto& p : A_hat.intervals()) eh += scheme.eta.cdf(p.hi) - scheme.eta.cdf(p.lo);
    rep.eta_hat = to_double(eh);
    for (std::size_t k = 0; k < M; ++k) {
        double hs = 0, hh = 0;
        for (std::size_t c = 0; c < chunks; ++c) {
            hs += hit[c][k];
            hh += hat_hit[c][k];
        }
        rep.mass.push_back(detail::bernoulli_estimate(hs, n, a));
        rep.hat_mass.push_back(detail::bernoulli_estimate(hh, n, a * rep.eta_hat));
    }
    for (std::size_t q = 0; q < pairs.size(); ++q) {
        double s = 0;
        for (std::size_t c = 0; c < chunks; ++c) s += pair_hit[c][q];
        rep.pair_mass.push_back(detail::bernoulli_estimate(s, n, a * a));
    }
    const auto& last = rep.hat_mass.back();
    const double first_err = std::fabs(rep.hat_mass.front().value - rep.hat_mass.front().target);
    const double last_err = std::fabs(last.value - last.target);
    rep.trend_ok = last.within_3se && last_err <= std::max(first_err, 3 * last.se);
    return rep;
}

} // namespace condrep::mixing
