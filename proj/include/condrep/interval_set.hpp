#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "condrep/error.hpp"
#include "condrep/rational.hpp"

namespace condrep {

/// Half-open interval [lo, hi) with exact endpoints.
struct Interval {
    Rational lo, hi;
    Rational length() const { return hi - lo; }
    bool contains(const Rational& x) const { return lo <= x && x < hi; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Finite union of disjoint half-open subintervals of [0, 1]. Stored sorted
/// with touching pieces merged, so equal sets compare equal.
class IntervalSet {
public:
    IntervalSet() = default;

    IntervalSet(Rational lo, Rational hi) {
        check_bounds(lo, hi);
        if (lo < hi) parts_.push_back({std::move(lo), std::move(hi)});
    }

    explicit IntervalSet(std::vector<Interval> parts) {
        for (const auto& p : parts) check_bounds(p.lo, p.hi);
        parts_ = std::move(parts);
        normalize();
    }

    static IntervalSet unit() { return IntervalSet(Rational(0), Rational(1)); }

    const std::vector<Interval>& intervals() const noexcept { return parts_; }
    bool empty() const noexcept { return parts_.empty(); }

    Rational length() const {
        Rational total(0);
        for (const auto& p : parts_) total += p.length();
        return total;
    }

    bool contains(const Rational& x) const {
        auto it = std::upper_bound(parts_.begin(), parts_.end(), x,
                                   [](const Rational& v, const Interval& p) { return v < p.lo; });
        if (it == parts_.begin()) return false;
        return std::prev(it)->contains(x);
    }

    IntervalSet unite(const IntervalSet& other) const {
        std::vector<Interval> all = parts_;
        all.insert(all.end(), other.parts_.begin(), other.parts_.end());
        IntervalSet out;
        out.parts_ = std::move(all);
        out.normalize();
        return out;
    }

    IntervalSet intersect(const IntervalSet& other) const {
        IntervalSet out;
        std::size_t a = 0, b = 0;
        while (a < parts_.size() && b < other.parts_.size()) {
            const Interval& p = parts_[a];
            const Interval& q = other.parts_[b];
            Rational lo = std::max(p.lo, q.lo);
            Rational hi = std::min(p.hi, q.hi);
            if (lo < hi) out.parts_.push_back({lo, hi});
            if (p.hi < q.hi) ++a;
            else ++b;
        }
        return out;
    }

    IntervalSet complement() const {
        IntervalSet out;
        Rational cursor(0);
        for (const auto& p : parts_) {
            if (cursor < p.lo) out.parts_.push_back({cursor, p.lo});
            cursor = p.hi;
        }
        if (cursor < 1) out.parts_.push_back({cursor, Rational(1)});
        return out;
    }

    IntervalSet subtract(const IntervalSet& other) const { return intersect(other.complement()); }

    /// Shift by d, clipped to [0, 1].
    IntervalSet translate(const Rational& d) const {
        IntervalSet out;
        for (const auto& p : parts_) {
            Rational lo = std::max(Rational(0), Rational(p.lo + d));
            Rational hi = std::min(Rational(1), Rational(p.hi + d));
            if (lo < hi) out.parts_.push_back({lo, hi});
        }
        return out;
    }

    friend bool operator==(const IntervalSet&, const IntervalSet&) = default;

    std::string to_string() const {
        if (parts_.empty()) return "{}";
        std::string s;
        for (const auto& p : parts_) {
            if (!s.empty()) s += " u ";
            s += "[" + condrep::to_string(p.lo) + "," + condrep::to_string(p.hi) + ")";
        }
        return s;
    }

private:
    static void check_bounds(const Rational& lo, const Rational& hi) {
        if (lo < 0 || hi > 1) throw InvalidInput("interval endpoints must lie in [0,1]");
        if (hi < lo) throw InvalidInput("interval with hi < lo");
    }

    void normalize() {
        std::erase_if(parts_, [](const Interval& p) { return !(p.lo < p.hi); });
        std::sort(parts_.begin(), parts_.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
        std::vector<Interval> merged;
        for (auto& p : parts_) {
            if (!merged.empty() && p.lo <= merged.back().hi) {
                if (merged.back().hi < p.hi) merged.back().hi = p.hi;
            } else {
                merged.push_back(std::move(p));
            }
        }
        parts_ = std::move(merged);
    }

    std::vector<Interval> parts_;
};

} // namespace condrep
