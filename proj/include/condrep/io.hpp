#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "condrep/error.hpp"
#include "condrep/interval_set.hpp"
#include "condrep/measures.hpp"
#include "condrep/pdv/particles.hpp"
#include "condrep/pdv/surface.hpp"
#include "condrep/rational.hpp"

namespace condrep::io {

using json = nlohmann::ordered_json;

/// Rationals are written as strings ("3/8", "0.125") so nothing is lost;
/// doubles as JSON numbers.
inline json to_json(const Rational& r) { return to_string(r); }
inline json to_json(double d) { return d; }

template <class Scalar>
Scalar scalar_from_json(const json& j, const std::string& where) {
    if constexpr (scalar_traits<Scalar>::exact) {
        if (j.is_string()) return parse_rational(j.get<std::string>());
        if (j.is_number_integer()) return Rational(j.get<long long>());
        if (j.is_number_unsigned()) return Rational(BigInt(j.get<unsigned long long>()));
        if (j.is_number_float()) return rational_from_double_decimal(j.get<double>());
    } else {
        if (j.is_number()) return j.get<double>();
        if (j.is_string()) return to_double(parse_rational(j.get<std::string>()));
    }
    throw InvalidInput(where + ": expected a number or a rational string");
}

template <class Scalar>
json vector_to_json(const std::vector<Scalar>& v) {
    json out = json::array();
    for (const auto& x : v) out.push_back(to_json(x));
    return out;
}

template <class Scalar>
std::vector<Scalar> vector_from_json(const json& j, const std::string& where) {
    if (!j.is_array()) throw InvalidInput(where + ": expected an array");
    std::vector<Scalar> out;
    out.reserve(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(scalar_from_json<Scalar>(j[k], where + "[" + std::to_string(k) + "]"));
    return out;
}

/// {"xs": [...], "ys": [...], "P": [[...], ...]}; xs and ys default to 0, 1, ...
template <class Scalar>
json joint_to_json(const DiscreteJoint<Scalar>& dj) {
    json P = json::array();
    for (std::size_t i = 0; i < dj.I(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < dj.J(); ++j) row.push_back(to_json(dj.P()(i, j)));
        P.push_back(std::move(row));
    }
    return json{{"xs", vector_to_json(dj.xs())}, {"ys", vector_to_json(dj.ys())}, {"P", std::move(P)}};
}

template <class Scalar>
DiscreteJoint<Scalar> joint_from_json(const json& j) {
    if (!j.is_object()) throw InvalidInput("joint law: expected an object");
    if (!j.contains("P")) throw InvalidInput("joint law: missing \"P\"");
    const json& jp = j.at("P");
    if (!jp.is_array() || jp.empty()) throw InvalidInput("joint law: \"P\" must be a nonempty array of rows");
    const std::size_t I = jp.size();
    const std::size_t J = jp[0].is_array() ? jp[0].size() : 0;
    Matrix<Scalar> P(I, J);
    for (std::size_t i = 0; i < I; ++i) {
        auto row = vector_from_json<Scalar>(jp[i], "P[" + std::to_string(i) + "]");
        if (row.size() != J) throw DimensionMismatch("joint law: ragged row " + std::to_string(i));
        for (std::size_t c = 0; c < J; ++c) P(i, c) = std::move(row[c]);
    }
    auto axis = [&](const char* key, std::size_t n) {
        if (j.contains(key)) return vector_from_json<Scalar>(j.at(key), key);
        std::vector<Scalar> v(n);
        for (std::size_t k = 0; k < n; ++k) v[k] = Scalar(static_cast<long>(k));
        return v;
    };
    Scalar tol = default_tol<Scalar>();
    if constexpr (!scalar_traits<Scalar>::exact) tol = 1e-9;
    return DiscreteJoint<Scalar>(axis("xs", I), axis("ys", J), std::move(P), tol);
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

/// [["0.3", "0.4"], ["1/2", "3/4"]]
inline json interval_set_to_json(const IntervalSet& s) {
    json out = json::array();
    for (const auto& p : s.intervals()) out.push_back(json::array({to_string(p.lo), to_string(p.hi)}));
    return out;
}

inline IntervalSet interval_set_from_json(const json& j) {
    if (!j.is_array()) throw InvalidInput("interval set: expected an array of [lo, hi] pairs");
    std::vector<Interval> parts;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 2) throw InvalidInput("interval set: expected [lo, hi]");
        parts.push_back({scalar_from_json<Rational>(p[0], "lo"), scalar_from_json<Rational>(p[1], "hi")});
    }
    return IntervalSet(std::move(parts));
}

/// "0.3:0.4" or "0.1:0.2,1/2:3/4".
inline IntervalSet parse_interval_set(const std::string& text) {
    std::vector<Interval> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto colon = item.find(':');
        if (colon == std::string::npos) throw InvalidInput("interval '" + item + "' must be written lo:hi");
        parts.push_back({parse_rational(item.substr(0, colon)), parse_rational(item.substr(colon + 1))});
    }
    if (parts.empty()) throw InvalidInput("empty interval list");
    return IntervalSet(std::move(parts));
}

/// Comma-separated fields of one CSV line; no quoting is needed for numeric data.
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    return out;
}

/// Long-format call surface with header t,x,C. Every (t, x) pair of the grid
/// must appear exactly once.
inline pdv::CallSurface read_surface_csv(std::istream& in, double spot = 1.0) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("surface: empty input");
    auto header = split_csv(line);
    int ct = -1, cx = -1, cc = -1;
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] == "t") ct = static_cast<int>(k);
        else if (header[k] == "x") cx = static_cast<int>(k);
        else if (header[k] == "C") cc = static_cast<int>(k);
    }
    if (ct < 0 || cx < 0 || cc < 0) throw InvalidInput("surface: header must name columns t, x and C");
    struct Row { double t, x, C; };
    std::vector<Row> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = split_csv(line);
        const auto need = static_cast<std::size_t>(std::max({ct, cx, cc}));
        if (f.size() <= need) throw InvalidInput("surface: line " + std::to_string(lineno) + " has too few fields");
        try {
            rows.push_back({std::stod(f[static_cast<std::size_t>(ct)]), std::stod(f[static_cast<std::size_t>(cx)]),
                            std::stod(f[static_cast<std::size_t>(cc)])});
        } catch (const std::logic_error&) {
            throw InvalidInput("surface: line " + std::to_string(lineno) + " is not numeric");
        }
    }
    std::vector<double> ts, xs;
    for (const auto& r : rows) {
        ts.push_back(r.t);
        xs.push_back(r.x);
    }
    auto uniq = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(ts);
    uniq(xs);
    if (rows.size() != ts.size() * xs.size())
        throw InvalidInput("surface: expected a full grid of " + std::to_string(ts.size()) + " x " + std::to_string(xs.size()) +
                           " prices, found " + std::to_string(rows.size()) + " rows");
    pdv::CallSurface s;
    s.times = ts;
    s.strikes = xs;
    s.spot = spot;
    s.C = Matrix<double>(ts.size(), xs.size(), std::numeric_limits<double>::quiet_NaN());
    for (const auto& r : rows) {
        const auto k = static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), r.t) - ts.begin());
        const auto j = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), r.x) - xs.begin());
        if (!std::isnan(s.C(k, j))) throw InvalidInput("surface: duplicate price for t=" + to_string(r.t) + ", x=" + to_string(r.x));
        s.C(k, j) = r.C;
    }
    return s;
}

inline pdv::CallSurface read_surface_csv_file(const std::string& path, double spot = 1.0) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open " + path);
    return read_surface_csv(in, spot);
}

inline void write_surface_csv(std::ostream& out, const pdv::CallSurface& s) {
    out << "t,x,C\n";
    for (std::size_t k = 0; k < s.times.size(); ++k)
        for (std::size_t j = 0; j < s.strikes.size(); ++j)
            out << to_string(s.times[k]) << ',' << to_string(s.strikes[j]) << ',' << to_string(s.C(k, j)) << '\n';
}

/// Feature specification; missing keys keep their defaults, unknown keys are rejected.
inline pdv::FeatureSpec features_from_json(const json& j) {
    if (!j.is_object()) throw InvalidInput("features: expected an object");
    pdv::FeatureSpec f;
    const std::pair<const char*, double*> fields[] = {
        {"lambda10", &f.lambda10}, {"lambda11", &f.lambda11}, {"lambda20", &f.lambda20}, {"lambda21", &f.lambda21},
        {"theta1", &f.theta1},     {"theta2", &f.theta2},     {"beta0", &f.beta0},       {"beta1", &f.beta1},
        {"beta2", &f.beta2}};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const auto& [name, ptr] : fields)
            if (it.key() == name) {
                if (!it.value().is_number()) throw InvalidInput(std::string("features: ") + name + " must be a number");
                *ptr = it.value().get<double>();
                known = true;
            }
        if (!known) throw InvalidInput("features: unknown key '" + it.key() + "'");
    }
    f.validate();
    return f;
}

inline json features_to_json(const pdv::FeatureSpec& f) {
    return json{{"lambda10", f.lambda10}, {"lambda11", f.lambda11}, {"lambda20", f.lambda20},
                {"lambda21", f.lambda21}, {"theta1", f.theta1},     {"theta2", f.theta2},
                {"beta0", f.beta0},       {"beta1", f.beta1},       {"beta2", f.beta2}};
}

} // namespace condrep::io
