#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "condrep/counterexample.hpp"
#include "condrep/io.hpp"
#include "condrep/mixing.hpp"
#include "condrep/operators.hpp"
#include "condrep/pdvcalib.hpp"
#include "condrep/representation.hpp"

namespace {

using condrep::Rational;
using condrep::io::json;

constexpr int kOk = 0;
constexpr int kDomain = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Global {
    std::string mode = "rational";
    std::string format;
    std::string out;
    std::uint64_t seed = 7;
};

struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    template <class... T>
    void add(const T&... cells) {
        rows.push_back({cell(cells)...});
    }

    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(bool b) { return b ? "true" : "false"; }
    static std::string cell(double d) { return condrep::to_string(d); }
    static std::string cell(const Rational& r) { return condrep::to_string(r); }
    template <class I>
        requires std::is_integral_v<I>
    static std::string cell(I v) { return std::to_string(v); }

    void write(std::ostream& os) const {
        for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << r[k];
            os << '\n';
        }
    }
};

/// Everything a subcommand produces: one JSON document and one or more tables.
/// Without --out the chosen format goes to stdout (the first table for csv);
/// with --out the document and every table are written as files.
struct Output {
    std::string command;
    json doc;
    std::vector<Table> tables;
};

void emit(const Output& o, const Global& g, const std::string& default_format) {
    const std::string format = g.format.empty() ? default_format : g.format;
    if (g.out.empty()) {
        if (format == "json") std::cout << o.doc.dump(2) << '\n';
        else if (!o.tables.empty()) o.tables.front().write(std::cout);
        return;
    }
    std::filesystem::create_directories(g.out);
    auto open = [&](const std::string& file) {
        std::ofstream f(std::filesystem::path(g.out) / file);
        if (!f) throw std::ios_base::failure("cannot write " + (std::filesystem::path(g.out) / file).string());
        return f;
    };
    {
        auto f = open(o.command + ".json");
        f << o.doc.dump(2) << '\n';
    }
    for (const auto& t : o.tables) {
        auto f = open(t.name + ".csv");
        t.write(f);
    }
}

template <class Scalar>
std::string join(const std::vector<Scalar>& v, const char* sep = " ") {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? sep : "") + Table::cell(v[k]);
    return s;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

template <class Scalar>
std::vector<Scalar> parse_values(const std::string& text) {
    std::vector<Scalar> out;
    for (const auto& item : split(text, ',')) {
        Rational r = condrep::parse_rational(item);
        if constexpr (condrep::scalar_traits<Scalar>::exact) out.push_back(r);
        else out.push_back(condrep::to_double(r));
    }
    return out;
}

std::size_t parse_count(const std::string& text, const char* what) {
    Rational r;
    try {
        r = condrep::parse_rational(text);
    } catch (const condrep::InvalidInput&) {
        throw UsageError(std::string(what) + " must be a nonnegative integer");
    }
    if (r < 0 || boost::multiprecision::denominator(r) != 1 || r > Rational(std::numeric_limits<std::int64_t>::max()))
        throw UsageError(std::string(what) + " must be a nonnegative integer");
    return static_cast<std::size_t>(boost::multiprecision::numerator(r));
}

template <class Body>
void with_mode(const Global& g, Body&& body) {
    if (g.mode == "rational") body(Rational{});
    else body(double{});
}

// check

template <class Scalar>
Output run_check(const std::string& path, const std::vector<std::size_t>& A) {
    auto dj = condrep::io::joint_from_json<Scalar>(condrep::io::read_json_file(path));
    auto rep = condrep::decide_Rplus(dj);
    Output o{"check", {}, {}};
    o.doc["mode"] = condrep::scalar_traits<Scalar>::name;
    o.doc["I"] = dj.I();
    o.doc["J"] = dj.J();
    o.doc["Rplus"] = rep.rplus;
    o.doc["tau"] = rep.tau ? json(rep.tau->tau) : json(nullptr);
    o.doc["D"] = rep.dirac;
    o.doc["condition_D"] = condrep::check_condition_D(dj);
    o.doc["agrees"] = rep.agrees;
    o.doc["verified"] = rep.all_verified;
    json certs = json::object();
    for (std::size_t k = 0; k < rep.failing_rows.size(); ++k)
        certs[std::to_string(rep.failing_rows[k])] = condrep::io::vector_to_json(rep.certificates[k]);
    o.doc["certificates"] = certs;
    if (!A.empty()) {
        auto nec = condrep::check_necessary(dj, A);
        o.doc["necessary"] = json{{"A", A},           {"holds", nec.holds},         {"vacuous", nec.vacuous},
                                  {"restricted", nec.restricted}, {"witnesses", nec.witnesses}, {"D", nec.dirac}};
    }

    Table t{"check", {"row", "x", "tau", "certificate"}, {}};
    for (std::size_t i = 0; i < dj.I(); ++i) {
        std::string cert;
        for (std::size_t k = 0; k < rep.failing_rows.size(); ++k)
            if (rep.failing_rows[k] == i) cert = join(rep.certificates[k]);
        t.add(i, dj.xs()[i], rep.tau ? std::to_string(rep.tau->tau[i]) : std::string(), cert);
    }
    o.tables.push_back(std::move(t));
    return o;
}

// solve

template <class Scalar>
Output run_solve(const std::string& path, const std::string& f_text, bool construct) {
    auto dj = condrep::io::joint_from_json<Scalar>(condrep::io::read_json_file(path));
    auto f = parse_values<Scalar>(f_text);
    condrep::check_dims(dj, f);
    Output o{"solve", {}, {}};
    o.doc["mode"] = condrep::scalar_traits<Scalar>::name;
    Table t{"solution", {}, {}};
    if (construct) {
        auto g = condrep::construct_g_dirac(dj, f);
        o.doc["method"] = "dirac";
        o.doc["feasible"] = true;
        o.doc["g"] = condrep::io::vector_to_json(g);
        t.header = {"j", "y", "g"};
        for (std::size_t j = 0; j < dj.J(); ++j) t.add(j, dj.ys()[j], g[j]);
    } else {
        auto res = condrep::solve_nonneg(dj, f);
        o.doc["method"] = "simplex";
        o.doc["feasible"] = res.feasible;
        o.doc["verified"] = res.verified;
        o.doc["residual"] = condrep::io::to_json(res.residual);
        if (res.feasible) {
            o.doc["g"] = condrep::io::vector_to_json(res.g);
            t.header = {"j", "y", "g"};
            for (std::size_t j = 0; j < dj.J(); ++j) t.add(j, dj.ys()[j], res.g[j]);
        } else {
            o.doc["certificate"] = condrep::io::vector_to_json(res.cert);
            t.header = {"i", "x", "certificate"};
            for (std::size_t i = 0; i < dj.I(); ++i) t.add(i, dj.xs()[i], res.cert[i]);
        }
    }
    o.tables.push_back(std::move(t));
    return o;
}

// operators

template <class Scalar>
Output run_operators(const std::string& path, bool xi, std::size_t trials, std::size_t max_I, std::uint64_t seed) {
    auto dj = condrep::io::joint_from_json<Scalar>(condrep::io::read_json_file(path));
    if (trials == 0) throw UsageError("--trials must be at least 1");
    auto nb = condrep::operator_norm_bounds(dj, trials, seed);
    Output o{"operators", {}, {}};
    Table t{"operators", {"metric", "value"}, {}};
    o.doc["mode"] = condrep::scalar_traits<Scalar>::name;
    o.doc["I"] = dj.I();
    o.doc["J"] = dj.J();
    o.doc["trials"] = nb.trials;
    o.doc["l1_nonexpansive"] = nb.l1_nonexpansive;
    o.doc["linf_nonexpansive"] = nb.linf_nonexpansive;
    o.doc["worst_l1_ratio"] = nb.worst_l1_ratio;
    o.doc["worst_linf_ratio"] = nb.worst_linf_ratio;
    o.doc["delta_estimate"] = nb.delta_estimate;
    o.doc["sign_patterns"] = nb.sign_patterns;
    o.doc["exhaustive_signs"] = nb.exhaustive_signs;
    o.doc["certified_delta"] = nb.certified_delta ? json(*nb.certified_delta) : json(nullptr);
    t.add("l1_nonexpansive", nb.l1_nonexpansive);
    t.add("linf_nonexpansive", nb.linf_nonexpansive);
    t.add("worst_l1_ratio", nb.worst_l1_ratio);
    t.add("worst_linf_ratio", nb.worst_linf_ratio);
    t.add("delta_estimate", nb.delta_estimate);
    if (xi) {
        auto r = condrep::xi_criterion(dj, max_I);
        json jx{{"xi", r.xi}, {"argmin", r.argmin}, {"surjective", r.surjective}, {"delta", r.delta}};
        if constexpr (condrep::scalar_traits<Scalar>::exact) jx["xi_exact"] = condrep::to_string(r.xi_exact);
        o.doc["xi"] = jx;
        t.add("xi", r.xi);
        t.add("surjective", r.surjective);
        t.add("delta", r.delta);
    }
    o.tables.push_back(std::move(t));
    return o;
}

// example3

template <class Scalar>
Output run_example3(const std::string& p_text, const std::string& mu_text, const std::string& f_text) {
    using BM = condrep::BernoulliMixture<Scalar>;
    const auto p = parse_values<Scalar>(p_text);
    if (p.size() != 1) throw UsageError("--p takes a single value");
    BM bm{p[0], {}, {}};
    if (mu_text.rfind("uniform:", 0) == 0) {
        const std::size_t K = parse_count(mu_text.substr(8), "--mu uniform:K");
        if (K == 0) throw condrep::InvalidInput("K must be at least 1");
        bm = BM::uniform(p[0], K);
    } else if (mu_text.rfind("weights:", 0) == 0) {
        bm.mu = parse_values<Scalar>(mu_text.substr(8));
        for (std::size_t k = 0; k < bm.mu.size(); ++k) bm.xs.push_back(Scalar(static_cast<long>(k)));
    } else {
        throw UsageError("--mu must be uniform:K or weights:w0,w1,...");
    }
    bm.validate();
    const std::size_t K = bm.xs.size();
    std::vector<Scalar> f(K, Scalar(0));
    if (f_text.rfind("indicator:", 0) == 0) {
        for (const auto& s : split(f_text.substr(10), ',')) {
            const std::size_t k = parse_count(s, "indicator index");
            if (k >= K) throw condrep::DimensionMismatch("indicator index " + s + " outside the support");
            f[k] = Scalar(1);
        }
    } else if (f_text.rfind("values:", 0) == 0) {
        f = parse_values<Scalar>(f_text.substr(7));
        if (f.size() != K) throw condrep::DimensionMismatch("f must have one value per support point");
    } else {
        throw UsageError("--f must be indicator:i,j,... or values:v0,v1,...");
    }
    auto sol = condrep::bernoulli_mixture_g(bm, f);
    auto Tg = condrep::bernoulli_mixture_T(bm, sol.g);
    bool exact = true;
    for (std::size_t k = 0; k < K; ++k)
        exact = exact && condrep::scalar_traits<Scalar>::abs(Tg[k] - f[k]) <= condrep::default_tol<Scalar>();
    auto lp = condrep::solve_nonneg(bm.joint(), f);

    Output o{"example3", {}, {}};
    o.doc["mode"] = condrep::scalar_traits<Scalar>::name;
    o.doc["p"] = condrep::io::to_json(bm.p);
    o.doc["mu"] = condrep::io::vector_to_json(bm.mu);
    o.doc["f"] = condrep::io::vector_to_json(f);
    o.doc["mean_f"] = condrep::io::to_json(sol.mean_f);
    o.doc["g"] = condrep::io::vector_to_json(sol.g);
    o.doc["Tg_equals_f"] = exact;
    o.doc["negative_at"] = sol.negative_at;
    o.doc["nonneg_feasible"] = lp.feasible;
    if (!lp.feasible) o.doc["certificate"] = condrep::io::vector_to_json(lp.cert);
    Table t{"example3", {"y", "mu", "f", "g", "Tg", "negative"}, {}};
    for (std::size_t k = 0; k < K; ++k) t.add(bm.xs[k], bm.mu[k], f[k], sol.g[k], Tg[k], sol.g[k] < 0);
    o.tables.push_back(std::move(t));
    return o;
}

// counterexample

Output run_counterexample(const std::string& A_text, const std::string& resid_text, std::size_t mc, std::size_t bins,
                          std::size_t samples, std::uint64_t seed) {
    using namespace condrep::counterexample;
    const auto A = condrep::io::parse_interval_set(A_text);
    const Rational resid = condrep::parse_rational(resid_text);
    auto rep = represent_indicator(A, resid);

    Output o{"counterexample", {}, {}};
    o.doc["A"] = condrep::io::interval_set_to_json(A);
    o.doc["target_residual"] = condrep::to_string(resid);
    o.doc["iterations"] = rep.iterations;
    o.doc["covered"] = condrep::io::interval_set_to_json(rep.covered);
    o.doc["remainder"] = condrep::io::interval_set_to_json(rep.remainder);
    o.doc["remainder_length"] = condrep::to_double(rep.remainder.length());
    o.doc["remainder_ratio"] = A.length() > 0 ? condrep::to_double(rep.remainder.length() / A.length()) : 0.0;
    o.doc["g_nu_l1"] = condrep::to_double(rep.g.nu_l1());
    json atlas = json::array();
    for (const auto& p : rep.g.pieces)
        atlas.push_back(json{{"band", p.band},
                             {"cell", p.cell_index.str()},
                             {"weight", condrep::to_string(p.weight)},
                             {"x_left", condrep::io::interval_set_to_json(p.x_left)},
                             {"y_set", condrep::io::interval_set_to_json(p.y_set())}});
    o.doc["atlas"] = atlas;

    // Exact E[g(Y) | X = x] at dyadic x with 30 bits, drawn from the seeded stream.
    Table v{"verify", {"x", "in_A", "in_covered", "Tg", "error_covered", "error_A"}, {}};
    condrep::RandomStream rng(seed, condrep::stream_id(0x6365, 0));
    const std::uint64_t scale = std::uint64_t{1} << 30;
    double worst_cov = 0, worst_A = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const Rational x(static_cast<long long>(1 + rng.below(scale - 1)), static_cast<long long>(scale));
        const Rational tg = rep.g.apply_T(x);
        const bool inA = A.contains(x), inC = rep.covered.contains(x);
        const double ec = condrep::to_double(tg - (inC ? 1 : 0));
        const double ea = condrep::to_double(tg - (inA ? 1 : 0));
        worst_cov = std::max(worst_cov, std::fabs(ec));
        worst_A = std::max(worst_A, std::fabs(ea));
        v.add(x, inA, inC, tg, ec, ea);
    }
    o.doc["verification"] = json{{"samples", samples}, {"max_error_covered", worst_cov}, {"max_error_A", worst_A}};
    o.tables.push_back(std::move(v));

    if (mc > 0) {
        auto mr = monte_carlo_check(rep.g, mc, bins, seed);
        Table t{"mc", {"lo", "hi", "count", "mean", "se", "target", "within_3se"}, {}};
        json jb = json::array();
        for (const auto& b : mr.bins) {
            t.add(b.lo, b.hi, b.count, b.mean, b.se, b.target, b.within_3se);
            jb.push_back(json{{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"mean", b.mean}, {"se", b.se},
                              {"target", b.target}, {"within_3se", b.within_3se}});
        }
        o.doc["mc"] = json{{"samples", mr.samples}, {"all_within_3se", mr.all_within_3se}, {"bins", jb}};
        o.tables.push_back(std::move(t));
    }
    return o;
}

// mixing

Output run_mixing(const std::string& a_text, const std::string& m_text, std::size_t N, const std::string& eta,
                  unsigned P, const std::string& hat_text, std::uint64_t seed) {
    namespace mx = condrep::mixing;
    mx::DigitScheme scheme{condrep::parse_rational(a_text), P, mx::Eta::parse(eta)};
    std::vector<unsigned> ms;
    for (const auto& s : split(m_text, ',')) ms.push_back(static_cast<unsigned>(parse_count(s, "--m entry")));
    const auto hat = condrep::io::parse_interval_set(hat_text);
    auto rep = mx::mixing_check(scheme, hat, ms, N, seed);

    Output o{"mixing", {}, {}};
    Table t{"mixing", {"kind", "m", "m2", "value", "se", "target", "within_3se"}, {}};
    json rows = json::array();
    auto put = [&](const char* kind, unsigned m, std::optional<unsigned> m2, const mx::Estimate& e) {
        t.add(kind, m, m2 ? std::to_string(*m2) : std::string(), e.value, e.se, e.target, e.within_3se);
        rows.push_back(json{{"kind", kind}, {"m", m}, {"m2", m2 ? json(*m2) : json(nullptr)}, {"value", e.value},
                            {"se", e.se}, {"target", e.target}, {"within_3se", e.within_3se}});
    };
    for (std::size_t k = 0; k < ms.size(); ++k) put("mass", ms[k], std::nullopt, rep.mass[k]);
    for (std::size_t q = 0; q < rep.pairs.size(); ++q) put("pair", rep.pairs[q].first, rep.pairs[q].second, rep.pair_mass[q]);
    for (std::size_t k = 0; k < ms.size(); ++k) put("hat", ms[k], std::nullopt, rep.hat_mass[k]);
    o.doc["a"] = condrep::to_string(scheme.a);
    o.doc["eta"] = scheme.eta.name;
    o.doc["P"] = P;
    o.doc["N"] = N;
    o.doc["A_hat"] = condrep::io::interval_set_to_json(hat);
    o.doc["eta_hat"] = rep.eta_hat;
    o.doc["trend_ok"] = rep.trend_ok;
    o.doc["estimates"] = rows;
    o.tables.push_back(std::move(t));
    return o;
}

// surface

std::vector<double> parse_grid(const std::string& text, const char* what) {
    auto parts = split(text, ':');
    if (parts.size() != 3) throw UsageError(std::string(what) + " must be lo:hi:step");
    const double lo = condrep::to_double(condrep::parse_rational(parts[0]));
    const double hi = condrep::to_double(condrep::parse_rational(parts[1]));
    const double step = condrep::to_double(condrep::parse_rational(parts[2]));
    if (!(step > 0) || hi < lo) throw UsageError(std::string(what) + " needs lo <= hi and step > 0");
    return condrep::pdv::linspace_step(lo, hi, step);
}

condrep::pdv::VolModel parse_model(const std::string& text, double S0) {
    using condrep::pdv::VolModel;
    auto colon = text.find(':');
    if (colon == std::string::npos) throw UsageError("--model must be flat:s, term:a,b or displaced:s,d");
    const std::string kind = text.substr(0, colon);
    const auto v = parse_values<double>(text.substr(colon + 1));
    VolModel m;
    if (kind == "flat" && v.size() == 1) m = VolModel::flat(v[0], S0);
    else if (kind == "term" && v.size() == 2) m = VolModel::term(v[0], v[1], S0);
    else if (kind == "displaced" && v.size() == 2) m = VolModel::displaced(v[0], v[1], S0);
    else throw UsageError("--model must be flat:s, term:a,b or displaced:s,d");
    m.validate();
    return m;
}

Output run_surface(const std::string& model, const std::string& t_grid, const std::string& x_grid, double S0) {
    auto s = condrep::pdv::synth_call_surface(parse_model(model, S0), parse_grid(t_grid, "--t"), parse_grid(x_grid, "--x"));
    Output o{"surface", {}, {}};
    Table t{"surface", {"t", "x", "C"}, {}};
    json rows = json::array();
    for (std::size_t k = 0; k < s.times.size(); ++k)
        for (std::size_t j = 0; j < s.strikes.size(); ++j) {
            t.add(s.times[k], s.strikes[j], s.C(k, j));
            rows.push_back(json{{"t", s.times[k]}, {"x", s.strikes[j]}, {"C", s.C(k, j)}});
        }
    o.doc["model"] = model;
    o.doc["spot"] = s.spot;
    o.doc["prices"] = rows;
    o.tables.push_back(std::move(t));
    return o;
}

// calibrate

struct CalibrateArgs {
    std::string surface, features, ybins = "20x20", ymode = "features", update = "multiplicative", dupire = "implied";
    std::size_t particles = 100000, steps = 50, xbins = 40;
    double h = 0.02, S0 = 1.0;
    bool reprice_all = false;
};

Output run_calibrate(const CalibrateArgs& a, std::uint64_t seed) {
    namespace pdv = condrep::pdv;
    auto surface = condrep::io::read_surface_csv_file(a.surface, a.S0);
    pdv::DupireOptions dopt;
    dopt.form = a.dupire == "price" ? pdv::DupireForm::price : pdv::DupireForm::implied_variance;

    pdv::CalibrationConfig cfg;
    cfg.locvar = pdv::dupire_localvol(surface, dopt);
    if (!a.features.empty()) cfg.features = condrep::io::features_from_json(condrep::io::read_json_file(a.features));
    cfg.particles = a.particles;
    cfg.steps = a.steps;
    cfg.h = a.h;
    cfg.xbins = a.xbins;
    cfg.seed = seed;
    cfg.S0 = a.S0;
    {
        auto parts = split(a.ybins, 'x');
        if (parts.empty() || parts.size() > 2) throw UsageError("--ybins must be N or N1xN2");
        cfg.ybins1 = parse_count(parts[0], "--ybins");
        cfg.ybins2 = parts.size() == 2 ? parse_count(parts[1], "--ybins") : 1;
    }
    cfg.ymode = a.ymode == "independent" ? pdv::YMode::independent
              : a.ymode == "x_refine"    ? pdv::YMode::x_refine
                                         : pdv::YMode::features;
    cfg.update = a.update == "additive" ? pdv::EulerUpdate::additive : pdv::EulerUpdate::multiplicative;

    // Market rows to reprice: every simulated maturity on the surface, or only the last one.
    const double horizon = static_cast<double>(a.steps) * a.h;
    pdv::CallSurface market;
    market.strikes = surface.strikes;
    market.spot = surface.spot;
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < surface.times.size(); ++k) {
        const double t = surface.times[k];
        const double q = t / a.h;
        const bool on_grid = t > 0 && std::fabs(q - std::round(q)) <= 1e-9 * std::max(1.0, q) && t <= horizon * (1 + 1e-12);
        if (on_grid && (a.reprice_all || std::fabs(t - horizon) <= 1e-9 * std::max(1.0, horizon))) rows.push_back(k);
    }
    market.times.clear();
    market.C = condrep::Matrix<double>(rows.size(), surface.strikes.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        market.times.push_back(surface.times[rows[r]]);
        for (std::size_t j = 0; j < surface.strikes.size(); ++j) market.C(r, j) = surface.C(rows[r], j);
    }
    if (!rows.empty()) cfg.market = market;

    auto rep = pdv::run_calibration(cfg);

    Output o{"calibrate", {}, {}};
    Table steps{"steps", {"k", "t", "residual", "feasibility", "max_gap", "x_bins", "y_bins", "clipped", "mean_x", "mean_x_se"}, {}};
    std::size_t exact = 0;
    for (const auto& s : rep.steps) {
        steps.add(s.k, s.t, s.cal.residual, std::string(pdv::to_string(s.cal.feasibility)), s.cal.max_gap, s.cal.x_rep.size(),
                  s.cal.y_labels.size(), s.clipped, s.mean_x, s.mean_x_se);
        exact += s.cal.feasibility == pdv::Feasibility::exact;
    }
    Table rp{"reprice", {"t", "x", "model_price", "market_price", "mc_se"}, {}};
    double worst_z = 0;
    for (const auto& p : rep.reprice) {
        rp.add(p.t, p.x, p.model, p.market, p.se);
        if (p.se > 0) worst_z = std::max(worst_z, std::fabs(p.model - p.market) / p.se);
    }
    o.doc["particles"] = cfg.particles;
    o.doc["steps"] = cfg.steps;
    o.doc["h"] = cfg.h;
    o.doc["seed"] = seed;
    o.doc["features"] = condrep::io::features_to_json(cfg.features);
    o.doc["exact_steps"] = exact;
    o.doc["localvol_floored"] = cfg.locvar.floored;
    o.doc["localvol_filled"] = cfg.locvar.filled;
    o.doc["reprice_points"] = rep.reprice.size();
    o.doc["reprice_worst_z"] = worst_z;
    o.doc["final_mean_x"] = rep.final_mean_x;
    o.doc["final_mean_x_se"] = rep.final_mean_x_se;
    o.tables.push_back(std::move(steps));
    o.tables.push_back(std::move(rp));
    return o;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Representation of conditional expectations with nonnegative integrands", "condrep"};
    app.require_subcommand(1);
    app.fallthrough();
    Global g;
    app.add_option("--mode", g.mode, "Arithmetic: rational (exact) or float")->check(CLI::IsMember({"rational", "float"}));
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--out", g.out, "Write the report and every table into this directory");
    app.add_option("--seed", g.seed, "Seed for every random stream");

    std::string joint_path, f_text, a_text = "0.3", m_text = "1,2,5,10", N_text = "1000000", eta = "uniform", hat = "0:0.5";
    std::string A_text = "0.3:0.4", resid = "1e-3", mc_text = "0", p_text = "0.5", mu_text = "uniform:4", f3_text = "indicator:0";
    std::string model = "flat:0.2", t_grid = "0:1:0.02", x_grid = "0.3:2.5:0.0025";
    std::vector<std::size_t> A_rows;
    bool construct = false, xi = false;
    std::size_t trials = 1000, max_I = 12, bins = 64, samples = 200;
    unsigned P = 12;
    double S0 = 1.0;
    CalibrateArgs ca;

    auto* check = app.add_subcommand("check", "Decide whether every nonnegative f is representable");
    check->add_option("joint", joint_path, "Joint law (JSON)")->required()->check(CLI::ExistingFile);
    check->add_option("--A", A_rows, "Also test the necessary condition on these rows")->delimiter(',');

    auto* solve = app.add_subcommand("solve", "Find g >= 0 with E[g(Y)|X] = f, or a Farkas certificate");
    solve->add_option("joint", joint_path, "Joint law (JSON)")->required()->check(CLI::ExistingFile);
    solve->add_option("--f", f_text, "Values f(x_1),...,f(x_I)")->required();
    solve->add_flag("--construct", construct, "Use the explicit construction on the Dirac set");

    auto* ops = app.add_subcommand("operators", "Norm checks and the xi surjectivity criterion");
    ops->add_option("joint", joint_path, "Joint law (JSON)")->required()->check(CLI::ExistingFile);
    ops->add_flag("--xi", xi, "Compute xi by subset enumeration");
    ops->add_option("--trials", trials, "Random trials for the norm checks");
    ops->add_option("--max-I", max_I, "Largest row count for xi enumeration")->check(CLI::Range(1, 20));

    auto* ex3 = app.add_subcommand("example3", "Bernoulli mixture with its closed-form preimage");
    ex3->add_option("--p", p_text, "Mixing probability in (0,1)");
    ex3->add_option("--mu", mu_text, "uniform:K or weights:w0,w1,...");
    ex3->add_option("--f", f3_text, "indicator:i,j,... or values:v0,v1,...");

    auto* ce = app.add_subcommand("counterexample", "Represent 1_A under the continuous counterexample law");
    ce->add_option("--A", A_text, "Intervals lo:hi[,lo:hi...] inside [0,1]");
    ce->add_option("--resid", resid, "Target length of the uncovered remainder");
    ce->add_option("--mc", mc_text, "Monte Carlo samples (0 disables)");
    ce->add_option("--bins", bins, "Monte Carlo bins in x");
    ce->add_option("--samples", samples, "Dyadic x values for exact verification");

    auto* mix = app.add_subcommand("mixing", "Monte Carlo check of the digit-interleaving sets");
    mix->add_option("--a", a_text, "Threshold a in (0,1)");
    mix->add_option("--m", m_text, "Comma-separated indices m");
    mix->add_option("--N", N_text, "Samples (at least 10^4)");
    mix->add_option("--eta", eta, "uniform or power:k");
    mix->add_option("--P", P, "Digits kept per U_m")->check(CLI::Range(1u, 60u));
    mix->add_option("--hat", hat, "Reference set lo:hi[,lo:hi...]");

    auto* surf = app.add_subcommand("surface", "Write a synthetic call surface as t,x,C");
    surf->add_option("--model", model, "flat:s, term:a,b or displaced:s,d");
    surf->add_option("--t", t_grid, "Maturities lo:hi:step");
    surf->add_option("--x", x_grid, "Strikes lo:hi:step");
    surf->add_option("--S0", S0, "Spot");

    auto* cal = app.add_subcommand("calibrate", "Per-step calibration of a path-dependent volatility model");
    cal->set_help_flag("--help", "Print this help message and exit");
    cal->add_option("--surface", ca.surface, "Call prices (CSV with columns t,x,C)")->required()->check(CLI::ExistingFile);
    cal->add_option("--features", ca.features, "Feature specification (JSON)")->check(CLI::ExistingFile);
    cal->add_option("--particles", ca.particles, "Particle count");
    cal->add_option("--steps", ca.steps, "Time steps");
    cal->add_option("--h", ca.h, "Step size");
    cal->add_option("--xbins", ca.xbins, "Quantile bins in x");
    cal->add_option("--ybins", ca.ybins, "Feature bins N or N1xN2");
    cal->add_option("--ymode", ca.ymode, "Conditioning variable")->check(CLI::IsMember({"features", "x_refine", "independent"}));
    cal->add_option("--update", ca.update, "Euler update")->check(CLI::IsMember({"multiplicative", "additive"}));
    cal->add_option("--dupire", ca.dupire, "Local variance formula")->check(CLI::IsMember({"implied", "price"}));
    cal->add_option("--S0", ca.S0, "Spot");
    cal->add_flag("--reprice-all", ca.reprice_all, "Reprice every simulated maturity on the surface");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    Output o;
    std::string default_format = "json";
    if (*check) {
        with_mode(g, [&](auto tag) { o = run_check<decltype(tag)>(joint_path, A_rows); });
    } else if (*solve) {
        with_mode(g, [&](auto tag) { o = run_solve<decltype(tag)>(joint_path, f_text, construct); });
    } else if (*ops) {
        with_mode(g, [&](auto tag) { o = run_operators<decltype(tag)>(joint_path, xi, trials, max_I, g.seed); });
    } else if (*ex3) {
        with_mode(g, [&](auto tag) { o = run_example3<decltype(tag)>(p_text, mu_text, f3_text); });
    } else if (*ce) {
        o = run_counterexample(A_text, resid, parse_count(mc_text, "--mc"), bins, samples, g.seed);
    } else if (*mix) {
        o = run_mixing(a_text, m_text, parse_count(N_text, "--N"), eta, P, hat, g.seed);
        default_format = "csv";
    } else if (*surf) {
        o = run_surface(model, t_grid, x_grid, S0);
        default_format = "csv";
    } else if (*cal) {
        o = run_calibrate(ca, g.seed);
        default_format = "csv";
    }
    emit(o, g, default_format);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const condrep::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDomain;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDomain;
    }
}
