#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "frac/params.hpp"

namespace frac {

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------- configuration

struct HarnessConfig {
    double h = 1.0 / 64;   // 1D spacing
    double h2 = 1.0 / 16;  // 2D spacing
    int near_band = 2;
    double tol_exact = 1e-10;
    double tol_discrete = 0.03;  // N = 1; N = 2 uses 5/3 of it
    double tol_plateau = 0.15;
    int corpus_size = 200;
    double gamma_safety = 0.5;
    std::uint64_t seed = 0;
    bool timing = false;  // record runtime_ms (breaks byte-identical reports)

    double tol_discrete_for(int dim) const { return dim == 1 ? tol_discrete : tol_discrete * 5.0 / 3.0; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Number, optionally written as a fraction "1/64".
inline double parse_number(const std::string& text, const std::string& what) {
    std::string t = trim(text);
    auto slash = t.find('/');
    try {
        std::size_t used = 0;
        if (slash != std::string::npos) {
            double a = std::stod(t.substr(0, slash), &used);
            if (used != slash) throw std::invalid_argument("");
            std::string den = t.substr(slash + 1);
            double b = std::stod(den, &used);
            if (used != den.size() || b == 0) throw std::invalid_argument("");
            return a / b;
        }
        double v = std::stod(t, &used);
        if (used != t.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad number for " + what + ": '" + text + "'");
    }
}

}  // namespace detail

inline HarnessConfig parse_config(std::istream& in) {
    HarnessConfig c;
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config line " + std::to_string(ln) + ": expected key=value");
        std::string key = detail::trim(line.substr(0, eq)), val = line.substr(eq + 1);
        double v = detail::parse_number(val, key);
        auto positive = [&] {
            if (!(v > 0)) throw ParseError("config key " + key + " must be positive");
        };
        if (key == "h") positive(), c.h = v;
        else if (key == "h2") positive(), c.h2 = v;
        else if (key == "near_band") {
            if (v < 1 || v != std::floor(v)) throw ParseError("near_band must be an integer >= 1");
            c.near_band = int(v);
        } else if (key == "tol_exact") positive(), c.tol_exact = v;
        else if (key == "tol_discrete") positive(), c.tol_discrete = v;
        else if (key == "tol_plateau") positive(), c.tol_plateau = v;
        else if (key == "corpus_size") {
            if (v < 1 || v != std::floor(v)) throw ParseError("corpus_size must be a positive integer");
            c.corpus_size = int(v);
        } else if (key == "gamma_safety") {
            if (!(v > 0 && v < 1)) throw ParseError("gamma_safety must lie in (0,1)");
            c.gamma_safety = v;
        } else
            throw ParseError("unknown config key: " + key);
    }
    return c;
}

inline HarnessConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline HarnessConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config " + path);
    return parse_config(in);
}

// ---------------------------------------------------------------- checks and reports

// One verified relation. For every relation, pass <=> slack >= 0:
//   "<="      slack = (rhs - lhs)/|rhs| + tol
//   "="       slack = tol - |lhs - rhs|/|rhs|
//   "plateau" lhs = relative drift, rhs = tol, slack = tol - drift
struct Check {
    std::string id, description, relation;
    double lhs = 0, rhs = 0, tol = 0, slack = 0;
    bool pass = false;
    std::string diagnostic;
    std::optional<double> runtime_ms;

    bool operator==(const Check&) const = default;
};

inline double rel_scale(double v) { return std::max(std::abs(v), std::numeric_limits<double>::min()); }

inline Check check_le(double lhs, double rhs, double tol = 0) {
    Check c;
    c.relation = "<=";
    c.lhs = lhs;
    c.rhs = rhs;
    c.tol = tol;
    if (std::isinf(rhs) && rhs > 0) c.slack = std::isnan(lhs) ? -1 : std::numeric_limits<double>::infinity();
    else c.slack = (rhs - lhs) / rel_scale(rhs) + tol;
    c.pass = std::isfinite(lhs) ? c.slack >= 0 : (std::isinf(rhs) && rhs > 0 && !std::isnan(lhs));
    if (std::isnan(c.slack)) c.pass = false;
    return c;
}

inline Check check_eq(double lhs, double rhs, double tol) {
    Check c;
    c.relation = "=";
    c.lhs = lhs;
    c.rhs = rhs;
    c.tol = tol;
    c.slack = tol - std::abs(lhs - rhs) / rel_scale(rhs);
    c.pass = std::isfinite(c.slack) && c.slack >= 0;
    return c;
}

// Relative drift (max - min)/max|.| of positive values.
inline Check check_plateau(const std::vector<double>& values, double tol) {
    Check c;
    c.relation = "plateau";
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    c.lhs = (hi - lo) / std::max(std::abs(lo), std::abs(hi));
    c.rhs = tol;
    c.tol = tol;
    c.slack = tol - c.lhs;
    c.pass = std::isfinite(c.slack) && c.slack >= 0 && lo > 0;
    std::ostringstream d;
    d << std::setprecision(10) << "values=";
    for (std::size_t i = 0; i < values.size(); ++i) d << (i ? "," : "") << values[i];
    c.diagnostic = d.str();
    return c;
}

struct ReportEnvironment {
    std::string params;  // tolerances and spacings in force
    double h = 0, h2 = 0;
    std::uint64_t seed = 0;
    std::string version = kVersion;

    bool operator==(const ReportEnvironment&) const = default;
};

struct VerificationReport {
    std::string suite;
    std::vector<Check> checks;
    ReportEnvironment environment;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return !checks.empty();
    }
    std::size_t failures() const {
        std::size_t n = 0;
        for (const auto& c : checks) n += !c.pass;
        return n;
    }
    bool operator==(const VerificationReport&) const = default;
};

inline std::string describe_config(const HarnessConfig& c) {
    std::ostringstream o;
    o << std::setprecision(12) << "h=" << c.h << ";h2=" << c.h2 << ";near_band=" << c.near_band << ";tol_exact=" << c.tol_exact
      << ";tol_discrete=" << c.tol_discrete << ";tol_discrete_2d=" << c.tol_discrete_for(2) << ";tol_plateau=" << c.tol_plateau
      << ";corpus_size=" << c.corpus_size << ";gamma_safety=" << c.gamma_safety;
    return o.str();
}

// ---------------------------------------------------------------- serialization

using ojson = nlohmann::ordered_json;

namespace detail {

// JSON has no infinities; they travel as strings.
inline ojson num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline double unnum(const ojson& j) {
    if (j.is_number()) return j.get<double>();
    auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ParseError("bad number in report: " + s);
}

}  // namespace detail

inline ojson to_json(const VerificationReport& r) {
    ojson j;
    j["suite"] = r.suite;
    j["pass"] = r.all_pass();
    j["failures"] = r.failures();
    ojson env;
    env["params"] = r.environment.params;
    env["h"] = r.environment.h;
    env["h2"] = r.environment.h2;
    env["seed"] = r.environment.seed;
    env["version"] = r.environment.version;
    j["environment"] = env;
    ojson arr = ojson::array();
    for (const auto& c : r.checks) {
        ojson o;
        o["id"] = c.id;
        o["description"] = c.description;
        o["relation"] = c.relation;
        o["lhs"] = detail::num(c.lhs);
        o["rhs"] = detail::num(c.rhs);
        o["tol"] = detail::num(c.tol);
        o["slack"] = detail::num(c.slack);
        o["pass"] = c.pass;
        o["diagnostic"] = c.diagnostic;
        if (c.runtime_ms) o["runtime_ms"] = *c.runtime_ms;
        arr.push_back(std::move(o));
    }
    j["checks"] = std::move(arr);
    return j;
}

inline VerificationReport report_from_json(const ojson& j) {
    try {
        VerificationReport r;
        r.suite = j.at("suite").get<std::string>();
        const auto& env = j.at("environment");
        r.environment.params = env.at("params").get<std::string>();
        r.environment.h = env.at("h").get<double>();
        r.environment.h2 = env.at("h2").get<double>();
        r.environment.seed = env.at("seed").get<std::uint64_t>();
        r.environment.version = env.at("version").get<std::string>();
        for (const auto& o : j.at("checks")) {
            Check c;
            c.id = o.at("id").get<std::string>();
            c.description = o.at("description").get<std::string>();
            c.relation = o.at("relation").get<std::string>();
            c.lhs = detail::unnum(o.at("lhs"));
            c.rhs = detail::unnum(o.at("rhs"));
            c.tol = detail::unnum(o.at("tol"));
            c.slack = detail::unnum(o.at("slack"));
            c.pass = o.at("pass").get<bool>();
            c.diagnostic = o.at("diagnostic").get<std::string>();
            if (o.contains("runtime_ms")) c.runtime_ms = o.at("runtime_ms").get<double>();
            r.checks.push_back(std::move(c));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed report: ") + e.what());
    }
}

inline std::string report_json_string(const VerificationReport& r) { return to_json(r).dump(2) + "\n"; }

inline VerificationReport report_from_string(const std::string& s) {
    try {
        return report_from_json(ojson::parse(s));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed report: ") + e.what());
    }
}

namespace detail {
inline std::string csv_field(const std::string& s) {
    std::string o = "\"";
    for (char ch : s) {
        if (ch == '"') o += '"';
        o += ch;
    }
    return o + "\"";
}
inline std::string csv_num(double v) {
    std::ostringstream o;
    o << std::setprecision(17) << v;
    return o.str();
}
}  // namespace detail

inline std::string report_csv(const VerificationReport& r) {
    std::ostringstream o;
    o << "suite,id,relation,lhs,rhs,tol,slack,pass,description,diagnostic\n";
    for (const auto& c : r.checks) {
        o << detail::csv_field(r.suite) << ',' << detail::csv_field(c.id) << ',' << detail::csv_field(c.relation) << ','
          << detail::csv_num(c.lhs) << ',' << detail::csv_num(c.rhs) << ',' << detail::csv_num(c.tol) << ',' << detail::csv_num(c.slack)
          << ',' << (c.pass ? "true" : "false") << ',' << detail::csv_field(c.description) << ',' << detail::csv_field(c.diagnostic)
          << '\n';
    }
    return o.str();
}

}  // namespace frac
