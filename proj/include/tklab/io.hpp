#pragma once

/**
 * @file io.hpp
 * @brief Run configuration (JSON), descriptor parsing and profile emission.
 *
 * Config document, every key optional:
 *
 *   {
 *     "potential": {"kind": "fubini_study", "n": 2, "params": {"scale": 1}},
 *     "field": {"kind": "laurent_abs2", "n": 1,
 *               "coeffs": [{"c": 1, "k": [0]}, {"c": [0.5, 0], "k": [1]}]},
 *     "region": ["-3:3:0.1", {"min": -3, "max": 3, "step": 0.1}],
 *     "quad_N": 64,
 *     "tolerances": {"psd": 1e-8, "convexity": 1e-6, "gradient": 1e-10},
 *     "output": {"path": "out.csv", "format": "csv"},
 *     "x": [0.0], "y": [0.0], "seed": [1.7], "direction": [1], "t_max": 20,
 *     "radii": [1.0], "axis": 1, "extends": true
 *   }
 *
 * Field kinds: pullback (with "potential" name and optional "params"),
 * laurent_re, laurent_im, laurent_abs2, laurent_log_abs (needs
 * "zero_free_box": [[lo, hi], ...]) and sum ("terms": [{"weight": w,
 * "field": {...}}]). Coefficients are a real number or [re, im].
 */

#include "tklab/orbitvol.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace tklab {

using Json = nlohmann::ordered_json;  // keeps column order in output

struct PotentialSpec {
    std::string kind;
    int n = 1;
    Params params;

    [[nodiscard]] InvariantPotential build() const { return make_builtin_potential(kind, n, params); }
};

enum class OutputFormat { csv, json };

struct RunConfig {
    std::optional<PotentialSpec> potential;
    std::optional<FieldDescriptor> field;
    std::optional<int> n;
    std::vector<AxisRange> region;
    std::optional<int> quad_N;
    double tol_psd = 1e-8;
    double tol_convex = 1e-6;
    double tol_gradient = 1e-10;
    std::optional<std::string> out;
    OutputFormat format = OutputFormat::csv;

    // Subcommand inputs.
    std::optional<std::vector<double>> x, y, seed, direction, radii;
    double t_max = 20.0;
    int axis = 1;  ///< 1-based
    bool extends = false;
};

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

/// "a:b:s" with s > 0 and a < b.
inline AxisRange parse_range(const std::string& text) {
    AxisRange r;
    char c1 = 0, c2 = 0;
    std::istringstream is(text);
    if (!(is >> r.min >> c1 >> r.max >> c2 >> r.step) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof())
        throw InputError("range '" + text + "' is not of the form min:max:step");
    if (!(r.step > 0.0)) throw InputError("range '" + text + "' needs a positive step");
    if (!(r.min < r.max)) throw InputError("range '" + text + "' needs min < max");
    return r;
}

/// Comma-separated reals, e.g. "0.5,-1".
inline std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw InputError("'" + text + "' is not a comma-separated list of numbers");
        }
        if (used != item.size()) throw InputError("'" + text + "' is not a comma-separated list of numbers");
        out.push_back(v);
    }
    if (out.empty()) throw InputError("empty numeric list");
    return out;
}

namespace detail {

inline double json_number(const Json& j, const std::string& what) {
    if (!j.is_number()) throw InputError(what + " must be a number");
    return j.get<double>();
}

inline int json_int(const Json& j, const std::string& what) {
    if (!j.is_number_integer()) throw InputError(what + " must be an integer");
    return j.get<int>();
}

inline std::vector<double> json_reals(const Json& j, const std::string& what) {
    if (!j.is_array()) throw InputError(what + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) out.push_back(json_number(v, what));
    return out;
}

inline Params json_params(const Json& j) {
    if (!j.is_object()) throw InputError("params must be an object of numbers");
    Params p;
    for (const auto& [k, v] : j.items()) p[k] = json_number(v, "parameter '" + k + "'");
    return p;
}

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) throw InputError("unknown key '" + k + "' in " + where);
    }
}

}  // namespace detail

inline PotentialSpec parse_potential(const Json& j) {
    if (j.is_string()) return {j.get<std::string>(), 1, {}};
    if (!j.is_object()) throw InputError("potential descriptor must be an object");
    detail::check_keys(j, {"kind", "n", "params"}, "potential descriptor");
    if (!j.contains("kind") || !j["kind"].is_string()) throw InputError("potential descriptor needs a string 'kind'");
    PotentialSpec s;
    s.kind = j["kind"].get<std::string>();
    if (j.contains("n")) s.n = detail::json_int(j["n"], "n");
    if (j.contains("params")) s.params = detail::json_params(j["params"]);
    if (s.n < 1) throw InputError("dimension must be at least 1");
    return s;
}

inline FieldKind parse_field_kind(const std::string& s) {
    if (s == "pullback") return FieldKind::pullback;
    if (s == "laurent_re") return FieldKind::laurent_re;
    if (s == "laurent_im") return FieldKind::laurent_im;
    if (s == "laurent_abs2") return FieldKind::laurent_abs2;
    if (s == "laurent_log_abs") return FieldKind::laurent_log_abs;
    if (s == "sum") return FieldKind::sum;
    throw InputError("unknown field kind '" + s + "'");
}

inline FieldDescriptor parse_field(const Json& j, std::optional<int> default_n = std::nullopt) {
    if (!j.is_object()) throw InputError("field descriptor must be an object");
    detail::check_keys(j, {"kind", "n", "potential", "params", "coeffs", "zero_free_box", "terms"}, "field descriptor");
    if (!j.contains("kind") || !j["kind"].is_string()) throw InputError("field descriptor needs a string 'kind'");
    FieldDescriptor d;
    d.kind = parse_field_kind(j["kind"].get<std::string>());
    d.n = j.contains("n") ? detail::json_int(j["n"], "n") : default_n.value_or(1);
    if (d.n < 1) throw InputError("dimension must be at least 1");
    if (j.contains("potential")) {
        if (!j["potential"].is_string()) throw InputError("field 'potential' must be a catalog name");
        d.potential = j["potential"].get<std::string>();
    }
    if (j.contains("params")) d.potential_params = detail::json_params(j["params"]);
    if (j.contains("coeffs")) {
        if (!j["coeffs"].is_array()) throw InputError("'coeffs' must be an array");
        for (const auto& t : j["coeffs"]) {
            if (!t.is_object() || !t.contains("c") || !t.contains("k"))
                throw InputError("each coefficient needs 'c' and 'k'");
            detail::check_keys(t, {"c", "k"}, "coefficient");
            LaurentTerm term;
            if (t["c"].is_array()) {
                const auto c = detail::json_reals(t["c"], "coefficient c");
                if (c.size() != 2) throw InputError("complex coefficient must be [re, im]");
                term.c = {c[0], c[1]};
            } else {
                term.c = detail::json_number(t["c"], "coefficient c");
            }
            if (!t["k"].is_array()) throw InputError("exponent 'k' must be an integer array");
            for (const auto& k : t["k"]) term.k.push_back(detail::json_int(k, "exponent entry"));
            d.coeffs.push_back(std::move(term));
        }
    }
    if (j.contains("zero_free_box")) {
        const auto& b = j["zero_free_box"];
        if (!b.is_array()) throw InputError("'zero_free_box' must be [[lo, hi], ...]");
        Box box;
        for (const auto& iv : b) {
            const auto v = detail::json_reals(iv, "zero_free_box interval");
            if (v.size() != 2 || !(v[0] < v[1])) throw InputError("zero_free_box intervals must be [lo, hi] with lo < hi");
            box.axes.push_back({v[0], v[1]});
        }
        d.zero_free_box = box;
    }
    if (j.contains("terms")) {
        if (!j["terms"].is_array()) throw InputError("'terms' must be an array");
        for (const auto& t : j["terms"]) {
            if (!t.is_object() || !t.contains("field")) throw InputError("each sum term needs a 'field'");
            detail::check_keys(t, {"weight", "field"}, "sum term");
            const double w = t.contains("weight") ? detail::json_number(t["weight"], "weight") : 1.0;
            d.terms.emplace_back(w, parse_field(t["field"], d.n));
        }
    }
    return d;
}

inline OutputFormat parse_format(const std::string& s) {
    if (s == "csv") return OutputFormat::csv;
    if (s == "json") return OutputFormat::json;
    throw InputError("format must be csv or json, got '" + s + "'");
}

inline AxisRange parse_range_json(const Json& j) {
    if (j.is_string()) return parse_range(j.get<std::string>());
    if (!j.is_object()) throw InputError("region entries must be \"min:max:step\" or {min, max, step}");
    detail::check_keys(j, {"min", "max", "step"}, "region entry");
    AxisRange r{detail::json_number(j.value("min", Json()), "region min"),
                detail::json_number(j.value("max", Json()), "region max"),
                detail::json_number(j.value("step", Json()), "region step")};
    if (!(r.step > 0.0)) throw InputError("region step must be positive");
    if (!(r.min < r.max)) throw InputError("region needs min < max");
    return r;
}

/// Parse a config document. Keys not listed in the schema are rejected.
inline RunConfig parse_config(const Json& j) {
    if (!j.is_object()) throw InputError("config must be a JSON object");
    detail::check_keys(j,
                       {"potential", "field", "n", "region", "quad_N", "tolerances", "output", "x", "y", "seed",
                        "direction", "t_max", "radii", "axis", "extends"},
                       "config");
    RunConfig c;
    if (j.contains("n")) c.n = detail::json_int(j["n"], "n");
    if (j.contains("potential")) c.potential = parse_potential(j["potential"]);
    if (j.contains("field")) c.field = parse_field(j["field"], c.n);
    if (j.contains("region")) {
        if (!j["region"].is_array()) throw InputError("'region' must be an array with one entry per axis");
        for (const auto& r : j["region"]) c.region.push_back(parse_range_json(r));
    }
    if (j.contains("quad_N")) c.quad_N = detail::json_int(j["quad_N"], "quad_N");
    if (j.contains("tolerances")) {
        const auto& t = j["tolerances"];
        if (!t.is_object()) throw InputError("'tolerances' must be an object");
        detail::check_keys(t, {"psd", "convexity", "gradient"}, "tolerances");
        if (t.contains("psd")) c.tol_psd = detail::json_number(t["psd"], "tolerances.psd");
        if (t.contains("convexity")) c.tol_convex = detail::json_number(t["convexity"], "tolerances.convexity");
        if (t.contains("gradient")) c.tol_gradient = detail::json_number(t["gradient"], "tolerances.gradient");
    }
    if (j.contains("output")) {
        const auto& o = j["output"];
        if (!o.is_object()) throw InputError("'output' must be an object");
        detail::check_keys(o, {"path", "format"}, "output");
        if (o.contains("path")) {
            if (!o["path"].is_string()) throw InputError("output path must be a string");
            c.out = o["path"].get<std::string>();
        }
        if (o.contains("format")) {
            if (!o["format"].is_string()) throw InputError("output format must be a string");
            c.format = parse_format(o["format"].get<std::string>());
        }
    }
    for (auto [key, slot] : {std::pair{"x", &c.x}, std::pair{"y", &c.y}, std::pair{"seed", &c.seed},
                             std::pair{"direction", &c.direction}, std::pair{"radii", &c.radii}})
        if (j.contains(key)) *slot = detail::json_reals(j[key], key);
    if (j.contains("t_max")) c.t_max = detail::json_number(j["t_max"], "t_max");
    if (j.contains("axis")) c.axis = detail::json_int(j["axis"], "axis");
    if (j.contains("extends")) {
        if (!j["extends"].is_boolean()) throw InputError("'extends' must be a boolean");
        c.extends = j["extends"].get<bool>();
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config '" + path + "'");
    try {
        return parse_config(Json::parse(in));
    } catch (const Json::exception& e) {
        throw InputError("config '" + path + "' is not valid JSON: " + e.what());
    }
}

/// Invariants every subcommand relies on.
inline void validate(const RunConfig& c) {
    for (const auto& r : c.region) {
        if (!(r.step > 0.0)) throw InputError("region step must be positive");
        if (!(r.min < r.max)) throw InputError("region needs min < max on every axis");
    }
    if (c.quad_N) {
        const int N = *c.quad_N;
        if (N < 4 || N > 1024 || (N & (N - 1)) != 0) throw InputError("quad_N must be a power of two in [4, 1024]");
    }
    for (double t : {c.tol_psd, c.tol_convex, c.tol_gradient})
        if (!(t > 0.0) || !std::isfinite(t)) throw InputError("tolerances must be positive");
    if (c.axis < 1) throw InputError("axis is 1-based");
    if (!(c.t_max > 0.0)) throw InputError("t_max must be positive");
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

/// 17 significant digits: round-trips every double.
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Column-oriented table rendered as CSV or as a JSON array of row objects.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void write(std::ostream& os, OutputFormat format) const {
        if (format == OutputFormat::csv) {
            for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
            os << '\n';
            for (const auto& row : rows) {
                for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_real(row[c]);
                os << '\n';
            }
            return;
        }
        Json arr = Json::array();
        for (const auto& row : rows) {
            Json o = Json::object();
            for (std::size_t c = 0; c < row.size(); ++c) o[columns[c]] = row[c];
            arr.push_back(std::move(o));
        }
        os << arr.dump(2) << '\n';
    }
};

inline std::vector<std::string> indexed(const std::string& stem, int n) {
    std::vector<std::string> out;
    for (int i = 1; i <= n; ++i) out.push_back(stem + std::to_string(i));
    return out;
}

/// x1..xn, H, vol, logvol, ric_min, ric_max, mu1..mun (mu only when present).
inline Table profile_table(const OrbitProfile& p) {
    if (p.size() == 0) throw InputError("profile is empty");
    Table t;
    t.columns = indexed("x", p.n);
    for (const char* c : {"H", "vol", "logvol", "ric_min", "ric_max"}) t.columns.emplace_back(c);
    const bool has_mu = !p.mu.empty();
    if (has_mu)
        for (auto& m : indexed("mu", p.n)) t.columns.push_back(std::move(m));
    for (std::size_t i = 0; i < p.size(); ++i) {
        std::vector<double> row(p.points[i].data(), p.points[i].data() + p.n);
        for (double v : {p.H[i], p.vol[i], p.logvol[i], p.ric_min[i], p.ric_max[i]}) row.push_back(v);
        if (has_mu) row.insert(row.end(), p.mu[i].data(), p.mu[i].data() + p.n);
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline void emit_profile(const OrbitProfile& p, OutputFormat format, std::ostream& os) {
    profile_table(p).write(os, format);
}

/// Write to `path`, or to stdout when absent. Unwritable paths are input errors.
template <typename Writer>
void write_output(const std::optional<std::string>& path, Writer&& writer) {
    if (!path) {
        writer(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(*path);
    if (!out) throw InputError("cannot write output '" + *path + "'");
    writer(out);
    out.flush();
    if (!out) throw InputError("failed writing output '" + *path + "'");
}

inline Json to_json(const Vec& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Json to_json(const Mat& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json r = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Json to_json(const ConvexityVerdict& v) {
    Json w = Json::array();
    for (const auto& x : v.witnesses) w.push_back({{"kind", x.kind}, {"point", to_json(x.point)}, {"value", x.value}});
    return {{"tag", to_string(v.tag)},
            {"tolerance", v.tolerance},
            {"hessian_min", v.hessian_min},
            {"hessian_max", v.hessian_max},
            {"midpoint_excess_min", v.midpoint_excess_min},
            {"midpoint_excess_max", v.midpoint_excess_max},
            {"segments", v.segments},
            {"witnesses", w}};
}

inline Json to_json(const SignClassification& s) {
    return {{"tag", to_string(s.tag)},         {"tolerance", s.tolerance},
            {"lambda_min", s.lambda_min},      {"lambda_max", s.lambda_max},
            {"witness_min", to_json(s.witness_min)}, {"witness_max", to_json(s.witness_max)},
            {"points", s.points}};
}

}  // namespace tklab
