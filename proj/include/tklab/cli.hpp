#pragma once

/**
 * @file cli.hpp
 * @brief `tklab` command line: config ingestion, subcommand dispatch, emission.
 *
 * Exit codes: 0 success, 1 failed mathematical check, 2 invalid input.
 * Errors print one line on stderr. Flags override the config document
 * (see io.hpp for its schema). A single --range is repeated on every axis.
 */

#include "tklab/io.hpp"
#include "tklab/verify.hpp"

#include "CLI11.hpp"

#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace tklab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInput = 2;

/// Ordered key/value summary; vectors expand to key1..keyn in CSV.
class Record {
  public:
    Record& set(const std::string& key, Json value) {
        items_.emplace_back(key, std::move(value));
        return *this;
    }

    void write(std::ostream& os, OutputFormat format) const {
        if (format == OutputFormat::json) {
            Json o = Json::object();
            for (const auto& [k, v] : items_) o[k] = v;
            os << o.dump(2) << '\n';
            return;
        }
        std::vector<std::string> keys, values;
        for (const auto& [k, v] : items_) {
            if (v.is_array()) {
                for (std::size_t i = 0; i < v.size(); ++i) {
                    keys.push_back(k + std::to_string(i + 1));
                    values.push_back(cell(v[i]));
                }
            } else {
                keys.push_back(k);
                values.push_back(cell(v));
            }
        }
        for (std::size_t i = 0; i < keys.size(); ++i) os << (i ? "," : "") << keys[i];
        os << '\n';
        for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i];
        os << '\n';
    }

  private:
    static std::string cell(const Json& v) {
        if (v.is_number()) return format_real(v.get<double>());
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_string()) return v.get<std::string>();
        return v.dump();
    }

    std::vector<std::pair<std::string, Json>> items_;
};

/// Raw flag values; `given` tells which ones were passed.
struct Flags {
    std::string config, potential, field, out, format;
    int n = 0;
    std::vector<std::string> ranges, params;
    int quad_N = 0;
    double tol_psd = 0.0, tol_convex = 0.0, tol_gradient = 0.0, t_max = 0.0;
    std::string x, y, seed, direction, radii;
    int axis = 0;
    bool extends = false;
    bool negative_control = false;
};

namespace detail {

inline Params parse_params(const std::vector<std::string>& items) {
    Params p;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw InputError("parameter '" + item + "' is not key=value");
        const auto v = parse_list(item.substr(eq + 1));
        if (v.size() != 1) throw InputError("parameter '" + item + "' needs one number");
        p[item.substr(0, eq)] = v.front();
    }
    return p;
}

inline Json parse_field_flag(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const Json::exception&) {
        throw InputError("--field must be a JSON field descriptor");
    }
}

/// Config document overlaid with the flags that were given on the command line.
inline RunConfig resolve(const CLI::App& app, const Flags& f) {
    auto given = [&app](const char* name) {
        const CLI::Option* o = app.get_option_no_throw(name);
        return o != nullptr && o->count() > 0;
    };
    RunConfig c = given("--config") ? load_config(f.config) : RunConfig{};
    if (given("--n")) c.n = f.n;
    if (given("--potential")) {
        const bool same = c.potential && c.potential->kind == f.potential;
        c.potential = PotentialSpec{f.potential, c.potential ? c.potential->n : 1, same ? c.potential->params : Params{}};
    }
    if (given("--param")) {
        if (!c.potential) throw InputError("--param needs a potential");
        for (const auto& [k, v] : parse_params(f.params)) c.potential->params[k] = v;
    }
    if (c.potential && c.n) c.potential->n = *c.n;
    if (given("--field")) c.field = parse_field(parse_field_flag(f.field), c.n);
    if (c.field && c.n && given("--n")) c.field->n = *c.n;
    if (given("--range")) {
        c.region.clear();
        for (const auto& r : f.ranges) c.region.push_back(parse_range(r));
    }
    if (given("--quad-N")) c.quad_N = f.quad_N;
    if (given("--tol-psd")) c.tol_psd = f.tol_psd;
    if (given("--tol-convex")) c.tol_convex = f.tol_convex;
    if (given("--tol-gradient")) c.tol_gradient = f.tol_gradient;
    if (given("--out")) c.out = f.out;
    if (given("--format")) c.format = parse_format(f.format);
    if (given("--x")) c.x = parse_list(f.x);
    if (given("--y")) c.y = parse_list(f.y);
    if (given("--seed")) c.seed = parse_list(f.seed);
    if (given("--direction")) c.direction = parse_list(f.direction);
    if (given("--radii")) c.radii = parse_list(f.radii);
    if (given("--t-max")) c.t_max = f.t_max;
    if (given("--axis")) c.axis = f.axis;
    if (given("--extends")) c.extends = true;
    validate(c);
    return c;
}

inline InvariantPotential require_potential(const RunConfig& c) {
    if (!c.potential) throw InputError("this subcommand needs --potential");
    return c.potential->build();
}

/// The configured field, or the pullback of the configured potential.
inline PeriodicScalarField require_field(const RunConfig& c) {
    if (c.field) return make_periodic_field(*c.field);
    if (c.potential) return field::pullback(c.potential->build());
    throw InputError("this subcommand needs --field or --potential");
}

inline Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

inline Vec point_or_zero(const std::optional<std::vector<double>>& v, int n, const char* what) {
    if (!v) return Vec::Zero(n);
    if (static_cast<int>(v->size()) != n) throw InputError(std::string(what) + " must have one entry per dimension");
    return to_vec(*v);
}

inline std::vector<AxisRange> ranges_for(const RunConfig& c, int n) {
    if (c.region.empty()) throw InputError("this subcommand needs --range");
    if (c.region.size() == 1) return std::vector<AxisRange>(static_cast<std::size_t>(n), c.region.front());
    if (static_cast<int>(c.region.size()) != n) throw InputError("give one --range per axis, or a single one for all");
    return c.region;
}

inline Grid grid_for(const RunConfig& c, int n) {
    const auto r = ranges_for(c, n);
    return Grid::from_ranges(r);
}

inline Box box_for(const RunConfig& c, int n) {
    Box b;
    for (const auto& r : ranges_for(c, n)) b.axes.push_back({r.min, r.max});
    return b;
}

inline Json json_vec(const Vec& v) { return to_json(v); }

template <typename F>
double average_with(const F& f, const Vec& x, int n, const std::optional<int>& quad_N) {
    if (quad_N) return torus_quadrature(f, x, QuadratureRule(n, *quad_N)) / std::pow(kTwoPi, n);
    return torus_average(f, x);
}

inline void emit(const RunConfig& c, const Table& t) {
    write_output(c.out, [&](std::ostream& os) { t.write(os, c.format); });
}

inline void emit(const RunConfig& c, const Record& r) {
    write_output(c.out, [&](std::ostream& os) { r.write(os, c.format); });
}

/// Mathematical failure: one diagnostic line, exit 1.
inline int check_failed(const std::string& what) {
    std::cerr << "tklab: check failed: " << what << '\n';
    return kExitCheckFailed;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

/// Levi form at (x, y), or its trace and spectrum over the region at angle y.
inline int cmd_levi(const RunConfig& c) {
    const auto f = detail::require_field(c);
    const int n = f.dimension();
    const Vec y = detail::point_or_zero(c.y, n, "--y");
    if (c.x) {
        const Vec x = detail::point_or_zero(c.x, n, "--x");
        const LeviForm L = levi_form(f, x, y);
        Record r;
        r.set("x", detail::json_vec(x)).set("y", detail::json_vec(y)).set("trace", L.trace());
        r.set("eigenvalues", detail::json_vec(L.eigenvalues()));
        if (c.format == OutputFormat::json) r.set("matrix", to_json(L.matrix));
        detail::emit(c, r);
        return kExitOk;
    }
    const Grid g = detail::grid_for(c, n);
    Table t;
    t.columns = indexed("x", n);
    for (auto& s : indexed("y", n)) t.columns.push_back(std::move(s));
    for (const char* s : {"trace", "lambda_min", "lambda_max"}) t.columns.emplace_back(s);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec x = g.point(i);
        const LeviForm L = levi_form(f, x, y);
        const Vec ev = L.eigenvalues();
        std::vector<double> row(x.data(), x.data() + n);
        row.insert(row.end(), y.data(), y.data() + n);
        for (double v : {L.trace(), ev[0], ev[ev.size() - 1]}) row.push_back(v);
        t.rows.push_back(std::move(row));
    }
    detail::emit(c, t);
    return kExitOk;
}

inline int cmd_psh_check(const RunConfig& c) {
    const auto f = detail::require_field(c);
    const int n = f.dimension();
    const PshReport p = is_psh(f, detail::grid_for(c, n), 8, c.tol_psd);
    Record r;
    r.set("psh", p.holds).set("min_eigenvalue", p.min_eigenvalue).set("tolerance", p.tolerance);
    r.set("points", p.points_checked).set("witness_x", detail::json_vec(p.witness_x));
    r.set("witness_y", detail::json_vec(p.witness_y));
    detail::emit(c, r);
    return p.holds ? kExitOk : detail::check_failed("field is not plurisubharmonic on the region");
}

/**
 * G(x) over the grid. With --extends the field is declared to extend PSH
 * across z_axis = 0 and G is instead checked non-decreasing along that axis
 * through --x.
 */
inline int cmd_average(const RunConfig& c) {
    const auto f = detail::require_field(c);
    const int n = f.dimension();
    if (c.extends) {
        if (c.axis > n) throw InputError("--axis exceeds the dimension");
        const auto ranges = detail::ranges_for(c, n);
        const MonotoneReport m = monotone_in_radius(f, c.axis - 1, ranges[static_cast<std::size_t>(c.axis - 1)],
                                                    detail::point_or_zero(c.x, n, "--x"), true);
        Table t;
        t.columns = {"x_axis", "G"};
        for (std::size_t i = 0; i < m.xs.size(); ++i) t.rows.push_back({m.xs[i], m.values[i]});
        detail::emit(c, t);
        return m.non_decreasing ? kExitOk
                                : detail::check_failed("G decreases along the axis by " + tklab::detail::sci(m.largest_drop));
    }
    const Grid g = detail::grid_for(c, n);
    Table t;
    t.columns = indexed("x", n);
    t.columns.emplace_back("G");
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec x = g.point(i);
        std::vector<double> row(x.data(), x.data() + n);
        row.push_back(detail::average_with(f, x, n, c.quad_N));
        t.rows.push_back(std::move(row));
    }
    detail::emit(c, t);
    return kExitOk;
}

/// M(x) over the grid, or with --radii the distinguished-boundary maximum on that polydisk.
inline int cmd_hadamard(const RunConfig& c) {
    const auto f = detail::require_field(c);
    const int n = f.dimension();
    if (c.radii) {
        const BoundaryMaxReport b = distinguished_boundary_max(f, detail::point_or_zero(c.radii, n, "--radii"));
        Record r;
        r.set("interior_max", b.interior_max).set("boundary_max", b.boundary_max);
        r.set("boundary_angle", detail::json_vec(b.boundary_angle)).set("holds", b.holds);
        detail::emit(c, r);
        return b.holds ? kExitOk : detail::check_failed("interior exceeds the distinguished boundary");
    }
    const Grid g = detail::grid_for(c, n);
    Table t;
    t.columns = indexed("x", n);
    t.columns.emplace_back("M");
    for (auto& s : indexed("y", n)) t.columns.push_back(std::move(s));
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec x = g.point(i);
        const HadamardResult m = hadamard_max(f, x);
        std::vector<double> row(x.data(), x.data() + n);
        row.push_back(m.value);
        row.insert(row.end(), m.angle.data(), m.angle.data() + n);
        t.rows.push_back(std::move(row));
    }
    detail::emit(c, t);
    return kExitOk;
}

/// Ricci eigenvalues of a potential, or of a general density H given as a field.
inline int cmd_ricci(const RunConfig& c) {
    Table t;
    if (c.field) {
        const auto H = make_periodic_field(*c.field);
        const int n = H.dimension();
        const Vec y = detail::point_or_zero(c.y, n, "--y");
        const Grid g = detail::grid_for(c, n);
        t.columns = indexed("x", n);
        for (const char* s : {"ric_min", "ric_max"}) t.columns.emplace_back(s);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Vec x = g.point(i);
            const Vec ev = 0.5 * ricci_general(H, x, y).eigenvalues();
            std::vector<double> row(x.data(), x.data() + n);
            row.push_back(ev[0]);
            row.push_back(ev[ev.size() - 1]);
            t.rows.push_back(std::move(row));
        }
    } else {
        const auto phi = detail::require_potential(c);
        const int n = phi.dimension();
        const Grid g = detail::grid_for(c, n);
        t.columns = indexed("x", n);
        for (const char* s : {"H", "ric_min", "ric_max"}) t.columns.emplace_back(s);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Vec x = g.point(i);
            const RicciAtPoint r = ricci_form(phi, x);
            std::vector<double> row(x.data(), x.data() + n);
            for (double v : {metric_at(phi, x).H, r.lambda_min, r.lambda_max}) row.push_back(v);
            t.rows.push_back(std::move(row));
        }
    }
    detail::emit(c, t);
    return kExitOk;
}

/// Ricci sign on the box cross-tabulated against the shape of log Vol.
inline int cmd_classify(const RunConfig& c) {
    const auto phi = detail::require_potential(c);
    ConvexityOptions opt;
    opt.tol = c.tol_convex;
    const ConsistencyReport rep = consistency_theorem(phi, detail::box_for(c, phi.dimension()), opt);
    Record r;
    r.set("potential", phi.name()).set("ricci", to_string(rep.ricci.tag));
    r.set("ricci_min", rep.ricci.lambda_min).set("ricci_max", rep.ricci.lambda_max);
    r.set("logvol", to_string(rep.logvol.tag)).set("vol", to_string(rep.vol.tag));
    r.set("inv_vol", to_string(rep.inv_vol.tag)).set("table_holds", rep.table_holds);
    r.set("implications_hold", rep.implications_hold).set("pass", rep.pass);
    detail::emit(c, r);
    return rep.pass ? kExitOk : detail::check_failed(rep.detail);
}

inline int cmd_volume(const RunConfig& c) {
    if (c.field) {
        const auto H = make_periodic_field(*c.field);
        const int n = H.dimension();
        const Grid g = detail::grid_for(c, n);
        const Grid ys = angle_grid(n, 8);
        OrbitProfile p;
        p.potential = H.label();
        p.n = n;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Vec x = g.point(i);
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (std::size_t j = 0; j < ys.size(); ++j) {
                const Vec ev = 0.5 * ricci_general(H, x, ys.point(j)).eigenvalues();
                lo = std::min(lo, ev[0]);
                hi = std::max(hi, ev[ev.size() - 1]);
            }
            const double v = c.quad_N ? j_volume_general(H, x, QuadratureRule(n, *c.quad_N)) : j_volume_general(H, x);
            p.points.push_back(x);
            p.H.push_back(detail::average_with(H, x, n, c.quad_N));
            p.vol.push_back(v);
            p.logvol.push_back(std::log(v));
            p.ric_min.push_back(lo);
            p.ric_max.push_back(hi);
        }
        write_output(c.out, [&](std::ostream& os) { emit_profile(p, c.format, os); });
        return kExitOk;
    }
    const auto phi = detail::require_potential(c);
    const OrbitProfile p = sample_profile(phi, detail::grid_for(c, phi.dimension()));
    write_output(c.out, [&](std::ostream& os) { emit_profile(p, c.format, os); });
    return kExitOk;
}

inline int cmd_critical(const RunConfig& c) {
    const auto phi = detail::require_potential(c);
    const int n = phi.dimension();
    const Box region = c.region.empty() ? Box::cube(n, -3.0, 3.0) : detail::box_for(c, n);
    CriticalOptions opt;
    opt.gradient_tol = c.tol_gradient;
    const CriticalOrbitResult res = find_critical_orbit(phi, detail::point_or_zero(c.seed, n, "--seed"), region, opt);
    Record r;
    r.set("x", detail::json_vec(res.x)).set("vol", res.vol).set("gradient_norm", res.gradient_norm);
    r.set("iterations", res.iterations).set("certificate", to_string(res.certificate));
    r.set("unique", res.unique).set("converged", res.converged);
    detail::emit(c, r);
    return res.converged ? kExitOk : detail::check_failed("Newton ascent did not reach the gradient tolerance");
}

/// mu over the grid with the Hamiltonian residual; fails above 1e-6.
inline int cmd_moment(const RunConfig& c) {
    const auto phi = detail::require_potential(c);
    const int n = phi.dimension();
    Table t;
    t.columns = indexed("x", n);
    for (auto& s : indexed("mu", n)) t.columns.push_back(std::move(s));
    t.columns.emplace_back("residual");
    std::vector<Vec> points;
    if (c.x) {
        points.push_back(detail::point_or_zero(c.x, n, "--x"));
    } else {
        const Grid g = detail::grid_for(c, n);
        for (std::size_t i = 0; i < g.size(); ++i) points.push_back(g.point(i));
    }
    double worst = 0.0;
    for (const Vec& x : points) {
        const Vec mu = moment_map(phi, x);
        const double res = hamiltonian_residual(phi, x);
        worst = std::max(worst, res);
        std::vector<double> row(x.data(), x.data() + n);
        row.insert(row.end(), mu.data(), mu.data() + n);
        row.push_back(res);
        t.rows.push_back(std::move(row));
    }
    detail::emit(c, t);
    return worst <= 1e-6 ? kExitOk : detail::check_failed("Hamiltonian residual " + tklab::detail::sci(worst) + " exceeds 1e-6");
}

inline int cmd_decay(const RunConfig& c) {
    const auto phi = detail::require_potential(c);
    const int n = phi.dimension();
    const Vec d = c.direction ? detail::point_or_zero(c.direction, n, "--direction") : unit(n, 0);
    const DecayReport rep = boundary_decay(phi, d, c.t_max);
    Table t;
    t.columns = {"t", "vol"};
    for (std::size_t i = 0; i < rep.ts.size(); ++i) t.rows.push_back({rep.ts[i], rep.vols[i]});
    detail::emit(c, t);
    if (rep.holds) return kExitOk;
    return detail::check_failed("Vol(T d)/Vol(0) = " + tklab::detail::sci(rep.ratio) +
                                (rep.monotone_tail ? "" : ", tail not decreasing"));
}

inline int cmd_verify(const RunConfig& c, bool negative_control) {
    VerifyOptions opt;
    opt.corrupt_fubini_study = negative_control;
    const VerifyReport rep = verify_battery(opt);
    write_output(c.out, [&](std::ostream& os) { os << render(rep); });
    if (rep.pass) return kExitOk;
    return detail::check_failed(std::to_string(rep.failures()) + " verify rows failed");
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline void add_common_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON run configuration");
    sub->add_option("--potential", f.potential, "catalog potential name");
    sub->add_option("--param", f.params, "potential parameter key=value (repeatable)");
    sub->add_option("--field", f.field, "JSON field descriptor");
    sub->add_option("--n", f.n, "dimension");
    sub->add_option("--range", f.ranges, "axis range min:max:step (repeatable)");
    sub->add_option("--quad-N", f.quad_N, "fixed quadrature nodes per angle");
    sub->add_option("--tol-psd", f.tol_psd, "PSH tolerance");
    sub->add_option("--tol-convex", f.tol_convex, "convexity tolerance");
    sub->add_option("--tol-gradient", f.tol_gradient, "Newton gradient tolerance");
    sub->add_option("--out", f.out, "output path (stdout if absent)");
    sub->add_option("--format", f.format, "csv or json");
}

inline int run(int argc, const char* const* argv) {
    CLI::App app{"Torus-invariant Kahler geometry toolkit"};
    app.require_subcommand(1);
    Flags f;
    using Handler = std::function<int(const RunConfig&)>;
    std::map<std::string, std::pair<CLI::App*, Handler>> subs;
    auto add = [&](const std::string& name, const std::string& help, Handler h) {
        CLI::App* s = app.add_subcommand(name, help);
        add_common_flags(s, f);
        subs[name] = {s, std::move(h)};
        return s;
    };
    CLI::App* levi = add("levi", "Levi form of a field", cmd_levi);
    levi->add_option("--x", f.x, "point x1,...,xn");
    levi->add_option("--y", f.y, "angle y1,...,yn");
    add("psh-check", "plurisubharmonicity on a grid", cmd_psh_check);
    CLI::App* average = add("average", "torus average G over a grid", cmd_average);
    average->add_option("--x", f.x, "base point for the radial check");
    average->add_option("--axis", f.axis, "axis of the radial check (1-based)");
    average->add_flag("--extends", f.extends, "field extends PSH across z_axis = 0");
    add("hadamard", "torus maximum M over a grid", cmd_hadamard)->add_option("--radii", f.radii, "polydisk radii");
    add("ricci", "Ricci eigenvalues over a grid", cmd_ricci)->add_option("--y", f.y, "angle for general densities");
    add("classify", "Ricci sign against the shape of log Vol", cmd_classify);
    add("volume", "orbit volume profile", cmd_volume);
    add("critical", "critical orbit by Newton ascent on log Vol", cmd_critical)->add_option("--seed", f.seed, "start");
    add("moment", "moment map and Hamiltonian residual", cmd_moment)->add_option("--x", f.x, "single point");
    CLI::App* decay = add("decay", "volume decay along a ray", cmd_decay);
    decay->add_option("--direction", f.direction, "ray direction d1,...,dn");
    decay->add_option("--t-max", f.t_max, "ray length");
    CLI::App* verify = add("verify", "run the verification battery", nullptr);
    verify->add_flag("--negative-control", f.negative_control, "corrupt fubini_study to exercise failure");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "tklab: " << e.what() << '\n';
        return kExitInput;
    }

    try {
        for (const auto& [name, entry] : subs) {
            const auto& [sub, handler] = entry;
            if (!sub->parsed()) continue;
            const RunConfig c = detail::resolve(*sub, f);
            if (name == "verify") return cmd_verify(c, f.negative_control);
            return handler(c);
        }
    } catch (const InputError& e) {
        std::cerr << "tklab: invalid input: " << e.what() << '\n';
        return kExitInput;
    } catch (const NotKahlerError& e) {
        return detail::check_failed(e.what());
    } catch (const std::exception& e) {
        return detail::check_failed(e.what());
    }
    return kExitInput;
}

}  // namespace tklab::cli
