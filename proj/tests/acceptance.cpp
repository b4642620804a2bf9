/**
 * Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
 * Criteria that cannot be met are reported as FAIL with the measured values.
 */

#include "tklab/tklab.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace tklab;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

// ---------------------------------------------------------------------------

Outcome levi_oracle() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(kDefaultSeed);
    double worst_entry = 0.0;
    for (int s = 0; s < 50; ++s) {
        Mat h(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j) h(i, j) = h(j, i) = rng.uniform(-1.0, 1.0);
        // basis {x, xi, y, eta}
        const double a = h(0, 0) + h(2, 2), b = h(1, 1) + h(3, 3), c = h(0, 1) + h(2, 3), d = h(0, 3) - h(2, 1);
        Mat written(4, 4);
        written << a, c, 0, -d, c, b, d, 0, 0, d, a, c, -d, 0, c, b;
        written *= 0.5;
        worst_entry = std::max(worst_entry, (levi_form_from_hessian(h).matrix - written).cwiseAbs().maxCoeff());
    }
    o.require(worst_entry <= 1e-10, "matrix entry error " + sci(worst_entry));

    const auto fields = detail::psh_catalog(2);
    double worst_trace = 0.0;
    for (int s = 0; s < 1000; ++s) {
        const auto& f = fields[static_cast<std::size_t>(s) % fields.size()].field;
        const Vec x = rng.uniform_in(Box::cube(2, -3.0, 3.0));
        const Vec y = rng.uniform_in(Box::cube(2, 0.0, kTwoPi));
        const Jet2 j = f.jet(x, y);
        const double lap = j.hessian.trace();
        worst_trace = std::max(worst_trace, std::abs(levi_form(f, x, y).trace() - lap) / (1.0 + std::abs(lap)));
    }
    o.require(worst_trace <= 1e-9, "trace error " + sci(worst_trace));
    const double t = seconds_since(t0);
    o.require(t < 1.0, "runtime " + std::to_string(t) + " s");
    o.note("50 matrices max entry error " + sci(worst_entry) + ", 1000 traces max rel error " + sci(worst_trace) +
           ", " + sci(t) + " s");
    return o;
}

Outcome average_convexity() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    int checked = 0;
    for (int n : {1, 2, 3}) {
        for (const auto& cf : detail::psh_catalog(n)) {
            const auto v = check_convexity([&](const Vec& x) { return torus_average(cf.field, x); },
                                           Box::cube(n, -3.0, 3.0));
            o.require(is_convex(v.tag), cf.name + " n=" + std::to_string(n) + " " + to_string(v.tag));
            ++checked;
        }
    }
    const auto neg = field::laurent_abs2(1, {{1.0, {0}}, {1.0, {1}}}).scaled(-1.0);
    const auto v = check_convexity([&](const Vec& x) { return torus_average(neg, x); }, Box::cube(1, -3.0, 3.0));
    o.require(v.tag == ConvexityTag::indefinite || is_concave(v.tag), "negative control tagged " + to_string(v.tag));
    const double t = seconds_since(t0);
    o.require(t < 10.0, "runtime " + std::to_string(t) + " s");
    o.note(std::to_string(checked) + " fields convex on [-3,3]^n, -|1+z|^2 tagged " + to_string(v.tag) + ", " +
           sci(t) + " s");
    return o;
}

Outcome hadamard_monotone_boundary() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    int convex = 0, monotone = 0;
    for (int n : {1, 2, 3}) {
        for (const auto& cf : detail::psh_catalog(n)) {
            const auto v = check_convexity([&](const Vec& x) { return hadamard_max(cf.field, x).value; },
                                           Box::cube(n, -3.0, 3.0));
            o.require(is_convex(v.tag), "M of " + cf.name + " n=" + std::to_string(n) + " " + to_string(v.tag));
            ++convex;
            if (!cf.extends || n == 3) continue;
            for (int axis = 0; axis < n; ++axis)
                for (auto q : {RadialQuantity::average, RadialQuantity::maximum}) {
                    const auto r = monotone_in_radius(cf.field, axis, {-5.0, 2.0, 0.25}, Vec::Zero(n), true, q);
                    o.require(r.non_decreasing && r.kernel_consistent,
                              cf.name + " axis " + std::to_string(axis + 1) + " drop " + sci(r.largest_drop));
                    ++monotone;
                }
        }
    }
    Rng rng(kDefaultSeed);
    int disks = 0;
    for (int n : {1, 2}) {
        for (const auto& cf : detail::psh_catalog(n)) {
            for (int s = 0; s < 20; ++s) {
                const Vec r = rng.uniform_in(Box::cube(n, 0.0, 1.5)).array().exp().matrix();
                const auto rep = distinguished_boundary_max(cf.field, r);
                o.require(rep.holds, cf.name + " polydisk interior max exceeds boundary");
                ++disks;
            }
        }
    }
    const double t = seconds_since(t0);
    o.require(t < 10.0, "runtime " + std::to_string(t) + " s");
    o.note(std::to_string(convex) + " maxima convex, " + std::to_string(monotone) + " radial sweeps non-decreasing, " +
           std::to_string(disks) + " polydisks, " + sci(t) + " s");
    return o;
}

Outcome curvature() {
    Outcome o;
    const auto fs = make_builtin_potential("fubini_study", 1);
    double einstein = 0.0;
    for (double x = -3.0; x <= 3.0 + 1e-12; x += 0.01) {
        const double R = ricci_form(fs, v1(x)).R(0, 0);
        const double h = metric_at(fs, v1(x)).h(0, 0);
        einstein = std::max(einstein, std::abs(R - 2.0 * h) / (2.0 * h));
    }
    o.require(einstein <= 1e-8, "Einstein rel error " + sci(einstein));
    double flat = 0.0;
    for (int n : {1, 2, 3}) {
        const auto phi = make_builtin_potential("flat", n);
        Rng rng(kDefaultSeed);
        for (int s = 0; s < 200; ++s)
            flat = std::max(flat, ricci_form(phi, rng.uniform_in(Box::cube(n, -3.0, 3.0))).R.cwiseAbs().maxCoeff());
    }
    o.require(flat <= 1e-8, "flat |R| " + sci(flat));
    const double r0 = ricci_form(make_builtin_potential("cosh_neg", 1), v1(0.0)).R(0, 0);
    o.require(std::abs(r0 + 1.0) <= 1e-8, "cosh_neg R(0) = " + std::to_string(r0));
    o.note("R = 2h rel error " + sci(einstein) + ", flat |R| " + sci(flat) + ", cosh_neg R(0)+1 = " + sci(r0 + 1.0));
    return o;
}

Outcome volumes() {
    Outcome o;
    const auto flat = make_builtin_potential("flat", 1);
    const auto fs = make_builtin_potential("fubini_study", 1);
    double ef = 0.0, es = 0.0;
    for (double x = -5.0; x <= 5.0 + 1e-12; x += 0.05) {
        const double vf = 2.0 * kPi * std::exp(x), vs = kPi / std::cosh(x);
        ef = std::max(ef, std::abs(j_volume(flat, v1(x)) - vf) / vf);
        es = std::max(es, std::abs(j_volume(fs, v1(x)) - vs) / vs);
    }
    o.require(ef <= 1e-10, "flat rel error " + sci(ef));
    o.require(es <= 1e-9, "fubini_study rel error " + sci(es));
    const auto c = find_critical_orbit(fs, v1(1.7), Box::cube(1, -3.0, 3.0));
    o.require(c.converged && std::abs(c.x[0]) <= 1e-8, "x* = " + sci(c.x[0]));
    o.require(std::abs(c.vol - kPi) <= 1e-9, "Vol(x*) - pi = " + sci(c.vol - kPi));
    o.note("flat rel error " + sci(ef) + ", fubini_study rel error " + sci(es) + ", x* = " + sci(c.x[0]));
    return o;
}

Outcome equivalence_table() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    struct Expect {
        const char* name;
        SignTag ricci;
        ConvexityTag logvol;
    };
    const Expect rows[] = {{"fubini_study", SignTag::positive, ConvexityTag::strictly_concave},
                           {"flat", SignTag::zero, ConvexityTag::linear},
                           {"flat_cylinder", SignTag::zero, ConvexityTag::linear},
                           {"cosh_neg", SignTag::negative, ConvexityTag::strictly_convex}};
    int passed = 0;
    for (int n : {1, 2, 3}) {
        for (const auto& e : rows) {
            const auto r = consistency_theorem(make_builtin_potential(e.name, n), Box::cube(n, -3.0, 3.0));
            const bool ok = r.pass && r.ricci.tag == e.ricci && r.logvol.tag == e.logvol;
            o.require(ok, std::string(e.name) + " n=" + std::to_string(n) + ": " + r.detail);
            passed += ok;
        }
    }

    // Indefinite sum_exp witness: search c1 e^{2x} + c2 e^{-x} and three-term
    // members for a Ricci form taking both signs.
    int searched = 0;
    bool found = false;
    double largest = -std::numeric_limits<double>::infinity();
    for (double c1 : {0.01, 0.1, 1.0, 10.0, 100.0})
        for (double c2 : {0.01, 0.1, 1.0, 10.0, 100.0})
            for (double a2 : {-3.0, -1.0, -0.5, 0.5, 1.0}) {
                const auto phi = make_builtin_potential("sum_exp", 1, {{"c1", c1}, {"a1", 2.0}, {"c2", c2}, {"a2", a2}});
                const auto s = classify_ricci(phi, Box::cube(1, -3.0, 3.0));
                largest = std::max(largest, s.lambda_max);
                found = found || s.tag == SignTag::indefinite;
                ++searched;
            }
    Rng rng(kDefaultSeed);
    for (int s = 0; s < 40; ++s) {
        Params p;
        for (int k = 1; k <= 3; ++k) {
            p["c" + std::to_string(k)] = std::exp(rng.uniform(-3.0, 3.0));
            p["a" + std::to_string(k) + "_1"] = rng.uniform(-2.0, 2.0);
            p["a" + std::to_string(k) + "_2"] = rng.uniform(-2.0, 2.0);
        }
        const auto phi = make_builtin_potential("sum_exp", 2, p);
        const auto c = classify_ricci(phi, spaced_grid(Box::cube(2, -3.0, 3.0), 0.25));
        largest = std::max(largest, c.lambda_max);
        found = found || c.tag == SignTag::indefinite;
        ++searched;
    }
    o.require(found, "no indefinite sum_exp among " + std::to_string(searched) +
                         " members (largest Ricci eigenvalue " + sci(largest) +
                         "; positive coefficients force Ric <= 0)");

    const auto fq = consistency_theorem(make_builtin_potential("fs_quadratic", 1), Box::cube(1, -3.0, 3.0));
    const double t = seconds_since(t0);
    o.require(t < 30.0, "runtime " + std::to_string(t) + " s");
    o.note(std::to_string(passed) + "/12 named rows pass (n = 1..3); supplementary fs_quadratic: " + fq.detail +
           (fq.pass ? " (pass)" : " (fail)") + "; " + sci(t) + " s");
    return o;
}

Outcome critical_orbits() {
    Outcome o;
    for (int n : {1, 2}) {
        const auto phi = make_builtin_potential("fubini_study", n);
        const Box box = Box::cube(n, -3.0, 3.0);
        CriticalOptions opt;
        opt.ricci = classify_ricci(phi, box);
        Rng rng(kDefaultSeed + static_cast<std::uint64_t>(n));
        Vec first;
        double spread = 0.0;
        for (int s = 0; s < 10; ++s) {
            const auto r = find_critical_orbit(phi, rng.uniform_in(box), box, opt);
            o.require(r.converged && r.unique, "n=" + std::to_string(n) + " seed " + std::to_string(s) + " did not converge");
            if (s == 0) first = r.x;
            spread = std::max(spread, (r.x - first).cwiseAbs().maxCoeff());
        }
        o.require(spread <= 1e-6, "n=" + std::to_string(n) + " spread " + sci(spread));
        if (n == 2) o.require(first.cwiseAbs().maxCoeff() <= 1e-8, "n=2 maximizer off origin by " + sci(first.cwiseAbs().maxCoeff()));
        o.note("n=" + std::to_string(n) + " spread " + sci(spread) + ", |x*| " + sci(first.cwiseAbs().maxCoeff()));
    }
    return o;
}

Outcome moment() {
    Outcome o;
    double worst = 0.0;
    int entries = 0;
    Rng rng(kDefaultSeed);
    for (int n : {1, 2, 3})
        for (const char* name : {"flat", "flat_cylinder", "fubini_study", "cosh_neg", "fs_quadratic"}) {
            const auto phi = make_builtin_potential(name, n);
            for (int s = 0; s < 100; ++s)
                worst = std::max(worst, hamiltonian_residual(phi, rng.uniform_in(Box::cube(n, -3.0, 3.0))));
            ++entries;
        }
    o.require(worst <= 1e-6, "residual " + sci(worst));
    const auto fs = make_builtin_potential("fubini_study", 1);
    const double lo = moment_map(fs, v1(-8.0))[0], hi = moment_map(fs, v1(8.0))[0];
    o.require(lo > 0.0 && lo < 1e-6, "mu(-8) = " + sci(lo));
    o.require(hi < 1.0 && hi > 1.0 - 1e-6, "1 - mu(8) = " + sci(1.0 - hi));
    bool increasing = true;
    double prev = -1.0;
    for (double x = -8.0; x <= 8.0 + 1e-12; x += 0.05) {
        const double m = moment_map(fs, v1(x))[0];
        increasing = increasing && m > prev;
        prev = m;
    }
    o.require(increasing, "mu not strictly increasing");
    o.note(std::to_string(entries) + " entries, max residual " + sci(worst) + ", mu(-8) = " + sci(lo) +
           ", 1 - mu(8) = " + sci(1.0 - hi));
    return o;
}

Outcome decay() {
    Outcome o;
    std::vector<std::pair<std::string, double>> rays;
    auto ray = [&](const InvariantPotential& phi, const Vec& d, const std::string& label) {
        const auto r = boundary_decay(phi, d);
        o.require(r.holds, label + " ratio " + sci(r.ratio));
        rays.emplace_back(label, r.ratio);
    };
    const auto fs1 = make_builtin_potential("fubini_study", 1);
    const auto fs2 = make_builtin_potential("fubini_study", 2);
    ray(fs1, v1(1.0), "n=1 +e1");
    ray(fs1, v1(-1.0), "n=1 -e1");
    for (int axis : {0, 1})
        for (double sgn : {1.0, -1.0})
            ray(fs2, sgn * unit(2, axis), std::string("n=2 ") + (sgn > 0 ? "+" : "-") + "e" + std::to_string(axis + 1));
    ray(fs2, v2(1.0, 1.0), "n=2 (1,1)/sqrt2");
    ray(fs2, v2(-1.0, -1.0), "n=2 -(1,1)/sqrt2");
    for (const auto& [label, ratio] : rays) o.note(label + " " + sci(ratio));
    // The lattice point 20 (1, 1), i.e. |x|_inf = 20 on the diagonal.
    const double lattice = j_volume(fs2, v2(20.0, 20.0)) / j_volume(fs2, v2(0.0, 0.0));
    o.note("supplementary Vol(20,20)/Vol(0) " + sci(lattice));
    return o;
}

// Runs the built binary and returns (exit code, stdout).
std::pair<int, std::string> run_binary(const std::string& args) {
    const std::string cmd = std::string("\"") + TKLAB_BINARY + "\" " + args + " 2>/dev/null";
    std::string out;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return {-1, out};
    char buf[4096];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, got);
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

Outcome battery() {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    const auto [code1, out1] = run_binary("verify");
    const double t1 = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto [code2, out2] = run_binary("verify");
    const double t2 = seconds_since(t0);
    const auto [bad, bad_out] = run_binary("verify --negative-control");
    o.require(code1 == 0 && code2 == 0, "verify exit codes " + std::to_string(code1) + ", " + std::to_string(code2));
    o.require(out1 == out2 && !out1.empty(), "reports differ between runs");
    o.require(std::max(t1, t2) < 60.0, "runtime " + sci(std::max(t1, t2)) + " s");
    o.require(bad == 1, "negative control exit code " + std::to_string(bad));
    std::string summary;
    std::istringstream is(out1);
    for (std::string line; std::getline(is, line);)
        if (line.rfind("overall:", 0) == 0) summary = line;
    o.note(summary + ", runs " + sci(t1) + " s and " + sci(t2) + " s, identical reports, negative control exit " +
           std::to_string(bad));
    return o;
}

}  // namespace

int main() {
    const std::vector<std::function<Outcome()>> criteria{levi_oracle, average_convexity, hadamard_monotone_boundary,
                                                         curvature,   volumes,           equivalence_table,
                                                         critical_orbits, moment,        decay,
                                                         battery};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        std::cout << "criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria pass")) << std::endl;
    return failed ? 1 : 0;
}
