#pragma once

/**
 * @file verify.hpp
 * @brief The verification battery: every module's properties replayed on the
 *        catalog, one report row per (check, entry).
 *
 * Deterministic: every random draw comes from SplitMix64 seeded with 0x5EED
 * (re-seeded per check, so rows do not depend on each other's order).
 */

#include "tklab/orbitvol.hpp"

#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace tklab {

struct VerifyRow {
    std::string check;
    std::string entry;
    bool pass = false;
    std::string detail;
};

struct CoverageItem {
    std::string check;
    std::string statement;
    int rows = 0;
};

struct VerifyReport {
    std::vector<VerifyRow> rows;
    std::vector<CoverageItem> coverage;
    bool coverage_complete = false;
    bool pass = false;

    [[nodiscard]] std::size_t failures() const {
        std::size_t f = 0;
        for (const auto& r : rows) f += r.pass ? 0 : 1;
        return f;
    }
};

struct VerifyOptions {
    /// Negative control: replace fubini_study by its sign flip everywhere.
    bool corrupt_fubini_study = false;
};

/// Checks the battery must cover, with the statement each one exercises.
inline const std::vector<std::pair<std::string, std::string>>& verify_manifest() {
    static const std::vector<std::pair<std::string, std::string>> m{
        {"levi.block_form", "Levi form is (1/2)[[A, B^t], [B, A]]; explicit n = 2 matrix"},
        {"levi.trace_laplacian", "trace of the Levi form equals the Laplacian"},
        {"levi.spectrum", "Levi spectrum is the doubled complex-Hessian spectrum"},
        {"average.convex", "torus average F of a PSH function is convex"},
        {"average.log_radius_convex", "G(r) = F(log r) is convex in log r"},
        {"average.monotone_radius", "G is non-decreasing in r_i; constant iff harmonic in z_i"},
        {"average.max_principle", "G with an interior maximum is constant"},
        {"maximum.convex", "torus maximum M is convex in log r"},
        {"maximum.monotone_radius", "M is non-decreasing in r_i"},
        {"maximum.distinguished_boundary", "polydisk maximum is attained on the distinguished boundary"},
        {"ricci.closed_forms", "Ricci form closed forms; Kahler-Einstein constant 2"},
        {"ricci.anticanonical", "curvature of -log H agrees with the Ricci form"},
        {"jvolume.closed_forms", "J-volume closed forms (circle length 2 pi r)"},
        {"jvolume.totally_real_convexity", "rho <= 0 makes the J-volume of canonical tori convex"},
        {"jvolume.lagrangian_equivalence", "Ricci sign <-> convexity class of log Vol"},
        {"jvolume.non_implication", "concave log Vol need not give concave Vol"},
        {"jvolume.flat_torus_constant", "periodic convex G on a complex torus is constant"},
        {"jvolume.boundary_decay", "Vol tends to zero at the boundary of the orbit"},
        {"critical.unique_maximum", "Ric > 0: unique critical orbit, a global maximum"},
        {"moment.hamiltonian", "d(mu . X) = omega(X~, .)"},
        {"moment.image", "moment image is the open moment interval"},
    };
    return m;
}

namespace detail {

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline std::string vec_str(const Vec& v) {
    std::string s = "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + sci(v[i]);
    return s + ")";
}

/// Constant real Hessian in the (x, y) basis; a quadratic form on C^n.
struct QuadraticField {
    Mat S;
    [[nodiscard]] int dimension() const { return static_cast<int>(S.rows() / 2); }
    [[nodiscard]] Mat hessian(const Vec&, const Vec&) const { return S; }
};

/// The n = 2 Levi matrix written entry by entry in the basis {dx, dxi, dy, deta}.
inline Mat explicit_levi_n2(const Mat& h) {
    // indices: 0 = x, 1 = xi, 2 = y, 3 = eta
    const double fxx = h(0, 0), fyy = h(2, 2), fxixi = h(1, 1), fee = h(3, 3);
    const double fxxi = h(0, 1), fye = h(2, 3), fxe = h(0, 3), fyxi = h(2, 1);
    Mat m(4, 4);
    m << fxx + fyy, fxxi + fye, 0.0, -fxe + fyxi,  //
        fxxi + fye, fxixi + fee, fxe - fyxi, 0.0,  //
        0.0, fxe - fyxi, fxx + fyy, fxxi + fye,    //
        -fxe + fyxi, 0.0, fxxi + fye, fxixi + fee;
    return 0.5 * m;
}

inline LaurentPolynomial poly(std::initializer_list<std::pair<std::complex<double>, std::vector<int>>> terms) {
    LaurentPolynomial p;
    for (const auto& [c, k] : terms) p.push_back({c, k});
    return p;
}

/// A PSH field of the catalog with the box where it is tested.
struct CatalogField {
    std::string name;
    PeriodicScalarField field;
    bool extends = false;  ///< extends PSH across every z_i = 0
};

inline std::vector<CatalogField> psh_catalog(int n) {
    std::vector<CatalogField> out;
    auto zeros = [n] { return std::vector<int>(static_cast<std::size_t>(n), 0); };
    auto e = [n](int j, int power = 1) {
        std::vector<int> k(static_cast<std::size_t>(n), 0);
        k[static_cast<std::size_t>(j)] = power;
        return k;
    };
    auto ones = [n] { return std::vector<int>(static_cast<std::size_t>(n), 1); };
    auto sum_of = [&](double c0, double c) {
        LaurentPolynomial p{{c0, zeros()}};
        for (int j = 0; j < n; ++j) p.push_back({c, e(j)});
        return p;
    };

    out.push_back({"|1+sum z|^2", field::laurent_abs2(n, sum_of(1.0, 1.0)), true});
    const double eps = n <= 2 ? 0.01 : 1e-5;  // small for n = 3 so the average converges at N = 8
    const double zero_free = std::log(0.5 / (eps * n));  // |eps sum z| <= 1/2 below this
    out.push_back({"log|1+eps sum z|", field::laurent_log_abs(n, sum_of(1.0, eps), Box::cube(n, -6.0, zero_free)), true});
    if (n == 1) {
        out.push_back({"|z^2-z/2|^2", field::laurent_abs2(1, poly({{1.0, {2}}, {-0.5, {1}}})), true});
        out.push_back({"pullback(flat)", field::pullback(make_builtin_potential("flat", 1)), true});
        out.push_back({"pullback(fubini_study)", field::pullback(make_builtin_potential("fubini_study", 1)), true});
        PeriodicScalarField s = field::laurent_abs2(1, sum_of(1.0, 1.0));
        s.add(1.0, field::laurent_re(1, 1.0, {2}));
        out.push_back({"|1+z|^2+Re z^2", s, true});
    } else if (n == 2) {
        PeriodicScalarField d = field::laurent_abs2(2, poly({{1.0, {1, 0}}, {-1.0, {0, 1}}}));
        d.add(1.0, field::laurent_abs2(2, poly({{1.0, {1, 1}}})));
        out.push_back({"|z1-z2|^2+|z1 z2|^2", d, true});
        out.push_back({"pullback(fubini_study)", field::pullback(make_builtin_potential("fubini_study", 2)), true});
        out.push_back({"Re(z1 z2)", field::laurent_re(2, 1.0, ones()), true});
    } else {
        out.push_back({"pullback(cosh_neg)", field::pullback(make_builtin_potential("cosh_neg", n)), false});
    }
    return out;
}

}  // namespace detail

class VerifyBattery {
  public:
    explicit VerifyBattery(VerifyOptions opt = {}) : opt_(opt) {}

    VerifyReport run() {
        report_ = {};
        levi();
        averages();
        maxima();
        ricci();
        volumes();
        critical();
        moment();
        finish();
        return report_;
    }

  private:
    VerifyOptions opt_;
    VerifyReport report_;

    [[nodiscard]] InvariantPotential potential(const std::string& name, int n, Params params = {}) const {
        if (opt_.corrupt_fubini_study && name == "fubini_study") params["scale"] = -param_or_one(params);
        return make_builtin_potential(name, n, params);
    }

    static double param_or_one(const Params& p) {
        auto it = p.find("scale");
        return it == p.end() ? 1.0 : it->second;
    }

    /// Run one row; exceptions become failed rows naming the error.
    void row(const std::string& check, const std::string& entry, const std::function<std::pair<bool, std::string>()>& fn) {
        VerifyRow r{check, entry, false, ""};
        try {
            auto [ok, detail] = fn();
            r.pass = ok;
            r.detail = std::move(detail);
        } catch (const NotKahlerError& e) {
            r.detail = std::string("Kahler-locus error: ") + e.what();
        } catch (const std::exception& e) {
            r.detail = std::string("error: ") + e.what();
        }
        report_.rows.push_back(std::move(r));
    }

    // ------------------------------------------------------------------
    void levi() {
        using detail::sci;
        row("levi.block_form", "50 random quadratics, n=2", [] {
            Rng rng(kDefaultSeed);
            double worst = 0.0;
            for (int k = 0; k < 50; ++k) {
                Mat S(4, 4);
                for (int i = 0; i < 4; ++i)
                    for (int j = i; j < 4; ++j) S(i, j) = S(j, i) = rng.uniform(-2.0, 2.0);
                const detail::QuadraticField q{S};
                const Vec x = rng.uniform_in(Box::cube(2, -3, 3)), y = rng.uniform_in(Box::cube(2, 0, kTwoPi));
                worst = std::max(worst, (levi_form(q, x, y).matrix - detail::explicit_levi_n2(S)).cwiseAbs().maxCoeff());
            }
            return std::pair{worst <= 1e-10, "max entry error " + sci(worst)};
        });
        row("levi.block_form", "f = x eta", [] {
            Mat S = Mat::Zero(4, 4);
            S(0, 3) = S(3, 0) = 1.0;  // f = x_1 y_2
            Mat expect = Mat::Zero(4, 4);
            expect(0, 3) = expect(3, 0) = -0.5;
            expect(1, 2) = expect(2, 1) = 0.5;
            const double err = (levi_form_from_hessian(S).matrix - expect).cwiseAbs().maxCoeff();
            return std::pair{err == 0.0, "max entry error " + sci(err)};
        });
        for (int n = 1; n <= 3; ++n) {
            for (const auto& cf : detail::psh_catalog(n)) {
                row("levi.trace_laplacian", cf.name + ", n=" + std::to_string(n), [&] {
                    Rng rng(kDefaultSeed);
                    double worst = 0.0;
                    for (int k = 0; k < 100; ++k) {
                        const Vec x = rng.uniform_in(Box::cube(n, -3, 3)), y = rng.uniform_in(Box::cube(n, 0, kTwoPi));
                        double lap = 0.0, scale = 0.0;
                        for (int a = 0; a < 2 * n; ++a) {
                            MultiIndex alpha(static_cast<std::size_t>(2 * n), 0);
                            alpha[static_cast<std::size_t>(a)] = 2;
                            const double d = cf.field.partial(alpha, x, y);
                            lap += d;
                            scale += std::abs(d);
                        }
                        worst = std::max(worst, std::abs(levi_form(cf.field, x, y).trace() - lap) / std::max(scale, 1e-300));
                    }
                    return std::pair{worst <= 1e-9, "max relative error " + sci(worst)};
                });
                row("levi.spectrum", cf.name + ", n=" + std::to_string(n), [&] {
                    Rng rng(kDefaultSeed);
                    double worst = 0.0;
                    for (int k = 0; k < 50; ++k) {
                        const Vec x = rng.uniform_in(Box::cube(n, -3, 3)), y = rng.uniform_in(Box::cube(n, 0, kTwoPi));
                        const Mat h = cf.field.hessian(x, y);
                        const LeviForm L = levi_form_from_hessian(h);
                        Eigen::SelfAdjointEigenSolver<CMat> herm(complex_hessian_from_real(h), Eigen::EigenvaluesOnly);
                        const Vec lam = herm.eigenvalues();
                        Vec doubled(2 * n);
                        for (int i = 0; i < n; ++i) doubled[2 * i] = doubled[2 * i + 1] = 2.0 * lam[i];
                        const Vec ev = L.eigenvalues();
                        const double norm = ev.cwiseAbs().maxCoeff();
                        worst = std::max(worst, (ev - doubled).cwiseAbs().maxCoeff() / (1.0 + norm));
                    }
                    return std::pair{worst <= 1e-8, "max scaled error " + sci(worst)};
                });
            }
        }
    }

    // ------------------------------------------------------------------
    void averages() {
        using detail::sci;
        for (int n = 1; n <= 3; ++n) {
            const Box region = Box::cube(n, -3, 3);
            for (const auto& cf : detail::psh_catalog(n)) {
                row("average.convex", cf.name + ", n=" + std::to_string(n), [&] {
                    const PshReport p = is_psh(cf.field, Grid::uniform(region, 5), n == 3 ? 4 : 8);
                    if (!p.holds) return std::pair{false, "field is not PSH: eigenvalue " + sci(p.min_eigenvalue)};
                    const auto v = check_convexity([&](const Vec& x) { return torus_average(cf.field, x); }, region);
                    return std::pair{is_convex(v.tag), "F is " + to_string(v.tag) + ", Hessian min " + sci(v.hessian_min)};
                });
            }
        }
        row("average.convex", "negative control -|1+z|^2, n=1", [] {
            const auto f = field::laurent_abs2(1, detail::poly({{1.0, {0}}, {1.0, {1}}})).scaled(-1.0);
            const Box region = Box::cube(1, -3, 3);
            const PshReport p = is_psh(f, Grid::uniform(region, 5));
            const auto v = check_convexity([&](const Vec& x) { return torus_average(f, x); }, region);
            const bool flagged = !p.holds && !is_convex(v.tag);
            return std::pair{flagged, "PSH " + std::string(p.holds ? "holds" : "fails") + ", F is " + to_string(v.tag)};
        });

        // G evaluated directly from g on C^n in polar form, independent of the field machinery.
        row("average.log_radius_convex", "g = |1+z1+z2|^2 + log(1+|z1|^2)", [] {
            using C = std::complex<double>;
            auto g = [](const C& z1, const C& z2) { return std::norm(1.0 + z1 + z2) + std::log1p(std::norm(z1)); };
            auto G = [&](const Vec& logr) {
                const int N = 16;
                std::vector<double> vals;
                for (int a = 0; a < N; ++a)
                    for (int b = 0; b < N; ++b)
                        vals.push_back(g(std::polar(std::exp(logr[0]), kTwoPi * a / N),
                                         std::polar(std::exp(logr[1]), kTwoPi * b / N)));
                return pairwise_sum(vals) / (N * N);
            };
            PeriodicScalarField f = field::laurent_abs2(2, detail::poly({{1.0, {0, 0}}, {1.0, {1, 0}}, {1.0, {0, 1}}}));
            f.add(1.0, field::pullback(make_fd_potential(
                           "log(1+|z1|^2)", 2, [](const Vec& x) { return std::log1p(std::exp(2.0 * x[0])); })));
            const Box region = Box::cube(2, -2, 2);
            const auto v = check_convexity(G, region);
            Rng rng(kDefaultSeed);
            double agree = 0.0;
            for (int k = 0; k < 20; ++k) {
                const Vec x = rng.uniform_in(region);
                agree = std::max(agree, std::abs(G(x) - torus_average(f, x)) / (1.0 + std::abs(G(x))));
            }
            return std::pair{is_convex(v.tag) && agree <= 1e-9,
                             "G is " + to_string(v.tag) + "; |G - F| " + sci(agree)};
        });

        for (int n = 1; n <= 2; ++n) {
            for (const auto& cf : detail::psh_catalog(n)) {
                if (!cf.extends) continue;
                for (int axis = 0; axis < n; ++axis) {
                    const std::string entry = cf.name + ", n=" + std::to_string(n) + ", r" + std::to_string(axis + 1);
                    row("average.monotone_radius", entry, [&] {
                        const MonotoneReport m = monotone_in_radius(cf.field, axis, AxisRange{-6.0, 1.5, 0.25},
                                                                    Vec::Constant(n, 0.3), true);
                        return std::pair{m.non_decreasing && m.kernel_consistent,
                                         std::string(m.constant_along_axis ? "constant" : "increasing") +
                                             ", harmonic in z_i: " + (m.harmonic_in_axis ? "yes" : "no") +
                                             ", largest drop " + sci(m.largest_drop)};
                    });
                }
            }
        }
        row("average.monotone_radius", "Re z1, n=2 (kernel)", [] {
            const auto f = field::laurent_re(2, 1.0, {1, 0});
            const MonotoneReport m = monotone_in_radius(f, 0, AxisRange{-6.0, 1.5, 0.25}, Vec::Constant(2, 0.3), true);
            const bool ok = m.constant_along_axis && m.harmonic_in_axis && std::abs(m.limit_value) <= 1e-12;
            return std::pair{ok, "G constant " + sci(m.limit_value) + ", harmonic in z_1"};
        });

        row("average.max_principle", "Re z, n=1 (harmonic)", [] {
            const auto r = max_principle(field::laurent_re(1, 1.0, {1}), Box::cube(1, -2, 2));
            return std::pair{r.holds && r.interior_maximum && r.constant, "interior max, spread " + detail::sci(r.spread)};
        });
        row("average.max_principle", "Re(z1 z2), n=2 (harmonic)", [] {
            const auto r = max_principle(field::laurent_re(2, 1.0, {1, 1}), Box::cube(2, -2, 2));
            return std::pair{r.holds && r.constant, "spread " + detail::sci(r.spread)};
        });
        row("average.max_principle", "|1+z1+z2|^2, n=2", [] {
            const auto f = field::laurent_abs2(2, detail::poly({{1.0, {0, 0}}, {1.0, {1, 0}}, {1.0, {0, 1}}}));
            const auto r = max_principle(f, Box::cube(2, -2, 2));
            return std::pair{r.holds && !r.interior_maximum, "boundary max " + detail::sci(r.boundary_max) +
                                                                 " > interior " + detail::sci(r.interior_max)};
        });
    }

    // ------------------------------------------------------------------
    void maxima() {
        using detail::sci;
        for (int n = 1; n <= 3; ++n) {
            const Box region = Box::cube(n, -3, 3);
            for (const auto& cf : detail::psh_catalog(n)) {
                row("maximum.convex", cf.name + ", n=" + std::to_string(n), [&] {
                    const auto v = check_convexity([&](const Vec& x) { return hadamard_max(cf.field, x).value; }, region);
                    return std::pair{is_convex(v.tag), "M is " + to_string(v.tag) + ", Hessian min " + sci(v.hessian_min)};
                });
            }
        }
        for (int n = 1; n <= 2; ++n) {
            for (const auto& cf : detail::psh_catalog(n)) {
                if (!cf.extends) continue;
                for (int axis = 0; axis < n; ++axis) {
                    const std::string entry = cf.name + ", n=" + std::to_string(n) + ", r" + std::to_string(axis + 1);
                    row("maximum.monotone_radius", entry, [&] {
                        const MonotoneReport m =
                            monotone_in_radius(cf.field, axis, AxisRange{-6.0, 1.5, 0.25}, Vec::Constant(n, 0.3), true,
                                               RadialQuantity::maximum);
                        return std::pair{m.non_decreasing, "largest drop " + sci(m.largest_drop)};
                    });
                }
            }
        }
        struct Case {
            std::string name;
            PeriodicScalarField f;
        };
        std::vector<Case> cases;
        cases.push_back({"Re z, n=1", field::laurent_re(1, 1.0, {1})});
        cases.push_back({"|1+z|^2, n=1", field::laurent_abs2(1, detail::poly({{1.0, {0}}, {1.0, {1}}}))});
        cases.push_back({"|z1 z2|^2, n=2", field::laurent_abs2(2, detail::poly({{1.0, {1, 1}}}))});
        cases.push_back(
            {"|1+z1+z2|^2, n=2", field::laurent_abs2(2, detail::poly({{1.0, {0, 0}}, {1.0, {1, 0}}, {1.0, {0, 1}}}))});
        cases.push_back({"Re(z1 - z2^2), n=2", [] {
                             PeriodicScalarField f = field::laurent_re(2, 1.0, {1, 0});
                             f.add(-1.0, field::laurent_re(2, 1.0, {0, 2}));
                             return f;
                         }()});
        for (const auto& c : cases) {
            row("maximum.distinguished_boundary", c.name + ", 20 polydisks", [&] {
                Rng rng(kDefaultSeed);
                const int n = c.f.dimension();
                double worst = std::numeric_limits<double>::infinity();
                for (int k = 0; k < 20; ++k) {
                    const Vec radii = rng.uniform_in(Box::cube(n, 0.2, 2.5));
                    const auto r = distinguished_boundary_max(c.f, radii);
                    if (!r.holds) return std::pair{false, "interior beats boundary at radii " + detail::vec_str(radii)};
                    worst = std::min(worst, r.boundary_max - r.interior_max);
                }
                return std::pair{true, "min boundary - interior " + sci(worst)};
            });
        }
    }

    // ------------------------------------------------------------------
    void ricci() {
        using detail::sci;
        row("ricci.closed_forms", "fubini_study n=1: R = 2h", [&] {
            const auto fs = potential("fubini_study", 1);
            double worst = 0.0;
            for (double x : AxisRange{-3, 3, 0.1}.samples()) {
                const Vec p = Vec::Constant(1, x);
                const double R = ricci_form(fs, p).R(0, 0), h = metric_at(fs, p).h(0, 0);
                worst = std::max(worst, std::abs(R - 2.0 * h) / std::abs(2.0 * h));
            }
            return std::pair{worst <= 1e-8, "max relative error " + sci(worst)};
        });
        row("ricci.closed_forms", "flat n=1,2: R = 0", [] {
            double worst = 0.0;
            for (int n = 1; n <= 2; ++n) {
                const auto flat = make_builtin_potential("flat", n);
                const Grid g = Grid::uniform(Box::cube(n, -3, 3), 13);
                for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, ricci_form(flat, g.point(i)).R.cwiseAbs().maxCoeff());
            }
            return std::pair{worst <= 1e-8, "max |R| " + sci(worst)};
        });
        row("ricci.closed_forms", "cosh_neg n=1: R = -sech^2(2x)", [] {
            const auto c = make_builtin_potential("cosh_neg", 1);
            double worst = std::abs(ricci_form(c, Vec::Zero(1)).R(0, 0) + 1.0);
            for (double x : AxisRange{-3, 3, 0.25}.samples()) {
                const double s = 1.0 / std::cosh(2.0 * x);
                worst = std::max(worst, std::abs(ricci_form(c, Vec::Constant(1, x)).R(0, 0) + s * s) / (s * s));
            }
            return std::pair{worst <= 1e-8, "max relative error " + sci(worst)};
        });
        for (int n = 1; n <= 2; ++n) {
            for (const auto& [name, params] : catalog_entries(n)) {
                row("ricci.anticanonical", name + ", n=" + std::to_string(n), [&, name = name, params = params] {
                    const auto phi = potential(name, n, params);
                    const auto Hfd = anticanonical_density_fd(phi);
                    const auto Han = anticanonical_density(phi);
                    const Grid g = Grid::uniform(Box::cube(n, -2, 2), n == 1 ? 17 : 5);
                    Rng rng(kDefaultSeed);
                    double worst_fd = 0.0, worst_an = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        const Vec x = g.point(i), y = rng.uniform_in(Box::cube(n, 0, kTwoPi));
                        const Mat R = ricci_form(phi, x).R;
                        const double scale = 1.0 + R.cwiseAbs().maxCoeff();
                        const LeviForm a = ricci_general(Hfd, x, y), b = ricci_general(Han, x, y);
                        // invariant density: B = 0 and the x-block of the Levi form is twice the complex Hessian
                        worst_fd = std::max(worst_fd, ((0.25 * a.A - R).cwiseAbs().maxCoeff() + a.B.cwiseAbs().maxCoeff()) / scale);
                        worst_an = std::max(worst_an, ((0.25 * b.A - R).cwiseAbs().maxCoeff() + b.B.cwiseAbs().maxCoeff()) / scale);
                    }
                    return std::pair{worst_fd <= 1e-6 && worst_an <= 1e-9,
                                     "differenced density " + sci(worst_fd) + ", analytic density " + sci(worst_an)};
                });
            }
        }
        row("ricci.anticanonical", "H = |1+z|^2 on x < -0.1: zero form", [] {
            const auto H = field::laurent_abs2(1, detail::poly({{1.0, {0}}, {1.0, {1}}}));
            double worst = 0.0;
            for (double x : AxisRange{-3, -0.1, 0.1}.samples())
                for (double y : AxisRange{0, 6, 0.5}.samples())
                    worst = std::max(worst, ricci_general(H, Vec::Constant(1, x), Vec::Constant(1, y)).matrix.cwiseAbs().maxCoeff());
            return std::pair{worst <= 1e-8, "max |L| " + sci(worst)};
        });
    }

    /// Potentials checked by the curvature and volume rows.
    static std::vector<std::pair<std::string, Params>> catalog_entries(int n) {
        const Params sum_exp = n == 1 ? Params{{"c1", 1.0}, {"a1", 2.0}, {"c2", 0.5}, {"a2", -1.0}}
                                      : Params{{"c1", 1.0}, {"a1_1", 2.0}, {"a1_2", 0.0}, {"c2", 0.5}, {"a2_1", -1.0},
                                               {"a2_2", 1.0}, {"c3", 1.0}, {"a3_1", 0.0}, {"a3_2", -2.0}};
        return {{"flat", {}}, {"flat_cylinder", {}}, {"fubini_study", {}},
                {"cosh_neg", {}}, {"fs_quadratic", {}}, {"sum_exp", sum_exp}};
    }

    // ------------------------------------------------------------------
    void volumes() {
        using detail::sci;
        row("jvolume.closed_forms", "flat n=1: Vol = 2 pi e^x", [] {
            const auto flat = make_builtin_potential("flat", 1);
            double worst = 0.0;
            for (double x : AxisRange{-3, 3, 0.1}.samples()) {
                const double v = kTwoPi * std::exp(x);
                worst = std::max(worst, std::abs(j_volume(flat, Vec::Constant(1, x)) - v) / v);
            }
            return std::pair{worst <= 1e-10, "max relative error " + sci(worst)};
        });
        row("jvolume.closed_forms", "fubini_study n=1: Vol = pi sech x", [&] {
            const auto fs = potential("fubini_study", 1);
            double worst = 0.0;
            for (double x : AxisRange{-3, 3, 0.1}.samples()) {
                const double v = std::numbers::pi / std::cosh(x);
                worst = std::max(worst, std::abs(j_volume(fs, Vec::Constant(1, x)) - v) / v);
            }
            return std::pair{worst <= 1e-9, "max relative error " + sci(worst)};
        });
        row("jvolume.closed_forms", "flat_cylinder n=2: Vol = 2 pi^2", [] {
            const auto c = make_builtin_potential("flat_cylinder", 2);
            const double v = 2.0 * std::numbers::pi * std::numbers::pi;
            const double err = std::abs(j_volume(c, Vec::Constant(2, 0.7)) - v) / v;
            return std::pair{err <= 1e-12, "relative error " + sci(err)};
        });
        row("jvolume.closed_forms", "general density, y-independent and |1+z|^2", [&] {
            double worst = 0.0;
            for (const auto& name : {"flat", "fubini_study", "cosh_neg"}) {
                for (int n = 1; n <= 2; ++n) {
                    const auto phi = potential(name, n);
                    const auto H = anticanonical_density(phi);
                    const Vec x = Vec::Constant(n, 0.4);
                    const double a = j_volume(phi, x);
                    worst = std::max(worst, std::abs(j_volume_general(H, x) - a) / a);
                }
            }
            const auto H = field::laurent_abs2(1, detail::poly({{1.0, {0}}, {1.0, {1}}}));
            const double eight = j_volume_general(H, Vec::Zero(1), QuadratureRule(1, 1 << 17));
            const bool ok = worst <= 1e-10 && std::abs(eight - 8.0) <= 1e-9;
            return std::pair{ok, "invariant agreement " + sci(worst) + ", |1+z|^2 at 0: " + format8(eight)};
        });

        for (int n = 1; n <= 2; ++n) {
            for (const auto& [name, params] : catalog_entries(n)) {
                row("jvolume.lagrangian_equivalence", name + ", n=" + std::to_string(n), [&, name = name, params = params] {
                    const auto phi = potential(name, n, params);
                    const auto r = consistency_theorem(phi, Box::cube(n, -3, 3));
                    return std::pair{r.pass && expected_class(name, r), r.detail};
                });
            }
        }

        // rho <= 0 for y-dependent densities: H = exp(psi) with psi PSH, and |P|^2 off its zeros.
        struct Density {
            std::string name;
            PeriodicScalarField H;
            Box region;
        };
        std::vector<Density> dens;
        dens.push_back({"exp|1+z/2|^2, n=1", exp_density(field::laurent_abs2(1, detail::poly({{1.0, {0}}, {0.5, {1}}}))),
                        Box::cube(1, -2, 2)});
        dens.push_back({"|1+z/2|^2, n=1", field::laurent_abs2(1, detail::poly({{1.0, {0}}, {0.5, {1}}})),
                        Box::cube(1, -3, 0.5)});
        dens.push_back({"exp|1+(z1+z2)/4|^2, n=2",
                        exp_density(field::laurent_abs2(2, detail::poly({{1.0, {0, 0}}, {0.25, {1, 0}}, {0.25, {0, 1}}}))),
                        Box::cube(2, -1.5, 1.5)});
        dens.push_back({"det metric of cosh_neg, n=2", anticanonical_density(make_builtin_potential("cosh_neg", 2)),
                        Box::cube(2, -1.5, 1.5)});
        for (const auto& d : dens) {
            row("jvolume.totally_real_convexity", d.name, [&] {
                const int n = d.H.dimension();
                const Grid xs = Grid::uniform(d.region, n == 1 ? 9 : 4);
                const Grid ys = angle_grid(n, 6);
                double lmax = -std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < xs.size(); ++i)
                    for (std::size_t j = 0; j < ys.size(); ++j)
                        lmax = std::max(lmax, ricci_general(d.H, xs.point(i), ys.point(j)).eigenvalues().maxCoeff());
                if (lmax > 1e-8) return std::pair{false, "rho has a positive eigenvalue " + sci(lmax)};
                const auto v = check_convexity([&](const Vec& x) { return j_volume_general(d.H, x); }, d.region);
                return std::pair{is_convex(v.tag), "rho <= 0 (max " + sci(lmax) + "), Vol_J " + to_string(v.tag)};
            });
        }

        row("jvolume.non_implication", "fubini_study vs cosh_neg, n=1", [&] {
            const Box region = Box::cube(1, -3, 3);
            const auto fs = potential("fubini_study", 1);
            const auto ch = make_builtin_potential("cosh_neg", 1);
            const auto fs_log = check_convexity([&](const Vec& x) { return log_j_volume(fs, x); }, region);
            const auto fs_vol = check_convexity([&](const Vec& x) { return j_volume(fs, x); }, region);
            const auto ch_log = check_convexity([&](const Vec& x) { return log_j_volume(ch, x); }, region);
            const auto ch_vol = check_convexity([&](const Vec& x) { return j_volume(ch, x); }, region);
            const bool ok = is_concave(fs_log.tag) && !is_concave(fs_vol.tag) && is_convex(ch_log.tag) && is_convex(ch_vol.tag);
            return std::pair{ok, "fubini_study: log Vol " + to_string(fs_log.tag) + ", Vol " + to_string(fs_vol.tag) +
                                     "; cosh_neg: log Vol " + to_string(ch_log.tag) + ", Vol " + to_string(ch_vol.tag)};
        });

        row("jvolume.flat_torus_constant", "flat_cylinder, n=1,2", [] {
            double spread = 0.0;
            bool zero = true;
            for (int n = 1; n <= 2; ++n) {
                const auto c = make_builtin_potential("flat_cylinder", n);
                const Grid g = Grid::uniform(Box::cube(n, -3, 3), 9);
                double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double v = log_j_volume(c, g.point(i));
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                spread = std::max(spread, hi - lo);
                zero = zero && classify_ricci(c, Box::cube(n, -3, 3)).tag == SignTag::zero;
            }
            return std::pair{zero && spread <= 1e-12, "Ric zero, log Vol spread " + sci(spread)};
        });

        // Rays run until |x|_inf = 20, i.e. t_max = 20 sqrt(k) for a ray with k equal nonzero entries.
        for (int n = 1; n <= 2; ++n) {
            std::vector<Vec> dirs;
            for (int j = 0; j < n; ++j) {
                dirs.push_back(unit(n, j));
                dirs.push_back(-unit(n, j));
            }
            if (n == 2) {
                for (double a : {1.0, -1.0})
                    for (double b : {1.0, -1.0}) dirs.push_back((Vec(2) << a, b).finished());
            }
            for (const Vec& d : dirs) {
                row("jvolume.boundary_decay", "fubini_study, n=" + std::to_string(n) + ", d=" + detail::vec_str(d), [&] {
                    const auto fs = potential("fubini_study", n);
                    const double t_max = 20.0 * d.norm() / d.cwiseAbs().maxCoeff();
                    const auto r = boundary_decay(fs, d, t_max);
                    return std::pair{r.holds, "Vol(end)/Vol(0) " + sci(r.ratio) + " at t=" + sci(t_max) +
                                                  (r.monotone_tail ? ", monotone tail" : ", tail not monotone")};
                });
            }
        }
        row("jvolume.boundary_decay", "flat refused", [] {
            try {
                (void)boundary_decay(make_builtin_potential("flat", 1), Vec::Ones(1));
            } catch (const InputError&) {
                return std::pair{true, std::string("not compactifiable: refused")};
            }
            return std::pair{false, std::string("decay ran on a non-compactifiable potential")};
        });
    }

    static std::string format8(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.12f", v);
        return buf;
    }

    /// The expected (Ricci, log Vol) pair for each catalog entry.
    static bool expected_class(const std::string& name, const ConsistencyReport& r) {
        if (name == "flat" || name == "flat_cylinder")
            return r.ricci.tag == SignTag::zero && r.logvol.tag == ConvexityTag::linear;
        if (name == "fubini_study")
            return r.ricci.tag == SignTag::positive && r.logvol.tag == ConvexityTag::strictly_concave;
        if (name == "cosh_neg")
            return r.ricci.tag == SignTag::negative && r.logvol.tag == ConvexityTag::strictly_convex;
        if (name == "fs_quadratic")
            return r.ricci.tag == SignTag::indefinite && r.logvol.tag == ConvexityTag::indefinite &&
                   r.ricci.lambda_min < -r.ricci.tolerance && r.ricci.lambda_max > r.ricci.tolerance;
        if (name == "sum_exp") return curvature_class(r.ricci.tag) == CurvatureClass::nonpositive;
        return false;
    }

    // ------------------------------------------------------------------
    void critical() {
        using detail::sci;
        for (int n = 1; n <= 2; ++n) {
            row("critical.unique_maximum", "fubini_study, n=" + std::to_string(n) + ", 10 seeds", [&] {
                const auto fs = potential("fubini_study", n);
                const Box region = Box::cube(n, -3, 3);
                CriticalOptions opt;
                opt.ricci = classify_ricci(fs, region);
                opt.require_unique = true;
                Rng rng(kDefaultSeed);
                double spread = 0.0, origin = 0.0;
                Vec first;
                for (int k = 0; k < 10; ++k) {
                    const auto c = find_critical_orbit(fs, rng.uniform_in(region), region, opt);
                    if (!c.converged || !c.unique) return std::pair{false, "seed " + std::to_string(k) + " did not converge"};
                    if (k == 0) first = c.x;
                    spread = std::max(spread, (c.x - first).cwiseAbs().maxCoeff());
                    origin = std::max(origin, c.x.cwiseAbs().maxCoeff());
                }
                return std::pair{spread <= 1e-6 && origin <= 1e-8,
                                 "spread " + sci(spread) + ", |x*| " + sci(origin) + ", Vol " + sci(j_volume(fs, first))};
            });
        }
        row("critical.unique_maximum", "translated fubini_study, a=1.5", [&] {
            const auto fs = potential("fubini_study", 1, {{"shift", 1.5}});
            const auto c = find_critical_orbit(fs, Vec::Constant(1, -1.0), Box::cube(1, -3, 4.5));
            const double err = std::abs(c.x[0] - 1.5);
            return std::pair{c.converged && err <= 1e-8, "x* - 1.5 = " + sci(err)};
        });
        row("critical.unique_maximum", "scaled fubini_study, c=3, n=2", [&] {
            const auto base = potential("fubini_study", 2);
            const auto scaled = potential("fubini_study", 2, {{"scale", 3.0}});
            const Box region = Box::cube(2, -3, 3);
            const Vec seed = (Vec(2) << 1.2, -0.7).finished();
            const auto a = find_critical_orbit(base, seed, region), b = find_critical_orbit(scaled, seed, region);
            const Vec x = (Vec(2) << 0.3, -1.1).finished();
            const double ratio = j_volume(scaled, x) / j_volume(base, x);
            const double err = std::abs(ratio - 3.0) / 3.0;
            const double dx = (a.x - b.x).cwiseAbs().maxCoeff();
            return std::pair{a.converged && b.converged && dx <= 1e-8 && err <= 1e-8,
                             "argmax shift " + sci(dx) + ", Vol ratio error " + sci(err)};
        });
    }

    // ------------------------------------------------------------------
    void moment() {
        using detail::sci;
        for (int n = 1; n <= 2; ++n) {
            for (const auto& [name, params] : catalog_entries(n)) {
                row("moment.hamiltonian", name + ", n=" + std::to_string(n), [&, name = name, params = params] {
                    const auto phi = potential(name, n, params);
                    Rng rng(kDefaultSeed);
                    double worst = 0.0;
                    for (int k = 0; k < 100; ++k) {
                        const Vec x = rng.uniform_in(Box::cube(n, -3, 3));
                        // residual relative to the size of omega at x
                        const double scale = 1.0 + phi.hessian(x).cwiseAbs().maxCoeff();
                        worst = std::max(worst, hamiltonian_residual(phi, x) / scale);
                    }
                    if (name == "fubini_study") (void)metric_at(phi, Vec::Zero(n));  // Kahler-locus check
                    return std::pair{worst <= 1e-6, "max residual " + sci(worst)};
                });
            }
        }
        row("moment.image", "fubini_study n=1: (0,1)", [&] {
            const auto fs = potential("fubini_study", 1);
            (void)metric_at(fs, Vec::Zero(1));
            const double lo = moment_map(fs, Vec::Constant(1, -8.0))[0], hi = moment_map(fs, Vec::Constant(1, 8.0))[0];
            bool increasing = true;
            double prev = -1.0;
            for (double x : AxisRange{-8, 8, 0.05}.samples()) {
                const double m = moment_map(fs, Vec::Constant(1, x))[0];
                increasing = increasing && m > prev && m > 0.0 && m < 1.0;
                prev = m;
            }
            return std::pair{lo < 1e-6 && hi > 1.0 - 1e-6 && increasing,
                             "mu(-8) " + sci(lo) + ", 1 - mu(8) " + sci(1.0 - hi)};
        });
    }

    // ------------------------------------------------------------------
    void finish() {
        for (const auto& [id, statement] : verify_manifest()) {
            CoverageItem c{id, statement, 0};
            for (const auto& r : report_.rows) c.rows += r.check == id ? 1 : 0;
            report_.coverage.push_back(std::move(c));
        }
        report_.coverage_complete = true;
        for (const auto& c : report_.coverage) report_.coverage_complete = report_.coverage_complete && c.rows > 0;
        report_.pass = report_.coverage_complete && report_.failures() == 0;
    }
};

inline VerifyReport verify_battery(const VerifyOptions& opt = {}) { return VerifyBattery(opt).run(); }

/// Plain-text rendering: one line per row, then the coverage manifest.
inline std::string render(const VerifyReport& r) {
    std::string out;
    for (const auto& row : r.rows)
        out += std::string(row.pass ? "PASS" : "FAIL") + "  " + row.check + "  [" + row.entry + "]  " + row.detail + "\n";
    out += "coverage:\n";
    for (const auto& c : r.coverage)
        out += "  " + std::string(c.rows > 0 ? "covered " : "MISSING ") + c.check + " (" + std::to_string(c.rows) +
               " rows): " + c.statement + "\n";
    out += "overall: " + std::string(r.pass ? "PASS" : "FAIL") + " (" + std::to_string(r.rows.size() - r.failures()) +
           "/" + std::to_string(r.rows.size()) + " rows pass)\n";
    return out;
}

}  // namespace tklab
