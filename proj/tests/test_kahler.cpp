#include "tklab/kahler.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tklab;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

double sech(double t) { return 1.0 / std::cosh(t); }

std::vector<InvariantPotential> kahler_catalog() {
    std::vector<InvariantPotential> out;
    for (int n : {1, 2, 3})
        for (const char* name : {"flat", "flat_cylinder", "fubini_study", "cosh_neg", "fs_quadratic"})
            out.push_back(make_builtin_potential(name, n));
    out.push_back(make_builtin_potential("sum_exp", 1, {{"c1", 1.0}, {"a1", 2.0}, {"c2", 0.5}, {"a2", -1.0}}));
    out.push_back(make_builtin_potential(
        "sum_exp", 2, {{"c1", 1.0}, {"a1_1", 1.0}, {"c2", 1.0}, {"a2_2", 1.0}, {"c3", 0.5}, {"a3_1", -1.0}, {"a3_2", -1.0}}));
    return out;
}

// phi(x) = a(x_0) + b(x_1) with analytic partials from the two factors.
InvariantPotential product(const InvariantPotential& a, const InvariantPotential& b) {
    auto oracle = [a, b](std::span<const int> axes, const Vec& x) {
        if (axes.empty()) return a.value(x.head(1)) + b.value(x.tail(1));
        bool all0 = true, all1 = true;
        for (int i : axes) {
            all0 = all0 && i == 0;
            all1 = all1 && i == 1;
        }
        const std::vector<int> same(axes.size(), 0);
        if (all0) return a.derivative(std::span<const int>(same), x.head(1));
        if (all1) return b.derivative(std::span<const int>(same), x.tail(1));
        return 0.0;
    };
    auto value = [a, b](const Vec& x) { return a.value(x.head(1)) + b.value(x.tail(1)); };
    return InvariantPotential(a.name() + "+" + b.name(), 2, value, oracle, OracleKind::analytic, Box::unbounded(2));
}

}  // namespace

TEST(Metric, Examples) {
    const auto flat = make_builtin_potential("flat", 1);
    for (double x : {-1.0, 0.0, 0.7}) {
        const auto m = metric_at(flat, v1(x));
        EXPECT_NEAR(m.h(0, 0), std::exp(2.0 * x), 1e-14 * std::exp(2.0 * x));
        EXPECT_NEAR(m.H, std::exp(2.0 * x), 1e-14 * std::exp(2.0 * x));
    }
    EXPECT_DOUBLE_EQ(metric_at(flat, v1(0.0)).h(0, 0), 1.0);

    const auto fs = metric_at(make_builtin_potential("fubini_study", 1), v1(0.0));
    EXPECT_NEAR(fs.h(0, 0), 0.25, 1e-15);
    EXPECT_NEAR(fs.H, 0.25, 1e-15);

    for (int n : {1, 2, 3}) {
        const auto m = metric_at(make_builtin_potential("flat_cylinder", n), Vec::LinSpaced(n, -2.0, 1.0));
        EXPECT_TRUE(m.h.isApprox(0.5 * Mat::Identity(n, n)));
        EXPECT_NEAR(m.H, std::pow(2.0, -n), 1e-15);
    }
}

TEST(Metric, DeterminantRecomputes) {
    Rng rng(kDefaultSeed);
    for (const auto& phi : kahler_catalog()) {
        for (int s = 0; s < 20; ++s) {
            const Vec x = rng.uniform_in(Box::cube(phi.dimension(), -3.0, 3.0));
            const auto m = metric_at(phi, x);
            EXPECT_GT(m.H, 0.0);
            EXPECT_NEAR(m.H, m.h.determinant(), 1e-12 * m.H) << phi.name() << " n=" << phi.dimension();
        }
    }
}

TEST(Metric, NotKahlerCarriesEigenvalue) {
    const auto bad = make_builtin_potential("fubini_study", 1, {{"scale", -1.0}});
    try {
        (void)metric_at(bad, v1(0.0));
        FAIL() << "expected NotKahlerError";
    } catch (const NotKahlerError& e) {
        EXPECT_NEAR(e.eigenvalue(), -1.0, 1e-15);
    }
    const auto saddle = make_fd_potential("saddle", 2, [](const Vec& x) { return x[0] * x[0] - x[1] * x[1]; });
    EXPECT_THROW((void)metric_at(saddle, v2(0.0, 0.0)), NotKahlerError);
}

TEST(RicciPotential, Examples) {
    const auto flat = make_builtin_potential("flat", 1);
    for (double x : {-2.0, 0.0, 1.5}) EXPECT_NEAR(ricci_potential(flat, v1(x)), -2.0 * x, 1e-14);
    const auto cyl = make_builtin_potential("flat_cylinder", 1);
    for (double x : {-2.0, 0.0, 1.5}) EXPECT_NEAR(ricci_potential(cyl, v1(x)), std::log(2.0), 1e-15);
    EXPECT_NEAR(ricci_potential(make_builtin_potential("fubini_study", 1), v1(0.0)), std::log(4.0), 1e-15);
}

TEST(RicciForm, Examples) {
    for (int n : {1, 2, 3}) {
        const auto flat = make_builtin_potential("flat", n);
        for (double t : {-3.0, 0.0, 2.0}) EXPECT_LE(ricci_form(flat, Vec::Constant(n, t)).R.cwiseAbs().maxCoeff(), 1e-8);
    }
    const auto fs = make_builtin_potential("fubini_study", 1);
    for (double x : {-3.0, -0.4, 0.0, 1.1, 3.0}) {
        const double e = std::exp(2.0 * x), expected = 2.0 * e / ((1.0 + e) * (1.0 + e));
        EXPECT_NEAR(ricci_form(fs, v1(x)).R(0, 0), expected, 1e-10 * expected);
    }
    EXPECT_NEAR(ricci_form(fs, v1(0.0)).R(0, 0), 0.5, 1e-15);
    const auto ch = make_builtin_potential("cosh_neg", 1);
    EXPECT_NEAR(ricci_form(ch, v1(0.0)).R(0, 0), -1.0, 1e-8);
    for (double x : {-1.0, 0.3, 2.0}) EXPECT_NEAR(ricci_form(ch, v1(x)).R(0, 0), -sech(2.0 * x) * sech(2.0 * x), 1e-12);
}

TEST(RicciForm, FubiniStudyIsEinstein) {
    // R = (n + 1) h on CP^n.
    for (int n : {1, 2, 3}) {
        const auto fs = make_builtin_potential("fubini_study", n);
        Rng rng(kDefaultSeed + n);
        for (int s = 0; s < 200; ++s) {
            const Vec x = rng.uniform_in(Box::cube(n, -3.0, 3.0));
            const Mat R = ricci_form(fs, x).R;
            const Mat h = metric_at(fs, x).h;
            EXPECT_LE((R - (n + 1) * h).cwiseAbs().maxCoeff(), 1e-8 * h.cwiseAbs().maxCoeff()) << "n=" << n;
        }
    }
}

TEST(RicciForm, ProductIsBlockDiagonal) {
    const auto a = make_builtin_potential("fubini_study", 1);
    const auto b = make_builtin_potential("cosh_neg", 1);
    const auto ab = product(a, b);
    Rng rng(kDefaultSeed);
    for (int s = 0; s < 50; ++s) {
        const Vec x = rng.uniform_in(Box::cube(2, -3.0, 3.0));
        const Mat R = ricci_form(ab, x).R;
        EXPECT_NEAR(R(0, 0), ricci_form(a, x.head(1)).R(0, 0), 1e-9);
        EXPECT_NEAR(R(1, 1), ricci_form(b, x.tail(1)).R(0, 0), 1e-9);
        EXPECT_NEAR(R(0, 1), 0.0, 1e-9);
        EXPECT_EQ(R(0, 1), R(1, 0));
    }
}

TEST(RicciForm, TranslationEquivariant) {
    const Vec a = v2(1.5, -0.8);
    for (const char* name : {"fubini_study", "cosh_neg", "fs_quadratic"}) {
        const auto phi = make_builtin_potential(name, 2);
        const auto moved = make_builtin_potential(name, 2, {{"shift1", a[0]}, {"shift2", a[1]}});
        Rng rng(kDefaultSeed);
        for (int s = 0; s < 50; ++s) {
            const Vec x = rng.uniform_in(Box::cube(2, -3.0, 3.0));
            EXPECT_LE((ricci_form(phi, x).R - ricci_form(moved, x + a).R).cwiseAbs().maxCoeff(), 1e-9) << name;
        }
    }
}

TEST(RicciForm, FiniteDifferenceOracleAgrees) {
    for (const auto& phi : kahler_catalog()) {
        if (phi.dimension() > 2) continue;
        const auto fd = make_fd_potential(phi.name(), phi.dimension(), [phi](const Vec& x) { return phi.value(x); });
        Rng rng(kDefaultSeed);
        for (int s = 0; s < 10; ++s) {
            const Vec x = rng.uniform_in(Box::cube(phi.dimension(), -2.0, 2.0));
            const Mat R = ricci_form(phi, x).R;
            EXPECT_LE((ricci_form(fd, x).R - R).cwiseAbs().maxCoeff(), 1e-4 * (1.0 + R.cwiseAbs().maxCoeff()))
                << phi.name() << " n=" << phi.dimension();
        }
    }
}

TEST(RicciForm, SumExpClosedJetMatchesGenericRoute) {
    Rng rng(kDefaultSeed);
    for (int n : {1, 2, 3}) {
        for (int s = 0; s < 5; ++s) {
            Params p;
            for (int k = 1; k <= n + 2; ++k) {
                p["c" + std::to_string(k)] = std::exp(rng.uniform(-1.0, 1.0));
                for (int j = 1; j <= n; ++j) p["a" + std::to_string(k) + "_" + std::to_string(j)] = rng.uniform(-2.0, 2.0);
            }
            const auto phi = make_builtin_potential("sum_exp", n, p);
            // same potential without the closed-form jet
            const InvariantPotential plain(
                "plain", n, [phi](const Vec& x) { return phi.value(x); },
                [phi](std::span<const int> axes, const Vec& x) { return phi.derivative(axes, x); }, OracleKind::analytic,
                Box::unbounded(n));
            for (int k = 0; k < 10; ++k) {
                const Vec x = rng.uniform_in(Box::cube(n, -1.0, 1.0));
                const auto closed = log_det_hessian_jet(phi, x);
                const auto generic = log_det_hessian_jet(plain, x);
                EXPECT_NEAR(closed.value, std::log(phi.hessian(x).determinant()), 1e-10 * (1.0 + std::abs(closed.value)));
                EXPECT_LE((closed.gradient - generic.gradient).cwiseAbs().maxCoeff(), 1e-8);
                EXPECT_LE((closed.hessian - generic.hessian).cwiseAbs().maxCoeff(), 1e-8);
            }
        }
    }
}

TEST(RicciForm, SumExpStaysNonpositiveWhenIllConditioned) {
    // nearly opposite exponents a1, a2 leave Hess phi close to rank one
    const auto phi = make_builtin_potential("sum_exp", 2,
                                            {{"c1", 0.0557585}, {"a1_1", 0.716069}, {"a1_2", -0.703417},
                                             {"c2", 4.60904}, {"a2_1", -1.78975}, {"a2_2", 1.80563},
                                             {"c3", 0.108161}, {"a3_1", 1.49458}, {"a3_2", -0.180376}});
    const auto g = spaced_grid(Box::cube(2, -3.0, 3.0), 0.25);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LE(ricci_form(phi, g.point(i)).lambda_max, 1e-14);
    const auto c = classify_ricci(phi, g);
    EXPECT_TRUE(c.tag == SignTag::negative || c.tag == SignTag::semi_negative) << to_string(c.tag);
}

TEST(Classify, Examples) {
    const Box box = Box::cube(1, -3.0, 3.0);
    EXPECT_EQ(classify_ricci(make_builtin_potential("flat", 1), box).tag, SignTag::zero);
    EXPECT_EQ(classify_ricci(make_builtin_potential("fubini_study", 1), box).tag, SignTag::positive);
    EXPECT_EQ(classify_ricci(make_builtin_potential("cosh_neg", 1), box).tag, SignTag::negative);
    EXPECT_EQ(classify_ricci(make_builtin_potential("flat_cylinder", 2), Box::cube(2, -3.0, 3.0)).tag, SignTag::zero);
    EXPECT_EQ(classify_ricci(make_builtin_potential("fs_quadratic", 1), box).tag, SignTag::indefinite);
}

TEST(Classify, Tags) {
    EXPECT_EQ(classify_sign(-1e-9, 1e-9, 1e-7), SignTag::zero);
    EXPECT_EQ(classify_sign(1e-6, 1.0, 1e-7), SignTag::positive);
    EXPECT_EQ(classify_sign(0.0, 1.0, 1e-7), SignTag::semi_positive);
    EXPECT_EQ(classify_sign(-1.0, -1e-6, 1e-7), SignTag::negative);
    EXPECT_EQ(classify_sign(-1.0, 0.0, 1e-7), SignTag::semi_negative);
    EXPECT_EQ(classify_sign(-1.0, 1.0, 1e-7), SignTag::indefinite);
}

TEST(Classify, GridSpacing) {
    const Grid g = spaced_grid(Box::cube(1, -3.0, 3.0), kRicciGridSpacing);
    EXPECT_EQ(g.size(), 121u);
    const auto c = classify_ricci(make_builtin_potential("fubini_study", 1), Box::cube(1, -3.0, 3.0));
    EXPECT_EQ(c.points, 121u);
    EXPECT_NEAR(c.witness_max[0], 0.0, 1e-12);
    EXPECT_NEAR(c.lambda_max, 0.5, 1e-14);
}

TEST(RicciGeneral, Examples) {
    const auto e2x = field::laurent_abs2(1, {{1.0, {1}}});
    EXPECT_LE(ricci_general(e2x, v1(0.3), v1(1.0)).matrix.cwiseAbs().maxCoeff(), 1e-14);

    const auto one_plus = field::laurent_abs2(1, {{1.0, {0}}, {1.0, {1}}});
    for (double x : {-3.0, -1.0, -0.2})
        for (double y : {0.0, 1.0, 3.0})
            EXPECT_LE(ricci_general(one_plus, v1(x), v1(y)).matrix.cwiseAbs().maxCoeff(), 1e-12);

    EXPECT_THROW(ricci_general(e2x.scaled(-1.0), v1(0.0), v1(0.0)), DomainError);
}

TEST(RicciGeneral, MatchesInvariantForm) {
    for (const auto& phi : kahler_catalog()) {
        const int n = phi.dimension();
        const auto H = anticanonical_density(phi);
        const auto Hfd = anticanonical_density_fd(phi);
        Rng rng(kDefaultSeed);
        for (int s = 0; s < 10; ++s) {
            const Vec x = rng.uniform_in(Box::cube(n, -2.0, 2.0));
            const Vec y = rng.uniform_in(Box::cube(n, 0.0, kTwoPi));
            const Mat R = ricci_form(phi, x).R;
            const LeviForm L = ricci_general(H, x, y);
            const double scale = 1.0 + R.cwiseAbs().maxCoeff();
            EXPECT_LE((L.complex_hessian().real() - R).cwiseAbs().maxCoeff(), 1e-6 * scale) << phi.name();
            EXPECT_LE(L.complex_hessian().imag().cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_LE((0.5 * L.matrix.topLeftCorner(n, n) - R).cwiseAbs().maxCoeff(), 1e-6 * scale);
            const LeviForm Lfd = ricci_general(Hfd, x, y);
            EXPECT_LE((Lfd.complex_hessian().real() - R).cwiseAbs().maxCoeff(), 1e-4 * scale) << phi.name() << " (fd)";
        }
    }
}

TEST(RicciGeneral, ExpOfPshHasNonpositiveCurvature) {
    const auto psi = field::laurent_abs2(2, {{1.0, {0, 0}}, {1.0, {1, 0}}, {0.5, {0, 1}}});
    const auto H = exp_density(psi);
    Rng rng(kDefaultSeed);
    for (int s = 0; s < 50; ++s) {
        const Vec x = rng.uniform_in(Box::cube(2, -2.0, 0.5));
        const Vec y = rng.uniform_in(Box::cube(2, 0.0, kTwoPi));
        const LeviForm L = ricci_general(H, x, y);
        EXPECT_LE((L.matrix + levi_form(psi, x, y).matrix).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + L.matrix.norm()));
        EXPECT_LE(L.eigenvalues().maxCoeff(), 1e-9 * (1.0 + L.matrix.norm()));
    }
}
