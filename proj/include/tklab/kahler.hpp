#pragma once

/**
 * @file kahler.hpp
 * @brief Metric, anti-canonical density and Ricci form of an invariant potential.
 *
 * With w = x + iy and phi = phi(x), the complex Hessian is
 * h_{jk} = d^2 phi / dw_j dw-bar_k = (1/4) Hess_x phi, and H = det h is the
 * anti-canonical density. The Ricci form has potential -log H; on invariant
 * data its complex Hessian is R = (1/4) Hess_x(-log det Hess_x phi).
 */

#include "tklab/psh.hpp"

#include <string>

namespace tklab {

struct MetricAtPoint {
    int n = 0;
    Mat h;           ///< (1/4) Hess_x phi
    double H = 0.0;  ///< det h
};

/**
 * Throws NotKahlerError (carrying the smallest eigenvalue) unless Hess phi > 0.
 * Entries with a closed-form log det are positive definite everywhere; for
 * them H comes from that formula, which stays accurate where the smallest
 * eigenvalue drops below the rounding of the entries.
 */
inline MetricAtPoint metric_at(const InvariantPotential& phi, const Vec& x) {
    const int n = phi.dimension();
    const Mat hess = phi.hessian(x);
    MetricAtPoint m;
    m.n = n;
    m.h = 0.25 * hess;
    if (const auto ld = phi.closed_form_log_det(x)) {
        m.H = std::exp(*ld - n * std::log(4.0));
        return m;
    }
    const Vec ev = symmetric_eigenvalues(hess);
    if (!(ev[0] > 0.0))
        throw NotKahlerError("potential '" + phi.name() + "' is not Kahler at this point: Hessian eigenvalue " +
                                 std::to_string(ev[0]),
                             ev[0]);
    m.H = m.h.determinant();
    return m;
}

/**
 * Analytic route: d_k log det P = tr(P^-1 T_k) and
 * d_k d_l log det P = tr(P^-1 Q_kl) - tr(P^-1 T_l P^-1 T_k), with
 * P = Hess phi, T_k = d_k P, Q_kl = d_k d_l P.
 * Finite-difference potentials use order-4 central differences of the
 * value log det P instead, with step 1e-2 to keep nested noise down.
 * Entries that carry a closed-form jet use it directly.
 */
inline LogDetJet log_det_hessian_jet(const InvariantPotential& phi, const Vec& x) {
    if (auto closed = phi.closed_form_log_det_jet(x)) return *closed;
    const int n = phi.dimension();
    const Mat P = phi.hessian(x);
    const Vec ev = symmetric_eigenvalues(P);
    if (!(ev[0] > 0.0)) throw NotKahlerError("potential '" + phi.name() + "' is not Kahler at this point", ev[0]);
    LogDetJet j;
    j.gradient.resize(n);
    j.hessian.resize(n, n);
    j.value = ev.array().log().sum();

    if (phi.oracle_kind() == OracleKind::analytic) {
        const Mat Pinv = P.llt().solve(Mat::Identity(n, n));
        const auto T = phi.third(x);
        const auto Q = phi.fourth(x);
        std::vector<Mat> PinvT;
        for (int k = 0; k < n; ++k) {
            PinvT.push_back(Pinv * T[static_cast<std::size_t>(k)]);
            j.gradient[k] = PinvT.back().trace();
        }
        for (int k = 0; k < n; ++k)
            for (int l = k; l < n; ++l)
                j.hessian(k, l) = j.hessian(l, k) = (Pinv * Q[static_cast<std::size_t>(k * n + l)]).trace() -
                                                    (PinvT[static_cast<std::size_t>(l)] * PinvT[static_cast<std::size_t>(k)]).trace();
        return j;
    }

    auto logdet = [&phi](const Vec& p) {
        const Vec e = symmetric_eigenvalues(phi.hessian(p));
        if (!(e[0] > 0.0)) throw NotKahlerError("finite-difference stencil left the Kahler region", e[0]);
        return e.array().log().sum();
    };
    const double step = 1e-2 * std::max(1.0, x.cwiseAbs().maxCoeff());
    for (int k = 0; k < n; ++k) {
        MultiIndex a(static_cast<std::size_t>(n), 0);
        a[static_cast<std::size_t>(k)] = 1;
        j.gradient[k] = fd_partial(logdet, a, x, step);
        for (int l = k; l < n; ++l) {
            MultiIndex b(static_cast<std::size_t>(n), 0);
            ++b[static_cast<std::size_t>(k)];
            ++b[static_cast<std::size_t>(l)];
            j.hessian(k, l) = j.hessian(l, k) = fd_partial(logdet, b, x, step);
        }
    }
    return j;
}

/// -log H(x) = -log det((1/4) Hess phi).
inline double ricci_potential(const InvariantPotential& phi, const Vec& x) {
    if (const auto ld = phi.closed_form_log_det(x)) return phi.dimension() * std::log(4.0) - *ld;
    const MetricAtPoint m = metric_at(phi, x);
    return -(symmetric_eigenvalues(m.h).array().log().sum());
}

struct RicciAtPoint {
    int n = 0;
    Mat R;  ///< complex Hessian of -log H; symmetric
    double lambda_min = 0.0;
    double lambda_max = 0.0;
};

inline RicciAtPoint ricci_form(const InvariantPotential& phi, const Vec& x) {
    const LogDetJet j = log_det_hessian_jet(phi, x);
    RicciAtPoint r;
    r.n = phi.dimension();
    r.R = -0.25 * j.hessian;
    const Vec ev = symmetric_eigenvalues(r.R);
    r.lambda_min = ev[0];
    r.lambda_max = ev[ev.size() - 1];
    return r;
}

enum class SignTag { positive, negative, zero, semi_positive, semi_negative, indefinite };

inline std::string to_string(SignTag t) {
    switch (t) {
        case SignTag::positive: return "positive";
        case SignTag::negative: return "negative";
        case SignTag::zero: return "zero";
        case SignTag::semi_positive: return "semi-positive";
        case SignTag::semi_negative: return "semi-negative";
        case SignTag::indefinite: return "indefinite";
    }
    return "?";
}

struct SignClassification {
    SignTag tag = SignTag::indefinite;
    double tolerance = 1e-7;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    Vec witness_min;  ///< point attaining lambda_min
    Vec witness_max;
    std::size_t points = 0;
};

/// Tag from the extreme eigenvalues of a sweep: strict tags need a uniform margin.
inline SignTag classify_sign(double lmin, double lmax, double tol) {
    if (lmin >= -tol && lmax <= tol) return SignTag::zero;
    if (lmin >= tol) return SignTag::positive;
    if (lmax <= -tol) return SignTag::negative;
    if (lmin >= -tol) return SignTag::semi_positive;
    if (lmax <= tol) return SignTag::semi_negative;
    return SignTag::indefinite;
}

/// Grid with spacing <= `spacing` covering a bounded box.
inline Grid spaced_grid(const Box& region, double spacing) {
    std::vector<std::vector<double>> axes;
    for (const auto& iv : region.axes) {
        const int count = std::max(2, static_cast<int>(std::ceil((iv.hi - iv.lo) / spacing - 1e-9)) + 1);
        std::vector<double> a;
        for (int i = 0; i < count; ++i) a.push_back(iv.lo + (iv.hi - iv.lo) * i / (count - 1));
        axes.push_back(std::move(a));
    }
    return Grid(std::move(axes));
}

/// Default sweep spacing for classify_ricci.
inline constexpr double kRicciGridSpacing = 0.05;

/// Eigenvalue sweep of the Ricci form over the grid.
inline SignClassification classify_ricci(const InvariantPotential& phi, const Grid& grid, double tol = 1e-7) {
    SignClassification c;
    c.tolerance = tol;
    c.lambda_min = std::numeric_limits<double>::infinity();
    c.lambda_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec x = grid.point(i);
        const RicciAtPoint r = ricci_form(phi, x);
        if (r.lambda_min < c.lambda_min) {
            c.lambda_min = r.lambda_min;
            c.witness_min = x;
        }
        if (r.lambda_max > c.lambda_max) {
            c.lambda_max = r.lambda_max;
            c.witness_max = x;
        }
        ++c.points;
    }
    c.tag = classify_sign(c.lambda_min, c.lambda_max, tol);
    return c;
}

inline SignClassification classify_ricci(const InvariantPotential& phi, const Box& region, double tol = 1e-7) {
    return classify_ricci(phi, spaced_grid(region, kRicciGridSpacing), tol);
}

/// The anti-canonical density H(x) = det((1/4) Hess phi(x)) as a field.
inline PeriodicScalarField anticanonical_density(const InvariantPotential& phi) {
    const int n = phi.dimension();
    auto value = [phi](const Vec& x, const Vec&) { return metric_at(phi, x).H; };
    auto jet = [phi, n](const Vec& x, const Vec&) {
        // H = 4^-n exp(l), l = log det Hess phi
        const LogDetJet l = log_det_hessian_jet(phi, x);
        const double H = std::exp(l.value) / std::pow(4.0, n);
        Jet2 j{H, Vec::Zero(2 * n), Mat::Zero(2 * n, 2 * n)};
        j.gradient.head(n) = H * l.gradient;
        j.hessian.topLeftCorner(n, n) = H * (l.gradient * l.gradient.transpose() + l.hessian);
        return j;
    };
    PeriodicScalarField f(n, "det(metric of " + phi.name() + ")");
    f.add(1.0, detail::CustomTerm{value, jet, true});
    return f;
}

/// Same density with a jet from central differences of H itself; an
/// independent route to the curvature for cross-checks.
inline PeriodicScalarField anticanonical_density_fd(const InvariantPotential& phi) {
    const int n = phi.dimension();
    auto H = [phi](const Vec& x) { return metric_at(phi, x).H; };
    auto value = [H](const Vec& x, const Vec&) { return H(x); };
    auto jet = [H, n](const Vec& x, const Vec&) {
        Jet2 j{H(x), Vec::Zero(2 * n), Mat::Zero(2 * n, 2 * n)};
        for (int a = 0; a < n; ++a) {
            MultiIndex e(static_cast<std::size_t>(n), 0);
            e[static_cast<std::size_t>(a)] = 1;
            j.gradient[a] = fd_partial(H, e, x);
            for (int b = a; b < n; ++b) {
                MultiIndex ab(static_cast<std::size_t>(n), 0);
                ++ab[static_cast<std::size_t>(a)];
                ++ab[static_cast<std::size_t>(b)];
                j.hessian(a, b) = j.hessian(b, a) = fd_partial(H, ab, x);
            }
        }
        return j;
    };
    PeriodicScalarField f(n, "det(metric of " + phi.name() + "), differenced");
    f.add(1.0, detail::CustomTerm{value, jet, true});
    return f;
}

/// H = exp(psi). Its curvature is the Levi form of -psi, so PSH psi gives rho <= 0.
inline PeriodicScalarField exp_density(const PeriodicScalarField& psi) {
    const int n = psi.dimension();
    auto value = [psi](const Vec& x, const Vec& y) { return std::exp(psi.value(x, y)); };
    auto jet = [psi](const Vec& x, const Vec& y) {
        const Jet2 p = psi.jet(x, y);
        const double e = std::exp(p.value);
        return Jet2{e, e * p.gradient, e * (p.hessian + p.gradient * p.gradient.transpose())};
    };
    PeriodicScalarField f(n, "exp(" + psi.label() + ")");
    f.add(1.0, detail::CustomTerm{value, jet, psi.y_independent()});
    return f;
}

/**
 * Curvature of a general (possibly y-dependent) anti-canonical density H:
 * the Levi form of -log H at (x, y). Its complex Hessian is the Ricci form.
 */
inline LeviForm ricci_general(const PeriodicScalarField& H, const Vec& x, const Vec& y) {
    const Jet2 j = H.jet(x, y);
    if (!(j.value > 0.0)) throw DomainError("anti-canonical density must be positive");
    const Mat hess = -(j.hessian / j.value - j.gradient * j.gradient.transpose() / (j.value * j.value));
    return levi_form_from_hessian(hess);
}

}  // namespace tklab
