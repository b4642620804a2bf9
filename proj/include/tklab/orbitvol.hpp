#pragma once

/**
 * @file orbitvol.hpp
 * @brief J-volume of the canonical tori, convexity profiles, moment maps and
 *        the critical-orbit solver.
 *
 * For an invariant potential, Vol_J(x) = (2 pi)^n sqrt(H(x)); for a general
 * density it is the torus integral of sqrt(H(x, .)).
 */

#include "tklab/kahler.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tklab {

inline double j_volume(const InvariantPotential& phi, const Vec& x) {
    return std::pow(kTwoPi, phi.dimension()) * std::sqrt(metric_at(phi, x).H);
}

/// log Vol_J = n log 2pi + (1/2) log det((1/4) Hess phi), without forming H.
inline double log_j_volume(const InvariantPotential& phi, const Vec& x) {
    const int n = phi.dimension();
    return n * std::log(kTwoPi) - 0.5 * ricci_potential(phi, x);
}

namespace detail {
inline auto sqrt_density(const PeriodicScalarField& H) {
    return [&H](const Vec& x, const Vec& y) {
        const double h = H.value(x, y);
        if (!(h > 0.0)) throw DomainError("anti-canonical density sample is not positive");
        return std::sqrt(h);
    };
}
}  // namespace detail

/// Torus integral of sqrt(H), auto-refined trapezoid.
inline double j_volume_general(const PeriodicScalarField& H, const Vec& x) {
    return torus_quadrature_auto(detail::sqrt_density(H), x, H.dimension()).value;
}

/// Torus integral of sqrt(H) with a fixed rule.
inline double j_volume_general(const PeriodicScalarField& H, const Vec& x, const QuadratureRule& rule) {
    return torus_quadrature(detail::sqrt_density(H), x, rule);
}

/// mu(x) = (1/2) grad phi(x).
inline Vec moment_map(const InvariantPotential& phi, const Vec& x) { return 0.5 * phi.gradient(x); }

/**
 * omega = (1/2) sum phi_jk dx_j ^ dy_k as a 2n x 2n matrix in the (x, y)
 * basis: omega(u, v) = u^t W v.
 */
inline Mat symplectic_form(const InvariantPotential& phi, const Vec& x) {
    const int n = phi.dimension();
    const Mat half = 0.5 * phi.hessian(x);
    Mat w = Mat::Zero(2 * n, 2 * n);
    w.topRightCorner(n, n) = half;
    w.bottomLeftCorner(n, n) = -half.transpose();
    return w;
}

/**
 * Fundamental vector field of the j-th circle factor. With mu = (1/2) grad phi
 * the identity d(mu_j) = omega(X_j, .) fixes X_j = -d/dy_j.
 */
inline Vec fundamental_field(int n, int j) { return -unit(2 * n, n + j); }

/**
 * max over j and over the 2n directions of |d(mu_j) - omega(X_j, .)|, where
 * d(mu_j) is a central-difference differential of mu_j (zero along y since
 * mu is invariant).
 */
inline double hamiltonian_residual(const InvariantPotential& phi, const Vec& x) {
    const int n = phi.dimension();
    const Mat w = symplectic_form(phi, x);
    double worst = 0.0;
    for (int j = 0; j < n; ++j) {
        auto mu_j = [&phi, j](const Vec& p) { return moment_map(phi, p)[j]; };
        Vec dmu = Vec::Zero(2 * n);
        for (int k = 0; k < n; ++k) {
            MultiIndex a(static_cast<std::size_t>(n), 0);
            a[static_cast<std::size_t>(k)] = 1;
            dmu[k] = fd_partial(mu_j, a, x);
        }
        const Vec contraction = w.transpose() * fundamental_field(n, j);  // omega(X_j, e_u) = X_j^t W e_u
        worst = std::max(worst, (dmu - contraction).cwiseAbs().maxCoeff());
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Profiles and the convexity theorem
// ---------------------------------------------------------------------------

struct OrbitProfile {
    std::string potential;
    int n = 0;
    std::vector<Vec> points;
    std::vector<double> H, vol, logvol, ric_min, ric_max;
    std::vector<Vec> mu;  ///< empty for general densities

    [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
};

struct ProfileReport {
    OrbitProfile profile;
    ConvexityVerdict logvol;
    ConvexityVerdict vol;
    ConvexityVerdict inv_vol;
};

inline OrbitProfile sample_profile(const InvariantPotential& phi, const Grid& grid) {
    OrbitProfile p;
    p.potential = phi.name();
    p.n = phi.dimension();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec x = grid.point(i);
        const MetricAtPoint m = metric_at(phi, x);
        const RicciAtPoint r = ricci_form(phi, x);
        p.points.push_back(x);
        p.H.push_back(m.H);
        p.vol.push_back(j_volume(phi, x));
        p.logvol.push_back(log_j_volume(phi, x));
        p.ric_min.push_back(r.lambda_min);
        p.ric_max.push_back(r.lambda_max);
        p.mu.push_back(moment_map(phi, x));
    }
    return p;
}

/// Profile over `grid` plus verdicts for log Vol, Vol and 1/Vol on the grid's box.
inline ProfileReport logvol_profile(const InvariantPotential& phi, const Grid& grid, const ConvexityOptions& opt = {}) {
    if (grid.size() == 0) throw InputError("profile grid is empty");
    ProfileReport r;
    r.profile = sample_profile(phi, grid);
    const Box region = grid.bounds();
    r.logvol = check_convexity([&](const Vec& x) { return log_j_volume(phi, x); }, region, opt);
    r.vol = check_convexity([&](const Vec& x) { return j_volume(phi, x); }, region, opt);
    r.inv_vol = check_convexity([&](const Vec& x) { return 1.0 / j_volume(phi, x); }, region, opt);
    return r;
}

/// Profile of a general density: Ricci range from the Levi form of -log H over angles.
inline ProfileReport logvol_profile(const PeriodicScalarField& H, const Grid& grid, const ConvexityOptions& opt = {},
                                    int angles_per_axis = 8) {
    if (grid.size() == 0) throw InputError("profile grid is empty");
    const int n = H.dimension();
    const Grid ys = angle_grid(n, angles_per_axis);
    ProfileReport r;
    r.profile.potential = H.label();
    r.profile.n = n;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec x = grid.point(i);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t j = 0; j < ys.size(); ++j) {
            // Ricci eigenvalues are those of the complex Hessian: half the Levi spectrum.
            const Vec ev = 0.5 * ricci_general(H, x, ys.point(j)).eigenvalues();
            lo = std::min(lo, ev[0]);
            hi = std::max(hi, ev[ev.size() - 1]);
        }
        const double v = j_volume_general(H, x);
        r.profile.points.push_back(x);
        r.profile.H.push_back(torus_average(H, x));
        r.profile.vol.push_back(v);
        r.profile.logvol.push_back(std::log(v));
        r.profile.ric_min.push_back(lo);
        r.profile.ric_max.push_back(hi);
    }
    const Box region = grid.bounds();
    r.logvol = check_convexity([&](const Vec& x) { return std::log(j_volume_general(H, x)); }, region, opt);
    r.vol = check_convexity([&](const Vec& x) { return j_volume_general(H, x); }, region, opt);
    r.inv_vol = check_convexity([&](const Vec& x) { return 1.0 / j_volume_general(H, x); }, region, opt);
    return r;
}

/// Coarse classes of the equivalence table.
enum class CurvatureClass { nonpositive, nonnegative, zero, indefinite };

inline std::string to_string(CurvatureClass c) {
    switch (c) {
        case CurvatureClass::nonpositive: return "<=0";
        case CurvatureClass::nonnegative: return ">=0";
        case CurvatureClass::zero: return "=0";
        case CurvatureClass::indefinite: return "indefinite";
    }
    return "?";
}

inline CurvatureClass curvature_class(SignTag t) {
    switch (t) {
        case SignTag::positive:
        case SignTag::semi_positive: return CurvatureClass::nonnegative;
        case SignTag::negative:
        case SignTag::semi_negative: return CurvatureClass::nonpositive;
        case SignTag::zero: return CurvatureClass::zero;
        case SignTag::indefinite: return CurvatureClass::indefinite;
    }
    return CurvatureClass::indefinite;
}

/// Class predicted for log Vol by its convexity: convex <-> Ric <= 0, etc.
inline CurvatureClass curvature_class(ConvexityTag t) {
    switch (t) {
        case ConvexityTag::convex:
        case ConvexityTag::strictly_convex: return CurvatureClass::nonpositive;
        case ConvexityTag::concave:
        case ConvexityTag::strictly_concave: return CurvatureClass::nonnegative;
        case ConvexityTag::linear: return CurvatureClass::zero;
        case ConvexityTag::indefinite: return CurvatureClass::indefinite;
    }
    return CurvatureClass::indefinite;
}

struct ConsistencyReport {
    SignClassification ricci;
    ConvexityVerdict logvol;
    ConvexityVerdict vol;
    ConvexityVerdict inv_vol;
    bool table_holds = false;       ///< Ricci class == log Vol class
    bool implications_hold = false; ///< Ric <= 0 => Vol convex; Ric >= 0 => 1/Vol convex
    bool pass = false;
    std::string detail;
};

/**
 * Cross-tabulate the Ricci sign on `region` against the convexity of log Vol:
 * Ric <= 0 <-> convex, Ric >= 0 <-> concave, Ric = 0 <-> linear, and
 * indefinite <-> indefinite. The one-way consequences for Vol and 1/Vol are
 * checked as well.
 */
inline ConsistencyReport consistency_theorem(const InvariantPotential& phi, const Box& region,
                                             const ConvexityOptions& opt = {}, double ricci_tol = 1e-7) {
    ConsistencyReport r;
    r.ricci = classify_ricci(phi, region, ricci_tol);
    r.logvol = check_convexity([&](const Vec& x) { return log_j_volume(phi, x); }, region, opt);
    r.vol = check_convexity([&](const Vec& x) { return j_volume(phi, x); }, region, opt);
    r.inv_vol = check_convexity([&](const Vec& x) { return 1.0 / j_volume(phi, x); }, region, opt);
    const auto rc = curvature_class(r.ricci.tag);
    const auto vc = curvature_class(r.logvol.tag);
    r.table_holds = rc == vc;
    r.implications_hold = true;
    if (rc == CurvatureClass::nonpositive || rc == CurvatureClass::zero)
        r.implications_hold = r.implications_hold && is_convex(r.vol.tag);
    if (rc == CurvatureClass::nonnegative || rc == CurvatureClass::zero)
        r.implications_hold = r.implications_hold && is_convex(r.inv_vol.tag);
    r.pass = r.table_holds && r.implications_hold;
    r.detail = "Ric " + to_string(r.ricci.tag) + " <-> log Vol " + to_string(r.logvol.tag) + "; Vol " +
               to_string(r.vol.tag) + "; 1/Vol " + to_string(r.inv_vol.tag);
    return r;
}

// ---------------------------------------------------------------------------
// Critical orbit
// ---------------------------------------------------------------------------

struct CriticalOptions {
    int max_iterations = 100;
    double armijo = 1e-4;
    double gradient_tol = 1e-10;
    bool require_unique = false;
    /// Precomputed Ricci sign of the region; computed when absent.
    std::optional<SignClassification> ricci;
};

struct CriticalOrbitResult {
    Vec x;
    double vol = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    ConvexityTag certificate = ConvexityTag::indefinite;  ///< log Vol shape implied by the Ricci sign
    bool unique = false;
    bool converged = false;
};

/**
 * Damped Newton ascent on log Vol_J. The gradient and Hessian of log Vol are
 * half those of log det Hess phi. Steps are halved until the Armijo condition
 * holds and the iterate stays in `region`.
 */
inline CriticalOrbitResult find_critical_orbit(const InvariantPotential& phi, const Vec& seed, const Box& region,
                                               const CriticalOptions& opt = {}) {
    if (!region.contains(seed)) throw InputError("seed lies outside the search region");
    const SignClassification sign = opt.ricci ? *opt.ricci : classify_ricci(phi, region);
    CriticalOrbitResult res;
    res.unique = sign.tag == SignTag::positive;
    switch (curvature_class(sign.tag)) {
        case CurvatureClass::nonnegative:
            res.certificate = sign.tag == SignTag::positive ? ConvexityTag::strictly_concave : ConvexityTag::concave;
            break;
        case CurvatureClass::nonpositive:
            res.certificate = sign.tag == SignTag::negative ? ConvexityTag::strictly_convex : ConvexityTag::convex;
            break;
        case CurvatureClass::zero: res.certificate = ConvexityTag::linear; break;
        case CurvatureClass::indefinite: res.certificate = ConvexityTag::indefinite; break;
    }
    if (opt.require_unique && !res.unique)
        throw NumericalError("uniqueness requested but the Ricci form is not positive on the region");

    auto objective = [&phi](const Vec& x) { return log_j_volume(phi, x); };
    Vec x = seed;
    for (int it = 0;; ++it) {
        const LogDetJet jet = log_det_hessian_jet(phi, x);
        const Vec g = 0.5 * jet.gradient;
        const Mat h = 0.5 * jet.hessian;
        const double vol = j_volume(phi, x);
        res.x = x;
        res.vol = vol;
        res.gradient_norm = g.norm();
        res.iterations = it;
        if (res.gradient_norm <= opt.gradient_tol * (1.0 + std::abs(vol))) {
            res.converged = true;
            return res;
        }
        if (it >= opt.max_iterations) return res;

        Vec step;
        if (symmetric_eigenvalues(h).maxCoeff() < 0.0) {
            step = -h.ldlt().solve(g);
        } else {
            if (opt.require_unique) throw NumericalError("log Vol Hessian is not negative definite at an iterate");
            step = g;
        }
        const double f0 = objective(x);
        const double slope = g.dot(step);
        bool accepted = false;
        for (double t = 1.0; t > 1e-16; t *= 0.5) {
            const Vec trial = x + t * step;
            if (!region.contains(trial)) continue;
            if (objective(trial) >= f0 + opt.armijo * t * slope) {
                x = trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Near the optimum the Armijo gain drops below rounding in f; a
            // full Newton step is still acceptable if it shrinks the gradient.
            const Vec trial = x + step;
            if (region.contains(trial) && (0.5 * log_det_hessian_jet(phi, trial).gradient).norm() < res.gradient_norm) {
                x = trial;
            } else {
                throw NumericalError("Newton ascent left the search region or stalled");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Boundary decay
// ---------------------------------------------------------------------------

struct DecayReport {
    Vec direction;
    std::vector<double> ts;
    std::vector<double> vols;
    double ratio = 0.0;  ///< Vol(T d) / Vol(0)
    bool monotone_tail = false;
    bool holds = false;
};

inline constexpr double kDecayThreshold = 1e-8;

/**
 * Sample Vol_J(t d) for t in [0, t_max] and check that it eventually
 * decreases monotonically (over the last half of the samples) and that
 * Vol(t_max d) <= 1e-8 Vol(0).
 */
inline DecayReport boundary_decay(const InvariantPotential& phi, const Vec& direction, double t_max = 20.0,
                                  double t_step = 0.5) {
    if (!phi.compactifiable())
        throw InputError("boundary decay needs a compactifiable potential; '" + phi.name() + "' is not");
    if (direction.size() != phi.dimension() || !(direction.norm() > 0.0))
        throw InputError("decay direction must be a nonzero vector of the potential's dimension");
    if (!(t_max > 0.0) || !(t_step > 0.0)) throw InputError("decay range must be positive");
    DecayReport r;
    r.direction = direction.normalized();
    const auto count = static_cast<int>(std::floor(t_max / t_step + 1e-9));
    for (int i = 0; i <= count; ++i) r.ts.push_back(i * t_step);
    if (r.ts.back() < t_max) r.ts.push_back(t_max);
    for (double t : r.ts) r.vols.push_back(j_volume(phi, t * r.direction));
    r.ratio = r.vols.back() / r.vols.front();
    r.monotone_tail = true;
    for (std::size_t i = r.vols.size() / 2 + 1; i < r.vols.size(); ++i)
        r.monotone_tail = r.monotone_tail && r.vols[i] < r.vols[i - 1];
    r.holds = r.monotone_tail && r.ratio <= kDecayThreshold;
    return r;
}

}  // namespace tklab
