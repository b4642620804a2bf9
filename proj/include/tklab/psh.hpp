#pragma once

/**
 * @file psh.hpp
 * @brief Levi forms, plurisubharmonicity checks, torus averages and maxima.
 *
 * Conventions. At a point p = (x, y) the Levi form is written in the real
 * basis (d/dx_1 .. d/dx_n, d/dy_1 .. d/dy_n) as
 *
 *     L = 1/2 [[A, B^t], [B, A]],   A_jk = f_{x_j x_k} + f_{y_j y_k},
 *                                    B_jk = f_{x_j y_k} - f_{x_k y_j},
 *
 * which for n = 2 reproduces the classical explicit 4x4 matrix entry by entry.
 * L is the real form of the Hermitian matrix 2 [d^2 f / dw_j dw-bar_k], so its
 * spectrum is twice the complex-Hessian spectrum, each value doubled in
 * multiplicity.
 */

#include "tklab/funcspace.hpp"

#include <concepts>
#include <string>
#include <vector>

namespace tklab {

/// Anything with a dimension n and a (2n x 2n) real Hessian in the (x, y) basis.
template <typename F>
concept SecondOrderField = requires(const F& f, const Vec& v) {
    { f.dimension() } -> std::convertible_to<int>;
    { f.hessian(v, v) } -> std::convertible_to<Mat>;
};

/// Anything evaluable as f(x, y).
template <typename F>
concept TorusIntegrand = requires(const F& f, const Vec& v) {
    { f(v, v) } -> std::convertible_to<double>;
};

struct LeviForm {
    int n = 0;
    Mat matrix;  ///< 2n x 2n, symmetric
    Mat A;       ///< n x n, symmetric
    Mat B;       ///< n x n, antisymmetric

    [[nodiscard]] double trace() const { return matrix.trace(); }
    [[nodiscard]] Vec eigenvalues() const { return symmetric_eigenvalues(matrix); }
    [[nodiscard]] double min_eigenvalue() const { return eigenvalues()[0]; }
    /// d^2 f / dw_j dw-bar_k = (A + iB) / 4.
    [[nodiscard]] CMat complex_hessian() const {
        CMat m(n, n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) m(j, k) = {0.25 * A(j, k), 0.25 * B(j, k)};
        return m;
    }
};

/// Assemble the Levi form from the real (x, y) Hessian of f.
inline LeviForm levi_form_from_hessian(const Mat& hess) {
    const auto n = static_cast<int>(hess.rows() / 2);
    if (hess.rows() != 2 * n || hess.cols() != 2 * n || n < 1) throw InputError("Hessian must be 2n x 2n");
    const Mat hxx = hess.topLeftCorner(n, n);
    const Mat hyy = hess.bottomRightCorner(n, n);
    const Mat hxy = hess.topRightCorner(n, n);  // (j, k) -> f_{x_j y_k}
    LeviForm L;
    L.n = n;
    L.A = hxx + hyy;
    L.B = hxy - hxy.transpose();
    L.matrix.resize(2 * n, 2 * n);
    L.matrix << L.A, L.B.transpose(), L.B, L.A;
    L.matrix *= 0.5;
    return L;
}

template <SecondOrderField F>
LeviForm levi_form(const F& f, const Vec& x, const Vec& y) {
    return levi_form_from_hessian(f.hessian(x, y));
}

/// Complex Hessian computed directly from the real Hessian (independent of
/// the block assembly above; used as a cross-check).
inline CMat complex_hessian_from_real(const Mat& hess) {
    const auto n = hess.rows() / 2;
    CMat m(n, n);
    using namespace std::complex_literals;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) {
            // (d_xj - i d_yj)(d_xk + i d_yk) / 4
            m(j, k) = 0.25 * (hess(j, k) + hess(n + j, n + k) + 1i * hess(j, n + k) - 1i * hess(n + j, k));
        }
    return m;
}

// ---------------------------------------------------------------------------
// PSH check
// ---------------------------------------------------------------------------

struct PshReport {
    bool holds = true;
    double min_eigenvalue = 0.0;
    Vec witness_x;
    Vec witness_y;
    double tolerance = 0.0;  ///< tolerance applied at the witness point
    std::size_t points_checked = 0;
};

/// Angle grid with N nodes per angle (lexicographic).
inline Grid angle_grid(int n, int N) {
    std::vector<std::vector<double>> axes(static_cast<std::size_t>(n));
    for (auto& a : axes)
        for (int j = 0; j < N; ++j) a.push_back(kTwoPi * j / N);
    return Grid(std::move(axes));
}

/**
 * Minimum Levi eigenvalue over the product of an x-grid and an N^n angle
 * grid. PSH holds iff every point has lambda_min >= -rel_tol (1 + |L|).
 */
template <SecondOrderField F>
PshReport is_psh(const F& f, const Grid& xs, int angles_per_axis = 8, double rel_tol = 1e-8) {
    const int n = f.dimension();
    const Grid ys = angle_grid(n, angles_per_axis);
    PshReport r;
    r.min_eigenvalue = std::numeric_limits<double>::infinity();
    double worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Vec x = xs.point(i);
        for (std::size_t j = 0; j < ys.size(); ++j) {
            const Vec y = ys.point(j);
            const Vec ev = levi_form(f, x, y).eigenvalues();
            const double norm = std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
            const double tol = rel_tol * (1.0 + norm);
            ++r.points_checked;
            if (ev[0] + tol < worst_margin) {
                worst_margin = ev[0] + tol;
                r.witness_x = x;
                r.witness_y = y;
                r.tolerance = tol;
            }
            r.min_eigenvalue = std::min(r.min_eigenvalue, ev[0]);
        }
    }
    r.holds = worst_margin >= 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Torus average F and maximum M
// ---------------------------------------------------------------------------

/// F(x) = (2 pi)^-n * integral of f(x, y) dy, trapezoidal with auto-refinement.
template <TorusIntegrand F>
double torus_average(const F& f, const Vec& x) {
    const int n = static_cast<int>(x.size());
    return torus_quadrature_auto(f, x, n).value / std::pow(kTwoPi, n);
}

struct HadamardResult {
    double value = 0.0;
    Vec angle;
};

/// Default angular grid for the maximum: dense in low dimension, coarse for n >= 3.
inline int default_hadamard_grid(int n) { return n <= 2 ? 32 : 8; }

/**
 * M(x) = max over T^n of f(x, .). A grid scan is followed by `levels` sweeps
 * of coordinate-wise golden-section search in the best cell; each sweep
 * shrinks every bracket to below 1e-9 radians.
 */
template <TorusIntegrand F>
HadamardResult hadamard_max(const F& f, const Vec& x, int levels = 3, int grid = 0) {
    const int n = static_cast<int>(x.size());
    if constexpr (requires { f.y_independent(); }) {
        if (f.y_independent()) return {f(x, Vec::Zero(n)), Vec::Zero(n)};
    }
    if (grid <= 0) grid = default_hadamard_grid(n);
    HadamardResult best{-std::numeric_limits<double>::infinity(), Vec::Zero(n)};
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    Vec y = Vec::Zero(n);
    for (;;) {
        const double v = f(x, y);
        if (v > best.value) best = {v, y};
        int i = n - 1;  // odometer over the angle grid, last axis fastest
        for (; i >= 0 && ++idx[static_cast<std::size_t>(i)] == grid; --i) {
            idx[static_cast<std::size_t>(i)] = 0;
            y[i] = 0.0;
        }
        if (i < 0) break;
        y[i] = kTwoPi * idx[static_cast<std::size_t>(i)] / grid;
    }
    const double cell = kTwoPi / grid;
    constexpr double invphi = 0.6180339887498949;
    for (int level = 0; level < levels; ++level) {
        for (int axis = 0; axis < n; ++axis) {
            Vec y = best.angle;
            auto eval = [&](double t) {
                y[axis] = t;
                return f(x, y);
            };
            double a = best.angle[axis] - cell, b = best.angle[axis] + cell;
            double c = b - invphi * (b - a), d = a + invphi * (b - a);
            double fc = eval(c), fd = eval(d);
            while (b - a > 1e-9) {
                if (fc > fd) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - invphi * (b - a);
                    fc = eval(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + invphi * (b - a);
                    fd = eval(d);
                }
            }
            const double t = 0.5 * (a + b);
            const double ft = eval(t);
            if (ft > best.value) {
                best.value = ft;
                best.angle[axis] = t;
            }
        }
    }
    best.angle = reduce_angles(best.angle);
    return best;
}

// ---------------------------------------------------------------------------
// Convexity verdicts
// ---------------------------------------------------------------------------

enum class ConvexityTag { convex, strictly_convex, concave, strictly_concave, linear, indefinite };

inline std::string to_string(ConvexityTag t) {
    switch (t) {
        case ConvexityTag::convex: return "convex";
        case ConvexityTag::strictly_convex: return "strictly-convex";
        case ConvexityTag::concave: return "concave";
        case ConvexityTag::strictly_concave: return "strictly-concave";
        case ConvexityTag::linear: return "linear";
        case ConvexityTag::indefinite: return "indefinite";
    }
    return "?";
}

/// Convex in the weak sense: convex, strictly convex, or linear.
inline bool is_convex(ConvexityTag t) {
    return t == ConvexityTag::convex || t == ConvexityTag::strictly_convex || t == ConvexityTag::linear;
}
inline bool is_concave(ConvexityTag t) {
    return t == ConvexityTag::concave || t == ConvexityTag::strictly_concave || t == ConvexityTag::linear;
}

struct Witness {
    std::string kind;  ///< "hessian-eigenvalue" or "midpoint-excess"
    Vec point;
    double value = 0.0;
};

struct ConvexityVerdict {
    ConvexityTag tag = ConvexityTag::indefinite;
    double tolerance = 0.0;  ///< effective (scaled) tolerance
    double hessian_min = 0.0;
    double hessian_max = 0.0;
    double midpoint_excess_max = 0.0;  ///< max of F(mid) - (F(a)+F(b))/2
    double midpoint_excess_min = 0.0;
    std::size_t segments = 0;
    std::vector<Witness> witnesses;
};

struct ConvexityOptions {
    double tol = 1e-6;          ///< relative; scaled by 1 + max|F| over samples
    int grid_points = 0;        ///< per axis; 0 picks 21 / 11 / 4 for n = 1 / 2 / >= 3
    int segments = 1000;
    std::uint64_t seed = kDefaultSeed;
};

inline int default_convexity_grid(int n) { return n == 1 ? 21 : n == 2 ? 11 : 4; }

/**
 * Two-test convexity classification of F on a bounded box:
 *  (i) finite-difference Hessian eigenvalues at grid points;
 *  (ii) the midpoint inequality on random segments.
 * Both tests must agree for a convex / concave / linear tag.
 */
template <typename F>
ConvexityVerdict check_convexity(const F& fn, const Box& region, const ConvexityOptions& opt = {}) {
    const int n = region.dimension();
    if (n < 1) throw InputError("convexity region is empty");
    for (const auto& iv : region.axes)
        if (!(iv.hi > iv.lo) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
            throw InputError("convexity region must be a bounded nonempty box");

    const Grid grid = Grid::uniform(region, opt.grid_points > 0 ? opt.grid_points : default_convexity_grid(n));
    ConvexityVerdict v;
    v.hessian_min = std::numeric_limits<double>::infinity();
    v.hessian_max = -std::numeric_limits<double>::infinity();
    double scale = 0.0;

    Vec at_min, at_max;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec p = grid.point(i);
        Mat h(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b) {
                MultiIndex alpha(static_cast<std::size_t>(n), 0);
                ++alpha[static_cast<std::size_t>(a)];
                ++alpha[static_cast<std::size_t>(b)];
                h(a, b) = h(b, a) = fd_partial(fn, alpha, p);
            }
        const Vec ev = symmetric_eigenvalues(h);
        scale = std::max(scale, std::abs(fn(p)));
        if (ev[0] < v.hessian_min) {
            v.hessian_min = ev[0];
            at_min = p;
        }
        if (ev[n - 1] > v.hessian_max) {
            v.hessian_max = ev[n - 1];
            at_max = p;
        }
    }

    Rng rng(opt.seed);
    v.midpoint_excess_max = -std::numeric_limits<double>::infinity();
    v.midpoint_excess_min = std::numeric_limits<double>::infinity();
    Vec seg_max, seg_min;
    for (int s = 0; s < opt.segments; ++s) {
        const Vec a = rng.uniform_in(region);
        const Vec b = rng.uniform_in(region);
        const double fa = fn(a), fb = fn(b);
        const double excess = fn(0.5 * (a + b)) - 0.5 * (fa + fb);
        scale = std::max({scale, std::abs(fa), std::abs(fb)});
        if (excess > v.midpoint_excess_max) {
            v.midpoint_excess_max = excess;
            seg_max = 0.5 * (a + b);
        }
        if (excess < v.midpoint_excess_min) {
            v.midpoint_excess_min = excess;
            seg_min = 0.5 * (a + b);
        }
        ++v.segments;
    }

    const double tau = opt.tol * (1.0 + scale);
    v.tolerance = tau;
    const bool hess_linear = v.hessian_min >= -tau && v.hessian_max <= tau;
    const bool mid_linear = v.midpoint_excess_max <= tau && v.midpoint_excess_min >= -tau;
    const bool convex = v.hessian_min >= -tau && v.midpoint_excess_max <= tau;
    const bool concave = v.hessian_max <= tau && v.midpoint_excess_min >= -tau;

    if (hess_linear && mid_linear) {
        v.tag = ConvexityTag::linear;
    } else if (convex) {
        v.tag = v.hessian_min >= tau ? ConvexityTag::strictly_convex : ConvexityTag::convex;
    } else if (concave) {
        v.tag = v.hessian_max <= -tau ? ConvexityTag::strictly_concave : ConvexityTag::concave;
    } else {
        v.tag = ConvexityTag::indefinite;
    }

    // Witnesses: the extremal curvature on each side that clears tolerance.
    if (v.hessian_max > tau) v.witnesses.push_back({"hessian-eigenvalue", at_max, v.hessian_max});
    if (v.midpoint_excess_min < -tau) v.witnesses.push_back({"midpoint-excess", seg_min, v.midpoint_excess_min});
    if (v.hessian_min < -tau) v.witnesses.push_back({"hessian-eigenvalue", at_min, v.hessian_min});
    if (v.midpoint_excess_max > tau) v.witnesses.push_back({"midpoint-excess", seg_max, v.midpoint_excess_max});
    return v;
}

// ---------------------------------------------------------------------------
// Monotonicity in r_i, maximum principles
// ---------------------------------------------------------------------------

enum class RadialQuantity { average, maximum };

struct MonotoneReport {
    std::vector<double> xs;
    std::vector<double> values;
    bool non_decreasing = true;
    double largest_drop = 0.0;
    bool constant_along_axis = false;
    bool harmonic_in_axis = false;  ///< f_{x_i x_i} + f_{y_i y_i} = 0 on the sampled tori
    bool kernel_consistent = true;  ///< constant_along_axis == harmonic_in_axis
    double limit_value = 0.0;       ///< value at the smallest sampled x_i (r_i -> 0)
};

/**
 * Sample G (or M) along axis `axis` through `base` and check non-decrease in
 * x_i = log r_i. The hypothesis that g extends PSH across z_i = 0 cannot be
 * checked in log coordinates; callers must declare it.
 */
template <SecondOrderField F>
    requires TorusIntegrand<F>
MonotoneReport monotone_in_radius(const F& f, int axis, const AxisRange& range, const Vec& base,
                                  bool declared_extension, RadialQuantity quantity = RadialQuantity::average,
                                  int angles_per_axis = 16) {
    if (!declared_extension)
        throw InputError("monotonicity requires a declaration that the field extends PSH across z_i = 0");
    const int n = f.dimension();
    if (axis < 0 || axis >= n) throw InputError("axis out of range");
    MonotoneReport r;
    r.xs = range.samples();
    const Grid ys = angle_grid(n, angles_per_axis);
    double lap_max = 0.0, lap_scale = 0.0;
    for (double t : r.xs) {
        Vec x = base;
        x[axis] = t;
        r.values.push_back(quantity == RadialQuantity::average ? torus_average(f, x) : hadamard_max(f, x).value);
        for (std::size_t j = 0; j < ys.size(); ++j) {
            const Mat h = f.hessian(x, ys.point(j));
            lap_max = std::max(lap_max, std::abs(h(axis, axis) + h(n + axis, n + axis)));
            lap_scale = std::max({lap_scale, std::abs(h(axis, axis)), std::abs(h(n + axis, n + axis))});
        }
    }
    double vmin = r.values.front(), vmax = r.values.front();
    for (std::size_t k = 1; k < r.values.size(); ++k) {
        const double drop = r.values[k - 1] - r.values[k];
        if (drop > 1e-10 * (1.0 + std::abs(r.values[k - 1]))) r.non_decreasing = false;
        r.largest_drop = std::max(r.largest_drop, drop);
        vmin = std::min(vmin, r.values[k]);
        vmax = std::max(vmax, r.values[k]);
    }
    r.constant_along_axis = vmax - vmin <= 1e-10 * (1.0 + std::max(std::abs(vmin), std::abs(vmax)));
    r.harmonic_in_axis = lap_max <= 1e-8 * (1.0 + lap_scale);
    r.kernel_consistent = quantity == RadialQuantity::maximum || r.constant_along_axis == r.harmonic_in_axis;
    r.limit_value = r.values.front();
    return r;
}

struct BoundaryMaxReport {
    double interior_max = 0.0;
    double boundary_max = 0.0;
    Vec boundary_angle;
    bool holds = false;
};

/**
 * Compare the maximum of f over interior samples of the polydisk
 * prod{|z_i| < r_i} (x_i in [log r_i - depth, log r_i)) with the maximum
 * over the distinguished boundary torus x = log r.
 */
template <TorusIntegrand F>
BoundaryMaxReport distinguished_boundary_max(const F& f, const Vec& radii, int radial_samples = 6, int angles = 16,
                                             double depth = 6.0) {
    const int n = static_cast<int>(radii.size());
    for (Eigen::Index i = 0; i < radii.size(); ++i)
        if (!(radii[i] > 0.0)) throw InputError("polydisk radii must be positive");
    const Vec top = radii.array().log().matrix();
    std::vector<std::vector<double>> axes(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int k = 1; k <= radial_samples; ++k)
            axes[static_cast<std::size_t>(i)].push_back(top[i] - depth * k / radial_samples);
    const Grid xs(std::move(axes));
    const Grid ys = angle_grid(n, angles);

    BoundaryMaxReport r;
    r.interior_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Vec x = xs.point(i);
        for (std::size_t j = 0; j < ys.size(); ++j) r.interior_max = std::max(r.interior_max, f(x, ys.point(j)));
    }
    // Points with some |z_i| = r_i but not all lie on the topological boundary
    // only, and are covered by the interior limit; the torus is sampled
    // through the refined maximum.
    const auto m = hadamard_max(f, top);
    r.boundary_max = m.value;
    r.boundary_angle = m.angle;
    r.holds = r.boundary_max >= r.interior_max - 1e-9;
    return r;
}

struct MaxPrincipleReport {
    bool interior_maximum = false;
    bool constant = false;
    bool holds = true;
    double interior_max = 0.0;
    double boundary_max = 0.0;
    double spread = 0.0;
};

/**
 * Bounded-box form of the maximum principle for G: if the sampled maximum of
 * G is attained at an interior grid point, G must be constant on the box.
 */
template <TorusIntegrand F>
MaxPrincipleReport max_principle(const F& f, const Box& region, int points_per_axis = 0, double tol = 1e-10) {
    const int n = region.dimension();
    if (points_per_axis <= 0) points_per_axis = n == 1 ? 21 : n == 2 ? 9 : 5;
    const Grid grid = Grid::uniform(region, points_per_axis);
    MaxPrincipleReport r;
    r.interior_max = r.boundary_max = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec x = grid.point(i);
        const double g = torus_average(f, x);
        bool on_boundary = false;
        for (int a = 0; a < n; ++a)
            on_boundary = on_boundary || x[a] == grid.axis(a).front() || x[a] == grid.axis(a).back();
        (on_boundary ? r.boundary_max : r.interior_max) = std::max(on_boundary ? r.boundary_max : r.interior_max, g);
        lo = std::min(lo, g);
    }
    const double hi = std::max(r.interior_max, r.boundary_max);
    const double scaled = tol * (1.0 + std::abs(hi));
    r.spread = hi - lo;
    r.interior_maximum = r.interior_max >= r.boundary_max - scaled;
    r.constant = r.spread <= scaled;
    r.holds = !r.interior_maximum || r.constant;
    return r;
}

}  // namespace tklab
