#pragma once

/**
 * @file funcspace.hpp
 * @brief Function representations used throughout tklab.
 *
 * Everything lives in log coordinates w = x + iy on C^n / 2 pi i Z^n, with
 * z = exp(w). Two kinds of functions are modelled:
 *
 *   - InvariantPotential: phi(x), y-independent, with partials up to order 4.
 *     These are T^n-invariant Kahler potentials.
 *   - PeriodicScalarField: f(x, y), 2 pi periodic in every y_j, with partials
 *     up to order 2. These are the PSH test functions and the anti-canonical
 *     densities.
 *
 * Also here: central finite differences (order-4 accurate) and the uniform
 * trapezoidal rule on the angle torus.
 */

#include "tklab/core.hpp"

#include <algorithm>
#include <array>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace tklab {

/// Derivative counts per coordinate; alpha[j] = number of d/dx_j factors.
using MultiIndex = std::vector<int>;

inline int order(const MultiIndex& alpha) {
    int s = 0;
    for (int a : alpha) s += a;
    return s;
}

/// Expand counts into a sorted list of axes, e.g. (2,0,1) -> {0,0,2}.
inline std::vector<int> axes_of(const MultiIndex& alpha) {
    std::vector<int> axes;
    for (int j = 0; j < static_cast<int>(alpha.size()); ++j)
        for (int c = 0; c < alpha[static_cast<std::size_t>(j)]; ++c) axes.push_back(j);
    return axes;
}

inline MultiIndex counts_of(std::span<const int> axes, int n) {
    MultiIndex alpha(static_cast<std::size_t>(n), 0);
    for (int a : axes) ++alpha[static_cast<std::size_t>(a)];
    return alpha;
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

namespace detail {

struct Stencil {
    std::vector<int> offsets;
    std::vector<double> weights;  // integers; the derivative is sum / (denominator h^k)
    double denominator = 1.0;
};

// Central stencils accurate to O(h^4) for derivatives of order 0..4.
inline const Stencil& central_stencil(int k) {
    static const Stencil s0{{0}, {1.0}, 1.0};
    static const Stencil s1{{-2, -1, 1, 2}, {1, -8, 8, -1}, 12.0};
    static const Stencil s2{{-2, -1, 0, 1, 2}, {-1, 16, -30, 16, -1}, 12.0};
    static const Stencil s3{{-3, -2, -1, 1, 2, 3}, {1, -8, 13, -13, 8, -1}, 8.0};
    static const Stencil s4{{-3, -2, -1, 0, 1, 2, 3}, {-1, 12, -39, 56, -39, 12, -1}, 6.0};
    switch (k) {
        case 0: return s0;
        case 1: return s1;
        case 2: return s2;
        case 3: return s3;
        case 4: return s4;
        default: throw InputError("finite-difference order per axis must be at most 4");
    }
}

}  // namespace detail

/**
 * Default step for |alpha| <= 2: 1e-3 max(1, |p|_inf) rounded to a power of
 * two, so that p + k h is exact wherever p allows it.
 */
inline double default_fd_step(const Vec& p) {
    const double scale = std::max(1.0, p.size() ? p.cwiseAbs().maxCoeff() : 0.0);
    return std::exp2(std::round(std::log2(1e-3 * scale)));
}

/// Base step of the extrapolated estimate used by default for |alpha| in {3, 4}.
inline constexpr double kHighOrderStep = 0x1.0p-6;

namespace detail {

template <typename F>
double fd_stencil_sum(const F& f, const MultiIndex& alpha, const Vec& p, double h, const std::optional<Box>& domain) {
    const int n = static_cast<int>(p.size());
    std::vector<const Stencil*> stencils;
    stencils.reserve(static_cast<std::size_t>(n));
    for (int a : alpha) stencils.push_back(&central_stencil(a));

    // Enumerate the tensor product in a fixed order; collect terms for a
    // pairwise reduction.
    std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
    std::vector<double> terms;
    double denominator = 1.0;
    for (const auto* s : stencils) denominator *= s->denominator;
    Vec q(n);
    while (true) {
        double w = 1.0;
        for (int j = 0; j < n; ++j) {
            const auto& s = *stencils[static_cast<std::size_t>(j)];
            const auto i = idx[static_cast<std::size_t>(j)];
            q[j] = p[j] + s.offsets[i] * h;
            w *= s.weights[i];
        }
        if (domain && !domain->contains(q)) throw DomainError("finite-difference stencil exits the declared domain");
        terms.push_back(w * f(q));
        int j = n - 1;
        for (; j >= 0; --j) {
            auto& i = idx[static_cast<std::size_t>(j)];
            if (++i < stencils[static_cast<std::size_t>(j)]->offsets.size()) break;
            i = 0;
        }
        if (j < 0) break;
    }
    return pairwise_sum(terms) / (denominator * std::pow(h, order(alpha)));
}

}  // namespace detail

/**
 * Order-4 accurate central-difference estimate of the partial derivative
 * d^alpha f(p). Mixed and higher partials are tensor products of the
 * one-dimensional stencils, one per axis.
 *
 * Without an explicit step, orders 3 and 4 combine the steps h and 2h
 * (h = 2^-6) as (16 D(h) - D(2h)) / 15. A single order-4 stencil at a step
 * near 1e-2 loses about 1e-6 relative to rounding and truncation together;
 * the combination cancels the h^4 term so a larger step can be used.
 *
 * Throws DomainError if any stencil point leaves `domain`.
 */
template <typename F>
double fd_partial(const F& f, const MultiIndex& alpha, const Vec& p, std::optional<double> step = {},
                  const std::optional<Box>& domain = {}) {
    const int n = static_cast<int>(p.size());
    if (static_cast<int>(alpha.size()) != n) throw InputError("multi-index dimension mismatch");
    const int total = order(alpha);
    if (total > 4) throw InputError("fd_partial supports |alpha| <= 4");
    if (step) {
        if (!(*step > 0.0)) throw InputError("finite-difference step must be positive");
        return detail::fd_stencil_sum(f, alpha, p, *step, domain);
    }
    if (total <= 2) return detail::fd_stencil_sum(f, alpha, p, default_fd_step(p), domain);
    const double fine = detail::fd_stencil_sum(f, alpha, p, kHighOrderStep, domain);
    const double coarse = detail::fd_stencil_sum(f, alpha, p, 2.0 * kHighOrderStep, domain);
    return (16.0 * fine - coarse) / 15.0;
}

// ---------------------------------------------------------------------------
// Invariant potentials
// ---------------------------------------------------------------------------

enum class OracleKind { analytic, finite_difference };

using Params = std::map<std::string, double>;

/// Value, gradient and Hessian of log det Hess_x phi.
struct LogDetJet {
    double value = 0.0;
    Vec gradient;
    Mat hessian;
};

/**
 * A T^n-invariant Kahler potential phi: R^n -> R on log-orbit space.
 *
 * The derivative oracle takes a sorted axis list of length <= 4, e.g. {0,0,1}
 * for d^3 phi / dx_0^2 dx_1.
 */
class InvariantPotential {
  public:
    using Evaluator = std::function<double(const Vec&)>;
    using Oracle = std::function<double(std::span<const int>, const Vec&)>;

    InvariantPotential(std::string name, int n, Evaluator value, Oracle oracle, OracleKind kind, Box domain,
                       bool compactifiable = false, Params params = {})
        : name_(std::move(name)),
          n_(n),
          value_(std::move(value)),
          oracle_(std::move(oracle)),
          kind_(kind),
          domain_(std::move(domain)),
          compactifiable_(compactifiable),
          params_(std::move(params)) {}

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] int dimension() const noexcept { return n_; }
    [[nodiscard]] OracleKind oracle_kind() const noexcept { return kind_; }
    [[nodiscard]] const Box& domain() const noexcept { return domain_; }
    /// Whether the open orbit compactifies so that lower orbits sit at infinity.
    [[nodiscard]] bool compactifiable() const noexcept { return compactifiable_; }
    [[nodiscard]] const Params& params() const noexcept { return params_; }

    /// Closed form of log det Hess phi for entries whose Hessian is positive
    /// definite everywhere. Used where the smallest eigenvalue is far below
    /// rounding of the entries (e.g. far out on Fubini-Study rays).
    using LogDet = std::function<double(const Vec&)>;
    InvariantPotential& with_log_det(LogDet f) {
        log_det_ = std::move(f);
        return *this;
    }
    [[nodiscard]] std::optional<double> closed_form_log_det(const Vec& x) const {
        if (!log_det_) return std::nullopt;
        check_point(x);
        return log_det_(x);
    }

    /// Closed form of the full jet of log det Hess phi, for entries where the
    /// generic route tr(P^-1 T_k) loses accuracy to ill-conditioning.
    using LogDetJetFn = std::function<LogDetJet(const Vec&)>;
    InvariantPotential& with_log_det_jet(LogDetJetFn f) {
        log_det_jet_ = std::move(f);
        return *this;
    }
    [[nodiscard]] std::optional<LogDetJet> closed_form_log_det_jet(const Vec& x) const {
        if (!log_det_jet_) return std::nullopt;
        check_point(x);
        return log_det_jet_(x);
    }

    double operator()(const Vec& x) const { return value(x); }
    [[nodiscard]] double value(const Vec& x) const {
        check_point(x);
        return value_(x);
    }

    /// Partial along a list of axes (any order), e.g. {0, 0, 1}.
    [[nodiscard]] double derivative(std::span<const int> axes, const Vec& x) const {
        check_point(x);
        if (axes.size() > 4) throw InputError("potential partials are available up to order 4");
        if (axes.empty()) return value_(x);
        std::array<int, 4> sorted{};
        std::copy(axes.begin(), axes.end(), sorted.begin());
        std::sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(axes.size()));
        return oracle_(std::span<const int>(sorted.data(), axes.size()), x);
    }
    [[nodiscard]] double partial(const MultiIndex& alpha, const Vec& x) const {
        const auto axes = axes_of(alpha);
        return derivative(std::span<const int>(axes), x);
    }
    [[nodiscard]] double derivative(std::initializer_list<int> axes, const Vec& x) const {
        return derivative(std::span<const int>(axes.begin(), axes.size()), x);
    }

    [[nodiscard]] Vec gradient(const Vec& x) const {
        Vec g(n_);
        for (int i = 0; i < n_; ++i) g[i] = derivative({i}, x);
        return g;
    }

    [[nodiscard]] Mat hessian(const Vec& x) const {
        Mat h(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j) h(i, j) = h(j, i) = derivative({i, j}, x);
        return h;
    }

    /// T[k](i,j) = d^3 phi / dx_i dx_j dx_k.
    [[nodiscard]] std::vector<Mat> third(const Vec& x) const {
        std::vector<Mat> t(static_cast<std::size_t>(n_), Mat(n_, n_));
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j)
                for (int k = j; k < n_; ++k) {
                    const std::array<int, 3> key{i, j, k};
                    const double v = derivative(std::span<const int>(key), x);
                    std::array<int, 3> p = key;
                    do t[static_cast<std::size_t>(p[2])](p[0], p[1]) = v;
                    while (std::next_permutation(p.begin(), p.end()));
                }
        return t;
    }

    /// Q[k*n + l](i,j) = d^4 phi / dx_i dx_j dx_k dx_l.
    [[nodiscard]] std::vector<Mat> fourth(const Vec& x) const {
        std::vector<Mat> q(static_cast<std::size_t>(n_ * n_), Mat(n_, n_));
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j)
                for (int k = j; k < n_; ++k)
                    for (int l = k; l < n_; ++l) {
                        const std::array<int, 4> key{i, j, k, l};
                        const double v = derivative(std::span<const int>(key), x);
                        std::array<int, 4> p = key;
                        do q[static_cast<std::size_t>(p[2] * n_ + p[3])](p[0], p[1]) = v;
                        while (std::next_permutation(p.begin(), p.end()));
                    }
        return q;
    }

  private:
    void check_point(const Vec& x) const {
        if (x.size() != n_) throw InputError("point dimension does not match potential dimension");
        if (!domain_.contains(x)) throw DomainError("point outside the potential's domain");
    }

    std::string name_;
    int n_;
    Evaluator value_;
    Oracle oracle_;
    OracleKind kind_;
    Box domain_;
    bool compactifiable_;
    Params params_;
    LogDet log_det_;
    LogDetJetFn log_det_jet_;
};

/// Wrap an arbitrary smooth evaluator; partials come from fd_partial.
inline InvariantPotential make_fd_potential(std::string name, int n, InvariantPotential::Evaluator value,
                                            Box domain = {}) {
    if (n < 1) throw InputError("dimension must be at least 1");
    if (domain.axes.empty()) domain = Box::unbounded(n);
    auto oracle = [value, domain, n](std::span<const int> axes, const Vec& x) {
        return fd_partial(value, counts_of(axes, n), x, std::nullopt, domain);
    };
    return InvariantPotential(std::move(name), n, value, oracle, OracleKind::finite_difference, std::move(domain));
}

namespace detail {

// All set partitions of {0, ..., m-1}, m <= 4, as lists of blocks.
inline const std::vector<std::vector<std::vector<int>>>& set_partitions(int m) {
    static const auto table = [] {
        std::array<std::vector<std::vector<std::vector<int>>>, 5> t;
        t[0] = {{}};
        for (int k = 1; k <= 4; ++k) {
            for (const auto& part : t[static_cast<std::size_t>(k - 1)]) {
                for (std::size_t b = 0; b < part.size(); ++b) {
                    auto next = part;
                    next[b].push_back(k - 1);
                    t[static_cast<std::size_t>(k)].push_back(std::move(next));
                }
                auto next = part;
                next.push_back({k - 1});
                t[static_cast<std::size_t>(k)].push_back(std::move(next));
            }
        }
        return t;
    }();
    return table.at(static_cast<std::size_t>(m));
}

inline double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

// One-variable pieces of the separable catalog entries: k-th derivative at t.
inline double flat_1d(int k, double t) { return std::ldexp(std::exp(2.0 * t), k); }

inline double cylinder_1d(int k, double t) {
    switch (k) {
        case 0: return t * t;
        case 1: return 2.0 * t;
        case 2: return 2.0;
        default: return 0.0;
    }
}

inline double cosh_1d(int k, double t) {
    const double scale = std::ldexp(1.0, k);
    return scale * ((k % 2 == 0) ? std::cosh(2.0 * t) : std::sinh(2.0 * t));
}

template <typename G>
double separable_partial(const G& g, std::span<const int> axes, const Vec& x) {
    if (axes.empty()) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < x.size(); ++j) s += g(0, x[j]);
        return s;
    }
    const int a = axes.front();
    for (int b : axes)
        if (b != a) return 0.0;
    return g(static_cast<int>(axes.size()), x[a]);
}

// log(1 + sum exp(2 x_j)), evaluated through the normalized weights
// p_j = e^{2x_j}/S and p_0 = 1/S so that large |x| neither overflows nor
// cancels at second order.
struct FubiniStudyWeights {
    double log_s;
    double p0;
    Vec p;

    explicit FubiniStudyWeights(const Vec& x) {
        const double m = std::max(0.0, 2.0 * x.maxCoeff());
        double s = std::exp(-m);
        p.resize(x.size());
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            p[j] = std::exp(2.0 * x[j] - m);
            s += p[j];
        }
        p0 = std::exp(-m) / s;
        p /= s;
        log_s = m + std::log(s);
    }

    // 1 - p_j computed without cancellation.
    [[nodiscard]] double complement(Eigen::Index j) const {
        double c = p0;
        for (Eigen::Index k = 0; k < p.size(); ++k)
            if (k != j) c += p[k];
        return c;
    }
};

inline double fubini_study_partial(std::span<const int> axes, const Vec& x) {
    const FubiniStudyWeights w(x);
    if (axes.empty()) return w.log_s;
    if (axes.size() == 1) return 2.0 * w.p[axes[0]];
    if (axes.size() == 2) {
        const int i = axes[0], j = axes[1];
        return i == j ? 4.0 * w.p[i] * w.complement(i) : -4.0 * w.p[i] * w.p[j];
    }
    // Faa di Bruno for log S: sum over set partitions pi of the axis list,
    // (-1)^{|pi|-1} (|pi|-1)! prod_B (d_B S / S), and d_B S / S vanishes
    // unless every axis in B is the same j, where it is 2^{|B|} p_j.
    const int m = static_cast<int>(axes.size());
    double total = 0.0;
    for (const auto& part : set_partitions(m)) {
        double prod = 1.0;
        for (const auto& block : part) {
            const int a = axes[static_cast<std::size_t>(block.front())];
            bool uniform = true;
            for (int e : block) uniform = uniform && axes[static_cast<std::size_t>(e)] == a;
            if (!uniform) {
                prod = 0.0;
                break;
            }
            prod *= std::ldexp(w.p[a], static_cast<int>(block.size()));
        }
        if (prod == 0.0) continue;
        const int b = static_cast<int>(part.size());
        total += ((b % 2 == 1) ? 1.0 : -1.0) * factorial(b - 1) * prod;
    }
    return total;
}

struct ExpTerm {
    double c;
    Vec a;
};

inline double sum_exp_partial(const std::vector<ExpTerm>& terms, std::span<const int> axes, const Vec& x) {
    double s = 0.0;
    for (const auto& t : terms) {
        double f = t.c * std::exp(t.a.dot(x));
        for (int ax : axes) f *= t.a[ax];
        s += f;
    }
    return s;
}

/**
 * Cauchy-Binet: det Hess sum_k c_k e^{<a_k,x>} = sum_S w_S e^{<b_S,x>} over
 * n-subsets S of terms, with w_S = prod c_k det(a_S)^2 and b_S = sum_{k in S} a_k.
 * Its log is a log-sum-exp, whose gradient is the weighted mean of b_S and whose
 * Hessian is the weighted covariance. Empty when no subset has full rank.
 */
struct CauchyBinetTerms {
    std::vector<double> log_w;
    std::vector<Vec> b;
};

inline CauchyBinetTerms cauchy_binet_terms(const std::vector<ExpTerm>& terms, int n) {
    CauchyBinetTerms out;
    const int m = static_cast<int>(terms.size());
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::function<void(int, int)> choose = [&](int start, int depth) {
        if (depth == n) {
            Mat A(n, n);
            Vec b = Vec::Zero(n);
            double log_c = 0.0;
            for (int r = 0; r < n; ++r) {
                const auto& t = terms[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])];
                A.col(r) = t.a;
                b += t.a;
                log_c += std::log(t.c);
            }
            const double d = A.determinant();
            if (d != 0.0) {
                out.log_w.push_back(log_c + 2.0 * std::log(std::abs(d)));
                out.b.push_back(b);
            }
            return;
        }
        for (int k = start; k <= m - (n - depth); ++k) {
            idx[static_cast<std::size_t>(depth)] = k;
            choose(k + 1, depth + 1);
        }
    };
    choose(0, 0);
    return out;
}

inline LogDetJet cauchy_binet_jet(const CauchyBinetTerms& cb, const Vec& x) {
    const std::size_t m = cb.b.size();
    std::vector<double> e(m);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < m; ++s) top = std::max(top, e[s] = cb.log_w[s] + cb.b[s].dot(x));
    double total = 0.0;
    for (auto& v : e) total += (v = std::exp(v - top));
    LogDetJet j;
    j.value = top + std::log(total);
    j.gradient = Vec::Zero(x.size());
    for (std::size_t s = 0; s < m; ++s) j.gradient += (e[s] / total) * cb.b[s];
    j.hessian = Mat::Zero(x.size(), x.size());
    for (std::size_t s = 0; s < m; ++s) {
        const Vec d = cb.b[s] - j.gradient;
        j.hessian += (e[s] / total) * d * d.transpose();
    }
    return j;
}

inline double param_or(const Params& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

}  // namespace detail

/// Names accepted by make_builtin_potential.
inline const std::vector<std::string>& builtin_potential_names() {
    static const std::vector<std::string> names{"flat", "flat_cylinder", "fubini_study", "cosh_neg", "sum_exp",
                                                "fs_quadratic"};
    return names;
}

/**
 * Catalog potentials with closed-form partials to order 4.
 *
 *   flat           sum_j exp(2 x_j)             (Euclidean metric on (C*)^n)
 *   flat_cylinder  sum_j x_j^2                  (flat cylinder metric)
 *   fubini_study   log(1 + sum_j exp(2 x_j))    (Fubini-Study on CP^n)
 *   cosh_neg       sum_j cosh(2 x_j)            (negative Ricci)
 *   sum_exp        sum_k c_k exp(<a_k, x>)      params c<k>, a<k>_<j> (1-based), c_k > 0
 *   fs_quadratic   fubini_study + eps |x|^2     params eps > 0 (default 0.05); Ricci of both signs
 *
 * Every entry also accepts `scale` (phi -> scale * phi, nonzero) and `shift` /
 * `shift<j>` (phi(x) -> phi(x - a)).
 */
inline InvariantPotential make_builtin_potential(const std::string& name, int n, const Params& params = {}) {
    using detail::param_or;
    if (n < 1) throw InputError("dimension must be at least 1");

    std::vector<std::string> allowed{"scale", "shift"};
    for (int j = 1; j <= n; ++j) allowed.push_back("shift" + std::to_string(j));

    using PartialFn = std::function<double(std::span<const int>, const Vec&)>;
    PartialFn base;
    std::function<LogDetJet(const Vec&)> log_det_jet;  // of the unscaled, unshifted Hessian
    bool compactifiable = false;
    const double log4n = n * std::log(4.0);

    if (name == "flat") {
        base = [](std::span<const int> axes, const Vec& x) { return detail::separable_partial(detail::flat_1d, axes, x); };
        log_det_jet = [log4n, n](const Vec& x) {
            return LogDetJet{log4n + 2.0 * x.sum(), Vec::Constant(n, 2.0), Mat::Zero(n, n)};
        };
    } else if (name == "flat_cylinder") {
        base = [](std::span<const int> axes, const Vec& x) {
            return detail::separable_partial(detail::cylinder_1d, axes, x);
        };
        log_det_jet = [n](const Vec&) { return LogDetJet{n * std::log(2.0), Vec::Zero(n), Mat::Zero(n, n)}; };
    } else if (name == "cosh_neg") {
        base = [](std::span<const int> axes, const Vec& x) { return detail::separable_partial(detail::cosh_1d, axes, x); };
        log_det_jet = [log4n, n](const Vec& x) {
            LogDetJet j{log4n, Vec(n), Mat::Zero(n, n)};
            for (int i = 0; i < n; ++i) {
                const double t = std::tanh(2.0 * x[i]);
                j.value += std::log(std::cosh(2.0 * x[i]));
                j.gradient[i] = 2.0 * t;
                j.hessian(i, i) = 4.0 * (1.0 - t * t);
            }
            return j;
        };
    } else if (name == "fubini_study") {
        base = detail::fubini_study_partial;
        // det = 4^n p_0 prod p_j with p_j = e^{2x_j} / (1 + sum e^{2x}), p_0 = 1 / (1 + sum e^{2x})
        log_det_jet = [log4n, n](const Vec& x) {
            const double m = std::max(0.0, 2.0 * x.maxCoeff());
            const Vec e = (2.0 * x.array() - m).exp().matrix();
            const double s = std::exp(-m) + e.sum();
            const Vec p = e / s;
            LogDetJet j;
            j.value = log4n + 2.0 * x.sum() - (n + 1) * (m + std::log(s));
            j.gradient = Vec::Constant(n, 2.0) - 2.0 * (n + 1) * p;
            j.hessian = -4.0 * (n + 1) * (Mat(p.asDiagonal()) - p * p.transpose());
            return j;
        };
        compactifiable = true;
    } else if (name == "fs_quadratic") {
        const double eps = param_or(params, "eps", 0.05);
        if (!(eps > 0.0)) throw InputError("fs_quadratic requires eps > 0");
        allowed.push_back("eps");
        base = [eps](std::span<const int> axes, const Vec& x) {
            return detail::fubini_study_partial(axes, x) + eps * detail::separable_partial(detail::cylinder_1d, axes, x);
        };
    } else if (name == "sum_exp") {
        std::vector<detail::ExpTerm> terms;
        for (int k = 1;; ++k) {
            const auto ck = "c" + std::to_string(k);
            if (!params.contains(ck)) break;
            allowed.push_back(ck);
            detail::ExpTerm t{params.at(ck), Vec::Zero(n)};
            if (!(t.c > 0.0)) throw InputError("sum_exp coefficient " + ck + " must be positive");
            for (int j = 1; j <= n; ++j) {
                auto key = "a" + std::to_string(k) + "_" + std::to_string(j);
                if (n == 1 && !params.contains(key)) key = "a" + std::to_string(k);
                allowed.push_back(key);
                t.a[j - 1] = param_or(params, key, 0.0);
            }
            terms.push_back(std::move(t));
        }
        if (terms.empty()) throw InputError("sum_exp requires at least one coefficient c1");
        if (auto cb = detail::cauchy_binet_terms(terms, n); !cb.b.empty())
            log_det_jet = [cb = std::move(cb)](const Vec& x) { return detail::cauchy_binet_jet(cb, x); };
        base = [terms = std::move(terms)](std::span<const int> axes, const Vec& x) {
            return detail::sum_exp_partial(terms, axes, x);
        };
    } else {
        throw InputError("unknown potential '" + name + "'");
    }

    for (const auto& [key, v] : params)
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw InputError("unknown parameter '" + key + "' for potential '" + name + "'");

    const double scale = param_or(params, "scale", 1.0);
    if (scale == 0.0 || !std::isfinite(scale)) throw InputError("scale must be finite and nonzero");
    Vec shift(n);
    for (int j = 0; j < n; ++j) shift[j] = param_or(params, "shift" + std::to_string(j + 1), param_or(params, "shift", 0.0));

    auto oracle = [base, scale, shift, shifted = !shift.isZero()](std::span<const int> axes, const Vec& x) {
        return scale * (shifted ? base(axes, x - shift) : base(axes, x));
    };
    auto value = [base, scale, shift](const Vec& x) { return scale * base({}, x - shift); };
    InvariantPotential phi(name, n, value, oracle, OracleKind::analytic, Box::unbounded(n), compactifiable, params);
    if (log_det_jet && scale > 0.0) {
        phi.with_log_det([log_det_jet, scale, shift, n](const Vec& x) {
            return n * std::log(scale) + log_det_jet(x - shift).value;
        });
        phi.with_log_det_jet([log_det_jet, scale, shift, n](const Vec& x) {
            LogDetJet j = log_det_jet(x - shift);
            j.value += n * std::log(scale);
            return j;
        });
    }
    return phi;
}

// ---------------------------------------------------------------------------
// Periodic scalar fields
// ---------------------------------------------------------------------------

/// Value, gradient and Hessian in the (x_1..x_n, y_1..y_n) basis.
struct Jet2 {
    double value = 0.0;
    Vec gradient;
    Mat hessian;
};

/// c * exp(<k, w>), w = x + iy.
struct LaurentTerm {
    std::complex<double> c;
    std::vector<int> k;
};
using LaurentPolynomial = std::vector<LaurentTerm>;

enum class FieldKind { pullback, laurent_re, laurent_im, laurent_abs2, laurent_log_abs, sum };

/// Parsed form of a field descriptor; see make_periodic_field.
struct FieldDescriptor {
    FieldKind kind = FieldKind::pullback;
    int n = 1;
    std::optional<std::string> potential;
    Params potential_params;
    LaurentPolynomial coeffs;
    std::optional<Box> zero_free_box;
    std::vector<std::pair<double, FieldDescriptor>> terms;  // for `sum`
};

namespace detail {

inline std::complex<double> laurent_exp(const LaurentTerm& t, const Vec& x, const Vec& y) {
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < t.k.size(); ++j) {
        re += t.k[j] * x[static_cast<Eigen::Index>(j)];
        im += t.k[j] * y[static_cast<Eigen::Index>(j)];
    }
    return t.c * std::exp(re) * std::complex<double>(std::cos(im), std::sin(im));
}

// d/du of exp(<k,w>) is a factor k_j for u = x_j and i k_j for u = y_j.
inline std::complex<double> laurent_factor(const LaurentTerm& t, int u, int n) {
    return u < n ? std::complex<double>(t.k[static_cast<std::size_t>(u)], 0.0)
                 : std::complex<double>(0.0, t.k[static_cast<std::size_t>(u - n)]);
}

struct PolyJet {
    std::complex<double> value;
    Eigen::VectorXcd gradient;
    Eigen::MatrixXcd hessian;
};

inline PolyJet poly_jet(const LaurentPolynomial& poly, int n, const Vec& x, const Vec& y) {
    PolyJet j{0.0, Eigen::VectorXcd::Zero(2 * n), Eigen::MatrixXcd::Zero(2 * n, 2 * n)};
    for (const auto& t : poly) {
        const auto e = laurent_exp(t, x, y);
        j.value += e;
        for (int u = 0; u < 2 * n; ++u) {
            const auto du = laurent_factor(t, u, n);
            j.gradient[u] += du * e;
            for (int v = 0; v < 2 * n; ++v) j.hessian(u, v) += du * laurent_factor(t, v, n) * e;
        }
    }
    return j;
}

inline std::complex<double> poly_value(const LaurentPolynomial& poly, const Vec& x, const Vec& y) {
    std::complex<double> s = 0.0;
    for (const auto& t : poly) s += laurent_exp(t, x, y);
    return s;
}

// |P|^2 and its derivatives.
inline Jet2 abs2_jet(const PolyJet& p, int n) {
    Jet2 q{std::norm(p.value), Vec(2 * n), Mat(2 * n, 2 * n)};
    for (int u = 0; u < 2 * n; ++u) {
        q.gradient[u] = 2.0 * std::real(std::conj(p.value) * p.gradient[u]);
        for (int v = 0; v < 2 * n; ++v)
            q.hessian(u, v) =
                2.0 * std::real(std::conj(p.gradient[u]) * p.gradient[v] + std::conj(p.value) * p.hessian(u, v));
    }
    return q;
}

struct PullbackTerm {
    std::shared_ptr<const InvariantPotential> potential;
};
struct MonomialTerm {
    LaurentTerm term;
    bool imaginary;
};
struct Abs2Term {
    LaurentPolynomial poly;
};
struct LogAbsTerm {
    LaurentPolynomial poly;
    Box zero_free;
};
// Externally supplied term with its own analytic jet (e.g. densities built
// from a potential by other modules).
struct CustomTerm {
    std::function<double(const Vec&, const Vec&)> value;
    std::function<Jet2(const Vec&, const Vec&)> jet;
    bool y_independent = false;
};
using FieldTerm = std::variant<PullbackTerm, MonomialTerm, Abs2Term, LogAbsTerm, CustomTerm>;

}  // namespace detail

/**
 * f(x, y) on R^n x T^n. Angles are reduced modulo 2 pi before evaluation, so
 * the value depends only on the reduced angle. A field is a weighted sum of
 * primitive terms; all partials to order 2 are analytic.
 */
class PeriodicScalarField {
  public:
    PeriodicScalarField(int n, std::string label) : n_(n), label_(std::move(label)) {
        if (n < 1) throw InputError("dimension must be at least 1");
    }

    [[nodiscard]] int dimension() const noexcept { return n_; }
    [[nodiscard]] const std::string& label() const noexcept { return label_; }

    [[nodiscard]] double value(const Vec& x, const Vec& y) const {
        check(x, y);
        Vec reduced;
        const bool in_range = ((y.array() >= 0.0) && (y.array() < kTwoPi)).all();  // fmod is exact there
        const Vec& yr = in_range ? y : (reduced = reduce_angles(y));
        double s = 0.0;
        for (const auto& [w, term] : terms_) s += w * term_value(term, x, yr);
        return s;
    }
    double operator()(const Vec& x, const Vec& y) const { return value(x, y); }

    [[nodiscard]] Jet2 jet(const Vec& x, const Vec& y) const {
        check(x, y);
        const Vec yr = reduce_angles(y);
        Jet2 out{0.0, Vec::Zero(2 * n_), Mat::Zero(2 * n_, 2 * n_)};
        for (const auto& [w, term] : terms_) {
            const Jet2 j = term_jet(term, x, yr);
            out.value += w * j.value;
            out.gradient += w * j.gradient;
            out.hessian += w * j.hessian;
        }
        return out;
    }

    [[nodiscard]] Mat hessian(const Vec& x, const Vec& y) const { return jet(x, y).hessian; }

    /// Partial of total order <= 2; alpha has length 2n in the (x, y) basis.
    [[nodiscard]] double partial(const MultiIndex& alpha, const Vec& x, const Vec& y) const {
        if (static_cast<int>(alpha.size()) != 2 * n_) throw InputError("field multi-index must have length 2n");
        const auto axes = axes_of(alpha);
        if (axes.size() > 2) throw InputError("field partials are available up to order 2");
        const Jet2 j = jet(x, y);
        if (axes.empty()) return j.value;
        if (axes.size() == 1) return j.gradient[axes[0]];
        return j.hessian(axes[0], axes[1]);
    }

    /// True when no term depends on y.
    [[nodiscard]] bool y_independent() const {
        for (const auto& [w, t] : terms_) {
            if (std::holds_alternative<detail::PullbackTerm>(t)) continue;
            if (auto c = std::get_if<detail::CustomTerm>(&t)) {
                if (!c->y_independent) return false;
                continue;
            }
            const LaurentPolynomial* poly = nullptr;
            if (auto m = std::get_if<detail::MonomialTerm>(&t)) {
                for (int k : m->term.k)
                    if (k != 0) return false;
                continue;
            }
            if (auto a = std::get_if<detail::Abs2Term>(&t)) poly = &a->poly;
            if (auto l = std::get_if<detail::LogAbsTerm>(&t)) poly = &l->poly;
            if (poly && poly->size() > 1) return false;
        }
        return true;
    }

    // Builders ----------------------------------------------------------

    PeriodicScalarField& add(double weight, detail::FieldTerm term) {
        terms_.emplace_back(weight, std::move(term));
        return *this;
    }

    PeriodicScalarField& add(double weight, const PeriodicScalarField& other) {
        if (other.n_ != n_) throw InputError("cannot sum fields of different dimension");
        for (const auto& [w, t] : other.terms_) terms_.emplace_back(weight * w, t);
        return *this;
    }

    [[nodiscard]] PeriodicScalarField scaled(double weight) const {
        PeriodicScalarField f(n_, weight == -1.0 ? "-(" + label_ + ")" : std::to_string(weight) + "*(" + label_ + ")");
        f.add(weight, *this);
        return f;
    }

  private:
    void check(const Vec& x, const Vec& y) const {
        if (x.size() != n_ || y.size() != n_) throw InputError("field point dimension mismatch");
    }

    [[nodiscard]] double term_value(const detail::FieldTerm& term, const Vec& x, const Vec& y) const {
        return std::visit(
            [&](const auto& t) -> double {
                using T = std::decay_t<decltype(t)>;
                if constexpr (std::is_same_v<T, detail::PullbackTerm>) {
                    return t.potential->value(x);
                } else if constexpr (std::is_same_v<T, detail::MonomialTerm>) {
                    const auto e = detail::laurent_exp(t.term, x, y);
                    return t.imaginary ? e.imag() : e.real();
                } else if constexpr (std::is_same_v<T, detail::Abs2Term>) {
                    return std::norm(detail::poly_value(t.poly, x, y));
                } else if constexpr (std::is_same_v<T, detail::CustomTerm>) {
                    return t.value(x, y);
                } else {
                    if (!t.zero_free.contains(x)) throw DomainError("log-modulus field evaluated outside its zero-free box");
                    const double q = std::norm(detail::poly_value(t.poly, x, y));
                    if (!(q > 0.0)) throw DomainError("log-modulus field hit a zero of its polynomial");
                    return 0.5 * std::log(q);
                }
            },
            term);
    }

    [[nodiscard]] Jet2 term_jet(const detail::FieldTerm& term, const Vec& x, const Vec& y) const {
        const int n = n_;
        return std::visit(
            [&](const auto& t) -> Jet2 {
                using T = std::decay_t<decltype(t)>;
                Jet2 j{0.0, Vec::Zero(2 * n), Mat::Zero(2 * n, 2 * n)};
                if constexpr (std::is_same_v<T, detail::PullbackTerm>) {
                    j.value = t.potential->value(x);
                    j.gradient.head(n) = t.potential->gradient(x);
                    j.hessian.topLeftCorner(n, n) = t.potential->hessian(x);
                } else if constexpr (std::is_same_v<T, detail::MonomialTerm>) {
                    const auto p = detail::poly_jet({t.term}, n, x, y);
                    auto part = [&](std::complex<double> c) { return t.imaginary ? c.imag() : c.real(); };
                    j.value = part(p.value);
                    for (int u = 0; u < 2 * n; ++u) {
                        j.gradient[u] = part(p.gradient[u]);
                        for (int v = 0; v < 2 * n; ++v) j.hessian(u, v) = part(p.hessian(u, v));
                    }
                } else if constexpr (std::is_same_v<T, detail::Abs2Term>) {
                    j = detail::abs2_jet(detail::poly_jet(t.poly, n, x, y), n);
                } else if constexpr (std::is_same_v<T, detail::CustomTerm>) {
                    j = t.jet(x, y);
                } else {
                    if (!t.zero_free.contains(x)) throw DomainError("log-modulus field evaluated outside its zero-free box");
                    const Jet2 q = detail::abs2_jet(detail::poly_jet(t.poly, n, x, y), n);
                    if (!(q.value > 0.0)) throw DomainError("log-modulus field hit a zero of its polynomial");
                    j.value = 0.5 * std::log(q.value);
                    j.gradient = 0.5 * q.gradient / q.value;
                    j.hessian = 0.5 * (q.hessian / q.value - q.gradient * q.gradient.transpose() / (q.value * q.value));
                }
                return j;
            },
            term);
    }

    int n_;
    std::string label_;
    std::vector<std::pair<double, detail::FieldTerm>> terms_;
};

namespace field {

inline void check_poly(const LaurentPolynomial& poly, int n) {
    if (poly.empty()) throw InputError("Laurent polynomial needs at least one term");
    for (const auto& t : poly)
        if (static_cast<int>(t.k.size()) != n) throw InputError("Laurent exponent length must equal the dimension");
}

inline std::string describe(const LaurentPolynomial& poly) {
    std::ostringstream os;
    for (std::size_t m = 0; m < poly.size(); ++m) {
        if (m) os << " + ";
        os << "(" << poly[m].c.real();
        if (poly[m].c.imag() != 0.0) os << (poly[m].c.imag() > 0 ? "+" : "") << poly[m].c.imag() << "i";
        os << ")z^(";
        for (std::size_t j = 0; j < poly[m].k.size(); ++j) os << (j ? "," : "") << poly[m].k[j];
        os << ")";
    }
    return os.str();
}

/// f(x, y) = phi(x).
inline PeriodicScalarField pullback(const InvariantPotential& phi) {
    PeriodicScalarField f(phi.dimension(), "pullback(" + phi.name() + ")");
    f.add(1.0, detail::PullbackTerm{std::make_shared<const InvariantPotential>(phi)});
    return f;
}

/// Re(c exp(<k, w>)).
inline PeriodicScalarField laurent_re(int n, std::complex<double> c, std::vector<int> k) {
    LaurentTerm t{c, std::move(k)};
    check_poly({t}, n);
    PeriodicScalarField f(n, "Re[" + describe({t}) + "]");
    f.add(1.0, detail::MonomialTerm{std::move(t), false});
    return f;
}

/// Im(c exp(<k, w>)).
inline PeriodicScalarField laurent_im(int n, std::complex<double> c, std::vector<int> k) {
    LaurentTerm t{c, std::move(k)};
    check_poly({t}, n);
    PeriodicScalarField f(n, "Im[" + describe({t}) + "]");
    f.add(1.0, detail::MonomialTerm{std::move(t), true});
    return f;
}

/// |P|^2.
inline PeriodicScalarField laurent_abs2(int n, LaurentPolynomial poly) {
    check_poly(poly, n);
    PeriodicScalarField f(n, "|" + describe(poly) + "|^2");
    f.add(1.0, detail::Abs2Term{std::move(poly)});
    return f;
}

/// log|P|, valid only on a caller-declared box where P has no zeros.
inline PeriodicScalarField laurent_log_abs(int n, LaurentPolynomial poly, const std::optional<Box>& zero_free_box) {
    check_poly(poly, n);
    if (!zero_free_box) throw InputError("log-modulus field requires a zero-free box declaration");
    if (zero_free_box->dimension() != n) throw InputError("zero-free box dimension mismatch");
    PeriodicScalarField f(n, "log|" + describe(poly) + "|");
    f.add(1.0, detail::LogAbsTerm{std::move(poly), *zero_free_box});
    return f;
}

}  // namespace field

/// Build a field from a descriptor (the structured form of the config schema).
inline PeriodicScalarField make_periodic_field(const FieldDescriptor& d) {
    switch (d.kind) {
        case FieldKind::pullback:
            if (!d.potential) throw InputError("pullback field requires a potential");
            return field::pullback(make_builtin_potential(*d.potential, d.n, d.potential_params));
        case FieldKind::laurent_re:
        case FieldKind::laurent_im: {
            if (d.coeffs.size() != 1) throw InputError("Re/Im field takes exactly one Laurent monomial");
            const auto& t = d.coeffs.front();
            return d.kind == FieldKind::laurent_re ? field::laurent_re(d.n, t.c, t.k) : field::laurent_im(d.n, t.c, t.k);
        }
        case FieldKind::laurent_abs2: return field::laurent_abs2(d.n, d.coeffs);
        case FieldKind::laurent_log_abs: return field::laurent_log_abs(d.n, d.coeffs, d.zero_free_box);
        case FieldKind::sum: {
            if (d.terms.empty()) throw InputError("sum field requires at least one term");
            std::string label;
            for (const auto& [w, sub] : d.terms) label += (label.empty() ? "" : " + ") + std::to_string(w) + "*f";
            PeriodicScalarField f(d.n, "sum");
            for (const auto& [w, sub] : d.terms) {
                if (sub.n != d.n) throw InputError("sum field terms must share the dimension");
                f.add(w, make_periodic_field(sub));
            }
            return f;
        }
    }
    throw InputError("unknown field kind");
}

// ---------------------------------------------------------------------------
// Torus quadrature
// ---------------------------------------------------------------------------

/// Uniform tensor trapezoidal rule with N nodes per angle, weight (2pi/N)^n.
struct QuadratureRule {
    int n = 1;
    int points_per_angle = 16;

    QuadratureRule(int dim, int N) : n(dim), points_per_angle(N) {
        if (dim < 1) throw InputError("quadrature dimension must be at least 1");
        if (N < 1 || (N & (N - 1)) != 0) throw InputError("points per angle must be a power of two");
    }

    [[nodiscard]] double node(int j) const { return kTwoPi * j / points_per_angle; }
    [[nodiscard]] double weight() const { return std::pow(kTwoPi / points_per_angle, n); }
    [[nodiscard]] std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < n; ++i) s *= static_cast<std::size_t>(points_per_angle);
        return s;
    }
};

/// Largest node count per angle used by auto-refinement.
inline constexpr int kMaxQuadraturePoints = 1024;
/// Auto-refinement also stops before the tensor grid exceeds this many nodes.
inline constexpr std::size_t kMaxQuadratureNodes = std::size_t{1} << 24;

struct QuadratureResult {
    double value = 0.0;
    int points_per_angle = 0;
    bool converged = false;
};

namespace detail {

// Sum of f and |f| over the rule's nodes, lexicographic order, pairwise.
template <typename F>
std::pair<double, double> torus_sums(const F& f, const Vec& x, const QuadratureRule& rule) {
    const int n = rule.n;
    const int N = rule.points_per_angle;
    std::vector<double> vals(rule.size()), absvals(rule.size());
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    Vec y(n);
    for (std::size_t m = 0; m < vals.size(); ++m) {
        for (int j = 0; j < n; ++j) y[j] = rule.node(idx[static_cast<std::size_t>(j)]);
        vals[m] = f(x, y);
        absvals[m] = std::abs(vals[m]);
        for (int j = n - 1; j >= 0; --j) {
            if (++idx[static_cast<std::size_t>(j)] < N) break;
            idx[static_cast<std::size_t>(j)] = 0;
        }
    }
    return {pairwise_sum(vals), pairwise_sum(absvals)};
}

}  // namespace detail

/// Fixed-rule trapezoidal sum of f(x, .) over T^n (unnormalized).
template <typename F>
double torus_quadrature(const F& f, const Vec& x, const QuadratureRule& rule) {
    return detail::torus_sums(f, x, rule).first * rule.weight();
}

/**
 * Trapezoidal sum with doubling refinement, starting at `start_N` per angle,
 * until the change is below 1e-10 relative (measured against the integral of
 * |f|) or N reaches 1024 per angle.
 */
template <typename F>
QuadratureResult torus_quadrature_auto(const F& f, const Vec& x, int n, int start_N = 4) {
    QuadratureRule rule(n, start_N);
    double prev = torus_quadrature(f, x, rule);
    while (true) {
        const int next_N = rule.points_per_angle * 2;
        QuadratureRule finer(n, next_N);
        if (next_N > kMaxQuadraturePoints || finer.size() > kMaxQuadratureNodes)
            return {prev, rule.points_per_angle, false};
        const auto [sum, abs_sum] = detail::torus_sums(f, x, finer);
        const double cur = sum * finer.weight();
        const double scale = abs_sum * finer.weight();
        if (std::abs(cur - prev) <= 1e-10 * std::max(scale, std::abs(cur)))
            return {cur, next_N, true};
        prev = cur;
        rule = finer;
    }
}

inline double torus_quadrature(const PeriodicScalarField& f, const Vec& x) {
    return torus_quadrature_auto(f, x, f.dimension()).value;
}

}  // namespace tklab
