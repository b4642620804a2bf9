#pragma once

/**
 * @file core.hpp
 * @brief Shared vocabulary: vectors, boxes, grids, deterministic sums and RNG,
 *        and the error types every module throws.
 */

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tklab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Invalid caller input (bad name, bad parameters, malformed descriptor).
class InputError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A stencil or evaluation point left the declared domain of a function.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// The Hessian of a potential failed to be positive definite.
class NotKahlerError : public std::runtime_error {
  public:
    NotKahlerError(const std::string& what, double eigenvalue)
        : std::runtime_error(what), eigenvalue_(eigenvalue) {}
    [[nodiscard]] double eigenvalue() const noexcept { return eigenvalue_; }

  private:
    double eigenvalue_;
};

/// A numerical procedure could not deliver its postcondition.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Boxes and grids
// ---------------------------------------------------------------------------

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    [[nodiscard]] bool contains(double v) const noexcept { return v >= lo && v <= hi; }
};

/// Axis-aligned box, possibly unbounded along some axes.
struct Box {
    std::vector<Interval> axes;

    static Box unbounded(int n) { return Box{std::vector<Interval>(static_cast<std::size_t>(n))}; }
    static Box cube(int n, double lo, double hi) {
        return Box{std::vector<Interval>(static_cast<std::size_t>(n), Interval{lo, hi})};
    }

    [[nodiscard]] int dimension() const noexcept { return static_cast<int>(axes.size()); }

    [[nodiscard]] bool contains(const Vec& p) const {
        if (p.size() != dimension()) return false;
        for (int i = 0; i < dimension(); ++i)
            if (!axes[static_cast<std::size_t>(i)].contains(p[i])) return false;
        return true;
    }
};

/// Per-axis sampling spec `min:max:step`, inclusive of `max` up to rounding.
struct AxisRange {
    double min = 0.0;
    double max = 0.0;
    double step = 1.0;

    [[nodiscard]] std::vector<double> samples() const {
        std::vector<double> out;
        const auto count = static_cast<long>(std::floor((max - min) / step + 1e-9)) + 1;
        out.reserve(static_cast<std::size_t>(count));
        for (long i = 0; i < count; ++i) out.push_back(min + static_cast<double>(i) * step);
        return out;
    }
};

/// Tensor grid over a box; points enumerated in lexicographic order
/// (first axis slowest).
class Grid {
  public:
    Grid() = default;
    explicit Grid(std::vector<std::vector<double>> axes) : axes_(std::move(axes)) {}

    static Grid from_ranges(std::span<const AxisRange> ranges) {
        std::vector<std::vector<double>> axes;
        axes.reserve(ranges.size());
        for (const auto& r : ranges) axes.push_back(r.samples());
        return Grid(std::move(axes));
    }

    /// `count` equispaced points per axis spanning a bounded box.
    static Grid uniform(const Box& box, int count) {
        std::vector<std::vector<double>> axes;
        for (const auto& iv : box.axes) {
            std::vector<double> a;
            if (count == 1) {
                a.push_back(0.5 * (iv.lo + iv.hi));
            } else {
                for (int i = 0; i < count; ++i)
                    a.push_back(iv.lo + (iv.hi - iv.lo) * static_cast<double>(i) / (count - 1));
            }
            axes.push_back(std::move(a));
        }
        return Grid(std::move(axes));
    }

    [[nodiscard]] int dimension() const noexcept { return static_cast<int>(axes_.size()); }

    [[nodiscard]] std::size_t size() const noexcept {
        if (axes_.empty()) return 0;
        std::size_t s = 1;
        for (const auto& a : axes_) s *= a.size();
        return s;
    }

    [[nodiscard]] Vec point(std::size_t index) const {
        Vec p(dimension());
        for (int i = dimension() - 1; i >= 0; --i) {
            const auto& a = axes_[static_cast<std::size_t>(i)];
            p[i] = a[index % a.size()];
            index /= a.size();
        }
        return p;
    }

    [[nodiscard]] const std::vector<double>& axis(int i) const { return axes_[static_cast<std::size_t>(i)]; }

    [[nodiscard]] Box bounds() const {
        Box b;
        for (const auto& a : axes_) b.axes.push_back({a.front(), a.back()});
        return b;
    }

  private:
    std::vector<std::vector<double>> axes_;
};

// ---------------------------------------------------------------------------
// Deterministic numerics
// ---------------------------------------------------------------------------

/// Pairwise (cascade) summation; the reduction tree depends only on the length.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const auto half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// SplitMix64. Used instead of <random> distributions, whose output is
/// implementation-defined, so sampled witnesses are portable bit-for-bit.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    Vec uniform_in(const Box& box) {
        Vec p(box.dimension());
        for (int i = 0; i < box.dimension(); ++i) {
            const auto& iv = box.axes[static_cast<std::size_t>(i)];
            p[i] = uniform(iv.lo, iv.hi);
        }
        return p;
    }

  private:
    std::uint64_t state_;
};

inline constexpr std::uint64_t kDefaultSeed = 0x5EED;

/// Reduce an angle into [0, 2pi).
inline double reduce_angle(double y) noexcept {
    double r = std::fmod(y, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

inline Vec reduce_angles(const Vec& y) {
    Vec r(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) r[i] = reduce_angle(y[i]);
    return r;
}

inline Vec unit(int n, int axis) {
    Vec e = Vec::Zero(n);
    e[axis] = 1.0;
    return e;
}

/// Eigenvalues of a small symmetric matrix, ascending.
inline Vec symmetric_eigenvalues(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> solver(m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigenvalue solve failed");
    return solver.eigenvalues();
}

}  // namespace tklab
