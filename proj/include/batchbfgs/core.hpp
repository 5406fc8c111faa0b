#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

/// \file core.hpp
///
/// Domain types shared by every part of the library: the batched objective
/// contract, the evaluation wrapper that owns the call counters, and the
/// error types.

namespace batchbfgs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ============================== Errors ================================== {{{

/// A caller broke a documented precondition (dimension mismatch, bad width).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid solver or scheme configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite gradient or another arithmetic failure the solver must see.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// }}}

/// Number of points evaluated per objective invocation. 1 is the scalar
/// baseline, 4 and 8 model 4-lane and 8-lane vector kernels.
class BatchWidth {
public:
    constexpr BatchWidth() = default;
    constexpr explicit BatchWidth(int width) : width_{width}
    {
        if (width != 1 && width != 4 && width != 8) {
            throw ConfigError{"batch width must be 1, 4 or 8, got " + std::to_string(width)};
        }
    }

    [[nodiscard]] constexpr int value() const noexcept { return width_; }
    [[nodiscard]] constexpr std::size_t lanes() const noexcept
    {
        return static_cast<std::size_t>(width_);
    }
    [[nodiscard]] constexpr bool is_scalar() const noexcept { return width_ == 1; }

    friend constexpr bool operator==(BatchWidth, BatchWidth) = default;

private:
    int width_ = 1;
};

/// Per-run accounting. Forward and reverse calls count objective invocations
/// (one batched call is one forward call regardless of the width).
struct EvalCounters {
    std::int64_t forward_calls = 0;
    std::int64_t reverse_calls = 0;
    std::int64_t ls_iterations = 0;
    std::int64_t outer_iterations = 0;

    friend bool operator==(const EvalCounters&, const EvalCounters&) = default;
};

/// Anything with a dimension, a value and an analytic gradient.
template <class F>
concept Objective = requires(const F& f, const Vector& x, Vector& grad) {
    { f.dim() } -> std::convertible_to<Eigen::Index>;
    { f.value(x) } -> std::convertible_to<double>;
    f.gradient(x, grad);
};

/// Objectives may provide a native batched kernel `values(points, out)`.
template <class F>
concept NativeBatch = Objective<F> &&
    requires(const F& f, std::span<const Vector> points, std::span<double> out) {
        f.values(points, out);
    };

/// How the evaluation wrapper maps calls onto the underlying kernels.
enum class Coupling {
    /// Value-only forward calls; the gradient is requested separately and
    /// reuses the forward state of points already evaluated.
    split,
    /// Every evaluation computes the value and the gradient together, as in
    /// a classic `f(x, grad)` functor.
    legacy,
};

/// Result of one batched call. Non-finite lanes are reported as +infinity
/// with `finite[i] == false`.
struct BatchValues {
    std::vector<double> values;
    std::vector<std::uint8_t> finite;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] bool all_finite() const noexcept
    {
        return std::all_of(finite.begin(), finite.end(), [](auto v) { return v != 0; });
    }
};

/// Exact bitwise equality, used to recognise points whose forward state is
/// still available.
inline bool same_point(const Vector& a, const Vector& b) noexcept
{
    return a.size() == b.size() && std::equal(a.data(), a.data() + a.size(), b.data());
}

/// Wraps an objective with the batch width, the interface coupling and the
/// counters. All strategies go through this class so accounting is identical.
template <Objective F>
class Evaluator {
public:
    Evaluator(const F& objective, BatchWidth width, Coupling coupling = Coupling::split)
        : f_{&objective}, width_{width}, coupling_{coupling}
    {}

    [[nodiscard]] Eigen::Index dim() const { return static_cast<Eigen::Index>(f_->dim()); }
    [[nodiscard]] BatchWidth width() const noexcept { return width_; }
    [[nodiscard]] Coupling coupling() const noexcept { return coupling_; }
    [[nodiscard]] const F& objective() const noexcept { return *f_; }

    [[nodiscard]] const EvalCounters& counters() const noexcept { return counters_; }
    void count_ls_iteration() noexcept { ++counters_.ls_iterations; }
    void count_outer_iteration() noexcept { ++counters_.outer_iterations; }

    /// One batched forward call over exactly `width()` points.
    BatchValues eval_batch(std::span<const Vector> points)
    {
        if (points.size() != width_.lanes()) {
            throw ContractError{"eval_batch expects " + std::to_string(width_.value()) +
                                " points, got " + std::to_string(points.size())};
        }
        for (const auto& x : points) {
            check_dim(x);
        }

        BatchValues out;
        out.values.resize(points.size());
        if constexpr (NativeBatch<F>) {
            f_->values(points, std::span<double>{out.values});
        } else {
            for (std::size_t i = 0; i < points.size(); ++i) {
                out.values[i] = f_->value(points[i]);
            }
        }
        out.finite.resize(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            const bool ok = std::isfinite(out.values[i]);
            out.finite[i] = ok ? 1 : 0;
            if (!ok) {
                out.values[i] = std::numeric_limits<double>::infinity();
            }
        }
        ++counters_.forward_calls;

        if (coupling_ == Coupling::legacy) {
            // The coupled kernel produces all lane gradients in one reverse call.
            lane_points_.assign(points.begin(), points.end());
            lane_grads_.resize(points.size());
            for (std::size_t i = 0; i < points.size(); ++i) {
                lane_grads_[i].resize(dim());
                f_->gradient(points[i], lane_grads_[i]);
            }
            ++counters_.reverse_calls;
        } else {
            retained_.insert(retained_.end(), points.begin(), points.end());
        }
        return out;
    }

    /// Evaluates any number of points, splitting them into width-sized batches
    /// and padding the last batch with repeats of its first point.
    BatchValues eval_points(std::span<const Vector> points)
    {
        BatchValues all;
        const std::size_t w = width_.lanes();
        std::vector<Vector> batch;
        batch.reserve(w);
        for (std::size_t start = 0; start < points.size(); start += w) {
            const std::size_t count = std::min(w, points.size() - start);
            batch.assign(points.begin() + static_cast<std::ptrdiff_t>(start),
                         points.begin() + static_cast<std::ptrdiff_t>(start + count));
            while (batch.size() < w) {
                batch.push_back(batch.front());
            }
            auto part = eval_batch(batch);
            all.values.insert(all.values.end(), part.values.begin(),
                              part.values.begin() + static_cast<std::ptrdiff_t>(count));
            all.finite.insert(all.finite.end(), part.finite.begin(),
                              part.finite.begin() + static_cast<std::ptrdiff_t>(count));
        }
        return all;
    }

    /// Gradient at `x`. Counts one reverse call, plus one forward call when the
    /// forward state at `x` is not available from an earlier batch.
    Vector eval_gradient(const Vector& x)
    {
        check_dim(x);
        if (has_last_grad_ && same_point(x, last_grad_x_)) {
            return last_grad_;
        }

        Vector g(dim());
        if (coupling_ == Coupling::legacy) {
            if (const auto* lane = find_lane(x)) {
                g = *lane;
            } else {
                f_->gradient(x, g);
                ++counters_.forward_calls;
                ++counters_.reverse_calls;
            }
        } else {
            const bool covered = std::any_of(retained_.begin(), retained_.end(),
                                             [&](const Vector& r) { return same_point(r, x); });
            if (!covered) {
                ++counters_.forward_calls;
            }
            f_->gradient(x, g);
            ++counters_.reverse_calls;
            retained_.clear();
            retained_.push_back(x);
        }

        if (!g.allFinite()) {
            throw NumericalError{"gradient has non-finite components"};
        }
        last_grad_x_ = x;
        last_grad_ = g;
        has_last_grad_ = true;
        return g;
    }

    /// Gradient already produced for lane `i` of the last legacy batch.
    [[nodiscard]] const Vector& lane_gradient(std::size_t i) const { return lane_grads_.at(i); }

private:
    void check_dim(const Vector& x) const
    {
        if (x.size() != dim()) {
            throw ContractError{"point has dimension " + std::to_string(x.size()) +
                                ", objective expects " + std::to_string(dim())};
        }
    }

    const Vector* find_lane(const Vector& x) const
    {
        for (std::size_t i = 0; i < lane_points_.size(); ++i) {
            if (same_point(lane_points_[i], x)) {
                return &lane_grads_[i];
            }
        }
        return nullptr;
    }

    const F* f_;
    BatchWidth width_;
    Coupling coupling_;
    EvalCounters counters_;

    // split coupling: points whose forward state is still held
    std::vector<Vector> retained_;
    // legacy coupling: lanes of the most recent batch and their gradients
    std::vector<Vector> lane_points_;
    std::vector<Vector> lane_grads_;

    Vector last_grad_x_;
    Vector last_grad_;
    bool has_last_grad_ = false;
};

} // namespace batchbfgs
