#pragma once

#include "core.hpp"
#include "linesearch.hpp"
#include "params.hpp"

#include <Eigen/Cholesky>

#include <chrono>
#include <deque>
#include <functional>
#include <string_view>
#include <variant>

/// \file solver.hpp
///
/// BFGS and L-BFGS outer loop. The line search is delegated to
/// linesearch.hpp; every objective call goes through an Evaluator so the
/// counters are comparable across strategies.

namespace batchbfgs {

/// Pairs with y's <= curvature_eps * |s| |y| are not stored.
inline constexpr double curvature_eps = 1e-10;

inline bool curvature_ok(const Vector& s, const Vector& y)
{
    return s.dot(y) > curvature_eps * s.norm() * y.norm();
}

/// One correction pair of the limited-memory approximation.
struct HistoryPair {
    Vector s;
    Vector y;
    double rho = 0.0; ///< 1 / (y's)
};

/// Rank-two BFGS update of the Hessian approximation:
/// B + y y' / (y's) - B s s' B / (s'B s). Returns B unchanged when the pair
/// fails the curvature test.
inline Matrix bfgs_update(const Matrix& B, const Vector& s, const Vector& y)
{
    if (!curvature_ok(s, y)) {
        return B;
    }
    const Vector Bs = B * s;
    const double sBs = s.dot(Bs);
    if (!(sBs > 0.0)) {
        return B;
    }
    Matrix out = B + (y * y.transpose()) / y.dot(s) - (Bs * Bs.transpose()) / sBs;
    // Symmetrise away rounding asymmetry.
    return 0.5 * (out + out.transpose());
}

/// Dense approximation B of the Hessian, starting from the identity.
class DenseHessian {
public:
    explicit DenseHessian(Eigen::Index n) : B_{Matrix::Identity(n, n)} {}

    [[nodiscard]] const Matrix& matrix() const noexcept { return B_; }
    void set_matrix(Matrix B) { B_ = std::move(B); }
    void reset() { B_.setIdentity(); }

    /// Returns false when the pair was skipped.
    bool update(const Vector& s, const Vector& y)
    {
        if (!curvature_ok(s, y)) {
            return false;
        }
        B_ = bfgs_update(B_, s, y);
        return true;
    }

    /// -B^{-1} g. A factorisation failure resets B to the identity.
    Vector direction(const Vector& g)
    {
        Eigen::LDLT<Matrix> ldlt(B_);
        if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) {
            Vector p = -ldlt.solve(g);
            if (p.allFinite() && ldlt.rcond() > 1e-14) {
                return p;
            }
        }
        reset();
        return -g;
    }

private:
    Matrix B_;
};

/// Bounded history of correction pairs applied with the two-loop recursion.
class LbfgsHistory {
public:
    explicit LbfgsHistory(int memory) : memory_{static_cast<std::size_t>(memory)} {}

    [[nodiscard]] const std::deque<HistoryPair>& pairs() const noexcept { return pairs_; }
    [[nodiscard]] std::size_t size() const noexcept { return pairs_.size(); }
    void reset() { pairs_.clear(); }

    /// s'y / y'y of the newest pair, 1 when empty.
    [[nodiscard]] double gamma() const
    {
        if (pairs_.empty()) {
            return 1.0;
        }
        const auto& last = pairs_.back();
        return last.s.dot(last.y) / last.y.squaredNorm();
    }

    bool update(const Vector& s, const Vector& y)
    {
        if (!curvature_ok(s, y)) {
            return false;
        }
        if (pairs_.size() == memory_) {
            pairs_.pop_front();
        }
        pairs_.push_back({s, y, 1.0 / y.dot(s)});
        return true;
    }

    /// -H g with H the implicit inverse-Hessian approximation.
    [[nodiscard]] Vector direction(const Vector& g) const
    {
        Vector q = -g;
        std::vector<double> a(pairs_.size());
        for (std::size_t i = pairs_.size(); i-- > 0;) {
            const auto& pr = pairs_[i];
            a[i] = pr.rho * pr.s.dot(q);
            q -= a[i] * pr.y;
        }
        q *= gamma();
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            const auto& pr = pairs_[i];
            const double b = pr.rho * pr.y.dot(q);
            q += (a[i] - b) * pr.s;
        }
        return q;
    }

private:
    std::size_t memory_;
    std::deque<HistoryPair> pairs_;
};

/// Either representation of the curvature model.
class HessianApprox {
public:
    HessianApprox(HessianMode mode, Eigen::Index n, int memory)
    {
        if (mode == HessianMode::dense_bfgs) {
            impl_.emplace<DenseHessian>(n);
        } else {
            impl_.emplace<LbfgsHistory>(memory);
        }
    }

    bool update(const Vector& s, const Vector& y)
    {
        return std::visit([&](auto& h) { return h.update(s, y); }, impl_);
    }
    void reset()
    {
        std::visit([](auto& h) { h.reset(); }, impl_);
    }

    [[nodiscard]] const DenseHessian* dense() const { return std::get_if<DenseHessian>(&impl_); }
    [[nodiscard]] const LbfgsHistory* limited() const
    {
        return std::get_if<LbfgsHistory>(&impl_);
    }

    friend inline Vector search_direction(HessianApprox& H, const Vector& g);

private:
    std::variant<LbfgsHistory, DenseHessian> impl_{std::in_place_type<LbfgsHistory>, 6};
};

/// -B^{-1} g (dense) or the two-loop product (limited memory).
inline Vector search_direction(HessianApprox& H, const Vector& g)
{
    return std::visit([&](auto& h) { return h.direction(g); }, H.impl_);
}

enum class SolverStatus {
    converged = 0,
    max_iterations,
    line_search_failed,
    numerical_error,
};

inline std::string_view to_string(SolverStatus s)
{
    switch (s) {
    case SolverStatus::converged: return "converged";
    case SolverStatus::max_iterations: return "max-iterations";
    case SolverStatus::line_search_failed: return "line-search-failed";
    case SolverStatus::numerical_error: return "numerical-error";
    }
    return "?";
}

struct RunMetrics {
    SolverStatus status = SolverStatus::converged;
    std::int64_t iterations = 0;
    double final_value = 0.0;
    double final_grad_norm = 0.0;
    EvalCounters counters;
    double wall_ms = 0.0;
};

struct MinimizeResult {
    Vector x;
    RunMetrics metrics;
};

/// Optional per-iteration callback: (iteration, x, f).
using IterateObserver = std::function<void(std::int64_t, const Vector&, double)>;

/// Quasi-Newton minimisation from `x0`. Stops when
/// |g| <= max(eps_abs, eps_rel |x|) or after `max_iterations` outer
/// iterations; a failed line search returns the current iterate.
template <Objective F>
MinimizeResult minimize(const F& objective, const Vector& x0, const SolverParams& params,
                        const IterateObserver& observer = {})
{
    params.validate();
    const auto start = std::chrono::steady_clock::now();

    Evaluator<F> ev(objective, params.batch, params.coupling);
    if (x0.size() != ev.dim()) {
        throw ContractError{"x0 has dimension " + std::to_string(x0.size()) + ", objective expects " +
                            std::to_string(ev.dim())};
    }
    if (!x0.allFinite()) {
        throw ContractError{"x0 has non-finite components"};
    }

    MinimizeResult out;
    auto& m = out.metrics;
    auto finish = [&](SolverStatus status, const Vector& x, double fx, const Vector& g) {
        out.x = x;
        m.status = status;
        m.final_value = fx;
        m.final_grad_norm = g.norm();
        m.counters = ev.counters();
        m.iterations = m.counters.outer_iterations;
        m.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        return out;
    };

    Vector x = x0;
    const std::vector<Vector> first(ev.width().lanes(), x);
    const double fx0 = ev.eval_batch(first).values[0];
    if (!std::isfinite(fx0)) {
        throw ContractError{"objective is not finite at x0"};
    }
    double fx = fx0;
    Vector g;
    try {
        g = ev.eval_gradient(x);
    } catch (const NumericalError&) {
        throw ContractError{"gradient is not finite at x0"};
    }
    if (observer) {
        observer(0, x, fx);
    }

    auto converged = [&](const Vector& grad, const Vector& at) {
        return grad.norm() <= std::max(params.eps_abs, params.eps_rel * at.norm());
    };
    if (converged(g, x)) {
        return finish(SolverStatus::converged, x, fx, g);
    }

    HessianApprox H(params.mode, ev.dim(), params.memory);
    for (std::int64_t k = 0;; ++k) {
        Vector p = search_direction(H, g);
        double dg0 = g.dot(p);
        if (!(dg0 < 0.0)) {
            H.reset();
            p = -g;
            dg0 = g.dot(p);
        }

        LsState st{x, p, k == 0 ? 1.0 / p.norm() : 1.0, fx, dg0};
        const LsResult ls = line_search(ev, st, params);
        if (!ls.ok()) {
            return finish(SolverStatus::line_search_failed, x, fx, g);
        }

        Vector g_new;
        try {
            g_new = ev.eval_gradient(ls.x);
        } catch (const NumericalError&) {
            return finish(SolverStatus::numerical_error, x, fx, g);
        }
        H.update(ls.x - x, g_new - g);
        x = ls.x;
        fx = ls.f;
        g = std::move(g_new);
        ev.count_outer_iteration();
        if (observer) {
            observer(k + 1, x, fx);
        }

        if (converged(g, x)) {
            return finish(SolverStatus::converged, x, fx, g);
        }
        if (params.max_iterations != 0 && k + 1 >= params.max_iterations) {
            return finish(SolverStatus::max_iterations, x, fx, g);
        }
    }
}

} // namespace batchbfgs
