#pragma once

#include "core.hpp"
#include "fd.hpp"
#include "params.hpp"
#include "polyfit.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

/// \file linesearch.hpp
///
/// Step-length selection along a descent direction. Width 1 runs the classic
/// single-point backtracking or bracketing search. Widths 4 and 8 evaluate a
/// grid of trial steps per call and continue from the best lane, optionally
/// refined by a polynomial fit of the lane values.

namespace batchbfgs {

enum class LsStatus {
    success = 0,
    too_many_iterations,
    step_out_of_range,
};

/// Line-search input. Trial points are `x_prev + step * p`.
struct LsState {
    Vector x_prev;
    Vector p;
    double alpha = 1.0;
    double f_prev = 0.0;
    /// Directional derivative at `x_prev`; must be negative.
    double dg0 = 0.0;
};

struct LsResult {
    LsStatus status = LsStatus::success;
    double alpha = 0.0;
    Vector x;
    double f = 0.0;
    int iterations = 0;

    [[nodiscard]] bool ok() const noexcept { return status == LsStatus::success; }
};

struct Candidate {
    double step;
    Vector point;
};

/// Step multipliers of the trial grid.
inline std::span<const double> grid_multipliers(int width)
{
    static constexpr std::array<double, 4> four{0.5, 1.0, 1.5, 2.0};
    static constexpr std::array<double, 8> eight{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    switch (width) {
    case 4: return four;
    case 8: return eight;
    default:
        throw ContractError{"trial grids exist for widths 4 and 8 only, got " +
                            std::to_string(width)};
    }
}

/// Trial steps m * alpha and points x_prev + m * alpha * p in multiplier order.
inline std::vector<Candidate> candidate_steps(const Vector& x_prev, const Vector& p, double alpha,
                                              int width)
{
    const auto mults = grid_multipliers(width);
    if (!(alpha > 0.0)) {
        throw ContractError{"candidate_steps: alpha must be positive"};
    }
    std::vector<Candidate> out;
    out.reserve(mults.size());
    for (double m : mults) {
        const double step = m * alpha;
        out.push_back({step, x_prev + step * p});
    }
    return out;
}

/// Termination predicate. `dg_alpha` is ignored for Armijo.
inline bool check_condition(LsCondition cond, double f0, double dg0, double f_alpha,
                            double dg_alpha, double alpha, double c1, double c2)
{
    const bool armijo = f_alpha <= f0 + c1 * alpha * dg0;
    switch (cond) {
    case LsCondition::armijo: return armijo;
    case LsCondition::wolfe: return armijo && dg_alpha >= c2 * dg0;
    case LsCondition::strong_wolfe: return armijo && std::abs(dg_alpha) <= c2 * std::abs(dg0);
    }
    return false;
}

namespace detail {

enum class Verdict { accept, too_long, too_short };

inline constexpr double min_step = 1e-20;
inline constexpr double max_step = 1e20;
inline constexpr double step_increase = 2.1;

/// Curvature half of the Wolfe tests, applied after Armijo held.
inline Verdict curvature_verdict(LsCondition cond, double dg, double dg0, double c2)
{
    if (dg < c2 * dg0) {
        return Verdict::too_short;
    }
    if (cond == LsCondition::strong_wolfe && dg > -c2 * dg0) {
        return Verdict::too_long;
    }
    return Verdict::accept;
}

/// Directional derivative at a trial point: finite differences when a scheme
/// is configured, otherwise grad . p (free for lanes of a legacy batch).
template <Objective F>
std::optional<double> trial_slope(Evaluator<F>& ev, const std::optional<FdScheme>& scheme,
                                  const Vector& x, const Vector& p)
{
    if (scheme) {
        return directional_derivative(ev, x, p, *scheme);
    }
    try {
        return ev.eval_gradient(x).dot(p);
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

struct Selected {
    double step = 0.0;
    Vector x;
    double f = std::numeric_limits<double>::infinity();
    std::size_t lane = 0;
    /// Slope already obtained alongside the value, if any.
    std::optional<double> dg;
    /// The co-evaluated stencil produced a non-finite value.
    bool slope_failed = false;
};

template <Objective F>
Verdict judge(Evaluator<F>& ev, const LsState& st, const SolverParams& prm,
              const std::optional<FdScheme>& scheme, const Selected& sel)
{
    if (!std::isfinite(sel.f) || sel.f > st.f_prev + sel.step * (prm.c1 * st.dg0)) {
        return Verdict::too_long;
    }
    if (prm.ls_condition == LsCondition::armijo) {
        return Verdict::accept;
    }
    if (sel.slope_failed) {
        return Verdict::too_long;
    }
    const auto dg = sel.dg ? sel.dg : trial_slope(ev, scheme, sel.x, st.p);
    if (!dg) {
        return Verdict::too_long;
    }
    return curvature_verdict(prm.ls_condition, *dg, st.dg0, prm.c2);
}

inline void check_entry(const LsState& st)
{
    if (!(st.dg0 < 0.0)) {
        throw ContractError{"line search needs a descent direction (dg0 < 0)"};
    }
    if (!(st.alpha > 0.0)) {
        throw ContractError{"line search needs a positive initial step"};
    }
}

/// Polynomial refinement of one grid batch. Returns the fitted minimiser
/// when it lies in [alpha/4, 4 alpha] and improves on f_prev.
template <Objective F>
std::optional<Selected> refine_by_fit(Evaluator<F>& ev, const LsState& st,
                                      const SolverParams& prm,
                                      const std::optional<FdScheme>& scheme, double alpha,
                                      std::span<const double> mults, const BatchValues& vals,
                                      int order)
{
    // Fit in the normalised coordinate t = step / alpha, i.e. at the multipliers.
    std::vector<double> nodes;
    std::vector<double> values;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (vals.finite[i]) {
            nodes.push_back(mults[i]);
            values.push_back(vals.values[i]);
        }
    }
    if (nodes.size() < static_cast<std::size_t>(order) + 1) {
        return std::nullopt;
    }

    std::optional<double> t_min;
    try {
        t_min = select_alpha_min(polyfit_fit(nodes, values, order), 1.0);
    } catch (const SingularFitError&) {
        return std::nullopt;
    } catch (const NumericalError&) {
        return std::nullopt;
    }
    if (!t_min) {
        return std::nullopt;
    }

    Selected sel;
    sel.step = *t_min * alpha;
    sel.x = st.x_prev + sel.step * st.p;

    const std::size_t width = ev.width().lanes();
    const bool want_slope = prm.ls_condition != LsCondition::armijo && scheme.has_value();
    if (want_slope && static_cast<std::size_t>(scheme->points()) + 1 <= width) {
        // The fitted point and its stencil share one batch.
        const double h = scheme->step_at(sel.x);
        std::vector<Vector> batch{sel.x};
        for (auto& q : stencil_points(*scheme, sel.x, st.p, h)) {
            batch.push_back(std::move(q));
        }
        while (batch.size() < width) {
            batch.push_back(sel.x);
        }
        const auto out = ev.eval_batch(batch);
        sel.f = out.values[0];
        sel.dg = combine_stencil(*scheme, out, h, 1);
        sel.slope_failed = !sel.dg.has_value();
    } else {
        const std::array<Vector, 1> one{sel.x};
        sel.f = ev.eval_points(one).values[0];
    }

    if (std::isfinite(sel.f) && sel.f < st.f_prev) {
        return sel;
    }
    return std::nullopt;
}

/// Shared body of the multipoint and polyfit searches.
template <Objective F>
LsResult batched_search(Evaluator<F>& ev, const LsState& st, const SolverParams& prm,
                        int polyfit_order)
{
    check_entry(st);
    const int width = ev.width().value();
    const auto mults = grid_multipliers(width);
    const auto scheme = prm.fd_scheme();

    double alpha = st.alpha;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();

    LsResult res;
    for (int it = 0; it < prm.max_ls_iterations; ++it) {
        const auto cands = candidate_steps(st.x_prev, st.p, alpha, width);
        std::vector<Vector> pts;
        pts.reserve(cands.size());
        for (const auto& c : cands) {
            pts.push_back(c.point);
        }
        const auto vals = ev.eval_batch(pts);
        ev.count_ls_iteration();
        res.iterations = it + 1;

        // Strict comparison keeps the smallest multiplier on ties.
        std::size_t best = 0;
        for (std::size_t i = 1; i < vals.size(); ++i) {
            if (vals.values[i] < vals.values[best]) {
                best = i;
            }
        }
        Selected sel{cands[best].step, cands[best].point, vals.values[best], best, std::nullopt, false};

        if (polyfit_order > 0) {
            if (auto fitted =
                    refine_by_fit(ev, st, prm, scheme, alpha, mults, vals, polyfit_order)) {
                sel = std::move(*fitted);
            }
        }

        const Verdict verdict = judge(ev, st, prm, scheme, sel);
        if (verdict == Verdict::accept) {
            res.status = LsStatus::success;
            res.alpha = sel.step;
            res.x = std::move(sel.x);
            res.f = sel.f;
            return res;
        }

        // Grid steps adjacent to the selected point.
        double below = 0.0;
        double above = std::numeric_limits<double>::infinity();
        for (const auto& c : cands) {
            if (c.step < sel.step) {
                below = c.step;
            } else if (c.step > sel.step) {
                above = std::min(above, c.step);
            }
        }

        if (prm.ls_style == LsStyle::backtracking) {
            if (verdict == Verdict::too_long) {
                alpha = 0.5 * sel.step;
            } else {
                // Extrapolate past the grid, or zoom in when a higher lane lies beyond.
                alpha = std::isfinite(above) ? 0.5 * (sel.step + above) : 2.0 * sel.step;
            }
        } else {
            // A unimodal line function has its minimiser between the neighbours
            // of the lowest lane.
            if (below < hi && above > lo) {
                lo = std::max(lo, below);
                hi = std::min(hi, above);
            } else {
                lo = below;
                hi = above;
            }
            if (verdict == Verdict::too_long) {
                hi = std::min(hi, sel.step);
            } else {
                lo = std::max(lo, sel.step);
            }
            if (lo >= hi) {
                lo = verdict == Verdict::too_long ? 0.0 : sel.step;
                hi = verdict == Verdict::too_long ? sel.step : above;
            }
            alpha = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * sel.step;
        }

        if (alpha < min_step || alpha > max_step) {
            res.status = LsStatus::step_out_of_range;
            return res;
        }
    }
    res.status = LsStatus::too_many_iterations;
    return res;
}

} // namespace detail

/// Classic one-point-per-call search (width 1). Backtracking multiplies the
/// step by 0.5 when it is too long and by 2.1 when too short; bracketing
/// bisects the interval once both ends are known.
template <Objective F>
LsResult ls_single(Evaluator<F>& ev, const LsState& st, const SolverParams& prm)
{
    using detail::Verdict;
    detail::check_entry(st);
    const auto scheme = prm.fd_scheme();

    double step = st.alpha;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();

    LsResult res;
    std::vector<Vector> pts(ev.width().lanes());
    for (int it = 0; it < prm.max_ls_iterations; ++it) {
        detail::Selected sel;
        sel.step = step;
        sel.x = st.x_prev + step * st.p;
        for (auto& q : pts) {
            q = sel.x;
        }
        sel.f = ev.eval_batch(pts).values[0];
        ev.count_ls_iteration();
        res.iterations = it + 1;

        const Verdict verdict = detail::judge(ev, st, prm, scheme, sel);
        if (verdict == Verdict::accept) {
            res.status = LsStatus::success;
            res.alpha = step;
            res.x = std::move(sel.x);
            res.f = sel.f;
            return res;
        }

        if (prm.ls_style == LsStyle::backtracking) {
            step *= verdict == Verdict::too_long ? 0.5 : detail::step_increase;
        } else {
            if (verdict == Verdict::too_long) {
                hi = step;
            } else {
                lo = step;
            }
            step = std::isfinite(hi) ? 0.5 * (lo + hi) : step * detail::step_increase;
        }

        if (step < detail::min_step || step > detail::max_step) {
            res.status = LsStatus::step_out_of_range;
            return res;
        }
    }
    res.status = LsStatus::too_many_iterations;
    return res;
}

/// Grid search: continue from the lowest lane of each batch (ties go to the
/// smallest multiplier).
template <Objective F>
LsResult ls_multipoint(Evaluator<F>& ev, const LsState& st, const SolverParams& prm)
{
    return detail::batched_search(ev, st, prm, 0);
}

/// Grid search refined by a least-squares polynomial fit of the lane values.
template <Objective F>
LsResult ls_polyfit(Evaluator<F>& ev, const LsState& st, const SolverParams& prm)
{
    const int order = prm.effective_polyfit_order();
    if (order < 1) {
        throw ConfigError{"ls_polyfit needs a polynomial order >= 1"};
    }
    return detail::batched_search(ev, st, prm, order);
}

/// Picks the strategy implied by the batch width and polyfit order.
template <Objective F>
LsResult line_search(Evaluator<F>& ev, const LsState& st, const SolverParams& prm)
{
    if (ev.width().is_scalar()) {
        return ls_single(ev, st, prm);
    }
    if (prm.effective_polyfit_order() > 0) {
        return ls_polyfit(ev, st, prm);
    }
    return ls_multipoint(ev, st, prm);
}

} // namespace batchbfgs
