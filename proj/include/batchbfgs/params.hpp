#pragma once

#include "core.hpp"
#include "fd.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace batchbfgs {

enum class LsCondition { armijo, wolfe, strong_wolfe };
enum class LsStyle { backtracking, bracketing };
enum class HessianMode { dense_bfgs, limited_memory };

/// Solver and line-search configuration.
struct SolverParams {
    /// Absolute gradient-norm floor of the convergence test.
    double eps_abs = 1e-10;
    /// Relative tolerance: stop when |g| <= max(eps_abs, eps_rel * |x|).
    double eps_rel = 1e-5;
    /// 0 means unlimited.
    int max_iterations = 0;

    LsCondition ls_condition = LsCondition::wolfe;
    LsStyle ls_style = LsStyle::backtracking;
    int max_ls_iterations = 20;

    HessianMode mode = HessianMode::limited_memory;
    /// L-BFGS history size.
    int memory = 6;

    double c1 = 1e-4;
    double c2 = 0.9;

    BatchWidth batch{1};
    Coupling coupling = Coupling::split;

    /// Degree of the line-search polynomial fit. Unset means width - 1;
    /// 0 disables fitting.
    std::optional<int> polyfit_order;
    /// Stencil size of the finite-difference directional derivative. Unset
    /// means the batch width. 0, an unsupported count or a count above the
    /// width falls back to grad . p.
    std::optional<int> dg_points;
    /// Finite-difference step; unset means 1e-7 * (1 + |x|).
    std::optional<double> h;
    /// Custom stencil weights, same length as the effective stencil.
    std::optional<std::vector<double>> dg_coeffs;

    // Accessors mirroring the configuration calls of the batched interface.
    void set_polyfit_order(int order) { polyfit_order = order; }
    void set_dg_order(int points) { dg_points = points; }
    void set_dg_coeffs(std::vector<double> cs) { dg_coeffs = std::move(cs); }
    void set_delta(double step) { h = step; }

    [[nodiscard]] int effective_polyfit_order() const noexcept
    {
        if (batch.is_scalar()) {
            return 0;
        }
        return polyfit_order.value_or(batch.value() - 1);
    }
    [[nodiscard]] int get_polyfit_order() const noexcept { return effective_polyfit_order(); }

    /// Stencil size actually used, 0 when the gradient dot product is used.
    [[nodiscard]] int effective_dg_points() const noexcept
    {
        if (coupling == Coupling::legacy) {
            return 0;
        }
        const int pts = dg_points.value_or(batch.is_scalar() ? 0 : batch.value());
        const bool supported = pts == 2 || pts == 4 || pts == 6 || pts == 8;
        if (!supported || pts > batch.value()) {
            return 0;
        }
        return pts;
    }
    [[nodiscard]] int get_dg_order() const noexcept { return effective_dg_points(); }

    /// Scheme for the effective stencil; empty when finite differences are off.
    [[nodiscard]] std::optional<FdScheme> fd_scheme() const
    {
        const int pts = effective_dg_points();
        if (pts == 0) {
            return std::nullopt;
        }
        auto scheme = FdScheme::central(pts, h);
        if (dg_coeffs) {
            scheme = set_coeffs(std::move(scheme), *dg_coeffs);
        }
        return scheme;
    }

    /// Throws ConfigError on the first violated rule.
    void validate() const
    {
        if (!(eps_abs >= 0.0) || !(eps_rel >= 0.0)) {
            throw ConfigError{"tolerances must be non-negative"};
        }
        if (max_iterations < 0) {
            throw ConfigError{"max_iterations must be >= 0"};
        }
        if (max_ls_iterations < 1) {
            throw ConfigError{"max_ls_iterations must be >= 1"};
        }
        if (memory < 1) {
            throw ConfigError{"memory must be >= 1"};
        }
        if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) {
            throw ConfigError{"line-search constants need 0 < c1 < c2 < 1"};
        }
        if (polyfit_order) {
            if (*polyfit_order < 0) {
                throw ConfigError{"polyfit order must be >= 0"};
            }
            if (*polyfit_order > batch.value() - 1) {
                throw ConfigError{"polyfit order " + std::to_string(*polyfit_order) +
                                  " exceeds width - 1 = " + std::to_string(batch.value() - 1)};
            }
        }
        if (h && !(*h > 0.0)) {
            throw ConfigError{"finite-difference step must be positive"};
        }
        if (dg_coeffs && effective_dg_points() != 0 &&
            dg_coeffs->size() != static_cast<std::size_t>(effective_dg_points())) {
            throw ConfigError{"expected " + std::to_string(effective_dg_points()) +
                              " finite-difference coefficients, got " +
                              std::to_string(dg_coeffs->size())};
        }
    }
};

inline std::string_view to_string(LsCondition c)
{
    switch (c) {
    case LsCondition::armijo: return "armijo";
    case LsCondition::wolfe: return "wolfe";
    case LsCondition::strong_wolfe: return "strong-wolfe";
    }
    return "?";
}

inline std::string_view to_string(LsStyle s)
{
    return s == LsStyle::backtracking ? "backtracking" : "bracketing";
}

} // namespace batchbfgs
