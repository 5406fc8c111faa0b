#pragma once

#include "core.hpp"

#include <optional>
#include <vector>

/// \file fd.hpp
///
/// Finite-difference directional derivatives `d/dt f(x + t p)` evaluated with
/// a single batched call. Used by the line search in place of `grad(x) . p`.

namespace batchbfgs {

/// Standard central-difference weights for offsets -k..-1, +1..+k where
/// `points == 2k`. Supported point counts are 2, 4, 6 and 8.
inline std::vector<double> central_coefficients(int points)
{
    switch (points) {
    case 2:
        return {-1.0 / 2.0, 1.0 / 2.0};
    case 4:
        return {1.0 / 12.0, -2.0 / 3.0, 2.0 / 3.0, -1.0 / 12.0};
    case 6:
        return {-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0};
    case 8:
        return {1.0 / 280.0, -4.0 / 105.0, 1.0 / 5.0, -4.0 / 5.0,
                4.0 / 5.0,   -1.0 / 5.0,   4.0 / 105.0, -1.0 / 280.0};
    default:
        throw ConfigError{"central differences need 2, 4, 6 or 8 points, got " +
                          std::to_string(points)};
    }
}

/// Symmetric integer offsets -k..-1, +1..+k for a central stencil.
inline std::vector<int> central_offsets(int points)
{
    std::vector<int> offsets;
    const int half = points / 2;
    for (int i = -half; i <= half; ++i) {
        if (i != 0) {
            offsets.push_back(i);
        }
    }
    return offsets;
}

/// Stencil offsets (in units of h) and weights. When `h` is unset the step is
/// `1e-7 * (1 + |x|)` at the evaluation point.
struct FdScheme {
    std::vector<int> offsets;
    std::vector<double> coeffs;
    std::optional<double> h;

    [[nodiscard]] int points() const noexcept { return static_cast<int>(offsets.size()); }

    [[nodiscard]] double step_at(const Vector& x) const
    {
        return h ? *h : 1e-7 * (1.0 + x.norm());
    }

    static FdScheme central(int points, std::optional<double> h = std::nullopt)
    {
        if (h && !(*h > 0.0)) {
            throw ConfigError{"finite-difference step must be positive"};
        }
        return FdScheme{central_offsets(points), central_coefficients(points), h};
    }

    /// (f(x + h p) - f(x)) / h
    static FdScheme one_sided(std::optional<double> h = std::nullopt)
    {
        if (h && !(*h > 0.0)) {
            throw ConfigError{"finite-difference step must be positive"};
        }
        return FdScheme{{0, 1}, {-1.0, 1.0}, h};
    }
};

/// Replaces the weights. Only the length is checked, so user schemes may be
/// asymmetric.
inline FdScheme set_coeffs(FdScheme scheme, std::vector<double> coeffs)
{
    if (coeffs.size() != scheme.offsets.size()) {
        throw ConfigError{"expected " + std::to_string(scheme.offsets.size()) +
                          " finite-difference coefficients, got " +
                          std::to_string(coeffs.size())};
    }
    scheme.coeffs = std::move(coeffs);
    return scheme;
}

/// Points x + o h p for the central offsets of a `count`-point stencil,
/// ordered from the most negative to the most positive offset.
inline std::vector<Vector> fd_points(const Vector& x, const Vector& p, double h, int count)
{
    if (count != 2 && count != 4 && count != 6 && count != 8) {
        throw ContractError{"stencil size must be 2, 4, 6 or 8"};
    }
    if (!(h > 0.0)) {
        throw ContractError{"finite-difference step must be positive"};
    }
    std::vector<Vector> pts;
    for (int o : central_offsets(count)) {
        pts.emplace_back(x + (static_cast<double>(o) * h) * p);
    }
    return pts;
}

/// Stencil points of an arbitrary scheme, in offset order.
inline std::vector<Vector> stencil_points(const FdScheme& scheme, const Vector& x,
                                          const Vector& p, double h)
{
    std::vector<Vector> pts;
    pts.reserve(scheme.offsets.size());
    for (int o : scheme.offsets) {
        pts.emplace_back(x + (static_cast<double>(o) * h) * p);
    }
    return pts;
}

/// Combines stencil values; empty when any value is non-finite.
inline std::optional<double> combine_stencil(const FdScheme& scheme, const BatchValues& values,
                                             double h, std::size_t first = 0)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < scheme.coeffs.size(); ++i) {
        if (!values.finite[first + i]) {
            return std::nullopt;
        }
        acc += scheme.coeffs[i] * values.values[first + i];
    }
    return acc / h;
}

/// Directional derivative of the objective at `x` along `p`. Costs one
/// batched call when the stencil fits the batch width, otherwise
/// ceil(points / width) calls. Empty on a non-finite stencil value.
template <Objective F>
std::optional<double> directional_derivative(Evaluator<F>& ev, const Vector& x, const Vector& p,
                                             const FdScheme& scheme)
{
    if (scheme.points() < 2 || scheme.coeffs.size() != scheme.offsets.size()) {
        throw ContractError{"finite-difference scheme needs at least two points"};
    }
    const double h = scheme.step_at(x);
    const auto pts = stencil_points(scheme, x, p, h);
    const auto values = ev.eval_points(pts);
    return combine_stencil(scheme, values, h);
}

} // namespace batchbfgs
