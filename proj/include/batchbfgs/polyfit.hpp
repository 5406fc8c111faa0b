#pragma once

#include "core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

/// \file polyfit.hpp
///
/// Least-squares polynomial fits of line-search samples and real-root
/// extraction for picking the step at the fitted minimum.

namespace batchbfgs {

class SingularFitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Coefficients in ascending degree: c[0] + c[1] t + ... + c[d] t^d.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<double> coeffs) : c_{std::move(coeffs)} {}

    [[nodiscard]] const std::vector<double>& coeffs() const noexcept { return c_; }
    [[nodiscard]] int degree() const noexcept { return static_cast<int>(c_.size()) - 1; }
    [[nodiscard]] double operator[](std::size_t i) const { return c_.at(i); }

    [[nodiscard]] double operator()(double t) const noexcept
    {
        double acc = 0.0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) {
            acc = acc * t + *it;
        }
        return acc;
    }

    [[nodiscard]] Polynomial derivative() const
    {
        if (c_.size() <= 1) {
            return Polynomial{{0.0}};
        }
        std::vector<double> d(c_.size() - 1);
        for (std::size_t i = 1; i < c_.size(); ++i) {
            d[i - 1] = static_cast<double>(i) * c_[i];
        }
        return Polynomial{std::move(d)};
    }

    /// Drops leading coefficients with |c| <= 1e-12 * max|c|. A zero
    /// polynomial trims to a single zero coefficient.
    [[nodiscard]] Polynomial trimmed() const
    {
        double scale = 0.0;
        for (double v : c_) {
            scale = std::max(scale, std::abs(v));
        }
        std::vector<double> out = c_;
        while (out.size() > 1 && std::abs(out.back()) <= 1e-12 * scale) {
            out.pop_back();
        }
        if (out.empty()) {
            out.push_back(0.0);
        }
        return Polynomial{std::move(out)};
    }

    [[nodiscard]] bool is_zero() const noexcept
    {
        return std::all_of(c_.begin(), c_.end(), [](double v) { return v == 0.0; });
    }

private:
    std::vector<double> c_;
};

/// Least-squares fit of degree `order` via a column-pivoted Householder QR of
/// the Vandermonde matrix (exact interpolation when the system is square). Throws SingularFitError when the nodes cannot
/// determine `order + 1` coefficients.
inline Polynomial polyfit_fit(std::span<const double> nodes, std::span<const double> values,
                              int order)
{
    if (nodes.size() != values.size()) {
        throw ContractError{"polyfit_fit: nodes and values differ in length"};
    }
    if (order < 0) {
        throw ContractError{"polyfit_fit: negative order"};
    }
    const auto rows = static_cast<Eigen::Index>(nodes.size());
    const Eigen::Index cols = order + 1;
    if (rows < cols) {
        throw SingularFitError{"polyfit_fit: fewer samples than coefficients"};
    }

    Matrix vander(rows, cols);
    Vector rhs(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double t = nodes[static_cast<std::size_t>(r)];
        vander(r, 0) = 1.0;
        for (Eigen::Index c = 1; c < cols; ++c) {
            vander(r, c) = vander(r, c - 1) * t;
        }
        rhs(r) = values[static_cast<std::size_t>(r)];
    }

    Eigen::ColPivHouseholderQR<Matrix> qr(vander);
    if (qr.rank() < cols) {
        throw SingularFitError{"polyfit_fit: Vandermonde system is rank deficient"};
    }
    if (rows > cols) {
        const Vector sol = qr.solve(rhs);
        return Polynomial{std::vector<double>(sol.data(), sol.data() + sol.size())};
    }

    // Square case: Bjorck-Pereyra on ascending nodes.
    std::vector<std::size_t> idx(nodes.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return nodes[a] < nodes[b]; });
    std::vector<double> x(idx.size());
    std::vector<double> c(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        x[i] = nodes[idx[i]];
        c[i] = values[idx[i]];
    }
    const std::size_t n = x.size() - 1;
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = n; i > k; --i) {
            c[i] = (c[i] - c[i - 1]) / (x[i] - x[i - k - 1]);
        }
    }
    for (std::size_t k = n; k-- > 0;) {
        for (std::size_t i = k; i < n; ++i) {
            c[i] -= x[k] * c[i + 1];
        }
    }
    return Polynomial{std::move(c)};
}

namespace detail {

inline void collapse_sorted(std::vector<double>& roots)
{
    std::sort(roots.begin(), roots.end());
    std::vector<double> out;
    for (double r : roots) {
        if (!out.empty() && std::abs(r - out.back()) <= 1e-7 * (1.0 + std::abs(r))) {
            continue;
        }
        out.push_back(r);
    }
    roots = std::move(out);
}

inline std::vector<double> quadratic_roots(double c0, double c1, double c2)
{
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    const double scale = c1 * c1 + std::abs(4.0 * c2 * c0);
    if (disc < 0.0) {
        // Treat a discriminant lost in rounding as a double root.
        if (-disc <= 1e-14 * scale) {
            return {-c1 / (2.0 * c2)};
        }
        return {};
    }
    if (disc == 0.0) {
        return {-c1 / (2.0 * c2)};
    }
    // Cancellation-free form.
    const double q = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
    std::vector<double> r{q / c2};
    if (q != 0.0) {
        r.push_back(c0 / q);
    } else {
        r.push_back(0.0);
    }
    return r;
}

/// Diagonal similarity scaling by powers of two so rows and columns have
/// comparable norms; keeps eigenvalues of badly scaled companions accurate.
inline void balance(Matrix& a)
{
    const Eigen::Index n = a.rows();
    for (bool changed = true; changed;) {
        changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double col = a.col(i).cwiseAbs().sum() - std::abs(a(i, i));
            const double row = a.row(i).cwiseAbs().sum() - std::abs(a(i, i));
            if (col == 0.0 || row == 0.0) {
                continue;
            }
            double f = 1.0;
            double c = col;
            const double total = col + row;
            while (c < row / 2.0) {
                c *= 2.0;
                f *= 2.0;
            }
            while (c >= row * 2.0) {
                c /= 2.0;
                f /= 2.0;
            }
            if (c + row / f < 0.95 * total) {
                changed = true;
                a.row(i) /= f;
                a.col(i) *= f;
            }
        }
    }
}

/// A few Newton steps; keeps the start when they do not reduce |p|.
inline double polish_root(const Polynomial& p, const Polynomial& dp, double r)
{
    double best = r;
    double best_abs = std::abs(p(r));
    for (int it = 0; it < 8 && best_abs > 0.0; ++it) {
        const double slope = dp(r);
        if (slope == 0.0 || !std::isfinite(slope)) {
            break;
        }
        r -= p(r) / slope;
        const double v = std::abs(p(r));
        if (!(v < best_abs)) {
            break;
        }
        best = r;
        best_abs = v;
    }
    return best;
}

} // namespace detail

/// All distinct real roots in ascending order. Degrees 1 and 2 are solved in
/// closed form, higher degrees through the eigenvalues of the balanced
/// companion matrix followed by Newton polishing. Throws ContractError for the zero polynomial.
inline std::vector<double> poly_real_roots(const Polynomial& poly)
{
    const Polynomial p = poly.trimmed();
    if (p.is_zero()) {
        throw ContractError{"poly_real_roots: zero polynomial"};
    }
    const auto& c = p.coeffs();
    const int d = p.degree();
    std::vector<double> roots;
    if (d == 0) {
        return roots;
    }
    if (d == 1) {
        roots.push_back(-c[0] / c[1]);
    } else if (d == 2) {
        roots = detail::quadratic_roots(c[0], c[1], c[2]);
    } else {
        Matrix companion = Matrix::Zero(d, d);
        for (int i = 1; i < d; ++i) {
            companion(i, i - 1) = 1.0;
        }
        for (int i = 0; i < d; ++i) {
            companion(i, d - 1) = -c[static_cast<std::size_t>(i)] / c[static_cast<std::size_t>(d)];
        }
        detail::balance(companion);
        Eigen::EigenSolver<Matrix> es(companion, false);
        if (es.info() != Eigen::Success) {
            throw NumericalError{"poly_real_roots: eigenvalue iteration failed"};
        }
        const auto& ev = es.eigenvalues();
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            const double re = ev(i).real();
            if (std::abs(ev(i).imag()) <= 1e-8 * (1.0 + std::abs(re))) {
                roots.push_back(re);
            }
        }
        const Polynomial dp = p.derivative();
        for (double& r : roots) {
            r = detail::polish_root(p, dp, r);
        }
    }
    detail::collapse_sorted(roots);
    return roots;
}

/// Smallest local minimiser of `poly` inside [alpha / 4, 4 alpha]: a real
/// root of the derivative where the second derivative is positive.
inline std::optional<double> select_alpha_min(const Polynomial& poly, double alpha)
{
    if (!(alpha > 0.0)) {
        throw ContractError{"select_alpha_min: alpha must be positive"};
    }
    const Polynomial d1 = poly.derivative().trimmed();
    if (d1.degree() < 1 || d1.is_zero()) {
        return std::nullopt;
    }
    const Polynomial d2 = d1.derivative();
    const double lo = 0.25 * alpha;
    const double hi = 4.0 * alpha;
    for (double r : poly_real_roots(d1)) {
        if (d2(r) > 0.0 && r >= lo && r <= hi) {
            return r;
        }
    }
    return std::nullopt;
}

} // namespace batchbfgs
