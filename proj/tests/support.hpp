#pragma once

#include <batchbfgs/core.hpp>

#include <Eigen/QR>

#include <cmath>
#include <random>
#include <vector>

namespace testing_support {

using batchbfgs::Matrix;
using batchbfgs::Vector;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_{seed} {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }

    Vector vector(Eigen::Index n, double lo = -1.0, double hi = 1.0)
    {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            v[i] = uniform(lo, hi);
        }
        return v;
    }

    Vector gaussian(Eigen::Index n)
    {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            v[i] = normal();
        }
        return v;
    }

    /// Well-conditioned SPD matrix: Q diag(d) Q' with d in [0.5, 5].
    Matrix spd(Eigen::Index n)
    {
        Matrix a(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                a(i, j) = normal();
            }
        }
        Eigen::HouseholderQR<Matrix> qr(a);
        const Matrix q = qr.householderQ();
        Vector d(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            d[i] = uniform(0.5, 5.0);
        }
        return q * d.asDiagonal() * q.transpose();
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

inline double rel_err(double got, double want)
{
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

/// f(x) = sum_i c_i x_i^2 / 2 with optional call recording.
struct ScaledQuadratic {
    Vector c;
    [[nodiscard]] Eigen::Index dim() const { return c.size(); }
    [[nodiscard]] double value(const Vector& x) const { return 0.5 * x.cwiseProduct(c).dot(x); }
    void gradient(const Vector& x, Vector& g) const { g = c.cwiseProduct(x); }
};

/// 1-D objective from a callable.
template <class Fn, class Dfn>
struct Scalar1D {
    Fn f;
    Dfn df;
    [[nodiscard]] Eigen::Index dim() const { return 1; }
    [[nodiscard]] double value(const Vector& x) const { return f(x[0]); }
    void gradient(const Vector& x, Vector& g) const
    {
        g.resize(1);
        g[0] = df(x[0]);
    }
};

template <class Fn, class Dfn>
Scalar1D<Fn, Dfn> scalar(Fn f, Dfn df)
{
    return {f, df};
}

inline Vector vec(std::initializer_list<double> xs)
{
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) {
        v[i++] = x;
    }
    return v;
}

} // namespace testing_support
