#include "support.hpp"

#include <batchbfgs/fd.hpp>
#include <batchbfgs/problems.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace batchbfgs;
using namespace testing_support;

namespace {

/// Separable polynomial of degree d plus a cubic cross term (when d >= 3).
struct RandomPoly {
    std::vector<Vector> coeffs; ///< per coordinate, ascending degree
    double cross = 0.0;

    RandomPoly(Rng& rng, Eigen::Index n, int degree)
    {
        for (Eigen::Index j = 0; j < n; ++j) {
            coeffs.push_back(rng.vector(degree + 1));
        }
        cross = degree >= 3 ? rng.uniform(-1.0, 1.0) : 0.0;
    }

    [[nodiscard]] Eigen::Index dim() const { return static_cast<Eigen::Index>(coeffs.size()); }

    [[nodiscard]] double value(const Vector& x) const
    {
        double f = 0.0;
        for (Eigen::Index j = 0; j < dim(); ++j) {
            const Vector& c = coeffs[static_cast<std::size_t>(j)];
            double acc = 0.0;
            for (Eigen::Index k = c.size(); k-- > 0;) {
                acc = acc * x[j] + c[k];
            }
            f += acc;
        }
        return f + cross * x[0] * x[1] * x[2];
    }

    void gradient(const Vector& x, Vector& g) const
    {
        g.resize(dim());
        for (Eigen::Index j = 0; j < dim(); ++j) {
            const Vector& c = coeffs[static_cast<std::size_t>(j)];
            double acc = 0.0;
            for (Eigen::Index k = c.size(); k-- > 1;) {
                acc = acc * x[j] + static_cast<double>(k) * c[k];
            }
            g[j] = acc;
        }
        g[0] += cross * x[1] * x[2];
        g[1] += cross * x[0] * x[2];
        g[2] += cross * x[0] * x[1];
    }
};

struct ExpSum {
    Eigen::Index n = 4;
    [[nodiscard]] Eigen::Index dim() const { return n; }
    [[nodiscard]] double value(const Vector& x) const { return std::exp(x.sum()); }
    void gradient(const Vector& x, Vector& g) const { g = Vector::Constant(n, std::exp(x.sum())); }
};

Vector random_unit(Rng& rng, Eigen::Index n)
{
    Vector p = rng.gaussian(n);
    return p / p.norm();
}

template <class F>
double dd(const F& f, const Vector& x, const Vector& p, const FdScheme& scheme, int width = 8)
{
    Evaluator ev(f, BatchWidth{width}, Coupling::split);
    return directional_derivative(ev, x, p, scheme).value();
}

} // namespace

TEST(FdCoefficients, MatchDisplayedRationals)
{
    EXPECT_EQ(central_coefficients(4), (std::vector<double>{1.0 / 12.0, -2.0 / 3.0, 2.0 / 3.0,
                                                            -1.0 / 12.0}));
    EXPECT_EQ(central_coefficients(8),
              (std::vector<double>{1.0 / 280.0, -4.0 / 105.0, 1.0 / 5.0, -4.0 / 5.0, 4.0 / 5.0,
                                   -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0}));
    EXPECT_EQ(central_coefficients(6), (std::vector<double>{-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0,
                                                            3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0}));
    EXPECT_EQ(central_coefficients(2), (std::vector<double>{-0.5, 0.5}));
    EXPECT_THROW(central_coefficients(3), ConfigError);
}

TEST(FdCoefficients, AntisymmetricAndSumToZero)
{
    for (int pts : {2, 4, 6, 8}) {
        const auto c = central_coefficients(pts);
        const auto o = central_offsets(pts);
        ASSERT_EQ(c.size(), o.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
            EXPECT_EQ(c[i], -c[c.size() - 1 - i]);
            EXPECT_EQ(o[i], -o[o.size() - 1 - i]);
        }
        EXPECT_NEAR(std::accumulate(c.begin(), c.end(), 0.0), 0.0, 1e-15);
        // First moment: sum c_i o_i = 1.
        double m1 = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            m1 += c[i] * o[i];
        }
        EXPECT_NEAR(m1, 1.0, 1e-15) << pts;
    }
}

TEST(FdPoints, FourPointSetOnALine)
{
    const auto pts = fd_points(vec({0.0}), vec({1.0}), 0.1, 4);
    ASSERT_EQ(pts.size(), 4u);
    EXPECT_DOUBLE_EQ(pts[0][0], -0.2);
    EXPECT_DOUBLE_EQ(pts[1][0], -0.1);
    EXPECT_DOUBLE_EQ(pts[2][0], 0.1);
    EXPECT_DOUBLE_EQ(pts[3][0], 0.2);
}

TEST(FdPoints, TwoPointIsClassicPairAndZeroDirectionCollapses)
{
    const Vector x = vec({1.0, 2.0});
    const Vector p = vec({0.5, -1.0});
    const auto pts = fd_points(x, p, 0.01, 2);
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_EQ(pts[0], Vector(x - 0.01 * p));
    EXPECT_EQ(pts[1], Vector(x + 0.01 * p));

    for (const auto& q : fd_points(x, Vector::Zero(2), 0.3, 8)) {
        EXPECT_EQ(q, x);
    }
    EXPECT_THROW(fd_points(x, p, 0.1, 3), ContractError);
    EXPECT_THROW(fd_points(x, p, 0.0, 4), ContractError);
}

TEST(DirectionalDerivative, LinearIsExactWithTwoPoints)
{
    const auto f = scalar([](double x) { return 3.0 * x; }, [](double) { return 3.0; });
    EXPECT_EQ(dd(f, vec({1.0}), vec({1.0}), FdScheme::central(2, 0.5), 4), 3.0);
    Rng rng(11);
    for (int k = 0; k < 20; ++k) {
        const double h = rng.uniform(1e-4, 1.0);
        EXPECT_NEAR(dd(f, vec({rng.uniform(-5, 5)}), vec({1.0}), FdScheme::central(2, h), 4), 3.0,
                    1e-12);
    }
}

TEST(DirectionalDerivative, SquareWithFourPoints)
{
    const auto f = scalar([](double x) { return x * x; }, [](double x) { return 2.0 * x; });
    EXPECT_NEAR(dd(f, vec({1.0}), vec({1.0}), FdScheme::central(4, 0.1), 4), 2.0, 1e-12);
}

TEST(DirectionalDerivative, SineWithEightPoints)
{
    const auto f = scalar([](double x) { return std::sin(x); }, [](double x) { return std::cos(x); });
    EXPECT_NEAR(dd(f, vec({0.0}), vec({1.0}), FdScheme::central(8, 1e-3), 8), 1.0, 1e-12);
}

TEST(DirectionalDerivative, OneSidedForward)
{
    const auto f = scalar([](double x) { return x * x; }, [](double x) { return 2.0 * x; });
    const double h = 1.0 / 1024.0;
    // (f(1 + h) - f(1)) / h = 2 + h
    EXPECT_EQ(dd(f, vec({1.0}), vec({1.0}), FdScheme::one_sided(h), 4), 2.0 + h);
}

TEST(DirectionalDerivative, DefaultStepScalesWithX)
{
    const auto s = FdScheme::central(4);
    EXPECT_DOUBLE_EQ(s.step_at(vec({3.0, 4.0})), 6e-7);
    EXPECT_EQ(FdScheme::central(4, 0.25).step_at(vec({3.0, 4.0})), 0.25);
    EXPECT_THROW(FdScheme::central(4, -1.0), ConfigError);
}

TEST(DirectionalDerivative, FourPointExactOnDegreeFourPolynomials)
{
    Rng rng(401);
    for (int trial = 0; trial < 200; ++trial) {
        const int degree = rng.integer(0, 4);
        const RandomPoly f(rng, 3, degree);
        const Vector x = rng.vector(3, -0.5, 0.5);
        const Vector p = random_unit(rng, 3);
        Vector g;
        f.gradient(x, g);
        EXPECT_NEAR(dd(f, x, p, FdScheme::central(4, 0.1), 4), g.dot(p), 1e-12)
            << "degree " << degree;
    }
}

TEST(DirectionalDerivative, EightPointExactOnDegreeEightPolynomials)
{
    Rng rng(801);
    for (int trial = 0; trial < 200; ++trial) {
        const int degree = rng.integer(0, 8);
        const RandomPoly f(rng, 3, degree);
        const Vector x = rng.vector(3, -0.5, 0.5);
        const Vector p = random_unit(rng, 3);
        Vector g;
        f.gradient(x, g);
        EXPECT_NEAR(dd(f, x, p, FdScheme::central(8, 0.1), 8), g.dot(p), 1e-12)
            << "degree " << degree;
    }
}

TEST(DirectionalDerivative, FourPointIsFourthOrder)
{
    Rng rng(5);
    const ExpSum f;
    for (int trial = 0; trial < 20; ++trial) {
        Vector p = random_unit(rng, f.n);
        if (std::abs(p.sum()) < 0.5) {
            p = Vector::Constant(f.n, 0.5);
        }
        const Vector x = rng.vector(f.n, -0.25, 0.25);
        const double exact = std::exp(x.sum()) * p.sum();
        double prev = -1.0;
        for (double h : {1e-2, 5e-3, 2.5e-3}) {
            const double err = std::abs(dd(f, x, p, FdScheme::central(4, h), 4) - exact);
            if (prev > 0.0) {
                EXPECT_GE(prev / err, 12.0) << "h=" << h;
            }
            prev = err;
        }
    }
}

TEST(DirectionalDerivative, EightPointIsEighthOrder)
{
    const auto f = scalar([](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
    double prev = -1.0;
    for (double h : {0.4, 0.2, 0.1}) {
        const double err = std::abs(dd(f, vec({0.0}), vec({1.0}), FdScheme::central(8, h)) - 1.0);
        if (prev > 0.0) {
            EXPECT_GE(prev / err, 150.0) << "h=" << h;
        }
        prev = err;
    }
}

TEST(DirectionalDerivative, OneBatchWhenStencilFits)
{
    const RosenbrockProblem f{2};
    const Vector x = vec({0.3, 0.2});
    const Vector p = vec({1.0, -1.0});
    struct Case {
        int width;
        int points;
        std::int64_t batches;
    };
    for (const Case c : {Case{4, 4, 1}, Case{8, 8, 1}, Case{8, 2, 1}, Case{8, 4, 1}, Case{4, 8, 2},
                         Case{1, 2, 2}}) {
        Evaluator ev(f, BatchWidth{c.width}, Coupling::split);
        directional_derivative(ev, x, p, FdScheme::central(c.points, 1e-4));
        EXPECT_EQ(ev.counters().forward_calls, c.batches) << c.width << "/" << c.points;
    }
}

TEST(DirectionalDerivative, NonFiniteStencilValueIsEmpty)
{
    const auto f = scalar([](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
    Evaluator ev(f, BatchWidth{4}, Coupling::split);
    EXPECT_FALSE(directional_derivative(ev, vec({0.1}), vec({1.0}), FdScheme::central(4, 0.1)));
    EXPECT_TRUE(directional_derivative(ev, vec({1.0}), vec({1.0}), FdScheme::central(4, 0.1)));
}

TEST(SetCoeffs, LengthIsTheOnlyRule)
{
    const auto s = FdScheme::central(4, 0.1);
    EXPECT_NO_THROW(set_coeffs(s, {1.0, 2.0, 3.0, 4.0}));
    EXPECT_THROW(set_coeffs(s, {1.0, 2.0, 3.0}), ConfigError);

    // Asymmetric user weights are taken as given: f(x+h) - f(x-h) on f = x gives 2h / h.
    const auto f = scalar([](double x) { return x; }, [](double) { return 1.0; });
    const auto custom = set_coeffs(FdScheme::central(4, 0.25), {0.0, -1.0, 1.0, 0.0});
    EXPECT_EQ(dd(f, vec({0.0}), vec({1.0}), custom, 4), 2.0);
}

TEST(SetCoeffs, ExplicitDefaultsMatchDefaults)
{
    Rng rng(9);
    const RosenbrockProblem f{2};
    for (int pts : {2, 4, 6, 8}) {
        const auto def = FdScheme::central(pts, 1e-3);
        const auto same = set_coeffs(def, central_coefficients(pts));
        const Vector x = rng.vector(2);
        const Vector p = rng.vector(2);
        EXPECT_EQ(dd(f, x, p, def), dd(f, x, p, same));
    }
}

namespace {

template <class F>
void expect_fd_consistent(const F& f, Rng& rng, const Vector& centre, double spread)
{
    for (int k = 0; k < 10; ++k) {
        const Vector x = centre + rng.vector(centre.size(), -spread, spread);
        const Vector p = rng.gaussian(centre.size());
        Vector g;
        f.gradient(x, g);
        const double exact = g.dot(p);
        const double approx = dd(f, x, p, FdScheme::central(4, 1e-5), 4);
        EXPECT_LE(std::abs(approx - exact), 1e-5 * (1.0 + std::abs(exact)));
    }
}

} // namespace

TEST(DirectionalDerivative, ConsistentWithGradientOnBenchmarks)
{
    Rng rng(77);
    const auto curve = make_curve_problem(1);
    expect_fd_consistent(curve, rng, curve.x_min(), 0.2);
    const auto expectation = make_expectation_problem(1, 6, 10, 1000);
    expect_fd_consistent(expectation, rng, expectation.x_min(), 0.05);
    const RosenbrockProblem rosen{4};
    expect_fd_consistent(rosen, rng, Vector::Zero(4), 1.5);
}
