#include "support.hpp"

#include <batchbfgs/core.hpp>
#include <batchbfgs/problems.hpp>

#include <gtest/gtest.h>

#include <limits>

using namespace batchbfgs;
using namespace testing_support;

namespace {

auto square()
{
    return scalar([](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

/// Counts value() and gradient() invocations to see what the evaluator really computes.
struct Probe {
    mutable int values = 0;
    mutable int gradients = 0;
    [[nodiscard]] Eigen::Index dim() const { return 2; }
    [[nodiscard]] double value(const Vector& x) const
    {
        ++values;
        return x.squaredNorm();
    }
    void gradient(const Vector& x, Vector& g) const
    {
        ++gradients;
        g = 2.0 * x;
    }
};

struct Batched {
    mutable int native_calls = 0;
    [[nodiscard]] Eigen::Index dim() const { return 1; }
    [[nodiscard]] double value(const Vector& x) const { return x[0]; }
    void gradient(const Vector&, Vector& g) const { g = Vector::Ones(1); }
    void values(std::span<const Vector> pts, std::span<double> out) const
    {
        ++native_calls;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            out[i] = 10.0 * pts[i][0];
        }
    }
};

std::vector<Vector> points1d(std::initializer_list<double> xs)
{
    std::vector<Vector> out;
    for (double x : xs) {
        out.push_back(vec({x}));
    }
    return out;
}

} // namespace

TEST(BatchWidth, AcceptsOnlyOneFourEight)
{
    for (int w : {1, 4, 8}) {
        EXPECT_EQ(BatchWidth{w}.value(), w);
    }
    for (int w : {0, 2, 3, 5, 16, -1}) {
        EXPECT_THROW(BatchWidth{w}, ConfigError) << w;
    }
    EXPECT_TRUE(BatchWidth{1}.is_scalar());
    EXPECT_EQ(BatchWidth{8}.lanes(), 8u);
}

TEST(EvalBatch, SquaresInLaneOrder)
{
    const auto f = square();
    Evaluator ev(f, BatchWidth{4}, Coupling::split);
    const auto out = ev.eval_batch(points1d({1, 2, 3, 4}));
    EXPECT_EQ(out.values, (std::vector<double>{1, 4, 9, 16}));
    EXPECT_TRUE(out.all_finite());
    EXPECT_EQ(ev.counters().forward_calls, 1);
    EXPECT_EQ(ev.counters().reverse_calls, 0);
}

TEST(EvalBatch, IdenticalPointsGiveIdenticalValues)
{
    const RosenbrockProblem f{2};
    Evaluator ev(f, BatchWidth{8}, Coupling::split);
    const std::vector<Vector> pts(8, vec({0.3, -0.7}));
    const auto out = ev.eval_batch(pts);
    for (double v : out.values) {
        EXPECT_EQ(v, out.values[0]);
    }
}

TEST(EvalBatch, RosenbrockMinimumInOneLane)
{
    const RosenbrockProblem f{2};
    Evaluator ev(f, BatchWidth{4}, Coupling::split);
    const std::vector<Vector> pts{vec({0, 0}), vec({1, 1}), vec({2, 2}), vec({-1, 1})};
    EXPECT_EQ(ev.eval_batch(pts).values[1], 0.0);
}

TEST(EvalBatch, CountsBatchesNotLanes)
{
    const auto f = square();
    for (int w : {1, 4, 8}) {
        Evaluator ev(f, BatchWidth{w}, Coupling::split);
        const std::vector<Vector> pts(static_cast<std::size_t>(w), vec({1.0}));
        for (int k = 0; k < 3; ++k) {
            ev.eval_batch(pts);
        }
        EXPECT_EQ(ev.counters().forward_calls, 3) << "W=" << w;
    }
}

TEST(EvalBatch, WrongLaneCountOrDimensionIsContractError)
{
    const auto f = square();
    Evaluator ev(f, BatchWidth{4}, Coupling::split);
    EXPECT_THROW(ev.eval_batch(points1d({1, 2, 3})), ContractError);
    const std::vector<Vector> bad(4, vec({1.0, 2.0}));
    EXPECT_THROW(ev.eval_batch(bad), ContractError);
    EXPECT_EQ(ev.counters().forward_calls, 0);
}

TEST(EvalBatch, NonFiniteLanesBecomeInfinityWithFlag)
{
    const auto f = scalar([](double x) { return x < 0 ? std::nan("") : 1.0 / x; },
                          [](double x) { return -1.0 / (x * x); });
    Evaluator ev(f, BatchWidth{4}, Coupling::split);
    const auto out = ev.eval_batch(points1d({-1, 0, 1, 2}));
    EXPECT_EQ(out.values[0], std::numeric_limits<double>::infinity());
    EXPECT_EQ(out.values[1], std::numeric_limits<double>::infinity());
    EXPECT_EQ(out.finite, (std::vector<std::uint8_t>{0, 0, 1, 1}));
    EXPECT_EQ(out.values[3], 0.5);
    EXPECT_FALSE(out.all_finite());
    EXPECT_EQ(ev.counters().forward_calls, 1);
}

TEST(EvalBatch, UsesNativeKernelWhenPresent)
{
    const Batched f;
    Evaluator ev(f, BatchWidth{4}, Coupling::split);
    const auto out = ev.eval_batch(points1d({1, 2, 3, 4}));
    EXPECT_EQ(f.native_calls, 1);
    EXPECT_EQ(out.values[2], 30.0);
}

TEST(EvalPoints, PadsAndSplitsIntoBatches)
{
    const auto f = square();
    Evaluator ev(f, BatchWidth{4}, Coupling::split);
    const auto out = ev.eval_points(points1d({1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(out.values, (std::vector<double>{1, 4, 9, 16, 25, 36}));
    EXPECT_EQ(ev.counters().forward_calls, 2);
}

TEST(EvalGradient, QuadraticConstantAndStationary)
{
    const QuadraticProblem q{Vector::Zero(2)};
    Evaluator eq(q, BatchWidth{1}, Coupling::split);
    EXPECT_EQ(eq.eval_gradient(vec({3, 4})), vec({3, 4}));

    const auto c = scalar([](double) { return 7.0; }, [](double) { return 0.0; });
    Evaluator ec(c, BatchWidth{1}, Coupling::split);
    EXPECT_EQ(ec.eval_gradient(vec({2.5}))[0], 0.0);

    const RosenbrockProblem r{2};
    Evaluator er(r, BatchWidth{1}, Coupling::split);
    EXPECT_EQ(er.eval_gradient(vec({1, 1})), Vector::Zero(2));
}

TEST(EvalGradient, SplitSkipsForwardWhenBatchCoveredThePoint)
{
    const Probe f;
    Evaluator ev(f, BatchWidth{4}, Coupling::split);
    const std::vector<Vector> pts{vec({1, 0}), vec({2, 0}), vec({3, 0}), vec({4, 0})};
    ev.eval_batch(pts);
    ev.eval_gradient(vec({3, 0}));
    EXPECT_EQ(ev.counters().forward_calls, 1);
    EXPECT_EQ(ev.counters().reverse_calls, 1);

    // Not covered by any batch since the last gradient.
    ev.eval_gradient(vec({5, 0}));
    EXPECT_EQ(ev.counters().forward_calls, 2);
    EXPECT_EQ(ev.counters().reverse_calls, 2);
}

TEST(EvalGradient, RepeatedPointIsCached)
{
    const Probe f;
    Evaluator ev(f, BatchWidth{1}, Coupling::split);
    ev.eval_gradient(vec({1, 2}));
    ev.eval_gradient(vec({1, 2}));
    EXPECT_EQ(ev.counters().reverse_calls, 1);
    EXPECT_EQ(f.gradients, 1);
}

TEST(EvalGradient, LegacyBatchesCarryGradients)
{
    const Probe f;
    Evaluator ev(f, BatchWidth{4}, Coupling::legacy);
    const std::vector<Vector> pts{vec({1, 0}), vec({2, 0}), vec({3, 0}), vec({4, 0})};
    ev.eval_batch(pts);
    EXPECT_EQ(ev.counters().reverse_calls, 1);
    EXPECT_EQ(f.gradients, 4);

    EXPECT_EQ(ev.eval_gradient(vec({2, 0})), vec({4, 0}));
    EXPECT_EQ(ev.counters().reverse_calls, 1);
    EXPECT_EQ(f.gradients, 4);
    EXPECT_EQ(ev.lane_gradient(3), vec({8, 0}));
}

TEST(EvalGradient, NonFiniteGradientIsNumericalError)
{
    const auto f = scalar([](double x) { return x; }, [](double) { return std::nan(""); });
    Evaluator ev(f, BatchWidth{1}, Coupling::split);
    EXPECT_THROW(ev.eval_gradient(vec({1.0})), NumericalError);
}

TEST(Counters, MonotoneOverMixedCalls)
{
    const Probe f;
    Evaluator ev(f, BatchWidth{4}, Coupling::split);
    Rng rng(3);
    EvalCounters prev = ev.counters();
    for (int k = 0; k < 50; ++k) {
        if (rng.integer(0, 1) == 0) {
            std::vector<Vector> pts;
            for (int i = 0; i < 4; ++i) {
                pts.push_back(rng.vector(2));
            }
            ev.eval_batch(pts);
        } else {
            ev.eval_gradient(rng.vector(2));
        }
        const auto& now = ev.counters();
        EXPECT_GE(now.forward_calls, prev.forward_calls);
        EXPECT_GE(now.reverse_calls, prev.reverse_calls);
        prev = now;
    }
}
