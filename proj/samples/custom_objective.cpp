// A user objective with a native batched value path, minimised with the
// 8-point grid, a cubic fit and a 4-point FD slope.

#include <batchbfgs/solver.hpp>

#include <cstdio>
#include <span>

using namespace batchbfgs;

// f(x) = sum_i w_i (x_i - i)^4 + (x_i - i)^2
struct Quartic {
    Eigen::Index n = 6;

    [[nodiscard]] Eigen::Index dim() const { return n; }

    [[nodiscard]] double value(const Vector& x) const
    {
        double f = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = x[i] - static_cast<double>(i);
            f += (1.0 + static_cast<double>(i)) * d * d * d * d + d * d;
        }
        return f;
    }

    void gradient(const Vector& x, Vector& g) const
    {
        g.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = x[i] - static_cast<double>(i);
            g[i] = 4.0 * (1.0 + static_cast<double>(i)) * d * d * d + 2.0 * d;
        }
    }

    // Used by the evaluator instead of one value() call per lane.
    void values(std::span<const Vector> pts, std::span<double> out) const
    {
        for (std::size_t k = 0; k < pts.size(); ++k) {
            out[k] = value(pts[k]);
        }
    }
};

int main()
{
    const Quartic q;
    SolverParams params;
    params.batch = BatchWidth{8};
    params.set_polyfit_order(3);
    params.set_dg_order(4);
    params.set_delta(1e-5);
    params.eps_rel = 1e-8;

    const auto res = minimize(q, Vector::Zero(q.dim()), params);
    const auto& c = res.metrics.counters;
    std::printf("%s after %lld iterations, f = %.3e\n",
                std::string(to_string(res.metrics.status)).c_str(),
                static_cast<long long>(res.metrics.iterations), res.metrics.final_value);
    std::printf("forward %lld  reverse %lld  ls %lld\n", static_cast<long long>(c.forward_calls),
                static_cast<long long>(c.reverse_calls), static_cast<long long>(c.ls_iterations));
    return res.metrics.status == SolverStatus::converged ? 0 : 1;
}
