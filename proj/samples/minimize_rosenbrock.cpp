#include <batchbfgs/problems.hpp>
#include <batchbfgs/solver.hpp>

#include <cstdio>

using namespace batchbfgs;

int main()
{
    const RosenbrockProblem rosen{2};

    for (int width : {1, 4, 8}) {
        SolverParams params;
        params.batch = BatchWidth{width};
        params.eps_rel = 1e-10;

        const auto res = minimize(rosen, rosen.standard_start(), params);
        const auto& m = res.metrics;
        std::printf("W=%d  %-12s it=%3lld  f=%.3e  x=(%.8f, %.8f)  forward=%lld reverse=%lld\n",
                    width, std::string(to_string(m.status)).c_str(),
                    static_cast<long long>(m.iterations), m.final_value, res.x[0], res.x[1],
                    static_cast<long long>(m.counters.forward_calls),
                    static_cast<long long>(m.counters.reverse_calls));
    }
}
