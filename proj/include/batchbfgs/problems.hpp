#pragma once

#include "core.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

/// \file problems.hpp
///
/// Benchmark objectives with analytic gradients.

namespace batchbfgs {

/// f(x) = |x - a|^2 / 2
class QuadraticProblem {
public:
    explicit QuadraticProblem(Vector center) : a_{std::move(center)} {}

    [[nodiscard]] Eigen::Index dim() const noexcept { return a_.size(); }
    [[nodiscard]] double value(const Vector& x) const { return 0.5 * (x - a_).squaredNorm(); }
    void gradient(const Vector& x, Vector& g) const { g = x - a_; }
    [[nodiscard]] const Vector& center() const noexcept { return a_; }

private:
    Vector a_;
};

/// Extended Rosenbrock function on an even number of variables:
/// sum over pairs of 100 (x_{2i+1} - x_{2i}^2)^2 + (1 - x_{2i})^2.
class RosenbrockProblem {
public:
    explicit RosenbrockProblem(Eigen::Index n = 2) : n_{n}
    {
        if (n < 2 || n % 2 != 0) {
            throw ContractError{"Rosenbrock dimension must be even and >= 2"};
        }
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return n_; }

    [[nodiscard]] double value(const Vector& x) const
    {
        double f = 0.0;
        for (Eigen::Index i = 0; i < n_; i += 2) {
            const double t1 = 1.0 - x[i];
            const double t2 = x[i + 1] - x[i] * x[i];
            f += t1 * t1 + 100.0 * t2 * t2;
        }
        return f;
    }

    void gradient(const Vector& x, Vector& g) const
    {
        g.resize(n_);
        for (Eigen::Index i = 0; i < n_; i += 2) {
            const double t1 = 1.0 - x[i];
            const double t2 = x[i + 1] - x[i] * x[i];
            g[i + 1] = 200.0 * t2;
            g[i] = -2.0 * (x[i] * g[i + 1] + t1);
        }
    }

    /// (-1.2, 1, -1.2, 1, ...)
    [[nodiscard]] Vector standard_start() const
    {
        Vector x(n_);
        for (Eigen::Index i = 0; i < n_; i += 2) {
            x[i] = -1.2;
            x[i + 1] = 1.0;
        }
        return x;
    }

private:
    Eigen::Index n_;
};

/// Quadratic loss of a smooth 33 -> 14 map against the outputs at a hidden
/// parameter vector:
///   g(x)_i = sum_j A_ij tanh(x_j) + sum_j Q_ij x_j^2
///   f(x)   = sum_i (g(x)_i - g(x_min)_i)^2
/// Outputs are quoted in basis points and the sensitivity to parameter j
/// decays over two decades with j, like pillars of a bootstrapped curve.
class CurveCalibrationProblem {
public:
    static constexpr Eigen::Index n_params = 33;
    static constexpr Eigen::Index n_outputs = 14;
    static constexpr double output_scale = 1e2;
    static constexpr double sensitivity_decades = 2.0;

    explicit CurveCalibrationProblem(std::uint64_t seed) : seed_{seed}
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        Vector pillar(n_params);
        for (Eigen::Index j = 0; j < n_params; ++j) {
            pillar[j] = std::pow(10.0, -sensitivity_decades * static_cast<double>(j) /
                                           static_cast<double>(n_params - 1));
        }
        A_.resize(n_outputs, n_params);
        Q_.resize(n_outputs, n_params);
        const double scale = output_scale / std::sqrt(static_cast<double>(n_params));
        for (Eigen::Index i = 0; i < n_outputs; ++i) {
            for (Eigen::Index j = 0; j < n_params; ++j) {
                A_(i, j) = scale * pillar[j] * normal(rng);
            }
        }
        for (Eigen::Index i = 0; i < n_outputs; ++i) {
            for (Eigen::Index j = 0; j < n_params; ++j) {
                Q_(i, j) = 0.5 * scale * pillar[j] * normal(rng);
            }
        }
        x_min_.resize(n_params);
        for (Eigen::Index j = 0; j < n_params; ++j) {
            x_min_[j] = 0.5 + unit(rng);
        }
        target_ = outputs(x_min_);

        // Start within +-10% of each target parameter.
        x0_.resize(n_params);
        for (Eigen::Index j = 0; j < n_params; ++j) {
            x0_[j] = x_min_[j] * (0.9 + 0.2 * unit(rng));
        }
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return n_params; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] const Vector& x_min() const noexcept { return x_min_; }
    [[nodiscard]] const Vector& x0() const noexcept { return x0_; }
    [[nodiscard]] const Vector& target() const noexcept { return target_; }

    [[nodiscard]] Vector outputs(const Vector& x) const
    {
        return A_ * x.array().tanh().matrix() + Q_ * x.array().square().matrix();
    }

    [[nodiscard]] double value(const Vector& x) const
    {
        return (outputs(x) - target_).squaredNorm();
    }

    void gradient(const Vector& x, Vector& g) const
    {
        const Vector r = outputs(x) - target_;
        const Eigen::ArrayXd th = x.array().tanh();
        g = 2.0 * ((A_.transpose() * r).array() * (1.0 - th.square()) +
                   2.0 * (Q_.transpose() * r).array() * x.array())
                      .matrix();
    }

private:
    std::uint64_t seed_;
    Matrix A_;
    Matrix Q_;
    Vector x_min_;
    Vector target_;
    Vector x0_;
};

/// Fixed-sample Monte Carlo calibration loss
///   G(x) = 1/2 sum_i (mean_w y_i(x, w) - C_i)^2
/// with smoothed call payoffs y_i = softplus_beta(sum_j x_j w_ij z_j - K_i)
/// on a shared Gaussian factor sample z. Targets are the sample means at
/// x_min, optionally shifted by `target_noise` (relative) to make the
/// minimum value positive.
class ExpectationLossProblem {
public:
    static constexpr double beta = 50.0;

    ExpectationLossProblem(std::uint64_t seed, Eigen::Index n, Eigen::Index m, Eigen::Index paths,
                           double target_noise = 0.0)
        : seed_{seed}, n_{n}, m_{m}, paths_{paths}, target_noise_{target_noise}
    {
        if (n < 1 || m < 1) {
            throw ContractError{"expectation problem needs n >= 1 and m >= 1"};
        }
        if (paths < 100) {
            throw ContractError{"expectation problem needs at least 100 paths"};
        }
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        x_min_.resize(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            x_min_[j] = 0.1 + 0.2 * unit(rng);
        }
        loadings_.resize(m, n);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                loadings_(i, j) = 0.5 + unit(rng);
            }
        }
        strikes_.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            strikes_[i] = -0.3 + 0.6 * unit(rng);
        }
        factors_.resize(paths, n);
        for (Eigen::Index w = 0; w < paths; ++w) {
            for (Eigen::Index j = 0; j < n; ++j) {
                factors_(w, j) = normal(rng);
            }
        }
        targets_ = expectations(x_min_);
        for (Eigen::Index i = 0; i < m; ++i) {
            targets_[i] *= 1.0 + target_noise * normal(rng);
        }
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return n_; }
    [[nodiscard]] Eigen::Index terms() const noexcept { return m_; }
    [[nodiscard]] Eigen::Index paths() const noexcept { return paths_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] double target_noise() const noexcept { return target_noise_; }
    [[nodiscard]] const Vector& x_min() const noexcept { return x_min_; }
    [[nodiscard]] const Vector& targets() const noexcept { return targets_; }
    [[nodiscard]] Vector x0() const { return 0.9 * x_min_; }

    /// Sample means of the m payoffs.
    [[nodiscard]] Vector expectations(const Vector& x) const
    {
        Vector e = Vector::Zero(m_);
        for (Eigen::Index i = 0; i < m_; ++i) {
            const Vector u = factors_ * loadings_.row(i).transpose().cwiseProduct(x);
            double acc = 0.0;
            for (Eigen::Index w = 0; w < paths_; ++w) {
                acc += softplus(u[w] - strikes_[i]);
            }
            e[i] = acc / static_cast<double>(paths_);
        }
        return e;
    }

    [[nodiscard]] double value(const Vector& x) const
    {
        return 0.5 * (expectations(x) - targets_).squaredNorm();
    }

    /// Pathwise derivative of the sample means.
    void gradient(const Vector& x, Vector& g) const
    {
        const Vector r = expectations(x) - targets_;
        g = Vector::Zero(n_);
        for (Eigen::Index i = 0; i < m_; ++i) {
            const Vector w_i = loadings_.row(i).transpose();
            const Vector u = factors_ * w_i.cwiseProduct(x);
            Vector dsum = Vector::Zero(n_);
            for (Eigen::Index w = 0; w < paths_; ++w) {
                dsum += logistic(u[w] - strikes_[i]) * factors_.row(w).transpose();
            }
            g += r[i] * w_i.cwiseProduct(dsum) / static_cast<double>(paths_);
        }
    }

private:
    static double softplus(double u)
    {
        return std::max(u, 0.0) + std::log1p(std::exp(-beta * std::abs(u))) / beta;
    }
    static double logistic(double u)
    {
        if (u >= 0.0) {
            return 1.0 / (1.0 + std::exp(-beta * u));
        }
        const double e = std::exp(beta * u);
        return e / (1.0 + e);
    }

    std::uint64_t seed_;
    Eigen::Index n_;
    Eigen::Index m_;
    Eigen::Index paths_;
    double target_noise_;
    Vector x_min_;
    Matrix loadings_;
    Vector strikes_;
    Matrix factors_;
    Vector targets_;
};

inline CurveCalibrationProblem make_curve_problem(std::uint64_t seed)
{
    return CurveCalibrationProblem{seed};
}

inline ExpectationLossProblem make_expectation_problem(std::uint64_t seed, Eigen::Index n,
                                                       Eigen::Index m, Eigen::Index paths,
                                                       double target_noise = 0.0)
{
    return ExpectationLossProblem{seed, n, m, paths, target_noise};
}

// =========================== Problem configs ============================ {{{

/// Parameters that reproduce a problem instance. Serialised as
/// `key = value` lines; `#` starts a comment.
struct ProblemConfig {
    std::string id = "curve";
    std::uint64_t seed = 1;
    int n = 0; ///< 0 picks the problem's default dimension
    int m = 0;
    int paths = 0;
    double target_noise = -1.0; ///< negative picks the default

    friend bool operator==(const ProblemConfig&, const ProblemConfig&) = default;
};

inline void write_config(std::ostream& os, const ProblemConfig& cfg)
{
    os << "problem = " << cfg.id << '\n'
       << "seed = " << cfg.seed << '\n'
       << "n = " << cfg.n << '\n'
       << "m = " << cfg.m << '\n'
       << "paths = " << cfg.paths << '\n';
    std::ostringstream noise;
    noise.precision(17);
    noise << cfg.target_noise;
    os << "target_noise = " << noise.str() << '\n';
}

inline ProblemConfig read_config(std::istream& is)
{
    ProblemConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const auto eq = line.find('=');
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        if (trim(line).empty()) {
            continue;
        }
        if (eq == std::string::npos) {
            throw ConfigError{"config line " + std::to_string(lineno) + ": expected key = value"};
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "problem") {
                cfg.id = val;
            } else if (key == "seed") {
                cfg.seed = std::stoull(val);
            } else if (key == "n") {
                cfg.n = std::stoi(val);
            } else if (key == "m") {
                cfg.m = std::stoi(val);
            } else if (key == "paths") {
                cfg.paths = std::stoi(val);
            } else if (key == "target_noise") {
                cfg.target_noise = std::stod(val);
            } else {
                throw ConfigError{"config line " + std::to_string(lineno) + ": unknown key '" +
                                  key + "'"};
            }
        } catch (const std::logic_error& e) {
            if (dynamic_cast<const ConfigError*>(&e) != nullptr) {
                throw;
            }
            throw ConfigError{"config line " + std::to_string(lineno) + ": bad value for '" + key +
                              "'"};
        }
    }
    return cfg;
}

// }}}

} // namespace batchbfgs
