#pragma once

#include "params.hpp"
#include "problems.hpp"
#include "solver.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

/// \file bench.hpp
///
/// Benchmark runner: named solver variants on the bundled problems, metric
/// tables in CSV or markdown, and baseline/variant ratio reports.

namespace batchbfgs {

/// Bad problem id, variant name or table text.
class UsageError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

enum class OutputFormat { csv, markdown };

// ============================== Rows ================================= {{{

/// One solver run. Exactly the columns of the emitted table.
struct BenchRow {
    std::string label;
    double time = 0.0; ///< wall clock, milliseconds
    std::int64_t iterations = 0;
    double value = 0.0;
    std::int64_t forward = 0;
    std::int64_t reverse = 0;
    std::int64_t ls_iterations = 0;

    friend bool operator==(const BenchRow&, const BenchRow&) = default;
};

inline constexpr std::array<std::string_view, 7> bench_columns{
    "label", "time", "iterations", "value", "forward", "reverse", "ls_iterations"};

struct BenchTable {
    std::string problem;
    std::uint64_t seed = 0;
    std::vector<BenchRow> rows;
    /// Parallel to rows.
    std::vector<SolverStatus> status;

    [[nodiscard]] bool all_succeeded() const
    {
        return std::none_of(status.begin(), status.end(), [](SolverStatus s) {
            return s == SolverStatus::line_search_failed || s == SolverStatus::numerical_error;
        });
    }

    /// First row with `label`; throws UsageError when absent.
    [[nodiscard]] const BenchRow& row(std::string_view label) const
    {
        for (const auto& r : rows) {
            if (r.label == label) {
                return r;
            }
        }
        throw UsageError{"no row labelled '" + std::string(label) + "'"};
    }
};

// }}}

// ============================= Problems ============================== {{{

inline constexpr std::array<std::string_view, 3> known_problems{"curve", "expectation",
                                                                "rosenbrock"};

inline std::string known_problem_list()
{
    std::string out;
    for (auto id : known_problems) {
        out += out.empty() ? "" : ", ";
        out += id;
    }
    return out;
}

inline void check_problem_id(std::string_view id)
{
    if (std::find(known_problems.begin(), known_problems.end(), id) == known_problems.end()) {
        throw UsageError{"unknown problem '" + std::string(id) +
                         "'; known problems: " + known_problem_list()};
    }
}

using AnyProblem = std::variant<CurveCalibrationProblem, ExpectationLossProblem, RosenbrockProblem>;

/// Fills zero/negative fields of `cfg` with the problem's defaults.
inline ProblemConfig resolve_config(ProblemConfig cfg)
{
    check_problem_id(cfg.id);
    if (cfg.id == "expectation") {
        cfg.n = cfg.n > 0 ? cfg.n : 6;
        cfg.m = cfg.m > 0 ? cfg.m : 10;
        cfg.paths = cfg.paths > 0 ? cfg.paths : 1000;
        cfg.target_noise = cfg.target_noise >= 0.0 ? cfg.target_noise : 0.01;
    } else if (cfg.id == "rosenbrock") {
        cfg.n = cfg.n > 0 ? cfg.n : 2;
    } else {
        cfg.n = static_cast<int>(CurveCalibrationProblem::n_params);
        cfg.m = static_cast<int>(CurveCalibrationProblem::n_outputs);
    }
    return cfg;
}

inline AnyProblem make_problem(const ProblemConfig& raw)
{
    const ProblemConfig cfg = resolve_config(raw);
    if (cfg.id == "curve") {
        return make_curve_problem(cfg.seed);
    }
    if (cfg.id == "expectation") {
        return make_expectation_problem(cfg.seed, cfg.n, cfg.m, cfg.paths, cfg.target_noise);
    }
    return RosenbrockProblem{cfg.n};
}

inline Vector start_point(const AnyProblem& problem)
{
    return std::visit(
        [](const auto& p) -> Vector {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, RosenbrockProblem>) {
                return p.standard_start();
            } else {
                return p.x0();
            }
        },
        problem);
}

/// Solver settings each problem is benchmarked with before overrides.
inline SolverParams problem_defaults(std::string_view id)
{
    check_problem_id(id);
    SolverParams p;
    if (id == "curve") {
        p.eps_rel = 3e-4;
        p.ls_condition = LsCondition::armijo;
        p.ls_style = LsStyle::backtracking;
    } else if (id == "expectation") {
        p.eps_rel = 1e-6;
        p.c2 = 0.1;
        p.ls_condition = LsCondition::wolfe;
        p.ls_style = LsStyle::bracketing;
    }
    return p;
}

// }}}

// ============================= Variants ============================== {{{

/// Line-search names accepted on the command line.
inline constexpr std::array<std::string_view, 4> known_linesearches{
    "backtracking-armijo", "backtracking-wolfe", "backtracking-strong-wolfe", "bracketing-wolfe"};

inline void apply_linesearch(SolverParams& p, std::string_view name)
{
    if (name == "backtracking-armijo") {
        p.ls_style = LsStyle::backtracking;
        p.ls_condition = LsCondition::armijo;
    } else if (name == "backtracking-wolfe") {
        p.ls_style = LsStyle::backtracking;
        p.ls_condition = LsCondition::wolfe;
    } else if (name == "backtracking-strong-wolfe") {
        p.ls_style = LsStyle::backtracking;
        p.ls_condition = LsCondition::strong_wolfe;
    } else if (name == "bracketing-wolfe") {
        p.ls_style = LsStyle::bracketing;
        p.ls_condition = LsCondition::wolfe;
    } else {
        throw UsageError{"unknown line search '" + std::string(name) + "'"};
    }
}

/// Explicit settings that take precedence over problem defaults. The batch
/// layout (width, polyfit, dg points, coupling) only applies to the custom
/// variant; named variants fix their own layout.
struct ParamOverrides {
    std::optional<int> width;
    std::optional<int> polyfit_order;
    std::optional<int> dg_points;
    std::optional<double> h;
    std::optional<double> eps_rel;
    std::optional<double> eps_abs;
    std::optional<int> max_iterations;
    std::optional<std::string> linesearch;
    std::optional<bool> legacy_interface;
    std::optional<int> memory;
    std::optional<HessianMode> mode;
};

inline constexpr std::array<std::string_view, 7> known_variants{
    "baseline-legacy", "W4", "W4-polyfit", "W8", "W8-polyfit", "coupled-interface",
    "split-interface"};

/// Variant set run by default for each problem.
inline std::vector<std::string> default_variants(std::string_view id)
{
    check_problem_id(id);
    if (id == "expectation") {
        return {"coupled-interface", "split-interface"};
    }
    return {"baseline-legacy", "W4", "W4-polyfit", "W8", "W8-polyfit"};
}

namespace detail {

inline void set_layout(SolverParams& p, int width, Coupling coupling, int polyfit)
{
    p.batch = BatchWidth{width};
    p.coupling = coupling;
    p.polyfit_order = width == 1 ? std::nullopt : std::optional<int>{polyfit};
    p.dg_points.reset();
}

} // namespace detail

/// Solver settings of a named variant (or "custom") for problem `id`.
inline SolverParams variant_params(std::string_view id, std::string_view variant,
                                   const ParamOverrides& ov = {})
{
    SolverParams p = problem_defaults(id);
    if (variant == "baseline-legacy") {
        detail::set_layout(p, 1, Coupling::legacy, 0);
    } else if (variant == "W4") {
        detail::set_layout(p, 4, Coupling::split, 0);
    } else if (variant == "W4-polyfit") {
        detail::set_layout(p, 4, Coupling::split, 3);
    } else if (variant == "W8") {
        detail::set_layout(p, 8, Coupling::split, 0);
    } else if (variant == "W8-polyfit") {
        detail::set_layout(p, 8, Coupling::split, 7);
    } else if (variant == "coupled-interface") {
        detail::set_layout(p, 4, Coupling::legacy, 0);
    } else if (variant == "split-interface") {
        detail::set_layout(p, 4, Coupling::split, 0);
        p.dg_points = 4;
        p.h = 1e-5;
    } else if (variant == "custom") {
        if (ov.width) {
            p.batch = BatchWidth{*ov.width};
        }
        if (ov.legacy_interface) {
            p.coupling = *ov.legacy_interface ? Coupling::legacy : Coupling::split;
        }
        p.polyfit_order = ov.polyfit_order;
        p.dg_points = ov.dg_points;
    } else {
        std::string names;
        for (auto v : known_variants) {
            names += std::string(v) + ", ";
        }
        throw UsageError{"unknown variant '" + std::string(variant) + "'; known variants: " +
                         names + "custom"};
    }

    if (ov.h) {
        p.h = *ov.h;
    }
    if (ov.eps_rel) {
        p.eps_rel = *ov.eps_rel;
    }
    if (ov.eps_abs) {
        p.eps_abs = *ov.eps_abs;
    }
    if (ov.max_iterations) {
        p.max_iterations = *ov.max_iterations;
    }
    if (ov.linesearch) {
        apply_linesearch(p, *ov.linesearch);
    }
    if (ov.memory) {
        p.memory = *ov.memory;
    }
    if (ov.mode) {
        p.mode = *ov.mode;
    }
    p.validate();
    return p;
}

// }}}

// ============================== Running ============================== {{{

struct BenchConfig {
    ProblemConfig problem;
    ParamOverrides overrides;
    /// Empty runs the problem's default set; "custom" uses the overrides.
    std::vector<std::string> variants;
    int repetitions = 1;
    OutputFormat format = OutputFormat::csv;

    void validate() const
    {
        check_problem_id(problem.id);
        if (repetitions < 1) {
            throw ConfigError{"repetitions must be >= 1"};
        }
        for (const auto& v : variants) {
            variant_params(problem.id, v, overrides);
        }
    }
};

inline BenchRow to_row(std::string label, const RunMetrics& m)
{
    return BenchRow{std::move(label),     m.wall_ms,
                    m.iterations,         m.final_value,
                    m.counters.forward_calls, m.counters.reverse_calls,
                    m.counters.ls_iterations};
}

/// One row per variant and repetition, variants in the requested order.
inline BenchTable run_bench(const BenchConfig& cfg)
{
    cfg.validate();
    const ProblemConfig pc = resolve_config(cfg.problem);
    const AnyProblem problem = make_problem(pc);
    const Vector x0 = start_point(problem);
    const auto variants = cfg.variants.empty() ? default_variants(pc.id) : cfg.variants;

    BenchTable table;
    table.problem = pc.id;
    table.seed = pc.seed;
    for (const auto& name : variants) {
        const SolverParams params = variant_params(pc.id, name, cfg.overrides);
        for (int rep = 0; rep < cfg.repetitions; ++rep) {
            const RunMetrics m = std::visit(
                [&](const auto& obj) { return minimize(obj, x0, params).metrics; }, problem);
            table.rows.push_back(to_row(name, m));
            table.status.push_back(m.status);
        }
    }
    return table;
}

// }}}

// ============================== Output =============================== {{{

namespace detail {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v)
{
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline std::string csv_field(std::string_view s)
{
    if (s.find_first_of(",\"\n") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') {
            out += '"';
        }
    }
    return out + "\"";
}

} // namespace detail

inline void write_csv(std::ostream& os, const std::vector<BenchRow>& rows)
{
    for (std::size_t i = 0; i < bench_columns.size(); ++i) {
        os << (i ? "," : "") << bench_columns[i];
    }
    os << '\n';
    for (const auto& r : rows) {
        os << detail::csv_field(r.label) << ',' << detail::format_double(r.time) << ','
           << r.iterations << ',' << detail::format_double(r.value) << ',' << r.forward << ','
           << r.reverse << ',' << r.ls_iterations << '\n';
    }
}

inline void write_markdown(std::ostream& os, const std::vector<BenchRow>& rows)
{
    os << "| Label | Time (ms) | Iterations | Value | Forward | Reverse | LS It. |\n"
       << "|---|---:|---:|---:|---:|---:|---:|\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.1f", r.time);
        os << "| " << r.label << " | " << buf << " | " << r.iterations << " | ";
        std::snprintf(buf, sizeof buf, "%.3g", r.value);
        os << buf << " | " << r.forward << " | " << r.reverse << " | " << r.ls_iterations
           << " |\n";
    }
}

inline void write_table(std::ostream& os, const std::vector<BenchRow>& rows, OutputFormat fmt)
{
    if (fmt == OutputFormat::csv) {
        write_csv(os, rows);
    } else {
        write_markdown(os, rows);
    }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

template <class T>
T parse_number(const std::string& s, int lineno)
{
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw UsageError{"csv line " + std::to_string(lineno) + ": bad number '" + s + "'"};
    }
    return v;
}

} // namespace detail

/// Inverse of write_csv.
inline std::vector<BenchRow> parse_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) {
        throw UsageError{"csv: missing header"};
    }
    const auto header = detail::split_csv_line(line);
    if (!std::equal(header.begin(), header.end(), bench_columns.begin(), bench_columns.end())) {
        throw UsageError{"csv: unexpected header '" + line + "'"};
    }
    std::vector<BenchRow> rows;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto f = detail::split_csv_line(line);
        if (f.size() != bench_columns.size()) {
            throw UsageError{"csv line " + std::to_string(lineno) + ": expected " +
                             std::to_string(bench_columns.size()) + " fields"};
        }
        rows.push_back(BenchRow{f[0], detail::parse_number<double>(f[1], lineno),
                                detail::parse_number<std::int64_t>(f[2], lineno),
                                detail::parse_number<double>(f[3], lineno),
                                detail::parse_number<std::int64_t>(f[4], lineno),
                                detail::parse_number<std::int64_t>(f[5], lineno),
                                detail::parse_number<std::int64_t>(f[6], lineno)});
    }
    return rows;
}

// }}}

// ============================ Comparison ============================= {{{

/// A row together with the problem instance it was measured on.
struct TaggedRow {
    std::string problem;
    std::uint64_t seed = 0;
    BenchRow row;
};

inline TaggedRow tagged(const BenchTable& table, std::string_view label)
{
    return TaggedRow{table.problem, table.seed, table.row(label)};
}

/// Minimum baseline/variant ratios; time is reported but never checked.
struct CompareThresholds {
    std::optional<double> iterations;
    std::optional<double> forward;
    std::optional<double> reverse;
    std::optional<double> ls_iterations;
};

struct RatioCheck {
    std::string metric;
    double ratio = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

struct CompareReport {
    double iterations = 1.0;
    double forward = 1.0;
    double reverse = 1.0;
    double ls_iterations = 1.0;
    double time = 1.0;
    std::vector<RatioCheck> checks;

    [[nodiscard]] bool passed() const
    {
        return std::all_of(checks.begin(), checks.end(), [](const RatioCheck& c) { return c.pass; });
    }
};

/// baseline / variant, 1 when both are zero.
inline double count_ratio(double baseline, double variant)
{
    if (variant == 0.0) {
        return baseline == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    }
    return baseline / variant;
}

/// Ratios baseline / variant, so values above 1 mean the variant used less.
inline CompareReport compare(const TaggedRow& baseline, const TaggedRow& variant,
                             const CompareThresholds& thr = {})
{
    if (baseline.problem != variant.problem || baseline.seed != variant.seed) {
        throw UsageError{"cannot compare rows from " + baseline.problem + "/seed " +
                         std::to_string(baseline.seed) + " and " + variant.problem + "/seed " +
                         std::to_string(variant.seed)};
    }
    const auto& b = baseline.row;
    const auto& v = variant.row;
    CompareReport rep;
    rep.iterations = count_ratio(static_cast<double>(b.iterations), static_cast<double>(v.iterations));
    rep.forward = count_ratio(static_cast<double>(b.forward), static_cast<double>(v.forward));
    rep.reverse = count_ratio(static_cast<double>(b.reverse), static_cast<double>(v.reverse));
    rep.ls_iterations =
        count_ratio(static_cast<double>(b.ls_iterations), static_cast<double>(v.ls_iterations));
    rep.time = count_ratio(b.time, v.time);

    auto check = [&](const char* name, double ratio, const std::optional<double>& t) {
        if (t) {
            rep.checks.push_back({name, ratio, *t, ratio >= *t});
        }
    };
    check("iterations", rep.iterations, thr.iterations);
    check("forward", rep.forward, thr.forward);
    check("reverse", rep.reverse, thr.reverse);
    check("ls_iterations", rep.ls_iterations, thr.ls_iterations);
    return rep;
}

inline void write_report(std::ostream& os, const CompareReport& rep)
{
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "iterations %.3f  forward %.3f  reverse %.3f  ls_iterations %.3f  time %.3f\n",
                  rep.iterations, rep.forward, rep.reverse, rep.ls_iterations, rep.time);
    os << buf;
    for (const auto& c : rep.checks) {
        std::snprintf(buf, sizeof buf, "%s %s: ratio %.3f, needs >= %.3f\n",
                      c.pass ? "PASS" : "FAIL", c.metric.c_str(), c.ratio, c.threshold);
        os << buf;
    }
}

// }}}

} // namespace batchbfgs
