#include <batchbfgs/bench.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace bb = batchbfgs;

namespace {

constexpr int exit_solver_failure = 1;
constexpr int exit_usage = 2;

std::vector<std::string> as_strings(auto names)
{
    return {names.begin(), names.end()};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Quasi-Newton benchmark runner: one table row per variant and repetition."};
    app.set_help_flag("--help", "Print this help message and exit");
    app.option_defaults()->always_capture_default();

    bb::ProblemConfig problem;
    bb::ParamOverrides ov;
    std::vector<std::string> variants;
    std::string config_file;
    std::string format = "csv";
    std::string compare_to;
    int repetitions = 1;

    app.add_option("--problem", problem.id, "Problem id")
        ->check(CLI::IsMember(as_strings(bb::known_problems)));
    app.add_option("--seed", problem.seed, "Problem seed");
    app.add_option("--config", config_file, "Problem config file (key = value lines)")
        ->check(CLI::ExistingFile);
    app.add_option("--paths", problem.paths, "Monte Carlo paths (expectation problem)")
        ->check(CLI::PositiveNumber);

    app.add_option("--variant", variants,
                   "Named variant(s); 'custom' uses the layout flags. Default: the problem's set")
        ->delimiter(',')
        ->check(CLI::IsMember([] {
            auto v = as_strings(bb::known_variants);
            v.emplace_back("custom");
            return v;
        }()));

    app.add_option("--width", ov.width, "Batch width")->check(CLI::IsMember({1, 4, 8}));
    app.add_option("--polyfit-order", ov.polyfit_order, "Polynomial fit order, 0 disables")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--dg-points", ov.dg_points, "Finite-difference stencil size, 0 disables")
        ->check(CLI::IsMember({0, 2, 4, 6, 8}));
    app.add_option("--legacy-interface", ov.legacy_interface,
                   "Compute gradients with every batch evaluation");

    app.add_option("--h", ov.h, "Finite-difference step")->check(CLI::PositiveNumber);
    app.add_option("--eps-rel", ov.eps_rel, "Relative gradient tolerance")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--eps-abs", ov.eps_abs, "Absolute gradient tolerance")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--max-iter", ov.max_iterations, "Iteration limit, 0 for none")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--linesearch", ov.linesearch, "Line-search condition and style")
        ->check(CLI::IsMember(as_strings(bb::known_linesearches)));
    app.add_option("--memory", ov.memory, "L-BFGS history size")->check(CLI::PositiveNumber);
    app.add_flag_callback("--dense", [&] { ov.mode = bb::HessianMode::dense_bfgs; },
                          "Dense BFGS instead of L-BFGS");

    app.add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "markdown"}));
    app.add_option("--repetitions", repetitions, "Runs per variant")->check(CLI::PositiveNumber);
    app.add_option("--compare", compare_to,
                   "Print ratios of every other row against this label to stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        if (!config_file.empty()) {
            std::ifstream in(config_file);
            bb::ProblemConfig from_file = bb::read_config(in);
            // Command-line values win over the file.
            if (app.count("--problem") != 0) {
                from_file.id = problem.id;
            }
            if (app.count("--seed") != 0) {
                from_file.seed = problem.seed;
            }
            if (app.count("--paths") != 0) {
                from_file.paths = problem.paths;
            }
            problem = from_file;
        }

        const bool layout_given = ov.width || ov.polyfit_order || ov.dg_points || ov.legacy_interface;
        if (variants.empty() && layout_given) {
            variants = {"custom"};
        }

        bb::BenchConfig cfg{problem, ov, variants, repetitions,
                            format == "csv" ? bb::OutputFormat::csv : bb::OutputFormat::markdown};
        const bb::BenchTable table = bb::run_bench(cfg);
        bb::write_table(std::cout, table.rows, cfg.format);

        if (!compare_to.empty()) {
            const auto base = bb::tagged(table, compare_to);
            for (const auto& r : table.rows) {
                if (r.label == compare_to) {
                    continue;
                }
                std::cerr << compare_to << " / " << r.label << ": ";
                bb::write_report(std::cerr, bb::compare(base, {table.problem, table.seed, r}));
            }
        }

        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            if (table.status[i] != bb::SolverStatus::converged) {
                std::cerr << table.rows[i].label << ": " << bb::to_string(table.status[i]) << '\n';
            }
        }
        return table.all_succeeded() ? 0 : exit_solver_failure;
    } catch (const bb::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const bb::ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
}
