#include "udslab/harness.hpp"
#include "udslab/verify.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular offline RL laboratory for data-sharing strategies"};
    app.require_subcommand(1);

    // run
    std::string config_path;
    int seed_override = -1;
    std::string out_override;
    int parallel = 1;
    CLI::App* run = app.add_subcommand("run", "Run a seeded sweep from a config file");
    run->add_option("--config", config_path, "Path to the experiment config (JSON)")->required();
    run->add_option("--seeds", seed_override, "Override the seed list with 0..N-1");
    run->add_option("--out", out_override, "Override the output directory");
    run->add_option("--parallel", parallel, "Worker threads for sweep arms");

    // table
    std::string records_path, group_by = "case", metric = "j_true_learned";
    std::string table_out;
    CLI::App* table = app.add_subcommand("table", "Aggregate records into a strategy table");
    table->add_option("--records", records_path, "records.csv from a run")->required();
    table->add_option("--group-by", group_by, "Row key (default: case)");
    table->add_option("--metric", metric, "Metric column (default: j_true_learned)");
    table->add_option("--out", table_out, "Directory for tables/ output (default: alongside)");

    // plotdata
    std::string plot_records, x_axis, series, plot_metric = "j_true_learned", plot_out;
    CLI::App* plotdata = app.add_subcommand("plotdata", "Emit long-format plot data");
    plotdata->add_option("--records", plot_records, "records.csv from a run")->required();
    plotdata->add_option("--x", x_axis, "X-axis column")->required();
    plotdata->add_option("--series", series, "Series column")->required();
    plotdata->add_option("--metric", plot_metric, "Metric column (default: j_true_learned)");
    plotdata->add_option("--out", plot_out, "Directory for plots/ output (default: alongside)");

    // verify
    std::string suite = "all";
    CLI::App* verify = app.add_subcommand("verify", "Run an acceptance suite");
    verify->add_option("--suite", suite,
                       "theorem1 | theorem2 | theorem3 | cases | solver | determinism | all");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            udslab::ExperimentConfig config = udslab::config_from_json(read_file(config_path));
            if (seed_override >= 0) {
                config.seeds.clear();
                for (int s = 0; s < seed_override; ++s) {
                    config.seeds.push_back(static_cast<std::uint64_t>(s));
                }
            }
            if (!out_override.empty()) config.output_dir = out_override;
            const auto records = udslab::run_and_persist(config, parallel);
            int failures = 0;
            for (const auto& r : records) {
                if (r.status.rfind("error", 0) == 0) ++failures;
            }
            std::cout << "wrote " << records.size() << " records to " << config.output_dir
                      << "/records.csv";
            if (failures > 0) std::cout << " (" << failures << " arm(s) failed)";
            std::cout << '\n';
            return 0;
        }
        if (*table) {
            const auto records = udslab::CsvTable::from_string(read_file(records_path));
            const auto output = udslab::emit_table(records, group_by, metric);
            const std::filesystem::path dir =
                table_out.empty() ? std::filesystem::path(records_path).parent_path()
                                  : std::filesystem::path(table_out);
            std::filesystem::create_directories(dir / "tables");
            const std::string stem = metric + "_by_" + group_by;
            std::ofstream(dir / "tables" / (stem + ".md")) << output.markdown;
            std::ofstream(dir / "tables" / (stem + ".csv")) << output.csv;
            std::cout << output.markdown;
            return 0;
        }
        if (*plotdata) {
            const auto records = udslab::CsvTable::from_string(read_file(plot_records));
            const std::string output =
                udslab::emit_plotdata(records, x_axis, series, plot_metric);
            const std::filesystem::path dir =
                plot_out.empty() ? std::filesystem::path(plot_records).parent_path()
                                 : std::filesystem::path(plot_out);
            std::filesystem::create_directories(dir / "plots");
            std::ofstream(dir / "plots" / (plot_metric + "_" + x_axis + "_" + series + ".csv"))
                << output;
            std::cout << output;
            return 0;
        }
        if (*verify) {
            const auto results = udslab::verify::run_suite(suite);
            return udslab::verify::print_results(results) == 0 ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
