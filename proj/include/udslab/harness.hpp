#pragma once

#include "udslab/bounds.hpp"
#include "udslab/data.hpp"
#include "udslab/families.hpp"
#include "udslab/relabel.hpp"
#include "udslab/solver.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace udslab {

struct MdpSpec {
    std::string family = "gridworld";
    int size = 12;
    std::uint64_t seed = 0;
    double discount = 0.95;
    double slip = -1.0; // negative: family default
};

struct DataSpec {
    QualitySpec quality;
    int size = 100;
    double reward_noise = 0.0;
    bool rollout = false;
};

struct ExperimentConfig {
    std::string name = "experiment";
    MdpSpec mdp;
    DataSpec labeled;
    DataSpec unlabeled;
    std::vector<StrategySpec> strategies;
    ConservativeConfig solver;
    double delta = 0.1;
    std::vector<std::uint64_t> seeds = {0};
    std::string output_dir = "out";

    void validate() const;
};

/// One sweep arm's outcome. wall_time_ms is kept out of records.csv so that
/// reruns of the same config are byte-identical.
struct RunRecord {
    std::string config_hash;
    std::string case_label;
    std::uint64_t seed = 0;
    std::string strategy;
    std::string mdp_family;
    int mdp_size = 0;
    std::string labeled_quality;
    int labeled_size = 0;
    std::string unlabeled_quality;
    int unlabeled_size = 0;
    double delta = 0.0;
    double j_true_learned = 0.0;
    double j_true_behavior = 0.0;
    double j_empirical_learned = 0.0;
    double term_a_reward_bias = 0.0;
    double term_b_sampling_error = 0.0;
    double term_c_policy_improvement = 0.0;
    double zeta_err = 0.0;
    int guarantee_holds = 0;
    double c_r = 0.0;
    double c_p = 0.0;
    double divergence_value = 0.0;
    int iterations = 0;
    int converged = 0;
    double coverage_min = 0.0;  // min of the effective counts table
    double coverage_mean = 0.0; // mean of the effective counts table
    std::string status = "ok";
    double wall_time_ms = 0.0;
};

/// Plain string table used for records.csv round-trips and aggregation.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const; // -1 when absent
    static CsvTable from_string(const std::string& text);
    std::string to_string() const;
};

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

/// FNV-1a hash of the canonical (key-sorted) config JSON, as 16 hex chars.
std::string config_hash(const ExperimentConfig& config);

TabularMdp build_mdp(const MdpSpec& spec);

/// Runs every (seed x strategy) arm. Arms are pure given (config, seed); a
/// failure inside one arm is recorded in its status and never aborts the
/// sweep. `parallel` > 1 runs arms in a worker pool; the record order is
/// independent of scheduling.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config, int parallel = 1);

std::string records_to_csv(const std::vector<RunRecord>& records);
CsvTable records_table(const std::vector<RunRecord>& records);

struct TableOutput {
    std::string markdown;
    std::string csv;
};

/// Rows = values of `group_by`, columns = strategies, cells = mean with a
/// 95% confidence interval over seeds (n/a for single records).
TableOutput emit_table(const CsvTable& records, const std::string& group_by,
                       const std::string& metric);

/// Long-format plot data: x, series, mean, ci_lo, ci_hi.
std::string emit_plotdata(const CsvTable& records, const std::string& x_axis,
                          const std::string& series, const std::string& metric);

/// Runs the sweep and writes records.csv, manifest.json, and a default
/// summary table under output_dir (overridable). Returns the records.
std::vector<RunRecord> run_and_persist(const ExperimentConfig& config, int parallel,
                                       const std::string& output_dir_override = {});

} // namespace udslab
