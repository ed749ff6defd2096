#include "udslab/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace udslab {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

std::string fmt(double x) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", x);
    return buffer;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
}

QualitySpec quality_from_json(const nlohmann::json& j) {
    QualitySpec spec;
    spec.kind = quality_from_name(j.at("quality").get<std::string>());
    if (j.contains("epsilon")) spec.epsilon = j.at("epsilon").get<double>();
    if (j.contains("temperature")) spec.temperature = j.at("temperature").get<double>();
    return spec;
}

DataSpec data_from_json(const nlohmann::json& j) {
    DataSpec spec;
    spec.quality = quality_from_json(j);
    spec.size = j.at("size").get<int>();
    if (j.contains("reward_noise")) spec.reward_noise = j.at("reward_noise").get<double>();
    if (j.contains("rollout")) spec.rollout = j.at("rollout").get<bool>();
    return spec;
}

nlohmann::json data_to_json(const DataSpec& spec) {
    nlohmann::json j;
    j["quality"] = quality_name(spec.quality.kind);
    j["epsilon"] = spec.quality.epsilon;
    j["temperature"] = spec.quality.temperature;
    j["size"] = spec.size;
    j["reward_noise"] = spec.reward_noise;
    j["rollout"] = spec.rollout;
    return j;
}

StrategySpec strategy_from_json(const nlohmann::json& j) {
    StrategySpec spec;
    spec.kind = strategy_from_name(j.at("kind").get<std::string>());
    if (j.contains("k_percentile")) spec.k_percentile = j.at("k_percentile").get<double>();
    if (j.contains("temperature_decay")) {
        spec.temperature_decay = j.at("temperature_decay").get<double>();
    }
    if (j.contains("temperature_clip")) {
        const auto clip = j.at("temperature_clip");
        spec.temperature_clip_min = clip.at(0).get<double>();
        if (clip.at(1).is_string()) {
            spec.temperature_clip_max = std::numeric_limits<double>::infinity();
        } else {
            spec.temperature_clip_max = clip.at(1).get<double>();
        }
    }
    if (j.contains("predictor_smoothing")) {
        spec.predictor_smoothing = j.at("predictor_smoothing").get<double>();
    }
    spec.validate();
    return spec;
}

nlohmann::json strategy_to_json(const StrategySpec& spec) {
    nlohmann::json j;
    j["kind"] = strategy_name(spec.kind);
    j["k_percentile"] = spec.k_percentile;
    j["temperature_decay"] = spec.temperature_decay;
    j["temperature_clip"] = nlohmann::json::array();
    j["temperature_clip"].push_back(spec.temperature_clip_min);
    if (std::isinf(spec.temperature_clip_max)) {
        j["temperature_clip"].push_back("inf");
    } else {
        j["temperature_clip"].push_back(spec.temperature_clip_max);
    }
    j["predictor_smoothing"] = spec.predictor_smoothing;
    return j;
}

struct Arm {
    std::uint64_t seed;
    StrategySpec strategy;
};

} // namespace

void ExperimentConfig::validate() const {
    require(labeled.size >= 1 && unlabeled.size >= 1, "dataset sizes must be >= 1");
    require(!seeds.empty(), "seed list must not be empty");
    require(!strategies.empty(), "strategy list must not be empty");
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    solver.validate();
    for (const StrategySpec& spec : strategies) spec.validate();
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

CsvTable CsvTable::from_string(const std::string& text) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream row(line);
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    return table;
}

std::string CsvTable::to_string() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        out << header[i] << (i + 1 < header.size() ? "," : "");
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << row[i] << (i + 1 < row.size() ? "," : "");
        }
        out << '\n';
    }
    return out.str();
}

ExperimentConfig config_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ExperimentConfig config;
    if (j.contains("name")) config.name = j.at("name").get<std::string>();
    const auto& mdp = j.at("mdp");
    config.mdp.family = mdp.at("family").get<std::string>();
    config.mdp.size = mdp.at("size").get<int>();
    if (mdp.contains("seed")) config.mdp.seed = mdp.at("seed").get<std::uint64_t>();
    if (mdp.contains("discount")) config.mdp.discount = mdp.at("discount").get<double>();
    if (mdp.contains("slip")) config.mdp.slip = mdp.at("slip").get<double>();
    config.labeled = data_from_json(j.at("labeled"));
    config.unlabeled = data_from_json(j.at("unlabeled"));
    for (const auto& s : j.at("strategies")) config.strategies.push_back(strategy_from_json(s));
    if (j.contains("solver")) {
        const auto& solver = j.at("solver");
        if (solver.contains("alpha")) config.solver.alpha = solver.at("alpha").get<double>();
        if (solver.contains("divergence")) {
            config.solver.divergence =
                divergence_from_name(solver.at("divergence").get<std::string>());
        }
        if (solver.contains("max_iters")) {
            config.solver.max_iters = solver.at("max_iters").get<int>();
        }
        if (solver.contains("tol")) config.solver.tol = solver.at("tol").get<double>();
        if (solver.contains("strict_coverage")) {
            config.solver.strict_coverage = solver.at("strict_coverage").get<bool>();
        }
    }
    if (j.contains("delta")) config.delta = j.at("delta").get<double>();
    if (j.contains("seeds")) config.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("output_dir")) config.output_dir = j.at("output_dir").get<std::string>();
    config.validate();
    return config;
}

std::string config_to_json(const ExperimentConfig& config) {
    nlohmann::json j;
    j["name"] = config.name;
    j["mdp"] = {{"family", config.mdp.family},
                {"size", config.mdp.size},
                {"seed", config.mdp.seed},
                {"discount", config.mdp.discount},
                {"slip", config.mdp.slip}};
    j["labeled"] = data_to_json(config.labeled);
    j["unlabeled"] = data_to_json(config.unlabeled);
    j["strategies"] = nlohmann::json::array();
    for (const StrategySpec& spec : config.strategies) {
        j["strategies"].push_back(strategy_to_json(spec));
    }
    j["solver"] = {{"alpha", config.solver.alpha},
                   {"divergence", divergence_name(config.solver.divergence)},
                   {"max_iters", config.solver.max_iters},
                   {"tol", config.solver.tol},
                   {"strict_coverage", config.solver.strict_coverage}};
    j["delta"] = config.delta;
    j["seeds"] = config.seeds;
    j["output_dir"] = config.output_dir;
    return j.dump(2);
}

std::string config_hash(const ExperimentConfig& config) {
    // The hash identifies the experiment; where the results land does not
    // belong to it.
    nlohmann::json j = nlohmann::json::parse(config_to_json(config));
    j.erase("output_dir");
    const std::string canonical = j.dump();
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const char c : canonical) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ULL;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
    return buffer;
}

TabularMdp build_mdp(const MdpSpec& spec) {
    if (spec.family == "gridworld") {
        GridworldParams params;
        params.rows = std::max(1, static_cast<int>(std::floor(
                                      std::sqrt(static_cast<double>(spec.size)))));
        params.cols = (spec.size + params.rows - 1) / params.rows;
        params.discount = spec.discount;
        if (spec.slip >= 0.0) params.slip = spec.slip;
        return make_gridworld(params);
    }
    if (spec.family == "chain") {
        ChainParams params;
        params.num_states = spec.size;
        params.discount = spec.discount;
        if (spec.slip >= 0.0) params.slip = spec.slip;
        return make_chain(params);
    }
    return make_family(spec.family, spec.size, spec.discount, spec.seed);
}

namespace {

RunRecord run_arm(const ExperimentConfig& config, const std::string& hash, const Arm& arm) {
    RunRecord record;
    record.config_hash = hash;
    record.case_label = config.name;
    record.seed = arm.seed;
    record.strategy = strategy_name(arm.strategy.kind);
    record.mdp_family = config.mdp.family;
    record.mdp_size = config.mdp.size;
    record.labeled_quality = quality_name(config.labeled.quality.kind);
    record.labeled_size = config.labeled.size;
    record.unlabeled_quality = quality_name(config.unlabeled.quality.kind);
    record.unlabeled_size = config.unlabeled.size;
    record.delta = config.delta;

    const auto start_time = std::chrono::steady_clock::now();
    try {
        const TabularMdp mdp = build_mdp(config.mdp);
        const TabularPolicy labeled_policy = behavior_policy(mdp, config.labeled.quality);
        const TabularPolicy unlabeled_policy = behavior_policy(mdp, config.unlabeled.quality);
        SampleOptions labeled_options;
        labeled_options.labeled = true;
        labeled_options.reward_noise = config.labeled.reward_noise;
        labeled_options.rollout = config.labeled.rollout;
        SampleOptions unlabeled_options;
        unlabeled_options.labeled = false;
        unlabeled_options.rollout = config.unlabeled.rollout;
        const Dataset labeled = sample_dataset(mdp, labeled_policy, config.labeled.size,
                                               mix_seed(arm.seed, 1), labeled_options);
        const Dataset unlabeled = sample_dataset(mdp, unlabeled_policy, config.unlabeled.size,
                                                 mix_seed(arm.seed, 2), unlabeled_options);

        StrategyContext context;
        context.oracle_mdp = &mdp;
        context.discount = mdp.discount;
        context.c_p = concentration_constants(IntMatrix::Zero(mdp.num_states, mdp.num_actions),
                                              config.delta)
                          .c_p;
        Matrix labeled_q;
        Matrix labeled_occupancy;
        const bool needs_labeled_solve = arm.strategy.kind == StrategyKind::cds_filter ||
                                         arm.strategy.kind == StrategyKind::cds_soft ||
                                         arm.strategy.kind == StrategyKind::cds_uds ||
                                         arm.strategy.kind == StrategyKind::optimal_reweight;
        if (needs_labeled_solve) {
            StrategySpec no_sharing;
            no_sharing.kind = StrategyKind::no_sharing;
            const EffectiveDataset labeled_only = apply_strategy(no_sharing, labeled, unlabeled);
            const SolveResult labeled_result = solve_conservative(
                labeled_only, config.solver, mdp.discount, mdp.initial_dist);
            labeled_q = labeled_result.conservative_q;
            labeled_occupancy =
                occupancy(labeled_result.empirical, labeled_result.policy).density;
            context.conservative_q = &labeled_q;
            context.policy_occupancy = &labeled_occupancy;
        }

        const EffectiveDataset effective =
            apply_strategy(arm.strategy, labeled, unlabeled, context);
        const SolveResult result =
            solve_conservative(effective, config.solver, mdp.discount, mdp.initial_dist);

        record.j_true_learned = evaluate_return(mdp, result.policy);
        record.j_true_behavior = evaluate_return(mdp, effective.behavior);
        record.j_empirical_learned = result.empirical_return;
        record.divergence_value = result.divergence_value;
        record.iterations = result.iterations;
        record.converged = result.converged ? 1 : 0;
        record.coverage_min = effective.counts_eff.minCoeff();
        record.coverage_mean = effective.counts_eff.cast<double>().mean();
        try {
            const BoundReport report =
                guarantee_report(mdp, effective, result, config.delta, config.solver.alpha,
                                 config.solver.divergence);
            record.term_a_reward_bias = report.term_a_reward_bias;
            record.term_b_sampling_error = report.term_b_sampling_error;
            record.term_c_policy_improvement = report.term_c_policy_improvement;
            record.zeta_err = report.zeta_err;
            record.guarantee_holds = report.guarantee_holds ? 1 : 0;
            record.c_r = report.c_r;
            record.c_p = report.c_p;
        } catch (const CoverageError& e) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            record.term_a_reward_bias = nan;
            record.term_b_sampling_error = nan;
            record.term_c_policy_improvement = nan;
            record.zeta_err = nan;
            record.guarantee_holds = 0;
            record.status = std::string("bound-coverage: ") + e.what();
        } catch (const SupportError& e) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            record.term_a_reward_bias = nan;
            record.term_b_sampling_error = nan;
            record.term_c_policy_improvement = nan;
            record.zeta_err = nan;
            record.guarantee_holds = 0;
            record.status = std::string("bound-support: ") + e.what();
        }
    } catch (const std::exception& e) {
        record.status = std::string("error: ") + e.what();
    }
    record.wall_time_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start_time)
                              .count();
    return record;
}

} // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& config, int parallel) {
    config.validate();
    const std::string hash = config_hash(config);
    std::vector<Arm> arms;
    for (const std::uint64_t seed : config.seeds) {
        for (const StrategySpec& strategy : config.strategies) arms.push_back({seed, strategy});
    }
    std::vector<RunRecord> records(arms.size());
    const int workers = std::max(1, std::min<int>(parallel, static_cast<int>(arms.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < arms.size(); ++i) {
            records[i] = run_arm(config, hash, arms[i]);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < arms.size(); i = next++) {
                    records[i] = run_arm(config, hash, arms[i]);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }
    return records;
}

CsvTable records_table(const std::vector<RunRecord>& records) {
    CsvTable table;
    table.header = {"config_hash", "case", "seed", "strategy", "mdp_family", "mdp_size",
                    "labeled_quality", "labeled_size", "unlabeled_quality", "unlabeled_size",
                    "delta", "j_true_learned", "j_true_behavior", "j_empirical_learned",
                    "term_a_reward_bias", "term_b_sampling_error", "term_c_policy_improvement",
                    "zeta_err", "guarantee_holds", "c_r", "c_p", "divergence_value",
                    "iterations", "converged", "coverage_min", "coverage_mean", "status"};
    for (const RunRecord& r : records) {
        table.rows.push_back({r.config_hash, r.case_label, std::to_string(r.seed), r.strategy,
                              r.mdp_family, std::to_string(r.mdp_size), r.labeled_quality,
                              std::to_string(r.labeled_size), r.unlabeled_quality,
                              std::to_string(r.unlabeled_size), fmt(r.delta),
                              fmt(r.j_true_learned), fmt(r.j_true_behavior),
                              fmt(r.j_empirical_learned), fmt(r.term_a_reward_bias),
                              fmt(r.term_b_sampling_error), fmt(r.term_c_policy_improvement),
                              fmt(r.zeta_err), std::to_string(r.guarantee_holds), fmt(r.c_r),
                              fmt(r.c_p), fmt(r.divergence_value), std::to_string(r.iterations),
                              std::to_string(r.converged), fmt(r.coverage_min),
                              fmt(r.coverage_mean), r.status});
    }
    return table;
}

std::string records_to_csv(const std::vector<RunRecord>& records) {
    return records_table(records).to_string();
}

namespace {

struct CellStats {
    double mean = 0.0;
    double ci = 0.0;
    int n = 0;
};

CellStats stats_of(const std::vector<double>& values) {
    CellStats stats;
    stats.n = static_cast<int>(values.size());
    if (values.empty()) return stats;
    double sum = 0.0;
    for (const double v : values) sum += v;
    stats.mean = sum / stats.n;
    if (stats.n > 1) {
        double ss = 0.0;
        for (const double v : values) ss += (v - stats.mean) * (v - stats.mean);
        const double stderr_ = std::sqrt(ss / (stats.n - 1)) / std::sqrt(stats.n);
        stats.ci = 1.96 * stderr_;
    }
    return stats;
}

std::string round3(double x) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.3f", x);
    return buffer;
}

bool numeric_less(const std::string& a, const std::string& b) {
    try {
        std::size_t pa = 0, pb = 0;
        const double da = std::stod(a, &pa);
        const double db = std::stod(b, &pb);
        if (pa == a.size() && pb == b.size()) return da < db;
    } catch (...) {
    }
    return a < b;
}

} // namespace

TableOutput emit_table(const CsvTable& records, const std::string& group_by,
                       const std::string& metric) {
    require(!records.rows.empty(), "no records to tabulate");
    const int group_col = records.column(group_by);
    const int metric_col = records.column(metric);
    const int strategy_col = records.column("strategy");
    require(group_col >= 0, "unknown group-by key: " + group_by);
    require(metric_col >= 0, "unknown metric key: " + metric);
    require(strategy_col >= 0, "records are missing the strategy column");

    std::set<std::string> strategy_set;
    std::vector<std::string> group_order;
    std::map<std::string, std::map<std::string, std::vector<double>>> cells;
    for (const auto& row : records.rows) {
        const std::string& group = row[group_col];
        const std::string& strategy = row[strategy_col];
        strategy_set.insert(strategy);
        if (cells.find(group) == cells.end()) group_order.push_back(group);
        cells[group][strategy].push_back(std::stod(row[metric_col]));
    }
    std::sort(group_order.begin(), group_order.end(), numeric_less);
    const std::vector<std::string> strategies(strategy_set.begin(), strategy_set.end());

    std::ostringstream md;
    std::ostringstream csv;
    md << "| " << group_by << " |";
    csv << group_by;
    for (const auto& s : strategies) {
        md << ' ' << s << " |";
        csv << ',' << s << "_mean," << s << "_ci";
    }
    md << "\n|" << std::string(group_by.size() + 2, '-') << "|";
    for (const auto& s : strategies) md << std::string(s.size() + 2, '-') << "|";
    md << '\n';
    csv << '\n';
    for (const auto& group : group_order) {
        md << "| " << group << " |";
        csv << group;
        for (const auto& s : strategies) {
            const auto it = cells[group].find(s);
            if (it == cells[group].end() || it->second.empty()) {
                md << "  |";
                csv << ",,";
                continue;
            }
            const CellStats stats = stats_of(it->second);
            if (stats.n > 1) {
                md << ' ' << round3(stats.mean) << " ± " << round3(stats.ci) << " |";
                csv << ',' << fmt(stats.mean) << ',' << fmt(stats.ci);
            } else {
                md << ' ' << round3(stats.mean) << " (CI n/a) |";
                csv << ',' << fmt(stats.mean) << ',';
            }
        }
        md << '\n';
        csv << '\n';
    }
    return {md.str(), csv.str()};
}

std::string emit_plotdata(const CsvTable& records, const std::string& x_axis,
                          const std::string& series, const std::string& metric) {
    require(!records.rows.empty(), "no records to plot");
    const int x_col = records.column(x_axis);
    const int series_col = records.column(series);
    const int metric_col = records.column(metric);
    require(x_col >= 0, "unknown axis key: " + x_axis);
    require(series_col >= 0, "unknown series key: " + series);
    require(metric_col >= 0, "unknown metric key: " + metric);

    std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
    for (const auto& row : records.rows) {
        cells[{row[series_col], row[x_col]}].push_back(std::stod(row[metric_col]));
    }
    std::vector<std::pair<std::string, std::string>> keys;
    keys.reserve(cells.size());
    for (const auto& [key, values] : cells) keys.push_back(key);
    std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return numeric_less(a.second, b.second);
    });

    std::ostringstream out;
    out << "x,series,mean,ci_lo,ci_hi\n";
    for (const auto& key : keys) {
        const CellStats stats = stats_of(cells[key]);
        out << key.second << ',' << key.first << ',' << fmt(stats.mean) << ',';
        if (stats.n > 1) {
            out << fmt(stats.mean - stats.ci) << ',' << fmt(stats.mean + stats.ci);
        } else {
            out << ',';
        }
        out << '\n';
    }
    return out.str();
}

std::vector<RunRecord> run_and_persist(const ExperimentConfig& config, int parallel,
                                       const std::string& output_dir_override) {
    const auto start_time = std::chrono::steady_clock::now();
    const std::vector<RunRecord> records = run_experiment(config, parallel);
    const std::string out_dir =
        output_dir_override.empty() ? config.output_dir : output_dir_override;
    std::filesystem::create_directories(out_dir);
    std::filesystem::create_directories(out_dir + "/tables");
    std::filesystem::create_directories(out_dir + "/plots");

    std::ofstream(out_dir + "/records.csv") << records_to_csv(records);

    nlohmann::json manifest;
    manifest["config_hash"] = config_hash(config);
    manifest["name"] = config.name;
    manifest["version"] = "0.1.0";
    manifest["seeds"] = config.seeds;
    std::vector<std::string> strategy_names;
    for (const StrategySpec& s : config.strategies) strategy_names.push_back(strategy_name(s.kind));
    manifest["strategies"] = strategy_names;
    manifest["num_records"] = records.size();
    manifest["wall_time_ms"] = std::chrono::duration<double, std::milli>(
                                   std::chrono::steady_clock::now() - start_time)
                                   .count();
    std::ofstream(out_dir + "/manifest.json") << manifest.dump(2) << '\n';

    const TableOutput table = emit_table(records_table(records), "case", "j_true_learned");
    std::ofstream(out_dir + "/tables/j_true_learned_by_case.md") << table.markdown;
    std::ofstream(out_dir + "/tables/j_true_learned_by_case.csv") << table.csv;
    return records;
}

} // namespace udslab
