#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "covalue/data.hpp"
#include "covalue/dataset.hpp"
#include "covalue/game.hpp"
#include "covalue/models.hpp"

namespace covalue {

enum class DataSourceKind { friedman, csv, party_csvs };
enum class PartyMethod { partition, feature_ranges, explicit_files };
enum class TestMethod { holdout, csv, friedman };

// One JSON document drives the whole pipeline; every random stream that a
// config branch activates must carry its own seed.  parse_config validates
// cross-field constraints (exactly one data source, one party-assignment
// method, rho in [0,1], ...) and keeps the raw document for the manifest.
struct ExperimentConfig {
    DataSourceKind source = DataSourceKind::friedman;
    Eigen::Index friedman_m = 0;
    std::uint64_t friedman_seed = 0;
    std::string csv_path;
    std::vector<std::string> party_csv_paths;
    CsvSchema schema;

    PartyMethod party_method = PartyMethod::partition;
    int n_parties = 0;
    double min_fraction = 0.0;
    std::uint64_t partition_seed = 0;
    int range_feature = 0;
    std::vector<std::pair<double, double>> ranges;
    Eigen::Index points_per_party = 0;

    StandardizeWhat standardize_what;
    bool standardize_any = false;

    nlohmann::json model;  // built into a ModelSpec once the data dimension is known

    ShapleyMethod shapley_method = ShapleyMethod::exact;
    std::uint64_t shapley_samples = 0;
    std::uint64_t shapley_seed = 0;

    std::vector<double> rho_grid;  // descending, deduplicated

    double tolerance = 0.0;  // <= 0 picks the solver default
    int realizations = 1;
    std::uint64_t realization_seed = 0;

    TestMethod test_method = TestMethod::holdout;
    double test_fraction = 0.0;
    std::uint64_t test_seed = 0;
    std::string test_csv_path;
    CsvSchema test_schema;
    Eigen::Index test_m = 0;

    std::string output_dir;

    int batch_splits = 0;  // 0 disables batch mode
    int batch_partitions = 0;

    bool alternative_game = false;

    nlohmann::json raw;
};

ExperimentConfig parse_config(const nlohmann::json& j);

struct PreparedData {
    std::vector<Dataset> parties;
    Dataset test;
    Eigen::Index dim = 0;
};

// Source -> test split -> standardization (fitted on training data only)
// -> party assignment.  The seed arguments override the config's split and
// partition seeds so batch mode can derive per-run streams.
PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t test_seed,
                          std::uint64_t partition_seed);

// Instantiate the model for the prepared data: broadcast scalar
// lengthscales to the input dimension, pick DTC inducing points as a
// seeded subsample of the pooled training inputs.
ModelSpec build_model(const nlohmann::json& model_json, const std::vector<Dataset>& parties);

// How far down the pipeline a subcommand runs.
enum class Stage { value, shapley, rewards, realize, evaluate };

// Run value -> ... -> `upto` for one (test seed, partition seed,
// evaluation seed) triple, writing artifacts into out_dir.  Returns the
// manifest record of the run.
nlohmann::json run_single(const ExperimentConfig& cfg, const std::string& out_dir,
                          std::uint64_t test_seed, std::uint64_t partition_seed,
                          std::uint64_t eval_seed, Stage upto);

// Creates out_dir if needed.  An existing manifest.json with status
// "complete" blocks the write unless force is set, so finished results
// are never silently clobbered by a partial rerun.
void ensure_output_dir(const std::string& out_dir, bool force);

void cmd_value(const ExperimentConfig& cfg, const std::string& out_dir, bool force = false);
void cmd_shapley(const ExperimentConfig& cfg, const std::string& out_dir, bool force = false);
void cmd_rewards(const ExperimentConfig& cfg, const std::string& out_dir, bool force = false);
void cmd_realize(const ExperimentConfig& cfg, const std::string& out_dir, bool force = false);
void cmd_evaluate(const ExperimentConfig& cfg, const std::string& out_dir, bool force = false);
void cmd_experiment(const ExperimentConfig& cfg, const std::string& out_dir, bool force = false);

// Full CLI: subcommands value | shapley | rewards | realize | evaluate |
// experiment with --config/--out/--threads/--log-level/--force.  Returns
// the process exit code: 0 ok, 1 config error, 2 I/O error, 3 numeric.
int run_cli(int argc, char** argv);

}  // namespace covalue
