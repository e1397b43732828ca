#include "covalue/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "covalue/evaluate.hpp"
#include "covalue/realize.hpp"
#include "covalue/rng.hpp"
#include "covalue/serialize.hpp"
#include "covalue/text.hpp"

namespace covalue {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------
// Logging: plain stderr lines, never part of the artifacts.

enum LogLevel { kLogError = 0, kLogWarn, kLogInfo, kLogDebug };
int g_log_level = kLogInfo;

void logf(int level, const char* fmt, ...) {
    if (level > g_log_level) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[%s] ", names[level]);
    va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    va_end(args);
    std::fputc('\n', stderr);
}

// ---------------------------------------------------------------------
// Config parsing helpers.

const json& require(const json& j, const char* key, const char* where) {
    if (!j.contains(key)) {
        throw ConfigError(std::string(where) + " requires \"" + key + "\"");
    }
    return j.at(key);
}

// Reproducibility is the product: every active random stream gets its
// seed spelled out, no implicit defaults.
std::uint64_t require_seed(const json& j, const char* where) {
    if (!j.contains("seed")) {
        throw ConfigError(std::string(where) + " requires an explicit \"seed\"");
    }
    return j.at("seed").get<std::uint64_t>();
}

CsvSchema parse_schema(const json& j, const char* where) {
    CsvSchema schema;
    schema.feature_columns = require(j, "features", where).get<std::vector<int>>();
    schema.target_column = require(j, "target", where).get<int>();
    schema.header = j.value("header", false);
    return schema;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& known, const char* where) {
    for (const auto& item : j.items()) {
        if (!known.count(item.key())) {
            throw ConfigError(std::string(where) + ": unknown key \"" + item.key() + "\"");
        }
    }
}

std::vector<double> default_rho_grid() {
    std::vector<double> grid;
    for (int i = 10; i >= 0; --i) grid.push_back(i / 10.0);
    return grid;
}

std::string config_hash(const json& raw) {
    const std::uint64_t h = rng::fnv1a(raw.dump());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json threshold_json(double x) {
    if (std::isinf(x)) return "inf";
    return x;
}

// ---------------------------------------------------------------------
// Model construction from the config's "model" block.

Eigen::VectorXd parse_lengthscales(const json& k, Eigen::Index d, const char* where) {
    const json& ls = require(k, "lengthscales", where);
    if (ls.is_number()) return Eigen::VectorXd::Constant(d, ls.get<double>());
    const auto values = ls.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != d) {
        throw ConfigError(std::string(where) + ": lengthscales has " +
                          std::to_string(values.size()) + " entries for input dimension " +
                          std::to_string(d));
    }
    return Eigen::Map<const Eigen::VectorXd>(values.data(), d);
}

KernelSpec parse_leaf_kernel(const json& k, Eigen::Index d, const char* where) {
    const std::string kind = require(k, "kind", where).get<std::string>();
    const double sv = k.value("signal_variance", 1.0);
    if (kind == "se_ard") return KernelSpec::squared_exponential(sv, parse_lengthscales(k, d, where));
    if (kind == "exp_ard") return KernelSpec::exponential(sv, parse_lengthscales(k, d, where));
    throw ConfigError(std::string(where) + ": unknown kernel kind \"" + kind + "\"");
}

KernelSpec parse_kernel(const json& k, Eigen::Index d) {
    const std::string kind = require(k, "kind", "kernel").get<std::string>();
    if (kind != "sum") return parse_leaf_kernel(k, d, "kernel");
    const json& terms = require(k, "terms", "sum kernel");
    if (!terms.is_array() || terms.size() != 2) {
        throw ConfigError("sum kernel requires exactly two \"terms\"");
    }
    return KernelSpec::sum(parse_leaf_kernel(terms.at(0), d, "sum kernel term"),
                           parse_leaf_kernel(terms.at(1), d, "sum kernel term"));
}

Eigen::MatrixXd pick_inducing(const json& inducing, const Eigen::MatrixXd& pool) {
    const Eigen::Index m = pool.rows();
    if (m < 1) throw ConfigError("inducing point selection needs at least one training row");

    Eigen::Index count = 0;
    if (inducing.contains("count")) {
        count = inducing.at("count").get<Eigen::Index>();
    } else {
        const double fraction = inducing.value("fraction", 0.1);
        if (!(fraction > 0.0) || fraction > 1.0) {
            throw ConfigError("inducing fraction must lie in (0, 1]");
        }
        const Eigen::Index cap = inducing.value("cap", Eigen::Index{256});
        count = std::min<Eigen::Index>(cap, static_cast<Eigen::Index>(std::ceil(fraction * m)));
    }
    if (count < 1 || count > m) {
        throw ConfigError("inducing count " + std::to_string(count) + " outside [1, " +
                          std::to_string(m) + "]");
    }

    // Partial Fisher-Yates over row indices; sorting the chosen indices
    // keeps the result independent of the draw order's interpretation.
    const std::uint64_t seed = require_seed(inducing, "model.inducing");
    auto eng = rng::engine(seed, "inducing");
    std::vector<Eigen::Index> idx(m);
    for (Eigen::Index i = 0; i < m; ++i) idx[i] = i;
    for (Eigen::Index i = 0; i < count; ++i) {
        std::uniform_int_distribution<Eigen::Index> pick(i, m - 1);
        std::swap(idx[i], idx[pick(eng)]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());

    Eigen::MatrixXd points(count, pool.cols());
    for (Eigen::Index i = 0; i < count; ++i) points.row(i) = pool.row(idx[i]);
    return points;
}

// ---------------------------------------------------------------------
// Pipeline steps shared by the subcommands.

bool stage_at_least(Stage upto, Stage s) { return static_cast<int>(upto) >= static_cast<int>(s); }

Dataset pooled_training(const std::vector<Dataset>& parties) {
    return concat_coalition(parties, Coalition::grand(static_cast<int>(parties.size())).members);
}

// Per-party eta solves where a target below v_i falls back to the
// own-data-only sentinel instead of aborting the sweep: at rho = 1 the
// proportional reward of a weak party can undershoot its stand-alone
// value, and the sweep should report that rather than die.
RealizationPlan realize_soft(const ModelSpec& model, std::span<const Dataset> parties,
                             const std::vector<double>& targets, double tolerance) {
    const int n = static_cast<int>(parties.size());
    const Dataset joined = concat_coalition(parties, Coalition::grand(n).members);
    const double v_n = information_gain(model, joined.inputs);

    RealizationPlan plan;
    plan.v_n = v_n;
    plan.tolerance = tolerance > 0.0 ? tolerance : 1e-6 * std::max(1.0, v_n);
    plan.entries.resize(n);

    std::exception_ptr failure = nullptr;

#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        try {
            try {
                plan.entries[i] = solve_eta(model, parties, i, targets[i], plan.tolerance);
            } catch (const InfeasibleTargetError&) {
                RealizationEntry entry;
                entry.party = i;
                entry.target = targets[i];
                entry.eta = kInf;
                entry.achieved_ig = information_gain(model, parties[i].inputs);
                entry.infeasible = true;
                plan.entries[i] = entry;
            }
        } catch (...) {
#pragma omp critical(covalue_pipeline_realize)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return plan;
}

void check_manifest_guard(const std::filesystem::path& manifest_path, bool force) {
    if (!std::filesystem::exists(manifest_path)) return;
    if (force) return;
    json manifest;
    try {
        manifest = read_json_file(manifest_path.string());
    } catch (const Error&) {
        throw ConfigError(manifest_path.string() +
                          " exists but is unreadable; pass --force to overwrite");
    }
    if (manifest.value("status", "") == "complete") {
        throw ConfigError(manifest_path.string() +
                          " records a completed run; pass --force to overwrite");
    }
}

}  // namespace

// ---------------------------------------------------------------------
// Config parsing.

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown_keys(j,
                        {"data", "parties", "standardize", "model", "shapley", "rho",
                         "realization", "test", "output", "batch", "alternative_game"},
                        "config");

    ExperimentConfig cfg;
    cfg.raw = j;

    // data
    const json& data = require(j, "data", "config");
    const std::string source = require(data, "source", "data").get<std::string>();
    if (source == "friedman") {
        cfg.source = DataSourceKind::friedman;
        cfg.friedman_m = data.value("m", Eigen::Index{0});
        cfg.friedman_seed = require_seed(data, "data");
    } else if (source == "csv") {
        cfg.source = DataSourceKind::csv;
        cfg.csv_path = require(data, "path", "data").get<std::string>();
        cfg.schema = parse_schema(data, "data");
    } else if (source == "party_csvs") {
        cfg.source = DataSourceKind::party_csvs;
        cfg.party_csv_paths = require(data, "paths", "data").get<std::vector<std::string>>();
        if (cfg.party_csv_paths.empty()) throw ConfigError("data.paths must not be empty");
        cfg.schema = parse_schema(data, "data");
    } else {
        throw ConfigError("unknown data source \"" + source + "\"");
    }

    // parties
    if (j.contains("parties")) {
        const json& parties = j.at("parties");
        const std::string method = require(parties, "method", "parties").get<std::string>();
        if (method == "partition") {
            if (cfg.source == DataSourceKind::party_csvs) {
                throw ConfigError("party_csvs already assigns parties; drop the partition block");
            }
            cfg.party_method = PartyMethod::partition;
            cfg.n_parties = require(parties, "n", "parties").get<int>();
            cfg.min_fraction = require(parties, "min_fraction", "parties").get<double>();
            if (!(cfg.min_fraction > 0.0) ||
                cfg.min_fraction * std::max(cfg.n_parties, 1) > 1.0 + 1e-12) {
                throw ConfigError("parties.min_fraction must lie in (0, 1/n]");
            }
            cfg.partition_seed = require_seed(parties, "parties");
        } else if (method == "feature_ranges") {
            if (cfg.source != DataSourceKind::friedman) {
                throw ConfigError("feature_ranges generates per-party data and needs the friedman source");
            }
            cfg.party_method = PartyMethod::feature_ranges;
            cfg.range_feature = parties.value("feature", 0);
            if (cfg.range_feature < 0 || cfg.range_feature > 5) {
                throw ConfigError("parties.feature must index one of the six friedman features");
            }
            const json& ranges = require(parties, "ranges", "parties");
            if (!ranges.is_array() || ranges.empty()) {
                throw ConfigError("parties.ranges must be a non-empty array of [lo, hi] pairs");
            }
            for (const auto& r : ranges) {
                if (!r.is_array() || r.size() != 2) {
                    throw ConfigError("each feature range must be a [lo, hi] pair");
                }
                const double lo = r.at(0).get<double>();
                const double hi = r.at(1).get<double>();
                if (!(lo <= hi)) throw ConfigError("feature range has lo > hi");
                cfg.ranges.emplace_back(lo, hi);
            }
            cfg.n_parties = static_cast<int>(cfg.ranges.size());
            cfg.points_per_party =
                require(parties, "points_per_party", "parties").get<Eigen::Index>();
            if (cfg.points_per_party < 1) throw ConfigError("points_per_party must be >= 1");
        } else if (method == "explicit") {
            if (cfg.source != DataSourceKind::party_csvs) {
                throw ConfigError("explicit party assignment needs the party_csvs source");
            }
            cfg.party_method = PartyMethod::explicit_files;
            cfg.n_parties = static_cast<int>(cfg.party_csv_paths.size());
        } else {
            throw ConfigError("unknown party-assignment method \"" + method + "\"");
        }
    } else if (cfg.source == DataSourceKind::party_csvs) {
        cfg.party_method = PartyMethod::explicit_files;
        cfg.n_parties = static_cast<int>(cfg.party_csv_paths.size());
    } else {
        throw ConfigError("config requires \"parties\"");
    }
    if (cfg.n_parties < 1 || cfg.n_parties > kMaxExactParties) {
        throw ConfigError("the pipeline materializes the full coalition table, so n must lie in [1, " +
                          std::to_string(kMaxExactParties) + "]");
    }

    // standardize
    if (j.contains("standardize")) {
        const json& s = j.at("standardize");
        cfg.standardize_what.inputs = s.value("inputs", true);
        cfg.standardize_what.outputs = s.value("outputs", true);
        cfg.standardize_any = cfg.standardize_what.inputs || cfg.standardize_what.outputs;
    }

    // model: structural check now, ModelSpec construction once dim is known
    cfg.model = require(j, "model", "config");
    const std::string kind = require(cfg.model, "kind", "model").get<std::string>();
    if (kind != "blr" && kind != "gp" && kind != "dtc") {
        throw ConfigError("unknown model kind \"" + kind + "\"");
    }
    const double sigma2 = require(cfg.model, "noise_variance", "model").get<double>();
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw ConfigError("model.noise_variance must be positive and finite");
    }
    if (kind != "blr") require(cfg.model, "kernel", "model");
    if (kind == "dtc") require(cfg.model, "inducing", "model");

    // shapley
    const json& shapley = require(j, "shapley", "config");
    const std::string method = require(shapley, "method", "shapley").get<std::string>();
    if (method == "exact") {
        cfg.shapley_method = ShapleyMethod::exact;
    } else if (method == "sampled") {
        cfg.shapley_method = ShapleyMethod::sampled;
        cfg.shapley_samples = require(shapley, "samples", "shapley").get<std::uint64_t>();
        if (cfg.shapley_samples < 1) throw ConfigError("shapley.samples must be >= 1");
        cfg.shapley_seed = require_seed(shapley, "shapley");
    } else {
        throw ConfigError("unknown shapley method \"" + method + "\"");
    }

    // rho grid
    if (j.contains("rho")) {
        for (const auto& r : j.at("rho")) {
            const double rho = r.get<double>();
            if (!(rho >= 0.0) || rho > 1.0) throw ConfigError("rho values must lie in [0, 1]");
            cfg.rho_grid.push_back(rho);
        }
        if (cfg.rho_grid.empty()) throw ConfigError("rho list must not be empty");
        std::sort(cfg.rho_grid.begin(), cfg.rho_grid.end(), std::greater<>());
        cfg.rho_grid.erase(std::unique(cfg.rho_grid.begin(), cfg.rho_grid.end()),
                           cfg.rho_grid.end());
    } else {
        cfg.rho_grid = default_rho_grid();
    }

    // realization
    const json& realization = require(j, "realization", "config");
    cfg.tolerance = realization.value("tolerance", 0.0);
    cfg.realizations = require(realization, "realizations", "realization").get<int>();
    if (cfg.realizations < 1) throw ConfigError("realization.realizations must be >= 1");
    cfg.realization_seed = require_seed(realization, "realization");

    // test
    const json& test = require(j, "test", "config");
    const std::string test_method = require(test, "method", "test").get<std::string>();
    if (test_method == "holdout") {
        cfg.test_method = TestMethod::holdout;
        cfg.test_fraction = require(test, "fraction", "test").get<double>();
        if (!(cfg.test_fraction > 0.0) || cfg.test_fraction >= 1.0) {
            throw ConfigError("test.fraction must lie in (0, 1)");
        }
        cfg.test_seed = require_seed(test, "test");
        if (cfg.party_method == PartyMethod::feature_ranges) {
            throw ConfigError("feature_ranges has no pooled dataset to hold out from; "
                              "use a friedman or csv test set");
        }
    } else if (test_method == "csv") {
        cfg.test_method = TestMethod::csv;
        cfg.test_csv_path = require(test, "path", "test").get<std::string>();
        cfg.test_schema = parse_schema(test, "test");
    } else if (test_method == "friedman") {
        cfg.test_method = TestMethod::friedman;
        cfg.test_m = require(test, "m", "test").get<Eigen::Index>();
        if (cfg.test_m < 1) throw ConfigError("test.m must be >= 1");
        cfg.test_seed = require_seed(test, "test");
    } else {
        throw ConfigError("unknown test method \"" + test_method + "\"");
    }

    if (cfg.source == DataSourceKind::friedman &&
        cfg.party_method == PartyMethod::partition && cfg.friedman_m < 1) {
        throw ConfigError("data.m must be >= 1 for a friedman pool");
    }

    cfg.output_dir = j.value("output", "");

    // batch
    if (j.contains("batch")) {
        const json& batch = j.at("batch");
        cfg.batch_splits = require(batch, "splits", "batch").get<int>();
        cfg.batch_partitions = require(batch, "partitions", "batch").get<int>();
        if (cfg.batch_splits < 1 || cfg.batch_partitions < 1) {
            throw ConfigError("batch.splits and batch.partitions must be >= 1");
        }
        if (cfg.party_method != PartyMethod::partition || cfg.test_method != TestMethod::holdout) {
            throw ConfigError("batch mode sweeps holdout splits and partitions, so it needs "
                              "parties.method = partition and test.method = holdout");
        }
    }

    cfg.alternative_game = j.value("alternative_game", false);

    return cfg;
}

// ---------------------------------------------------------------------
// Data preparation.

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t test_seed,
                          std::uint64_t partition_seed) {
    PreparedData out;

    auto load_test = [&]() -> Dataset {
        switch (cfg.test_method) {
            case TestMethod::csv:
                return load_csv(cfg.test_csv_path, cfg.test_schema);
            case TestMethod::friedman:
                return friedman_generate(cfg.test_m, test_seed);
            case TestMethod::holdout:
                throw ConfigError("holdout test set is carved from the pool");  // unreachable
        }
        throw ConfigError("unknown test method");
    };

    switch (cfg.party_method) {
        case PartyMethod::partition: {
            Dataset full = cfg.source == DataSourceKind::friedman
                               ? friedman_generate(cfg.friedman_m, cfg.friedman_seed)
                               : load_csv(cfg.csv_path, cfg.schema);
            Dataset train;
            if (cfg.test_method == TestMethod::holdout) {
                auto split = holdout_split(full, cfg.test_fraction, test_seed);
                train = std::move(split.first);
                out.test = std::move(split.second);
            } else {
                train = std::move(full);
                out.test = load_test();
            }
            if (cfg.standardize_any) {
                auto fitted = standardize(train, cfg.standardize_what);
                train = std::move(fitted.first);
                out.test = apply_standardization(fitted.second, out.test);
            }
            PartitionSpec spec;
            spec.n_parties = cfg.n_parties;
            spec.min_fraction = cfg.min_fraction;
            spec.seed = partition_seed;
            out.parties = partition(train, spec);
            break;
        }
        case PartyMethod::feature_ranges: {
            for (int i = 0; i < cfg.n_parties; ++i) {
                auto eng = rng::engine(cfg.friedman_seed, "ranges.party",
                                       static_cast<std::uint64_t>(i));
                std::uniform_real_distribution<double> unif(0.0, 1.0);
                std::normal_distribution<double> norm;
                const auto [lo, hi] = cfg.ranges[i];
                Eigen::MatrixXd inputs(cfg.points_per_party, 6);
                Eigen::VectorXd outputs(cfg.points_per_party);
                Eigen::Index got = 0;
                // Candidates always consume 6 uniforms + 1 normal so the
                // stream layout does not depend on the acceptance pattern.
                const std::uint64_t cap =
                    1000000 + 10000 * static_cast<std::uint64_t>(cfg.points_per_party);
                for (std::uint64_t attempts = 0; got < cfg.points_per_party; ++attempts) {
                    if (attempts >= cap) {
                        throw ConfigError("party " + std::to_string(i) + " range [" +
                                          format_double(lo) + ", " + format_double(hi) +
                                          "] accepts too few friedman draws");
                    }
                    Eigen::RowVectorXd x(6);
                    for (int c = 0; c < 6; ++c) x(c) = unif(eng);
                    const double eps = norm(eng);
                    if (x(cfg.range_feature) < lo || x(cfg.range_feature) > hi) continue;
                    inputs.row(got) = x;
                    outputs(got) = friedman_response(x) + eps;
                    ++got;
                }
                out.parties.push_back({std::move(inputs), std::move(outputs)});
            }
            out.test = load_test();
            if (cfg.standardize_any) {
                auto fitted = standardize(pooled_training(out.parties), cfg.standardize_what);
                for (auto& party : out.parties) {
                    party = apply_standardization(fitted.second, party);
                }
                out.test = apply_standardization(fitted.second, out.test);
            }
            break;
        }
        case PartyMethod::explicit_files: {
            for (const auto& path : cfg.party_csv_paths) {
                out.parties.push_back(load_csv(path, cfg.schema));
            }
            if (cfg.test_method == TestMethod::holdout) {
                // Hold out within every party so no party's share shifts
                // with the split draw.
                std::vector<Dataset> tests;
                for (int i = 0; i < cfg.n_parties; ++i) {
                    auto split = holdout_split(
                        out.parties[i], cfg.test_fraction,
                        rng::stream_key(test_seed, "holdout.party", static_cast<std::uint64_t>(i)));
                    out.parties[i] = std::move(split.first);
                    tests.push_back(std::move(split.second));
                }
                out.test = concat_coalition(tests, Coalition::grand(cfg.n_parties).members);
            } else {
                out.test = load_test();
            }
            if (cfg.standardize_any) {
                auto fitted = standardize(pooled_training(out.parties), cfg.standardize_what);
                for (auto& party : out.parties) {
                    party = apply_standardization(fitted.second, party);
                }
                out.test = apply_standardization(fitted.second, out.test);
            }
            break;
        }
    }

    for (const auto& party : out.parties) party.validate();
    out.test.validate();
    out.dim = out.parties.front().dim();
    for (const auto& party : out.parties) {
        if (party.dim() != out.dim) {
            throw ConfigError("party datasets disagree on input dimension");
        }
    }
    if (out.test.dim() != out.dim) {
        throw ConfigError("test set input dimension does not match the parties");
    }
    return out;
}

// ---------------------------------------------------------------------
// Model construction.

ModelSpec build_model(const json& model_json, const std::vector<Dataset>& parties) {
    const Eigen::Index d = parties.front().dim();
    const std::string kind = model_json.at("kind").get<std::string>();
    const double sigma2 = model_json.at("noise_variance").get<double>();

    ModelSpec spec;
    if (kind == "blr") {
        BlrModel blr;
        blr.noise_variance = sigma2;
        if (model_json.contains("prior_mean")) {
            const auto mean = model_json.at("prior_mean").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(mean.size()) != d) {
                throw ConfigError("model.prior_mean length must equal the input dimension");
            }
            blr.prior_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
        } else {
            blr.prior_mean = Eigen::VectorXd::Zero(d);
        }
        const double prior_variance = model_json.value("prior_variance", 1.0);
        if (!(prior_variance > 0.0)) throw ConfigError("model.prior_variance must be positive");
        blr.prior_cov = prior_variance * Eigen::MatrixXd::Identity(d, d);
        spec.model = std::move(blr);
    } else if (kind == "gp") {
        GpModel gp{parse_kernel(model_json.at("kernel"), d), sigma2};
        spec.model = std::move(gp);
    } else if (kind == "dtc") {
        DtcModel dtc;
        dtc.kernel = parse_kernel(model_json.at("kernel"), d);
        dtc.noise_variance = sigma2;
        dtc.inducing_inputs = pick_inducing(model_json.at("inducing"),
                                            pooled_training(parties).inputs);
        spec.model = std::move(dtc);
    } else {
        throw ConfigError("unknown model kind \"" + kind + "\"");
    }
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------
// The single-run pipeline.

json run_single(const ExperimentConfig& cfg, const std::string& out_dir,
                std::uint64_t test_seed, std::uint64_t partition_seed, std::uint64_t eval_seed,
                Stage upto) {
    std::filesystem::create_directories(out_dir);
    json record;
    record["dir"] = out_dir;
    record["artifacts"] = json::array();
    record["notes"] = json::array();
    auto artifact = [&](const std::string& name) { record["artifacts"].push_back(name); };
    auto note = [&](const std::string& text) {
        record["notes"].push_back(text);
        logf(kLogWarn, "%s", text.c_str());
    };

    PreparedData data = prepare_data(cfg, test_seed, partition_seed);
    const int n = static_cast<int>(data.parties.size());
    {
        std::string sizes;
        for (const auto& party : data.parties) {
            if (!sizes.empty()) sizes += "/";
            sizes += std::to_string(party.rows());
        }
        logf(kLogInfo, "data ready: %d parties (%s rows), %lld test rows", n, sizes.c_str(),
             static_cast<long long>(data.test.rows()));
    }

    const ModelSpec model = build_model(cfg.model, data.parties);
    logf(kLogDebug, "model: %s, dim %lld", model.kind(), static_cast<long long>(data.dim));

    // --- value ---
    const CharacteristicFunction cf = coalition_values(model, data.parties);
    const double v_n = cf.grand_value();
    record["v_n"] = v_n;
    logf(kLogInfo, "coalition values done: v_N = %.6g", v_n);
    {
        json cfj = cf_to_json(cf);
        if (n <= 12) {
            cfj["checks"] = json{{"monotone", structure_check_to_json(check_monotone(cf))},
                                 {"submodular", structure_check_to_json(check_submodular(cf))}};
        } else {
            cfj["checks"] = json{{"skipped", "structure checks enumerate pairs; n > 12"}};
        }
        write_json_file(out_dir + "/cf.json", cfj);
        artifact("cf.json");
    }
    if (!stage_at_least(upto, Stage::shapley)) return record;

    // --- shapley ---
    ShapleyVector sv;
    if (cfg.shapley_method == ShapleyMethod::exact) {
        sv = exact_shapley(cf);
    } else {
        sv = sampled_shapley([&cf](CoalitionMask mask) { return cf.value(mask); }, n,
                             cfg.shapley_samples, cfg.shapley_seed);
    }
    write_json_file(out_dir + "/shapley.json", shapley_to_json(sv));
    artifact("shapley.json");
    logf(kLogInfo, "shapley done: phi_star = %.6g", sv.phi_star);
    if (!stage_at_least(upto, Stage::rewards)) return record;

    // --- rewards ---
    ShapleyVector sv_reward = sv;  // sampling noise can push phi below 0
    for (double& phi : sv_reward.phi) {
        if (phi < 0.0) {
            phi = 0.0;
            note("sampled shapley value below zero clamped for the reward map");
        }
    }
    sv_reward.phi_star = *std::max_element(sv_reward.phi.begin(), sv_reward.phi.end());

    double rho_r = kInf;
    double rho_s = kInf;
    try {
        rho_r = rho_r_threshold(cf, sv_reward);
        rho_s = rho_s_threshold(cf, sv_reward);
    } catch (const PremiseError& e) {
        note(std::string("threshold computation failed: ") + e.what());
    }

    std::vector<RewardRow> rows;
    std::vector<RewardAllocation> grid_allocs;
    for (double rho : cfg.rho_grid) {
        RewardAllocation alloc = rho_shapley_rewards(sv_reward, v_n, rho);
        alloc.rho_r = rho_r;
        alloc.rho_s = rho_s;
        rows.push_back({"", rho, alloc.rewards});
        grid_allocs.push_back(std::move(alloc));
    }
    json incentives;
    for (std::size_t k = 0; k < cfg.rho_grid.size(); ++k) {
        incentives[format_double(cfg.rho_grid[k])] =
            incentive_report_to_json(check_incentives(cf, grid_allocs[k]));
    }
    for (const auto& [label, rho] : {std::pair<const char*, double>{"rho_r", rho_r},
                                     std::pair<const char*, double>{"rho_s", rho_s}}) {
        if (!std::isfinite(rho) || rho > 1.0) continue;
        RewardAllocation alloc = rho_shapley_rewards(sv_reward, v_n, rho);
        alloc.rho_r = rho_r;
        alloc.rho_s = rho_s;
        auto pos = std::find_if(rows.begin(), rows.end(),
                                [rho](const RewardRow& row) { return row.rho < rho; });
        rows.insert(pos, {label, rho, alloc.rewards});
        incentives[label] = incentive_report_to_json(check_incentives(cf, alloc));
    }
    write_rewards_csv(out_dir + "/rewards.csv", rows);
    artifact("rewards.csv");
    write_json_file(out_dir + "/thresholds.json", json{{"rho_r", threshold_json(rho_r)},
                                                       {"rho_s", threshold_json(rho_s)},
                                                       {"incentives", incentives}});
    artifact("thresholds.json");
    logf(kLogInfo, "rewards done: rho_r = %.6g, rho_s = %.6g", rho_r, rho_s);
    if (!stage_at_least(upto, Stage::realize)) return record;

    // --- realize / evaluate, per rho ---
    std::vector<double> phi_ratio(sv_reward.phi.size(), 0.0);
    if (sv_reward.phi_star > 0.0) {
        for (std::size_t i = 0; i < phi_ratio.size(); ++i) {
            phi_ratio[i] = sv_reward.phi[i] / sv_reward.phi_star;
        }
    }
    if (stage_at_least(upto, Stage::evaluate) && data.test.rows() < 1) {
        throw ConfigError("evaluation requires a non-empty test set");
    }

    for (std::size_t k = 0; k < cfg.rho_grid.size(); ++k) {
        const double rho = cfg.rho_grid[k];
        const std::string rho_dir = out_dir + "/rho_" + format_double(rho);
        std::filesystem::create_directories(rho_dir);
        const std::string rel = "rho_" + format_double(rho) + "/";

        RealizationPlan plan =
            realize_soft(model, data.parties, grid_allocs[k].rewards, cfg.tolerance);
        for (const auto& entry : plan.entries) {
            if (entry.infeasible) {
                note("rho " + format_double(rho) + ": party " + std::to_string(entry.party) +
                     " target below its stand-alone value; own-data fallback");
            }
        }
        json plan_json = plan_to_json(plan);
        plan_json["rho"] = rho;
        write_json_file(rho_dir + "/realization.json", plan_json);
        artifact(rel + "realization.json");
        logf(kLogInfo, "rho %s realized", format_double(rho).c_str());

        if (!stage_at_least(upto, Stage::evaluate)) continue;
        const EvaluationReport report =
            evaluate_allocation(model, data.parties, plan, data.test, cfg.realizations, eval_seed);
        write_evaluation_csv(rho_dir + "/evaluation.csv", report, phi_ratio);
        artifact(rel + "evaluation.csv");
        logf(kLogInfo, "rho %s evaluated: grand MNLP %.6g", format_double(rho).c_str(),
             report.mnlp_grand);
    }

    // --- alternative game (normalized comparison) ---
    if (stage_at_least(upto, Stage::evaluate) && cfg.alternative_game) {
        const CharacteristicFunction cf_alt =
            mnlp_characteristic_function(model, data.parties, data.test);
        const ShapleyVector sv_alt = exact_shapley(cf_alt);
        write_json_file(out_dir + "/cf_mnlp.json", cf_to_json(cf_alt));
        artifact("cf_mnlp.json");
        write_comparison_csv(out_dir + "/comparison.csv",
                             normalized_comparison(cf, cf_alt, sv, sv_alt));
        artifact("comparison.csv");
        logf(kLogInfo, "alternative game comparison done");
    }

    return record;
}

// ---------------------------------------------------------------------
// Subcommands.

void ensure_output_dir(const std::string& out_dir, bool force) {
    std::filesystem::create_directories(out_dir);
    check_manifest_guard(std::filesystem::path(out_dir) / "manifest.json", force);
}

namespace {

void run_stage_command(const ExperimentConfig& cfg, const std::string& out_dir, bool force,
                       Stage upto) {
    if (cfg.batch_splits > 0) {
        throw ConfigError("batch mode is only available through the experiment subcommand");
    }
    ensure_output_dir(out_dir, force);
    run_single(cfg, out_dir, cfg.test_seed, cfg.partition_seed, cfg.realization_seed, upto);
}

}  // namespace

void cmd_value(const ExperimentConfig& cfg, const std::string& out_dir, bool force) {
    run_stage_command(cfg, out_dir, force, Stage::value);
}
void cmd_shapley(const ExperimentConfig& cfg, const std::string& out_dir, bool force) {
    run_stage_command(cfg, out_dir, force, Stage::shapley);
}
void cmd_rewards(const ExperimentConfig& cfg, const std::string& out_dir, bool force) {
    run_stage_command(cfg, out_dir, force, Stage::rewards);
}
void cmd_realize(const ExperimentConfig& cfg, const std::string& out_dir, bool force) {
    run_stage_command(cfg, out_dir, force, Stage::realize);
}
void cmd_evaluate(const ExperimentConfig& cfg, const std::string& out_dir, bool force) {
    run_stage_command(cfg, out_dir, force, Stage::evaluate);
}

void cmd_experiment(const ExperimentConfig& cfg, const std::string& out_dir, bool force) {
    ensure_output_dir(out_dir, force);
    const std::string manifest_path = out_dir + "/manifest.json";

    json manifest{{"version", kVersion},
                  {"config", cfg.raw},
                  {"config_hash", config_hash(cfg.raw)},
                  {"status", "partial"},
                  {"runs", json::array()}};
    write_json_file(manifest_path, manifest);

    try {
        if (cfg.batch_splits == 0) {
            json record = run_single(cfg, out_dir, cfg.test_seed, cfg.partition_seed,
                                     cfg.realization_seed, Stage::evaluate);
            record["dir"] = ".";
            manifest["runs"].push_back(std::move(record));
        } else {
            for (int s = 0; s < cfg.batch_splits; ++s) {
                const std::uint64_t split_seed =
                    rng::stream_key(cfg.test_seed, "batch.split", static_cast<std::uint64_t>(s));
                for (int p = 0; p < cfg.batch_partitions; ++p) {
                    const std::uint64_t part_seed =
                        rng::stream_key(cfg.partition_seed, "batch.partition",
                                        static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(p));
                    const std::uint64_t eval_seed =
                        rng::stream_key(cfg.realization_seed, "batch.eval",
                                        static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(p));
                    const std::string rel =
                        "split_" + std::to_string(s) + "/part_" + std::to_string(p);
                    logf(kLogInfo, "batch run %s", rel.c_str());
                    json record = run_single(cfg, out_dir + "/" + rel, split_seed, part_seed,
                                             eval_seed, Stage::evaluate);
                    record["dir"] = rel;
                    record["split"] = s;
                    record["part"] = p;
                    manifest["runs"].push_back(std::move(record));
                }
            }
        }
    } catch (...) {
        // Record how far we got; the partial status keeps the directory
        // overwritable and tells the reader the artifacts are incomplete.
        try {
            write_json_file(manifest_path, manifest);
        } catch (...) {
        }
        throw;
    }

    manifest["status"] = "complete";
    write_json_file(manifest_path, manifest);
    logf(kLogInfo, "experiment complete: %s", manifest_path.c_str());
}

// ---------------------------------------------------------------------
// CLI driver.

int run_cli(int argc, char** argv) {
    CLI::App app{"Collaborative data valuation, reward allocation, and evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::string log_level = "info";
    int threads = 0;
    bool force = false;

    const std::pair<const char*, const char*> commands[] = {
        {"value", "compute the coalition value table"},
        {"shapley", "compute Shapley values (exact or sampled)"},
        {"rewards", "sweep rho and tabulate rewards with incentive checks"},
        {"realize", "solve the per-party noise variances for each rho"},
        {"evaluate", "score realized models on the test set (MNLP)"},
        {"experiment", "full pipeline with manifest (supports batch sweeps)"},
    };
    for (const auto& [name, desc] : commands) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "experiment config (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", out_override, "output directory (overrides the config)");
        sub->add_option("--threads", threads, "worker threads (0 = library default)")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--log-level", log_level, "error | warn | info | debug")
            ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
        sub->add_flag("--force", force, "overwrite a completed output directory");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::config);
    }

    if (log_level == "error") g_log_level = kLogError;
    else if (log_level == "warn") g_log_level = kLogWarn;
    else if (log_level == "debug") g_log_level = kLogDebug;
    else g_log_level = kLogInfo;

#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif

    try {
        const ExperimentConfig cfg = parse_config(read_json_file(config_path));
        const std::string out_dir = !out_override.empty() ? out_override : cfg.output_dir;
        if (out_dir.empty()) {
            throw ConfigError("no output directory: set \"output\" in the config or pass --out");
        }

        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "value") cmd_value(cfg, out_dir, force);
        else if (name == "shapley") cmd_shapley(cfg, out_dir, force);
        else if (name == "rewards") cmd_rewards(cfg, out_dir, force);
        else if (name == "realize") cmd_realize(cfg, out_dir, force);
        else if (name == "evaluate") cmd_evaluate(cfg, out_dir, force);
        else cmd_experiment(cfg, out_dir, force);
        return static_cast<int>(ExitCode::ok);
    } catch (const IoError& e) {
        logf(kLogError, "%s", e.what());
        return static_cast<int>(ExitCode::io);
    } catch (const NumericError& e) {
        logf(kLogError, "%s", e.what());
        return static_cast<int>(ExitCode::numeric);
    } catch (const ConfigError& e) {
        logf(kLogError, "%s", e.what());
        return static_cast<int>(ExitCode::config);
    } catch (const PremiseError& e) {
        logf(kLogError, "%s", e.what());
        return static_cast<int>(ExitCode::config);
    } catch (const std::exception& e) {
        logf(kLogError, "%s", e.what());
        return static_cast<int>(ExitCode::numeric);
    }
}

}  // namespace covalue
