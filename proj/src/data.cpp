#include "covalue/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "covalue/errors.hpp"
#include "covalue/rng.hpp"
#include "covalue/text.hpp"

namespace covalue {

namespace {

// A column counts as constant when its spread is indistinguishable from
// rounding error around the mean.
bool degenerate_std(double sd, double mean) {
    return sd <= 1e-12 * std::max(1.0, std::abs(mean));
}

}  // namespace

double friedman_response(const Eigen::RowVectorXd& x) {
    return 10.0 * std::sin(std::numbers::pi * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) +
           10.0 * x[3] + 5.0 * x[4];
}

Dataset friedman_generate(Eigen::Index m, std::uint64_t seed) {
    if (m < 0) throw ConfigError("sample count must be non-negative");
    Dataset out{Eigen::MatrixXd(m, 6), Eigen::VectorXd(m)};
    auto eng = rng::engine(seed, "friedman");
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < 6; ++j) out.inputs(i, j) = uniform(eng);
        out.outputs[i] = friedman_response(out.inputs.row(i)) + noise(eng);
    }
    return out;
}

std::pair<Dataset, StandardizationParams> standardize(const Dataset& data, StandardizeWhat what) {
    data.validate();
    const Eigen::Index m = data.rows();
    if (m < 2) throw ConfigError("standardization needs at least two rows");

    StandardizationParams params;
    Dataset out = data;

    if (what.inputs) {
        const Eigen::Index d = data.dim();
        params.inputs = true;
        params.input_mean = data.inputs.colwise().mean();
        params.input_std.resize(d);
        for (Eigen::Index c = 0; c < d; ++c) {
            const double mean = params.input_mean[c];
            const double var = (data.inputs.col(c).array() - mean).square().sum() / m;
            const double sd = std::sqrt(var);
            if (degenerate_std(sd, mean)) {
                throw ConfigError("input column " + std::to_string(c) +
                                  " is constant; cannot standardize");
            }
            params.input_std[c] = sd;
            out.inputs.col(c) = (data.inputs.col(c).array() - mean) / sd;
        }
    }
    if (what.outputs) {
        params.outputs = true;
        const double mean = data.outputs.mean();
        const double var = (data.outputs.array() - mean).square().sum() / m;
        const double sd = std::sqrt(var);
        if (degenerate_std(sd, mean)) {
            throw ConfigError("output column is constant; cannot standardize");
        }
        params.output_mean = mean;
        params.output_std = sd;
        out.outputs = (data.outputs.array() - mean) / sd;
    }
    return {std::move(out), std::move(params)};
}

Dataset apply_standardization(const StandardizationParams& params, const Dataset& data) {
    data.validate();
    Dataset out = data;
    if (params.inputs) {
        if (params.input_mean.size() != data.dim()) {
            throw ConfigError("standardization parameters fit a different input dimension");
        }
        for (Eigen::Index c = 0; c < data.dim(); ++c) {
            out.inputs.col(c) =
                (data.inputs.col(c).array() - params.input_mean[c]) / params.input_std[c];
        }
    }
    if (params.outputs) {
        out.outputs = (data.outputs.array() - params.output_mean) / params.output_std;
    }
    return out;
}

Dataset invert_standardization(const StandardizationParams& params, const Dataset& data) {
    data.validate();
    Dataset out = data;
    if (params.inputs) {
        if (params.input_mean.size() != data.dim()) {
            throw ConfigError("standardization parameters fit a different input dimension");
        }
        for (Eigen::Index c = 0; c < data.dim(); ++c) {
            out.inputs.col(c) = data.inputs.col(c).array() * params.input_std[c] +
                                params.input_mean[c];
        }
    }
    if (params.outputs) {
        out.outputs = data.outputs.array() * params.output_std + params.output_mean;
    }
    return out;
}

namespace {

// Block sizes >= lo summing to m, drawn uniformly over all such
// compositions: sample n-1 distinct cut points and retry until every
// block clears the floor.  The retry cap only fires on spec/size
// combinations far tighter than the intended 5-10% minimums.
std::vector<Eigen::Index> draw_block_sizes(Eigen::Index m, int n, Eigen::Index lo,
                                           std::mt19937_64& eng) {
    std::vector<Eigen::Index> sizes(n);
    if (n == 1) {
        sizes[0] = m;
        return sizes;
    }
    if (n * lo == m) {
        std::fill(sizes.begin(), sizes.end(), lo);
        return sizes;
    }
    std::uniform_int_distribution<Eigen::Index> pick(1, m - 1);
    std::vector<Eigen::Index> cuts(n - 1);
    for (long attempt = 0; attempt < 1000000; ++attempt) {
        for (auto& c : cuts) c = pick(eng);
        std::sort(cuts.begin(), cuts.end());
        if (std::adjacent_find(cuts.begin(), cuts.end()) != cuts.end()) continue;
        bool ok = cuts.front() >= lo && m - cuts.back() >= lo;
        for (int i = 1; i + 1 < n && ok; ++i) ok = cuts[i] - cuts[i - 1] >= lo;
        if (!ok) continue;
        sizes[0] = cuts[0];
        for (int i = 1; i + 1 <= n - 1; ++i) sizes[i] = cuts[i] - cuts[i - 1];
        sizes[n - 1] = m - cuts[n - 2];
        return sizes;
    }
    throw ConfigError("partition spec leaves too little slack; block-size sampling gave up");
}

}  // namespace

std::vector<Dataset> partition(const Dataset& data, const PartitionSpec& spec) {
    data.validate();
    const Eigen::Index m = data.rows();
    const int n = spec.n_parties;
    if (n < 1) throw ConfigError("partition needs at least one party");
    if (!(spec.min_fraction > 0.0) || spec.min_fraction * n > 1.0 + 1e-12) {
        throw ConfigError("min_fraction must lie in (0, 1/n_parties]");
    }
    if (m < n) throw ConfigError("fewer rows than parties");
    if (spec.min_fraction * static_cast<double>(m) < 1.0 - 1e-12) {
        throw ConfigError("min_fraction * m must be at least 1");
    }
    if (data.dim() == 0) throw ConfigError("partition needs at least one feature");

    // ceil(min_fraction * m), guarding against 0.1 * 100 = 10.000000000000002.
    const auto lo = static_cast<Eigen::Index>(
        std::ceil(spec.min_fraction * static_cast<double>(m) - 1e-9));
    if (static_cast<Eigen::Index>(n) * lo > m) {
        throw ConfigError("minimum block size " + std::to_string(lo) + " x " + std::to_string(n) +
                          " parties exceeds " + std::to_string(m) + " rows");
    }

    auto feature_eng = rng::engine(spec.seed, "partition.feature");
    const auto a = std::uniform_int_distribution<Eigen::Index>(0, data.dim() - 1)(feature_eng);
    auto pivot_eng = rng::engine(spec.seed, "partition.pivot");
    const auto pivot_row = std::uniform_int_distribution<Eigen::Index>(0, m - 1)(pivot_eng);

    // One partition pass around the pivot's feature-a value: strictly
    // smaller values move before it, everything else after.  Only the
    // pivot ends at its sorted position.
    std::vector<Eigen::Index> order(m);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const double pivot_value = data.inputs(pivot_row, a);
    std::swap(order[pivot_row], order[m - 1]);
    Eigen::Index store = 0;
    for (Eigen::Index k = 0; k + 1 < m; ++k) {
        if (data.inputs(order[k], a) < pivot_value) std::swap(order[k], order[store++]);
    }
    std::swap(order[store], order[m - 1]);

    auto cuts_eng = rng::engine(spec.seed, "partition.cuts");
    const auto sizes = draw_block_sizes(m, n, lo, cuts_eng);

    std::vector<Dataset> blocks;
    blocks.reserve(n);
    Eigen::Index at = 0;
    for (int b = 0; b < n; ++b) {
        Dataset block{Eigen::MatrixXd(sizes[b], data.dim()), Eigen::VectorXd(sizes[b])};
        for (Eigen::Index r = 0; r < sizes[b]; ++r) {
            block.inputs.row(r) = data.inputs.row(order[at]);
            block.outputs[r] = data.outputs[order[at]];
            ++at;
        }
        blocks.push_back(std::move(block));
    }
    return blocks;
}

Dataset filter_by_feature_range(const Dataset& data, int feature, double lo, double hi) {
    data.validate();
    if (feature < 0 || feature >= data.dim()) throw ConfigError("feature index out of range");
    if (lo > hi) throw ConfigError("feature range is empty (lo > hi)");
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const double x = data.inputs(i, feature);
        if (x >= lo && x <= hi) keep.push_back(i);
    }
    Dataset out{Eigen::MatrixXd(keep.size(), data.dim()), Eigen::VectorXd(keep.size())};
    for (std::size_t r = 0; r < keep.size(); ++r) {
        out.inputs.row(r) = data.inputs.row(keep[r]);
        out.outputs[r] = data.outputs[keep[r]];
    }
    return out;
}

std::pair<Dataset, Dataset> holdout_split(const Dataset& data, double test_fraction,
                                          std::uint64_t seed) {
    data.validate();
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
        throw ConfigError("test fraction must lie in [0, 1]");
    }
    const Eigen::Index m = data.rows();
    const auto test_count = static_cast<Eigen::Index>(
        std::llround(test_fraction * static_cast<double>(m)));

    std::vector<Eigen::Index> order(m);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    auto eng = rng::engine(seed, "holdout");
    for (Eigen::Index k = m - 1; k > 0; --k) {
        std::uniform_int_distribution<Eigen::Index> pick(0, k);
        std::swap(order[k], order[pick(eng)]);
    }
    std::vector<Eigen::Index> test_rows(order.begin(), order.begin() + test_count);
    std::vector<Eigen::Index> train_rows(order.begin() + test_count, order.end());
    // Keep original row order inside each side.
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());

    auto take = [&](const std::vector<Eigen::Index>& rows) {
        Dataset out{Eigen::MatrixXd(rows.size(), data.dim()), Eigen::VectorXd(rows.size())};
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out.inputs.row(r) = data.inputs.row(rows[r]);
            out.outputs[r] = data.outputs[rows[r]];
        }
        return out;
    };
    return {take(train_rows), take(test_rows)};
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    if (schema.target_column < 0) throw ConfigError("CSV schema needs a target column");
    if (schema.feature_columns.empty()) {
        throw ConfigError("CSV schema needs at least one feature column");
    }
    for (int c : schema.feature_columns) {
        if (c < 0) throw ConfigError("CSV feature column indices must be non-negative");
    }

    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV file: " + path);

    int max_col = schema.target_column;
    for (int c : schema.feature_columns) max_col = std::max(max_col, c);

    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    bool skipped_header = !schema.header;
    std::vector<std::string> fields;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        fields.clear();
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (static_cast<int>(fields.size()) <= max_col) {
            throw IoError(path + ":" + std::to_string(line_no) + ": row has " +
                          std::to_string(fields.size()) + " columns but the schema needs column " +
                          std::to_string(max_col));
        }
        std::vector<double> row;
        row.reserve(schema.feature_columns.size() + 1);
        auto cell = [&](int col) {
            double value = 0.0;
            if (!parse_double(fields[col], value)) {
                throw IoError(path + ":" + std::to_string(line_no) + ": column " +
                              std::to_string(col) + ": cannot parse '" + fields[col] +
                              "' as a number");
            }
            return value;
        };
        for (int c : schema.feature_columns) row.push_back(cell(c));
        row.push_back(cell(schema.target_column));
        rows.push_back(std::move(row));
    }

    const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index d = static_cast<Eigen::Index>(schema.feature_columns.size());
    Dataset out{Eigen::MatrixXd(m, d), Eigen::VectorXd(m)};
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) out.inputs(i, j) = rows[i][j];
        out.outputs[i] = rows[i][d];
    }
    return out;
}

void write_csv(const std::string& path, const Dataset& data) {
    data.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write CSV file: " + path);
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << "x" << j << ",";
    out << "y\n";
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.dim(); ++j) {
            out << format_double(data.inputs(i, j)) << ",";
        }
        out << format_double(data.outputs[i]) << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace covalue
