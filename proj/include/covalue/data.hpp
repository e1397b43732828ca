#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covalue/dataset.hpp"

namespace covalue {

// Friedman's six-feature benchmark: features i.i.d. uniform on [0, 1],
// response 10 sin(pi x0 x1) + 20 (x2 - 0.5)^2 + 10 x3 + 5 x4 (+ unit
// Gaussian noise; feature 5 is a decoy).
double friedman_response(const Eigen::RowVectorXd& x);
Dataset friedman_generate(Eigen::Index m, std::uint64_t seed);

struct StandardizeWhat {
    bool inputs = true;
    bool outputs = true;
};

struct StandardizationParams {
    Eigen::VectorXd input_mean;  // empty when inputs were left alone
    Eigen::VectorXd input_std;
    double output_mean = 0.0;
    double output_std = 1.0;
    bool inputs = false;
    bool outputs = false;
};

// Center/scale the selected columns to mean 0, standard deviation 1
// (population convention, divisor m).  Constant columns are rejected.
std::pair<Dataset, StandardizationParams> standardize(const Dataset& data, StandardizeWhat what);

// Apply previously fitted parameters to new data (e.g. a test split).
Dataset apply_standardization(const StandardizationParams& params, const Dataset& data);
Dataset invert_standardization(const StandardizationParams& params, const Dataset& data);

struct PartitionSpec {
    int n_parties = 1;
    double min_fraction = 0.0;  // every block gets >= ceil(min_fraction * m) rows
    std::uint64_t seed = 0;
};

// Split rows into n consecutive blocks after one quickselect-style
// partition pass along a randomly chosen feature: pick feature a and
// pivot row d (both seeded), run a single partition pass so the pivot
// lands at its sorted rank with smaller values before it and larger
// after, then cut into blocks of random sizes respecting the minimum.
// The union of the blocks is exactly the input multiset.
std::vector<Dataset> partition(const Dataset& data, const PartitionSpec& spec);

// Rows whose chosen feature lies in [lo, hi], order preserved.
Dataset filter_by_feature_range(const Dataset& data, int feature, double lo, double hi);

// Seeded split into (train, test) with the given test fraction; rows are
// assigned by a shuffled index permutation.
std::pair<Dataset, Dataset> holdout_split(const Dataset& data, double test_fraction,
                                          std::uint64_t seed);

struct CsvSchema {
    std::vector<int> feature_columns;
    int target_column = -1;
    bool header = false;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);

// Writes columns x0..x{d-1},y with a header row.  Doubles are printed in
// shortest round-trip form, so load_csv reads back bit-identical values.
void write_csv(const std::string& path, const Dataset& data);

}  // namespace covalue
