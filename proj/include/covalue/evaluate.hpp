#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "covalue/dataset.hpp"
#include "covalue/game.hpp"
#include "covalue/models.hpp"
#include "covalue/realize.hpp"

namespace covalue {

// Mean negative log predictive probability over the test points:
// (1/m) sum_i 0.5 (log(2 pi s2_i) + (mu_i - y_i)^2 / s2_i).
double mnlp(const PredictiveDistribution& pred, const Eigen::VectorXd& test_outputs);

struct EvaluationRecord {
    int party = -1;
    int realization = 0;
    double r_i = 0.0;
    double v_i = 0.0;
    double v_n = 0.0;
    double ig_improvement = 0.0;      // r_i - v_i
    double ig_max_improvement = 0.0;  // v_N - v_i
    double mnlp_own = 0.0;            // trained on the party's data alone
    double mnlp_reward = 0.0;         // trained on the noisy reward set
    double mnlp_grand = 0.0;          // trained on everything, no noise
    double mnlp_improvement = 0.0;      // mnlp_own - mnlp_reward
    double mnlp_max_improvement = 0.0;  // mnlp_own - mnlp_grand
};

struct PartyAggregate {
    int party = -1;
    double mnlp_reward_mean = 0.0;
    double mnlp_reward_ci = 0.0;  // 1.96 * standard error across realizations
    double mnlp_improvement_mean = 0.0;
    double mnlp_improvement_ci = 0.0;
};

struct EvaluationReport {
    std::vector<EvaluationRecord> records;  // parties x realizations
    std::vector<PartyAggregate> aggregates;
    double v_n = 0.0;
    double mnlp_grand = 0.0;
    int realizations = 0;
};

// For every party and realization index: sample the party's noisy
// training set (realization r reuses the stream keyed by (seed, r), so
// the draws match across different allocations), fit, and score MNLP on
// the test set.  Baselines per party: own-data-only and grand-no-noise.
// Pairs run in parallel; the serial variant is the reference
// implementation for equivalence tests and benchmarks.
EvaluationReport evaluate_allocation(const ModelSpec& model, std::span<const Dataset> parties,
                                     const RealizationPlan& plan, const Dataset& test,
                                     int realizations, std::uint64_t seed);
EvaluationReport evaluate_allocation_serial(const ModelSpec& model,
                                            std::span<const Dataset> parties,
                                            const RealizationPlan& plan, const Dataset& test,
                                            int realizations, std::uint64_t seed);

// Alternative game: v'(C) = MNLP_empty - MNLP_C on a held-out validation
// set, with MNLP_empty from the prior predictive.  Unlike information
// gain this need not be monotone or submodular.
CharacteristicFunction mnlp_characteristic_function(const ModelSpec& model,
                                                    std::span<const Dataset> parties,
                                                    const Dataset& validation);

struct NormalizedRow {
    int party = -1;
    double v_share = 0.0;      // v_i / sum_j v_j
    double v_alt_share = 0.0;  // same under the alternative game
    double phi_norm = 0.0;     // phi_i / v_N
    double phi_alt_norm = 0.0;
    // A flag per column; false marks a zero denominator (value is 0).
    bool v_share_valid = true;
    bool v_alt_share_valid = true;
    bool phi_norm_valid = true;
    bool phi_alt_norm_valid = true;
};

std::vector<NormalizedRow> normalized_comparison(const CharacteristicFunction& cf_ig,
                                                 const CharacteristicFunction& cf_alt,
                                                 const ShapleyVector& shapley_ig,
                                                 const ShapleyVector& shapley_alt);

}  // namespace covalue
