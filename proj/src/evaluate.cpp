#include "covalue/evaluate.hpp"

#include <cmath>
#include <exception>
#include <numbers>
#include <string>

#include "covalue/rng.hpp"

namespace covalue {

double mnlp(const PredictiveDistribution& pred, const Eigen::VectorXd& test_outputs) {
    if (pred.means.size() != test_outputs.size() || pred.variances.size() != test_outputs.size()) {
        throw ConfigError("predictive distribution and test outputs disagree on length");
    }
    const Eigen::Index m = test_outputs.size();
    if (m == 0) throw ConfigError("MNLP needs at least one test point");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double s2 = pred.variances[i];
        if (!(s2 > 0.0)) throw ConfigError("MNLP needs strictly positive predictive variances");
        const double resid = pred.means[i] - test_outputs[i];
        acc += 0.5 * (std::log(2.0 * std::numbers::pi * s2) + resid * resid / s2);
    }
    return acc / static_cast<double>(m);
}

namespace {

EvaluationReport evaluate_impl(const ModelSpec& model, std::span<const Dataset> parties,
                               const RealizationPlan& plan, const Dataset& test,
                               int realizations, std::uint64_t seed, bool parallel) {
    const int n = static_cast<int>(parties.size());
    if (static_cast<int>(plan.entries.size()) != n) {
        throw ConfigError("realization plan covers " + std::to_string(plan.entries.size()) +
                          " parties but " + std::to_string(n) + " datasets were given");
    }
    if (realizations < 1) throw ConfigError("need at least one realization");
    test.validate();
    if (test.rows() == 0) throw ConfigError("evaluation needs a non-empty test set");
    model.validate();

    const double sigma2 = model.noise_variance();
    const Dataset joined = concat_coalition(parties, Coalition::grand(n).members);
    const double v_n = information_gain(model, joined.inputs);
    const double m_grand = mnlp(
        posterior_predict(model, joined.inputs, joined.outputs,
                          homoscedastic_noise(model, joined.rows()), test.inputs),
        test.outputs);

    std::vector<double> v_own(n), m_own(n);
    for (int i = 0; i < n; ++i) {
        v_own[i] = information_gain(model, parties[i].inputs);
        m_own[i] = mnlp(posterior_predict(model, parties[i].inputs, parties[i].outputs,
                                          homoscedastic_noise(model, parties[i].rows()),
                                          test.inputs),
                        test.outputs);
    }

    EvaluationReport report;
    report.v_n = v_n;
    report.mnlp_grand = m_grand;
    report.realizations = realizations;
    report.records.resize(static_cast<std::size_t>(n) * realizations);

    std::exception_ptr failure = nullptr;
    int failed_party = -1, failed_realization = -1;
    const std::int64_t units = static_cast<std::int64_t>(n) * realizations;

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::int64_t unit = 0; unit < units; ++unit) {
        const int party = static_cast<int>(unit / realizations);
        const int r = static_cast<int>(unit % realizations);
        try {
            const auto& entry = plan.entries[party];
            const std::uint64_t realization_seed =
                rng::stream_key(seed, "evaluate.realization", static_cast<std::uint64_t>(r));
            const NoisyTrainingSet nts =
                sample_noisy_outputs(parties, party, entry.eta, realization_seed, sigma2);
            const double m_reward =
                mnlp(posterior_predict(model, nts.inputs, nts.outputs, nts.noise, test.inputs),
                     test.outputs);

            EvaluationRecord& rec = report.records[unit];
            rec.party = party;
            rec.realization = r;
            rec.r_i = entry.target;
            rec.v_i = v_own[party];
            rec.v_n = v_n;
            rec.ig_improvement = entry.target - v_own[party];
            rec.ig_max_improvement = v_n - v_own[party];
            rec.mnlp_own = m_own[party];
            rec.mnlp_reward = m_reward;
            rec.mnlp_grand = m_grand;
            rec.mnlp_improvement = m_own[party] - m_reward;
            rec.mnlp_max_improvement = m_own[party] - m_grand;
        } catch (...) {
#pragma omp critical(covalue_evaluate_failure)
            if (!failure) {
                failure = std::current_exception();
                failed_party = party;
                failed_realization = r;
            }
        }
    }
    if (failure) {
        try {
            std::rethrow_exception(failure);
        } catch (const Error& e) {
            const std::string msg = "party " + std::to_string(failed_party) + ", realization " +
                                    std::to_string(failed_realization) + ": " + e.what();
            if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg);
            if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
            throw Error(msg);
        }
    }

    report.aggregates.resize(n);
    for (int i = 0; i < n; ++i) {
        double sum = 0.0, sumsq = 0.0;
        for (int r = 0; r < realizations; ++r) {
            const double x = report.records[static_cast<std::size_t>(i) * realizations + r]
                                 .mnlp_reward;
            sum += x;
            sumsq += x * x;
        }
        const double count = realizations;
        const double mean = sum / count;
        double se = 0.0;
        if (realizations > 1) {
            const double var = std::max(0.0, (sumsq - count * mean * mean) / (count - 1.0));
            se = std::sqrt(var / count);
        }
        PartyAggregate& agg = report.aggregates[i];
        agg.party = i;
        agg.mnlp_reward_mean = mean;
        agg.mnlp_reward_ci = 1.96 * se;
        agg.mnlp_improvement_mean = m_own[i] - mean;
        agg.mnlp_improvement_ci = 1.96 * se;
    }
    return report;
}

}  // namespace

EvaluationReport evaluate_allocation(const ModelSpec& model, std::span<const Dataset> parties,
                                     const RealizationPlan& plan, const Dataset& test,
                                     int realizations, std::uint64_t seed) {
    return evaluate_impl(model, parties, plan, test, realizations, seed, true);
}

EvaluationReport evaluate_allocation_serial(const ModelSpec& model,
                                            std::span<const Dataset> parties,
                                            const RealizationPlan& plan, const Dataset& test,
                                            int realizations, std::uint64_t seed) {
    return evaluate_impl(model, parties, plan, test, realizations, seed, false);
}

CharacteristicFunction mnlp_characteristic_function(const ModelSpec& model,
                                                    std::span<const Dataset> parties,
                                                    const Dataset& validation) {
    const int n = static_cast<int>(parties.size());
    if (n < 1 || n > kMaxExactParties) {
        throw ConfigError("coalition enumeration supports 1.." +
                          std::to_string(kMaxExactParties) + " parties");
    }
    validation.validate();
    if (validation.rows() == 0) throw ConfigError("validation set must be non-empty");
    model.validate();

    const Eigen::MatrixXd no_inputs(0, model.input_dim());
    const Eigen::VectorXd no_outputs(0);
    const double m_empty = mnlp(
        posterior_predict(model, no_inputs, no_outputs, NoiseVector(0), validation.inputs),
        validation.outputs);

    const auto count = std::size_t{1} << n;
    std::vector<double> values(count, 0.0);
    std::exception_ptr failure = nullptr;

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t mask = 1; mask < static_cast<std::int64_t>(count); ++mask) {
        try {
            const Dataset joined = concat_coalition(parties, static_cast<CoalitionMask>(mask));
            const double m_c = mnlp(
                posterior_predict(model, joined.inputs, joined.outputs,
                                  homoscedastic_noise(model, joined.rows()), validation.inputs),
                validation.outputs);
            values[mask] = m_empty - m_c;
        } catch (...) {
#pragma omp critical(covalue_mnlp_cf_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    return CharacteristicFunction(n, std::move(values));
}

std::vector<NormalizedRow> normalized_comparison(const CharacteristicFunction& cf_ig,
                                                 const CharacteristicFunction& cf_alt,
                                                 const ShapleyVector& shapley_ig,
                                                 const ShapleyVector& shapley_alt) {
    const int n = cf_ig.n();
    if (cf_alt.n() != n || shapley_ig.n() != n || shapley_alt.n() != n) {
        throw ConfigError("normalized comparison needs matching party counts");
    }

    double v_sum = 0.0, alt_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        v_sum += cf_ig.singleton_value(i);
        alt_sum += cf_alt.singleton_value(i);
    }
    const double v_n = cf_ig.grand_value();
    const double alt_n = cf_alt.grand_value();

    std::vector<NormalizedRow> rows(n);
    for (int i = 0; i < n; ++i) {
        NormalizedRow& row = rows[i];
        row.party = i;
        auto fill = [](double num, double den, double& out, bool& valid) {
            if (den == 0.0) {
                out = 0.0;
                valid = false;
            } else {
                out = num / den;
                valid = true;
            }
        };
        fill(cf_ig.singleton_value(i), v_sum, row.v_share, row.v_share_valid);
        fill(cf_alt.singleton_value(i), alt_sum, row.v_alt_share, row.v_alt_share_valid);
        fill(shapley_ig.phi[i], v_n, row.phi_norm, row.phi_norm_valid);
        fill(shapley_alt.phi[i], alt_n, row.phi_alt_norm, row.phi_alt_norm_valid);
    }
    return rows;
}

}  // namespace covalue
