#include "covalue/game.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <unordered_map>

#include "covalue/rng.hpp"

namespace covalue {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string party_msg(const char* text, int party) {
    return std::string(text) + " (party " + std::to_string(party) + ")";
}

}  // namespace

std::vector<int> Coalition::member_list() const {
    std::vector<int> out;
    for (int i = 0; i < n; ++i) {
        if (contains(i)) out.push_back(i);
    }
    return out;
}

void Coalition::validate() const {
    if (n < 1 || n > kMaxParties) {
        throw ConfigError("party count must lie in [1, " + std::to_string(kMaxParties) + "]");
    }
    if (members >> n) {
        throw ConfigError("coalition mask has bits beyond party count");
    }
}

CharacteristicFunction::CharacteristicFunction(int n, std::vector<double> values)
    : n_(n), values_(std::move(values)) {
    if (n_ < 1 || n_ > kMaxParties) {
        throw ConfigError("party count must lie in [1, " + std::to_string(kMaxParties) + "]");
    }
    if (values_.size() != (std::size_t{1} << n_)) {
        throw ConfigError("characteristic function needs exactly 2^n values, got " +
                          std::to_string(values_.size()));
    }
    if (values_[0] != 0.0) {
        throw ConfigError("empty coalition must have value 0");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw ConfigError("coalition values must be finite");
    }
}

ShapleyVector exact_shapley(const CharacteristicFunction& cf) {
    const int n = cf.n();
    if (n > kMaxExactParties) {
        throw EnumerationLimitError(
            "exact Shapley is limited to " + std::to_string(kMaxExactParties) +
            " parties; use sampled_shapley instead");
    }

    // weight for a coalition of size s: s!(n-s-1)!/n! = 1/(n * binom(n-1, s)).
    std::vector<double> weight(n);
    for (int s = 0; s < n; ++s) {
        double binom = 1.0;  // binom(n-1, s), exact for n <= 20
        for (int k = 1; k <= s; ++k) binom = binom * (n - s + k - 1) / k;
        weight[s] = 1.0 / (n * binom);
    }

    const auto& v = cf.values();
    const CoalitionMask full = cf.grand_mask();
    std::vector<double> phi(n, 0.0);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const CoalitionMask bit = 1u << i;
        double acc = 0.0;
        for (CoalitionMask s = 0; s <= full; ++s) {
            if (s & bit) continue;
            acc += weight[std::popcount(s)] * (v[s | bit] - v[s]);
        }
        phi[i] = acc;
    }

    const double v_n = cf.grand_value();
    const double total = std::accumulate(phi.begin(), phi.end(), 0.0);
    if (std::abs(total - v_n) > 1e-9 * std::max(1.0, std::abs(v_n))) {
        throw NumericError("Shapley efficiency residual " + std::to_string(total - v_n) +
                           " exceeds tolerance");
    }

    ShapleyVector out;
    out.phi = std::move(phi);
    out.phi_star = *std::max_element(out.phi.begin(), out.phi.end());
    out.method = ShapleyMethod::exact;
    return out;
}

namespace {

// Permutations are drawn in batches of this size; each batch owns an
// engine derived from (seed, batch index), making the estimate
// independent of how batches are scheduled across threads.
constexpr std::uint64_t kPermutationBatch = 256;

class CoalitionMemo {
  public:
    explicit CoalitionMemo(const CoalitionValueFn& fn) : fn_(fn) {}

    double operator()(CoalitionMask mask) {
        {
            std::lock_guard lock(mu_);
            auto it = cache_.find(mask);
            if (it != cache_.end()) return it->second;
        }
        // Evaluate outside the lock; the oracle is deterministic, so a
        // duplicate computation by a racing thread stores the same value.
        const double value = fn_(mask);
        std::lock_guard lock(mu_);
        return cache_.emplace(mask, value).first->second;
    }

  private:
    const CoalitionValueFn& fn_;
    std::unordered_map<CoalitionMask, double> cache_;
    std::mutex mu_;
};

ShapleyVector sampled_shapley_impl(const CoalitionValueFn& value_of, int n,
                                   std::uint64_t samples, std::uint64_t seed,
                                   bool parallel) {
    if (n < 1 || n > kMaxParties) {
        throw ConfigError("party count must lie in [1, " + std::to_string(kMaxParties) + "]");
    }
    if (samples < 1) throw ConfigError("sampled Shapley needs at least one permutation");
    if (!value_of) throw ConfigError("coalition value oracle is empty");

    const std::uint64_t batches = (samples + kPermutationBatch - 1) / kPermutationBatch;
    std::vector<std::vector<double>> batch_sum(batches, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> batch_sumsq(batches, std::vector<double>(n, 0.0));

    CoalitionMemo memo(value_of);
    std::exception_ptr failure = nullptr;

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(batches); ++b) {
        try {
            const std::uint64_t begin = static_cast<std::uint64_t>(b) * kPermutationBatch;
            const std::uint64_t count = std::min(kPermutationBatch, samples - begin);
            auto eng = rng::engine(seed, "shapley.permutation-batch",
                                   static_cast<std::uint64_t>(b));
            std::vector<int> perm(n);
            auto& sums = batch_sum[b];
            auto& sumsqs = batch_sumsq[b];
            for (std::uint64_t t = 0; t < count; ++t) {
                std::iota(perm.begin(), perm.end(), 0);
                for (int k = n - 1; k > 0; --k) {
                    std::uniform_int_distribution<int> pick(0, k);
                    std::swap(perm[k], perm[pick(eng)]);
                }
                CoalitionMask mask = 0;
                double prev = memo(0);
                for (int idx : perm) {
                    mask |= 1u << idx;
                    const double cur = memo(mask);
                    const double marginal = cur - prev;
                    sums[idx] += marginal;
                    sumsqs[idx] += marginal * marginal;
                    prev = cur;
                }
            }
        } catch (...) {
#pragma omp critical(covalue_sampled_shapley_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    // Reduce in batch order so the result does not depend on scheduling.
    std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
    for (std::uint64_t b = 0; b < batches; ++b) {
        for (int i = 0; i < n; ++i) {
            sum[i] += batch_sum[b][i];
            sumsq[i] += batch_sumsq[b][i];
        }
    }

    ShapleyVector out;
    out.phi.resize(n);
    out.std_error.resize(n);
    const double s = static_cast<double>(samples);
    for (int i = 0; i < n; ++i) {
        const double mean = sum[i] / s;
        out.phi[i] = mean;
        double var = 0.0;
        if (samples > 1) {
            var = std::max(0.0, (sumsq[i] - s * mean * mean) / (s - 1.0));
        }
        out.std_error[i] = std::sqrt(var / s);
    }
    out.phi_star = *std::max_element(out.phi.begin(), out.phi.end());
    out.method = ShapleyMethod::sampled;
    out.sample_count = samples;
    return out;
}

}  // namespace

ShapleyVector sampled_shapley(const CoalitionValueFn& value_of, int n,
                              std::uint64_t samples, std::uint64_t seed) {
    return sampled_shapley_impl(value_of, n, samples, seed, true);
}

ShapleyVector sampled_shapley_serial(const CoalitionValueFn& value_of, int n,
                                     std::uint64_t samples, std::uint64_t seed) {
    return sampled_shapley_impl(value_of, n, samples, seed, false);
}

CoalitionMask dominated_set(const std::vector<double>& phi, int party) {
    CoalitionMask mask = 0;
    for (std::size_t j = 0; j < phi.size(); ++j) {
        if (phi[j] <= phi[party]) mask |= 1u << j;
    }
    return mask;
}

RewardAllocation rho_shapley_rewards(const ShapleyVector& shapley, double v_n, double rho) {
    if (!std::isfinite(rho) || rho < 0.0 || rho > 1.0) {
        throw ConfigError("rho must lie in [0, 1]");
    }
    if (!std::isfinite(v_n) || v_n < 0.0) {
        throw PremiseError("grand-coalition value must be finite and non-negative");
    }
    const int n = shapley.n();
    if (n < 1) throw ConfigError("empty Shapley vector");
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(shapley.phi[i]) || shapley.phi[i] < 0.0) {
            throw PremiseError(party_msg("Shapley values must be non-negative", i));
        }
    }

    RewardAllocation out;
    out.rho = rho;
    out.v_n = v_n;
    out.rewards.assign(n, 0.0);
    out.dominated_sets.resize(n);
    for (int i = 0; i < n; ++i) out.dominated_sets[i] = dominated_set(shapley.phi, i);

    const double star = *std::max_element(shapley.phi.begin(), shapley.phi.end());
    if (star <= 0.0) {
        if (v_n == 0.0) return out;  // degenerate game, everything worth nothing
        throw InconsistentGameError("all Shapley values are zero but v_N > 0");
    }

    for (int i = 0; i < n; ++i) {
        if (rho == 0.0) {
            out.rewards[i] = v_n;  // includes phi_i = 0: 0^0 := 1
        } else if (shapley.phi[i] == star) {
            out.rewards[i] = v_n;
        } else {
            out.rewards[i] = std::pow(shapley.phi[i] / star, rho) * v_n;
        }
    }
    return out;
}

namespace {

// Shared core of the two thresholds; `target(i)` supplies the coalition
// value the party's reward must reach (v_i or v(C_i)).
template <typename TargetFn>
double threshold_impl(const CharacteristicFunction& cf, const ShapleyVector& shapley,
                      TargetFn&& target, const char* target_name) {
    if (cf.n() != shapley.n()) {
        throw ConfigError("characteristic function and Shapley vector disagree on party count");
    }
    const double v_n = cf.grand_value();
    if (v_n < 0.0) throw PremiseError("characteristic function must be non-negative");
    if (v_n == 0.0) return kInf;

    const auto& phi = shapley.phi;
    const double star = *std::max_element(phi.begin(), phi.end());
    if (star <= 0.0) throw InconsistentGameError("all Shapley values are zero but v_N > 0");

    double best = kInf;
    for (int i = 0; i < cf.n(); ++i) {
        const double bound = target(i);
        if (phi[i] <= 0.0) {
            if (bound > 0.0) {
                throw InconsistentGameError(party_msg(
                    std::string("zero Shapley value but positive ").append(target_name).c_str(), i));
            }
            continue;  // vacuous constraint
        }
        // Parties tied with the maximum get v_N at every rho.
        if (star - phi[i] <= kAxiomTol * std::max(1.0, star)) continue;
        if (bound <= 0.0) continue;  // r_i >= 0 holds trivially
        best = std::min(best, std::log(bound / v_n) / std::log(phi[i] / star));
    }
    return best;
}

}  // namespace

double rho_r_threshold(const CharacteristicFunction& cf, const ShapleyVector& shapley) {
    return threshold_impl(
        cf, shapley, [&](int i) { return cf.singleton_value(i); }, "standalone value");
}

double rho_s_threshold(const CharacteristicFunction& cf, const ShapleyVector& shapley) {
    return threshold_impl(
        cf, shapley, [&](int i) { return cf.value(dominated_set(shapley.phi, i)); },
        "dominated-set value");
}

IncentiveReport check_incentives(const CharacteristicFunction& cf,
                                 const RewardAllocation& rewards) {
    const int n = cf.n();
    if (rewards.n() != n) {
        throw ConfigError("characteristic function and allocation disagree on party count");
    }
    const auto& r = rewards.rewards;
    const double v_n = cf.grand_value();

    IncentiveReport rep;
    rep.r1_nonnegativity = true;
    rep.r2_feasibility = true;
    rep.r4_individual_rationality = true;
    rep.stable = true;
    rep.r5_sufficient = true;

    for (int i = 0; i < n; ++i) {
        rep.group_welfare += r[i];
        if (r[i] < -kAxiomTol) {
            rep.r1_nonnegativity = false;
            rep.violations.push_back({"R1", i, 1u << i, r[i], 0.0});
        }
        if (r[i] > v_n + kAxiomTol) {
            rep.r2_feasibility = false;
            rep.violations.push_back({"R2", i, 1u << i, r[i], v_n});
        }
        const double v_i = cf.singleton_value(i);
        if (r[i] < v_i - kAxiomTol) {
            rep.r4_individual_rationality = false;
            rep.violations.push_back({"R4", i, 1u << i, r[i], v_i});
        }
    }

    rep.r3_weak_efficiency = false;
    for (int i = 0; i < n && !rep.r3_weak_efficiency; ++i) {
        if (std::abs(r[i] - v_n) <= kAxiomTol) rep.r3_weak_efficiency = true;
    }
    if (!rep.r3_weak_efficiency) {
        rep.violations.push_back(
            {"R3", -1, cf.grand_mask(), *std::max_element(r.begin(), r.end()), v_n});
    }

    // Definition-3 stability, exhaustively: some member of every coalition
    // must already hold a reward at least as valuable as the coalition.
    const CoalitionMask full = cf.grand_mask();
    for (CoalitionMask c = 1; c <= full && c != 0; ++c) {
        const double v_c = cf.value(c);
        double best = -kInf;
        for (int i = 0; i < n; ++i) {
            if ((c >> i) & 1u) best = std::max(best, r[i]);
        }
        if (best < v_c - kAxiomTol) {
            rep.stable = false;
            rep.violations.push_back({"stability", -1, c, best, v_c});
        }
    }

    for (int i = 0; i < n; ++i) {
        const CoalitionMask c_i = rewards.dominated_sets.size() == static_cast<std::size_t>(n)
                                      ? rewards.dominated_sets[i]
                                      : dominated_set(r, i);
        const double bound = cf.value(c_i);
        if (r[i] < bound - kAxiomTol) {
            rep.r5_sufficient = false;
            rep.violations.push_back({"R5-sufficient", i, c_i, r[i], bound});
        }
    }

    return rep;
}

FairnessReport check_fairness_axioms(const CharacteristicFunction& cf,
                                     const std::vector<double>& rewards) {
    const int n = cf.n();
    if (static_cast<int>(rewards.size()) != n) {
        throw ConfigError("reward vector length must equal party count");
    }
    if (n > 12) {
        throw EnumerationLimitError("fairness axiom checks enumerate coalition pairs; n <= 12");
    }
    const auto& v = cf.values();
    const CoalitionMask full = cf.grand_mask();

    FairnessReport rep;
    rep.f1_uselessness = true;
    rep.f2_symmetry = true;
    rep.f3_strict_desirability = true;

    // F1: a party whose marginal contribution vanishes everywhere earns 0.
    for (int i = 0; i < n; ++i) {
        const CoalitionMask bit = 1u << i;
        bool null_party = true;
        for (CoalitionMask c = 0; c <= full && null_party; ++c) {
            if (c & bit) continue;
            if (std::abs(v[c | bit] - v[c]) > kAxiomTol) null_party = false;
        }
        if (!null_party) continue;
        ++rep.f1_premises;
        if (std::abs(rewards[i]) > kAxiomTol) {
            rep.f1_uselessness = false;
            rep.violations.push_back({"F1", i, -1, rewards[i], 0.0});
        }
    }

    // F2: parties with identical marginals everywhere earn the same.
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const CoalitionMask bi = 1u << i, bj = 1u << j;
            bool twins = true;
            for (CoalitionMask c = 0; c <= full && twins; ++c) {
                if (c & (bi | bj)) continue;
                if (std::abs(v[c | bi] - v[c | bj]) > kAxiomTol) twins = false;
            }
            if (!twins) continue;
            ++rep.f2_premises;
            if (std::abs(rewards[i] - rewards[j]) > kAxiomTol) {
                rep.f2_symmetry = false;
                rep.violations.push_back({"F2", i, j, rewards[i], rewards[j]});
            }
        }
    }

    // F3: weak domination with at least one strict coalition forces a
    // strictly larger reward.
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const CoalitionMask bi = 1u << i, bj = 1u << j;
            bool weak = true, strict = false;
            for (CoalitionMask c = 0; c <= full && weak; ++c) {
                if (c & (bi | bj)) continue;
                const double gap = v[c | bi] - v[c | bj];
                if (gap < -kAxiomTol) weak = false;
                if (gap > kAxiomTol) strict = true;
            }
            if (!weak || !strict) continue;
            ++rep.f3_premises;
            if (!(rewards[i] > rewards[j] + kAxiomTol)) {
                rep.f3_strict_desirability = false;
                rep.violations.push_back({"F3", i, j, rewards[i], rewards[j]});
            }
        }
    }

    return rep;
}

namespace {

// Shared hypothesis of F4 and the party-monotonicity property: the games
// agree wherever the party is absent and weakly increase (strictly
// somewhere) wherever it is present.
void validate_game_pair(const CharacteristicFunction& cf, const CharacteristicFunction& cf2,
                        int party) {
    if (cf.n() != cf2.n()) throw PremiseError("game pair must share the party count");
    if (party < 0 || party >= cf.n()) throw ConfigError("party index out of range");
    const CoalitionMask bit = 1u << party;
    const CoalitionMask full = cf.grand_mask();
    bool any_strict = false;
    for (CoalitionMask c = 0; c <= full; ++c) {
        const double before = cf.value(c), after = cf2.value(c);
        if (!(c & bit)) {
            if (std::abs(after - before) > kAxiomTol) {
                throw PremiseError("game pair differs on a coalition excluding the party");
            }
        } else {
            if (after < before - kAxiomTol) {
                throw PremiseError("second game decreases a coalition containing the party");
            }
            if (after > before + kAxiomTol) any_strict = true;
        }
    }
    if (!any_strict) {
        throw PremiseError("game pair shows no strict increase for the party");
    }
}

}  // namespace

bool check_strict_monotonicity(const CharacteristicFunction& cf,
                               const CharacteristicFunction& cf2, int party,
                               double reward_before, double reward_after) {
    validate_game_pair(cf, cf2, party);
    if (!(cf2.grand_value() > reward_before)) {
        throw PremiseError("hypothesis needs v'_N above the party's old reward");
    }
    return reward_after > reward_before + kAxiomTol;
}

bool check_party_monotonicity(const CharacteristicFunction& cf,
                              const CharacteristicFunction& cf2, int party) {
    validate_game_pair(cf, cf2, party);
    const ShapleyVector before = exact_shapley(cf);
    const ShapleyVector after = exact_shapley(cf2);
    const double gain = after.phi[party] - before.phi[party];
    for (int j = 0; j < cf.n(); ++j) {
        if (j == party) continue;
        if (gain < after.phi[j] - before.phi[j] - kAxiomTol) return false;
    }
    return true;
}

StructureCheck check_monotone(const CharacteristicFunction& cf) {
    if (cf.n() > 12) {
        throw EnumerationLimitError("monotonicity check enumerates coalition pairs; n <= 12");
    }
    const auto& v = cf.values();
    const CoalitionMask full = cf.grand_mask();
    for (CoalitionMask c = 0; c <= full; ++c) {
        for (int i = 0; i < cf.n(); ++i) {
            const CoalitionMask bit = 1u << i;
            if (c & bit) continue;
            if (v[c | bit] < v[c] - kAxiomTol) {
                return {false, c, c | bit, i, v[c] - v[c | bit]};
            }
        }
    }
    return {};
}

StructureCheck check_submodular(const CharacteristicFunction& cf) {
    if (cf.n() > 12) {
        throw EnumerationLimitError("submodularity check enumerates nested pairs; n <= 12");
    }
    const auto& v = cf.values();
    const CoalitionMask full = cf.grand_mask();
    for (int i = 0; i < cf.n(); ++i) {
        const CoalitionMask bit = 1u << i;
        const CoalitionMask rest = full & ~bit;
        // Walk every superset, then every subset of that superset.
        for (CoalitionMask sup = rest;; sup = (sup - 1) & rest) {
            const double outer = v[sup | bit] - v[sup];
            for (CoalitionMask sub = sup;; sub = (sub - 1) & sup) {
                const double inner = v[sub | bit] - v[sub];
                if (inner < outer - kAxiomTol) {
                    return {false, sub, sup, i, outer - inner};
                }
                if (sub == 0) break;
            }
            if (sup == 0) break;
        }
    }
    return {};
}

}  // namespace covalue
