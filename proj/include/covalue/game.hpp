#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "covalue/errors.hpp"

namespace covalue {

// Coalitions are bitmasks: party 0 is bit 0.  A characteristic function
// stores its table indexed by the mask's integer value.
using CoalitionMask = std::uint32_t;

inline constexpr int kMaxParties = 24;

struct Coalition {
    CoalitionMask members = 0;
    int n = 0;

    static Coalition empty(int n) { return {0, n}; }
    static Coalition grand(int n) { return {static_cast<CoalitionMask>((1u << n) - 1u), n}; }
    static Coalition single(int party, int n) { return {static_cast<CoalitionMask>(1u << party), n}; }

    bool contains(int party) const { return (members >> party) & 1u; }
    int size() const { return std::popcount(members); }
    Coalition with(int party) const { return {members | (1u << party), n}; }
    Coalition without(int party) const { return {members & ~(1u << party), n}; }

    std::vector<int> member_list() const;
    void validate() const;  // throws ConfigError on out-of-range bits or n

    friend bool operator==(const Coalition&, const Coalition&) = default;
};

class CharacteristicFunction {
  public:
    // values[mask] for mask in [0, 2^n); values[0] must be 0 and every
    // entry finite.
    CharacteristicFunction(int n, std::vector<double> values);

    int n() const { return n_; }
    std::size_t coalition_count() const { return values_.size(); }
    CoalitionMask grand_mask() const { return static_cast<CoalitionMask>(values_.size() - 1); }

    double value(CoalitionMask members) const { return values_[members]; }
    double value(const Coalition& c) const { return values_[c.members]; }
    double grand_value() const { return values_.back(); }
    double singleton_value(int party) const { return values_[1u << party]; }

    const std::vector<double>& values() const { return values_; }

  private:
    int n_;
    std::vector<double> values_;
};

enum class ShapleyMethod { exact, sampled };

struct ShapleyVector {
    std::vector<double> phi;
    double phi_star = 0.0;
    ShapleyMethod method = ShapleyMethod::exact;
    // Sampled method only:
    std::uint64_t sample_count = 0;
    std::vector<double> std_error;

    int n() const { return static_cast<int>(phi.size()); }
};

struct RewardAllocation {
    double rho = 1.0;
    std::vector<double> rewards;
    double v_n = 0.0;
    // Thresholds are +infinity both when no constraint binds and when not
    // yet computed; the pipeline fills them via the *_threshold ops.
    double rho_r = std::numeric_limits<double>::infinity();
    double rho_s = std::numeric_limits<double>::infinity();
    // dominated_sets[i] = mask of {j : phi_j <= phi_i}, including i.
    std::vector<CoalitionMask> dominated_sets;

    int n() const { return static_cast<int>(rewards.size()); }
};

// phi_i = sum over S not containing i of |S|!(n-|S|-1)!/n! * (v(S+i) - v(S)).
// Weights are computed as 1/(n * binom(n-1, |S|)) with exact binomials so
// no factorial overflows double precision.  Throws EnumerationLimitError
// for n > 20; use sampled_shapley there.
ShapleyVector exact_shapley(const CharacteristicFunction& cf);

using CoalitionValueFn = std::function<double(CoalitionMask)>;

// Monte-Carlo Shapley over uniformly random permutations.  Permutations
// are drawn in fixed-size batches, each batch seeded from (seed, batch
// index), so the result is bit-identical however many threads execute the
// batches.  Coalition evaluations are memoized across permutations.
// std_error[i] is the standard error of the mean marginal contribution.
ShapleyVector sampled_shapley(const CoalitionValueFn& value_of, int n,
                              std::uint64_t samples, std::uint64_t seed);
ShapleyVector sampled_shapley_serial(const CoalitionValueFn& value_of, int n,
                                     std::uint64_t samples, std::uint64_t seed);

// r_i = (phi_i / phi_star)^rho * v_n.  rho = 0 gives every party v_n
// (0^0 := 1); rho > 0 gives parties with phi_i = 0 a zero reward.
// Fills rewards, v_n, rho and dominated_sets; thresholds are left at
// +infinity for the caller to fill.
RewardAllocation rho_shapley_rewards(const ShapleyVector& shapley, double v_n, double rho);

// Largest rho keeping every reward individually rational (r_i >= v_i):
// min_i log(v_i/v_N) / log(phi_i/phi_star).  Parties tied with phi_star
// are excluded (their reward is v_N for every rho), as are parties with
// v_i = 0 (vacuous constraint).  Returns +infinity when every party is
// excluded or v_N = 0.  May exceed 1.
double rho_r_threshold(const CharacteristicFunction& cf, const ShapleyVector& shapley);

// Largest rho guaranteeing stability via the sufficient condition
// r_i >= v(C_i) with C_i = {j : phi_j <= phi_i}.  Same exclusions as
// rho_r_threshold; <= rho_r_threshold on monotone games.
double rho_s_threshold(const CharacteristicFunction& cf, const ShapleyVector& shapley);

CoalitionMask dominated_set(const std::vector<double>& phi, int party);

struct IncentiveViolation {
    std::string constraint;  // "R1", "R2", "R3", "R4", "stability", "R5-sufficient"
    int party = -1;          // -1 when the witness is a coalition, not a party
    CoalitionMask coalition = 0;
    double reward = 0.0;  // offending value
    double bound = 0.0;   // the bound it had to meet
};

struct IncentiveReport {
    bool r1_nonnegativity = false;
    bool r2_feasibility = false;        // r_i <= v_N for every i
    bool r3_weak_efficiency = false;    // some r_i = v_N
    bool r4_individual_rationality = false;
    bool stable = false;                // every coalition C has i in C with r_i >= v_C
    bool r5_sufficient = false;         // r_i >= v(C_i) for every i (sufficient, not necessary)
    double group_welfare = 0.0;         // sum of r_i
    std::vector<IncentiveViolation> violations;

    bool all_required() const {
        return r1_nonnegativity && r2_feasibility && r3_weak_efficiency &&
               r4_individual_rationality && stable;
    }
};

// Exhaustive incentive audit (stability enumerates all 2^n coalitions).
// The sufficient stability condition uses rewards.dominated_sets when
// present; otherwise C_i is reconstructed from the reward ordering, which
// agrees with the phi ordering for any rho-Shapley allocation.
IncentiveReport check_incentives(const CharacteristicFunction& cf,
                                 const RewardAllocation& rewards);

struct FairnessViolation {
    std::string axiom;  // "F1", "F2", "F3"
    int party_i = -1;
    int party_j = -1;  // -1 for F1
    double reward_i = 0.0;
    double reward_j = 0.0;
};

struct FairnessReport {
    bool f1_uselessness = false;
    bool f2_symmetry = false;
    bool f3_strict_desirability = false;
    // How many parties / pairs actually satisfied each axiom's premise.
    int f1_premises = 0;
    int f2_premises = 0;
    int f3_premises = 0;
    std::vector<FairnessViolation> violations;

    bool all_pass() const { return f1_uselessness && f2_symmetry && f3_strict_desirability; }
};

// F1 (useless party gets 0), F2 (symmetric parties get equal rewards),
// F3 (strictly more desirable party gets strictly more).  Premises are
// established exhaustively on cf, so n <= 12.
FairnessReport check_fairness_axioms(const CharacteristicFunction& cf,
                                     const std::vector<double>& rewards);

// F4. The pair (cf, cf2) must agree on every coalition excluding `party`
// and weakly increase (strictly somewhere) on coalitions including it,
// with cf2.grand_value() > reward_before; otherwise PremiseError.
// Returns true iff reward_after > reward_before.
bool check_strict_monotonicity(const CharacteristicFunction& cf,
                               const CharacteristicFunction& cf2, int party,
                               double reward_before, double reward_after);

// Under the same game-pair hypothesis: true iff party's Shapley gain
// dominates every other party's, phi2_i - phi_i >= phi2_j - phi_j - tol.
bool check_party_monotonicity(const CharacteristicFunction& cf,
                              const CharacteristicFunction& cf2, int party);

struct StructureCheck {
    bool ok = true;
    CoalitionMask subset = 0;
    CoalitionMask superset = 0;
    int party = -1;     // submodularity witness only
    double gap = 0.0;   // amount by which the inequality failed
    explicit operator bool() const { return ok; }
};

// Exhaustive monotonicity / submodularity verification with 1e-9 slack;
// n <= 12.  On failure the witness identifies the first violating pair.
StructureCheck check_monotone(const CharacteristicFunction& cf);
StructureCheck check_submodular(const CharacteristicFunction& cf);

}  // namespace covalue
