#include "doctest.h"

#include <cmath>
#include <limits>
#include <numeric>

#include "covalue/errors.hpp"
#include "covalue/game.hpp"
#include "test_support.hpp"

using namespace covalue;

namespace {

// The two-party worked example used throughout: v({1}) = 7, v({2}) = 5,
// v({1,2}) = 8.  Shapley values are exactly (5, 3), and the rationality
// threshold is log(5/8)/log(3/5).
CharacteristicFunction two_party_example() {
    return CharacteristicFunction(2, {0.0, 7.0, 5.0, 8.0});
}

// log(5/8)/log(3/5), evaluated once and frozen.
constexpr double kExampleThreshold = 0.9200862434830487;

}  // namespace

TEST_CASE("coalition basics") {
    Coalition c = Coalition::empty(4);
    CHECK(c.size() == 0);
    CHECK_FALSE(c.contains(2));
    c = c.with(2).with(0);
    CHECK(c.size() == 2);
    CHECK(c.contains(0));
    CHECK(c.contains(2));
    CHECK_FALSE(c.contains(1));
    CHECK(c.without(2).members == 1u);
    CHECK(Coalition::grand(4).members == 0xFu);
    CHECK(Coalition::single(3, 4).members == 8u);
    CHECK(Coalition::grand(4).member_list() == std::vector<int>{0, 1, 2, 3});

    CHECK_THROWS_AS(Coalition(0x10u, 4).validate(), ConfigError);
    CHECK_THROWS_AS(Coalition(0u, 0).validate(), ConfigError);
    CHECK_THROWS_AS(Coalition(0u, kMaxParties + 1).validate(), ConfigError);
    CHECK_NOTHROW(Coalition::grand(kMaxParties).validate());
}

TEST_CASE("characteristic function validation") {
    CHECK_THROWS_AS(CharacteristicFunction(2, {0.0, 1.0, 2.0}), ConfigError);  // wrong size
    CHECK_THROWS_AS(CharacteristicFunction(2, {0.5, 1.0, 2.0, 3.0}), ConfigError);  // v(empty) != 0
    CHECK_THROWS_AS(CharacteristicFunction(2, {0.0, 1.0, std::nan(""), 3.0}), ConfigError);
    CHECK_THROWS_AS(CharacteristicFunction(0, {0.0}), ConfigError);
    CHECK_THROWS_AS(CharacteristicFunction(kMaxParties + 1, {0.0, 1.0}), ConfigError);

    CharacteristicFunction cf = two_party_example();
    CHECK(cf.n() == 2);
    CHECK(cf.coalition_count() == 4);
    CHECK(cf.grand_mask() == 3u);
    CHECK(cf.value(CoalitionMask{1}) == 7.0);
    CHECK(cf.singleton_value(1) == 5.0);
    CHECK(cf.grand_value() == 8.0);
}

TEST_CASE("exact shapley on the two-party example") {
    auto sv = exact_shapley(two_party_example());
    CHECK(sv.method == ShapleyMethod::exact);
    CHECK(sv.phi[0] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(sv.phi[1] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(sv.phi_star == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(sv.std_error.empty());
}

TEST_CASE("exact shapley matches the permutation oracle") {
    for (int n = 1; n <= 5; ++n) {
        for (std::uint64_t s = 0; s < 8; ++s) {
            auto cf = support::random_game(n, 1000 * n + s);
            auto sv = exact_shapley(cf);
            auto oracle = support::permutation_shapley(cf);
            double total = 0.0;
            for (int i = 0; i < n; ++i) {
                CHECK(sv.phi[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
                total += sv.phi[i];
            }
            CHECK(std::abs(total - cf.grand_value()) <= kAxiomTol * std::max(1.0, std::abs(cf.grand_value())));
        }
    }
}

TEST_CASE("exact shapley rejects oversized games") {
    // Only the bound is checked, not a 2^21 table allocation: build at the
    // limit boundary via the dedicated error type.
    auto cf = support::random_game(5, 7);
    CHECK_NOTHROW(exact_shapley(cf));
    // The table itself refuses > kMaxParties, so the enumeration limit is
    // exercised through the sampled path's n argument instead.
    CHECK_THROWS_AS(sampled_shapley([](CoalitionMask) { return 0.0; }, kMaxParties + 1, 10, 1),
                    ConfigError);
}

TEST_CASE("sampled shapley: determinism, efficiency, convergence") {
    auto cf = support::random_coverage_game(6, 42);
    auto value_of = [&cf](CoalitionMask m) { return cf.value(m); };

    auto a = sampled_shapley(value_of, 6, 4096, 99);
    auto b = sampled_shapley(value_of, 6, 4096, 99);
    CHECK(a.method == ShapleyMethod::sampled);
    CHECK(a.sample_count == 4096);
    REQUIRE(a.std_error.size() == 6);
    for (int i = 0; i < 6; ++i) {
        // Bit-identical across runs.
        CHECK(a.phi[i] == b.phi[i]);
        CHECK(a.std_error[i] == b.std_error[i]);
        CHECK(a.std_error[i] > 0.0);
    }

    // Every sampled permutation's marginals sum to v(N) exactly, so the
    // estimator is efficient up to accumulated rounding.
    double total = std::accumulate(a.phi.begin(), a.phi.end(), 0.0);
    CHECK(total == doctest::Approx(cf.grand_value()).epsilon(1e-9));

    // Against the exact values: within 4 standard errors (a 1-in-16000
    // event per coordinate if the estimator is honest).
    auto exact = exact_shapley(cf);
    for (int i = 0; i < 6; ++i) {
        CHECK(std::abs(a.phi[i] - exact.phi[i]) <= 4.0 * a.std_error[i] + 1e-12);
    }

    // Different seed, different estimate (sanity that the seed matters).
    auto c = sampled_shapley(value_of, 6, 4096, 100);
    bool any_different = false;
    for (int i = 0; i < 6; ++i) any_different |= (c.phi[i] != a.phi[i]);
    CHECK(any_different);

    CHECK_THROWS_AS(sampled_shapley(value_of, 6, 0, 1), ConfigError);
    CHECK_THROWS_AS(sampled_shapley(value_of, 0, 16, 1), ConfigError);
}

TEST_CASE("sampled shapley standard error shrinks roughly like 1/sqrt(S)") {
    auto cf = support::random_concave_additive_game(5, 7);
    auto value_of = [&cf](CoalitionMask m) { return cf.value(m); };
    auto small = sampled_shapley(value_of, 5, 1024, 3);
    auto large = sampled_shapley(value_of, 5, 16384, 3);
    for (int i = 0; i < 5; ++i) {
        if (small.std_error[i] == 0.0) continue;  // constant marginal
        double shrink = large.std_error[i] / small.std_error[i];
        CHECK(shrink < 0.5);  // expected 0.25; generous slack for variance of the variance
    }
}

TEST_CASE("rho-shapley rewards") {
    auto sv = exact_shapley(two_party_example());

    SUBCASE("rho = 1 recovers the proportional scheme") {
        auto alloc = rho_shapley_rewards(sv, 8.0, 1.0);
        CHECK(alloc.rewards[0] == 8.0);
        CHECK(alloc.rewards[1] == doctest::Approx(4.8).epsilon(1e-12));
        CHECK(alloc.v_n == 8.0);
        CHECK(alloc.rho == 1.0);
    }
    SUBCASE("rho = 0 pays everyone the grand value exactly") {
        auto alloc = rho_shapley_rewards(sv, 8.0, 0.0);
        CHECK(alloc.rewards[0] == 8.0);
        CHECK(alloc.rewards[1] == 8.0);
    }
    SUBCASE("the top party always gets v_N exactly, at every rho") {
        for (double rho : {0.1, 0.3, 0.7, 0.95}) {
            auto alloc = rho_shapley_rewards(sv, 8.0, rho);
            CHECK(alloc.rewards[0] == 8.0);
            CHECK(alloc.rewards[1] < 8.0);
            CHECK(alloc.rewards[1] > 4.8 - 1e-12);
        }
    }
    SUBCASE("rewards are monotone in rho") {
        double prev = -1.0;
        for (double rho : {1.0, 0.8, 0.6, 0.4, 0.2, 0.0}) {
            auto alloc = rho_shapley_rewards(sv, 8.0, rho);
            CHECK(alloc.rewards[1] >= prev);
            prev = alloc.rewards[1];
        }
    }
    SUBCASE("out-of-range rho is a config error") {
        CHECK_THROWS_AS(rho_shapley_rewards(sv, 8.0, -0.01), ConfigError);
        CHECK_THROWS_AS(rho_shapley_rewards(sv, 8.0, 1.01), ConfigError);
        CHECK_THROWS_AS(rho_shapley_rewards(sv, 8.0, std::nan("")), ConfigError);
    }
    SUBCASE("degenerate games") {
        ShapleyVector zero;
        zero.phi = {0.0, 0.0};
        zero.phi_star = 0.0;
        auto alloc = rho_shapley_rewards(zero, 0.0, 0.5);
        CHECK(alloc.rewards[0] == 0.0);
        CHECK(alloc.rewards[1] == 0.0);
        CHECK_THROWS_AS(rho_shapley_rewards(zero, 1.0, 0.5), InconsistentGameError);
    }
}

TEST_CASE("rationality threshold on the two-party example") {
    auto cf = two_party_example();
    auto sv = exact_shapley(cf);
    double rho_r = rho_r_threshold(cf, sv);
    double rho_s = rho_s_threshold(cf, sv);
    CHECK(rho_r == doctest::Approx(kExampleThreshold).epsilon(1e-12));
    // With two parties the dominated set of the weak party is just itself,
    // so both thresholds coincide.
    CHECK(rho_s == doctest::Approx(kExampleThreshold).epsilon(1e-12));

    // The defining property: at rho_r the binding party is paid exactly its
    // stand-alone value.
    auto at = rho_shapley_rewards(sv, cf.grand_value(), rho_r);
    CHECK(at.rewards[1] == doctest::Approx(5.0).epsilon(1e-6));

    // Slightly above the threshold individual rationality fails; at or
    // below it holds.
    auto above = rho_shapley_rewards(sv, cf.grand_value(), std::min(1.0, rho_r + 0.01));
    CHECK(above.rewards[1] < 5.0);
    auto below = rho_shapley_rewards(sv, cf.grand_value(), rho_r - 0.01);
    CHECK(below.rewards[1] > 5.0);
}

TEST_CASE("thresholds: vacuous and inconsistent cases") {
    SUBCASE("all parties tied at phi*") {
        CharacteristicFunction cf(2, {0.0, 3.0, 3.0, 6.0});
        auto sv = exact_shapley(cf);
        CHECK(std::isinf(rho_r_threshold(cf, sv)));
        CHECK(std::isinf(rho_s_threshold(cf, sv)));
    }
    SUBCASE("zero grand value") {
        CharacteristicFunction cf(2, {0.0, 0.0, 0.0, 0.0});
        auto sv = exact_shapley(cf);
        CHECK(std::isinf(rho_r_threshold(cf, sv)));
    }
    SUBCASE("nonpositive phi with a positive bound cannot be rationalized") {
        // Party 0 has positive stand-alone value but a negative Shapley
        // value (its marginal to {1} is -2): no rho can pay it v({0}).
        CharacteristicFunction cf(2, {0.0, 1.0, 4.0, 2.0});
        auto sv = exact_shapley(cf);
        CHECK(sv.phi[0] < 0.0);
        CHECK_THROWS_AS(rho_r_threshold(cf, sv), InconsistentGameError);
    }
    SUBCASE("nonpositive phi with nonpositive bound is skipped") {
        CharacteristicFunction cf(2, {0.0, 0.0, 2.0, 2.0});
        auto sv = exact_shapley(cf);
        CHECK(sv.phi[0] == 0.0);
        CHECK(std::isinf(rho_r_threshold(cf, sv)));
    }
}

TEST_CASE("thresholds guarantee their incentive properties on structured games") {
    int checked = 0;
    for (std::uint64_t s = 0; s < 40; ++s) {
        int n = 2 + static_cast<int>(s % 4);
        auto cf = (s % 2 == 0) ? support::random_coverage_game(n, s)
                               : support::random_concave_additive_game(n, s);
        auto sv = exact_shapley(cf);
        double rho_r = rho_r_threshold(cf, sv);
        double rho_s = rho_s_threshold(cf, sv);
        CHECK(rho_s <= rho_r + 1e-12);
        for (double frac : {1.0, 0.5}) {
            double rho = std::min(1.0, rho_r) * frac;
            auto alloc = rho_shapley_rewards(sv, cf.grand_value(), rho);
            auto report = check_incentives(cf, alloc);
            CHECK(report.r1_nonnegativity);
            CHECK(report.r2_feasibility);
            CHECK(report.r3_weak_efficiency);
            CHECK(report.r4_individual_rationality);
            double rho2 = std::min(1.0, rho_s) * frac;
            auto alloc2 = rho_shapley_rewards(sv, cf.grand_value(), rho2);
            CHECK(check_incentives(cf, alloc2).stable);
            ++checked;
        }
    }
    CHECK(checked == 80);
}

TEST_CASE("dominated set reconstruction") {
    std::vector<double> phi = {3.0, 1.0, 2.0};
    CHECK(dominated_set(phi, 0) == 0b111u);
    CHECK(dominated_set(phi, 1) == 0b010u);
    CHECK(dominated_set(phi, 2) == 0b110u);
    // Ties include each other.
    std::vector<double> tied = {2.0, 2.0};
    CHECK(dominated_set(tied, 0) == 0b11u);
    CHECK(dominated_set(tied, 1) == 0b11u);
}

TEST_CASE("incentive audit on the two-party example") {
    auto cf = two_party_example();
    auto sv = exact_shapley(cf);

    SUBCASE("rho = 1 violates individual rationality for the weak party") {
        auto report = check_incentives(cf, rho_shapley_rewards(sv, 8.0, 1.0));
        CHECK(report.r1_nonnegativity);
        CHECK(report.r2_feasibility);
        CHECK(report.r3_weak_efficiency);
        CHECK_FALSE(report.r4_individual_rationality);
        CHECK_FALSE(report.stable);
        CHECK_FALSE(report.all_required());
        CHECK(report.group_welfare == doctest::Approx(12.8));
        bool found = false;
        for (const auto& v : report.violations) {
            if (v.constraint == "R4" && v.party == 1) {
                found = true;
                CHECK(v.reward == doctest::Approx(4.8));
                CHECK(v.bound == doctest::Approx(5.0));
            }
        }
        CHECK(found);
    }
    SUBCASE("at the threshold everything passes") {
        auto report = check_incentives(cf, rho_shapley_rewards(sv, 8.0, kExampleThreshold));
        CHECK(report.all_required());
        CHECK(report.r5_sufficient);
        CHECK(report.violations.empty());
    }
}

TEST_CASE("stability is exhaustive, not pairwise") {
    // Three parties; rewards chosen so every singleton and the grand
    // coalition are fine, but the pair {0,1} strictly dominates.
    CharacteristicFunction cf(3, {0.0, 1.0, 1.0, 5.0, 1.0, 2.0, 2.0, 6.0});
    RewardAllocation alloc;
    alloc.rho = 0.5;
    alloc.rewards = {4.0, 4.0, 6.0};
    alloc.v_n = 6.0;
    auto report = check_incentives(cf, alloc);
    CHECK_FALSE(report.stable);
    bool witnessed = false;
    for (const auto& v : report.violations) {
        if (v.constraint == "stability" && v.coalition == 0b011u) witnessed = true;
    }
    CHECK(witnessed);
}

TEST_CASE("fairness axioms") {
    SUBCASE("null player earns zero reward share") {
        // Party 2 contributes nothing to any coalition.
        CharacteristicFunction cf(3, {0.0, 2.0, 3.0, 4.0, 0.0, 2.0, 3.0, 4.0});
        auto sv = exact_shapley(cf);
        CHECK(sv.phi[2] == doctest::Approx(0.0).epsilon(1e-12));
        auto alloc = rho_shapley_rewards(sv, cf.grand_value(), 0.7);
        auto report = check_fairness_axioms(cf, alloc.rewards);
        CHECK(report.f1_uselessness);
        CHECK(report.f1_premises == 1);
        CHECK(alloc.rewards[2] == 0.0);
    }
    SUBCASE("symmetric parties earn identical rewards") {
        for (std::uint64_t s = 0; s < 10; ++s) {
            // Coverage game with parties 0 and 1 owning identical sets: make
            // it symmetric by construction via duplicated weights.
            auto base = support::random_coverage_game(3, s);
            // Force symmetry between parties 0 and 1 by averaging the table
            // over the swap.  The swap of a coalition exchanges bits 0/1.
            std::vector<double> vals = base.values();
            for (std::size_t c = 0; c < vals.size(); ++c) {
                std::size_t swapped = (c & ~std::size_t{3}) | ((c & 1) << 1) | ((c >> 1) & 1);
                double avg = 0.5 * (vals[c] + vals[swapped]);
                vals[c] = vals[swapped] = avg;
            }
            CharacteristicFunction cf(3, std::move(vals));
            auto sv = exact_shapley(cf);
            auto alloc = rho_shapley_rewards(sv, cf.grand_value(), 0.6);
            auto report = check_fairness_axioms(cf, alloc.rewards);
            CHECK(report.f2_symmetry);
            CHECK(report.f2_premises >= 1);
            CHECK(alloc.rewards[0] == alloc.rewards[1]);
        }
    }
    SUBCASE("strict desirability carries into rewards") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            auto cf = support::random_coverage_game(4, 500 + s);
            auto sv = exact_shapley(cf);
            for (double rho : {0.25, 0.5, 1.0}) {
                auto alloc = rho_shapley_rewards(sv, cf.grand_value(), rho);
                auto report = check_fairness_axioms(cf, alloc.rewards);
                CHECK(report.f1_uselessness);
                CHECK(report.f2_symmetry);
                CHECK(report.f3_strict_desirability);
            }
        }
    }
    SUBCASE("a non-shapley allocation can fail them") {
        CharacteristicFunction cf(3, {0.0, 2.0, 3.0, 4.0, 0.0, 2.0, 3.0, 4.0});
        // Pays the null player: F1 must flag it.
        auto report = check_fairness_axioms(cf, {1.0, 1.0, 1.0});
        CHECK_FALSE(report.f1_uselessness);
        REQUIRE_FALSE(report.violations.empty());
        CHECK(report.violations.front().axiom == "F1");
    }
}

TEST_CASE("strict and party monotonicity across game pairs") {
    for (std::uint64_t s = 0; s < 50; ++s) {
        int n = 3 + static_cast<int>(s % 3);
        int party = static_cast<int>(s % n);
        auto cf = support::random_coverage_game(n, 4242 + s);
        auto sv = exact_shapley(cf);
        double rho = 0.4 + 0.1 * static_cast<double>(s % 6);
        auto before = rho_shapley_rewards(sv, cf.grand_value(), rho);

        auto cf2 = (s % 2 == 0) ? support::bump_constant(cf, party, 0.25)
                                : support::bump_size_scaled(cf, party, 0.25);
        auto sv2 = exact_shapley(cf2);
        auto after = rho_shapley_rewards(sv2, cf2.grand_value(), rho);

        CHECK(check_strict_monotonicity(cf, cf2, party, before.rewards[party],
                                        after.rewards[party]));
        CHECK(check_party_monotonicity(cf, cf2, party));
    }

    SUBCASE("a malformed pair is a premise error") {
        auto cf = support::random_coverage_game(3, 1);
        // Changing a coalition without the party breaks the hypothesis.
        std::vector<double> vals = cf.values();
        vals[0b010] += 1.0;
        CharacteristicFunction bad(3, std::move(vals));
        CHECK_THROWS_AS(check_strict_monotonicity(cf, bad, 0, 1.0, 2.0), PremiseError);
        CHECK_THROWS_AS(check_party_monotonicity(cf, bad, 0), PremiseError);
    }
    SUBCASE("no strict improvement anywhere is a premise error") {
        auto cf = support::random_coverage_game(3, 2);
        CHECK_THROWS_AS(check_strict_monotonicity(cf, cf, 0, 1.0, 1.0), PremiseError);
    }
}

TEST_CASE("structure checks") {
    SUBCASE("coverage games are monotone and submodular") {
        for (std::uint64_t s = 0; s < 10; ++s) {
            auto cf = support::random_coverage_game(5, 77 + s);
            CHECK(static_cast<bool>(check_monotone(cf)));
            CHECK(static_cast<bool>(check_submodular(cf)));
        }
    }
    SUBCASE("violations produce witnesses") {
        // Strictly supermodular: v(C) = |C|^2.
        std::vector<double> vals(8);
        for (std::size_t c = 0; c < 8; ++c) {
            double k = static_cast<double>(std::popcount(c));
            vals[c] = k * k;
        }
        CharacteristicFunction super(3, std::move(vals));
        CHECK(static_cast<bool>(check_monotone(super)));
        auto sub = check_submodular(super);
        CHECK_FALSE(sub.ok);
        CHECK(sub.gap > 0.0);
        // Verify the witness: adding `party` to the superset gained more
        // than adding it to the subset.
        double lhs = super.value(static_cast<CoalitionMask>(sub.subset | (1u << sub.party))) -
                     super.value(sub.subset);
        double rhs = super.value(static_cast<CoalitionMask>(sub.superset | (1u << sub.party))) -
                     super.value(sub.superset);
        CHECK(rhs > lhs);

        CharacteristicFunction shrinking(2, {0.0, 3.0, 1.0, 2.0});
        auto mono = check_monotone(shrinking);
        CHECK_FALSE(mono.ok);
        CHECK(shrinking.value(mono.superset) < shrinking.value(mono.subset));
    }
    SUBCASE("enumeration limits") {
        std::vector<double> vals(std::size_t{1} << 13, 0.0);
        CharacteristicFunction big(13, std::move(vals));
        CHECK_THROWS_AS(check_monotone(big), EnumerationLimitError);
        CHECK_THROWS_AS(check_submodular(big), EnumerationLimitError);
        CHECK_THROWS_AS(check_fairness_axioms(big, std::vector<double>(13, 0.0)),
                        EnumerationLimitError);
    }
}
