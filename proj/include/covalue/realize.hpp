#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "covalue/dataset.hpp"
#include "covalue/game.hpp"
#include "covalue/models.hpp"

namespace covalue {

struct RealizationEntry {
    int party = -1;
    double target = 0.0;
    // Solved noise variance: 0 means the party receives the grand
    // training set untouched; +infinity is the own-data-only sentinel.
    double eta = 0.0;
    double achieved_ig = 0.0;
    int iterations = 0;  // root-finder steps (0 for boundary short-circuits)
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    // Set when the target lay below v_i and the orchestrator fell back to
    // the own-data-only sentinel instead of failing the whole sweep.
    bool infeasible = false;
};

struct RealizationPlan {
    std::vector<RealizationEntry> entries;  // one per party, ascending index
    double v_n = 0.0;
    double tolerance = 0.0;  // the |ig - target| tolerance actually used
};

// The training set party `owner` receives: everyone's inputs, the owner's
// own outputs verbatim, other parties' outputs with Gaussian noise of
// variance eta — reflected in the per-row noise variances (sigma^2 on own
// rows, sigma^2 + eta elsewhere).
struct NoisyTrainingSet {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd outputs;
    NoiseVector noise;
    int owner = -1;
};

// Information gain the owner gets from the grand training set when every
// foreign row's observation noise is raised to sigma^2 + eta.  Purely a
// function of the inputs (no sampling): eta = 0 gives v_N, eta -> inf
// decays to v_i.  Accepts the +infinity sentinel.
double ig_given_eta(const ModelSpec& model, std::span<const Dataset> parties, int party,
                    double eta);

// Solve ig_given_eta(eta) = target by bracketed root-finding
// (bisection-safeguarded inverse interpolation) on the non-increasing
// residual g(eta) = ig(eta) - target, stopping at |g| <= tolerance.
// Targets within tolerance of v_N or v_i short-circuit to eta = 0 /
// +infinity.  tolerance <= 0 selects the default 1e-6 * max(1, v_N).
RealizationEntry solve_eta(const ModelSpec& model, std::span<const Dataset> parties, int party,
                           double target, double tolerance);

// One solve per party, taking rewards.rewards as the targets.
RealizationPlan realize_allocation(const ModelSpec& model, std::span<const Dataset> parties,
                                   const RewardAllocation& rewards, double tolerance);

// Draw the noisy outputs for one party.  The unit-normal draw for a
// foreign row is keyed by (seed, party, global row index) and scaled by
// sqrt(eta) afterwards, so different eta (hence different rho) reuse the
// very same standardized noise.  sigma2 fills the per-row variance
// column.  eta = +infinity returns the own-data-only training set.
NoisyTrainingSet sample_noisy_outputs(std::span<const Dataset> parties, int party, double eta,
                                      std::uint64_t seed, double sigma2);

}  // namespace covalue
