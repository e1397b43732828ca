#include "covalue/realize.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>

#include "covalue/rng.hpp"

namespace covalue {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBracketCap = 1e15;
constexpr int kMaxRootIterations = 200;

void validate_party(std::span<const Dataset> parties, int party) {
    if (party < 0 || party >= static_cast<int>(parties.size())) {
        throw ConfigError("party index " + std::to_string(party) + " out of range for " +
                          std::to_string(parties.size()) + " parties");
    }
}

// Per-row noise for the owner's view of the grand training set.
NoiseVector owner_noise(std::span<const Dataset> parties, int party, double eta, double sigma2) {
    Eigen::Index total = 0;
    for (const auto& p : parties) total += p.rows();
    NoiseVector noise(total);
    Eigen::Index at = 0;
    for (std::size_t j = 0; j < parties.size(); ++j) {
        const double variance = static_cast<int>(j) == party ? sigma2 : sigma2 + eta;
        noise.segment(at, parties[j].rows()).setConstant(variance);
        at += parties[j].rows();
    }
    return noise;
}

}  // namespace

double ig_given_eta(const ModelSpec& model, std::span<const Dataset> parties, int party,
                    double eta) {
    validate_party(parties, party);
    if (std::isnan(eta) || eta < 0.0) throw ConfigError("eta must be non-negative");
    if (std::isinf(eta)) {
        // Foreign rows carry no information in the limit; drop them.
        return information_gain(model, parties[party].inputs);
    }
    const Dataset joined = concat_coalition(parties, Coalition::grand(parties.size()).members);
    return information_gain(model, joined.inputs,
                            owner_noise(parties, party, eta, model.noise_variance()));
}

namespace {

// Brent-style root search on a bracket [a, b] with g(a) > 0 > g(b):
// inverse-quadratic / secant steps guarded by bisection.  Terminates on
// the residual criterion |g| <= gtol, not on interval width.
template <typename Fn>
RealizationEntry brent_on_bracket(Fn&& g, double a, double b, double ga, double gb,
                                  double gtol) {
    RealizationEntry entry;
    entry.bracket_lo = a;
    entry.bracket_hi = b;

    double c = a, gc = ga;
    double d = b - a, e = b - a;
    for (int iter = 0; iter < kMaxRootIterations; ++iter) {
        if ((gb > 0.0) == (gc > 0.0)) {
            c = a;
            gc = ga;
            d = e = b - a;
        }
        if (std::abs(gc) < std::abs(gb)) {
            a = b;
            b = c;
            c = a;
            ga = gb;
            gb = gc;
            gc = ga;
        }
        if (std::abs(gb) <= gtol) {
            entry.eta = b;
            entry.achieved_ig = gb;  // residual; the caller adds the target back
            entry.iterations = iter;
            return entry;
        }
        const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 1e-300;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1) {
            // Bracket collapsed to machine precision without meeting the
            // residual bound: the function is effectively discontinuous
            // at this scale.
            break;
        }
        if (std::abs(e) >= tol1 && std::abs(ga) > std::abs(gb)) {
            // Inverse quadratic (or secant when only two points differ).
            const double s = gb / ga;
            double p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                const double t = ga / gc;
                const double r = gb / gc;
                p = s * (2.0 * xm * t * (t - r) - (b - a) * (r - 1.0));
                q = (t - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        ga = gb;
        b += std::abs(d) > tol1 ? d : (xm > 0.0 ? tol1 : -tol1);
        gb = g(b);
    }
    throw ConvergenceError("root search exhausted " + std::to_string(kMaxRootIterations) +
                           " iterations; last bracket [" + std::to_string(std::min(b, c)) + ", " +
                           std::to_string(std::max(b, c)) + "]");
}

RealizationEntry solve_eta_impl(const ModelSpec& model, std::span<const Dataset> parties,
                                int party, double target, double tolerance, double v_n) {
    const double tol = tolerance > 0.0 ? tolerance : 1e-6 * std::max(1.0, v_n);
    const double v_i = information_gain(model, parties[party].inputs);

    if (target > v_n + tol || target < v_i - tol) {
        throw InfeasibleTargetError("target " + std::to_string(target) + " outside [" +
                                    std::to_string(v_i) + ", " + std::to_string(v_n) +
                                    "] for party " + std::to_string(party));
    }

    RealizationEntry entry;
    entry.party = party;
    entry.target = target;
    if (target >= v_n - tol) {
        entry.eta = 0.0;
        entry.achieved_ig = v_n;
        return entry;
    }
    if (target <= v_i + tol) {
        entry.eta = kInf;
        entry.achieved_ig = v_i;
        return entry;
    }

    auto g = [&](double eta) { return ig_given_eta(model, parties, party, eta) - target; };

    // g(0) = v_N - target > 0; double hi until the residual flips sign.
    double lo = 0.0, glo = v_n - target;
    double hi = 1.0;
    double ghi = g(hi);
    while (ghi >= 0.0) {
        lo = hi;
        glo = ghi;
        hi *= 2.0;
        if (hi > kBracketCap) {
            throw ConvergenceError("no sign change up to eta = 1e15 for party " +
                                   std::to_string(party));
        }
        ghi = g(hi);
    }

    RealizationEntry solved = brent_on_bracket(g, lo, hi, glo, ghi, tol);
    solved.party = party;
    solved.target = target;
    solved.achieved_ig += target;  // brent stored the residual
    solved.bracket_lo = lo;
    solved.bracket_hi = hi;
    return solved;
}

}  // namespace

RealizationEntry solve_eta(const ModelSpec& model, std::span<const Dataset> parties, int party,
                           double target, double tolerance) {
    validate_party(parties, party);
    const double v_n = ig_given_eta(model, parties, party, 0.0);
    return solve_eta_impl(model, parties, party, target, tolerance, v_n);
}

RealizationPlan realize_allocation(const ModelSpec& model, std::span<const Dataset> parties,
                                   const RewardAllocation& rewards, double tolerance) {
    const int n = static_cast<int>(parties.size());
    if (rewards.n() != n) {
        throw ConfigError("allocation covers " + std::to_string(rewards.n()) + " parties but " +
                          std::to_string(n) + " datasets were given");
    }
    const Dataset joined = concat_coalition(parties, Coalition::grand(n).members);
    const double v_n = information_gain(model, joined.inputs);

    RealizationPlan plan;
    plan.v_n = v_n;
    plan.tolerance = tolerance > 0.0 ? tolerance : 1e-6 * std::max(1.0, v_n);
    plan.entries.resize(n);

    std::exception_ptr failure = nullptr;
    int failed_party = -1;

#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        try {
            plan.entries[i] = solve_eta_impl(model, parties, i, rewards.rewards[i],
                                             plan.tolerance, v_n);
        } catch (...) {
#pragma omp critical(covalue_realize_failure)
            if (!failure) {
                failure = std::current_exception();
                failed_party = i;
            }
        }
    }
    if (failure) {
        try {
            std::rethrow_exception(failure);
        } catch (const Error& e) {
            // Re-tag with the party index for the aggregate report.
            const std::string msg = "party " + std::to_string(failed_party) + ": " + e.what();
            if (dynamic_cast<const InfeasibleTargetError*>(&e)) throw InfeasibleTargetError(msg);
            if (dynamic_cast<const ConvergenceError*>(&e)) throw ConvergenceError(msg);
            if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg);
            if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
            throw Error(msg);
        }
    }
    return plan;
}

NoisyTrainingSet sample_noisy_outputs(std::span<const Dataset> parties, int party, double eta,
                                      std::uint64_t seed, double sigma2) {
    validate_party(parties, party);
    if (std::isnan(eta) || eta < 0.0) throw ConfigError("eta must be non-negative");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw ConfigError("sigma2 must be positive and finite");
    }

    NoisyTrainingSet out;
    out.owner = party;

    if (std::isinf(eta)) {
        out.inputs = parties[party].inputs;
        out.outputs = parties[party].outputs;
        out.noise = NoiseVector::Constant(parties[party].rows(), sigma2);
        return out;
    }

    const Dataset joined = concat_coalition(parties, Coalition::grand(parties.size()).members);
    out.inputs = joined.inputs;
    out.outputs = joined.outputs;
    out.noise = owner_noise(parties, party, eta, sigma2);

    const double scale = std::sqrt(eta);
    Eigen::Index row = 0;
    for (std::size_t j = 0; j < parties.size(); ++j) {
        for (Eigen::Index k = 0; k < parties[j].rows(); ++k, ++row) {
            if (static_cast<int>(j) == party) continue;
            const double eps = rng::normal_at(seed, "realize.noise",
                                              static_cast<std::uint64_t>(party),
                                              static_cast<std::uint64_t>(row));
            out.outputs[row] += scale * eps;
        }
    }
    return out;
}

}  // namespace covalue
