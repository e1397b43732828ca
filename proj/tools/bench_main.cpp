// Times the OpenMP kernels against their serial reference implementations
// and checks that both produce bit-identical results.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "covalue/data.hpp"
#include "covalue/evaluate.hpp"
#include "covalue/game.hpp"
#include "covalue/models.hpp"
#include "covalue/realize.hpp"

using namespace covalue;

namespace {

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-22s %9.3fs %9.3fs %7.2fx   %s\n", name, serial, parallel,
                serial / parallel, identical ? "identical" : "MISMATCH");
}

std::vector<Dataset> friedman_parties(int n, Eigen::Index rows_each, std::uint64_t seed) {
    std::vector<Dataset> parties;
    const Dataset pool = friedman_generate(n * rows_each, seed);
    for (int i = 0; i < n; ++i) {
        parties.push_back({pool.inputs.middleRows(i * rows_each, rows_each),
                           pool.outputs.segment(i * rows_each, rows_each)});
    }
    return parties;
}

ModelSpec se_gp(double noise) {
    GpModel gp{KernelSpec::squared_exponential(1.0, Eigen::VectorXd::Constant(6, 0.7)), noise};
    return ModelSpec{gp};
}

}  // namespace

int main(int argc, char** argv) {
    bool small = false;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--small") == 0) small = true;
    }
    const int reps = small ? 1 : 3;

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif
    std::printf("%-22s %10s %10s %8s\n", "kernel", "serial", "parallel", "speedup");

    {
        const int n = small ? 8 : 10;
        const auto parties = friedman_parties(n, 40, 11);
        const ModelSpec model = se_gp(1.0);
        CharacteristicFunction cf_serial = coalition_values_serial(model, parties);
        CharacteristicFunction cf_par = coalition_values(model, parties);
        const double ts = time_best_of(reps, [&] { cf_serial = coalition_values_serial(model, parties); });
        const double tp = time_best_of(reps, [&] { cf_par = coalition_values(model, parties); });
        report("coalition_values", ts, tp, cf_serial.values() == cf_par.values());
    }

    {
        const int n = small ? 10 : 12;
        const auto parties = friedman_parties(n, 12, 13);
        const ModelSpec model = se_gp(1.0);
        const auto oracle = [&](CoalitionMask mask) {
            return information_gain(model, concat_coalition(parties, mask).inputs);
        };
        const std::uint64_t samples = small ? 512 : 2048;
        ShapleyVector sv_serial = sampled_shapley_serial(oracle, n, samples, 7);
        ShapleyVector sv_par = sampled_shapley(oracle, n, samples, 7);
        const double ts = time_best_of(reps, [&] { sv_serial = sampled_shapley_serial(oracle, n, samples, 7); });
        const double tp = time_best_of(reps, [&] { sv_par = sampled_shapley(oracle, n, samples, 7); });
        report("sampled_shapley", ts, tp,
               sv_serial.phi == sv_par.phi && sv_serial.std_error == sv_par.std_error);
    }

    {
        const int n = 4;
        const auto parties = friedman_parties(n, small ? 60 : 150, 17);
        const Dataset test = friedman_generate(200, 19);
        const ModelSpec model = se_gp(1.0);
        RealizationPlan plan;
        plan.v_n = 0.0;
        plan.tolerance = 1e-6;
        for (int i = 0; i < n; ++i) {
            RealizationEntry e;
            e.party = i;
            e.eta = 0.5 * (i + 1);
            e.target = 0.0;
            plan.entries.push_back(e);
        }
        const int realizations = small ? 6 : 16;
        EvaluationReport rep_serial =
            evaluate_allocation_serial(model, parties, plan, test, realizations, 23);
        EvaluationReport rep_par = evaluate_allocation(model, parties, plan, test, realizations, 23);
        const double ts = time_best_of(
            reps, [&] { rep_serial = evaluate_allocation_serial(model, parties, plan, test, realizations, 23); });
        const double tp = time_best_of(
            reps, [&] { rep_par = evaluate_allocation(model, parties, plan, test, realizations, 23); });
        bool identical = rep_serial.records.size() == rep_par.records.size();
        for (std::size_t i = 0; identical && i < rep_serial.records.size(); ++i) {
            identical = rep_serial.records[i].mnlp_reward == rep_par.records[i].mnlp_reward;
        }
        report("evaluate_allocation", ts, tp, identical);
    }

    return 0;
}
