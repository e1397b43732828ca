#include "covalue/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "covalue/text.hpp"

namespace covalue {

namespace {

json eta_to_json(double eta) {
    if (std::isinf(eta)) return "inf";
    return eta;
}

double eta_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        throw ConfigError("eta must be a number or \"inf\"");
    }
    return j.get<double>();
}

// Thresholds share the convention: +infinity means "unconstrained".
json finite_or_inf(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

}  // namespace

json cf_to_json(const CharacteristicFunction& cf) {
    return json{{"n", cf.n()}, {"values", cf.values()}};
}

CharacteristicFunction cf_from_json(const json& j) {
    if (!j.contains("n") || !j.contains("values")) {
        throw ConfigError("characteristic function JSON needs \"n\" and \"values\"");
    }
    return CharacteristicFunction(j.at("n").get<int>(),
                                  j.at("values").get<std::vector<double>>());
}

json shapley_to_json(const ShapleyVector& sv) {
    json j{{"phi", sv.phi},
           {"phi_star", sv.phi_star},
           {"method", sv.method == ShapleyMethod::exact ? "exact" : "sampled"}};
    if (sv.method == ShapleyMethod::sampled) {
        j["sample_count"] = sv.sample_count;
        j["std_error"] = sv.std_error;
    }
    return j;
}

ShapleyVector shapley_from_json(const json& j) {
    ShapleyVector sv;
    sv.phi = j.at("phi").get<std::vector<double>>();
    sv.phi_star = j.at("phi_star").get<double>();
    const auto method = j.at("method").get<std::string>();
    if (method == "exact") {
        sv.method = ShapleyMethod::exact;
    } else if (method == "sampled") {
        sv.method = ShapleyMethod::sampled;
        sv.sample_count = j.at("sample_count").get<std::uint64_t>();
        sv.std_error = j.at("std_error").get<std::vector<double>>();
    } else {
        throw ConfigError("unknown Shapley method: " + method);
    }
    return sv;
}

json allocation_to_json(const RewardAllocation& alloc) {
    json sets = json::array();
    for (CoalitionMask m : alloc.dominated_sets) sets.push_back(m);
    return json{{"rho", alloc.rho},
                {"rewards", alloc.rewards},
                {"v_n", alloc.v_n},
                {"rho_r", finite_or_inf(alloc.rho_r)},
                {"rho_s", finite_or_inf(alloc.rho_s)},
                {"dominated_sets", sets}};
}

json incentive_report_to_json(const IncentiveReport& report) {
    json violations = json::array();
    for (const auto& v : report.violations) {
        violations.push_back(json{{"constraint", v.constraint},
                                  {"party", v.party},
                                  {"coalition", v.coalition},
                                  {"reward", v.reward},
                                  {"bound", v.bound}});
    }
    return json{{"R1_nonnegativity", report.r1_nonnegativity},
                {"R2_feasibility", report.r2_feasibility},
                {"R3_weak_efficiency", report.r3_weak_efficiency},
                {"R4_individual_rationality", report.r4_individual_rationality},
                {"stable", report.stable},
                {"R5_sufficient", report.r5_sufficient},
                {"group_welfare", report.group_welfare},
                {"violations", violations}};
}

json fairness_report_to_json(const FairnessReport& report) {
    json violations = json::array();
    for (const auto& v : report.violations) {
        violations.push_back(json{{"axiom", v.axiom},
                                  {"party_i", v.party_i},
                                  {"party_j", v.party_j},
                                  {"reward_i", v.reward_i},
                                  {"reward_j", v.reward_j}});
    }
    return json{{"F1_uselessness", report.f1_uselessness},
                {"F2_symmetry", report.f2_symmetry},
                {"F3_strict_desirability", report.f3_strict_desirability},
                {"premises", json{{"F1", report.f1_premises},
                                  {"F2", report.f2_premises},
                                  {"F3", report.f3_premises}}},
                {"violations", violations}};
}

json structure_check_to_json(const StructureCheck& check) {
    json j{{"ok", check.ok}};
    if (!check.ok) {
        j["subset"] = check.subset;
        j["superset"] = check.superset;
        j["party"] = check.party;
        j["gap"] = check.gap;
    }
    return j;
}

json plan_to_json(const RealizationPlan& plan) {
    json entries = json::array();
    for (const auto& e : plan.entries) {
        json entry{{"party", e.party},
                   {"target", e.target},
                   {"eta", eta_to_json(e.eta)},
                   {"achieved_ig", e.achieved_ig},
                   {"iterations", e.iterations},
                   {"bracket", json::array({e.bracket_lo, e.bracket_hi})}};
        if (e.infeasible) entry["infeasible"] = true;
        entries.push_back(std::move(entry));
    }
    return json{{"entries", entries}, {"v_n", plan.v_n}, {"tolerance", plan.tolerance}};
}

RealizationPlan plan_from_json(const json& j) {
    RealizationPlan plan;
    plan.v_n = j.at("v_n").get<double>();
    plan.tolerance = j.at("tolerance").get<double>();
    for (const auto& e : j.at("entries")) {
        RealizationEntry entry;
        entry.party = e.at("party").get<int>();
        entry.target = e.at("target").get<double>();
        entry.eta = eta_from_json(e.at("eta"));
        entry.achieved_ig = e.at("achieved_ig").get<double>();
        entry.iterations = e.at("iterations").get<int>();
        if (e.contains("bracket")) {
            entry.bracket_lo = e.at("bracket").at(0).get<double>();
            entry.bracket_hi = e.at("bracket").at(1).get<double>();
        }
        entry.infeasible = e.value("infeasible", false);
        plan.entries.push_back(entry);
    }
    return plan;
}

void write_rewards_csv(const std::string& path, const std::vector<RewardRow>& rows) {
    std::ostringstream out;
    out << "label,rho";
    const std::size_t n = rows.empty() ? 0 : rows.front().rewards.size();
    for (std::size_t i = 0; i < n; ++i) out << ",r_" << i;
    out << "\n";
    for (const auto& row : rows) {
        out << row.label << "," << format_double(row.rho);
        for (double r : row.rewards) out << "," << format_double(r);
        out << "\n";
    }
    write_text_file(path, out.str());
}

void write_evaluation_csv(const std::string& path, const EvaluationReport& report,
                          const std::vector<double>& phi_ratio) {
    std::ostringstream out;
    out << "party,realization,r_i,v_i,v_N,ig_impr,ig_max_impr,mnlp_own,mnlp_reward,"
           "mnlp_grand,mnlp_impr,mnlp_max_impr,phi_ratio\n";
    for (const auto& rec : report.records) {
        out << rec.party << "," << rec.realization << "," << format_double(rec.r_i) << ","
            << format_double(rec.v_i) << "," << format_double(rec.v_n) << ","
            << format_double(rec.ig_improvement) << "," << format_double(rec.ig_max_improvement)
            << "," << format_double(rec.mnlp_own) << "," << format_double(rec.mnlp_reward) << ","
            << format_double(rec.mnlp_grand) << "," << format_double(rec.mnlp_improvement) << ","
            << format_double(rec.mnlp_max_improvement) << ","
            << format_double(rec.party < static_cast<int>(phi_ratio.size())
                                 ? phi_ratio[rec.party]
                                 : 0.0)
            << "\n";
    }
    out << "\n";
    out << "party,mnlp_reward_mean,mnlp_reward_ci,mnlp_impr_mean,mnlp_impr_ci\n";
    for (const auto& agg : report.aggregates) {
        out << agg.party << "," << format_double(agg.mnlp_reward_mean) << ","
            << format_double(agg.mnlp_reward_ci) << ","
            << format_double(agg.mnlp_improvement_mean) << ","
            << format_double(agg.mnlp_improvement_ci) << "\n";
    }
    write_text_file(path, out.str());
}

void write_comparison_csv(const std::string& path, const std::vector<NormalizedRow>& rows) {
    std::ostringstream out;
    out << "party,v_share,v_share_valid,v_alt_share,v_alt_share_valid,phi_norm,phi_norm_valid,"
           "phi_alt_norm,phi_alt_norm_valid\n";
    for (const auto& r : rows) {
        out << r.party << "," << format_double(r.v_share) << "," << (r.v_share_valid ? 1 : 0)
            << "," << format_double(r.v_alt_share) << "," << (r.v_alt_share_valid ? 1 : 0) << ","
            << format_double(r.phi_norm) << "," << (r.phi_norm_valid ? 1 : 0) << ","
            << format_double(r.phi_alt_norm) << "," << (r.phi_alt_norm_valid ? 1 : 0) << "\n";
    }
    write_text_file(path, out.str());
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace covalue
