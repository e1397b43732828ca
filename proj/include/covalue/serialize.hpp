#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "covalue/evaluate.hpp"
#include "covalue/game.hpp"
#include "covalue/realize.hpp"

namespace covalue {

using nlohmann::json;

// Characteristic functions: {"n": int, "values": [v for mask 0..2^n-1]}.
// Readers ignore extra keys so enriched files (checker verdicts etc.)
// stay loadable.
json cf_to_json(const CharacteristicFunction& cf);
CharacteristicFunction cf_from_json(const json& j);

json shapley_to_json(const ShapleyVector& sv);
ShapleyVector shapley_from_json(const json& j);

json allocation_to_json(const RewardAllocation& alloc);
json incentive_report_to_json(const IncentiveReport& report);
json fairness_report_to_json(const FairnessReport& report);
json structure_check_to_json(const StructureCheck& check);

// Realization plans: eta serializes as a number or the string "inf".
json plan_to_json(const RealizationPlan& plan);
RealizationPlan plan_from_json(const json& j);

// One row of rewards.csv: a grid row has an empty label, threshold rows
// carry "rho_r"/"rho_s".
struct RewardRow {
    std::string label;
    double rho = 0.0;
    std::vector<double> rewards;
};

void write_rewards_csv(const std::string& path, const std::vector<RewardRow>& rows);

// evaluation.csv: the fixed record columns plus phi_ratio, then a blank
// line and a separately-headed aggregate block.
void write_evaluation_csv(const std::string& path, const EvaluationReport& report,
                          const std::vector<double>& phi_ratio);

void write_comparison_csv(const std::string& path, const std::vector<NormalizedRow>& rows);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace covalue
