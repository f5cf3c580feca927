#pragma once

// Composite step reward: a success bonus, or the sum of the executability,
// exploration, efficiency and format terms.

#include <optional>
#include <string>

#include <json.hpp>

#include "scenesearch/actionlang.hpp"

namespace scenesearch {

struct RewardParams {
  double r_success = 5.0;
  double lambda_executable = 0.3;
  double lambda_explore = 0.1;
  double lambda_efficiency = 0.3;
  double lambda_format = 0.1;
  /// Nodes per unit of exploration reward.
  double eta_nodes = 10.0;
  /// Meters per unit of efficiency penalty.
  double eta_dist = 10.0;
  bool operator==(const RewardParams&) const = default;
};

/// Throws InvalidParams when a normalizer is not positive or a weight is negative.
void validate_reward_params(const RewardParams& p);
nlohmann::json reward_params_to_json(const RewardParams& p);
/// Missing fields keep their defaults; unknown fields throw ConfigError.
RewardParams reward_params_from_json(const nlohmann::json& doc, RewardParams base = {});

struct RewardBreakdown {
  std::optional<double> executable_term;
  std::optional<double> explore_term;
  std::optional<double> efficiency_term;
  std::optional<double> format_term;
  double total = 0.0;
  bool success = false;
  bool operator==(const RewardBreakdown&) const = default;
};

nlohmann::json reward_to_json(const RewardBreakdown& r);
RewardBreakdown reward_from_json(const nlohmann::json& doc);

RewardBreakdown compute_reward(const StepOutcome& outcome, bool success, const RewardParams& p);

/// done() was called and the goal category is in the scene graph.
bool judge_success(const EnvSnapshot& s, const StepOutcome& outcome, const std::string& goal);

}  // namespace scenesearch
