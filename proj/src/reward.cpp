#include "scenesearch/reward.hpp"

#include <cmath>

#include "scenesearch/errors.hpp"

namespace scenesearch {

void validate_reward_params(const RewardParams& p) {
  if (!(p.eta_nodes > 0) || !(p.eta_dist > 0)) throw InvalidParams("reward normalizers must be positive");
  for (double w : {p.lambda_executable, p.lambda_explore, p.lambda_efficiency, p.lambda_format})
    if (!(w >= 0) || !std::isfinite(w)) throw InvalidParams("reward weights must be finite and non-negative");
  if (!std::isfinite(p.r_success)) throw InvalidParams("r_success must be finite");
}

nlohmann::json reward_params_to_json(const RewardParams& p) {
  return {{"r_success", p.r_success},
          {"lambda_executable", p.lambda_executable},
          {"lambda_explore", p.lambda_explore},
          {"lambda_efficiency", p.lambda_efficiency},
          {"lambda_format", p.lambda_format},
          {"eta_nodes", p.eta_nodes},
          {"eta_dist", p.eta_dist}};
}

RewardParams reward_params_from_json(const nlohmann::json& doc, RewardParams p) {
  if (!doc.is_object()) throw ConfigError("reward params must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_number()) throw ConfigError("reward field " + key + " must be a number");
    const double v = value.get<double>();
    if (key == "r_success") p.r_success = v;
    else if (key == "lambda_executable") p.lambda_executable = v;
    else if (key == "lambda_explore") p.lambda_explore = v;
    else if (key == "lambda_efficiency") p.lambda_efficiency = v;
    else if (key == "lambda_format") p.lambda_format = v;
    else if (key == "eta_nodes") p.eta_nodes = v;
    else if (key == "eta_dist") p.eta_dist = v;
    else throw ConfigError("unknown reward field " + key);
  }
  return p;
}

nlohmann::json reward_to_json(const RewardBreakdown& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"executable", opt(r.executable_term)},
          {"explore", opt(r.explore_term)},
          {"efficiency", opt(r.efficiency_term)},
          {"format", opt(r.format_term)},
          {"total", r.total},
          {"success", r.success}};
}

RewardBreakdown reward_from_json(const nlohmann::json& doc) {
  auto opt = [&](const char* key) {
    const auto& v = doc.at(key);
    return v.is_null() ? std::optional<double>() : std::optional<double>(v.get<double>());
  };
  RewardBreakdown r;
  r.executable_term = opt("executable");
  r.explore_term = opt("explore");
  r.efficiency_term = opt("efficiency");
  r.format_term = opt("format");
  r.total = doc.at("total").get<double>();
  r.success = doc.at("success").get<bool>();
  return r;
}

RewardBreakdown compute_reward(const StepOutcome& outcome, bool success, const RewardParams& p) {
  validate_reward_params(p);
  RewardBreakdown r;
  if (success) {
    r.success = true;
    r.total = p.r_success;
    return r;
  }
  r.executable_term = outcome.executable ? p.lambda_executable : -p.lambda_executable;
  r.explore_term = p.lambda_explore * outcome.new_nodes / p.eta_nodes;
  r.efficiency_term = -p.lambda_efficiency * outcome.dist_delta / p.eta_dist;
  r.format_term = outcome.parsed() ? 0.0 : -p.lambda_format;
  r.total = *r.executable_term + *r.explore_term + *r.efficiency_term + *r.format_term;
  return r;
}

bool judge_success(const EnvSnapshot& s, const StepOutcome& outcome, const std::string& goal) {
  return outcome.done_called && goal_visible(s, goal);
}

}  // namespace scenesearch
