#pragma once

// Run configuration loaded from TOML. Every key is optional; unknown keys
// are rejected.
//
//   seed = 0
//   max_steps = 30
//   planner = "oracle"          # oracle | random | greedy | student:<ckpt> | remote:<host:port> | remote:exec:<cmd>
//   planner_timeout_ms = 60000
//
//   [generation]  min_rooms, max_rooms, min_objects_per_room, max_objects_per_room,
//                 min_articulated, min_room_side, max_room_side
//   [reward]      r_success, lambda_executable, lambda_explore, lambda_efficiency,
//                 lambda_format, eta_nodes, eta_dist
//   [train]       num_epochs_fewshot, num_epochs, learning_rate, ppo_clip, discount,
//                 gae_lambda, minibatch, ppo_epochs, value_coef, entropy_coef,
//                 fewshot_samples, tasks_per_scene, dataset_explore_prob,
//                 rl_enabled, sft_enabled, cache_teacher, train_seeds
//   [suite]       test_seeds, runs_per_scene
//   [output]      dir

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenesearch/trainer.hpp"

namespace scenesearch {

struct RunConfig {
  std::uint64_t seed = 0;
  int max_steps = 30;
  std::string planner = "oracle";
  int planner_timeout_ms = 60000;
  GenProfile profile;
  RewardParams reward;
  TrainConfig train;
  std::vector<std::uint64_t> test_seeds = kDefaultTestSeeds;
  int runs_per_scene = 25;
  std::string output_dir = "out";

  /// Copies seed, max_steps, profile and reward into the train config.
  TrainConfig train_config() const;
  SuiteConfig suite_config() const;
};

/// Throws ConfigError on syntax errors, unknown keys, wrong types or
/// out-of-range values.
RunConfig parse_config(const std::string& toml_text);
RunConfig load_config(const std::string& path);
/// Canonical TOML of every field, suitable for parse_config.
std::string config_to_toml(const RunConfig& cfg);
nlohmann::json config_to_json(const RunConfig& cfg);
/// Throws ConfigError.
void validate_config(const RunConfig& cfg);

struct PlannerRef {
  enum class Kind { kOracle, kRandom, kGreedy, kStudent, kRemote };
  Kind kind = Kind::kOracle;
  /// Checkpoint path or remote endpoint.
  std::string argument;
  std::string name;
};

/// Throws ConfigError for an unknown planner spec.
PlannerRef parse_planner_ref(const std::string& spec);

/// Builds the planner for one episode. Random planners are seeded from
/// (run seed, scene seed, run index).
std::unique_ptr<Planner> make_planner(const PlannerRef& ref, std::uint64_t seed, std::uint64_t scene_seed, int run,
                                      int timeout_ms);

}  // namespace scenesearch
