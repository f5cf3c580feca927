#pragma once

// Episode runner, shortest achievable distance, and SR/SPL/Dist/Retrials.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenesearch/planner.hpp"
#include "scenesearch/reward.hpp"

namespace scenesearch {

struct StepRecord {
  /// FNV-1a digest of the prompt text, hex.
  std::string prompt_digest;
  std::string response_text;
  /// Canonical command, empty on a parse failure.
  std::string action;
  std::optional<std::string> failure;
  bool executable = false;
  int new_nodes = 0;
  double dist_delta = 0.0;
  std::vector<ObjectId> revealed;
  bool done_called = false;
  std::vector<NodeId> path;
  RewardBreakdown reward;
};

struct EpisodeRecord {
  std::uint64_t scene_seed = 0;
  std::uint64_t task_seed = 0;
  Task task;
  std::string planner;
  std::vector<StepRecord> steps;
  bool success = false;
  double dist_total = 0.0;
  int retrials = 0;
  double shortest_possible = 0.0;
  double wall_time = 0.0;
  std::optional<std::string> fault;
  RewardParams reward_params;
  GenProfile profile;
  int max_steps = 0;
};

inline constexpr int kEpisodeSchemaVersion = 1;

/// Log record. Wall time is left out so reruns are byte-identical.
nlohmann::json episode_to_json(const EpisodeRecord& r);
/// Throws SchemaMismatch on a missing or different schema version.
EpisodeRecord episode_from_json(const nlohmann::json& doc);

struct EpisodeConfig {
  int max_steps = 30;
  RewardParams reward;
};

/// Scene and task for one suite entry.
struct Scenario {
  std::uint64_t scene_seed = 0;
  std::uint64_t task_seed = 0;
  GenProfile profile;
  std::shared_ptr<const Environment> env;
  Task task;
};

Scenario make_scenario(std::uint64_t scene_seed, std::uint64_t task_seed, const GenProfile& profile = {});

/// serialize -> plan -> parse -> execute -> reward until done() or the step
/// budget runs out. A PlannerTransportError ends the episode as a failure
/// with `fault` set.
EpisodeRecord run_episode(Planner& planner, const Scenario& scenario, const EpisodeConfig& cfg);

/// Minimal travel over action sequences that end with the goal visible,
/// found by uniform-cost search over executed snapshots. Throws Unreachable
/// when no sequence reveals the goal.
double shortest_possible(const std::shared_ptr<const Environment>& env, const Task& task);

struct EvalSummary {
  std::size_t episodes = 0;
  double sr = 0.0;
  double spl = 0.0;
  double dist = 0.0;
  double dist_success = 0.0;
  double retrials = 0.0;
};

/// Contribution of one record to SPL, in [0, 1].
double spl_term(bool success, double shortest, double travelled);
/// Throws EmptySet.
EvalSummary summarize(const std::vector<EpisodeRecord>& records);

struct SuiteConfig {
  std::vector<std::uint64_t> scene_seeds{101, 102, 103, 104, 105, 106, 107};
  int runs_per_scene = 25;
  GenProfile profile;
  EpisodeConfig episode;
};

inline const std::vector<std::uint64_t> kDefaultTrainSeeds{1, 2, 3, 4, 5, 6, 7, 8};
inline const std::vector<std::uint64_t> kDefaultTestSeeds{101, 102, 103, 104, 105, 106, 107};

/// Builds the planner for one (scene seed, run index).
using PlannerFactory = std::function<std::unique_ptr<Planner>(std::uint64_t scene_seed, int run)>;

/// Runs every (scene, run) pair in seed order. Records are streamed to
/// `jsonl` when given. Errors are rethrown with scene/run context.
std::pair<EvalSummary, std::vector<EpisodeRecord>> eval_suite(const PlannerFactory& make_planner,
                                                              const SuiteConfig& cfg, std::ostream* jsonl = nullptr);

/// Aligned text table with SR, SPL, Dist and Retrials columns.
std::string format_summary_table(const std::vector<std::pair<std::string, EvalSummary>>& rows);

/// One CSV row per step: scene, run, step, action, executable, dist, reward.
std::string plot_data_csv(const std::vector<EpisodeRecord>& records);

}  // namespace scenesearch
