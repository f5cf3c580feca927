#pragma once

// Linear softmax student trained by cross-entropy toward a teacher and by
// PPO on the step reward, in two stages: few-shot SFT, then interleaved
// RL and SFT over training scenes.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "scenesearch/harness.hpp"
#include "scenesearch/planner.hpp"
#include "scenesearch/reward.hpp"
#include "scenesearch/rng.hpp"

namespace scenesearch {

inline constexpr int kFeatureVersion = 1;
inline constexpr int kStateFeatures = 12;
inline constexpr int kCandidateFeatures = 7;
inline constexpr int kFeatures = kStateFeatures + kCandidateFeatures;
inline constexpr int kTemplates = 5;

/// State features and one row per candidate. Row i is the state features
/// followed by candidate i's own features.
struct Featurized {
  Eigen::VectorXd state;
  Eigen::MatrixXd rows;
  std::vector<Action> candidates;
  std::vector<int> templates;

  std::optional<int> index_of(const Action& a) const;
};

/// Candidates are the executable actions over names in the scene graph plus
/// done(); with no rooms known, explore(current room) and done().
Featurized featurize(const EnvSnapshot& s, const Task& task);

struct PolicyParams {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(kFeatures, kTemplates);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(kStateFeatures);
  int feature_version = kFeatureVersion;
  bool operator==(const PolicyParams& o) const { return W == o.W && v == o.v && feature_version == o.feature_version; }
};

Eigen::VectorXd logits(const PolicyParams& p, const Featurized& f);
Eigen::VectorXd action_probs(const PolicyParams& p, const Featurized& f);
double state_value(const PolicyParams& p, const Featurized& f);

/// -log pi(teacher | state).
double ce_loss(const PolicyParams& p, const Featurized& f, int teacher);
/// d ce_loss / dW.
Eigen::MatrixXd ce_gradient(const PolicyParams& p, const Featurized& f, int teacher);
/// One gradient step. Throws TeacherNotInCandidates for an out-of-range index.
PolicyParams sft_update(PolicyParams p, const Featurized& f, int teacher, double lr);

struct Transition {
  Featurized features;
  int chosen = 0;
  double old_log_prob = 0.0;
  double reward = 0.0;
  bool done = false;
  double advantage = 0.0;
  double value_target = 0.0;
};

struct TrainConfig {
  int num_epochs_fewshot = 3;
  int num_epochs = 4;
  double learning_rate = 0.05;
  double ppo_clip = 0.2;
  double discount = 0.98;
  double gae_lambda = 0.95;
  int minibatch = 32;
  int ppo_epochs = 4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  std::uint64_t seed = 0;
  int fewshot_samples = 500;
  int tasks_per_scene = 25;
  double dataset_explore_prob = 0.25;
  bool rl_enabled = true;
  bool sft_enabled = true;
  /// Reuse the teacher's answer for a repeated prompt within one episode.
  bool cache_teacher = false;
  std::vector<std::uint64_t> train_seeds = kDefaultTrainSeeds;
  GenProfile profile;
  EpisodeConfig episode;
};

/// Throws InvalidParams when a field is out of range.
void validate_train_config(const TrainConfig& cfg);

/// Fills advantage and value_target with GAE over consecutive transitions;
/// an episode boundary is a transition with done set or the end of `batch`.
void compute_gae(std::vector<Transition>& batch, const PolicyParams& p, double discount, double gae_lambda);

/// Mean clipped surrogate min(r A, clip(r, 1-eps, 1+eps) A) plus the
/// entropy bonus, over `batch`.
double ppo_objective(const PolicyParams& p, const std::vector<Transition>& batch, double clip, double entropy_coef);
/// d ppo_objective / dW.
Eigen::MatrixXd ppo_gradient(const PolicyParams& p, const std::vector<Transition>& batch, double clip,
                             double entropy_coef);

struct PpoStats {
  bool degenerate = false;
  double min_applied_ratio = 1.0;
  double max_applied_ratio = 1.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  double objective = 0.0;
};

/// Minibatch gradient ascent on the surrogate and regression of the value
/// head toward value_target. A batch whose advantages are all zero leaves
/// the policy unchanged and reports degenerate.
PolicyParams ppo_update(PolicyParams p, const std::vector<Transition>& batch, const TrainConfig& cfg, Rng& rng,
                        PpoStats* stats = nullptr);

struct DatasetRecord {
  Featurized features;
  int teacher = 0;
};

nlohmann::json dataset_record_to_json(const DatasetRecord& r);
DatasetRecord dataset_record_from_json(const nlohmann::json& doc);
void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset(std::istream& in);

/// Teacher-labelled prompts from seeded rollouts over `scene_seeds`. The
/// rollout follows the teacher, with a seeded chance of taking a random
/// candidate instead.
std::vector<DatasetRecord> collect_teacher_dataset(const std::vector<std::uint64_t>& scene_seeds, int n,
                                                   const TrainConfig& cfg);

struct TrainLog {
  /// Mean CE over the offline set before stage 1, then after each epoch.
  std::vector<double> fewshot_loss;
  /// Per stage-2 episode: mean SFT loss of its steps.
  std::vector<double> episode_sft_loss;
  /// Per stage-2 epoch: success rate of the sampled training rollouts, %.
  std::vector<double> epoch_train_sr;
  std::vector<PpoStats> ppo;
  int skipped_labels = 0;
};

PolicyParams stage1_fewshot_sft(PolicyParams p, const std::vector<DatasetRecord>& data, const TrainConfig& cfg,
                                TrainLog* log = nullptr);
PolicyParams stage2_interleaved(PolicyParams p, const TrainConfig& cfg, TrainLog* log = nullptr);

/// Dataset collection, stage 1, then stage 2.
PolicyParams train_student(const TrainConfig& cfg, TrainLog* log = nullptr);

nlohmann::json checkpoint_to_json(const PolicyParams& p);
/// Throws SchemaMismatch on a version or shape mismatch.
PolicyParams checkpoint_from_json(const nlohmann::json& doc);

/// Acts greedily (highest probability, first on ties).
class StudentPlanner final : public Planner {
 public:
  explicit StudentPlanner(PolicyParams params, std::string name = "student")
      : params_(std::move(params)), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  PlannerReply respond(const EnvSnapshot& s, const Task& task, const PromptText& prompt) override;

 private:
  PolicyParams params_;
  std::string name_;
};

}  // namespace scenesearch
