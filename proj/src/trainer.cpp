#include "scenesearch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include "scenesearch/errors.hpp"

namespace scenesearch {

std::optional<int> Featurized::index_of(const Action& a) const {
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i] == a) return static_cast<int>(i);
  return std::nullopt;
}

namespace {

struct Target {
  std::optional<NodeId> node;
  std::optional<RoomId> room;
  std::optional<ObjectId> object;
};

Target target_of(const EnvSnapshot& s, const Action& a) {
  Target t;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Navigate> || std::is_same_v<T, GoToAndOpen>) {
          t.object = resolve_object(s, c.room, c.object);
          if (t.object) {
            t.node = s.env->approach_node[static_cast<std::size_t>(*t.object)];
            t.room = s.env->house.room_of_object(*t.object);
          }
        } else if constexpr (std::is_same_v<T, Explore>) {
          t.room = resolve_room(s, c.room);
          if (t.room) t.node = nearest_unexplored(s, *t.room);
        }
      },
      a.command);
  return t;
}

}  // namespace

Featurized featurize(const EnvSnapshot& s, const Task& task) {
  const Environment& env = *s.env;
  const HouseSpec& house = env.house;
  const std::string& goal = task.goal_category;
  Featurized f;
  for (const Action& a : prompt_candidates(s))
    if (is_executable(a, s)) f.candidates.push_back(a);
  if (f.candidates.empty() || !f.candidates.back().is<Done>()) f.candidates.push_back(Action{Done{}});

  f.state = Eigen::VectorXd::Zero(kStateFeatures);
  f.state[0] = 1.0;
  f.state[1] = goal_visible(s, goal) ? 1.0 : 0.0;
  int unexplored_nodes = 0, unexplored_rooms = 0, closed = 0;
  bool goal_room = false;
  for (const auto& [id, room] : s.scene.rooms()) {
    const auto left = s.unexplored_nodes(id).size();
    unexplored_nodes += static_cast<int>(left);
    if (left > 0) {
      ++unexplored_rooms;
      if (label_may_hold(room.label, goal)) goal_room = true;
    }
  }
  for (const auto& [id, obj] : s.scene.objects())
    if (obj.articulated && !s.world.is_open(id)) ++closed;
  f.state[2] = goal_room ? 1.0 : 0.0;
  f.state[3] = unexplored_nodes / 20.0;
  f.state[4] = unexplored_rooms / 4.0;
  f.state[5] = closed / 4.0;
  f.state[6] = s.world.dist_total / 50.0;
  if (s.prev_action) f.state[7 + static_cast<int>(kind_of(*s.prev_action))] = 1.0;

  const NodeId here = s.robot_node();
  const RoomId here_room = s.robot_room();
  f.rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(f.candidates.size()), kFeatures);
  for (std::size_t i = 0; i < f.candidates.size(); ++i) {
    const Action& a = f.candidates[i];
    const auto row = static_cast<Eigen::Index>(i);
    f.templates.push_back(static_cast<int>(kind_of(a)));
    f.rows.row(row).head(kStateFeatures) = f.state.transpose();
    Eigen::VectorXd c = Eigen::VectorXd::Zero(kCandidateFeatures);
    const Target t = target_of(s, a);
    if (t.node) c[0] = env.path(here, *t.node).length / 10.0;
    if (t.room) {
      c[1] = s.unexplored_nodes(*t.room).empty() ? 0.0 : 1.0;
      c[3] = label_may_hold(house.rooms[static_cast<std::size_t>(*t.room)].label, goal) ? 1.0 : 0.0;
      c[5] = *t.room == here_room ? 1.0 : 0.0;
    }
    if (t.object) {
      const ObjectSpec& obj = house.object(*t.object);
      const bool is_closed = obj.articulated && !s.world.is_open(obj.id);
      c[2] = is_closed ? 1.0 : 0.0;
      c[4] = is_closed && container_may_hold(obj.category, goal) ? 1.0 : 0.0;
      c[6] = obj.category == goal ? 1.0 : 0.0;
    }
    f.rows.row(row).tail(kCandidateFeatures) = c.transpose();
  }
  return f;
}

Eigen::VectorXd logits(const PolicyParams& p, const Featurized& f) {
  Eigen::VectorXd z(f.rows.rows());
  for (Eigen::Index i = 0; i < f.rows.rows(); ++i) z[i] = f.rows.row(i).dot(p.W.col(f.templates[static_cast<std::size_t>(i)]));
  return z;
}

Eigen::VectorXd action_probs(const PolicyParams& p, const Featurized& f) {
  Eigen::VectorXd z = logits(p, f);
  z.array() -= z.maxCoeff();
  Eigen::VectorXd e = z.array().exp();
  return e / e.sum();
}

double state_value(const PolicyParams& p, const Featurized& f) { return p.v.dot(f.state); }

namespace {

/// Adds sum_i coeff[i] * row_i into the template columns of g.
void accumulate(Eigen::MatrixXd& g, const Featurized& f, const Eigen::VectorXd& coeff) {
  for (Eigen::Index i = 0; i < f.rows.rows(); ++i)
    g.col(f.templates[static_cast<std::size_t>(i)]) += coeff[i] * f.rows.row(i).transpose();
}

void check_index(const Featurized& f, int index) {
  if (index < 0 || index >= static_cast<int>(f.candidates.size()))
    throw TeacherNotInCandidates("label index " + std::to_string(index) + " outside " +
                                 std::to_string(f.candidates.size()) + " candidates");
}

}  // namespace

double ce_loss(const PolicyParams& p, const Featurized& f, int teacher) {
  check_index(f, teacher);
  const Eigen::VectorXd z = logits(p, f);
  const double m = z.maxCoeff();
  return -(z[teacher] - m - std::log((z.array() - m).exp().sum()));
}

Eigen::MatrixXd ce_gradient(const PolicyParams& p, const Featurized& f, int teacher) {
  check_index(f, teacher);
  Eigen::VectorXd coeff = action_probs(p, f);
  coeff[teacher] -= 1.0;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(kFeatures, kTemplates);
  accumulate(g, f, coeff);
  return g;
}

PolicyParams sft_update(PolicyParams p, const Featurized& f, int teacher, double lr) {
  const Eigen::MatrixXd g = ce_gradient(p, f, teacher);
  if (lr != 0.0) p.W -= lr * g;
  return p;
}

void validate_train_config(const TrainConfig& cfg) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InvalidParams(what);
  };
  require(cfg.num_epochs_fewshot >= 0 && cfg.num_epochs >= 0, "epoch counts must be non-negative");
  require(cfg.learning_rate > 0.0, "learning_rate must be positive");
  require(cfg.ppo_clip > 0.0 && cfg.ppo_clip < 1.0, "ppo_clip must lie in (0, 1)");
  require(cfg.discount > 0.0 && cfg.discount <= 1.0, "discount must lie in (0, 1]");
  require(cfg.gae_lambda >= 0.0 && cfg.gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
  require(cfg.minibatch >= 1 && cfg.ppo_epochs >= 1, "minibatch and ppo_epochs must be at least 1");
  require(cfg.fewshot_samples >= 0 && cfg.tasks_per_scene >= 1, "sample and task counts out of range");
  require(cfg.dataset_explore_prob >= 0.0 && cfg.dataset_explore_prob <= 1.0, "dataset_explore_prob must lie in [0, 1]");
  require(cfg.value_coef >= 0.0 && cfg.entropy_coef >= 0.0, "coefficients must be non-negative");
  require(!cfg.train_seeds.empty(), "train_seeds must not be empty");
  require(cfg.episode.max_steps >= 1, "max_steps must be at least 1");
  validate_reward_params(cfg.episode.reward);
  validate_profile(cfg.profile);
}

void compute_gae(std::vector<Transition>& batch, const PolicyParams& p, double discount, double gae_lambda) {
  double running = 0.0;
  for (std::size_t k = batch.size(); k-- > 0;) {
    Transition& t = batch[k];
    const bool last = t.done || k + 1 == batch.size();
    const double value = state_value(p, t.features);
    const double next_value = last ? 0.0 : state_value(p, batch[k + 1].features);
    const double delta = t.reward + discount * next_value - value;
    running = delta + (last ? 0.0 : discount * gae_lambda * running);
    t.advantage = running;
    t.value_target = running + value;
  }
}

namespace {

struct SurrogateTerm {
  double value = 0.0;
  Eigen::VectorXd dlogits;
  double ratio = 1.0;
  double entropy = 0.0;
};

SurrogateTerm surrogate(const PolicyParams& p, const Transition& t, double clip, double entropy_coef) {
  SurrogateTerm out;
  const Eigen::VectorXd probs = action_probs(p, t.features);
  const Eigen::VectorXd logp = probs.array().max(1e-300).log();
  out.ratio = std::exp(logp[t.chosen] - t.old_log_prob);
  const double clipped = std::clamp(out.ratio, 1.0 - clip, 1.0 + clip);
  const double unclipped_obj = out.ratio * t.advantage;
  const double clipped_obj = clipped * t.advantage;
  out.entropy = -(probs.array() * logp.array()).sum();
  out.value = std::min(unclipped_obj, clipped_obj) + entropy_coef * out.entropy;

  out.dlogits = Eigen::VectorXd::Zero(probs.size());
  if (unclipped_obj <= clipped_obj) {
    Eigen::VectorXd dlogp = -probs;
    dlogp[t.chosen] += 1.0;
    out.dlogits += t.advantage * out.ratio * dlogp;
  }
  out.dlogits += entropy_coef * (-(probs.array() * (logp.array() + out.entropy))).matrix();
  return out;
}

}  // namespace

double ppo_objective(const PolicyParams& p, const std::vector<Transition>& batch, double clip, double entropy_coef) {
  if (batch.empty()) return 0.0;
  double sum = 0.0;
  for (const Transition& t : batch) sum += surrogate(p, t, clip, entropy_coef).value;
  return sum / static_cast<double>(batch.size());
}

Eigen::MatrixXd ppo_gradient(const PolicyParams& p, const std::vector<Transition>& batch, double clip,
                             double entropy_coef) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(kFeatures, kTemplates);
  if (batch.empty()) return g;
  for (const Transition& t : batch) accumulate(g, t.features, surrogate(p, t, clip, entropy_coef).dlogits);
  return g / static_cast<double>(batch.size());
}

PolicyParams ppo_update(PolicyParams p, const std::vector<Transition>& batch, const TrainConfig& cfg, Rng& rng,
                        PpoStats* stats) {
  if (batch.empty()) throw EmptyDataset("ppo_update needs a non-empty batch");
  PpoStats local;
  if (std::all_of(batch.begin(), batch.end(), [](const Transition& t) { return t.advantage == 0.0; })) {
    local.degenerate = true;
    if (stats) *stats = local;
    return p;
  }
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mb = static_cast<std::size_t>(cfg.minibatch);
  double entropy = 0.0, value_loss = 0.0, objective = 0.0;
  std::size_t counted = 0;
  for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    shuffle(rng, order);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      std::vector<Transition> chunk;
      for (std::size_t k = start; k < std::min(order.size(), start + mb); ++k) chunk.push_back(batch[order[k]]);
      Eigen::MatrixXd g = Eigen::MatrixXd::Zero(kFeatures, kTemplates);
      Eigen::VectorXd gv = Eigen::VectorXd::Zero(kStateFeatures);
      for (const Transition& t : chunk) {
        const SurrogateTerm term = surrogate(p, t, cfg.ppo_clip, cfg.entropy_coef);
        accumulate(g, t.features, term.dlogits);
        const double applied = std::clamp(term.ratio, 1.0 - cfg.ppo_clip, 1.0 + cfg.ppo_clip);
        local.min_applied_ratio = std::min(local.min_applied_ratio, applied);
        local.max_applied_ratio = std::max(local.max_applied_ratio, applied);
        const double err = state_value(p, t.features) - t.value_target;
        gv += err * t.features.state;
        value_loss += 0.5 * err * err;
        entropy += term.entropy;
        objective += term.value;
        ++counted;
      }
      const double n = static_cast<double>(chunk.size());
      p.W += cfg.learning_rate * g / n;
      p.v -= cfg.learning_rate * cfg.value_coef * gv / n;
    }
  }
  local.entropy = entropy / static_cast<double>(counted);
  local.value_loss = value_loss / static_cast<double>(counted);
  local.objective = objective / static_cast<double>(counted);
  if (stats) *stats = local;
  return p;
}

nlohmann::json dataset_record_to_json(const DatasetRecord& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.features.rows.rows(); ++i) {
    std::vector<double> row(r.features.rows.cols());
    for (Eigen::Index j = 0; j < r.features.rows.cols(); ++j) row[static_cast<std::size_t>(j)] = r.features.rows(i, j);
    rows.push_back(row);
  }
  std::vector<std::string> candidates;
  for (const Action& a : r.features.candidates) candidates.push_back(render_command(a));
  std::vector<double> state(r.features.state.data(), r.features.state.data() + r.features.state.size());
  return {{"v", kFeatureVersion},
          {"state", state},
          {"features", std::move(rows)},
          {"candidates", candidates},
          {"teacher_action", candidates.at(static_cast<std::size_t>(r.teacher))}};
}

DatasetRecord dataset_record_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("v").get<int>() != kFeatureVersion) throw SchemaMismatch("dataset feature version mismatch");
    DatasetRecord r;
    const auto state = doc.at("state").get<std::vector<double>>();
    if (state.size() != static_cast<std::size_t>(kStateFeatures)) throw SchemaMismatch("dataset state width mismatch");
    r.features.state = Eigen::Map<const Eigen::VectorXd>(state.data(), kStateFeatures);
    const auto candidates = doc.at("candidates").get<std::vector<std::string>>();
    const auto& rows = doc.at("features");
    if (rows.size() != candidates.size()) throw SchemaMismatch("dataset rows and candidates differ in length");
    r.features.rows = Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), kFeatures);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto row = rows[i].get<std::vector<double>>();
      if (row.size() != static_cast<std::size_t>(kFeatures)) throw SchemaMismatch("dataset feature width mismatch");
      for (int j = 0; j < kFeatures; ++j) r.features.rows(static_cast<Eigen::Index>(i), j) = row[static_cast<std::size_t>(j)];
      auto parsed = parse_command(candidates[i]);
      if (!std::holds_alternative<Action>(parsed)) throw SchemaMismatch("dataset candidate does not parse: " + candidates[i]);
      r.features.candidates.push_back(std::get<Action>(parsed));
      r.features.templates.push_back(static_cast<int>(kind_of(r.features.candidates.back())));
    }
    const std::string teacher = doc.at("teacher_action").get<std::string>();
    const auto it = std::find(candidates.begin(), candidates.end(), teacher);
    if (it == candidates.end()) throw TeacherNotInCandidates("teacher action " + teacher + " is not a candidate");
    r.teacher = static_cast<int>(it - candidates.begin());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("malformed dataset record: ") + e.what());
  }
}

void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records) {
  for (const DatasetRecord& r : records) out << dataset_record_to_json(r).dump() << '\n';
}

std::vector<DatasetRecord> read_dataset(std::istream& in) {
  std::vector<DatasetRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(dataset_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaMismatch(std::string("dataset line is not JSON: ") + e.what());
    }
  }
  return out;
}

namespace {

Action teacher_action(const EnvSnapshot& s, const Task& task) { return optimal_plan(s, task.goal_category).actions.front(); }

int sample_index(const Eigen::VectorXd& probs, Rng& rng) {
  const double u = uniform_unit(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

/// Environments are rebuilt per scene once and shared by every task on it.
class SceneCache {
 public:
  explicit SceneCache(const GenProfile& profile) : profile_(profile) {}
  const std::shared_ptr<const Environment>& get(std::uint64_t seed) {
    auto it = envs_.find(seed);
    if (it == envs_.end()) it = envs_.emplace(seed, make_environment(generate_house(seed, profile_))).first;
    return it->second;
  }

 private:
  GenProfile profile_;
  std::map<std::uint64_t, std::shared_ptr<const Environment>> envs_;
};

}  // namespace

std::vector<DatasetRecord> collect_teacher_dataset(const std::vector<std::uint64_t>& scene_seeds, int n,
                                                   const TrainConfig& cfg) {
  if (n <= 0) throw EmptyDataset("dataset size must be positive");
  if (scene_seeds.empty()) throw EmptyDataset("no scenes to collect from");
  Rng rng(mix_seed(cfg.seed, 1));
  SceneCache scenes(cfg.profile);
  std::vector<DatasetRecord> out;
  for (std::uint64_t episode = 0; static_cast<int>(out.size()) < n; ++episode) {
    const std::uint64_t scene = scene_seeds[episode % scene_seeds.size()];
    const auto& env = scenes.get(scene);
    const Task task = sample_task(env->house, 100000 + episode / scene_seeds.size());
    EnvSnapshot s = reset_snapshot(env, task);
    for (int t = 0; t < cfg.episode.max_steps && static_cast<int>(out.size()) < n; ++t) {
      DatasetRecord rec;
      rec.features = featurize(s, task);
      const Action teacher = teacher_action(s, task);
      const auto label = rec.features.index_of(teacher);
      if (!label) throw TeacherNotInCandidates("teacher action " + render_command(teacher) + " is not a candidate");
      rec.teacher = *label;
      Action next = teacher;
      // Only wander off the teacher's path while the episode would go on.
      if (!teacher.is<Done>() && uniform_unit(rng) < cfg.dataset_explore_prob) {
        next = rec.features.candidates[uniform_index(rng, rec.features.candidates.size())];
      }
      out.push_back(std::move(rec));
      auto [after, outcome] = execute(next, std::move(s));
      s = std::move(after);
      if (outcome.done_called) break;
    }
  }
  return out;
}

PolicyParams stage1_fewshot_sft(PolicyParams p, const std::vector<DatasetRecord>& data, const TrainConfig& cfg,
                                TrainLog* log) {
  if (data.empty()) throw EmptyDataset("few-shot stage needs at least one record");
  auto mean_loss = [&](const PolicyParams& params) {
    double sum = 0.0;
    for (const DatasetRecord& r : data) sum += ce_loss(params, r.features, r.teacher);
    return sum / static_cast<double>(data.size());
  };
  if (log) log->fewshot_loss.push_back(mean_loss(p));
  Rng rng(mix_seed(cfg.seed, 3));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.num_epochs_fewshot; ++epoch) {
    shuffle(rng, order);
    for (std::size_t i : order) p = sft_update(std::move(p), data[i].features, data[i].teacher, cfg.learning_rate);
    if (log) log->fewshot_loss.push_back(mean_loss(p));
  }
  return p;
}

PolicyParams stage2_interleaved(PolicyParams p, const TrainConfig& cfg, TrainLog* log) {
  validate_train_config(cfg);
  Rng rng(mix_seed(cfg.seed, 2));
  SceneCache scenes(cfg.profile);
  for (int epoch = 0; epoch < cfg.num_epochs; ++epoch) {
    int successes = 0, episodes = 0;
    for (std::uint64_t scene : cfg.train_seeds) {
      const auto& env = scenes.get(scene);
      for (int k = 0; k < cfg.tasks_per_scene; ++k) {
        const std::uint64_t task_seed = 1000 + static_cast<std::uint64_t>(epoch * cfg.tasks_per_scene + k);
        Task task;
        try {
          task = sample_task(env->house, task_seed);
        } catch (const Error& e) {
          throw Error(e.code(), "train scene " + std::to_string(scene) + " task " + std::to_string(task_seed) + ": " +
                                    e.what());
        }
        EnvSnapshot s = reset_snapshot(env, task);
        std::vector<Transition> transitions;
        std::vector<std::optional<int>> labels;
        std::map<std::string, Action> teacher_cache;
        bool success = false;
        for (int t = 0; t < cfg.episode.max_steps; ++t) {
          Featurized f = featurize(s, task);
          std::optional<Action> teacher;
          if (cfg.cache_teacher) {
            const std::string key = serialize_observation(s, task).text();
            auto it = teacher_cache.find(key);
            if (it == teacher_cache.end()) it = teacher_cache.emplace(key, teacher_action(s, task)).first;
            teacher = it->second;
          } else {
            teacher = teacher_action(s, task);
          }
          const Eigen::VectorXd probs = action_probs(p, f);
          const int chosen = sample_index(probs, rng);
          auto [after, outcome] = execute(f.candidates[static_cast<std::size_t>(chosen)], std::move(s));
          s = std::move(after);
          success = judge_success(s, outcome, task.goal_category);
          const double reward = compute_reward(outcome, success, cfg.episode.reward).total;
          labels.push_back(f.index_of(*teacher));
          transitions.push_back(Transition{std::move(f), chosen, std::log(std::max(probs[chosen], 1e-300)), reward,
                                           outcome.done_called, 0.0, 0.0});
          if (outcome.done_called) break;
        }
        transitions.back().done = true;
        ++episodes;
        successes += success ? 1 : 0;

        if (cfg.rl_enabled) {
          compute_gae(transitions, p, cfg.discount, cfg.gae_lambda);
          PpoStats stats;
          p = ppo_update(std::move(p), transitions, cfg, rng, &stats);
          if (log) log->ppo.push_back(stats);
        }
        if (cfg.sft_enabled) {
          double loss = 0.0;
          int counted = 0;
          for (std::size_t i = 0; i < transitions.size(); ++i) {
            if (!labels[i]) {
              if (log) ++log->skipped_labels;
              continue;
            }
            loss += ce_loss(p, transitions[i].features, *labels[i]);
            ++counted;
            p = sft_update(std::move(p), transitions[i].features, *labels[i], cfg.learning_rate);
          }
          if (log && counted) log->episode_sft_loss.push_back(loss / counted);
        }
      }
    }
    if (log) log->epoch_train_sr.push_back(100.0 * successes / std::max(episodes, 1));
  }
  return p;
}

PolicyParams train_student(const TrainConfig& cfg, TrainLog* log) {
  validate_train_config(cfg);
  PolicyParams p;
  if (cfg.num_epochs_fewshot > 0 && cfg.fewshot_samples > 0) {
    const auto data = collect_teacher_dataset(cfg.train_seeds, cfg.fewshot_samples, cfg);
    p = stage1_fewshot_sft(std::move(p), data, cfg, log);
  }
  return stage2_interleaved(std::move(p), cfg, log);
}

nlohmann::json checkpoint_to_json(const PolicyParams& p) {
  nlohmann::json w = nlohmann::json::array();
  for (Eigen::Index i = 0; i < p.W.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(p.W.cols()));
    for (Eigen::Index j = 0; j < p.W.cols(); ++j) row[static_cast<std::size_t>(j)] = p.W(i, j);
    w.push_back(row);
  }
  std::vector<double> v(p.v.data(), p.v.data() + p.v.size());
  return {{"kind", "scenesearch-student"},
          {"version", 1},
          {"feature_version", p.feature_version},
          {"features", kFeatures},
          {"templates", kTemplates},
          {"W", std::move(w)},
          {"v", v}};
}

PolicyParams checkpoint_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("kind") != "scenesearch-student" || doc.at("version") != 1)
      throw SchemaMismatch("not a version 1 student checkpoint");
    if (doc.at("feature_version") != kFeatureVersion || doc.at("features") != kFeatures ||
        doc.at("templates") != kTemplates)
      throw SchemaMismatch("checkpoint feature layout does not match this build");
    PolicyParams p;
    const auto& w = doc.at("W");
    if (w.size() != static_cast<std::size_t>(kFeatures)) throw SchemaMismatch("checkpoint W has the wrong shape");
    for (int i = 0; i < kFeatures; ++i) {
      const auto row = w[static_cast<std::size_t>(i)].get<std::vector<double>>();
      if (row.size() != static_cast<std::size_t>(kTemplates)) throw SchemaMismatch("checkpoint W has the wrong shape");
      for (int j = 0; j < kTemplates; ++j) p.W(i, j) = row[static_cast<std::size_t>(j)];
    }
    const auto v = doc.at("v").get<std::vector<double>>();
    if (v.size() != static_cast<std::size_t>(kStateFeatures)) throw SchemaMismatch("checkpoint v has the wrong shape");
    p.v = Eigen::Map<const Eigen::VectorXd>(v.data(), kStateFeatures);
    if (!p.W.allFinite() || !p.v.allFinite()) throw SchemaMismatch("checkpoint has non-finite weights");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("malformed checkpoint: ") + e.what());
  }
}

PlannerReply StudentPlanner::respond(const EnvSnapshot& s, const Task& task, const PromptText&) {
  const Featurized f = featurize(s, task);
  const Eigen::VectorXd probs = action_probs(params_, f);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = i;
  char confidence[64];
  std::snprintf(confidence, sizeof confidence, "Policy probability %.3f.", probs[best]);
  const PlannerResponse r{"Scoring " + std::to_string(probs.size()) + " candidate commands.", confidence,
                          render_command(f.candidates[static_cast<std::size_t>(best)])};
  return PlannerReply{response_text(r), std::nullopt};
}

}  // namespace scenesearch
