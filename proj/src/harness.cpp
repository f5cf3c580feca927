#include "scenesearch/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <sstream>
#include <tuple>

#include "scenesearch/errors.hpp"
#include "scenesearch/rng.hpp"

namespace scenesearch {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json step_to_json(const StepRecord& s) {
  return {{"prompt_digest", s.prompt_digest},
          {"response_text", s.response_text},
          {"action", s.action},
          {"failure", s.failure ? nlohmann::json(*s.failure) : nlohmann::json(nullptr)},
          {"executable", s.executable},
          {"new_nodes", s.new_nodes},
          {"dist_delta", s.dist_delta},
          {"revealed", s.revealed},
          {"done_called", s.done_called},
          {"path", s.path},
          {"reward", reward_to_json(s.reward)}};
}

StepRecord step_from_json(const nlohmann::json& d) {
  StepRecord s;
  s.prompt_digest = d.at("prompt_digest").get<std::string>();
  s.response_text = d.at("response_text").get<std::string>();
  s.action = d.at("action").get<std::string>();
  if (!d.at("failure").is_null()) s.failure = d.at("failure").get<std::string>();
  s.executable = d.at("executable").get<bool>();
  s.new_nodes = d.at("new_nodes").get<int>();
  s.dist_delta = d.at("dist_delta").get<double>();
  s.revealed = d.at("revealed").get<std::vector<ObjectId>>();
  s.done_called = d.at("done_called").get<bool>();
  s.path = d.at("path").get<std::vector<NodeId>>();
  s.reward = reward_from_json(d.at("reward"));
  return s;
}

}  // namespace

nlohmann::json episode_to_json(const EpisodeRecord& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const StepRecord& s : r.steps) steps.push_back(step_to_json(s));
  return {{"schema", kEpisodeSchemaVersion},
          {"scene_seed", r.scene_seed},
          {"task_seed", r.task_seed},
          {"task", task_to_json(r.task)},
          {"planner", r.planner},
          {"steps", std::move(steps)},
          {"success", r.success},
          {"dist_total", r.dist_total},
          {"dist_success", r.success ? nlohmann::json(r.dist_total) : nlohmann::json(nullptr)},
          {"retrials", r.retrials},
          {"shortest_possible", r.shortest_possible},
          {"fault", r.fault ? nlohmann::json(*r.fault) : nlohmann::json(nullptr)},
          {"reward_params", reward_params_to_json(r.reward_params)},
          {"profile", profile_to_json(r.profile)},
          {"max_steps", r.max_steps}};
}

EpisodeRecord episode_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("schema") || doc["schema"] != kEpisodeSchemaVersion)
    throw SchemaMismatch("episode record is not schema version " + std::to_string(kEpisodeSchemaVersion));
  try {
    EpisodeRecord r;
    r.scene_seed = doc.at("scene_seed").get<std::uint64_t>();
    r.task_seed = doc.at("task_seed").get<std::uint64_t>();
    r.task = task_from_json(doc.at("task"));
    r.planner = doc.at("planner").get<std::string>();
    for (const auto& s : doc.at("steps")) r.steps.push_back(step_from_json(s));
    r.success = doc.at("success").get<bool>();
    r.dist_total = doc.at("dist_total").get<double>();
    r.retrials = doc.at("retrials").get<int>();
    r.shortest_possible = doc.at("shortest_possible").get<double>();
    if (!doc.at("fault").is_null()) r.fault = doc.at("fault").get<std::string>();
    r.reward_params = reward_params_from_json(doc.at("reward_params"));
    r.profile = profile_from_json(doc.at("profile"));
    r.max_steps = doc.at("max_steps").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("malformed episode record: ") + e.what());
  } catch (const ConfigError& e) {
    throw SchemaMismatch(std::string("malformed episode record: ") + e.what());
  }
}

Scenario make_scenario(std::uint64_t scene_seed, std::uint64_t task_seed, const GenProfile& profile) {
  Scenario sc;
  sc.scene_seed = scene_seed;
  sc.task_seed = task_seed;
  sc.profile = profile;
  HouseSpec house = generate_house(scene_seed, profile);
  sc.task = sample_task(house, task_seed);
  sc.env = make_environment(std::move(house));
  return sc;
}

EpisodeRecord run_episode(Planner& planner, const Scenario& scenario, const EpisodeConfig& cfg) {
  if (cfg.max_steps < 1) throw InvalidParams("max_steps must be at least 1");
  validate_reward_params(cfg.reward);
  const auto started = std::chrono::steady_clock::now();
  EpisodeRecord rec;
  rec.scene_seed = scenario.scene_seed;
  rec.task_seed = scenario.task_seed;
  rec.task = scenario.task;
  rec.planner = planner.name();
  rec.reward_params = cfg.reward;
  rec.profile = scenario.profile;
  rec.max_steps = cfg.max_steps;
  rec.shortest_possible = shortest_possible(scenario.env, scenario.task);

  EnvSnapshot s = reset_snapshot(scenario.env, scenario.task);
  for (int t = 0; t < cfg.max_steps; ++t) {
    const PromptText prompt = serialize_observation(s, scenario.task);
    PlannerReply reply;
    try {
      reply = planner.respond(s, scenario.task, prompt);
    } catch (const PlannerTransportError& e) {
      rec.fault = std::string("transport: ") + e.what();
      break;
    }
    StepOutcome outcome;
    if (reply.failure) {
      std::tie(s, outcome) = execute_failure(*reply.failure, std::move(s));
    } else {
      std::tie(s, outcome) = execute_parsed(parse_response(reply.text), std::move(s));
    }
    const bool success = judge_success(s, outcome, scenario.task.goal_category);

    StepRecord step;
    step.prompt_digest = hex64(fnv1a64(prompt.text()));
    step.response_text = reply.text;
    if (outcome.action) step.action = render_command(*outcome.action);
    if (outcome.failure) step.failure = reason_tag(outcome.failure->reason);
    step.executable = outcome.executable;
    step.new_nodes = outcome.new_nodes;
    step.dist_delta = outcome.dist_delta;
    step.revealed.assign(outcome.revealed.begin(), outcome.revealed.end());
    step.done_called = outcome.done_called;
    step.path = outcome.path;
    step.reward = compute_reward(outcome, success, cfg.reward);
    rec.steps.push_back(std::move(step));

    rec.dist_total += outcome.dist_delta;
    if (!outcome.executable) ++rec.retrials;
    if (outcome.done_called) {
      rec.success = success;
      break;
    }
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

double shortest_possible(const std::shared_ptr<const Environment>& env, const Task& task) {
  const EnvSnapshot start = reset_snapshot(env, task);
  if (goal_visible(start, task.goal_category)) return 0.0;
  const HouseSpec& house = env->house;

  // Snapshots are keyed by robot node, explored-node set and goal visibility;
  // opening is only ever terminal, so nothing else differs between equal keys.
  using Key = std::tuple<NodeId, std::set<NodeId>, bool>;
  auto key_of = [&](const EnvSnapshot& s) {
    return Key{s.robot_node(), s.nav_explored, goal_visible(s, task.goal_category)};
  };
  std::map<Key, double> best;
  std::vector<EnvSnapshot> pool;
  using Entry = std::tuple<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  auto push = [&](EnvSnapshot s) {
    Key key = key_of(s);
    const double d = s.world.dist_total;
    auto it = best.find(key);
    if (it != best.end() && it->second <= d) return;
    best[key] = d;
    pool.push_back(std::move(s));
    open.emplace(d, pool.size() - 1);
  };
  push(start);

  while (!open.empty()) {
    const auto [d, idx] = open.top();
    open.pop();
    const EnvSnapshot s = pool[idx];
    if (best.at(key_of(s)) < d) continue;
    if (goal_visible(s, task.goal_category)) return d;

    std::vector<Action> moves;
    std::set<NodeId> targets{s.robot_node()};
    for (const auto& [id, obj] : s.scene.objects()) {
      const std::string& room = s.scene.rooms().at(obj.room).name;
      const bool holds_goal = std::any_of(house.object(id).contents.begin(), house.object(id).contents.end(),
                                          [&](ObjectId c) { return house.object(c).category == task.goal_category; });
      if (holds_goal && !s.world.is_open(id)) moves.push_back(Action{GoToAndOpen{room, obj.name}});
      if (targets.insert(env->approach_node[static_cast<std::size_t>(id)]).second)
        moves.push_back(Action{Navigate{room, obj.name}});
    }
    for (const auto& [id, room] : s.scene.rooms()) moves.push_back(Action{Explore{room.name}});
    for (const Action& a : moves) {
      if (!is_executable(a, s)) continue;
      auto [next, outcome] = execute(a, s);
      push(std::move(next));
    }
  }
  throw Unreachable("no action sequence reveals a " + task.goal_category);
}

double spl_term(bool success, double shortest, double travelled) {
  if (!success) return 0.0;
  const double denom = std::max(shortest, travelled);
  return denom <= 0.0 ? 1.0 : shortest / denom;
}

EvalSummary summarize(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw EmptySet("cannot summarize an empty record set");
  EvalSummary out;
  out.episodes = records.size();
  std::size_t successes = 0;
  double spl = 0.0, dist = 0.0, dist_success = 0.0, retrials = 0.0;
  for (const EpisodeRecord& r : records) {
    successes += r.success ? 1 : 0;
    spl += spl_term(r.success, r.shortest_possible, r.dist_total);
    dist += r.dist_total;
    if (r.success) dist_success += r.dist_total;
    retrials += r.retrials;
  }
  const double n = static_cast<double>(records.size());
  out.sr = 100.0 * static_cast<double>(successes) / n;
  out.spl = 100.0 * spl / n;
  out.dist = dist / n;
  out.dist_success = successes ? dist_success / static_cast<double>(successes) : 0.0;
  out.retrials = retrials / n;
  return out;
}

std::pair<EvalSummary, std::vector<EpisodeRecord>> eval_suite(const PlannerFactory& make_planner,
                                                              const SuiteConfig& cfg, std::ostream* jsonl) {
  if (cfg.scene_seeds.empty()) throw ConfigError("suite has no scene seeds");
  if (cfg.runs_per_scene < 1) throw ConfigError("runs_per_scene must be at least 1");
  std::vector<EpisodeRecord> records;
  for (std::uint64_t scene : cfg.scene_seeds) {
    for (int run = 0; run < cfg.runs_per_scene; ++run) {
      try {
        const Scenario sc = make_scenario(scene, static_cast<std::uint64_t>(run), cfg.profile);
        auto planner = make_planner(scene, run);
        records.push_back(run_episode(*planner, sc, cfg.episode));
      } catch (const Error& e) {
        throw Error(e.code(), "scene " + std::to_string(scene) + " run " + std::to_string(run) + ": " + e.what());
      }
      if (jsonl) *jsonl << episode_to_json(records.back()).dump() << '\n';
    }
  }
  return {summarize(records), std::move(records)};
}

std::string format_summary_table(const std::vector<std::pair<std::string, EvalSummary>>& rows) {
  std::size_t width = 7;
  for (const auto& [name, s] : rows) width = std::max(width, name.size());
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %8s  %8s  %8s  %9s  %8s\n", static_cast<int>(width), "Planner", "SR %",
                "SPL %", "Dist.", "Retrials", "Runs");
  out << line;
  out << std::string(width + 2 + 8 + 2 + 8 + 2 + 8 + 2 + 9 + 2 + 8, '-') << '\n';
  for (const auto& [name, s] : rows) {
    std::snprintf(line, sizeof line, "%-*s  %8.2f  %8.2f  %8.2f  %9.2f  %8zu\n", static_cast<int>(width), name.c_str(),
                  s.sr, s.spl, s.dist, s.retrials, s.episodes);
    out << line;
  }
  return out.str();
}

std::string plot_data_csv(const std::vector<EpisodeRecord>& records) {
  std::ostringstream out;
  out << "scene_seed,task_seed,step,action,executable,dist_delta,cumulative_dist,reward\n";
  char line[512];
  for (const EpisodeRecord& r : records) {
    double cumulative = 0.0;
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
      const StepRecord& s = r.steps[i];
      cumulative += s.dist_delta;
      const std::string action = s.failure ? "parse_failure:" + *s.failure : s.action;
      std::snprintf(line, sizeof line, "%llu,%llu,%zu,\"%s\",%d,%.6f,%.6f,%.6f\n",
                    static_cast<unsigned long long>(r.scene_seed), static_cast<unsigned long long>(r.task_seed), i,
                    action.c_str(), s.executable ? 1 : 0, s.dist_delta, cumulative, s.reward.total);
      out << line;
    }
  }
  return out.str();
}

}  // namespace scenesearch
