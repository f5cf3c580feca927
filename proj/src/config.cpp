#include "scenesearch/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <toml.hpp>

#include "scenesearch/errors.hpp"

namespace scenesearch {

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  t.profile = profile;
  t.episode.max_steps = max_steps;
  t.episode.reward = reward;
  return t;
}

SuiteConfig RunConfig::suite_config() const {
  SuiteConfig s;
  s.scene_seeds = test_seeds;
  s.runs_per_scene = runs_per_scene;
  s.profile = profile;
  s.episode.max_steps = max_steps;
  s.episode.reward = reward;
  return s;
}

namespace {

std::string where(const std::string& table, const std::string& key) { return table.empty() ? key : table + "." + key; }

std::int64_t as_int(const toml::node& n, const std::string& name) {
  if (auto v = n.value_exact<std::int64_t>()) return *v;
  throw ConfigError(name + " must be an integer");
}

int as_int32(const toml::node& n, const std::string& name) {
  const auto v = as_int(n, name);
  if (v < -2147483647 || v > 2147483647) throw ConfigError(name + " is out of range");
  return static_cast<int>(v);
}

std::uint64_t as_seed(const toml::node& n, const std::string& name) {
  const auto v = as_int(n, name);
  if (v < 0) throw ConfigError(name + " must be non-negative");
  return static_cast<std::uint64_t>(v);
}

double as_double(const toml::node& n, const std::string& name) {
  if (auto v = n.value_exact<double>()) return *v;
  if (auto v = n.value_exact<std::int64_t>()) return static_cast<double>(*v);
  throw ConfigError(name + " must be a number");
}

bool as_bool(const toml::node& n, const std::string& name) {
  if (auto v = n.value_exact<bool>()) return *v;
  throw ConfigError(name + " must be a boolean");
}

std::string as_string(const toml::node& n, const std::string& name) {
  if (auto v = n.value_exact<std::string>()) return *v;
  throw ConfigError(name + " must be a string");
}

std::vector<std::uint64_t> as_seeds(const toml::node& n, const std::string& name) {
  const toml::array* arr = n.as_array();
  if (!arr) throw ConfigError(name + " must be an array of integers");
  std::vector<std::uint64_t> out;
  for (const toml::node& item : *arr) out.push_back(as_seed(item, name));
  return out;
}

using Setter = std::function<void(const toml::node&, const std::string&)>;

void apply_table(const toml::table& table, const std::string& table_name, const std::map<std::string, Setter>& setters) {
  for (const auto& [key, node] : table) {
    const std::string k(key.str());
    auto it = setters.find(k);
    if (it == setters.end()) throw ConfigError("unknown config key " + where(table_name, k));
    it->second(node, where(table_name, k));
  }
}

const toml::table& as_table(const toml::node& n, const std::string& name) {
  if (const toml::table* t = n.as_table()) return *t;
  throw ConfigError(name + " must be a table");
}

}  // namespace

RunConfig parse_config(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config syntax error at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
  RunConfig cfg;
  GenProfile& g = cfg.profile;
  RewardParams& r = cfg.reward;
  TrainConfig& t = cfg.train;

  const std::map<std::string, Setter> generation = {
      {"min_rooms", [&](const toml::node& n, const std::string& k) { g.min_rooms = as_int32(n, k); }},
      {"max_rooms", [&](const toml::node& n, const std::string& k) { g.max_rooms = as_int32(n, k); }},
      {"min_objects_per_room", [&](const toml::node& n, const std::string& k) { g.min_objects_per_room = as_int32(n, k); }},
      {"max_objects_per_room", [&](const toml::node& n, const std::string& k) { g.max_objects_per_room = as_int32(n, k); }},
      {"min_articulated", [&](const toml::node& n, const std::string& k) { g.min_articulated = as_int32(n, k); }},
      {"min_room_side", [&](const toml::node& n, const std::string& k) { g.min_room_side = as_int32(n, k); }},
      {"max_room_side", [&](const toml::node& n, const std::string& k) { g.max_room_side = as_int32(n, k); }},
  };
  const std::map<std::string, Setter> reward = {
      {"r_success", [&](const toml::node& n, const std::string& k) { r.r_success = as_double(n, k); }},
      {"lambda_executable", [&](const toml::node& n, const std::string& k) { r.lambda_executable = as_double(n, k); }},
      {"lambda_explore", [&](const toml::node& n, const std::string& k) { r.lambda_explore = as_double(n, k); }},
      {"lambda_efficiency", [&](const toml::node& n, const std::string& k) { r.lambda_efficiency = as_double(n, k); }},
      {"lambda_format", [&](const toml::node& n, const std::string& k) { r.lambda_format = as_double(n, k); }},
      {"eta_nodes", [&](const toml::node& n, const std::string& k) { r.eta_nodes = as_double(n, k); }},
      {"eta_dist", [&](const toml::node& n, const std::string& k) { r.eta_dist = as_double(n, k); }},
  };
  const std::map<std::string, Setter> train = {
      {"num_epochs_fewshot", [&](const toml::node& n, const std::string& k) { t.num_epochs_fewshot = as_int32(n, k); }},
      {"num_epochs", [&](const toml::node& n, const std::string& k) { t.num_epochs = as_int32(n, k); }},
      {"learning_rate", [&](const toml::node& n, const std::string& k) { t.learning_rate = as_double(n, k); }},
      {"ppo_clip", [&](const toml::node& n, const std::string& k) { t.ppo_clip = as_double(n, k); }},
      {"discount", [&](const toml::node& n, const std::string& k) { t.discount = as_double(n, k); }},
      {"gae_lambda", [&](const toml::node& n, const std::string& k) { t.gae_lambda = as_double(n, k); }},
      {"minibatch", [&](const toml::node& n, const std::string& k) { t.minibatch = as_int32(n, k); }},
      {"ppo_epochs", [&](const toml::node& n, const std::string& k) { t.ppo_epochs = as_int32(n, k); }},
      {"value_coef", [&](const toml::node& n, const std::string& k) { t.value_coef = as_double(n, k); }},
      {"entropy_coef", [&](const toml::node& n, const std::string& k) { t.entropy_coef = as_double(n, k); }},
      {"fewshot_samples", [&](const toml::node& n, const std::string& k) { t.fewshot_samples = as_int32(n, k); }},
      {"tasks_per_scene", [&](const toml::node& n, const std::string& k) { t.tasks_per_scene = as_int32(n, k); }},
      {"dataset_explore_prob", [&](const toml::node& n, const std::string& k) { t.dataset_explore_prob = as_double(n, k); }},
      {"rl_enabled", [&](const toml::node& n, const std::string& k) { t.rl_enabled = as_bool(n, k); }},
      {"sft_enabled", [&](const toml::node& n, const std::string& k) { t.sft_enabled = as_bool(n, k); }},
      {"cache_teacher", [&](const toml::node& n, const std::string& k) { t.cache_teacher = as_bool(n, k); }},
      {"train_seeds", [&](const toml::node& n, const std::string& k) { t.train_seeds = as_seeds(n, k); }},
  };
  const std::map<std::string, Setter> suite = {
      {"test_seeds", [&](const toml::node& n, const std::string& k) { cfg.test_seeds = as_seeds(n, k); }},
      {"runs_per_scene", [&](const toml::node& n, const std::string& k) { cfg.runs_per_scene = as_int32(n, k); }},
  };
  const std::map<std::string, Setter> output = {
      {"dir", [&](const toml::node& n, const std::string& k) { cfg.output_dir = as_string(n, k); }},
  };
  const std::map<std::string, Setter> top = {
      {"seed", [&](const toml::node& n, const std::string& k) { cfg.seed = as_seed(n, k); }},
      {"max_steps", [&](const toml::node& n, const std::string& k) { cfg.max_steps = as_int32(n, k); }},
      {"planner", [&](const toml::node& n, const std::string& k) { cfg.planner = as_string(n, k); }},
      {"planner_timeout_ms", [&](const toml::node& n, const std::string& k) { cfg.planner_timeout_ms = as_int32(n, k); }},
      {"generation", [&](const toml::node& n, const std::string& k) { apply_table(as_table(n, k), k, generation); }},
      {"reward", [&](const toml::node& n, const std::string& k) { apply_table(as_table(n, k), k, reward); }},
      {"train", [&](const toml::node& n, const std::string& k) { apply_table(as_table(n, k), k, train); }},
      {"suite", [&](const toml::node& n, const std::string& k) { apply_table(as_table(n, k), k, suite); }},
      {"output", [&](const toml::node& n, const std::string& k) { apply_table(as_table(n, k), k, output); }},
  };
  apply_table(root, "", top);
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void validate_config(const RunConfig& cfg) {
  try {
    if (cfg.max_steps < 1) throw ConfigError("max_steps must be at least 1");
    if (cfg.planner_timeout_ms < 1) throw ConfigError("planner_timeout_ms must be positive");
    if (cfg.runs_per_scene < 1) throw ConfigError("suite.runs_per_scene must be at least 1");
    if (cfg.test_seeds.empty()) throw ConfigError("suite.test_seeds must not be empty");
    if (cfg.train.train_seeds.empty()) throw ConfigError("train.train_seeds must not be empty");
    parse_planner_ref(cfg.planner);
    validate_train_config(cfg.train_config());
  } catch (const InvalidParams& e) {
    throw ConfigError(e.what());
  }
}

namespace {

std::string toml_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out = "[";
  for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? ", " : "") + std::to_string(seeds[i]);
  return out + "]";
}

std::string toml_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string toml_string(const std::string& s) {
  std::ostringstream out;
  out << toml::value<std::string>(s);
  return out.str();
}

}  // namespace

std::string config_to_toml(const RunConfig& c) {
  std::ostringstream o;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  o << "seed = " << c.seed << "\n"
    << "max_steps = " << c.max_steps << "\n"
    << "planner = " << toml_string(c.planner) << "\n"
    << "planner_timeout_ms = " << c.planner_timeout_ms << "\n\n"
    << "[generation]\n"
    << "min_rooms = " << c.profile.min_rooms << "\n"
    << "max_rooms = " << c.profile.max_rooms << "\n"
    << "min_objects_per_room = " << c.profile.min_objects_per_room << "\n"
    << "max_objects_per_room = " << c.profile.max_objects_per_room << "\n"
    << "min_articulated = " << c.profile.min_articulated << "\n"
    << "min_room_side = " << c.profile.min_room_side << "\n"
    << "max_room_side = " << c.profile.max_room_side << "\n\n"
    << "[reward]\n"
    << "r_success = " << toml_double(c.reward.r_success) << "\n"
    << "lambda_executable = " << toml_double(c.reward.lambda_executable) << "\n"
    << "lambda_explore = " << toml_double(c.reward.lambda_explore) << "\n"
    << "lambda_efficiency = " << toml_double(c.reward.lambda_efficiency) << "\n"
    << "lambda_format = " << toml_double(c.reward.lambda_format) << "\n"
    << "eta_nodes = " << toml_double(c.reward.eta_nodes) << "\n"
    << "eta_dist = " << toml_double(c.reward.eta_dist) << "\n\n"
    << "[train]\n"
    << "num_epochs_fewshot = " << c.train.num_epochs_fewshot << "\n"
    << "num_epochs = " << c.train.num_epochs << "\n"
    << "learning_rate = " << toml_double(c.train.learning_rate) << "\n"
    << "ppo_clip = " << toml_double(c.train.ppo_clip) << "\n"
    << "discount = " << toml_double(c.train.discount) << "\n"
    << "gae_lambda = " << toml_double(c.train.gae_lambda) << "\n"
    << "minibatch = " << c.train.minibatch << "\n"
    << "ppo_epochs = " << c.train.ppo_epochs << "\n"
    << "value_coef = " << toml_double(c.train.value_coef) << "\n"
    << "entropy_coef = " << toml_double(c.train.entropy_coef) << "\n"
    << "fewshot_samples = " << c.train.fewshot_samples << "\n"
    << "tasks_per_scene = " << c.train.tasks_per_scene << "\n"
    << "dataset_explore_prob = " << toml_double(c.train.dataset_explore_prob) << "\n"
    << "rl_enabled = " << b(c.train.rl_enabled) << "\n"
    << "sft_enabled = " << b(c.train.sft_enabled) << "\n"
    << "cache_teacher = " << b(c.train.cache_teacher) << "\n"
    << "train_seeds = " << toml_seeds(c.train.train_seeds) << "\n\n"
    << "[suite]\n"
    << "test_seeds = " << toml_seeds(c.test_seeds) << "\n"
    << "runs_per_scene = " << c.runs_per_scene << "\n\n"
    << "[output]\n"
    << "dir = " << toml_string(c.output_dir) << "\n";
  return o.str();
}

nlohmann::json config_to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  return {{"seed", c.seed},
          {"max_steps", c.max_steps},
          {"planner", c.planner},
          {"planner_timeout_ms", c.planner_timeout_ms},
          {"generation", profile_to_json(c.profile)},
          {"reward", reward_params_to_json(c.reward)},
          {"train",
           {{"num_epochs_fewshot", t.num_epochs_fewshot},
            {"num_epochs", t.num_epochs},
            {"learning_rate", t.learning_rate},
            {"ppo_clip", t.ppo_clip},
            {"discount", t.discount},
            {"gae_lambda", t.gae_lambda},
            {"minibatch", t.minibatch},
            {"ppo_epochs", t.ppo_epochs},
            {"value_coef", t.value_coef},
            {"entropy_coef", t.entropy_coef},
            {"fewshot_samples", t.fewshot_samples},
            {"tasks_per_scene", t.tasks_per_scene},
            {"dataset_explore_prob", t.dataset_explore_prob},
            {"rl_enabled", t.rl_enabled},
            {"sft_enabled", t.sft_enabled},
            {"cache_teacher", t.cache_teacher},
            {"train_seeds", t.train_seeds}}},
          {"suite", {{"test_seeds", c.test_seeds}, {"runs_per_scene", c.runs_per_scene}}},
          {"output", {{"dir", c.output_dir}}}};
}

PlannerRef parse_planner_ref(const std::string& spec) {
  PlannerRef ref;
  ref.name = spec;
  if (spec == "oracle") {
    ref.kind = PlannerRef::Kind::kOracle;
  } else if (spec == "random") {
    ref.kind = PlannerRef::Kind::kRandom;
  } else if (spec == "greedy") {
    ref.kind = PlannerRef::Kind::kGreedy;
  } else if (spec.rfind("student:", 0) == 0 && spec.size() > 8) {
    ref.kind = PlannerRef::Kind::kStudent;
    ref.argument = spec.substr(8);
    ref.name = "student";
  } else if (spec.rfind("remote:", 0) == 0 && spec.size() > 7) {
    ref.kind = PlannerRef::Kind::kRemote;
    ref.argument = spec.substr(7);
    if (ref.argument.rfind("exec:", 0) != 0) {
      const auto colon = ref.argument.rfind(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == ref.argument.size() ||
          ref.argument.find_first_not_of("0123456789", colon + 1) != std::string::npos)
        throw ConfigError("remote planner address must be host:port or exec:<command>, got '" + ref.argument + "'");
    }
    ref.name = "remote";
  } else {
    throw ConfigError("unknown planner '" + spec + "' (oracle|random|greedy|student:<ckpt>|remote:<addr>)");
  }
  return ref;
}

std::unique_ptr<Planner> make_planner(const PlannerRef& ref, std::uint64_t seed, std::uint64_t scene_seed, int run,
                                      int timeout_ms) {
  switch (ref.kind) {
    case PlannerRef::Kind::kOracle:
      return std::make_unique<OraclePlanner>();
    case PlannerRef::Kind::kRandom:
      return std::make_unique<RandomPlanner>(mix_seed(mix_seed(seed, scene_seed), static_cast<std::uint64_t>(run)));
    case PlannerRef::Kind::kGreedy:
      return std::make_unique<GreedyPlanner>();
    case PlannerRef::Kind::kStudent: {
      std::ifstream in(ref.argument);
      if (!in) throw ConfigError("cannot read checkpoint " + ref.argument);
      nlohmann::json doc;
      try {
        in >> doc;
      } catch (const nlohmann::json::exception& e) {
        throw SchemaMismatch("checkpoint " + ref.argument + " is not JSON: " + e.what());
      }
      return std::make_unique<StudentPlanner>(checkpoint_from_json(doc));
    }
    case PlannerRef::Kind::kRemote: {
      auto channel = ref.argument.rfind("exec:", 0) == 0 ? spawn_process(ref.argument.substr(5))
                                                         : connect_tcp(ref.argument);
      return std::make_unique<RemotePlanner>(std::move(channel), "remote", std::chrono::milliseconds(timeout_ms));
    }
  }
  throw ConfigError("unknown planner kind");
}

}  // namespace scenesearch
