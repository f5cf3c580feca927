#include "scenesearch/envserver.hpp"

#include <thread>
#include <vector>

#include "scenesearch/errors.hpp"

namespace scenesearch {

namespace {

class BadRequest : public Error {
 public:
  BadRequest(const std::string& code, const std::string& what) : Error(code, what) {}
};

nlohmann::json observation_json(const EnvSnapshot& s, const Task& task) {
  const PromptText prompt = serialize_observation(s, task);
  return {{"system", prompt.system}, {"user", prompt.user}};
}

template <typename T>
T field(const nlohmann::json& req, const char* key) {
  if (!req.contains(key)) throw BadRequest("bad_request", std::string("missing field '") + key + "'");
  try {
    return req.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw BadRequest("bad_request", std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

nlohmann::json error_frame(const std::string& code, const std::string& message) {
  return {{"v", kProtocolVersion}, {"type", "error"}, {"code", code}, {"message", message}};
}

nlohmann::json EnvSession::handle_reset(const nlohmann::json& req) {
  const auto seed = field<std::uint64_t>(req, "seed");
  const auto task_seed = req.contains("task_seed") ? field<std::uint64_t>(req, "task_seed") : seed;
  GenProfile profile = cfg_.profile;
  RewardParams reward = cfg_.reward;
  int max_steps = cfg_.max_steps;
  try {
    if (req.contains("profile")) profile = profile_from_json(req.at("profile"));
    validate_profile(profile);
    if (req.contains("reward_params")) reward = reward_params_from_json(req.at("reward_params"), reward);
    validate_reward_params(reward);
  } catch (const nlohmann::json::exception& e) {
    throw BadRequest("bad_request", e.what());
  }
  if (req.contains("max_steps")) max_steps = field<int>(req, "max_steps");
  if (max_steps < 1) throw BadRequest("bad_request", "max_steps must be at least 1");

  SessionState session;
  session.id = "s" + std::to_string(next_id_++);
  session.scenario = make_scenario(seed, task_seed, profile);
  session.snapshot = reset_snapshot(session.scenario.env, session.scenario.task);
  session.reward = reward;
  session.max_steps = max_steps;
  nlohmann::json resp = {{"v", kProtocolVersion},
                         {"type", "reset_ok"},
                         {"session", session.id},
                         {"observation", observation_json(session.snapshot, session.scenario.task)},
                         {"task", task_to_json(session.scenario.task)},
                         {"params", reward_params_to_json(reward)},
                         {"max_steps", max_steps}};
  const std::string id = session.id;
  sessions_.emplace(id, std::move(session));
  return resp;
}

nlohmann::json EnvSession::handle_step(const nlohmann::json& req) {
  const auto id = field<std::string>(req, "session");
  const auto text = field<std::string>(req, "response_text");
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw BadRequest("unknown_session", "no session '" + id + "' on this connection");
  SessionState& session = it->second;
  if (session.finished) throw BadRequest("session_finished", "session '" + id + "' has already finished");

  const Task& task = session.scenario.task;
  auto [next, outcome] = execute_parsed(parse_response(text), std::move(session.snapshot));
  session.snapshot = std::move(next);
  ++session.steps;
  const bool success = judge_success(session.snapshot, outcome, task.goal_category);
  const RewardBreakdown reward = compute_reward(outcome, success, session.reward);
  session.finished = outcome.done_called || session.steps >= session.max_steps;

  return {{"v", kProtocolVersion},
          {"type", "step_ok"},
          {"session", id},
          {"step", session.steps},
          {"observation", observation_json(session.snapshot, task)},
          {"action", outcome.action ? nlohmann::json(render_command(*outcome.action)) : nlohmann::json(nullptr)},
          {"failure", outcome.failure ? nlohmann::json(reason_tag(outcome.failure->reason)) : nlohmann::json(nullptr)},
          {"executable", outcome.executable},
          {"new_nodes", outcome.new_nodes},
          {"dist_delta", outcome.dist_delta},
          {"dist_total", session.snapshot.world.dist_total},
          {"reward", reward_to_json(reward)},
          {"done", session.finished},
          {"success", success}};
}

std::string EnvSession::handle_line(const std::string& line) {
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    return error_frame("bad_request", "request is not valid JSON").dump();
  }
  try {
    if (!req.is_object()) throw BadRequest("bad_request", "request must be a JSON object");
    if (!req.contains("v")) throw BadRequest("bad_request", "missing field 'v'");
    if (req.at("v") != kProtocolVersion) throw BadRequest("unsupported_version", "only protocol version 1 is supported");
    const auto type = field<std::string>(req, "type");
    if (type == "reset") return handle_reset(req).dump();
    if (type == "step") return handle_step(req).dump();
    throw BadRequest("bad_request", "unknown request type '" + type + "'");
  } catch (const Error& e) {
    return error_frame(e.code(), e.what()).dump();
  } catch (const std::exception& e) {
    return error_frame("internal_error", e.what()).dump();
  }
}

void serve_channel(LineChannel& channel, const ServerConfig& cfg) {
  EnvSession session(cfg);
  while (true) {
    std::optional<std::string> line;
    try {
      line = channel.recv_line(std::nullopt);
    } catch (const PlannerTransportError&) {
      return;
    }
    if (!line) return;
    if (line->empty()) continue;
    try {
      channel.send_line(session.handle_line(*line));
    } catch (const PlannerTransportError&) {
      return;
    }
  }
}

void serve_tcp(TcpListener& listener, const ServerConfig& cfg) {
  std::vector<std::thread> workers;
  while (auto channel = listener.accept()) {
    workers.emplace_back([ch = std::shared_ptr<LineChannel>(std::move(channel)), cfg] { serve_channel(*ch, cfg); });
  }
  for (auto& w : workers) w.join();
}

}  // namespace scenesearch
