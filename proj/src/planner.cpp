#include "scenesearch/planner.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <tuple>

#include "scenesearch/errors.hpp"
#include "scenesearch/rng.hpp"

namespace scenesearch {

namespace {

using RoomMask = std::uint32_t;

RoomMask bit(RoomId r) { return RoomMask{1} << r; }

RoomMask entered_rooms(const EnvSnapshot& s) {
  RoomMask mask = 0;
  for (const Room& r : s.env->house.rooms)
    if (s.unexplored_nodes(r.id).empty()) mask |= bit(r.id);
  return mask;
}

RoomMask path_rooms(const Environment& env, const PathResult& p) {
  RoomMask mask = 0;
  for (NodeId n : p.nodes) {
    const RoomId r = env.room_of_node(n);
    if (r != kDoorwayRoom) mask |= bit(r);
  }
  return mask;
}

Action navigate_to(const Environment& env, ObjectId id) {
  const RoomId room = env.house.room_of_object(id);
  return Action{Navigate{env.room_names[static_cast<std::size_t>(room)], env.object_names[static_cast<std::size_t>(id)]}};
}

Action open_action(const Environment& env, ObjectId id) {
  const RoomId room = env.house.room_of_object(id);
  return Action{GoToAndOpen{env.room_names[static_cast<std::size_t>(room)], env.object_names[static_cast<std::size_t>(id)]}};
}

Action explore_action(const Environment& env, RoomId room) {
  return Action{Explore{env.room_names[static_cast<std::size_t>(room)]}};
}

struct SearchState {
  NodeId node;
  RoomMask mask;
  auto operator<=>(const SearchState&) const = default;
};

}  // namespace

OraclePlan optimal_plan(const EnvSnapshot& s, const std::string& goal) {
  if (goal_visible(s, goal)) return OraclePlan{{Action{Done{}}}, 0.0};
  const Environment& env = *s.env;
  const HouseSpec& house = env.house;
  if (house.rooms.size() > 32) throw InvalidHouse("oracle search supports at most 32 rooms");

  // Goal instances revealed by entering a room, and closed containers holding one.
  RoomMask goal_rooms = 0;
  std::vector<ObjectId> goal_containers;
  for (const ObjectSpec& obj : house.objects) {
    if (obj.category != goal) continue;
    const auto holder = house.container_of(obj.id);
    if (!holder || s.world.is_open(*holder)) {
      goal_rooms |= bit(house.room_of_object(obj.id));
    } else if (std::find(goal_containers.begin(), goal_containers.end(), *holder) == goal_containers.end()) {
      goal_containers.push_back(*holder);
    }
  }
  std::sort(goal_containers.begin(), goal_containers.end());

  auto navigable = [&](RoomMask mask) {
    std::vector<ObjectId> out;
    for (const ObjectSpec& obj : house.objects) {
      if (s.scene.has_object(obj.id)) {
        out.push_back(obj.id);
        continue;
      }
      if (!(mask & bit(house.room_of_object(obj.id)))) continue;
      const auto holder = house.container_of(obj.id);
      if (!holder || s.world.is_open(*holder)) out.push_back(obj.id);
    }
    return out;
  };
  auto known = [&](RoomMask mask) {
    RoomMask out = mask;
    for (const Room& r : house.rooms)
      if (mask & bit(r.id))
        for (RoomId n : env.room_neighbors[static_cast<std::size_t>(r.id)]) out |= bit(n);
    for (const auto& [id, room] : s.scene.rooms()) out |= bit(id);
    return out;
  };

  struct Record {
    double cost;
    int parent;
    Action action;
  };
  std::vector<SearchState> states;
  std::vector<Record> records;
  std::map<SearchState, int> index;
  using Entry = std::tuple<double, std::uint64_t, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::uint64_t seq = 0;

  auto relax = [&](SearchState st, double cost, int parent, const Action& a) {
    auto [it, inserted] = index.try_emplace(st, static_cast<int>(states.size()));
    if (inserted) {
      states.push_back(st);
      records.push_back(Record{cost, parent, a});
    } else if (cost < records[static_cast<std::size_t>(it->second)].cost) {
      records[static_cast<std::size_t>(it->second)] = Record{cost, parent, a};
    } else {
      return;
    }
    open.emplace(cost, seq++, it->second);
  };

  relax(SearchState{s.robot_node(), entered_rooms(s)}, 0.0, -1, Action{Done{}});
  double best_terminal = std::numeric_limits<double>::infinity();
  int terminal_parent = -1;
  Action terminal_action;

  while (!open.empty()) {
    const auto [cost, order, idx] = open.top();
    open.pop();
    if (cost > records[static_cast<std::size_t>(idx)].cost) continue;
    if (cost >= best_terminal) break;
    const SearchState st = states[static_cast<std::size_t>(idx)];

    for (ObjectId c : goal_containers) {
      if (!(st.mask & bit(house.room_of_object(c)))) continue;
      const double total = cost + env.path(st.node, env.approach_node[static_cast<std::size_t>(c)]).length;
      if (total < best_terminal) {
        best_terminal = total;
        terminal_parent = idx;
        terminal_action = open_action(env, c);
      }
    }

    std::vector<std::pair<Action, NodeId>> moves;
    const RoomMask reachable_rooms = known(st.mask) & ~st.mask;
    for (const Room& r : house.rooms) {
      if (!(reachable_rooms & bit(r.id))) continue;
      std::optional<NodeId> target;
      double best_len = std::numeric_limits<double>::infinity();
      for (NodeId n : env.nav.room_nodes(r.id)) {
        const double len = env.path(st.node, n).length;
        if (len < best_len) {
          best_len = len;
          target = n;
        }
      }
      if (target) moves.emplace_back(explore_action(env, r.id), *target);
    }
    std::vector<NodeId> used_targets{st.node};
    for (ObjectId id : navigable(st.mask)) {
      const NodeId target = env.approach_node[static_cast<std::size_t>(id)];
      if (std::find(used_targets.begin(), used_targets.end(), target) != used_targets.end()) continue;
      used_targets.push_back(target);
      moves.emplace_back(navigate_to(env, id), target);
    }

    for (const auto& [action, target] : moves) {
      const PathResult& p = env.path(st.node, target);
      const RoomMask next_mask = st.mask | path_rooms(env, p);
      const double total = cost + p.length;
      if (next_mask & goal_rooms) {
        if (total < best_terminal) {
          best_terminal = total;
          terminal_parent = idx;
          terminal_action = action;
        }
        continue;
      }
      relax(SearchState{target, next_mask}, total, idx, action);
    }
  }

  OraclePlan plan;
  if (terminal_parent < 0) {
    plan.actions.push_back(Action{Done{}});
    return plan;
  }
  plan.distance = best_terminal;
  plan.actions.push_back(Action{Done{}});
  plan.actions.push_back(terminal_action);
  for (int i = terminal_parent; records[static_cast<std::size_t>(i)].parent >= 0; i = records[static_cast<std::size_t>(i)].parent)
    plan.actions.push_back(records[static_cast<std::size_t>(i)].action);
  std::reverse(plan.actions.begin(), plan.actions.end());
  return plan;
}

std::string response_text(const PlannerResponse& r) {
  return "Analysis: " + r.analysis + "\nReasoning: " + r.reasoning + "\nCommand: " + r.command + "\n";
}

PlannerResponse plan_oracle(const EnvSnapshot& s, const Task& task) {
  const OraclePlan plan = optimal_plan(s, task.goal_category);
  PlannerResponse r;
  if (goal_visible(s, task.goal_category)) {
    r.analysis = "A " + task.goal_category + " is already in the scene graph.";
    r.reasoning = "The task is complete, so I should stop.";
  } else {
    r.analysis = "No " + task.goal_category + " has been seen yet.";
    std::ostringstream why;
    why << "The shortest way to reveal one is";
    for (std::size_t i = 0; i < plan.actions.size(); ++i) why << (i ? ", " : " ") << render_command(plan.actions[i]);
    why << ".";
    r.reasoning = why.str();
  }
  r.command = render_command(plan.actions.front());
  return r;
}

std::vector<Action> prompt_candidates(const EnvSnapshot& s) {
  std::vector<Action> out;
  if (s.scene.rooms().empty()) {
    out.push_back(explore_action(*s.env, s.robot_room()));
    out.push_back(Action{Done{}});
    return out;
  }
  for (const auto& [id, obj] : s.scene.objects())
    out.push_back(Action{Navigate{s.scene.rooms().at(obj.room).name, obj.name}});
  for (const auto& [id, obj] : s.scene.objects())
    if (obj.articulated) out.push_back(Action{GoToAndOpen{s.scene.rooms().at(obj.room).name, obj.name}});
  out.push_back(Action{Close{}});
  for (const auto& [id, room] : s.scene.rooms()) out.push_back(Action{Explore{room.name}});
  out.push_back(Action{Done{}});
  return out;
}

PlannerResponse plan_random(const EnvSnapshot& s, const Task& task, std::uint64_t seed) {
  const auto candidates = prompt_candidates(s);
  Rng rng(mix_seed(fnv1a64(serialize_observation(s, task).text()), seed));
  const Action& pick = candidates[uniform_index(rng, candidates.size())];
  return PlannerResponse{"Picking a command at random.", "Baseline planner.", render_command(pick)};
}

PlannerResponse plan_greedy(const EnvSnapshot& s, const Task& task) {
  const Environment& env = *s.env;
  const NodeId here = s.robot_node();
  if (goal_visible(s, task.goal_category))
    return PlannerResponse{"The goal is in the scene graph.", "Stop now.", "done()"};

  std::optional<ObjectId> container;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [id, obj] : s.scene.objects()) {
    if (!obj.articulated || s.world.is_open(id)) continue;
    const double len = env.path(here, env.approach_node[static_cast<std::size_t>(id)]).length;
    if (len < best) {
      best = len;
      container = id;
    }
  }
  if (container)
    return PlannerResponse{"There is a closed container nearby.", "Open every container on the way.",
                           render_command(open_action(env, *container))};

  std::optional<RoomId> room;
  best = std::numeric_limits<double>::infinity();
  for (const auto& [id, node] : s.scene.rooms()) {
    const auto target = nearest_unexplored(s, id);
    if (!target) continue;
    const double len = env.path(here, *target).length;
    if (len < best) {
      best = len;
      room = id;
    }
  }
  if (room)
    return PlannerResponse{"All seen containers are open.", "Explore the nearest unexplored room.",
                           render_command(explore_action(env, *room))};
  return PlannerResponse{"Everything reachable has been explored.", "Nothing left to search.", "done()"};
}

PlannerReply OraclePlanner::respond(const EnvSnapshot& s, const Task& task, const PromptText&) {
  return PlannerReply{response_text(plan_oracle(s, task)), std::nullopt};
}

PlannerReply RandomPlanner::respond(const EnvSnapshot& s, const Task& task, const PromptText&) {
  return PlannerReply{response_text(plan_random(s, task, seed_)), std::nullopt};
}

PlannerReply GreedyPlanner::respond(const EnvSnapshot& s, const Task& task, const PromptText&) {
  return PlannerReply{response_text(plan_greedy(s, task)), std::nullopt};
}

std::string plan_request_frame(const PromptText& prompt) {
  return nlohmann::json{{"v", 1}, {"type", "plan"}, {"system", prompt.system}, {"user", prompt.user}}.dump();
}

std::string parse_plan_response_frame(const std::string& line) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw PlannerTransportError(std::string("malformed planner frame: ") + e.what());
  }
  if (!doc.is_object() || doc.value("v", 0) != 1 || doc.value("type", "") != "response" || !doc.contains("text") ||
      !doc["text"].is_string())
    throw PlannerTransportError("unexpected planner frame: " + line);
  return doc["text"].get<std::string>();
}

PlannerReply plan_remote(LineChannel& channel, const PromptText& prompt, std::chrono::milliseconds timeout) {
  channel.send_line(plan_request_frame(prompt));
  auto line = channel.recv_line(timeout);
  if (!line) return PlannerReply{"", ParseFailure{ParseFailureReason::kTimeout, "planner did not answer in time"}};
  return PlannerReply{parse_plan_response_frame(*line), std::nullopt};
}

RemotePlanner::RemotePlanner(std::unique_ptr<LineChannel> channel, std::string name, std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), name_(std::move(name)), timeout_(timeout) {}

PlannerReply RemotePlanner::respond(const EnvSnapshot&, const Task&, const PromptText& prompt) {
  if (stale_) {
    channel_->drain();
    stale_ = false;
  }
  PlannerReply reply = plan_remote(*channel_, prompt, timeout_);
  stale_ = reply.failure.has_value();
  return reply;
}

}  // namespace scenesearch
