#include "scenesearch/scenegraph.hpp"

#include <algorithm>
#include <limits>

#include "scenesearch/errors.hpp"

namespace scenesearch {

const PathResult& Environment::path(NodeId from, NodeId to) const {
  return paths[nav.index_of(from)][nav.index_of(to)];
}

std::optional<RoomId> Environment::room_by_name(const std::string& name) const {
  for (std::size_t i = 0; i < room_names.size(); ++i)
    if (room_names[i] == name) return static_cast<RoomId>(i);
  return std::nullopt;
}

std::optional<ObjectId> Environment::object_by_name(RoomId room, const std::string& name) const {
  for (std::size_t i = 0; i < object_names.size(); ++i)
    if (object_names[i] == name && house.room_of_object(static_cast<ObjectId>(i)) == room) return static_cast<ObjectId>(i);
  return std::nullopt;
}

std::shared_ptr<const Environment> make_environment(HouseSpec house) {
  validate_house(house);
  auto env = std::make_shared<Environment>();
  env->house = std::move(house);
  const HouseSpec& h = env->house;
  env->full_graph = build_nav_graph(h);
  env->room_subgraphs = decompose_rooms(env->full_graph);
  env->nav = connect_rooms(env->room_subgraphs, env->full_graph);
  if (!env->nav.connected()) throw DisconnectedFreeSpace("reconnected navigation graph is not connected");

  env->room_neighbors.resize(h.rooms.size());
  for (const Doorway& d : h.doorways) {
    env->room_neighbors[static_cast<std::size_t>(d.room_a)].push_back(d.room_b);
    env->room_neighbors[static_cast<std::size_t>(d.room_b)].push_back(d.room_a);
  }
  for (auto& list : env->room_neighbors) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  for (const Room& r : h.rooms) env->room_names.push_back(h.room_name(r.id));
  for (const ObjectSpec& o : h.objects) {
    env->object_names.push_back(h.object_name(o.id));
    const RoomId room = h.room_of_object(o.id);
    NodeId best = -1;
    int best_d = std::numeric_limits<int>::max();
    for (NodeId n : env->nav.room_nodes(room)) {
      const int d = manhattan(env->nav.node(n).cell, o.cell);
      if (d < best_d) {
        best_d = d;
        best = n;
      }
    }
    env->approach_node.push_back(best);
  }
  for (const NavNode& n : env->nav.nodes()) {
    auto row = shortest_paths_from(env->nav, n.id);
    std::vector<PathResult> dense;
    dense.reserve(row.size());
    for (auto& p : row) dense.push_back(std::move(p).value());
    env->paths.push_back(std::move(dense));
  }
  return env;
}

std::vector<std::pair<RoomId, ObjectId>> SceneGraph::edges() const {
  std::vector<std::pair<RoomId, ObjectId>> out;
  for (const auto& [id, obj] : objects_) out.emplace_back(obj.room, id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ObjectId> SceneGraph::objects_in(RoomId room) const {
  std::vector<ObjectId> out;
  for (const auto& [id, obj] : objects_)
    if (obj.room == room) out.push_back(id);
  return out;
}

std::vector<NodeId> EnvSnapshot::unexplored_nodes(RoomId room) const {
  std::vector<NodeId> out;
  for (NodeId n : env->nav.room_nodes(room))
    if (!nav_explored.contains(n)) out.push_back(n);
  return out;
}

bool EnvSnapshot::operator==(const EnvSnapshot& other) const {
  return env == other.env && world == other.world && scene == other.scene && nav_explored == other.nav_explored &&
         prev_action == other.prev_action;
}

namespace {

RoomNode make_room_node(const Environment& env, RoomId room) {
  return RoomNode{room, env.house.rooms[static_cast<std::size_t>(room)].label,
                  env.room_names[static_cast<std::size_t>(room)]};
}

}  // namespace

EnvSnapshot update_scene_graph(EnvSnapshot s, const std::set<ObjectId>& newly_seen) {
  const Environment& env = *s.env;
  s.world = reveal(env.house, std::move(s.world), newly_seen);
  for (ObjectId id : newly_seen) {
    if (s.scene.has_object(id)) continue;
    const ObjectSpec& spec = env.house.object(id);
    const RoomId room = env.house.room_of_object(id);
    s.scene.add_room(make_room_node(env, room));
    s.scene.add_object(
        ObjectNode{id, spec.category, env.object_names[static_cast<std::size_t>(id)], spec.articulated, room});
  }
  return s;
}

Discovery discover_nodes(EnvSnapshot s, const std::set<NodeId>& node_ids) {
  for (NodeId n : node_ids)
    if (!s.env->nav.has_node(n)) throw UnknownNodeId("unknown nav node " + std::to_string(n));
  int fresh = 0;
  for (NodeId n : node_ids) fresh += s.nav_explored.insert(n).second ? 1 : 0;
  return Discovery{std::move(s), fresh};
}

Discovery enter_room(EnvSnapshot s, RoomId room) {
  const Environment& env = *s.env;
  const auto nodes = env.nav.room_nodes(room);
  Discovery d = discover_nodes(std::move(s), std::set<NodeId>(nodes.begin(), nodes.end()));
  d.snapshot.scene.add_room(make_room_node(env, room));
  for (RoomId n : env.room_neighbors[static_cast<std::size_t>(room)]) d.snapshot.scene.add_room(make_room_node(env, n));
  const auto now_visible = visible_in_room(env.house, room, d.snapshot.world);
  d.snapshot = update_scene_graph(std::move(d.snapshot), now_visible);
  return d;
}

EnvSnapshot reset_snapshot(std::shared_ptr<const Environment> env, const Task& task) {
  EnvSnapshot s;
  s.env = std::move(env);
  s.world = initial_world_state(s.env->house, task);
  s.world.robot_cell = s.env->nav.node(s.env->nav.snap(task.start_cell)).cell;
  const RoomId room = s.robot_room();
  return enter_room(std::move(s), room).snapshot;
}

bool goal_visible(const EnvSnapshot& s, const std::string& goal_category) {
  return std::any_of(s.scene.objects().begin(), s.scene.objects().end(),
                     [&](const auto& entry) { return entry.second.category == goal_category; });
}

}  // namespace scenesearch
