#pragma once

// Two-level scene graph over seen objects, explored navigation nodes, and the
// immutable per-house environment they refer to.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scenesearch/action.hpp"
#include "scenesearch/navgraph.hpp"
#include "scenesearch/world.hpp"

namespace scenesearch {

/// Immutable per-house data shared by every episode in that house.
struct Environment {
  HouseSpec house;
  NavGraph full_graph;
  std::vector<RoomSubgraph> room_subgraphs;
  /// Reconnected graph; motion and exploration accounting use this one.
  NavGraph nav;
  std::vector<std::vector<RoomId>> room_neighbors;
  /// Nav node the robot stands on to interact with each object.
  std::vector<NodeId> approach_node;
  std::vector<std::string> room_names;
  std::vector<std::string> object_names;
  /// All-pairs canonical shortest paths over `nav`, by dense node index.
  std::vector<std::vector<PathResult>> paths;

  const PathResult& path(NodeId from, NodeId to) const;
  std::optional<RoomId> room_by_name(const std::string& name) const;
  std::optional<ObjectId> object_by_name(RoomId room, const std::string& name) const;
  RoomId room_of_node(NodeId node) const { return nav.node(node).room; }
};

/// Validates the house and precomputes graphs and paths.
std::shared_ptr<const Environment> make_environment(HouseSpec house);

struct RoomNode {
  RoomId id = 0;
  std::string label;
  std::string name;
  bool operator==(const RoomNode&) const = default;
};

struct ObjectNode {
  ObjectId id = 0;
  std::string category;
  std::string name;
  bool articulated = false;
  RoomId room = 0;
  bool operator==(const ObjectNode&) const = default;
};

class SceneGraph {
 public:
  const std::map<RoomId, RoomNode>& rooms() const { return rooms_; }
  const std::map<ObjectId, ObjectNode>& objects() const { return objects_; }
  /// (room, object) containment edges, one per object node.
  std::vector<std::pair<RoomId, ObjectId>> edges() const;
  std::vector<ObjectId> objects_in(RoomId room) const;
  bool has_room(RoomId room) const { return rooms_.contains(room); }
  bool has_object(ObjectId id) const { return objects_.contains(id); }

  void add_room(RoomNode node) { rooms_.try_emplace(node.id, std::move(node)); }
  void add_object(ObjectNode node) { objects_.try_emplace(node.id, std::move(node)); }

  bool operator==(const SceneGraph&) const = default;

 private:
  std::map<RoomId, RoomNode> rooms_;
  std::map<ObjectId, ObjectNode> objects_;
};

/// The environment state s = {G_V, G_S, Env} seen by planners.
struct EnvSnapshot {
  std::shared_ptr<const Environment> env;
  WorldState world;
  SceneGraph scene;
  std::set<NodeId> nav_explored;
  std::optional<Action> prev_action;

  NodeId robot_node() const { return env->nav.snap(world.robot_cell); }
  RoomId robot_room() const { return env->room_of_node(robot_node()); }
  std::vector<NodeId> unexplored_nodes(RoomId room) const;
  bool operator==(const EnvSnapshot& other) const;
};

/// Start of an episode: robot placed on the start cell's node and the start
/// room entered.
EnvSnapshot reset_snapshot(std::shared_ptr<const Environment> env, const Task& task);

/// Marks ids seen and wires each new one to its ground-truth room node,
/// creating the room node on first sight. Throws UnknownObjectId.
EnvSnapshot update_scene_graph(EnvSnapshot s, const std::set<ObjectId>& newly_seen);

struct Discovery {
  EnvSnapshot snapshot;
  int new_nodes = 0;
};

/// nav_explored' = nav_explored ∪ ids. Throws UnknownNodeId.
Discovery discover_nodes(EnvSnapshot s, const std::set<NodeId>& node_ids);

/// Robot enters a room: all its nodes are discovered, its visible objects
/// revealed, and it plus its doorway neighbours appear as room nodes.
Discovery enter_room(EnvSnapshot s, RoomId room);

bool goal_visible(const EnvSnapshot& s, const std::string& goal_category);

}  // namespace scenesearch
