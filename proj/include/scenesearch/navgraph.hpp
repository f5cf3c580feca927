#pragma once

// Navigation graph over free space: a coarse grid skeleton of room waypoints
// plus one node per doorway, its per-room decomposition, and the
// reconnected graph the robot actually moves on.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scenesearch/world.hpp"

namespace scenesearch {

using NodeId = int;

/// room field of doorway nodes.
inline constexpr RoomId kDoorwayRoom = -1;

struct NavNode {
  NodeId id = 0;
  Cell cell;
  RoomId room = kDoorwayRoom;
  bool is_doorway() const { return room == kDoorwayRoom; }
  bool operator==(const NavNode&) const = default;
};

/// Undirected; stored with a < b.
struct NavEdge {
  NodeId a = 0;
  NodeId b = 0;
  double length = 0.0;
  bool operator==(const NavEdge&) const = default;
};

class NavGraph {
 public:
  explicit NavGraph(double cell_size = HouseSpec::kDefaultCellSize) : cell_size_(cell_size) {}

  /// Ids must be added in strictly increasing order.
  void add_node(const NavNode& node);
  /// Throws UnknownNodeId; rejects self loops and non-positive lengths.
  void add_edge(NodeId a, NodeId b, double length);

  const std::vector<NavNode>& nodes() const { return nodes_; }
  const std::vector<NavEdge>& edges() const { return edges_; }
  std::size_t size() const { return nodes_.size(); }
  double cell_size() const { return cell_size_; }

  bool has_node(NodeId id) const;
  /// Dense position of a node in nodes(). Throws UnknownNodeId.
  std::size_t index_of(NodeId id) const;
  const NavNode& node(NodeId id) const { return nodes_[index_of(id)]; }
  /// Neighbours sorted by id.
  const std::vector<std::pair<NodeId, double>>& neighbors(NodeId id) const { return adjacency_[index_of(id)]; }
  std::optional<NodeId> node_at(Cell cell) const;
  /// Exact node at `cell`, else the Manhattan-nearest node (ties: smallest id).
  NodeId snap(Cell cell) const;
  std::vector<NodeId> room_nodes(RoomId room) const;
  bool connected() const;

  bool operator==(const NavGraph& other) const { return nodes_ == other.nodes_ && edges_ == other.edges_; }

 private:
  double cell_size_;
  std::vector<NavNode> nodes_;
  std::vector<NavEdge> edges_;
  std::vector<std::vector<std::pair<NodeId, double>>> adjacency_;
};

/// Shortest walkable distance in meters between two cells, moving
/// 4-connected through room and doorway cells. nullopt when unreachable.
std::optional<double> grid_distance(const HouseSpec& house, Cell from, Cell to);

/// Room waypoints (ids assigned room by room) then one node per doorway.
/// Throws DisconnectedFreeSpace if the result is not connected.
NavGraph build_nav_graph(const HouseSpec& house);

struct RoomSubgraph {
  RoomId room = 0;
  std::vector<NodeId> nodes;
  std::vector<NavEdge> edges;
};

/// Drops doorway nodes and their edges; one subgraph per remaining connected
/// component, ordered by (room, smallest node id).
std::vector<RoomSubgraph> decompose_rooms(const NavGraph& g);

/// Pairs of rooms that share a doorway node in `g`, each as (lower, higher).
std::vector<std::pair<RoomId, RoomId>> doorway_room_pairs(const NavGraph& g);

/// Rejoins room subgraphs with one bridge edge per doorway-adjacent room
/// pair, between the node pair closest in `g` (ties: smallest id pair). The
/// bridge length is that shortest-path distance in `g`.
NavGraph connect_rooms(const std::vector<RoomSubgraph>& subgraphs, const NavGraph& g);

struct PathResult {
  double length = 0.0;
  std::vector<NodeId> nodes;
  bool operator==(const PathResult&) const = default;
};

/// Minimal-length path; equal lengths resolve to the lexicographically
/// smallest node sequence. Throws Unreachable.
PathResult shortest_path(const NavGraph& g, NodeId from, NodeId to);
/// Cells are snapped to graph nodes first.
PathResult shortest_path(const NavGraph& g, Cell from, Cell to);
/// Same tie-break rule, every reachable target at once (index = node index).
std::vector<std::optional<PathResult>> shortest_paths_from(const NavGraph& g, NodeId from);

nlohmann::json nav_graph_to_json(const NavGraph& g);
NavGraph nav_graph_from_json(const nlohmann::json& doc);
std::string nav_graph_to_dot(const NavGraph& g, const HouseSpec* house = nullptr);

}  // namespace scenesearch
