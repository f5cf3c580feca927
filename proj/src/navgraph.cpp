#include "scenesearch/navgraph.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "scenesearch/errors.hpp"

namespace scenesearch {

void NavGraph::add_node(const NavNode& node) {
  if (!nodes_.empty() && node.id <= nodes_.back().id)
    throw InvalidHouse("nav nodes must be added in increasing id order");
  nodes_.push_back(node);
  adjacency_.emplace_back();
}

void NavGraph::add_edge(NodeId a, NodeId b, double length) {
  if (a == b) throw InvalidHouse("self loop on nav node " + std::to_string(a));
  if (!(length > 0)) throw InvalidHouse("nav edge length must be positive");
  if (a > b) std::swap(a, b);
  const std::size_t ia = index_of(a);
  const std::size_t ib = index_of(b);
  edges_.push_back(NavEdge{a, b, length});
  auto insert_sorted = [](std::vector<std::pair<NodeId, double>>& list, NodeId n, double len) {
    auto it = std::lower_bound(list.begin(), list.end(), n, [](const auto& p, NodeId v) { return p.first < v; });
    if (it != list.end() && it->first == n) {
      it->second = std::min(it->second, len);
    } else {
      list.insert(it, {n, len});
    }
  };
  insert_sorted(adjacency_[ia], b, length);
  insert_sorted(adjacency_[ib], a, length);
}

bool NavGraph::has_node(NodeId id) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id, [](const NavNode& n, NodeId v) { return n.id < v; });
  return it != nodes_.end() && it->id == id;
}

std::size_t NavGraph::index_of(NodeId id) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id, [](const NavNode& n, NodeId v) { return n.id < v; });
  if (it == nodes_.end() || it->id != id) throw UnknownNodeId("unknown nav node " + std::to_string(id));
  return static_cast<std::size_t>(it - nodes_.begin());
}

std::optional<NodeId> NavGraph::node_at(Cell cell) const {
  for (const NavNode& n : nodes_)
    if (n.cell == cell) return n.id;
  return std::nullopt;
}

NodeId NavGraph::snap(Cell cell) const {
  if (nodes_.empty()) throw Unreachable("empty navigation graph");
  if (auto exact = node_at(cell)) return *exact;
  NodeId best = nodes_.front().id;
  int best_d = std::numeric_limits<int>::max();
  for (const NavNode& n : nodes_) {
    const int d = manhattan(n.cell, cell);
    if (d < best_d) {
      best_d = d;
      best = n.id;
    }
  }
  return best;
}

std::vector<NodeId> NavGraph::room_nodes(RoomId room) const {
  std::vector<NodeId> out;
  for (const NavNode& n : nodes_)
    if (n.room == room) out.push_back(n.id);
  return out;
}

bool NavGraph::connected() const {
  if (nodes_.empty()) return true;
  std::vector<bool> reached(nodes_.size(), false);
  std::deque<std::size_t> queue{0};
  reached[0] = true;
  std::size_t count = 1;
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (const auto& [n, len] : adjacency_[i]) {
      const std::size_t j = index_of(n);
      if (reached[j]) continue;
      reached[j] = true;
      ++count;
      queue.push_back(j);
    }
  }
  return count == nodes_.size();
}

namespace {

bool walkable(const HouseSpec& house, Cell c) {
  if (!house.is_free(c)) return false;
  if (house.room_at(c)) return true;
  return std::any_of(house.doorways.begin(), house.doorways.end(), [&](const Doorway& d) { return d.cell == c; });
}

/// BFS step counts from `from` over walkable cells; -1 when unreachable.
std::vector<int> grid_steps_from(const HouseSpec& house, Cell from) {
  std::vector<int> steps(static_cast<std::size_t>(house.width * house.height), -1);
  if (!walkable(house, from)) return steps;
  steps[from.y * house.width + from.x] = 0;
  std::deque<Cell> queue{from};
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    const int here = steps[c.y * house.width + c.x];
    for (Cell n : {Cell{c.x + 1, c.y}, Cell{c.x - 1, c.y}, Cell{c.x, c.y + 1}, Cell{c.x, c.y - 1}}) {
      if (!walkable(house, n) || steps[n.y * house.width + n.x] >= 0) continue;
      steps[n.y * house.width + n.x] = here + 1;
      queue.push_back(n);
    }
  }
  return steps;
}

using Label = std::pair<double, std::vector<NodeId>>;

}  // namespace

std::optional<double> grid_distance(const HouseSpec& house, Cell from, Cell to) {
  if (!house.in_bounds(to)) return std::nullopt;
  const auto steps = grid_steps_from(house, from);
  const int s = steps[to.y * house.width + to.x];
  if (s < 0) return std::nullopt;
  return s * house.cell_size;
}

NavGraph build_nav_graph(const HouseSpec& house) {
  NavGraph g(house.cell_size);
  NodeId next = 0;
  std::vector<std::vector<NodeId>> room_waypoint_ids(house.rooms.size());
  for (const Room& room : house.rooms) {
    for (Cell c : house.room_waypoints(room.id)) {
      g.add_node(NavNode{next, c, room.id});
      room_waypoint_ids[static_cast<std::size_t>(room.id)].push_back(next++);
    }
  }
  // Lattice edges: consecutive waypoints along a row or a column.
  for (const Room& room : house.rooms) {
    const auto& ids = room_waypoint_ids[static_cast<std::size_t>(room.id)];
    for (NodeId a : ids) {
      const Cell ca = g.node(a).cell;
      std::optional<NodeId> right, down;
      for (NodeId b : ids) {
        const Cell cb = g.node(b).cell;
        if (cb.y == ca.y && cb.x > ca.x && (!right || cb.x < g.node(*right).cell.x)) right = b;
        if (cb.x == ca.x && cb.y > ca.y && (!down || cb.y < g.node(*down).cell.y)) down = b;
      }
      for (auto b : {right, down}) {
        if (!b) continue;
        g.add_edge(a, *b, manhattan(ca, g.node(*b).cell) * house.cell_size);
      }
    }
  }
  for (const Doorway& door : house.doorways) {
    const NodeId d = next++;
    g.add_node(NavNode{d, door.cell, kDoorwayRoom});
    const auto steps = grid_steps_from(house, door.cell);
    for (RoomId room : {door.room_a, door.room_b}) {
      std::optional<NodeId> best;
      int best_steps = std::numeric_limits<int>::max();
      for (NodeId w : room_waypoint_ids[static_cast<std::size_t>(room)]) {
        const Cell c = g.node(w).cell;
        const int s = steps[c.y * house.width + c.x];
        if (s > 0 && s < best_steps) {
          best_steps = s;
          best = w;
        }
      }
      if (!best) throw DisconnectedFreeSpace("doorway cannot reach room " + std::to_string(room));
      g.add_edge(d, *best, best_steps * house.cell_size);
    }
  }
  if (!g.connected()) throw DisconnectedFreeSpace("navigation graph is not connected");
  return g;
}

std::vector<RoomSubgraph> decompose_rooms(const NavGraph& g) {
  std::map<NodeId, NodeId> parent;
  for (const NavNode& n : g.nodes())
    if (!n.is_doorway()) parent[n.id] = n.id;
  auto find = [&](NodeId a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const NavEdge& e : g.edges()) {
    if (!parent.contains(e.a) || !parent.contains(e.b)) continue;
    const NodeId ra = find(e.a);
    const NodeId rb = find(e.b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::map<NodeId, RoomSubgraph> by_root;
  for (const NavNode& n : g.nodes()) {
    if (n.is_doorway()) continue;
    RoomSubgraph& sub = by_root[find(n.id)];
    sub.room = n.room;
    sub.nodes.push_back(n.id);
  }
  for (const NavEdge& e : g.edges()) {
    if (!parent.contains(e.a) || !parent.contains(e.b)) continue;
    by_root[find(e.a)].edges.push_back(e);
  }
  std::vector<RoomSubgraph> out;
  for (auto& [root, sub] : by_root) out.push_back(std::move(sub));
  std::sort(out.begin(), out.end(), [](const RoomSubgraph& a, const RoomSubgraph& b) {
    return std::tie(a.room, a.nodes.front()) < std::tie(b.room, b.nodes.front());
  });
  return out;
}

std::vector<std::pair<RoomId, RoomId>> doorway_room_pairs(const NavGraph& g) {
  std::set<std::pair<RoomId, RoomId>> pairs;
  for (const NavNode& n : g.nodes()) {
    if (!n.is_doorway()) continue;
    std::set<RoomId> rooms;
    for (const auto& [m, len] : g.neighbors(n.id))
      if (!g.node(m).is_doorway()) rooms.insert(g.node(m).room);
    for (auto a = rooms.begin(); a != rooms.end(); ++a)
      for (auto b = std::next(a); b != rooms.end(); ++b) pairs.insert({*a, *b});
  }
  return {pairs.begin(), pairs.end()};
}

NavGraph connect_rooms(const std::vector<RoomSubgraph>& subgraphs, const NavGraph& g) {
  std::map<RoomId, std::vector<NodeId>> room_nodes;
  std::set<NodeId> kept;
  for (const RoomSubgraph& sub : subgraphs)
    for (NodeId n : sub.nodes) {
      room_nodes[sub.room].push_back(n);
      kept.insert(n);
    }
  NavGraph out(g.cell_size());
  for (const NavNode& n : g.nodes())
    if (kept.contains(n.id)) out.add_node(n);
  for (const RoomSubgraph& sub : subgraphs)
    for (const NavEdge& e : sub.edges) out.add_edge(e.a, e.b, e.length);

  for (auto [ra, rb] : doorway_room_pairs(g)) {
    auto& a_nodes = room_nodes[ra];
    auto& b_nodes = room_nodes[rb];
    std::sort(a_nodes.begin(), a_nodes.end());
    std::sort(b_nodes.begin(), b_nodes.end());
    std::optional<std::pair<NodeId, NodeId>> best;
    double best_len = std::numeric_limits<double>::infinity();
    for (NodeId u : a_nodes) {
      const auto paths = shortest_paths_from(g, u);
      for (NodeId v : b_nodes) {
        const auto& p = paths[g.index_of(v)];
        if (p && p->length < best_len) {
          best_len = p->length;
          best = {u, v};
        }
      }
    }
    if (best) out.add_edge(best->first, best->second, best_len);
  }
  return out;
}

std::vector<std::optional<PathResult>> shortest_paths_from(const NavGraph& g, NodeId from) {
  const std::size_t n = g.size();
  std::vector<std::optional<Label>> best(n);
  std::vector<bool> done(n, false);
  std::set<Label> open;
  best[g.index_of(from)] = Label{0.0, {from}};
  open.insert(*best[g.index_of(from)]);
  while (!open.empty()) {
    Label label = *open.begin();
    open.erase(open.begin());
    const NodeId v = label.second.back();
    const std::size_t iv = g.index_of(v);
    if (done[iv]) continue;
    done[iv] = true;
    for (const auto& [m, len] : g.neighbors(v)) {
      const std::size_t im = g.index_of(m);
      if (done[im]) continue;
      Label candidate{label.first + len, label.second};
      candidate.second.push_back(m);
      if (!best[im] || candidate < *best[im]) {
        if (best[im]) open.erase(*best[im]);
        best[im] = candidate;
        open.insert(std::move(candidate));
      }
    }
  }
  std::vector<std::optional<PathResult>> out(n);
  for (std::size_t i = 0; i < n; ++i)
    if (best[i]) out[i] = PathResult{best[i]->first, std::move(best[i]->second)};
  return out;
}

PathResult shortest_path(const NavGraph& g, NodeId from, NodeId to) {
  auto paths = shortest_paths_from(g, from);
  auto& p = paths[g.index_of(to)];
  if (!p) throw Unreachable("no path from node " + std::to_string(from) + " to node " + std::to_string(to));
  return std::move(*p);
}

PathResult shortest_path(const NavGraph& g, Cell from, Cell to) { return shortest_path(g, g.snap(from), g.snap(to)); }

nlohmann::json nav_graph_to_json(const NavGraph& g) {
  using nlohmann::json;
  json nodes = json::array();
  for (const NavNode& n : g.nodes()) {
    json room = n.is_doorway() ? json("doorway") : json(n.room);
    nodes.push_back({{"id", n.id}, {"cell", {n.cell.x, n.cell.y}}, {"room", room}});
  }
  json edges = json::array();
  for (const NavEdge& e : g.edges()) edges.push_back({{"a", e.a}, {"b", e.b}, {"length", e.length}});
  return {{"version", 1}, {"cell_size", g.cell_size()}, {"nodes", nodes}, {"edges", edges}};
}

NavGraph nav_graph_from_json(const nlohmann::json& doc) {
  try {
    NavGraph g(doc.at("cell_size").get<double>());
    for (const auto& n : doc.at("nodes")) {
      const auto& room = n.at("room");
      g.add_node(NavNode{n.at("id").get<int>(), Cell{n.at("cell").at(0).get<int>(), n.at("cell").at(1).get<int>()},
                         room.is_string() ? kDoorwayRoom : room.get<int>()});
    }
    for (const auto& e : doc.at("edges")) g.add_edge(e.at("a").get<int>(), e.at("b").get<int>(), e.at("length").get<double>());
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("malformed graph document: ") + e.what());
  }
}

std::string nav_graph_to_dot(const NavGraph& g, const HouseSpec* house) {
  std::ostringstream out;
  out << "graph navgraph {\n";
  for (const NavNode& n : g.nodes()) {
    out << "  n" << n.id << " [label=\"" << n.id;
    if (n.is_doorway()) {
      out << " door\", shape=box";
    } else {
      out << ' ' << (house ? house->room_name(n.room) : "room" + std::to_string(n.room)) << '"';
    }
    out << ", pos=\"" << n.cell.x << ',' << -n.cell.y << "!\"];\n";
  }
  for (const NavEdge& e : g.edges()) out << "  n" << e.a << " -- n" << e.b << " [label=\"" << e.length << "\"];\n";
  out << "}\n";
  return out.str();
}

}  // namespace scenesearch
