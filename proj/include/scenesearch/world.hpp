#pragma once

// Ground-truth houses: procedural generation, tasks, visibility and the
// seen/unseen object partition.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace scenesearch {

struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

inline int manhattan(Cell a, Cell b) {
  return (a.x > b.x ? a.x - b.x : b.x - a.x) + (a.y > b.y ? a.y - b.y : b.y - a.y);
}

using RoomId = int;
using ObjectId = int;

/// Axis-aligned rectangle of lattice cells, inclusive of x0/y0, exclusive of x0+w/y0+h.
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;
  bool contains(Cell c) const { return c.x >= x0 && c.x < x0 + w && c.y >= y0 && c.y < y0 + h; }
  int area() const { return w * h; }
  bool operator==(const Rect&) const = default;
};

/// Closed room-type vocabulary; `other_room` is the fallback label.
const std::vector<std::string>& room_label_vocabulary();

/// Whether the generator can place `category` in a room labelled `label`,
/// either as furniture, as a container, or inside one of its containers.
bool label_may_hold(const std::string& label, const std::string& category);
/// Whether the generator can put `category` inside a `container` category.
bool container_may_hold(const std::string& container, const std::string& category);

struct Room {
  RoomId id = 0;
  std::string label;
  Rect rect;
  bool operator==(const Room&) const = default;
};

struct Doorway {
  RoomId room_a = 0;
  RoomId room_b = 0;
  Cell cell;
  bool operator==(const Doorway&) const = default;
};

struct ObjectSpec {
  ObjectId id = 0;
  std::string category;
  Cell cell;
  bool articulated = false;
  std::vector<ObjectId> contents;
  bool open = false;
  bool operator==(const ObjectSpec&) const = default;
};

class HouseSpec {
 public:
  static constexpr double kDefaultCellSize = 0.5;

  std::vector<Room> rooms;
  std::vector<Doorway> doorways;
  int width = 0;
  int height = 0;
  /// Row-major; true means free.
  std::vector<bool> free_cells;
  double cell_size = kDefaultCellSize;
  std::vector<ObjectSpec> objects;

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  bool is_free(Cell c) const { return in_bounds(c) && free_cells[c.y * width + c.x]; }
  void set_free(Cell c, bool value) { free_cells[c.y * width + c.x] = value; }

  /// Room containing the cell, or nullopt for doorways and walls.
  std::optional<RoomId> room_at(Cell c) const;
  const ObjectSpec& object(ObjectId id) const;
  bool has_object(ObjectId id) const { return id >= 0 && id < static_cast<int>(objects.size()); }
  RoomId room_of_object(ObjectId id) const;
  /// Container holding `id`, if any.
  std::optional<ObjectId> container_of(ObjectId id) const;
  /// Display name of a room: its label, suffixed with an ordinal when the
  /// label repeats in the house.
  std::string room_name(RoomId id) const;
  /// Display name of an object, unique within its room.
  std::string object_name(ObjectId id) const;

  /// Waypoint cells of the coarsened lattice inside a room (stride 2, kept
  /// off the walls when the room is wide enough). Sorted row-major.
  std::vector<Cell> room_waypoints(RoomId id) const;

  bool operator==(const HouseSpec&) const = default;
};

/// Throws InvalidHouse naming the first violated invariant.
void validate_house(const HouseSpec& house);

/// Flood fill over free cells from the first room cell; true when every room
/// and doorway cell is reached.
bool free_space_connected(const HouseSpec& house);

nlohmann::json house_to_json(const HouseSpec& house);
HouseSpec house_from_json(const nlohmann::json& doc);
/// Canonical text: sorted keys, compact, trailing newline.
std::string serialize_house(const HouseSpec& house);

struct GenProfile {
  int min_rooms = 3;
  int max_rooms = 8;
  int min_objects_per_room = 2;
  int max_objects_per_room = 6;
  int min_articulated = 1;
  int min_room_side = 3;
  int max_room_side = 6;
  bool operator==(const GenProfile&) const = default;
};

/// Throws ConfigError for malformed bounds (min > max, out of range).
void validate_profile(const GenProfile& profile);
nlohmann::json profile_to_json(const GenProfile& profile);
GenProfile profile_from_json(const nlohmann::json& doc);

inline constexpr int kGenerationRetryBudget = 64;

/// Pure function of (seed, profile). Throws GenerationFailed when no house
/// satisfying the profile is found within the retry budget.
HouseSpec generate_house(std::uint64_t seed, const GenProfile& profile = {});

struct Task {
  std::string goal_category;
  Cell start_cell;
  bool operator==(const Task&) const = default;
};

nlohmann::json task_to_json(const Task& task);
Task task_from_json(const nlohmann::json& doc);

/// Picks a start waypoint and a goal category with no instance visible from
/// it. Throws NoValidTask when every start sees every category.
Task sample_task(const HouseSpec& house, std::uint64_t seed);

struct WorldState {
  Cell robot_cell;
  std::set<ObjectId> seen;
  double dist_total = 0.0;
  /// Currently open containers in the order they were opened.
  std::vector<ObjectId> opened;
  int step_index = 0;

  bool is_open(ObjectId id) const;
  bool operator==(const WorldState&) const = default;
};

/// State at the start of a task: robot at the start cell, nothing seen yet,
/// containers open iff their spec says so.
WorldState initial_world_state(const HouseSpec& house, const Task& task);

/// Objects visible from the robot's room: every top-level object in it plus
/// the contents of opened containers.
std::set<ObjectId> visible_objects(const HouseSpec& house, const WorldState& state);
std::set<ObjectId> visible_in_room(const HouseSpec& house, RoomId room, const WorldState& state);

/// seen' = seen ∪ ids. Throws UnknownObjectId.
WorldState reveal(const HouseSpec& house, WorldState state, const std::set<ObjectId>& ids);

/// Unseen objects, derived from `seen`.
std::set<ObjectId> unseen_objects(const HouseSpec& house, const WorldState& state);

}  // namespace scenesearch
