#include "scenesearch/world.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include "scenesearch/errors.hpp"
#include "scenesearch/rng.hpp"

namespace scenesearch {

namespace {

struct LabelCatalog {
  std::vector<std::string> furniture;
  std::vector<std::string> containers;
};

const std::map<std::string, LabelCatalog>& label_catalog() {
  static const std::map<std::string, LabelCatalog> catalog = {
      {"kitchen", {{"table", "chair", "stove", "sink", "microwave"}, {"fridge", "cabinet", "drawer"}}},
      {"living_room", {{"sofa", "tv", "table", "lamp", "plant"}, {"cabinet", "drawer"}}},
      {"bedroom", {{"bed", "lamp", "desk", "chair"}, {"wardrobe", "drawer"}}},
      {"bathroom", {{"toilet", "sink", "bathtub", "towel_rack"}, {"cabinet"}}},
      {"dining_room", {{"table", "chair", "plant"}, {"cabinet"}}},
      {"office", {{"desk", "chair", "computer", "lamp"}, {"drawer", "cabinet"}}},
      {"hallway", {{"plant", "coat_rack", "lamp"}, {"closet"}}},
      {"laundry_room", {{"washer", "dryer", "sink"}, {"cabinet", "closet"}}},
      {"other_room", {{"chair", "plant", "table"}, {"cabinet"}}},
  };
  return catalog;
}

const std::map<std::string, std::vector<std::string>>& container_contents() {
  static const std::map<std::string, std::vector<std::string>> contents = {
      {"fridge", {"apple", "milk", "egg"}},
      {"cabinet", {"mug", "bowl", "plate", "towel", "book"}},
      {"drawer", {"spoon", "pen", "book", "remote"}},
      {"wardrobe", {"shirt", "shoe", "towel"}},
      {"closet", {"shoe", "umbrella", "towel"}},
  };
  return contents;
}

bool contains(const std::vector<std::string>& items, const std::string& item) {
  return std::find(items.begin(), items.end(), item) != items.end();
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[uniform_index(rng, items.size())];
}

std::optional<HouseSpec> try_generate(Rng& rng, const GenProfile& profile) {
  const int room_count = uniform_int(rng, profile.min_rooms, profile.max_rooms);
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(room_count))));
  const int rows = (room_count + cols - 1) / cols;

  std::vector<int> col_w(cols), row_h(rows), col_x(cols), row_y(rows);
  for (int& w : col_w) w = uniform_int(rng, profile.min_room_side, profile.max_room_side);
  for (int& h : row_h) h = uniform_int(rng, profile.min_room_side, profile.max_room_side);
  int x = 1;
  for (int c = 0; c < cols; ++c) {
    col_x[c] = x;
    x += col_w[c] + 1;
  }
  int y = 1;
  for (int r = 0; r < rows; ++r) {
    row_y[r] = y;
    y += row_h[r] + 1;
  }

  HouseSpec house;
  house.width = x;
  house.height = y;
  house.free_cells.assign(static_cast<std::size_t>(x * y), false);

  std::vector<std::string> labels = room_label_vocabulary();
  labels.pop_back();  // other_room is the fallback only
  shuffle(rng, labels);
  for (int i = 0; i < room_count; ++i) {
    const int r = i / cols;
    const int c = i % cols;
    Room room;
    room.id = i;
    room.label = i < static_cast<int>(labels.size()) ? labels[i] : "other_room";
    room.rect = Rect{col_x[c], row_y[r], col_w[c], row_h[r]};
    for (int yy = room.rect.y0; yy < room.rect.y0 + room.rect.h; ++yy)
      for (int xx = room.rect.x0; xx < room.rect.x0 + room.rect.w; ++xx) house.set_free({xx, yy}, true);
    house.rooms.push_back(room);
  }

  // Adjacent slot pairs: a random spanning tree plus occasional extra doors.
  std::vector<std::pair<int, int>> adjacent;
  for (int i = 0; i < room_count; ++i) {
    const int c = i % cols;
    if (c + 1 < cols && i + 1 < room_count) adjacent.emplace_back(i, i + 1);
    if (i + cols < room_count) adjacent.emplace_back(i, i + cols);
  }
  shuffle(rng, adjacent);
  std::vector<int> parent(room_count);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (auto [a, b] : adjacent) {
    const bool joins = find(a) != find(b);
    if (joins) parent[find(a)] = find(b);
    if (!joins && uniform_index(rng, 4) != 0) continue;
    const Rect& ra = house.rooms[a].rect;
    Doorway door{a, b, {}};
    if (b == a + 1) {
      door.cell = Cell{ra.x0 + ra.w, uniform_int(rng, ra.y0, ra.y0 + ra.h - 1)};
    } else {
      door.cell = Cell{uniform_int(rng, ra.x0, ra.x0 + ra.w - 1), ra.y0 + ra.h};
    }
    house.set_free(door.cell, true);
    house.doorways.push_back(door);
  }
  std::sort(house.doorways.begin(), house.doorways.end(), [](const Doorway& a, const Doorway& b) {
    return std::tie(a.room_a, a.room_b, a.cell) < std::tie(b.room_a, b.room_b, b.cell);
  });

  int articulated = 0;
  for (const Room& room : house.rooms) {
    const LabelCatalog& catalog = label_catalog().at(room.label);
    std::vector<Cell> cells;
    for (int yy = room.rect.y0; yy < room.rect.y0 + room.rect.h; ++yy)
      for (int xx = room.rect.x0; xx < room.rect.x0 + room.rect.w; ++xx) cells.push_back({xx, yy});
    shuffle(rng, cells);
    const int max_here = std::min(profile.max_objects_per_room, room.rect.area());
    if (max_here < profile.min_objects_per_room) return std::nullopt;
    const int count = uniform_int(rng, profile.min_objects_per_room, max_here);
    for (int k = 0; k < count; ++k) {
      ObjectSpec obj;
      obj.id = static_cast<ObjectId>(house.objects.size());
      obj.cell = cells[k];
      obj.articulated = uniform_index(rng, 3) == 0;
      obj.category = obj.articulated ? pick(rng, catalog.containers) : pick(rng, catalog.furniture);
      house.objects.push_back(obj);
      if (!obj.articulated) continue;
      ++articulated;
      std::vector<std::string> pool = container_contents().at(obj.category);
      shuffle(rng, pool);
      const int n_contents = uniform_int(rng, 0, 2);
      const ObjectId container = obj.id;
      for (int j = 0; j < n_contents; ++j) {
        ObjectSpec item;
        item.id = static_cast<ObjectId>(house.objects.size());
        item.category = pool[j];
        item.cell = obj.cell;
        house.objects[container].contents.push_back(item.id);
        house.objects.push_back(item);
      }
    }
  }
  if (articulated < profile.min_articulated) return std::nullopt;
  return house;
}

}  // namespace

bool label_may_hold(const std::string& label, const std::string& category) {
  const auto it = label_catalog().find(label);
  if (it == label_catalog().end()) return false;
  if (contains(it->second.furniture, category) || contains(it->second.containers, category)) return true;
  for (const std::string& c : it->second.containers)
    if (container_may_hold(c, category)) return true;
  return false;
}

bool container_may_hold(const std::string& container, const std::string& category) {
  const auto it = container_contents().find(container);
  return it != container_contents().end() && contains(it->second, category);
}

const std::vector<std::string>& room_label_vocabulary() {
  static const std::vector<std::string> labels = {"kitchen", "living_room", "bedroom",      "bathroom",  "dining_room",
                                                  "office",  "hallway",     "laundry_room", "other_room"};
  return labels;
}

std::optional<RoomId> HouseSpec::room_at(Cell c) const {
  for (const Room& room : rooms)
    if (room.rect.contains(c)) return room.id;
  return std::nullopt;
}

const ObjectSpec& HouseSpec::object(ObjectId id) const {
  if (!has_object(id)) throw UnknownObjectId("unknown object id " + std::to_string(id));
  return objects[static_cast<std::size_t>(id)];
}

RoomId HouseSpec::room_of_object(ObjectId id) const {
  auto room = room_at(object(id).cell);
  if (!room) throw InvalidHouse("object " + std::to_string(id) + " outside every room");
  return *room;
}

std::optional<ObjectId> HouseSpec::container_of(ObjectId id) const {
  for (const ObjectSpec& obj : objects)
    if (std::find(obj.contents.begin(), obj.contents.end(), id) != obj.contents.end()) return obj.id;
  return std::nullopt;
}

std::string HouseSpec::room_name(RoomId id) const {
  const std::string& label = rooms.at(static_cast<std::size_t>(id)).label;
  int total = 0;
  int ordinal = 0;
  for (const Room& room : rooms) {
    if (room.label != label) continue;
    ++total;
    if (room.id <= id) ++ordinal;
  }
  return total == 1 ? label : label + "_" + std::to_string(ordinal);
}

std::string HouseSpec::object_name(ObjectId id) const {
  const ObjectSpec& target = object(id);
  const RoomId room = room_of_object(id);
  int total = 0;
  int ordinal = 0;
  for (const ObjectSpec& obj : objects) {
    if (obj.category != target.category || room_of_object(obj.id) != room) continue;
    ++total;
    if (obj.id <= id) ++ordinal;
  }
  return total == 1 ? target.category : target.category + "_" + std::to_string(ordinal);
}

std::vector<Cell> HouseSpec::room_waypoints(RoomId id) const {
  const Rect& r = rooms.at(static_cast<std::size_t>(id)).rect;
  auto axis = [](int origin, int extent) {
    std::vector<int> out;
    if (extent <= 2) {
      out.push_back(origin + (extent - 1) / 2);
    } else {
      for (int v = origin + 1; v < origin + extent; v += 2) out.push_back(v);
    }
    return out;
  };
  std::vector<Cell> cells;
  for (int yy : axis(r.y0, r.h))
    for (int xx : axis(r.x0, r.w)) cells.push_back({xx, yy});
  return cells;
}

bool free_space_connected(const HouseSpec& house) {
  auto walkable = [&](Cell c) {
    if (!house.is_free(c)) return false;
    if (house.room_at(c)) return true;
    return std::any_of(house.doorways.begin(), house.doorways.end(), [&](const Doorway& d) { return d.cell == c; });
  };
  if (house.rooms.empty()) return false;
  std::vector<bool> reached(house.free_cells.size(), false);
  const Rect& first = house.rooms.front().rect;
  std::deque<Cell> queue{Cell{first.x0, first.y0}};
  reached[first.y0 * house.width + first.x0] = true;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (Cell n : {Cell{c.x + 1, c.y}, Cell{c.x - 1, c.y}, Cell{c.x, c.y + 1}, Cell{c.x, c.y - 1}}) {
      if (!walkable(n) || reached[n.y * house.width + n.x]) continue;
      reached[n.y * house.width + n.x] = true;
      queue.push_back(n);
    }
  }
  for (const Room& room : house.rooms)
    for (int yy = room.rect.y0; yy < room.rect.y0 + room.rect.h; ++yy)
      for (int xx = room.rect.x0; xx < room.rect.x0 + room.rect.w; ++xx)
        if (!reached[yy * house.width + xx]) return false;
  for (const Doorway& d : house.doorways)
    if (!reached[d.cell.y * house.width + d.cell.x]) return false;
  return true;
}

void validate_house(const HouseSpec& house) {
  auto fail = [](const std::string& why) { throw InvalidHouse(why); };
  if (house.width <= 0 || house.height <= 0 ||
      house.free_cells.size() != static_cast<std::size_t>(house.width * house.height))
    fail("grid dimensions do not match cell data");
  if (!(house.cell_size > 0)) fail("cell_size must be positive");
  if (house.rooms.empty()) fail("house has no rooms");
  const auto& vocab = room_label_vocabulary();
  for (std::size_t i = 0; i < house.rooms.size(); ++i) {
    const Room& room = house.rooms[i];
    if (room.id != static_cast<RoomId>(i)) fail("room ids must be 0..n-1 in order");
    if (std::find(vocab.begin(), vocab.end(), room.label) == vocab.end()) fail("unknown room label " + room.label);
    if (room.rect.w <= 0 || room.rect.h <= 0) fail("empty room rectangle");
    for (int yy = room.rect.y0; yy < room.rect.y0 + room.rect.h; ++yy)
      for (int xx = room.rect.x0; xx < room.rect.x0 + room.rect.w; ++xx)
        if (!house.is_free({xx, yy})) fail("room " + std::to_string(room.id) + " covers a wall cell");
    for (std::size_t j = 0; j < i; ++j) {
      const Rect& a = room.rect;
      const Rect& b = house.rooms[j].rect;
      const bool overlap = a.x0 < b.x0 + b.w && b.x0 < a.x0 + a.w && a.y0 < b.y0 + b.h && b.y0 < a.y0 + a.h;
      if (overlap) fail("rooms overlap");
    }
  }
  const int n_rooms = static_cast<int>(house.rooms.size());
  for (const Doorway& d : house.doorways) {
    if (d.room_a < 0 || d.room_b < 0 || d.room_a >= n_rooms || d.room_b >= n_rooms || d.room_a == d.room_b)
      fail("doorway names invalid rooms");
    if (!house.is_free(d.cell) || house.room_at(d.cell)) fail("doorway cell must be a free non-room cell");
    bool touches_a = false;
    bool touches_b = false;
    for (Cell n : {Cell{d.cell.x + 1, d.cell.y}, Cell{d.cell.x - 1, d.cell.y}, Cell{d.cell.x, d.cell.y + 1},
                   Cell{d.cell.x, d.cell.y - 1}}) {
      auto r = house.room_at(n);
      touches_a |= r == d.room_a;
      touches_b |= r == d.room_b;
    }
    if (!touches_a || !touches_b) fail("doorway not adjacent to both rooms");
  }
  std::vector<int> held_by(house.objects.size(), -1);
  for (std::size_t i = 0; i < house.objects.size(); ++i) {
    const ObjectSpec& obj = house.objects[i];
    if (obj.id != static_cast<ObjectId>(i)) fail("object ids must be 0..n-1 in order");
    if (!house.room_at(obj.cell)) fail("object " + std::to_string(obj.id) + " outside every room");
    if (!obj.articulated && (!obj.contents.empty() || obj.open))
      fail("non-articulated object " + std::to_string(obj.id) + " has contents or is open");
    for (ObjectId content : obj.contents) {
      if (!house.has_object(content) || content == obj.id) fail("bad content id");
      if (held_by[static_cast<std::size_t>(content)] != -1) fail("object held by two containers");
      held_by[static_cast<std::size_t>(content)] = obj.id;
    }
  }
  for (std::size_t i = 0; i < house.objects.size(); ++i) {
    if (held_by[i] < 0) continue;
    const ObjectSpec& item = house.objects[i];
    if (item.articulated) fail("containers cannot be nested");
    if (house.room_at(item.cell) != house.room_at(house.objects[static_cast<std::size_t>(held_by[i])].cell))
      fail("content lies outside its container's room");
  }
  if (!free_space_connected(house)) fail("free space is disconnected");
}

nlohmann::json house_to_json(const HouseSpec& house) {
  using nlohmann::json;
  json rows = json::array();
  for (int yy = 0; yy < house.height; ++yy) {
    std::string row;
    for (int xx = 0; xx < house.width; ++xx) row += house.is_free({xx, yy}) ? '.' : '#';
    rows.push_back(row);
  }
  json rooms = json::array();
  for (const Room& r : house.rooms)
    rooms.push_back({{"id", r.id}, {"label", r.label}, {"rect", {{"x0", r.rect.x0}, {"y0", r.rect.y0}, {"w", r.rect.w}, {"h", r.rect.h}}}});
  json doors = json::array();
  for (const Doorway& d : house.doorways)
    doors.push_back({{"room_a", d.room_a}, {"room_b", d.room_b}, {"cell", {d.cell.x, d.cell.y}}});
  json objects = json::array();
  for (const ObjectSpec& o : house.objects)
    objects.push_back({{"id", o.id},
                       {"category", o.category},
                       {"cell", {o.cell.x, o.cell.y}},
                       {"articulated", o.articulated},
                       {"contents", o.contents},
                       {"open", o.open}});
  return {{"version", 1},
          {"cell_size", house.cell_size},
          {"grid", {{"width", house.width}, {"height", house.height}, {"rows", rows}}},
          {"rooms", rooms},
          {"doorways", doors},
          {"objects", objects}};
}

HouseSpec house_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("version").get<int>() != 1) throw SchemaMismatch("unsupported house version");
    HouseSpec house;
    house.cell_size = doc.at("cell_size").get<double>();
    const auto& grid = doc.at("grid");
    house.width = grid.at("width").get<int>();
    house.height = grid.at("height").get<int>();
    house.free_cells.assign(static_cast<std::size_t>(house.width * house.height), false);
    const auto& rows = grid.at("rows");
    if (rows.size() != static_cast<std::size_t>(house.height)) throw SchemaMismatch("grid rows do not match height");
    for (int yy = 0; yy < house.height; ++yy) {
      const std::string row = rows[static_cast<std::size_t>(yy)].get<std::string>();
      if (row.size() != static_cast<std::size_t>(house.width)) throw SchemaMismatch("grid row width mismatch");
      for (int xx = 0; xx < house.width; ++xx) house.set_free({xx, yy}, row[static_cast<std::size_t>(xx)] == '.');
    }
    for (const auto& r : doc.at("rooms")) {
      const auto& rect = r.at("rect");
      house.rooms.push_back(Room{r.at("id").get<int>(), r.at("label").get<std::string>(),
                                 Rect{rect.at("x0").get<int>(), rect.at("y0").get<int>(), rect.at("w").get<int>(),
                                      rect.at("h").get<int>()}});
    }
    for (const auto& d : doc.at("doorways"))
      house.doorways.push_back(Doorway{d.at("room_a").get<int>(), d.at("room_b").get<int>(),
                                       Cell{d.at("cell").at(0).get<int>(), d.at("cell").at(1).get<int>()}});
    for (const auto& o : doc.at("objects")) {
      ObjectSpec obj;
      obj.id = o.at("id").get<int>();
      obj.category = o.at("category").get<std::string>();
      obj.cell = Cell{o.at("cell").at(0).get<int>(), o.at("cell").at(1).get<int>()};
      obj.articulated = o.at("articulated").get<bool>();
      obj.contents = o.at("contents").get<std::vector<ObjectId>>();
      obj.open = o.at("open").get<bool>();
      house.objects.push_back(std::move(obj));
    }
    return house;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("malformed house document: ") + e.what());
  }
}

std::string serialize_house(const HouseSpec& house) { return house_to_json(house).dump() + "\n"; }

void validate_profile(const GenProfile& p) {
  auto fail = [](const std::string& why) { throw ConfigError("invalid generation profile: " + why); };
  if (p.min_rooms < 1 || p.max_rooms > 16 || p.min_rooms > p.max_rooms) fail("rooms must satisfy 1 <= min <= max <= 16");
  if (p.min_objects_per_room < 1 || p.max_objects_per_room > 12 || p.min_objects_per_room > p.max_objects_per_room)
    fail("objects per room must satisfy 1 <= min <= max <= 12");
  if (p.min_articulated < 0) fail("min_articulated must be >= 0");
  if (p.min_room_side < 1 || p.max_room_side > 12 || p.min_room_side > p.max_room_side)
    fail("room side must satisfy 1 <= min <= max <= 12");
}

nlohmann::json profile_to_json(const GenProfile& p) {
  return {{"min_rooms", p.min_rooms},
          {"max_rooms", p.max_rooms},
          {"min_objects_per_room", p.min_objects_per_room},
          {"max_objects_per_room", p.max_objects_per_room},
          {"min_articulated", p.min_articulated},
          {"min_room_side", p.min_room_side},
          {"max_room_side", p.max_room_side}};
}

GenProfile profile_from_json(const nlohmann::json& doc) {
  GenProfile p;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_number_integer()) throw ConfigError("profile field " + key + " must be an integer");
    const int v = value.get<int>();
    if (key == "min_rooms") p.min_rooms = v;
    else if (key == "max_rooms") p.max_rooms = v;
    else if (key == "min_objects_per_room") p.min_objects_per_room = v;
    else if (key == "max_objects_per_room") p.max_objects_per_room = v;
    else if (key == "min_articulated") p.min_articulated = v;
    else if (key == "min_room_side") p.min_room_side = v;
    else if (key == "max_room_side") p.max_room_side = v;
    else throw ConfigError("unknown profile field " + key);
  }
  return p;
}

HouseSpec generate_house(std::uint64_t seed, const GenProfile& profile) {
  validate_profile(profile);
  Rng rng(mix_seed(seed, 0));
  for (int attempt = 0; attempt < kGenerationRetryBudget; ++attempt) {
    auto house = try_generate(rng, profile);
    if (!house) continue;
    try {
      validate_house(*house);
    } catch (const InvalidHouse&) {
      continue;
    }
    return *std::move(house);
  }
  throw GenerationFailed("no house satisfies the profile after " + std::to_string(kGenerationRetryBudget) +
                         " attempts (seed " + std::to_string(seed) + ")");
}

nlohmann::json task_to_json(const Task& task) {
  return {{"goal", task.goal_category}, {"start_cell", {task.start_cell.x, task.start_cell.y}}};
}

Task task_from_json(const nlohmann::json& doc) {
  try {
    return Task{doc.at("goal").get<std::string>(),
                Cell{doc.at("start_cell").at(0).get<int>(), doc.at("start_cell").at(1).get<int>()}};
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("malformed task: ") + e.what());
  }
}

Task sample_task(const HouseSpec& house, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 1));
  std::vector<Cell> starts;
  for (const Room& room : house.rooms)
    for (Cell c : house.room_waypoints(room.id)) starts.push_back(c);
  shuffle(rng, starts);
  std::set<std::string> all_categories;
  for (const ObjectSpec& obj : house.objects) all_categories.insert(obj.category);
  for (Cell start : starts) {
    const WorldState state = initial_world_state(house, Task{"", start});
    std::set<std::string> candidates = all_categories;
    for (ObjectId id : visible_objects(house, state)) candidates.erase(house.object(id).category);
    if (candidates.empty()) continue;
    std::vector<std::string> sorted(candidates.begin(), candidates.end());
    return Task{pick(rng, sorted), start};
  }
  throw NoValidTask("every object category is visible from every start cell");
}

bool WorldState::is_open(ObjectId id) const { return std::find(opened.begin(), opened.end(), id) != opened.end(); }

WorldState initial_world_state(const HouseSpec& house, const Task& task) {
  WorldState state;
  state.robot_cell = task.start_cell;
  for (const ObjectSpec& obj : house.objects)
    if (obj.open) state.opened.push_back(obj.id);
  return state;
}

std::set<ObjectId> visible_in_room(const HouseSpec& house, RoomId room, const WorldState& state) {
  std::set<ObjectId> out;
  for (const ObjectSpec& obj : house.objects) {
    if (house.room_at(obj.cell) != room) continue;
    auto holder = house.container_of(obj.id);
    if (holder && !state.is_open(*holder)) continue;
    out.insert(obj.id);
  }
  return out;
}

std::set<ObjectId> visible_objects(const HouseSpec& house, const WorldState& state) {
  auto room = house.room_at(state.robot_cell);
  if (!room) return {};
  return visible_in_room(house, *room, state);
}

WorldState reveal(const HouseSpec& house, WorldState state, const std::set<ObjectId>& ids) {
  for (ObjectId id : ids)
    if (!house.has_object(id)) throw UnknownObjectId("unknown object id " + std::to_string(id));
  state.seen.insert(ids.begin(), ids.end());
  return state;
}

std::set<ObjectId> unseen_objects(const HouseSpec& house, const WorldState& state) {
  std::set<ObjectId> out;
  for (const ObjectSpec& obj : house.objects)
    if (!state.seen.contains(obj.id)) out.insert(obj.id);
  return out;
}

}  // namespace scenesearch
