#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "scenesearch/harness.hpp"
#include "scenesearch/rng.hpp"

namespace fixtures {

using namespace scenesearch;

inline void carve(HouseSpec& h, const Rect& r) {
  for (int y = r.y0; y < r.y0 + r.h; ++y)
    for (int x = r.x0; x < r.x0 + r.w; ++x) h.set_free({x, y}, true);
}

/// Two rooms joined by one doorway at (4,2):
///
///   ################
///   #t..#.t........#   kitchen: 3x3, one waypoint (2,2)
///   #...D..........#   living_room: 10x3, waypoints x = 6, 8, 10, 12, 14 on row 2
///   #..c#........C.#   cabinet C holds the only microwave
///   ################
///
/// Object ids: 0 kitchen table (1,1), 1 kitchen cabinet (3,3, empty),
/// 2 living_room table (6,1), 3 living_room cabinet (13,3), 4 microwave in 3.
inline HouseSpec two_room_house() {
  HouseSpec h;
  h.width = 16;
  h.height = 5;
  h.free_cells.assign(static_cast<std::size_t>(h.width * h.height), false);
  h.rooms = {Room{0, "kitchen", Rect{1, 1, 3, 3}}, Room{1, "living_room", Rect{5, 1, 10, 3}}};
  carve(h, h.rooms[0].rect);
  carve(h, h.rooms[1].rect);
  h.doorways = {Doorway{0, 1, Cell{4, 2}}};
  h.set_free({4, 2}, true);
  h.objects = {
      ObjectSpec{0, "table", Cell{1, 1}, false, {}, false},
      ObjectSpec{1, "cabinet", Cell{3, 3}, true, {}, false},
      ObjectSpec{2, "table", Cell{6, 1}, false, {}, false},
      ObjectSpec{3, "cabinet", Cell{13, 3}, true, {4}, false},
      ObjectSpec{4, "microwave", Cell{13, 3}, false, {}, false},
  };
  return h;
}

inline Task microwave_task() { return Task{"microwave", Cell{2, 2}}; }

/// A single 4x4 room with no doorways.
inline HouseSpec one_room_house() {
  HouseSpec h;
  h.width = 6;
  h.height = 6;
  h.free_cells.assign(36, false);
  h.rooms = {Room{0, "office", Rect{1, 1, 4, 4}}};
  carve(h, h.rooms[0].rect);
  h.objects = {ObjectSpec{0, "desk", Cell{1, 1}, false, {}, false},
               ObjectSpec{1, "drawer", Cell{4, 4}, true, {2}, false},
               ObjectSpec{2, "pen", Cell{4, 4}, false, {}, false}};
  return h;
}

inline std::string golden_path(const std::string& name) { return std::string(SCENESEARCH_GOLDEN_DIR) + "/" + name; }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Compares against a checked-in file; SCENESEARCH_UPDATE_GOLDEN=1 rewrites it.
inline bool matches_golden(const std::string& name, const std::string& actual) {
  const std::string path = golden_path(name);
  if (const char* update = std::getenv("SCENESEARCH_UPDATE_GOLDEN"); update && std::string(update) == "1") {
    std::ofstream(path, std::ios::binary) << actual;
    return true;
  }
  return read_text(path) == actual;
}

}  // namespace fixtures
