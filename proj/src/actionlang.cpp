#include "scenesearch/actionlang.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <limits>
#include <sstream>

namespace scenesearch {

namespace {

constexpr std::array<const char*, kActionKindCount> kVerbs = {"navigate", "go_to_and_open", "close", "explore", "done"};
constexpr std::array<int, kActionKindCount> kArity = {2, 2, 0, 1, 0};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_token(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_';
  });
}

enum class Section { kNone, kAnalysis, kReasoning, kCommand };

/// Header at the start of a trimmed line; returns the section and the inline remainder.
std::optional<std::pair<Section, std::string_view>> header_of(std::string_view line) {
  static constexpr std::array<std::pair<std::string_view, Section>, 3> headers = {
      {{"analysis:", Section::kAnalysis}, {"reasoning:", Section::kReasoning}, {"command:", Section::kCommand}}};
  const std::string_view t = trim(line);
  for (auto [name, section] : headers) {
    if (t.size() >= name.size() && lower(t.substr(0, name.size())) == name)
      return std::make_pair(section, trim(t.substr(name.size())));
  }
  return std::nullopt;
}

ParseFailure failure(ParseFailureReason reason, std::string detail) { return ParseFailure{reason, std::move(detail)}; }

std::string join_lines(const std::vector<std::string_view>& lines) {
  std::string out;
  for (std::string_view l : lines) {
    if (!out.empty()) out += '\n';
    out += l;
  }
  return std::string(trim(out));
}

std::string format_meters(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

const char* verb_name(ActionKind kind) { return kVerbs[static_cast<std::size_t>(kind)]; }

std::string render_command(const Action& a) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Navigate>) return "navigate(" + c.room + ", " + c.object + ")";
        if constexpr (std::is_same_v<T, GoToAndOpen>) return "go_to_and_open(" + c.room + ", " + c.object + ")";
        if constexpr (std::is_same_v<T, Close>) return "close()";
        if constexpr (std::is_same_v<T, Explore>) return "explore(" + c.room + ")";
        if constexpr (std::is_same_v<T, Done>) return "done()";
      },
      a.command);
}

const char* reason_tag(ParseFailureReason reason) {
  switch (reason) {
    case ParseFailureReason::kMissingSections: return "missing-sections";
    case ParseFailureReason::kBadCommand: return "bad-command";
    case ParseFailureReason::kUnknownVerb: return "unknown-verb";
    case ParseFailureReason::kBadArity: return "bad-arity";
    case ParseFailureReason::kTimeout: return "timeout";
  }
  return "bad-command";
}

std::optional<ParseFailureReason> reason_from_tag(std::string_view tag) {
  for (auto r : {ParseFailureReason::kMissingSections, ParseFailureReason::kBadCommand, ParseFailureReason::kUnknownVerb,
                 ParseFailureReason::kBadArity, ParseFailureReason::kTimeout})
    if (tag == reason_tag(r)) return r;
  return std::nullopt;
}

std::variant<Action, ParseFailure> parse_command(std::string_view line) {
  std::string_view t = trim(line);
  if (t.size() >= 2 && t.front() == '`' && t.back() == '`') t = trim(t.substr(1, t.size() - 2));
  std::size_t i = 0;
  while (i < t.size() && (std::isalnum(static_cast<unsigned char>(t[i])) || t[i] == '_')) ++i;
  if (i == 0 || std::isdigit(static_cast<unsigned char>(t[0])))
    return failure(ParseFailureReason::kBadCommand, "command must start with a verb");
  const std::string verb = lower(t.substr(0, i));
  std::string_view rest = trim(t.substr(i));
  if (rest.size() < 2 || rest.front() != '(' || rest.back() != ')')
    return failure(ParseFailureReason::kBadCommand, "expected verb(args)");
  const std::string_view inner = rest.substr(1, rest.size() - 2);
  if (inner.find_first_of("()") != std::string_view::npos)
    return failure(ParseFailureReason::kBadCommand, "nested parentheses");

  const auto it = std::find_if(kVerbs.begin(), kVerbs.end(), [&](const char* v) { return verb == v; });
  if (it == kVerbs.end()) return failure(ParseFailureReason::kUnknownVerb, "unknown verb '" + verb + "'");
  const auto kind = static_cast<ActionKind>(it - kVerbs.begin());

  std::vector<std::string> args;
  if (!trim(inner).empty()) {
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = inner.find(',', start);
      const std::string_view piece = trim(inner.substr(start, comma == std::string_view::npos ? inner.npos : comma - start));
      args.push_back(lower(piece));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  }
  if (static_cast<int>(args.size()) != kArity[static_cast<std::size_t>(kind)])
    return failure(ParseFailureReason::kBadArity, std::string(verb) + " takes " +
                                                      std::to_string(kArity[static_cast<std::size_t>(kind)]) +
                                                      " argument(s), got " + std::to_string(args.size()));
  for (const std::string& arg : args) {
    if (arg.empty()) return failure(ParseFailureReason::kBadArity, "empty argument");
    if (!is_token(arg)) return failure(ParseFailureReason::kBadCommand, "invalid argument '" + arg + "'");
  }
  const std::string raw(t);
  switch (kind) {
    case ActionKind::kNavigate: return Action{Navigate{args[0], args[1]}, raw};
    case ActionKind::kGoToAndOpen: return Action{GoToAndOpen{args[0], args[1]}, raw};
    case ActionKind::kClose: return Action{Close{}, raw};
    case ActionKind::kExplore: return Action{Explore{args[0]}, raw};
    case ActionKind::kDone: return Action{Done{}, raw};
  }
  return failure(ParseFailureReason::kUnknownVerb, verb);
}

ParsedResponse parse_response(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view l = text.substr(start, end - start);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    lines.push_back(l);
    start = end + 1;
  }

  std::vector<std::string_view> analysis, reasoning, command;
  bool any_header = false;
  bool saw_command = false;
  Section current = Section::kNone;
  std::vector<std::string_view> loose;
  for (std::string_view l : lines) {
    if (auto h = header_of(l)) {
      any_header = true;
      current = h->first;
      if (current == Section::kCommand) {
        saw_command = true;
        command.clear();
      }
      if (!h->second.empty()) {
        if (current == Section::kAnalysis) analysis.push_back(h->second);
        if (current == Section::kReasoning) reasoning.push_back(h->second);
        if (current == Section::kCommand) command.push_back(h->second);
      }
      continue;
    }
    switch (current) {
      case Section::kAnalysis: analysis.push_back(l); break;
      case Section::kReasoning: reasoning.push_back(l); break;
      case Section::kCommand: command.push_back(l); break;
      case Section::kNone: loose.push_back(l); break;
    }
  }

  ParsedResponse out;
  out.response.analysis = join_lines(analysis);
  out.response.reasoning = join_lines(reasoning);

  const std::vector<std::string_view>& source = saw_command ? command : loose;
  std::string_view last;
  for (std::string_view l : source)
    if (!trim(l).empty()) last = trim(l);
  if (trim(text).empty()) {
    out.result = failure(ParseFailureReason::kMissingSections, "empty response");
    return out;
  }
  if ((any_header && !saw_command) || (saw_command && last.empty())) {
    out.result = failure(ParseFailureReason::kMissingSections, "no command section");
    return out;
  }
  out.response.command = std::string(last);
  auto parsed = parse_command(last);
  if (auto* a = std::get_if<Action>(&parsed)) {
    out.result = std::move(*a);
  } else {
    out.result = std::get<ParseFailure>(std::move(parsed));
  }
  return out;
}

std::string render_response(const Action& a, std::string_view analysis, std::string_view reasoning) {
  std::string out = "Analysis: ";
  out += analysis;
  out += "\nReasoning: ";
  out += reasoning;
  out += "\nCommand: ";
  out += render_command(a);
  out += "\n";
  return out;
}

PromptText serialize_observation(const EnvSnapshot& s, const Task& task) {
  PromptText p;
  std::ostringstream sys;
  sys << "You control a household robot searching for a " << task.goal_category << ".\n"
      << "You see the house as a scene graph of discovered rooms and the objects seen in them.\n"
      << "Available commands:\n"
      << "- navigate(room_name, object_name): move to an object you have seen.\n"
      << "- go_to_and_open(room_name, object_name): move to a closed articulated object and open it.\n"
      << "- close(): close the most recently opened object next to you.\n"
      << "- explore(room_name): walk into a discovered room that still has unexplored areas.\n"
      << "- done(): finish; succeeds only if a " << task.goal_category << " is in the scene graph.\n"
      << "Answer in exactly this format:\n"
      << "Analysis: <what you observe>\n"
      << "Reasoning: <why the next command helps>\n"
      << "Command: <one command>\n";
  p.system = sys.str();

  const Environment& env = *s.env;
  std::ostringstream user;
  user << "Task: find a " << task.goal_category << ".\n"
       << "Step: " << s.world.step_index << "\n"
       << "Current room: " << env.room_names[static_cast<std::size_t>(s.robot_room())] << "\n"
       << "Previous action: " << (s.prev_action ? render_command(*s.prev_action) : std::string("none")) << "\n"
       << "Distance travelled: " << format_meters(s.world.dist_total) << " m\n";
  if (s.scene.rooms().empty()) {
    user << "Scene graph: no rooms discovered yet\n";
  } else {
    user << "Scene graph:\n";
    for (const auto& [id, room] : s.scene.rooms()) {
      const bool explored = s.unexplored_nodes(id).empty();
      user << "- " << room.name << (explored ? " [explored]" : " [unexplored]") << ":";
      const auto objects = s.scene.objects_in(id);
      if (objects.empty()) user << " nothing seen yet";
      bool first = true;
      for (ObjectId oid : objects) {
        const ObjectNode& obj = s.scene.objects().at(oid);
        user << (first ? " " : ", ") << obj.name;
        if (obj.articulated) user << (s.world.is_open(oid) ? " (open)" : " (closed)");
        first = false;
      }
      user << "\n";
    }
  }
  user << "What is your next command?\n";
  p.user = user.str();
  return p;
}

std::optional<RoomId> resolve_room(const EnvSnapshot& s, const std::string& room) {
  for (const auto& [id, node] : s.scene.rooms())
    if (node.name == room) return id;
  return std::nullopt;
}

std::optional<ObjectId> resolve_object(const EnvSnapshot& s, const std::string& room, const std::string& object) {
  const auto r = resolve_room(s, room);
  if (!r) return std::nullopt;
  for (ObjectId id : s.scene.objects_in(*r))
    if (s.scene.objects().at(id).name == object) return id;
  return std::nullopt;
}

std::optional<ObjectId> close_target(const EnvSnapshot& s) {
  const NodeId here = s.robot_node();
  for (auto it = s.world.opened.rbegin(); it != s.world.opened.rend(); ++it)
    if (s.env->approach_node[static_cast<std::size_t>(*it)] == here) return *it;
  return std::nullopt;
}

std::optional<NodeId> nearest_unexplored(const EnvSnapshot& s, RoomId room) {
  const NodeId here = s.robot_node();
  std::optional<NodeId> best;
  double best_len = std::numeric_limits<double>::infinity();
  for (NodeId n : s.unexplored_nodes(room)) {
    const double len = s.env->path(here, n).length;
    if (len < best_len) {
      best_len = len;
      best = n;
    }
  }
  return best;
}

bool is_executable(const Action& a, const EnvSnapshot& s) {
  return std::visit(
      [&](const auto& c) -> bool {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Navigate>) {
          return resolve_object(s, c.room, c.object).has_value();
        } else if constexpr (std::is_same_v<T, GoToAndOpen>) {
          const auto id = resolve_object(s, c.room, c.object);
          return id && s.scene.objects().at(*id).articulated && !s.world.is_open(*id);
        } else if constexpr (std::is_same_v<T, Close>) {
          return close_target(s).has_value();
        } else if constexpr (std::is_same_v<T, Explore>) {
          const auto room = resolve_room(s, c.room);
          return room && !s.unexplored_nodes(*room).empty();
        } else {
          return true;
        }
      },
      a.command);
}

namespace {

/// Walks the canonical shortest path to `target`, entering every room on it.
void move_to(EnvSnapshot& s, StepOutcome& out, NodeId target) {
  const PathResult& path = s.env->path(s.robot_node(), target);
  std::vector<RoomId> rooms;
  for (NodeId n : path.nodes) {
    const RoomId r = s.env->room_of_node(n);
    if (r == kDoorwayRoom) continue;
    if (std::find(rooms.begin(), rooms.end(), r) == rooms.end()) rooms.push_back(r);
  }
  for (RoomId r : rooms) {
    Discovery d = enter_room(std::move(s), r);
    s = std::move(d.snapshot);
    out.new_nodes += d.new_nodes;
  }
  s.world.robot_cell = s.env->nav.node(target).cell;
  s.world.dist_total += path.length;
  out.dist_delta = path.length;
  out.path = path.nodes;
}

}  // namespace

std::pair<EnvSnapshot, StepOutcome> execute(const Action& a, EnvSnapshot s) {
  StepOutcome out;
  out.action = a;
  out.executable = is_executable(a, s);
  const std::set<ObjectId> seen_before = s.world.seen;
  if (out.executable) {
    std::visit(
        [&](const auto& c) {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, Navigate>) {
            const ObjectId id = *resolve_object(s, c.room, c.object);
            move_to(s, out, s.env->approach_node[static_cast<std::size_t>(id)]);
          } else if constexpr (std::is_same_v<T, GoToAndOpen>) {
            const ObjectId id = *resolve_object(s, c.room, c.object);
            move_to(s, out, s.env->approach_node[static_cast<std::size_t>(id)]);
            s.world.opened.push_back(id);
            const auto now_visible = visible_in_room(s.env->house, s.scene.objects().at(id).room, s.world);
            s = update_scene_graph(std::move(s), now_visible);
          } else if constexpr (std::is_same_v<T, Close>) {
            const ObjectId id = *close_target(s);
            s.world.opened.erase(std::find(s.world.opened.begin(), s.world.opened.end(), id));
          } else if constexpr (std::is_same_v<T, Explore>) {
            const RoomId room = *resolve_room(s, c.room);
            move_to(s, out, *nearest_unexplored(s, room));
          } else {
            out.done_called = true;
          }
        },
        a.command);
  }
  for (ObjectId id : s.world.seen)
    if (!seen_before.contains(id)) out.revealed.insert(id);
  s.world.step_index += 1;
  s.prev_action = a;
  return {std::move(s), std::move(out)};
}

std::pair<EnvSnapshot, StepOutcome> execute_failure(const ParseFailure& failure, EnvSnapshot s) {
  StepOutcome out;
  out.failure = failure;
  s.world.step_index += 1;
  return {std::move(s), std::move(out)};
}

std::pair<EnvSnapshot, StepOutcome> execute_parsed(const ParsedResponse& parsed, EnvSnapshot s) {
  if (parsed.ok()) return execute(parsed.action(), std::move(s));
  return execute_failure(parsed.failure(), std::move(s));
}

}  // namespace scenesearch
