#pragma once

#include <string>
#include <variant>

namespace scenesearch {

struct Navigate {
  std::string room;
  std::string object;
  bool operator==(const Navigate&) const = default;
};
struct GoToAndOpen {
  std::string room;
  std::string object;
  bool operator==(const GoToAndOpen&) const = default;
};
struct Close {
  bool operator==(const Close&) const = default;
};
struct Explore {
  std::string room;
  bool operator==(const Explore&) const = default;
};
struct Done {
  bool operator==(const Done&) const = default;
};

/// One planner command. `raw_text` keeps the originating command line and
/// does not take part in equality.
struct Action {
  using Command = std::variant<Navigate, GoToAndOpen, Close, Explore, Done>;
  Command command;
  std::string raw_text;

  Action() : command(Done{}) {}
  Action(Command c, std::string raw = {}) : command(std::move(c)), raw_text(std::move(raw)) {}

  bool operator==(const Action& other) const { return command == other.command; }
  template <typename T>
  bool is() const {
    return std::holds_alternative<T>(command);
  }
};

enum class ActionKind { kNavigate = 0, kGoToAndOpen = 1, kClose = 2, kExplore = 3, kDone = 4 };
inline constexpr int kActionKindCount = 5;

inline ActionKind kind_of(const Action& a) { return static_cast<ActionKind>(a.command.index()); }

/// Canonical lowercase command text, e.g. "navigate(kitchen, fridge)".
std::string render_command(const Action& a);
const char* verb_name(ActionKind kind);

}  // namespace scenesearch
