#pragma once

// Command grammar, prompt rendering, response parsing and action execution.
//
//   response  = [ "Analysis:" text ] [ "Reasoning:" text ] "Command:" command
//   command   = verb "(" [ arg { "," arg } ] ")"
//   verb      = "navigate" | "go_to_and_open" | "close" | "explore" | "done"
//   arg       = 1*( lowercase letter | digit | "_" )
//
// Verbs and arguments are matched case-insensitively and surrounding
// whitespace is ignored; the command is the last non-empty line of the
// Command section.

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "scenesearch/action.hpp"
#include "scenesearch/scenegraph.hpp"

namespace scenesearch {

enum class ParseFailureReason { kMissingSections, kBadCommand, kUnknownVerb, kBadArity, kTimeout };

/// "missing-sections", "bad-command", "unknown-verb", "bad-arity", "timeout".
const char* reason_tag(ParseFailureReason reason);
std::optional<ParseFailureReason> reason_from_tag(std::string_view tag);

struct ParseFailure {
  ParseFailureReason reason = ParseFailureReason::kBadCommand;
  std::string detail;
  bool operator==(const ParseFailure& other) const { return reason == other.reason; }
};

struct PlannerResponse {
  std::string analysis;
  std::string reasoning;
  std::string command;
  bool operator==(const PlannerResponse&) const = default;
};

struct ParsedResponse {
  PlannerResponse response;
  std::variant<Action, ParseFailure> result;

  bool ok() const { return std::holds_alternative<Action>(result); }
  const Action& action() const { return std::get<Action>(result); }
  const ParseFailure& failure() const { return std::get<ParseFailure>(result); }
};

/// Accepts arbitrary text; failures come back as values.
ParsedResponse parse_response(std::string_view text);
/// Parses a single command line (no sections).
std::variant<Action, ParseFailure> parse_command(std::string_view line);

/// Full three-section response block ending with the rendered command.
std::string render_response(const Action& a, std::string_view analysis, std::string_view reasoning);

struct PromptText {
  std::string system;
  std::string user;
  /// system + blank line + user.
  std::string text() const { return system + "\n" + user; }
  bool operator==(const PromptText&) const = default;
};

/// Deterministic prompt for the current snapshot. The previous action comes
/// from `s.prev_action`.
PromptText serialize_observation(const EnvSnapshot& s, const Task& task);

struct StepOutcome {
  std::optional<Action> action;
  std::optional<ParseFailure> failure;
  bool executable = false;
  int new_nodes = 0;
  double dist_delta = 0.0;
  std::set<ObjectId> revealed;
  bool done_called = false;
  /// Nodes walked, including the start node; empty when the robot did not move.
  std::vector<NodeId> path;

  bool parsed() const { return action.has_value(); }
};

/// Whether `a` can run in `s`, decided from the scene graph, explored nodes,
/// robot pose and open containers only.
bool is_executable(const Action& a, const EnvSnapshot& s);

/// Runs one action. Inexecutable actions only advance the step counter.
std::pair<EnvSnapshot, StepOutcome> execute(const Action& a, EnvSnapshot s);
/// A parse failure consumes a step and changes nothing else.
std::pair<EnvSnapshot, StepOutcome> execute_failure(const ParseFailure& failure, EnvSnapshot s);
/// Dispatches on the parse result.
std::pair<EnvSnapshot, StepOutcome> execute_parsed(const ParsedResponse& parsed, EnvSnapshot s);

/// Object named by a navigate/open command, if the scene graph has it.
std::optional<ObjectId> resolve_object(const EnvSnapshot& s, const std::string& room, const std::string& object);
/// Room named by a command, if the scene graph has it.
std::optional<RoomId> resolve_room(const EnvSnapshot& s, const std::string& room);
/// Target of close(): the most recently opened container whose approach
/// node is the robot's node.
std::optional<ObjectId> close_target(const EnvSnapshot& s);
/// Nearest unexplored node of a room from the robot (ties: smallest id).
std::optional<NodeId> nearest_unexplored(const EnvSnapshot& s, RoomId room);

}  // namespace scenesearch
