#pragma once

// Planner contract (prompt in, response text out) and the built-in planners.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scenesearch/actionlang.hpp"
#include "scenesearch/net.hpp"

namespace scenesearch {

struct PlannerReply {
  std::string text;
  /// Set when no text could be obtained (remote timeout); handled like a
  /// format violation.
  std::optional<ParseFailure> failure;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual std::string name() const = 0;
  /// Throws PlannerTransportError when the planner is unreachable.
  virtual PlannerReply respond(const EnvSnapshot& s, const Task& task, const PromptText& prompt) = 0;
};

/// Ground-truth optimal action sequence from `s`, ending with done().
struct OraclePlan {
  std::vector<Action> actions;
  double distance = 0.0;
};

/// Uniform-cost search over (robot node, entered rooms) using full world
/// knowledge. Always returns an executable plan; when the goal cannot be
/// revealed the plan is just done().
OraclePlan optimal_plan(const EnvSnapshot& s, const std::string& goal);

/// First step of the optimal plan, with analysis and reasoning text.
PlannerResponse plan_oracle(const EnvSnapshot& s, const Task& task);

/// Every syntactically valid command over names present in the scene graph,
/// in a fixed order. With no rooms known this is explore(current room) and done().
std::vector<Action> prompt_candidates(const EnvSnapshot& s);

/// Uniform choice among prompt_candidates, seeded by (prompt digest, seed).
PlannerResponse plan_random(const EnvSnapshot& s, const Task& task, std::uint64_t seed);

/// Done if the goal is visible, else open the nearest closed container, else
/// explore the nearest room with unexplored nodes, else done.
PlannerResponse plan_greedy(const EnvSnapshot& s, const Task& task);

std::string response_text(const PlannerResponse& r);

class OraclePlanner final : public Planner {
 public:
  std::string name() const override { return "oracle"; }
  PlannerReply respond(const EnvSnapshot& s, const Task& task, const PromptText& prompt) override;
};

class RandomPlanner final : public Planner {
 public:
  explicit RandomPlanner(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  PlannerReply respond(const EnvSnapshot& s, const Task& task, const PromptText& prompt) override;

 private:
  std::uint64_t seed_;
};

class GreedyPlanner final : public Planner {
 public:
  std::string name() const override { return "greedy"; }
  PlannerReply respond(const EnvSnapshot& s, const Task& task, const PromptText& prompt) override;
};

/// Talks the newline-delimited JSON planner protocol:
///   -> {"system":...,"type":"plan","user":...,"v":1}
///   <- {"text":...,"type":"response","v":1}
class RemotePlanner final : public Planner {
 public:
  RemotePlanner(std::unique_ptr<LineChannel> channel, std::string name,
                std::chrono::milliseconds timeout = std::chrono::seconds(60));
  std::string name() const override { return name_; }
  PlannerReply respond(const EnvSnapshot& s, const Task& task, const PromptText& prompt) override;

 private:
  std::unique_ptr<LineChannel> channel_;
  std::string name_;
  std::chrono::milliseconds timeout_;
  bool stale_ = false;
};

/// Request frame for one planning step (canonical JSON, no newline).
std::string plan_request_frame(const PromptText& prompt);
/// Text of a response frame. Throws PlannerTransportError on malformed frames.
std::string parse_plan_response_frame(const std::string& line);

/// One remote round trip; a timeout yields ParseFailure(timeout).
PlannerReply plan_remote(LineChannel& channel, const PromptText& prompt, std::chrono::milliseconds timeout);

}  // namespace scenesearch
