// One PASS/FAIL line per acceptance criterion. Exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <deque>
#include <functional>
#include <numeric>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "scenesearch/envserver.hpp"
#include "scenesearch/errors.hpp"
#include "scenesearch/trainer.hpp"

using namespace scenesearch;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Records the first failed check; later checks only add detail.
class Checker {
 public:
  void check(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failure_.empty()) failure_ = what;
  }
  Outcome result(std::string detail) const {
    if (!failure_.empty()) return {false, failure_};
    return {true, std::to_string(checks_) + " checks; " + detail};
  }

 private:
  int checks_ = 0;
  std::string failure_;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

class ScriptedPlanner final : public Planner {
 public:
  explicit ScriptedPlanner(std::vector<std::string> texts, bool cycle = false)
      : texts_(std::move(texts)), cycle_(cycle) {}
  std::string name() const override { return "scripted"; }
  PlannerReply respond(const EnvSnapshot&, const Task&, const PromptText&) override {
    const std::size_t i = cycle_ ? next_++ % texts_.size() : next_++;
    return PlannerReply{texts_.at(i), std::nullopt};
  }

 private:
  std::vector<std::string> texts_;
  bool cycle_;
  std::size_t next_ = 0;
};

class ReplayChannel final : public LineChannel {
 public:
  ReplayChannel(std::deque<std::string> replies, std::vector<std::string>* sent)
      : replies_(std::move(replies)), sent_(sent) {}
  void send_line(std::string_view line) override { sent_->emplace_back(line); }
  std::optional<std::string> recv_line(std::optional<std::chrono::milliseconds>) override {
    if (replies_.empty()) throw PlannerTransportError("transcript exhausted");
    std::string r = replies_.front();
    replies_.pop_front();
    return r;
  }
  void drain() override {}

 private:
  std::deque<std::string> replies_;
  std::vector<std::string>* sent_;
};

Scenario fixture_scenario() {
  return Scenario{0, 0, {}, make_environment(fixtures::two_room_house()), fixtures::microwave_task()};
}

std::vector<std::pair<char, std::string>> read_transcript(const std::string& name) {
  std::vector<std::pair<char, std::string>> out;
  std::istringstream in(fixtures::read_text(fixtures::golden_path(name)));
  for (std::string line; std::getline(in, line);)
    if (line.size() > 3) out.emplace_back(line[0] == '-' ? '>' : '<', line.substr(3));
  return out;
}

EvalSummary eval_student(const PolicyParams& p) {
  return eval_suite([&](std::uint64_t, int) { return std::make_unique<StudentPlanner>(p); }, SuiteConfig{}).first;
}

double variance(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------

Outcome reward_arithmetic() {
  Checker c;
  const std::vector<std::string> script = {
      "Command: explore(living_room)",
      "Command: go_to_and_open(living_room, cabinet)",
      "Command: close()",
      "Command: navigate(kitchen, table)",
      "what now?",
      "Command: explore(kitchen)",
      "Command: navigate(living_room, table)",
      "Command: go_to_and_open(living_room, cabinet)",
      "Command: navigate(kitchen, cabinet)",
      "Command: go_to_and_open(kitchen, cabinet)",
      "Command: fly(away)",
  };
  int steps = 0;
  double worst = 0.0;
  for (double lambda : {0.3, 0.6}) {
    EpisodeConfig cfg;
    cfg.max_steps = 50;
    cfg.reward.lambda_efficiency = lambda;
    ScriptedPlanner planner(script, true);
    const EpisodeRecord r = run_episode(planner, fixture_scenario(), cfg);
    c.check(r.steps.size() == 50, "scripted episode is not 50 steps");
    for (const StepRecord& st : r.steps) {
      const double want = oracles::hand_reward(st.executable, st.new_nodes, st.dist_delta, !st.failure, cfg.reward);
      worst = std::max(worst, std::abs(st.reward.total - want));
      c.check(std::abs(st.reward.total - want) <= 1e-12, "reward differs from the component sum");
      ++steps;
    }
  }
  return c.result(std::to_string(steps) + " steps, max |diff| " + fmt("%.1e", worst));
}

Outcome success_semantics() {
  Checker c;
  const Scenario sc = fixture_scenario();
  ScriptedPlanner early({"Command: done()"});
  const EpisodeRecord e = run_episode(early, sc, EpisodeConfig{});
  c.check(!e.success && e.steps.size() == 1, "done() with the goal unseen did not fail the episode");
  c.check(!e.steps[0].reward.success && e.steps[0].reward.total != 5.0, "early done() earned the bonus");

  ScriptedPlanner plan({"Command: explore(living_room)", "Command: go_to_and_open(living_room, cabinet)", "Command: done()"});
  const EpisodeRecord s = run_episode(plan, sc, EpisodeConfig{});
  c.check(s.success, "done() with the goal in the scene graph did not succeed");
  c.check(s.steps.back().reward.total == 5.0, "success reward is not exactly 5.0");

  EnvSession server(ServerConfig{});
  const json reset = json::parse(server.handle_line(R"({"v":1,"type":"reset","seed":7})"));
  const std::string id = reset.at("session");
  const json unseen = json::parse(server.handle_line(
      json{{"v", 1}, {"type", "step"}, {"session", id}, {"response_text", "Command: done()"}}.dump()));
  c.check(unseen.at("done") == true && unseen.at("success") == false, "wire: early done() not a failure");

  const json reset2 = json::parse(server.handle_line(R"({"v":1,"type":"reset","seed":7})"));
  const std::string id2 = reset2.at("session");
  json last;
  for (int i = 0; i < 30; ++i) {
    const SessionState& st = server.sessions().at(id2);
    if (st.finished) break;
    last = json::parse(server.handle_line(json{{"v", 1},
                                               {"type", "step"},
                                               {"session", id2},
                                               {"response_text", response_text(plan_oracle(st.snapshot, st.scenario.task))}}
                                              .dump()));
  }
  c.check(last.at("success") == true, "wire: oracle session did not succeed");
  c.check(last.at("reward").at("total").get<double>() == 5.0, "wire: success reward is not exactly 5.0");
  return c.result("in-process and wire");
}

Outcome graph_suite() {
  Checker c;
  int bridges = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const HouseSpec h = generate_house(seed);
    const NavGraph g = build_nav_graph(h);
    const auto subs = decompose_rooms(g);
    const NavGraph r = connect_rooms(subs, g);
    c.check(g.connected() && r.connected(), "reachability lost in seed " + std::to_string(seed));
    std::set<std::pair<NodeId, NodeId>> inner;
    for (const RoomSubgraph& s : subs)
      for (const NavEdge& e : s.edges) inner.insert({e.a, e.b});
    const auto expected = oracles::closest_bridges(g);
    std::size_t found = 0;
    for (const NavEdge& e : r.edges()) {
      if (inner.contains({e.a, e.b})) continue;
      ++found;
      RoomId ra = g.node(e.a).room, rb = g.node(e.b).room;
      if (ra > rb) std::swap(ra, rb);
      const auto it = expected.find({ra, rb});
      c.check(it != expected.end() && it->second.a == e.a && it->second.b == e.b &&
                  std::abs(it->second.length - e.length) < 1e-9,
              "bridge mismatch in seed " + std::to_string(seed));
    }
    c.check(found == expected.size(), "bridge count mismatch in seed " + std::to_string(seed));
    bridges += static_cast<int>(found);
  }
  int pairs = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const int n = 2 + static_cast<int>(seed % 49);
    const NavGraph g = oracles::random_graph(seed, n, n / 2);
    for (const NavNode& src : g.nodes()) {
      const auto bf = oracles::bellman_ford(g, src.id);
      for (const NavNode& dst : g.nodes()) {
        c.check(std::abs(shortest_path(g, src.id, dst.id).length - bf[g.index_of(dst.id)]) < 1e-9,
                "shortest path differs from Bellman-Ford");
        ++pairs;
      }
    }
  }
  return c.result("100 houses, " + std::to_string(bridges) + " bridges, " + std::to_string(pairs) + " path pairs");
}

Outcome parser_suite() {
  Checker c;
  for (const Action& a : {Action{Navigate{"kitchen", "table"}}, Action{GoToAndOpen{"bedroom_2", "wardrobe"}},
                          Action{Close{}}, Action{Explore{"living_room"}}, Action{Done{}}}) {
    const auto back = parse_command(render_command(a));
    c.check(std::holds_alternative<Action>(back) && std::get<Action>(back) == a, "parse(render(a)) != a");
    const ParsedResponse full = parse_response(render_response(a, "x", "y"));
    c.check(full.ok() && full.action() == a, "response round trip failed");
  }
  const std::vector<std::pair<std::string, std::string>> bad = {
      {"", "missing-sections"},
      {"   \n\n ", "missing-sections"},
      {"Analysis: nothing here", "missing-sections"},
      {"Analysis: a\nReasoning: b", "missing-sections"},
      {"Analysis: a\nCommand:", "missing-sections"},
      {"Command: navigate(kitchen)", "bad-arity"},
      {"Command: navigate(kitchen, table, chair)", "bad-arity"},
      {"Command: done(now)", "bad-arity"},
      {"Command: explore()", "bad-arity"},
      {"Command: go_to_and_open(kitchen, )", "bad-arity"},
      {"Command: fly(kitchen)", "unknown-verb"},
      {"Command: open(kitchen, fridge)", "unknown-verb"},
      {"Command: navigate kitchen table", "bad-command"},
      {"Command: navigate(kitchen, table", "bad-command"},
      {"Command: (kitchen)", "bad-command"},
      {"Command: 42(kitchen)", "bad-command"},
      {"Command: explore((kitchen))", "bad-command"},
      {"Command: explore(kit chen)", "bad-command"},
      {"Command: explore(kitchen!)", "bad-command"},
      {"Command: navigate(kitchen, table); done()", "bad-command"},
  };
  const EnvSnapshot start = reset_snapshot(fixture_scenario().env, fixtures::microwave_task());
  for (const auto& [text, tag] : bad) {
    const ParsedResponse r = parse_response(text);
    c.check(!r.ok(), "malformed response parsed: " + text);
    if (r.ok()) continue;
    c.check(reason_tag(r.failure().reason) == tag, "wrong reason for: " + text);
    const StepOutcome out = execute_parsed(r, start).second;
    c.check(std::abs(compute_reward(out, false, RewardParams{}).total + 0.4) < 1e-12, "reward is not -0.4 for: " + text);
  }
  return c.result("5 variants, " + std::to_string(bad.size()) + " malformed responses");
}

Outcome metric_suite() {
  Checker c;
  c.check(spl_term(true, 10.0, 10.0) == 1.0, "SPL(l=p) != 1");
  c.check(spl_term(true, 10.0, 20.0) == 0.5, "SPL(l=10, p=20) != 0.5");
  c.check(spl_term(false, 10.0, 10.0) == 0.0, "SPL(failure) != 0");
  const auto [summary, records] =
      eval_suite([](std::uint64_t, int) { return std::make_unique<OraclePlanner>(); }, SuiteConfig{});
  c.check(records.size() == 175, "oracle sweep is not 175 episodes");
  c.check(summary.sr == 100.0, "oracle SR below 100%");
  c.check(summary.retrials == 0.0, "oracle made retrials");
  c.check(summary.spl <= summary.sr, "SPL > SR");
  for (const EpisodeRecord& r : records)
    c.check(r.dist_total >= r.shortest_possible - 1e-9, "episode shorter than shortest_possible");
  for (const auto& make : std::vector<PlannerFactory>{
           [](std::uint64_t, int) { return std::make_unique<GreedyPlanner>(); },
           [](std::uint64_t s, int run) { return std::make_unique<RandomPlanner>(s * 1000 + static_cast<std::uint64_t>(run)); }}) {
    const EvalSummary other = eval_suite(make, SuiteConfig{}).first;
    c.check(other.spl <= other.sr, "SPL > SR");
  }
  return c.result("175 oracle episodes, SR " + fmt("%.1f", summary.sr) + ", SPL " + fmt("%.1f", summary.spl));
}

Outcome trend_distillation() {
  Checker c;
  const EvalSummary before = eval_student(PolicyParams{});
  TrainConfig cfg;
  const EvalSummary after = eval_student(train_student(cfg));
  c.check(after.sr - before.sr >= 20.0, "held-out SR gain below 20 points");
  return c.result("SR " + fmt("%.1f", before.sr) + " -> " + fmt("%.1f", after.sr));
}

Outcome trend_distance_penalty() {
  Checker c;
  double dist_low = 0.0, dist_high = 0.0, sr_low = 0.0, sr_high = 0.0;
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    TrainConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    const EvalSummary low = eval_student(train_student(cfg));
    cfg.episode.reward.lambda_efficiency = 0.6;
    const EvalSummary high = eval_student(train_student(cfg));
    dist_low += low.dist / seeds;
    dist_high += high.dist / seeds;
    sr_low += low.sr / seeds;
    sr_high += high.sr / seeds;
  }
  c.check(dist_high < dist_low, "stronger distance penalty did not lower mean Dist");
  return c.result("mean Dist " + fmt("%.3f", dist_low) + " (0.3) vs " + fmt("%.3f", dist_high) + " (0.6), SR " +
                  fmt("%.1f", sr_low) + " vs " + fmt("%.1f", sr_high));
}

Outcome training_stability() {
  Checker c;
  double var_with = 0.0, var_without = 0.0, sr_with = 0.0, sr_without = 0.0;
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    TrainConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    TrainLog with_log;
    sr_with += eval_student(train_student(cfg, &with_log)).sr / seeds;
    var_with += variance(with_log.episode_sft_loss) / seeds;
    cfg.num_epochs_fewshot = 0;
    cfg.fewshot_samples = 0;
    TrainLog without_log;
    sr_without += eval_student(train_student(cfg, &without_log)).sr / seeds;
    var_without += variance(without_log.episode_sft_loss) / seeds;
  }
  c.check(sr_without < sr_with || var_without > var_with, "skipping stage 1 was neither less accurate nor noisier");
  return c.result("stage-2 SFT loss variance " + fmt("%.4f", var_with) + " with stage 1 vs " + fmt("%.4f", var_without) +
                  " without; SR " + fmt("%.1f", sr_with) + " vs " + fmt("%.1f", sr_without));
}

Outcome gradient_checks() {
  Checker c;
  double worst = 0.0;
  Rng rng(17);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PolicyParams p;
    for (int i = 0; i < p.W.rows(); ++i)
      for (int j = 0; j < p.W.cols(); ++j) p.W(i, j) = normal(rng);
    std::vector<Transition> batch;
    for (std::uint64_t k = 0; k < 3; ++k) {
      const Scenario sc = make_scenario(1 + k, seed * 10 + k);
      EnvSnapshot s = reset_snapshot(sc.env, sc.task);
      for (int step = 0; step < 6; ++step) {
        Transition t;
        t.features = featurize(s, sc.task);
        const int n = static_cast<int>(t.features.candidates.size());
        t.chosen = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n)));
        t.old_log_prob = std::log(action_probs(p, t.features)(t.chosen)) + 0.3 * normal(rng);
        t.advantage = normal(rng) * 2.0;

        const Eigen::MatrixXd ce = ce_gradient(p, t.features, t.chosen);
        const Eigen::MatrixXd ce_fd = oracles::numeric_gradient(
            p, [&](const PolicyParams& q) { return ce_loss(q, t.features, t.chosen); });
        worst = std::max(worst, oracles::relative_error(ce, ce_fd));
        c.check(oracles::relative_error(ce, ce_fd) < 1e-4, "CE gradient mismatch");

        auto [next, out] = execute(t.features.candidates[static_cast<std::size_t>(t.chosen)], s);
        t.done = out.done_called;
        batch.push_back(t);
        if (t.done) break;
        s = std::move(next);
      }
    }
    const Eigen::MatrixXd g = ppo_gradient(p, batch, 0.2, 0.01);
    const Eigen::MatrixXd g_fd =
        oracles::numeric_gradient(p, [&](const PolicyParams& q) { return ppo_objective(q, batch, 0.2, 0.01); });
    worst = std::max(worst, oracles::relative_error(g, g_fd));
    c.check(oracles::relative_error(g, g_fd) < 1e-4, "PPO surrogate gradient mismatch");
  }
  return c.result("max relative error " + fmt("%.1e", worst));
}

Outcome protocol_conformance() {
  Checker c;
  const auto env_lines = read_transcript("envserver_transcript.txt");
  c.check(!env_lines.empty(), "env-server transcript missing");
  EnvSession server(ServerConfig{});
  std::optional<std::string> reply;
  int frames = 0;
  for (const auto& [dir, line] : env_lines) {
    if (dir == '>') {
      reply = server.handle_line(line);
    } else {
      c.check(reply && *reply == line, "env-server reply differs from the transcript");
      ++frames;
    }
  }

  const auto plan_lines = read_transcript("remote_planner_transcript.txt");
  c.check(!plan_lines.empty(), "remote planner transcript missing");
  std::deque<std::string> replies;
  std::vector<std::string> expected_sent, sent;
  for (const auto& [dir, line] : plan_lines) (dir == '<' ? replies.push_back(line) : expected_sent.push_back(line));
  RemotePlanner remote(std::make_unique<ReplayChannel>(replies, &sent), "replay");
  run_episode(remote, fixture_scenario(), EpisodeConfig{});
  c.check(sent == expected_sent, "remote planner requests differ from the transcript");
  frames += static_cast<int>(sent.size());

  int compared = 0;
  for (std::uint64_t seed : {3, 7, 12}) {
    EnvSession wire(ServerConfig{});
    const std::string id = json::parse(wire.handle_line(json{{"v", 1}, {"type", "reset"}, {"seed", seed}}.dump())).at("session");
    std::vector<std::string> texts;
    std::vector<json> rewards;
    for (int i = 0; i < 30 && !wire.sessions().at(id).finished; ++i) {
      const SessionState& st = wire.sessions().at(id);
      texts.push_back(i % 3 == 1 ? "no idea" : response_text(plan_oracle(st.snapshot, st.scenario.task)));
      rewards.push_back(json::parse(wire.handle_line(
                                        json{{"v", 1}, {"type", "step"}, {"session", id}, {"response_text", texts.back()}}.dump()))
                            .at("reward"));
    }
    ScriptedPlanner scripted(texts);
    EpisodeConfig cfg;
    cfg.max_steps = static_cast<int>(texts.size());
    const EpisodeRecord r = run_episode(scripted, make_scenario(seed, seed), cfg);
    c.check(r.steps.size() == rewards.size(), "in-process trace length differs");
    for (std::size_t i = 0; i < std::min(r.steps.size(), rewards.size()); ++i, ++compared)
      c.check(reward_to_json(r.steps[i].reward) == rewards[i], "wire reward differs from in-process reward");
  }
  return c.result(std::to_string(frames) + " transcript frames, " + std::to_string(compared) + " rewards compared");
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double limit_s;
  };
  const std::vector<Criterion> criteria = {
      {"reward arithmetic", reward_arithmetic, 1.0},
      {"success semantics", success_semantics, 0.0},
      {"graph suite", graph_suite, 30.0},
      {"parser suite", parser_suite, 0.0},
      {"metric suite", metric_suite, 120.0},
      {"training trend: distillation lifts held-out SR", trend_distillation, 600.0},
      {"training trend: distance penalty lowers Dist", trend_distance_penalty, 0.0},
      {"training stability without few-shot stage", training_stability, 0.0},
      {"gradient checks", gradient_checks, 0.0},
      {"protocol conformance", protocol_conformance, 0.0},
  };
  int failed = 0;
  for (const Criterion& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.limit_s > 0.0 && secs >= cr.limit_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", cr.limit_s) + " s limit";
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s  %-48s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", cr.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
