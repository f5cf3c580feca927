#include <doctest.h>

#include <limits>
#include <queue>

#include "fixtures.hpp"
#include "scenesearch/errors.hpp"

using namespace scenesearch;

namespace {

// Plain Dijkstra distance over the motion graph.
double dijkstra(const NavGraph& g, NodeId from, NodeId to) {
  std::vector<double> d(g.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
  d[g.index_of(from)] = 0.0;
  q.push({0.0, from});
  while (!q.empty()) {
    auto [dist, n] = q.top();
    q.pop();
    if (dist > d[g.index_of(n)]) continue;
    for (auto [m, len] : g.neighbors(n))
      if (dist + len < d[g.index_of(m)]) {
        d[g.index_of(m)] = dist + len;
        q.push({dist + len, m});
      }
  }
  return d[g.index_of(to)];
}

Action parse_ok(std::string_view line) {
  auto r = parse_command(line);
  REQUIRE(std::holds_alternative<Action>(r));
  return std::get<Action>(r);
}

EnvSnapshot fixture_start() {
  return reset_snapshot(make_environment(fixtures::two_room_house()), fixtures::microwave_task());
}

}  // namespace

TEST_CASE("every command variant round trips through text") {
  const std::vector<Action> actions = {
      Action{Navigate{"kitchen", "table"}},     Action{Navigate{"bedroom_2", "bed_1"}},
      Action{GoToAndOpen{"kitchen", "fridge"}}, Action{Close{}},
      Action{Explore{"living_room"}},           Action{Done{}},
  };
  for (const Action& a : actions) {
    CAPTURE(render_command(a));
    CHECK(parse_ok(render_command(a)) == a);
    const ParsedResponse r = parse_response(render_response(a, "I see a table.", "It may be nearby."));
    REQUIRE(r.ok());
    CHECK(r.action() == a);
    CHECK(r.response.analysis == "I see a table.");
    CHECK(r.response.reasoning == "It may be nearby.");
  }
  CHECK(render_command(Action{GoToAndOpen{"kitchen", "fridge"}}) == "go_to_and_open(kitchen, fridge)");
  CHECK(render_command(Action{Close{}}) == "close()");
}

TEST_CASE("parsing is case and whitespace tolerant") {
  CHECK(parse_ok("  NAVIGATE ( Kitchen ,  Table )  ") == Action{Navigate{"kitchen", "table"}});
  CHECK(parse_ok("Done()") == Action{Done{}});
  CHECK(parse_ok("explore(living_room)").raw_text == "explore(living_room)");
  const ParsedResponse r = parse_response("Analysis: a\nReasoning: b\nCommand:\n  thinking...\n  explore(kitchen)\n\n");
  REQUIRE(r.ok());
  CHECK(r.action() == Action{Explore{"kitchen"}});
  CHECK(parse_response("done()").ok());
}

TEST_CASE("adversarial responses fail with the right reason") {
  struct Case {
    std::string text;
    const char* tag;
  };
  const std::vector<Case> cases = {
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
  for (const Case& c : cases) {
    CAPTURE(c.text);
    const ParsedResponse r = parse_response(c.text);
    REQUIRE_FALSE(r.ok());
    CHECK(std::string(reason_tag(r.failure().reason)) == c.tag);
    CHECK(reason_from_tag(c.tag) == r.failure().reason);
  }
  CHECK_FALSE(reason_from_tag("nope").has_value());
}

TEST_CASE("prompt text matches the checked-in rendering") {
  const EnvSnapshot s = fixture_start();
  const PromptText p = serialize_observation(s, fixtures::microwave_task());
  CHECK(fixtures::matches_golden("prompt_fixture_start.txt", p.text()));
  CHECK(serialize_observation(s, fixtures::microwave_task()) == p);

  EnvSnapshot empty = s;
  empty.scene = SceneGraph{};
  const PromptText e = serialize_observation(empty, fixtures::microwave_task());
  CHECK(e.user.find("Scene graph: no rooms discovered yet") != std::string::npos);
  CHECK(fixtures::matches_golden("prompt_empty_scene.txt", e.text()));
}

TEST_CASE("executing the fixture plan") {
  EnvSnapshot s = fixture_start();
  const NavGraph& nav = s.env->nav;

  auto [s1, o1] = execute(Action{Explore{"living_room"}}, s);
  CHECK(o1.executable);
  CHECK(o1.new_nodes == 5);
  CHECK(o1.dist_delta == doctest::Approx(dijkstra(nav, 0, 1)));
  CHECK(o1.dist_delta == doctest::Approx(2.0));
  CHECK(o1.revealed == std::set<ObjectId>{2, 3});
  CHECK(o1.path == std::vector<NodeId>{0, 1});
  CHECK(s1.robot_node() == 1);
  CHECK(s1.world.step_index == 1);

  auto [s2, o2] = execute(Action{GoToAndOpen{"living_room", "cabinet"}}, s1);
  CHECK(o2.executable);
  CHECK(o2.dist_delta == doctest::Approx(dijkstra(nav, 1, 4)));
  CHECK(o2.dist_delta == doctest::Approx(3.0));
  CHECK(o2.revealed == std::set<ObjectId>{4});
  CHECK(goal_visible(s2, "microwave"));
  CHECK(s2.world.dist_total == doctest::Approx(5.0));

  auto [s3, o3] = execute(Action{Close{}}, s2);
  CHECK(o3.executable);
  CHECK(o3.dist_delta == 0.0);
  CHECK_FALSE(s3.world.is_open(3));
  CHECK(s3.world.seen.contains(4));

  auto [s4, o4] = execute(Action{Navigate{"kitchen", "table"}}, s3);
  CHECK(o4.executable);
  CHECK(o4.dist_delta == doctest::Approx(dijkstra(nav, 4, 0)));
  CHECK(o4.new_nodes == 0);

  auto [s5, o5] = execute(Action{Done{}}, s4);
  CHECK(o5.done_called);
  CHECK(o5.dist_delta == 0.0);
}

TEST_CASE("inexecutable actions only advance the step counter") {
  const EnvSnapshot s = fixture_start();
  for (const Action& a : {Action{Navigate{"living_room", "cabinet"}}, Action{GoToAndOpen{"kitchen", "table"}},
                          Action{Explore{"kitchen"}}, Action{Explore{"garage"}}, Action{Close{}},
                          Action{Navigate{"kitchen", "sofa"}}}) {
    CAPTURE(render_command(a));
    CHECK_FALSE(is_executable(a, s));
    auto [next, out] = execute(a, s);
    CHECK_FALSE(out.executable);
    CHECK(out.dist_delta == 0.0);
    CHECK(out.path.empty());
    CHECK(next.world.step_index == s.world.step_index + 1);
    CHECK(next.world.dist_total == s.world.dist_total);
    CHECK(next.world.seen == s.world.seen);
    CHECK(next.nav_explored == s.nav_explored);
  }
  auto [next, out] = execute_failure(ParseFailure{ParseFailureReason::kBadArity, ""}, s);
  CHECK_FALSE(out.parsed());
  CHECK(out.failure.has_value());
  CHECK(next.world.step_index == 1);
  CHECK(next.world.dist_total == 0.0);
}

TEST_CASE("close targets the latest container opened at the robot node") {
  EnvSnapshot s = execute(Action{Explore{"living_room"}}, fixture_start()).first;
  CHECK_FALSE(close_target(s).has_value());
  s = execute(Action{GoToAndOpen{"living_room", "cabinet"}}, s).first;
  CHECK(close_target(s) == 3);
  CHECK_FALSE(is_executable(Action{GoToAndOpen{"living_room", "cabinet"}}, s));
  s = execute(Action{Navigate{"living_room", "table"}}, s).first;
  CHECK_FALSE(close_target(s).has_value());
  CHECK(nearest_unexplored(s, 1) == std::nullopt);
  CHECK(resolve_room(s, "living_room") == 1);
  CHECK(resolve_object(s, "living_room", "microwave") == 4);
}

TEST_CASE("executability ignores hidden ground truth") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    const Scenario sc = make_scenario(seed, seed);
    EnvSnapshot s = reset_snapshot(sc.env, sc.task);
    Rng rng(seed);
    for (int i = 0; i < 6; ++i) {
      const auto c = prompt_candidates(s);
      const Action& a = c[uniform_index(rng, c.size())];
      if (!a.is<Done>()) s = execute(a, std::move(s)).first;
    }
    // Rename every unseen object; what the robot knows is unchanged.
    HouseSpec redacted = sc.env->house;
    for (ObjectSpec& o : redacted.objects)
      if (!s.world.seen.contains(o.id)) o.category = o.articulated ? o.category : "mystery";
    EnvSnapshot r = s;
    r.env = make_environment(redacted);
    const std::vector<Action> probes = prompt_candidates(s);
    for (const Action& a : probes) CHECK(is_executable(a, s) == is_executable(a, r));
    CHECK(is_executable(Action{Navigate{"kitchen", "mystery"}}, r) == false);
  }
}
