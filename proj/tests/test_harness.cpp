#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "scenesearch/errors.hpp"

using namespace scenesearch;

namespace {

class GarbagePlanner final : public Planner {
 public:
  std::string name() const override { return "garbage"; }
  PlannerReply respond(const EnvSnapshot&, const Task&, const PromptText&) override {
    return PlannerReply{"lorem ipsum", std::nullopt};
  }
};

class FailingPlanner final : public Planner {
 public:
  std::string name() const override { return "failing"; }
  PlannerReply respond(const EnvSnapshot&, const Task&, const PromptText&) override {
    throw PlannerTransportError("connection reset");
  }
};

Scenario fixture_scenario(Task task = fixtures::microwave_task()) {
  return Scenario{0, 0, {}, make_environment(fixtures::two_room_house()), task};
}

EpisodeRecord record(bool success, double shortest, double travelled) {
  EpisodeRecord r;
  r.success = success;
  r.shortest_possible = shortest;
  r.dist_total = travelled;
  return r;
}

SuiteConfig small_suite() {
  SuiteConfig cfg;
  cfg.scene_seeds = {101, 102, 103};
  cfg.runs_per_scene = 4;
  return cfg;
}

}  // namespace

TEST_CASE("hand-computed SPL terms") {
  CHECK(spl_term(true, 10.0, 10.0) == 1.0);
  CHECK(spl_term(true, 10.0, 20.0) == 0.5);
  CHECK(spl_term(false, 10.0, 10.0) == 0.0);
  CHECK(spl_term(true, 0.0, 0.0) == 1.0);
  CHECK(spl_term(true, 0.0, 3.0) == 0.0);

  const EvalSummary s = summarize({record(true, 10.0, 10.0), record(true, 10.0, 20.0), record(false, 5.0, 7.0),
                                   record(false, 5.0, 1.0)});
  CHECK(s.episodes == 4);
  CHECK(s.sr == 50.0);
  CHECK(s.spl == doctest::Approx(37.5));
  CHECK(s.dist == doctest::Approx(9.5));
  CHECK(s.dist_success == doctest::Approx(15.0));
  CHECK_THROWS_AS(summarize({}), EmptySet);
}

TEST_CASE("SPL never exceeds SR") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EpisodeRecord> rs;
    const std::size_t n = 1 + uniform_index(rng, 10);
    for (std::size_t i = 0; i < n; ++i)
      rs.push_back(record(uniform_index(rng, 2) == 1, 0.5 * static_cast<double>(uniform_index(rng, 40)),
                          0.5 * static_cast<double>(uniform_index(rng, 60))));
    const EvalSummary s = summarize(rs);
    CHECK(s.spl <= s.sr + 1e-12);
    CHECK(s.spl >= 0.0);
  }
}

TEST_CASE("a planner that never parses burns the whole budget") {
  GarbagePlanner garbage;
  const EpisodeRecord r = run_episode(garbage, fixture_scenario(), EpisodeConfig{});
  CHECK_FALSE(r.success);
  CHECK(r.steps.size() == 30);
  CHECK(r.retrials == 30);
  CHECK(r.dist_total == 0.0);
  for (const StepRecord& st : r.steps) CHECK(st.reward.total == doctest::Approx(-0.4));
}

TEST_CASE("transport errors end the episode with a fault") {
  FailingPlanner failing;
  const EpisodeRecord r = run_episode(failing, fixture_scenario(), EpisodeConfig{});
  CHECK_FALSE(r.success);
  CHECK(r.fault.has_value());
  CHECK(r.steps.empty());
}

TEST_CASE("shortest possible distance") {
  CHECK(shortest_possible(fixture_scenario().env, fixtures::microwave_task()) == doctest::Approx(5.0));
  CHECK(shortest_possible(fixture_scenario().env, Task{"table", Cell{2, 2}}) == 0.0);
  CHECK_THROWS_AS(shortest_possible(fixture_scenario().env, Task{"piano", Cell{2, 2}}), Unreachable);
}

TEST_CASE("episode bookkeeping") {
  OraclePlanner oracle;
  GreedyPlanner greedy;
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    CAPTURE(seed);
    const Scenario sc = make_scenario(seed, seed);
    for (Planner* p : std::vector<Planner*>{&oracle, &greedy}) {
      EpisodeConfig cfg;
      cfg.max_steps = 12;
      const EpisodeRecord r = run_episode(*p, sc, cfg);
      double sum = 0.0;
      int retrials = 0;
      for (const StepRecord& st : r.steps) {
        sum += st.dist_delta;
        retrials += st.executable ? 0 : 1;
        if (!st.path.empty()) {
          double along = 0.0;
          for (std::size_t i = 1; i < st.path.size(); ++i)
            along += sc.env->path(st.path[i - 1], st.path[i]).length;
          CHECK(along == doctest::Approx(st.dist_delta));
        }
      }
      CHECK(r.dist_total == doctest::Approx(sum));
      CHECK(r.retrials == retrials);
      CHECK(static_cast<int>(r.steps.size()) <= cfg.max_steps);
      if (r.success) {
        CHECK(r.steps.back().done_called);
        CHECK(r.dist_total >= r.shortest_possible - 1e-9);
      }
    }
  }
}

TEST_CASE("episodes are deterministic and their logs byte-identical") {
  SuiteConfig cfg = small_suite();
  auto make = [](std::uint64_t scene, int run) -> std::unique_ptr<Planner> {
    return std::make_unique<RandomPlanner>(scene * 100 + static_cast<std::uint64_t>(run));
  };
  std::ostringstream a, b;
  const auto ra = eval_suite(make, cfg, &a);
  const auto rb = eval_suite(make, cfg, &b);
  CHECK(a.str() == b.str());
  CHECK(ra.first.sr == rb.first.sr);
  CHECK(ra.second.size() == 12);
}

TEST_CASE("episode records round trip through JSON") {
  OraclePlanner oracle;
  const EpisodeRecord r = run_episode(oracle, make_scenario(3, 3), EpisodeConfig{});
  const nlohmann::json j = episode_to_json(r);
  CHECK_FALSE(j.contains("wall_time"));
  const EpisodeRecord back = episode_from_json(j);
  CHECK(episode_to_json(back) == j);
  CHECK(back.steps.size() == r.steps.size());

  nlohmann::json wrong = j;
  wrong["schema"] = 99;
  CHECK_THROWS_AS(episode_from_json(wrong), SchemaMismatch);
  CHECK_THROWS_AS(episode_from_json(nlohmann::json{{"schema", 1}}), SchemaMismatch);
}

TEST_CASE("planner quality is ordered oracle, greedy, random") {
  const SuiteConfig cfg = small_suite();
  const auto oracle = eval_suite([](std::uint64_t, int) { return std::make_unique<OraclePlanner>(); }, cfg).first;
  const auto greedy = eval_suite([](std::uint64_t, int) { return std::make_unique<GreedyPlanner>(); }, cfg).first;
  const auto random = eval_suite(
      [](std::uint64_t s, int run) { return std::make_unique<RandomPlanner>(s + static_cast<std::uint64_t>(run)); }, cfg)
                          .first;
  CHECK(oracle.sr == 100.0);
  CHECK(oracle.retrials == 0.0);
  CHECK(oracle.spl >= greedy.spl);
  CHECK(greedy.spl >= random.spl);
  CHECK(oracle.sr >= greedy.sr);
  CHECK(greedy.sr >= random.sr);
}

TEST_CASE("summary table and plot data") {
  EvalSummary s;
  s.episodes = 175;
  s.sr = 100.0;
  s.spl = 80.5;
  s.dist = 9.25;
  const std::string table = format_summary_table({{"oracle", s}});
  CHECK(table.find("Planner") != std::string::npos);
  CHECK(table.find("oracle") != std::string::npos);
  CHECK(table.find("100.0") != std::string::npos);

  OraclePlanner oracle;
  const EpisodeRecord r = run_episode(oracle, fixture_scenario(), EpisodeConfig{});
  const std::string csv = plot_data_csv({r});
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
