#include <doctest.h>

#include <unistd.h>

#include <thread>

#include "fixtures.hpp"
#include "scenesearch/envserver.hpp"
#include "scenesearch/errors.hpp"
#include "scenesearch/net.hpp"

using namespace scenesearch;
using nlohmann::json;

namespace {

json request(EnvSession& server, const json& req) { return json::parse(server.handle_line(req.dump())); }

json reset_req(std::uint64_t seed) { return json{{"v", 1}, {"type", "reset"}, {"seed", seed}}; }

json step_req(const std::string& session, const std::string& text) {
  return json{{"v", 1}, {"type", "step"}, {"session", session}, {"response_text", text}};
}

class ScriptedPlanner final : public Planner {
 public:
  explicit ScriptedPlanner(std::vector<std::string> texts) : texts_(std::move(texts)) {}
  std::string name() const override { return "scripted"; }
  PlannerReply respond(const EnvSnapshot&, const Task&, const PromptText&) override {
    return PlannerReply{texts_.at(next_++), std::nullopt};
  }

 private:
  std::vector<std::string> texts_;
  std::size_t next_ = 0;
};

// Runs a session where every response comes from `pick`, recording the wire.
std::vector<std::string> scripted_session(EnvSession& server, std::uint64_t seed, int steps,
                                          const std::function<std::string(const SessionState&, int)>& pick,
                                          std::vector<std::string>* texts = nullptr) {
  std::vector<std::string> wire;
  const std::string reset = reset_req(seed).dump();
  wire.push_back("-> " + reset);
  const std::string reset_reply = server.handle_line(reset);
  wire.push_back("<- " + reset_reply);
  const std::string session = json::parse(reset_reply).at("session");
  for (int i = 0; i < steps; ++i) {
    const SessionState& st = server.sessions().at(session);
    if (st.finished) break;
    const std::string text = pick(st, i);
    if (texts) texts->push_back(text);
    const std::string line = step_req(session, text).dump();
    wire.push_back("-> " + line);
    wire.push_back("<- " + server.handle_line(line));
  }
  return wire;
}

std::string oracle_or_garbage(const SessionState& st, int i) {
  if (i == 1) return "I am not sure what to do.";
  if (i == 3) return "Command: navigate(attic, ladder)";
  return response_text(plan_oracle(st.snapshot, st.scenario.task));
}

}  // namespace

TEST_CASE("scripted session matches the recorded transcript") {
  EnvSession server(ServerConfig{});
  const auto wire = scripted_session(server, 7, 5, oracle_or_garbage);
  CHECK(wire.size() == 12);
  std::string text;
  for (const std::string& l : wire) text += l + "\n";
  CHECK(fixtures::matches_golden("envserver_transcript.txt", text));
}

TEST_CASE("wire rewards equal in-process rewards") {
  for (std::uint64_t seed : {3, 7, 12}) {
    CAPTURE(seed);
    EnvSession server(ServerConfig{});
    std::vector<std::string> texts;
    const auto wire = scripted_session(server, seed, 30, oracle_or_garbage, &texts);
    ScriptedPlanner scripted(texts);
    EpisodeConfig cfg;
    cfg.max_steps = static_cast<int>(texts.size());
    const EpisodeRecord r = run_episode(scripted, make_scenario(seed, seed), cfg);
    REQUIRE(r.steps.size() == texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const json reply = json::parse(wire[3 + 2 * i].substr(3));
      CHECK(reply.at("reward") == reward_to_json(r.steps[i].reward));
      CHECK(reply.at("success").get<bool>() == (r.success && i + 1 == texts.size()));
    }
  }
}

TEST_CASE("reset is deterministic across sessions") {
  EnvSession server(ServerConfig{});
  const json a = request(server, reset_req(7));
  const json b = request(server, reset_req(7));
  CHECK(a.at("type") == "reset_ok");
  CHECK(a.at("session") == "s1");
  CHECK(b.at("session") == "s2");
  CHECK(a.at("observation") == b.at("observation"));
  CHECK(a.at("task") == b.at("task"));
}

TEST_CASE("reset echoes reward parameters") {
  EnvSession server(ServerConfig{});
  json req = reset_req(7);
  req["reward_params"] = {{"lambda_efficiency", 0.6}};
  const json r = request(server, req);
  CHECK(r.at("params").at("lambda_efficiency") == 0.6);
  CHECK(r.at("params").at("lambda_executable") == 0.3);
}

TEST_CASE("errors come back as frames and the session survives") {
  EnvSession server(ServerConfig{});
  CHECK(json::parse(server.handle_line("{not json")).at("code") == "bad_request");
  CHECK(json::parse(server.handle_line(R"({"type":"reset","seed":1})")).at("code") == "bad_request");
  CHECK(json::parse(server.handle_line(R"({"v":2,"type":"reset","seed":1})")).at("code") == "unsupported_version");
  CHECK(json::parse(server.handle_line(R"({"v":1,"type":"jump"})")).at("code") == "bad_request");
  CHECK(request(server, step_req("s9", "Command: done()")).at("code") == "unknown_session");
  json bad_params = reset_req(1);
  bad_params["reward_params"] = {{"eta_dist", 0}};
  CHECK(request(server, bad_params).at("type") == "error");

  const json ok = request(server, reset_req(1));
  CHECK(ok.at("type") == "reset_ok");
  json unknown_field = reset_req(1);
  unknown_field["colour"] = "blue";
  CHECK(request(server, unknown_field).at("type") == "reset_ok");
}

TEST_CASE("done at the start fails and closes the session") {
  EnvSession server(ServerConfig{});
  const std::string session = request(server, reset_req(7)).at("session");
  const json r = request(server, step_req(session, "Command:\ndone()"));
  CHECK(r.at("done") == true);
  CHECK(r.at("success") == false);
  CHECK(r.at("reward").at("total").get<double>() == doctest::Approx(0.3));
  CHECK(r.at("reward").at("explore").get<double>() == 0.0);
  CHECK(r.at("reward").at("efficiency").get<double>() == 0.0);
  CHECK(r.at("reward").at("format").get<double>() == 0.0);
  CHECK(request(server, step_req(session, "Command:\ndone()")).at("code") == "session_finished");
}

TEST_CASE("garbage steps cost -0.4 and the budget ends the session") {
  EnvSession server(ServerConfig{});
  json req = reset_req(7);
  req["max_steps"] = 2;
  const std::string session = request(server, req).at("session");
  const json first = request(server, step_req(session, "no idea"));
  CHECK(first.at("reward").at("total").get<double>() == doctest::Approx(-0.4));
  CHECK(first.at("done") == false);
  CHECK(first.at("failure") == "bad-command");
  CHECK(first.at("action").is_null());
  const json second = request(server, step_req(session, "no idea"));
  CHECK(second.at("done") == true);
  CHECK(second.at("success") == false);
}

TEST_CASE("a successful session earns the success bonus") {
  EnvSession server(ServerConfig{});
  const auto wire = scripted_session(server, 5, 30, [](const SessionState& st, int) {
    return response_text(plan_oracle(st.snapshot, st.scenario.task));
  });
  const json last = json::parse(wire.back().substr(3));
  CHECK(last.at("success") == true);
  CHECK(last.at("reward").at("total") == 5.0);
}

TEST_CASE("serving over TCP") {
  TcpListener listener(0);
  std::thread server([&] { serve_tcp(listener, ServerConfig{}); });
  {
    auto a = connect_tcp("127.0.0.1:" + std::to_string(listener.port()));
    auto b = connect_tcp("127.0.0.1:" + std::to_string(listener.port()));
    a->send_line(reset_req(7).dump());
    b->send_line("garbage");
    const json ra = json::parse(*a->recv_line(std::chrono::seconds(10)));
    const json rb = json::parse(*b->recv_line(std::chrono::seconds(10)));
    CHECK(ra.at("session") == "s1");
    CHECK(rb.at("code") == "bad_request");
    b->send_line(reset_req(7).dump());
    CHECK(json::parse(*b->recv_line(std::chrono::seconds(10))).at("observation") == ra.at("observation"));
  }
  listener.close();
  server.join();
}

TEST_CASE("serving over a pipe pair") {
  int to_server[2], to_client[2];
  REQUIRE(pipe(to_server) == 0);
  REQUIRE(pipe(to_client) == 0);
  std::thread server([&] {
    FdLineChannel channel(to_server[0], to_client[1], true);
    serve_channel(channel, ServerConfig{});
  });
  {
    FdLineChannel client(to_client[0], to_server[1], true);
    client.send_line(reset_req(7).dump());
    const json r = json::parse(*client.recv_line(std::chrono::seconds(10)));
    CHECK(r.at("type") == "reset_ok");
    client.send_line(step_req(r.at("session"), "Command: done()").dump());
    CHECK(json::parse(*client.recv_line(std::chrono::seconds(10))).at("done") == true);
  }
  server.join();
}
