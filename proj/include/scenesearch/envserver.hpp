#pragma once

// reset/step environment service speaking newline-delimited JSON.
//
//   -> {"v":1,"type":"reset","seed":7,"profile":{...}?,"reward_params":{...}?,"max_steps":30?}
//   <- {"v":1,"type":"reset_ok","session":"s1","observation":{"system":..,"user":..},"task":{..},"params":{..},"max_steps":30}
//   -> {"v":1,"type":"step","session":"s1","response_text":"..."}
//   <- {"v":1,"type":"step_ok","session":"s1","observation":{..},"reward":{..},"done":..,"success":..,...}
//   <- {"v":1,"type":"error","code":"...","message":"..."}

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "scenesearch/harness.hpp"
#include "scenesearch/net.hpp"

namespace scenesearch {

inline constexpr int kProtocolVersion = 1;

struct ServerConfig {
  GenProfile profile;
  RewardParams reward;
  int max_steps = 30;
};

struct SessionState {
  std::string id;
  Scenario scenario;
  EnvSnapshot snapshot;
  RewardParams reward;
  int max_steps = 30;
  int steps = 0;
  bool finished = false;
};

/// Sessions of one connection. Requests are handled one at a time.
class EnvSession {
 public:
  explicit EnvSession(ServerConfig cfg) : cfg_(std::move(cfg)) {}

  /// One request line in, one response line out (no trailing newline).
  /// Malformed requests produce error frames; nothing throws.
  std::string handle_line(const std::string& line);

  nlohmann::json handle_reset(const nlohmann::json& req);
  nlohmann::json handle_step(const nlohmann::json& req);

  const std::map<std::string, SessionState>& sessions() const { return sessions_; }

 private:
  ServerConfig cfg_;
  std::map<std::string, SessionState> sessions_;
  int next_id_ = 1;
};

nlohmann::json error_frame(const std::string& code, const std::string& message);

/// Serves one channel until the peer disconnects.
void serve_channel(LineChannel& channel, const ServerConfig& cfg);

/// Accepts clients on `listener`, one thread per connection, until the
/// listener is closed.
void serve_tcp(TcpListener& listener, const ServerConfig& cfg);

}  // namespace scenesearch
