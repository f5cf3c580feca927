#pragma once

// Newline-delimited text channels over file descriptors: TCP sockets, pipes
// to a child process, or the process's own stdin/stdout.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace scenesearch {

class LineChannel {
 public:
  virtual ~LineChannel() = default;
  /// Writes `line` plus '\n'. Throws PlannerTransportError on failure.
  virtual void send_line(std::string_view line) = 0;
  /// Next line without its terminator; nullopt on timeout. Throws
  /// PlannerTransportError when the peer closed the stream.
  virtual std::optional<std::string> recv_line(std::optional<std::chrono::milliseconds> timeout) = 0;
  /// Discards lines that are already buffered or readable without blocking.
  virtual void drain() = 0;
};

/// Channel over a pair of descriptors; closes them on destruction when owned.
class FdLineChannel final : public LineChannel {
 public:
  FdLineChannel(int read_fd, int write_fd, bool owns);
  ~FdLineChannel() override;
  FdLineChannel(const FdLineChannel&) = delete;
  FdLineChannel& operator=(const FdLineChannel&) = delete;

  void send_line(std::string_view line) override;
  std::optional<std::string> recv_line(std::optional<std::chrono::milliseconds> timeout) override;
  void drain() override;

 private:
  bool fill(std::optional<std::chrono::milliseconds> timeout);

  int read_fd_;
  int write_fd_;
  bool owns_;
  std::string buffer_;
};

/// "host:port" client connection. Throws PlannerTransportError.
std::unique_ptr<LineChannel> connect_tcp(const std::string& address);

/// Runs `command` through /bin/sh and talks to its stdin/stdout. The child is
/// reaped when the channel is destroyed.
std::unique_ptr<LineChannel> spawn_process(const std::string& command);

class TcpListener {
 public:
  /// Binds 127.0.0.1 (or `host`) on `port`; port 0 picks a free port.
  explicit TcpListener(std::uint16_t port, const std::string& host = "127.0.0.1");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  /// Blocks for the next client; nullptr once close() was called.
  std::unique_ptr<LineChannel> accept();
  void close();

 private:
  std::atomic<int> fd_{-1};
  std::uint16_t port_ = 0;
};

}  // namespace scenesearch
