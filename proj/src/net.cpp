#include "scenesearch/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "scenesearch/errors.hpp"

namespace scenesearch {

namespace {

[[noreturn]] void transport_fail(const std::string& what) {
  throw PlannerTransportError(what + ": " + std::strerror(errno));
}

void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

class ProcessChannel final : public LineChannel {
 public:
  ProcessChannel(pid_t pid, int read_fd, int write_fd)
      : pid_(pid), inner_(std::make_unique<FdLineChannel>(read_fd, write_fd, true)) {}
  ~ProcessChannel() override {
    inner_.reset();  // closing the pipes lets the child see EOF
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
  void send_line(std::string_view line) override { inner_->send_line(line); }
  std::optional<std::string> recv_line(std::optional<std::chrono::milliseconds> timeout) override {
    return inner_->recv_line(timeout);
  }
  void drain() override { inner_->drain(); }

 private:
  pid_t pid_;
  std::unique_ptr<FdLineChannel> inner_;
};

}  // namespace

FdLineChannel::FdLineChannel(int read_fd, int write_fd, bool owns)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns) {
  ignore_sigpipe();
}

FdLineChannel::~FdLineChannel() {
  if (!owns_) return;
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
}

void FdLineChannel::send_line(std::string_view line) {
  std::string data(line);
  data += '\n';
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = ::write(write_fd_, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      transport_fail("write failed");
    }
    written += static_cast<std::size_t>(n);
  }
}

bool FdLineChannel::fill(std::optional<std::chrono::milliseconds> timeout) {
  pollfd pfd{read_fd_, POLLIN, 0};
  const int wait_ms = timeout ? static_cast<int>(timeout->count()) : -1;
  int ready = 0;
  do {
    ready = ::poll(&pfd, 1, wait_ms);
  } while (ready < 0 && errno == EINTR);
  if (ready < 0) transport_fail("poll failed");
  if (ready == 0) return false;
  char chunk[4096];
  ssize_t n = 0;
  do {
    n = ::read(read_fd_, chunk, sizeof chunk);
  } while (n < 0 && errno == EINTR);
  if (n < 0) transport_fail("read failed");
  if (n == 0) throw PlannerTransportError("peer closed the connection");
  buffer_.append(chunk, static_cast<std::size_t>(n));
  return true;
}

std::optional<std::string> FdLineChannel::recv_line(std::optional<std::chrono::milliseconds> timeout) {
  const auto deadline = timeout ? std::optional(std::chrono::steady_clock::now() + *timeout) : std::nullopt;
  while (true) {
    const auto pos = buffer_.find('\n');
    if (pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    std::optional<std::chrono::milliseconds> remaining;
    if (deadline) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      remaining = left;
    }
    if (!fill(remaining)) return std::nullopt;
  }
}

void FdLineChannel::drain() {
  try {
    while (fill(std::chrono::milliseconds(0))) {
    }
  } catch (const PlannerTransportError&) {
  }
  const auto pos = buffer_.rfind('\n');
  if (pos != std::string::npos) buffer_.erase(0, pos + 1);
}

std::unique_ptr<LineChannel> connect_tcp(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw PlannerTransportError("address must be host:port, got '" + address + "'");
  const std::string host = address.substr(0, colon);
  const std::string port = address.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &found) != 0 || !found)
    throw PlannerTransportError("cannot resolve " + address);
  int fd = -1;
  for (addrinfo* ai = found; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) transport_fail("cannot connect to " + address);
  return std::make_unique<FdLineChannel>(fd, fd, true);
}

std::unique_ptr<LineChannel> spawn_process(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) transport_fail("pipe failed");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    transport_fail("pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) transport_fail("fork failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<ProcessChannel>(pid, from_child[0], to_child[1]);
}

TcpListener::TcpListener(std::uint16_t port, const std::string& host) {
  ignore_sigpipe();
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) transport_fail("socket failed");
  fd_ = fd;
  int yes = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw PlannerTransportError("bad listen host " + host);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) transport_fail("bind failed");
  if (::listen(fd, 16) != 0) transport_fail("listen failed");
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
  const int fd = fd_.exchange(-1);
  if (fd < 0) return;
  ::shutdown(fd, SHUT_RDWR);
  ::close(fd);
}

std::unique_ptr<LineChannel> TcpListener::accept() {
  while (true) {
    const int fd = fd_.load();
    if (fd < 0) return nullptr;
    const int client = ::accept(fd, nullptr, nullptr);
    if (client >= 0) return std::make_unique<FdLineChannel>(client, client, true);
    if (errno == EINTR) continue;
    return nullptr;
  }
}

}  // namespace scenesearch
