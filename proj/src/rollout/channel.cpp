#include "hns/rollout/channel.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <stdexcept>
#include <string>

namespace hns::rollout {

namespace {

struct LocalMsg {
  MsgType type;
  std::vector<uint8_t> payload;
};

// Shared core for one in-process pair: queue 0 flows a->b, queue 1 b->a.
struct LocalCore {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<LocalMsg> queue[2];
  bool closed = false;
};

class LocalChannel : public Channel {
 public:
  LocalChannel(std::shared_ptr<LocalCore> core, int side)
      : core_(std::move(core)), side_(side) {}

  bool send(MsgType type, const std::vector<uint8_t>& payload) override {
    std::lock_guard<std::mutex> lk(core_->mu);
    if (core_->closed) return false;
    core_->queue[side_].push_back({type, payload});
    core_->cv.notify_all();
    return true;
  }

  bool recv(MsgType& type, std::vector<uint8_t>& payload,
            int timeout_ms) override {
    std::unique_lock<std::mutex> lk(core_->mu);
    auto& q = core_->queue[1 - side_];
    core_->cv.wait_for(lk, std::chrono::milliseconds(timeout_ms),
                       [&] { return !q.empty() || core_->closed; });
    if (q.empty()) return false;
    type = q.front().type;
    payload = std::move(q.front().payload);
    q.pop_front();
    return true;
  }

  void close() override {
    std::lock_guard<std::mutex> lk(core_->mu);
    core_->closed = true;
    core_->cv.notify_all();
  }

 private:
  std::shared_ptr<LocalCore> core_;
  int side_;
};

// One frame: u32 payload length (LE), u8 type, payload bytes.
class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpChannel() override { close(); }

  bool send(MsgType type, const std::vector<uint8_t>& payload) override {
    if (fd_ < 0) return false;
    uint8_t header[5];
    uint32_t n = (uint32_t)payload.size();
    std::memcpy(header, &n, 4);
    header[4] = (uint8_t)type;
    if (!write_all(header, 5)) return false;
    return write_all(payload.data(), payload.size());
  }

  bool recv(MsgType& type, std::vector<uint8_t>& payload,
            int timeout_ms) override {
    uint8_t header[5];
    if (!read_all(header, 5, timeout_ms)) return false;
    uint32_t n;
    std::memcpy(&n, header, 4);
    type = (MsgType)header[4];
    payload.resize(n);
    return n == 0 || read_all(payload.data(), n, timeout_ms);
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  bool write_all(const uint8_t* p, size_t n) {
    while (n > 0) {
      ssize_t k = ::send(fd_, p, n, MSG_NOSIGNAL);
      if (k <= 0) return false;
      p += k;
      n -= (size_t)k;
    }
    return true;
  }

  // timeout applies per poll wait, so a stalled peer cannot hang us forever
  bool read_all(uint8_t* p, size_t n, int timeout_ms) {
    while (n > 0) {
      if (fd_ < 0) return false;
      pollfd pfd{fd_, POLLIN, 0};
      int pr = ::poll(&pfd, 1, timeout_ms);
      if (pr <= 0) return false;
      ssize_t k = ::recv(fd_, p, n, 0);
      if (k <= 0) return false;
      p += k;
      n -= (size_t)k;
    }
    return true;
  }

  int fd_;
};

}  // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>>
local_channel_pair() {
  auto core = std::make_shared<LocalCore>();
  return {std::make_unique<LocalChannel>(core, 0),
          std::make_unique<LocalChannel>(core, 1)};
}

TcpListener::TcpListener(uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error("tcp: socket failed");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd_, (sockaddr*)&addr, sizeof(addr)) != 0 ||
      ::listen(fd_, 16) != 0) {
    ::close(fd_);
    throw std::runtime_error("tcp: bind/listen failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, (sockaddr*)&addr, &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

std::unique_ptr<Channel> TcpListener::accept(int timeout_ms) {
  if (fd_ < 0) return nullptr;
  pollfd pfd{fd_, POLLIN, 0};
  if (::poll(&pfd, 1, timeout_ms) <= 0) return nullptr;
  int cfd = ::accept(fd_, nullptr, nullptr);
  if (cfd < 0) return nullptr;
  return std::make_unique<TcpChannel>(cfd);
}

void TcpListener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<Channel> tcp_connect(const std::string& host, uint16_t port,
                                     int timeout_ms) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return nullptr;
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    return nullptr;
  }
  // bounded connect via poll on a nonblocking socket would be more precise;
  // loopback connects either succeed or fail fast, so block with a deadline
  timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
  if (::connect(fd, (sockaddr*)&addr, sizeof(addr)) != 0) {
    ::close(fd);
    return nullptr;
  }
  return std::make_unique<TcpChannel>(fd);
}

}  // namespace hns::rollout
