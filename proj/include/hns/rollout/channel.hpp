#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace hns::rollout {

enum class MsgType : uint8_t {
  rollout_batch = 1,
  heartbeat = 2,
  param_broadcast = 3,
  stop = 4,
};

// Bidirectional message pipe, framed as u32 length + u8 type + payload on
// byte transports. send/recv return false once either side is closed.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual bool send(MsgType type, const std::vector<uint8_t>& payload) = 0;
  // Blocks up to timeout_ms; false on timeout or a closed peer.
  virtual bool recv(MsgType& type, std::vector<uint8_t>& payload,
                    int timeout_ms) = 0;
  virtual void close() = 0;
};

// In-process pair backed by two queues; both ends share lifetime.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>>
local_channel_pair();

// Loopback TCP. Port 0 binds an ephemeral port, readable via port().
class TcpListener {
 public:
  explicit TcpListener(uint16_t port);
  ~TcpListener();
  uint16_t port() const { return port_; }
  std::unique_ptr<Channel> accept(int timeout_ms);
  void close();

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

std::unique_ptr<Channel> tcp_connect(const std::string& host, uint16_t port,
                                     int timeout_ms);

}  // namespace hns::rollout
