#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcm/wire.hpp"

namespace pcm {

/// Blocking stream socket with framed message I/O. Plain TCP; transport
/// security is out of scope for this artifact.
class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(int fd) : fd_(fd) {}
  ~TcpStream();
  TcpStream(TcpStream&& o) noexcept;
  TcpStream& operator=(TcpStream&& o) noexcept;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  static TcpStream connect(const std::string& host, uint16_t port);

  void send_message(const wire::WireMessage& msg);
  wire::WireMessage recv_message();

  bool valid() const { return fd_ >= 0; }
  void close();

 private:
  void send_all(const uint8_t* data, size_t len);
  void recv_exact(uint8_t* data, size_t len);

  int fd_ = -1;
};

class TcpListener {
 public:
  /// Binds and listens; port 0 picks an ephemeral port.
  TcpListener(const std::string& host, uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  TcpStream accept();
  uint16_t port() const { return port_; }
  void close();

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

/// Splits "host:port".
std::pair<std::string, uint16_t> parse_endpoint(const std::string& endpoint);

}  // namespace pcm
