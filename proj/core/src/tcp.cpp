#include "pcm/tcp.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace pcm {

namespace {

sockaddr_in make_addr(const std::string& host, uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "0.0.0.0") {
    addr.sin_addr.s_addr = INADDR_ANY;
  } else if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    raise(ErrorCode::IoError, "bad IPv4 address: " + host);
  }
  return addr;
}

}  // namespace

TcpStream::~TcpStream() { close(); }

TcpStream::TcpStream(TcpStream&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }

TcpStream& TcpStream::operator=(TcpStream&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void TcpStream::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

TcpStream TcpStream::connect(const std::string& host, uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) raise(ErrorCode::IoError, "socket: " + std::string(strerror(errno)));
  sockaddr_in addr = make_addr(host.empty() ? "127.0.0.1" : host, port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    int err = errno;
    ::close(fd);
    raise(ErrorCode::IoError, "connect: " + std::string(strerror(err)));
  }
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return TcpStream(fd);
}

void TcpStream::send_all(const uint8_t* data, size_t len) {
  while (len > 0) {
    ssize_t n = ::send(fd_, data, len, MSG_NOSIGNAL);
    if (n <= 0) raise(ErrorCode::IoError, "send: " + std::string(strerror(errno)));
    data += n;
    len -= static_cast<size_t>(n);
  }
}

void TcpStream::recv_exact(uint8_t* data, size_t len) {
  while (len > 0) {
    ssize_t n = ::recv(fd_, data, len, 0);
    if (n == 0) raise(ErrorCode::IoError, "connection closed");
    if (n < 0) raise(ErrorCode::IoError, "recv: " + std::string(strerror(errno)));
    data += n;
    len -= static_cast<size_t>(n);
  }
}

void TcpStream::send_message(const wire::WireMessage& msg) {
  std::vector<uint8_t> frame = wire::encode_frame(msg);
  send_all(frame.data(), frame.size());
}

wire::WireMessage TcpStream::recv_message() {
  constexpr size_t kMaxBody = 1u << 30;
  std::vector<uint8_t> frame(9);
  recv_exact(frame.data(), frame.size());
  uint32_t len = static_cast<uint32_t>(frame[5]) << 24 | static_cast<uint32_t>(frame[6]) << 16 |
                 static_cast<uint32_t>(frame[7]) << 8 | static_cast<uint32_t>(frame[8]);
  if (len > kMaxBody) raise(ErrorCode::MalformedFrame, "frame too large");
  frame.resize(9 + len);
  recv_exact(frame.data() + 9, len);
  return wire::decode_frame(frame);
}

TcpListener::TcpListener(const std::string& host, uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) raise(ErrorCode::IoError, "socket: " + std::string(strerror(errno)));
  int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(host, port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    int err = errno;
    ::close(fd_);
    fd_ = -1;
    raise(ErrorCode::IoError, "bind: " + std::string(strerror(err)));
  }
  if (::listen(fd_, 16) != 0) {
    int err = errno;
    ::close(fd_);
    fd_ = -1;
    raise(ErrorCode::IoError, "listen: " + std::string(strerror(err)));
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  if (getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len) == 0) {
    port_ = ntohs(bound.sin_port);
  }
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

TcpStream TcpListener::accept() {
  int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) raise(ErrorCode::IoError, "accept: " + std::string(strerror(errno)));
  return TcpStream(fd);
}

std::pair<std::string, uint16_t> parse_endpoint(const std::string& endpoint) {
  size_t colon = endpoint.rfind(':');
  if (colon == std::string::npos) raise(ErrorCode::ConfigError, "endpoint needs host:port");
  std::string host = endpoint.substr(0, colon);
  unsigned long port = 0;
  try {
    port = std::stoul(endpoint.substr(colon + 1));
  } catch (const std::exception&) {
    raise(ErrorCode::ConfigError, "bad port in endpoint: " + endpoint);
  }
  if (port > 65535) raise(ErrorCode::ConfigError, "port out of range");
  return {host, static_cast<uint16_t>(port)};
}

}  // namespace pcm
