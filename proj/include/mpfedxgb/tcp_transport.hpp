#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mpfedxgb/transport.hpp"

namespace mpfedxgb {

struct PeerAddress {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

namespace detail {

inline void write_all(int fd, const std::uint8_t* p, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::send(fd, p, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw SessionAbort(std::string("socket write failed: ") + std::strerror(errno));
    }
    p += k;
    n -= static_cast<std::size_t>(k);
  }
}

// false on clean EOF before any byte
inline bool read_all(int fd, std::uint8_t* p, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t k = ::recv(fd, p + got, n - got, 0);
    if (k == 0) {
      if (got == 0) return false;
      throw ProtocolError("connection closed mid-frame");
    }
    if (k < 0) {
      if (errno == EINTR) continue;
      if (got == 0) return false;
      throw ProtocolError(std::string("socket read failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(k);
  }
  return true;
}

inline sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw ConfigError("not an IPv4 address: " + host);
  }
  return addr;
}

// Upper bound on a single frame body.
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 30;

}  // namespace detail

// Listening socket; binding port 0 picks a free port.
class TcpListener {
 public:
  TcpListener(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw SessionAbort("socket() failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = detail::make_addr(host, port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      const std::string err = std::strerror(errno);
      ::close(fd_);
      throw SessionAbort("bind " + host + ":" + std::to_string(port) + " failed: " + err);
    }
    if (::listen(fd_, 64) != 0) {
      ::close(fd_);
      throw SessionAbort("listen failed");
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }
  ~TcpListener() { close(); }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int fd() const { return fd_; }
  std::uint16_t port() const { return port_; }
  void close() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// One outgoing connection per peer for sending and one reader thread per
// incoming connection. Frames carrying a foreign session id are dropped.
class TcpEndpoint final : public Endpoint {
 public:
  TcpEndpoint(PartyId self, std::uint64_t session, std::map<PartyId, PeerAddress> book,
              std::unique_ptr<TcpListener> listener, std::chrono::milliseconds timeout)
      : Endpoint(self, session, timeout),
        book_(std::move(book)),
        listener_(std::move(listener)),
        timeout_(timeout) {}

  ~TcpEndpoint() override { close(); }

  // Connects to every peer and waits until every peer has connected back.
  void connect() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    std::size_t expected = 0;
    for (const auto& [id, addr] : book_) {
      if (id != self()) ++expected;
    }
    acceptor_ = std::thread([this] { accept_loop(); });
    for (const auto& [id, addr] : book_) {
      if (id == self()) continue;
      int fd = -1;
      for (;;) {
        fd = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in sa = detail::make_addr(addr.host, addr.port);
        if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) == 0) break;
        ::close(fd);
        if (std::chrono::steady_clock::now() > deadline) {
          throw SessionAbort("could not reach " + party_name(id) + " at " + addr.host + ":" +
                             std::to_string(addr.port));
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      // hello frame: identifies the sender on this connection
      Message hello;
      hello.header.session = session();
      hello.header.from = self();
      hello.header.to = id;
      hello.header.tag = Tag::kControl;
      hello.header.round = ~std::uint64_t{0};
      auto frame = encode_frame(hello);
      detail::write_all(fd, frame.data(), frame.size());
      auto conn = std::make_unique<Outgoing>();
      conn->fd = fd;
      out_[id] = std::move(conn);
    }
    std::unique_lock<std::mutex> lock(accept_mu_);
    if (!accept_cv_.wait_until(lock, deadline, [&] { return accepted_ >= expected || accept_error_; })) {
      throw SessionAbort("peers did not connect before the deadline");
    }
    if (accept_error_) std::rethrow_exception(accept_error_);
  }

  // Frames dropped because they belonged to another session.
  std::uint64_t foreign_frames() const { return foreign_.load(); }

  void close() {
    for (auto& [id, conn] : out_) {
      if (conn->fd >= 0) {
        ::shutdown(conn->fd, SHUT_RDWR);
        ::close(conn->fd);
        conn->fd = -1;
      }
    }
    if (listener_) listener_->close();
    if (acceptor_.joinable()) acceptor_.join();
    {
      std::lock_guard<std::mutex> lock(readers_mu_);
      for (int fd : reader_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : readers_) {
      if (t.joinable()) t.join();
    }
    for (int fd : reader_fds_) ::close(fd);
    reader_fds_.clear();
    readers_.clear();
  }

 protected:
  void transmit(Message m) override {
    auto it = out_.find(m.header.to);
    if (it == out_.end()) throw TopologyError("no connection to " + party_name(m.header.to));
    auto frame = encode_frame(m);
    std::lock_guard<std::mutex> lock(it->second->mu);
    detail::write_all(it->second->fd, frame.data(), frame.size());
  }

 private:
  struct Outgoing {
    int fd = -1;
    std::mutex mu;
  };

  // Runs until the listener closes; connections that never identify for this
  // session are ignored.
  void accept_loop() {
    for (;;) {
      const int fd = ::accept(listener_->fd(), nullptr, nullptr);
      if (fd < 0) return;
      {
        std::lock_guard<std::mutex> lock(readers_mu_);
        reader_fds_.push_back(fd);
      }
      readers_.emplace_back([this, fd] { read_loop(fd); });
    }
  }

  std::unique_ptr<std::uint8_t[]> read_frame(int fd, std::uint32_t& len, bool& eof) {
    std::uint8_t pre[4];
    eof = !detail::read_all(fd, pre, 4);
    if (eof) return nullptr;
    len = detail::get_le<std::uint32_t>(pre);
    if (len < Header::kBytes || len > detail::kMaxFrameBytes) {
      throw ProtocolError("malformed frame length " + std::to_string(len));
    }
    auto body = std::make_unique<std::uint8_t[]>(len);
    if (!detail::read_all(fd, body.get(), len)) throw ProtocolError("truncated frame");
    return body;
  }

  void read_loop(int fd) {
    PartyId peer = 0;
    bool identified = false;
    try {
      for (;;) {
        std::uint32_t len = 0;
        bool eof = false;
        auto body = read_frame(fd, len, eof);
        if (eof) break;
        Message m = decode_body(body.get(), len);
        if (m.header.session != session()) {
          ++foreign_;
          continue;
        }
        if (!identified) {
          peer = m.header.from;
          identified = true;
          {
            std::lock_guard<std::mutex> lock(accept_mu_);
            ++accepted_;
          }
          accept_cv_.notify_all();
          continue;
        }
        if (m.header.from != peer || m.header.to != self()) {
          throw ProtocolError("frame routing mismatch on connection from " + party_name(peer));
        }
        inbox().deliver(std::move(m));
      }
      if (identified) inbox().mark_closed(peer);
    } catch (...) {
      inbox().fail(std::current_exception());
      std::lock_guard<std::mutex> lock(accept_mu_);
      if (!accept_error_) accept_error_ = std::current_exception();
      accept_cv_.notify_all();
    }
  }

  std::map<PartyId, PeerAddress> book_;
  std::unique_ptr<TcpListener> listener_;
  std::chrono::milliseconds timeout_;
  std::map<PartyId, std::unique_ptr<Outgoing>> out_;
  std::thread acceptor_;
  std::mutex readers_mu_;
  std::vector<std::thread> readers_;
  std::vector<int> reader_fds_;
  std::mutex accept_mu_;
  std::condition_variable accept_cv_;
  std::size_t accepted_ = 0;
  std::exception_ptr accept_error_;
  std::atomic<std::uint64_t> foreign_{0};
};

}  // namespace mpfedxgb
