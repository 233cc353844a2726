#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "mpfedxgb/common.hpp"
#include "mpfedxgb/wire.hpp"

namespace mpfedxgb {

// Per-sender FIFO queues for one receiving party. recv takes the first queued
// message from that sender that matches (tag, round, slot).
class Mailbox {
 public:
  void deliver(Message m) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      queues_[m.header.from].push_back(std::move(m));
    }
    cv_.notify_all();
  }

  Message take(PartyId from, Tag tag, std::uint64_t round, std::uint8_t slot,
               std::chrono::milliseconds timeout) {
    std::unique_lock<std::mutex> lock(mu_);
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (failure_) std::rethrow_exception(failure_);
      auto& q = queues_[from];
      for (auto it = q.begin(); it != q.end(); ++it) {
        const Header& h = it->header;
        if (h.tag == tag && h.round == round && h.slot == slot) {
          Message m = std::move(*it);
          q.erase(it);
          return m;
        }
      }
      if (closed_.count(from)) {
        throw SessionAbort("peer " + party_name(from) + " closed the connection while " +
                           tag_name(tag) + " round " + std::to_string(round) + " was pending");
      }
      if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
        throw SessionAbort("timed out waiting for " + std::string(tag_name(tag)) + " round " +
                           std::to_string(round) + " from " + party_name(from));
      }
    }
  }

  void fail(std::exception_ptr e) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (!failure_) failure_ = e;
    }
    cv_.notify_all();
  }

  void mark_closed(PartyId peer) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      closed_[peer] = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<PartyId, std::deque<Message>> queues_;
  std::map<PartyId, bool> closed_;
  std::exception_ptr failure_;
};

// One party's view of the network.
class Endpoint {
 public:
  Endpoint(PartyId self, std::uint64_t session, std::chrono::milliseconds timeout)
      : self_(self), session_(session), timeout_(timeout) {}
  virtual ~Endpoint() = default;
  Endpoint(const Endpoint&) = delete;
  Endpoint& operator=(const Endpoint&) = delete;

  PartyId self() const { return self_; }
  std::uint64_t session() const { return session_; }

  void send(PartyId to, Tag tag, std::uint64_t round, std::vector<double> payload,
            std::uint8_t slot = 0) {
    if (to == self_) throw ProtocolError("party " + party_name(self_) + " sent to itself");
    Message m;
    m.header.session = session_;
    m.header.round = round;
    m.header.from = self_;
    m.header.to = to;
    m.header.tag = tag;
    m.header.slot = slot;
    m.header.payload_bytes = static_cast<std::uint32_t>(payload.size() * sizeof(double));
    m.payload = std::move(payload);
    if (recording_) transcript_.append(Direction::kSent, m);
    ++sent_;
    transmit(std::move(m));
  }

  Message recv(PartyId from, Tag tag, std::uint64_t round, std::uint8_t slot = 0) {
    Message m = inbox_.take(from, tag, round, slot, timeout_);
    if (recording_) transcript_.append(Direction::kReceived, m);
    return m;
  }

  // Sends the same payload to every listed party except self.
  void broadcast(const std::vector<PartyId>& to, Tag tag, std::uint64_t round,
                 const std::vector<double>& payload, std::uint8_t slot = 0) {
    for (PartyId p : to) {
      if (p != self_) send(p, tag, round, payload, slot);
    }
  }

  // Wakes any pending recv with the given error.
  void abort(std::exception_ptr e) { inbox_.fail(e); }

  const Transcript& transcript() const { return transcript_; }
  void set_recording(bool on) { recording_ = on; }
  std::uint64_t messages_sent() const { return sent_; }

  Mailbox& inbox() { return inbox_; }

 protected:
  virtual void transmit(Message m) = 0;

 private:
  PartyId self_;
  std::uint64_t session_;
  std::chrono::milliseconds timeout_;
  Mailbox inbox_;
  Transcript transcript_;
  bool recording_ = true;
  std::uint64_t sent_ = 0;
};

class InProcessHub;

class InProcessEndpoint final : public Endpoint {
 public:
  InProcessEndpoint(InProcessHub& hub, PartyId self, std::uint64_t session,
                    std::chrono::milliseconds timeout)
      : Endpoint(self, session, timeout), hub_(hub) {}

 protected:
  void transmit(Message m) override;

 private:
  InProcessHub& hub_;
};

// Routes messages between endpoints living in one process. Ids 0..parties.
class InProcessHub {
 public:
  InProcessHub(int parties, std::uint64_t session,
               std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    if (parties < 2) throw TopologyError("a session needs at least 2 parties");
    for (int id = 0; id <= parties; ++id) {
      endpoints_.push_back(std::make_unique<InProcessEndpoint>(
          *this, static_cast<PartyId>(id), session, timeout));
    }
  }

  InProcessEndpoint& endpoint(PartyId id) {
    if (id >= endpoints_.size()) throw TopologyError("no endpoint for " + party_name(id));
    return *endpoints_[id];
  }

  int parties() const { return static_cast<int>(endpoints_.size()) - 1; }

  void route(Message m) {
    const PartyId to = m.header.to;
    if (to >= endpoints_.size()) throw TopologyError("message addressed to unknown party");
    endpoints_[to]->inbox().deliver(std::move(m));
  }

  void abort_all(std::exception_ptr e) {
    for (auto& ep : endpoints_) ep->abort(e);
  }

 private:
  std::vector<std::unique_ptr<InProcessEndpoint>> endpoints_;
};

inline void InProcessEndpoint::transmit(Message m) { hub_.route(std::move(m)); }

}  // namespace mpfedxgb
