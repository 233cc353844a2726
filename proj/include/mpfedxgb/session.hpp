#pragma once

#include <chrono>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

#include "mpfedxgb/party.hpp"
#include "mpfedxgb/tcp_transport.hpp"
#include "mpfedxgb/transport.hpp"

namespace mpfedxgb {

template <class R>
struct SessionResult {
  // outputs[m - 1] is party m's return value
  std::vector<R> outputs;
  // transcripts[0] is the coordinator's
  std::vector<Transcript> transcripts;
  std::vector<MulCounter> counters;
  std::uint64_t triples_used = 0;
  double seconds = 0.0;
};

namespace detail {

inline std::chrono::milliseconds timeout_of(const SessionConfig& cfg) {
  return std::chrono::milliseconds(static_cast<std::int64_t>(cfg.timeout_s * 1000.0));
}

// Runs `body(i)` for i in 0..n-1 on separate threads; on the first failure
// `on_error` is called so blocked peers wake up, and the first error is
// rethrown after all threads finish.
template <class Body, class OnError>
void run_threads(int n, Body body, OnError on_error) {
  std::mutex mu;
  std::exception_ptr first;
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (int i = 0; i < n; ++i) {
    threads.emplace_back([&, i] {
      try {
        body(i);
      } catch (...) {
        auto e = std::current_exception();
        {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = e;
        }
        on_error(e);
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace detail

// Runs fn(Party&) for every data holder plus the coordinator, each on its
// own thread, over the configured backend.
template <class Fn>
auto run_session(const SessionConfig& cfg, const SessionTopology& topo_in, Fn fn)
    -> SessionResult<std::invoke_result_t<Fn, Party&>> {
  using R = std::invoke_result_t<Fn, Party&>;
  static_assert(!std::is_void_v<R>, "session body must return a value");
  cfg.validate();
  SessionTopology topo = topo_in;
  if (topo.parties == 0) topo.parties = cfg.parties;
  if (topo.parties != cfg.parties) throw TopologyError("topology and config disagree on M");
  topo.validate();

  const int M = cfg.parties;
  const auto timeout = detail::timeout_of(cfg);
  std::vector<Endpoint*> eps(M + 1, nullptr);
  std::unique_ptr<InProcessHub> hub;
  std::vector<std::unique_ptr<TcpEndpoint>> tcp;

  if (cfg.backend == Backend::kInProcess) {
    hub = std::make_unique<InProcessHub>(M, cfg.session_id, timeout);
    for (int i = 0; i <= M; ++i) eps[i] = &hub->endpoint(static_cast<PartyId>(i));
  } else {
    std::vector<std::unique_ptr<TcpListener>> listeners;
    std::map<PartyId, PeerAddress> book;
    for (int i = 0; i <= M; ++i) {
      const std::uint16_t port =
          cfg.base_port == 0 ? 0 : static_cast<std::uint16_t>(cfg.base_port + i);
      listeners.push_back(std::make_unique<TcpListener>(cfg.host, port));
      book[static_cast<PartyId>(i)] = {cfg.host, listeners.back()->port()};
    }
    for (int i = 0; i <= M; ++i) {
      tcp.push_back(std::make_unique<TcpEndpoint>(static_cast<PartyId>(i), cfg.session_id, book,
                                                  std::move(listeners[i]), timeout));
      eps[i] = tcp.back().get();
    }
    detail::run_threads(
        M + 1, [&](int i) { tcp[i]->connect(); },
        [&](std::exception_ptr e) {
          for (auto& t : tcp) t->abort(e);
        });
  }
  for (auto* ep : eps) ep->set_recording(cfg.record_transcripts);

  std::vector<std::optional<R>> outputs(M);
  std::vector<MulCounter> counters(M);
  std::vector<std::uint64_t> used(M, 0);
  const auto start = std::chrono::steady_clock::now();

  detail::run_threads(
      M + 1,
      [&](int i) {
        if (i == 0) {
          run_coordinator(*eps[0], cfg, topo);
          return;
        }
        Party party(static_cast<PartyId>(i), cfg, *eps[i]);
        party.global_ids();
        outputs[i - 1].emplace(fn(party));
        party.finish();
        counters[i - 1] = party.counter();
        used[i - 1] = party.triples_used();
      },
      [&](std::exception_ptr e) {
        for (auto* ep : eps) ep->abort(e);
      });

  SessionResult<R> res;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (auto& o : outputs) res.outputs.push_back(std::move(*o));
  for (auto* ep : eps) res.transcripts.push_back(ep->transcript());
  res.counters = counters;
  res.triples_used = used.empty() ? 0 : used[0];
  for (auto& t : tcp) t->close();
  return res;
}

}  // namespace mpfedxgb
