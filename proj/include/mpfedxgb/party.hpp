#pragma once

#include <algorithm>
#include <chrono>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mpfedxgb/common.hpp"
#include "mpfedxgb/params.hpp"
#include "mpfedxgb/shares.hpp"
#include "mpfedxgb/transport.hpp"

namespace mpfedxgb {

// Triple traffic uses slot 1 and the batch index as its round.
inline constexpr std::uint8_t kTripleSlot = 1;

// Per-party protocol context. Every collective operation takes exactly one
// round number, and all parties issue the same sequence of operations.
class Party {
 public:
  Party(PartyId id, const SessionConfig& cfg, Endpoint& ep)
      : id_(id),
        cfg_(cfg),
        ep_(ep),
        rng_(derive_seed(cfg.seed, kSeedMasks, id)),
        sigma_rng_(derive_seed(cfg.seed, kSeedPerturbation, id)) {
    if (id < 1 || id > cfg.parties) throw TopologyError("party id out of range");
  }

  PartyId id() const { return id_; }
  int parties() const { return cfg_.parties; }
  bool active() const { return id_ == kActiveParty; }
  const SessionConfig& config() const { return cfg_; }
  Endpoint& endpoint() { return ep_; }
  MulCounter& counter() { return counter_; }
  const MulCounter& counter() const { return counter_; }
  Rng& rng() { return rng_; }
  Rng& sigma_rng() { return sigma_rng_; }
  std::uint64_t round() const { return round_; }
  std::uint64_t next_round() { return ++round_; }

  std::vector<PartyId> holders() const {
    std::vector<PartyId> out(cfg_.parties);
    std::iota(out.begin(), out.end(), PartyId{1});
    return out;
  }

  // Global feature ids issued by the coordinator, in local column order.
  const std::vector<int>& global_ids() {
    if (!have_gids_) {
      Message m = ep_.recv(kCoordinator, Tag::kControl, 0, 0);
      gids_.assign(m.payload.begin(), m.payload.end());
      have_gids_ = true;
    }
    return gids_;
  }

  // SHR: the dealer splits its plaintext and sends one share to each other
  // party; everyone returns its own share.
  ShareVector share(PartyId dealer, std::span<const double> plain, std::size_t n) {
    const auto r = next_round();
    if (dealer == id_) {
      if (plain.size() != n) throw ShapeError("share: plaintext length mismatch");
      ShareSet set = shr_split(plain, dealer, cfg_.parties, rng_, cfg_.mask_range);
      for (PartyId m = 1; m <= cfg_.parties; ++m) {
        if (m != id_) ep_.send(m, Tag::kShareDist, r, std::move(set[m - 1].values()));
      }
      return std::move(set[id_ - 1]);
    }
    Message msg = ep_.recv(dealer, Tag::kShareDist, r);
    if (msg.payload.size() != n) throw ProtocolError("share: unexpected length");
    return ShareVector(id_, std::move(msg.payload));
  }

  ShareVector share(PartyId dealer, const std::vector<double>& plain, std::size_t n) {
    return share(dealer, std::span<const double>(plain), n);
  }

  // A public constant split equally: each party holds c / M.
  ShareVector constant(double c, std::size_t n = 1) const {
    return ShareVector(id_, n, c / cfg_.parties);
  }

  // A public vector held entirely by P1.
  ShareVector public_value(const std::vector<double>& v) const {
    return active() ? ShareVector(id_, v) : ShareVector(id_, v.size(), 0.0);
  }

  ShareVector zeros(std::size_t n) const { return ShareVector(id_, n, 0.0); }

  BeaverTriple take_triple(std::size_t n) {
    while (pool_a_.size() - pool_pos_ < n) request_batch(n - (pool_a_.size() - pool_pos_));
    auto slice = [&](const std::vector<double>& v) {
      return ShareVector(id_, std::vector<double>(v.begin() + pool_pos_, v.begin() + pool_pos_ + n));
    };
    BeaverTriple t(slice(pool_a_), slice(pool_b_), slice(pool_c_));
    pool_pos_ += n;
    return t;
  }

  ShareVector mul(const ShareVector& x, const ShareVector& y, MulPhase phase = MulPhase::kGeneral) {
    BeaverTriple t = take_triple(x.size());
    return mul(x, y, t, phase);
  }

  // Parties send e, f shares to P1; P1 opens and broadcasts them.
  ShareVector mul(const ShareVector& x, const ShareVector& y, BeaverTriple& t, MulPhase phase) {
    if (x.owner() != id_) throw ShapeError("mul: operand held by another party");
    auto [em, fm] = beaver_masked(x, y, t);
    t.consume();
    const std::size_t n = x.size();
    const auto r = next_round();
    std::vector<double> e, f;
    if (active()) {
      std::vector<CompensatedSum> se(n), sf(n);
      for (std::size_t i = 0; i < n; ++i) {
        se[i].add(em[i]);
        sf[i].add(fm[i]);
      }
      for (PartyId m = 2; m <= cfg_.parties; ++m) {
        Message msg = ep_.recv(m, Tag::kMulEF, r);
        if (msg.payload.size() != 2 * n) throw ProtocolError("MulEF payload length");
        for (std::size_t i = 0; i < n; ++i) {
          se[i].add(msg.payload[i]);
          sf[i].add(msg.payload[n + i]);
        }
      }
      std::vector<double> ef(2 * n);
      for (std::size_t i = 0; i < n; ++i) {
        ef[i] = se[i].value();
        ef[n + i] = sf[i].value();
      }
      ep_.broadcast(holders(), Tag::kMulEFBroadcast, r, ef);
      e.assign(ef.begin(), ef.begin() + n);
      f.assign(ef.begin() + n, ef.end());
    } else {
      std::vector<double> ef(em.values());
      ef.insert(ef.end(), fm.values().begin(), fm.values().end());
      ep_.send(kActiveParty, Tag::kMulEF, r, std::move(ef));
      Message msg = ep_.recv(kActiveParty, Tag::kMulEFBroadcast, r);
      if (msg.payload.size() != 2 * n) throw ProtocolError("MulEFBroadcast payload length");
      e.assign(msg.payload.begin(), msg.payload.begin() + n);
      f.assign(msg.payload.begin() + n, msg.payload.end());
    }
    counter_.record(phase);
    return beaver_finish(e, f, t);
  }

  // Every other party sends its share to target, which reconstructs in
  // ascending party order. Returns the plaintext at target, empty elsewhere.
  std::vector<double> open_to(PartyId target, const ShareVector& x, Tag tag, std::uint8_t slot,
                              std::uint64_t r) {
    const std::size_t n = x.size();
    if (id_ != target) {
      ep_.send(target, tag, r, x.values(), slot);
      return {};
    }
    std::vector<CompensatedSum> acc(n);
    for (PartyId m = 1; m <= cfg_.parties; ++m) {
      const std::vector<double>* src = &x.values();
      Message msg;
      if (m != id_) {
        msg = ep_.recv(m, tag, r, slot);
        if (msg.payload.size() != n) throw ProtocolError(std::string(tag_name(tag)) + " length");
        src = &msg.payload;
      }
      for (std::size_t i = 0; i < n; ++i) acc[i].add((*src)[i]);
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = acc[i].value();
    return out;
  }

  std::vector<double> open_to(PartyId target, const ShareVector& x, Tag tag,
                              std::uint8_t slot = 0) {
    return open_to(target, x, tag, slot, next_round());
  }

  // sender's payload reaches every party
  std::vector<double> broadcast(PartyId sender, std::vector<double> payload, Tag tag,
                                std::uint8_t slot = 0) {
    const auto r = next_round();
    return broadcast(sender, std::move(payload), tag, slot, r);
  }

  std::vector<double> broadcast(PartyId sender, std::vector<double> payload, Tag tag,
                                std::uint8_t slot, std::uint64_t r) {
    if (id_ == sender) {
      ep_.broadcast(holders(), tag, r, payload, slot);
      return payload;
    }
    return ep_.recv(sender, tag, r, slot).payload;
  }

  // Tells the coordinator this party needs no more triples.
  void finish() {
    if (finished_) return;
    finished_ = true;
    ep_.send(kCoordinator, Tag::kControl, batch_, {0.0}, kTripleSlot);
  }

  std::uint64_t triples_used() const { return triples_used_ + pool_pos_; }

 private:
  void request_batch(std::size_t need) {
    const std::size_t count = std::max(cfg_.triple_batch, need);
    ep_.send(kCoordinator, Tag::kControl, batch_, {static_cast<double>(count)}, kTripleSlot);
    Message msg = ep_.recv(kCoordinator, Tag::kShareDist, batch_, kTripleSlot);
    ++batch_;
    if (msg.payload.size() != 3 * count) throw ProtocolError("triple batch length");
    // drop the consumed prefix, append the new batch
    auto keep = [&](std::vector<double>& pool, std::size_t part) {
      std::vector<double> next(pool.begin() + pool_pos_, pool.end());
      next.insert(next.end(), msg.payload.begin() + part * count,
                  msg.payload.begin() + (part + 1) * count);
      pool.swap(next);
    };
    keep(pool_a_, 0);
    keep(pool_b_, 1);
    keep(pool_c_, 2);
    triples_used_ += pool_pos_;
    pool_pos_ = 0;
  }

  PartyId id_;
  SessionConfig cfg_;
  Endpoint& ep_;
  Rng rng_;
  Rng sigma_rng_;
  MulCounter counter_;
  std::uint64_t round_ = 0;
  std::vector<int> gids_;
  bool have_gids_ = false;
  std::vector<double> pool_a_, pool_b_, pool_c_;
  std::size_t pool_pos_ = 0;
  std::uint64_t triples_used_ = 0;
  std::uint64_t batch_ = 0;
  bool finished_ = false;
};

// Random permutation of global feature ids; party m gets a contiguous slice
// in local column order.
inline std::vector<std::vector<int>> permuted_feature_ids(const SessionTopology& topo,
                                                          std::uint64_t seed) {
  const int J = topo.total_features();
  std::vector<int> perm(J);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, kSeedPermutation));
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  std::vector<std::vector<int>> out(topo.parties);
  int pos = 0;
  for (int m = 0; m < topo.parties; ++m) {
    const int c = topo.feature_counts.empty() ? 0 : topo.feature_counts[m];
    out[m].assign(perm.begin() + pos, perm.begin() + pos + c);
    pos += c;
  }
  return out;
}

// Coordinator: issues feature ids, then serves triple batches until every
// party has finished.
inline void run_coordinator(Endpoint& ep, const SessionConfig& cfg, const SessionTopology& topo) {
  const auto ids = permuted_feature_ids(topo, cfg.seed);
  for (int m = 1; m <= cfg.parties; ++m) {
    ep.send(static_cast<PartyId>(m), Tag::kControl, 0,
            std::vector<double>(ids[m - 1].begin(), ids[m - 1].end()));
  }
  TripleDealer dealer(kCoordinator, cfg.parties, derive_seed(cfg.seed, kSeedTriples),
                      cfg.mask_range);
  for (std::uint64_t k = 0;; ++k) {
    std::vector<std::size_t> counts;
    for (int m = 1; m <= cfg.parties; ++m) {
      Message req = ep.recv(static_cast<PartyId>(m), Tag::kControl, k, kTripleSlot);
      if (req.payload.size() != 1) throw ProtocolError("triple request payload");
      counts.push_back(static_cast<std::size_t>(req.payload[0]));
    }
    if (std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 0; })) return;
    if (std::adjacent_find(counts.begin(), counts.end(), std::not_equal_to<>()) != counts.end()) {
      throw ProtocolError("parties disagree on triple batch " + std::to_string(k));
    }
    const std::size_t n = counts.front();
    auto triples = dealer.generate(n);
    for (int m = 1; m <= cfg.parties; ++m) {
      auto& t = triples[m - 1];
      std::vector<double> payload;
      payload.reserve(3 * n);
      payload.insert(payload.end(), t.a().values().begin(), t.a().values().end());
      payload.insert(payload.end(), t.b().values().begin(), t.b().values().end());
      payload.insert(payload.end(), t.c().values().begin(), t.c().values().end());
      ep.send(static_cast<PartyId>(m), Tag::kShareDist, k, std::move(payload), kTripleSlot);
    }
  }
}

}  // namespace mpfedxgb
