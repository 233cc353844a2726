#pragma once

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "mpfedxgb/common.hpp"
#include "mpfedxgb/wire.hpp"

namespace mpfedxgb {

// Which (tag, slot) share returns may be completed, and by whom.
struct AuditRule {
  Tag tag;
  std::uint8_t slot;
  PartyId receiver;
  std::string label;
};

struct AuditPolicy {
  std::vector<AuditRule> rules;
  // single-value hand-offs that are allowed by design (the sign bit)
  std::vector<AuditRule> handoffs;

  static AuditPolicy standard() {
    AuditPolicy p;
    p.rules = {
        {Tag::kMulEF, 0, kActiveParty, "e,f->P1"},
        {Tag::kSignVote, 0, kActiveParty, "H->P1"},
        {Tag::kSignVote, 1, kGradientRestorer, "G->P2"},
        {Tag::kMagnitudeReport, 0, kActiveParty, "a-sum->P1"},
        {Tag::kPredictShare, 0, kActiveParty, "yhat->P1"},
        // orders of magnitude for the Newton start value
        {Tag::kMagnitudeReport, 1, kActiveParty, "d-order->P1"},
    };
    p.handoffs = {{Tag::kSignVerdict, 0, kActiveParty, "G-sign->P1"}};
    return p;
  }
};

// Tags whose payloads are shares of a computed value.
inline bool is_share_return(Tag t) {
  return t == Tag::kMulEF || t == Tag::kSignVote || t == Tag::kMagnitudeReport ||
         t == Tag::kPredictShare;
}

struct Restoration {
  PartyId receiver;
  Tag tag;
  std::uint8_t slot;
  std::uint64_t round;
  std::string label;
};

struct Violation {
  PartyId party;
  Tag tag;
  std::uint8_t slot;
  std::uint64_t round;
  std::string what;
};

struct AuditResult {
  std::vector<Violation> violations;
  std::vector<Restoration> restorations;

  std::set<std::string> kinds() const {
    std::set<std::string> out;
    for (const auto& r : restorations) out.insert(r.label);
    return out;
  }
  std::map<std::string, std::size_t> kind_counts() const {
    std::map<std::string, std::size_t> out;
    for (const auto& r : restorations) ++out[r.label];
    return out;
  }
};

// transcripts[p] is party p's transcript (index 0 is the coordinator).
// A party restores a value when it receives the remaining M - 1 shares of
// one (tag, slot, round) from every other data holder.
inline AuditResult audit_transcripts(const std::vector<Transcript>& transcripts, int parties,
                                     const AuditPolicy& policy = AuditPolicy::standard()) {
  AuditResult out;
  auto find_rule = [](const std::vector<AuditRule>& rules, Tag tag, std::uint8_t slot)
      -> const AuditRule* {
    for (const auto& r : rules) {
      if (r.tag == tag && r.slot == slot) return &r;
    }
    return nullptr;
  };

  for (std::size_t p = 0; p < transcripts.size(); ++p) {
    const auto receiver = static_cast<PartyId>(p);
    std::map<std::tuple<Tag, std::uint8_t, std::uint64_t>, std::set<PartyId>> senders;
    for (const auto& e : transcripts[p].entries()) {
      if (e.direction != Direction::kReceived) continue;
      const Header& h = e.message.header;
      if (receiver == kCoordinator && is_share_return(h.tag)) {
        out.violations.push_back({receiver, h.tag, h.slot, h.round,
                                  "coordinator received a computation share"});
        continue;
      }
      if (const AuditRule* hand = find_rule(policy.handoffs, h.tag, h.slot)) {
        if (h.from == kGradientRestorer && receiver == hand->receiver) {
          out.restorations.push_back({receiver, h.tag, h.slot, h.round, hand->label});
        }
        continue;
      }
      if (!is_share_return(h.tag) || h.from == kCoordinator) continue;
      senders[{h.tag, h.slot, h.round}].insert(h.from);
    }

    std::map<std::uint64_t, std::set<std::uint8_t>> votes;
    for (const auto& [key, from] : senders) {
      const auto& [tag, slot, round] = key;
      if (static_cast<int>(from.size()) < parties - 1) continue;
      if (tag == Tag::kSignVote) votes[round].insert(slot);
      const AuditRule* rule = find_rule(policy.rules, tag, slot);
      if (!rule || rule->receiver != receiver) {
        out.violations.push_back({receiver, tag, slot, round,
                                  party_name(receiver) + " completed a share set of " +
                                      tag_name(tag) + " slot " + std::to_string(slot)});
        continue;
      }
      out.restorations.push_back({receiver, tag, slot, round, rule->label});
    }
    for (const auto& [round, slots] : votes) {
      if (slots.size() > 1) {
        out.violations.push_back({receiver, Tag::kSignVote, 0, round,
                                  party_name(receiver) + " restored both H and G"});
      }
    }
  }
  return out;
}

}  // namespace mpfedxgb
