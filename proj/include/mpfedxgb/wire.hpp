#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>
#include <vector>

#include "mpfedxgb/common.hpp"

namespace mpfedxgb {

enum class Tag : std::uint8_t {
  kShareDist = 1,
  kMulEF,
  kMulEFBroadcast,
  kSignVote,
  kSignVerdict,
  kSplitInfo,
  kMagnitudeReport,
  kStepSize,
  kPredictShare,
  kControl,
};

inline const char* tag_name(Tag t) {
  switch (t) {
    case Tag::kShareDist: return "ShareDist";
    case Tag::kMulEF: return "MulEF";
    case Tag::kMulEFBroadcast: return "MulEFBroadcast";
    case Tag::kSignVote: return "SignVote";
    case Tag::kSignVerdict: return "SignVerdict";
    case Tag::kSplitInfo: return "SplitInfo";
    case Tag::kMagnitudeReport: return "MagnitudeReport";
    case Tag::kStepSize: return "StepSize";
    case Tag::kPredictShare: return "PredictShare";
    case Tag::kControl: return "Control";
  }
  return "?";
}

inline bool valid_tag(std::uint8_t raw) {
  return raw >= static_cast<std::uint8_t>(Tag::kShareDist) &&
         raw <= static_cast<std::uint8_t>(Tag::kControl);
}

struct Header {
  std::uint64_t session = 0;
  std::uint64_t round = 0;
  PartyId from = 0;
  PartyId to = 0;
  Tag tag = Tag::kControl;
  std::uint8_t slot = 0;
  std::uint16_t reserved = 0;
  std::uint32_t payload_bytes = 0;

  static constexpr std::size_t kBytes = 8 + 8 + 2 + 2 + 1 + 1 + 2 + 4;
};

struct Message {
  Header header;
  std::vector<double> payload;

  bool operator==(const Message& o) const {
    return header.session == o.header.session && header.round == o.header.round &&
           header.from == o.header.from && header.to == o.header.to &&
           header.tag == o.header.tag && header.slot == o.header.slot &&
           header.payload_bytes == o.header.payload_bytes &&
           payload.size() == o.payload.size() &&
           (payload.empty() ||
            std::memcmp(payload.data(), o.payload.data(), payload.size() * sizeof(double)) == 0);
  }
};

namespace detail {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }
}

template <class T>
T get_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace detail

inline void encode_header(std::vector<std::uint8_t>& out, const Header& h) {
  detail::put_le(out, h.session);
  detail::put_le(out, h.round);
  detail::put_le(out, h.from);
  detail::put_le(out, h.to);
  detail::put_le(out, static_cast<std::uint8_t>(h.tag));
  detail::put_le(out, h.slot);
  detail::put_le(out, h.reserved);
  detail::put_le(out, h.payload_bytes);
}

// Header and payload, without the length prefix.
inline std::vector<std::uint8_t> encode_body(const Message& m) {
  std::vector<std::uint8_t> out;
  out.reserve(Header::kBytes + m.payload.size() * 8);
  Header h = m.header;
  h.payload_bytes = static_cast<std::uint32_t>(m.payload.size() * sizeof(double));
  encode_header(out, h);
  for (double v : m.payload) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    detail::put_le(out, bits);
  }
  return out;
}

// [u32 length][header][payload]
inline std::vector<std::uint8_t> encode_frame(const Message& m) {
  std::vector<std::uint8_t> body = encode_body(m);
  std::vector<std::uint8_t> out;
  out.reserve(body.size() + 4);
  detail::put_le(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

inline Message decode_body(const std::uint8_t* p, std::size_t n) {
  if (n < Header::kBytes) throw ProtocolError("frame shorter than header");
  Message m;
  Header& h = m.header;
  h.session = detail::get_le<std::uint64_t>(p);
  h.round = detail::get_le<std::uint64_t>(p + 8);
  h.from = detail::get_le<std::uint16_t>(p + 16);
  h.to = detail::get_le<std::uint16_t>(p + 18);
  const auto raw_tag = detail::get_le<std::uint8_t>(p + 20);
  if (!valid_tag(raw_tag)) throw ProtocolError("unknown message tag " + std::to_string(raw_tag));
  h.tag = static_cast<Tag>(raw_tag);
  h.slot = detail::get_le<std::uint8_t>(p + 21);
  h.reserved = detail::get_le<std::uint16_t>(p + 22);
  h.payload_bytes = detail::get_le<std::uint32_t>(p + 24);
  if (h.payload_bytes % sizeof(double) != 0 || h.payload_bytes != n - Header::kBytes) {
    throw ProtocolError("declared payload length " + std::to_string(h.payload_bytes) +
                        " does not match frame body " + std::to_string(n - Header::kBytes));
  }
  m.payload.resize(h.payload_bytes / sizeof(double));
  for (std::size_t i = 0; i < m.payload.size(); ++i) {
    const auto bits = detail::get_le<std::uint64_t>(p + Header::kBytes + 8 * i);
    std::memcpy(&m.payload[i], &bits, sizeof(double));
  }
  return m;
}

inline Message decode_frame(const std::vector<std::uint8_t>& frame) {
  if (frame.size() < 4) throw ProtocolError("frame missing length prefix");
  const auto len = detail::get_le<std::uint32_t>(frame.data());
  if (len != frame.size() - 4) throw ProtocolError("frame length prefix mismatch");
  return decode_body(frame.data() + 4, len);
}

enum class Direction : std::uint8_t { kSent = 0, kReceived = 1 };

struct TranscriptEntry {
  Direction direction;
  Message message;
};

// Append-only log of one party's traffic, in the order the party observed it.
class Transcript {
 public:
  void append(Direction d, const Message& m) { entries_.push_back({d, m}); }
  const std::vector<TranscriptEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::vector<std::uint8_t> serialize() const {
    std::vector<std::uint8_t> out;
    for (const auto& e : entries_) {
      out.push_back(static_cast<std::uint8_t>(e.direction));
      auto body = encode_body(e.message);
      detail::put_le(out, static_cast<std::uint32_t>(body.size()));
      out.insert(out.end(), body.begin(), body.end());
    }
    return out;
  }

  // FNV-1a over the serialized form.
  std::uint64_t digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : serialize()) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  std::vector<TranscriptEntry> entries_;
};

}  // namespace mpfedxgb
