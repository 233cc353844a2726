#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mpfedxgb/common.hpp"

namespace mpfedxgb {

// One party's additive slice of a numeric vector.
class ShareVector {
 public:
  ShareVector() = default;
  ShareVector(PartyId owner, std::vector<double> values)
      : owner_(owner), values_(std::move(values)) {}
  ShareVector(PartyId owner, std::initializer_list<double> values)
      : owner_(owner), values_(values) {}
  ShareVector(PartyId owner, std::size_t n, double fill = 0.0)
      : owner_(owner), values_(n, fill) {}

  PartyId owner() const { return owner_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

 private:
  PartyId owner_ = 0;
  std::vector<double> values_;
};

// A complete set of shares of one logical value, indexed by party - 1.
using ShareSet = std::vector<ShareVector>;

namespace detail {

inline void require_compatible(const ShareVector& x, const ShareVector& y,
                               const char* op) {
  if (x.owner() != y.owner()) {
    throw ShapeError(std::string(op) + ": shares held by different parties");
  }
  if (x.size() != y.size()) {
    throw ShapeError(std::string(op) + ": length mismatch " + std::to_string(x.size()) +
                     " vs " + std::to_string(y.size()));
  }
}

}  // namespace detail

inline ShareVector operator+(const ShareVector& x, const ShareVector& y) {
  detail::require_compatible(x, y, "add");
  ShareVector z(x.owner(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] + y[i];
  return z;
}

inline ShareVector operator-(const ShareVector& x, const ShareVector& y) {
  detail::require_compatible(x, y, "sub");
  ShareVector z(x.owner(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] - y[i];
  return z;
}

// Multiplication by a public constant is local.
inline ShareVector scaled(const ShareVector& x, double c) {
  ShareVector z(x.owner(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = c * x[i];
  return z;
}

// Two-sum accumulator. Exact partial sums leave the correction at zero.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = s_ + x;
    const double bp = t - s_;
    c_ += (s_ - (t - bp)) + (x - bp);
    s_ = t;
  }
  void add_product(double a, double b) {
    const double p = a * b;
    add(p);
    c_ += std::fma(a, b, -p);
  }
  double value() const { return s_ + c_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

inline double sum(const ShareVector& x) {
  CompensatedSum acc;
  for (double v : x.values()) acc.add(v);
  return acc.value();
}

// SHR on the dealer side: M-1 masks uniform on [-range, range], the dealer
// keeps x minus their sum.
inline ShareSet shr_split(std::span<const double> plaintext, PartyId dealer, int parties,
                          Rng& rng, double range) {
  if (parties < 2) throw TopologyError("secret sharing needs at least 2 parties");
  if (dealer < 1 || dealer > parties) throw TopologyError("dealer is not a share holder");
  const std::size_t n = plaintext.size();
  ShareSet set;
  set.reserve(parties);
  for (int m = 1; m <= parties; ++m) set.emplace_back(static_cast<PartyId>(m), n);
  for (std::size_t i = 0; i < n; ++i) {
    double masks = 0.0;
    for (int m = 1; m <= parties; ++m) {
      if (m == dealer) continue;
      const double r = rng.grid_uniform(range);
      set[m - 1][i] = r;
      masks += r;
    }
    set[dealer - 1][i] = plaintext[i] - masks;
  }
  return set;
}

inline ShareSet shr_split(double x, PartyId dealer, int parties, Rng& rng, double range) {
  const double v[1] = {x};
  return shr_split(std::span<const double>(v, 1), dealer, parties, rng, range);
}

// Sums in ascending party order.
inline std::vector<double> reconstruct(const ShareSet& shares) {
  if (shares.empty()) throw ShapeError("reconstruct: empty share set");
  const std::size_t n = shares.front().size();
  std::vector<bool> seen(shares.size() + 1, false);
  for (const auto& s : shares) {
    if (s.owner() < 1 || s.owner() > shares.size() || seen[s.owner()]) {
      throw ShapeError("reconstruct: incomplete or duplicated share set");
    }
    seen[s.owner()] = true;
    if (s.size() != n) throw ShapeError("reconstruct: shares of different lengths");
  }
  std::vector<const ShareVector*> ordered(shares.size());
  for (const auto& s : shares) ordered[s.owner() - 1] = &s;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    CompensatedSum acc;
    for (const auto* s : ordered) acc.add((*s)[i]);
    out[i] = acc.value();
  }
  return out;
}

// Coordinator-issued multiplication triple, as held by one party. Each
// element is single-use.
class BeaverTriple {
 public:
  BeaverTriple() = default;
  BeaverTriple(ShareVector a, ShareVector b, ShareVector c)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    if (a_.size() != b_.size() || a_.size() != c_.size()) {
      throw ShapeError("triple components differ in length");
    }
  }

  std::size_t size() const { return a_.size(); }
  PartyId owner() const { return a_.owner(); }
  bool spent() const { return spent_; }
  const ShareVector& a() const { return a_; }
  const ShareVector& b() const { return b_; }
  const ShareVector& c() const { return c_; }

  void consume() {
    if (spent_) throw ProtocolError("multiplication triple reused");
    spent_ = true;
  }

 private:
  ShareVector a_, b_, c_;
  bool spent_ = false;
};

// Generates triples; only the coordinator may run it.
class TripleDealer {
 public:
  TripleDealer(PartyId role, int parties, std::uint64_t seed, double range)
      : parties_(parties), rng_(seed), range_(range) {
    if (role != kCoordinator) throw RoleError("triple generation runs on the coordinator only");
    if (parties < 2) throw TopologyError("triple generation needs at least 2 parties");
  }

  // a, b on a coarse grid so that c = a*b is exact and the shares of c
  // reconstruct it exactly.
  std::vector<BeaverTriple> generate(std::size_t n) {
    std::vector<double> a(n), b(n), c(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng_.grid_uniform(range_, kTripleGridBits);
      b[i] = rng_.grid_uniform(range_, kTripleGridBits);
      c[i] = a[i] * b[i];
    }
    ShareSet as = shr_split(a, kActiveParty, parties_, rng_, range_);
    ShareSet bs = shr_split(b, kActiveParty, parties_, rng_, range_);
    ShareSet cs = shr_split(c, kActiveParty, parties_, rng_, range_);
    std::vector<BeaverTriple> out;
    out.reserve(parties_);
    for (int m = 0; m < parties_; ++m) {
      out.emplace_back(std::move(as[m]), std::move(bs[m]), std::move(cs[m]));
    }
    last_plain_ = {std::move(a), std::move(b), std::move(c)};
    return out;
  }

  // Plaintext of the most recent batch, for tests.
  const std::array<std::vector<double>, 3>& last_plaintext() const { return last_plain_; }

 private:
  int parties_;
  Rng rng_;
  double range_;
  std::array<std::vector<double>, 3> last_plain_;
};

// Local halves of Beaver multiplication. Party m publishes (x - a, y - b);
// after e and f are opened every party finishes locally.
inline std::pair<ShareVector, ShareVector> beaver_masked(const ShareVector& x,
                                                         const ShareVector& y,
                                                         const BeaverTriple& t) {
  detail::require_compatible(x, y, "mul");
  if (t.size() != x.size() || t.owner() != x.owner()) {
    throw ShapeError("mul: triple does not match operand shape");
  }
  return {x - t.a(), y - t.b()};
}

inline ShareVector beaver_finish(const std::vector<double>& e, const std::vector<double>& f,
                                 const BeaverTriple& t) {
  const bool active = t.owner() == kActiveParty;
  ShareVector z(t.owner(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CompensatedSum acc;
    if (active) acc.add_product(e[i], f[i]);
    acc.add_product(f[i], t.a()[i]);
    acc.add_product(e[i], t.b()[i]);
    acc.add(t.c()[i]);
    z[i] = acc.value();
  }
  return z;
}

// Which pipeline stage a multiplication belongs to.
enum class MulPhase : int {
  kGeneral = 0,
  kBucketAgg,
  kCandidatePrep,
  kComparison,
  kGainSign,
  kChildPrep,
  kLeafWeight,
  kTrainPredict,
  kReportPredict,
  kInference,
  kDivision,
  kCount
};

inline const char* phase_name(MulPhase p) {
  switch (p) {
    case MulPhase::kGeneral: return "general";
    case MulPhase::kBucketAgg: return "bucket_agg";
    case MulPhase::kCandidatePrep: return "candidate_prep";
    case MulPhase::kComparison: return "comparison";
    case MulPhase::kGainSign: return "gain_sign";
    case MulPhase::kChildPrep: return "child_prep";
    case MulPhase::kLeafWeight: return "leaf_weight";
    case MulPhase::kTrainPredict: return "train_predict";
    case MulPhase::kReportPredict: return "report_predict";
    case MulPhase::kInference: return "inference";
    case MulPhase::kDivision: return "division";
    case MulPhase::kCount: break;
  }
  return "?";
}

// One increment per MUL invocation regardless of vector length.
class MulCounter {
 public:
  static constexpr std::size_t kPhases = static_cast<std::size_t>(MulPhase::kCount);

  void record(MulPhase phase) {
    ++total_;
    ++by_phase_[static_cast<std::size_t>(phase)];
  }

  std::uint64_t total() const { return total_; }
  std::uint64_t count(MulPhase phase) const {
    return by_phase_[static_cast<std::size_t>(phase)];
  }
  const std::array<std::uint64_t, kPhases>& by_phase() const { return by_phase_; }

  // Stages included in the split-phase and prediction cost model.
  std::uint64_t split_phase() const {
    return count(MulPhase::kBucketAgg) + count(MulPhase::kComparison) +
           count(MulPhase::kGainSign) + count(MulPhase::kChildPrep);
  }

 private:
  std::uint64_t total_ = 0;
  std::array<std::uint64_t, kPhases> by_phase_{};
};

inline MulCounter operator-(const MulCounter& after, const MulCounter& before) {
  MulCounter d;
  for (std::size_t p = 0; p < MulCounter::kPhases; ++p) {
    const auto n = after.by_phase()[p] - before.by_phase()[p];
    for (std::uint64_t k = 0; k < n; ++k) d.record(static_cast<MulPhase>(p));
  }
  return d;
}

}  // namespace mpfedxgb
