#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace mpfedxgb {

// Party 0 is the coordinator; data holders are 1..M and party 1 holds the
// labels.
using PartyId = std::uint16_t;

inline constexpr PartyId kCoordinator = 0;
inline constexpr PartyId kActiveParty = 1;
inline constexpr PartyId kGradientRestorer = 2;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class SessionAbort : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RoleError : public Error {
 public:
  using Error::Error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per (seed, purpose, party).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose,
                                 std::uint64_t party = 0) {
  return splitmix64(splitmix64(seed ^ splitmix64(purpose)) ^ (party * 0x632be59bd9b4e019ULL));
}

// Masks are drawn on a dyadic grid so that sharing a grid value and summing
// the shares back in a fixed order is exact.
inline constexpr int kMaskGridBits = 30;
inline constexpr int kTripleGridBits = 16;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [-range, +range] on the 2^-bits grid.
  double grid_uniform(double range, int bits = kMaskGridBits) {
    const double scale = std::ldexp(1.0, bits);
    const auto bound = static_cast<std::int64_t>(std::floor(range * scale));
    std::uniform_int_distribution<std::int64_t> dist(-bound, bound);
    return std::ldexp(static_cast<double>(dist(engine_)), -bits);
  }

  // Uniform in (0, upper].
  double open_closed(double upper) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    return (1.0 - dist(engine_)) * upper;
  }

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    return dist(engine_);
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    std::normal_distribution<double> dist(mean, sd);
    return dist(engine_);
  }

  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    std::uniform_int_distribution<std::int64_t> dist(lo, hi);
    return dist(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline std::string party_name(PartyId id) {
  return id == kCoordinator ? std::string("C") : "P" + std::to_string(id);
}

}  // namespace mpfedxgb
