#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace twosided {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// One independent random stream. Uniforms and normals are derived from the
/// raw 64-bit engine output by hand so that traces are bit-identical across
/// standard library implementations.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// 1 with probability p. p = 0 never fires, p = 1 always fires.
  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal by Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class StreamPurpose : std::uint64_t {
  customer_arrival = 1,
  server_arrival = 2,
  customer_coin = 3,
  server_coin = 4,
  direction = 5,
  policy = 6,
};

inline std::uint64_t derive_seed(std::uint64_t master, StreamPurpose purpose, std::uint64_t index) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (static_cast<std::uint64_t>(purpose) << 56));
  return splitmix64(h ^ index);
}

/// Substreams keyed by (purpose, entity) under one master seed: arrivals
/// and perturbation coins per queue, plus shared direction and policy
/// streams.
class RngStreams {
 public:
  RngStreams(std::uint64_t seed, std::size_t customers, std::size_t servers) : seed_(seed) {
    for (std::size_t i = 0; i < customers; ++i) {
      customer_arrival_.emplace_back(derive_seed(seed, StreamPurpose::customer_arrival, i));
      customer_coin_.emplace_back(derive_seed(seed, StreamPurpose::customer_coin, i));
    }
    for (std::size_t j = 0; j < servers; ++j) {
      server_arrival_.emplace_back(derive_seed(seed, StreamPurpose::server_arrival, j));
      server_coin_.emplace_back(derive_seed(seed, StreamPurpose::server_coin, j));
    }
    direction_ = RandomStream(derive_seed(seed, StreamPurpose::direction, 0));
    policy_ = RandomStream(derive_seed(seed, StreamPurpose::policy, 0));
  }

  std::uint64_t seed() const noexcept { return seed_; }
  RandomStream& customer_arrival(std::size_t i) { return customer_arrival_[i]; }
  RandomStream& server_arrival(std::size_t j) { return server_arrival_[j]; }
  RandomStream& customer_coin(std::size_t i) { return customer_coin_[i]; }
  RandomStream& server_coin(std::size_t j) { return server_coin_[j]; }
  RandomStream& direction() { return direction_; }
  RandomStream& policy() { return policy_; }

 private:
  std::uint64_t seed_;
  std::vector<RandomStream> customer_arrival_;
  std::vector<RandomStream> server_arrival_;
  std::vector<RandomStream> customer_coin_;
  std::vector<RandomStream> server_coin_;
  RandomStream direction_;
  RandomStream policy_;
};

}  // namespace twosided
