#pragma once

#include <cstdint>
#include <vector>

#include "protoest/numerics.hpp"

namespace protoest {

/// Sequential generator for one entity. Uniforms come from splitmix64 and
/// normals from Box-Muller, so the stream is bit-identical on every platform
/// (std::normal_distribution is implementation-defined).
class Stream {
 public:
  explicit Stream(std::uint64_t state) : state_(state) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  Vector normal_vector(Eigen::Index dim);

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Hierarchical key naming one independent random stream. Children are derived
/// by hashing, so stream (seed, 3, 7) never depends on how many draws were
/// taken from (seed, 3, 6) or in what order entities were evaluated.
class StreamKey {
 public:
  explicit StreamKey(std::uint64_t seed) : hash_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  StreamKey child(std::uint64_t index) const { return StreamKey(mix(hash_ + 0x9e3779b97f4a7c15ULL * (index + 1)), 0); }
  Stream stream() const { return Stream(hash_); }
  std::uint64_t hash() const { return hash_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  StreamKey(std::uint64_t hash, int) : hash_(hash) {}
  std::uint64_t hash_;
};

}  // namespace protoest
