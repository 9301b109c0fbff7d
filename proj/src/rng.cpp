#include "protoest/rng.hpp"

#include <cmath>
#include <numbers>

namespace protoest {

std::uint64_t StreamKey::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Stream::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return StreamKey::mix(state_);
}

double Stream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Stream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - uniform() lies in (0, 1], keeping the log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Stream::below(std::uint64_t bound) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - bound + 1) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= limit) return r % bound;
  }
}

Vector Stream::normal_vector(Eigen::Index dim) {
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal();
  return v;
}

}  // namespace protoest
