#include "revi/rng.hpp"

#include <cmath>

namespace revi {

double SeedStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  cached_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

uint64_t hash_tag(std::string_view tag) {
  // FNV-1a
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

SeedStream substream(uint64_t master, std::string_view tag) {
  SeedStream mix(master ^ hash_tag(tag));
  mix.next_u64();  // decorrelate nearby master seeds
  return mix;
}

SeedStream substream(uint64_t master, std::string_view tag, uint64_t index) {
  SeedStream mix(master ^ hash_tag(tag) ^ (index * 0xd1342543de82ef95ull + 1));
  mix.next_u64();
  return mix;
}

}  // namespace revi
