#pragma once

#include <cstdint>
#include <string_view>

namespace revi {

// Deterministic random stream built on splitmix64. Every source of
// randomness in the project derives from one master seed through named
// substreams, so a run is reproducible from its config alone.
class SeedStream {
 public:
  explicit SeedStream(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive range.
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Standard normal via Box-Muller, one value cached per pair.
  double normal();

 private:
  uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

uint64_t hash_tag(std::string_view tag);

// Substream derivation: master seed -> per-purpose stream, optionally
// indexed (e.g. one stream per dataset sample).
SeedStream substream(uint64_t master, std::string_view tag);
SeedStream substream(uint64_t master, std::string_view tag, uint64_t index);

}  // namespace revi
