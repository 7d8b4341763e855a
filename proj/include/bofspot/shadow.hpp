#pragma once
// Shadow byte map: which bytes are ordinary addressable memory and which
// belong to a redzone inserted around a variable. Plain-mode runs carry an
// empty map (everything addressable).
#include <cstdint>
#include <string>
#include <vector>

namespace bofspot {

struct ShadowMap {
  // Sorted, disjoint, non-adjacent-merged half-open extents; zone id = index.
  std::vector<std::pair<uint64_t, uint64_t>> zones;

  bool empty() const { return zones.empty(); }
  bool is_redzone(uint64_t addr) const { return zone_of(addr) >= 0; }
  int zone_of(uint64_t addr) const;
  void add_zone(uint64_t lo, uint64_t hi);  // [lo, hi)
};

std::string serialize_shadow(const ShadowMap& s);
ShadowMap load_shadow(const std::string& json_text);

enum class Direction : uint8_t { Lower, Higher };

// Nearest addressable byte adjacent to `addr` in the given direction,
// skipping over any redzone bytes in between. `addr` itself must be
// addressable. Throws if `addr` is a redzone byte or the walk exhausts a
// sane distance (malformed map).
uint64_t restore_adjacent(uint64_t addr, Direction dir, const ShadowMap& shadow);

// Where an overflow byte would have landed had the redzones not been there:
// `x` is a redzone byte reached by overflowing past the addressable byte
// `b` (b < x); the result is the d-th addressable byte strictly above `b`,
// where d = x - b. Throws on precondition violations.
uint64_t map_overflow_byte(uint64_t x, uint64_t b, const ShadowMap& shadow);

}  // namespace bofspot
