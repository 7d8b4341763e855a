#include "bofspot/shadow.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace bofspot {

int ShadowMap::zone_of(uint64_t addr) const {
  // zones sorted by lo; find last zone with lo <= addr
  auto it = std::upper_bound(zones.begin(), zones.end(), addr,
                             [](uint64_t a, const std::pair<uint64_t, uint64_t>& z) {
                               return a < z.first;
                             });
  if (it == zones.begin()) return -1;
  --it;
  if (addr < it->second) return static_cast<int>(it - zones.begin());
  return -1;
}

void ShadowMap::add_zone(uint64_t lo, uint64_t hi) {
  if (lo >= hi) throw std::runtime_error("shadow: empty zone");
  if (!zones.empty() && lo < zones.back().second)
    throw std::runtime_error("shadow: zones must be added in ascending disjoint order");
  zones.emplace_back(lo, hi);
}

std::string serialize_shadow(const ShadowMap& s) {
  nlohmann::json j;
  j["zones"] = nlohmann::json::array();
  for (const auto& [lo, hi] : s.zones) j["zones"].push_back({lo, hi});
  return j.dump();
}

uint64_t restore_adjacent(uint64_t addr, Direction dir, const ShadowMap& shadow) {
  if (shadow.is_redzone(addr))
    throw std::runtime_error("restore_adjacent: address is a redzone byte");
  // Bounded walk: any well-formed map has zones of modest size, so the
  // adjacent addressable byte is at most one zone span away.
  uint64_t limit = 1;
  for (const auto& [lo, hi] : shadow.zones) limit = std::max(limit, hi - lo);
  limit += 1;
  uint64_t a = addr;
  for (uint64_t i = 0; i < limit; i++) {
    if (dir == Direction::Lower) {
      if (a == 0) throw std::runtime_error("restore_adjacent: ran off low end of address space");
      a--;
    } else {
      if (a == UINT64_MAX)
        throw std::runtime_error("restore_adjacent: ran off high end of address space");
      a++;
    }
    if (!shadow.is_redzone(a)) return a;
  }
  throw std::runtime_error("restore_adjacent: no addressable neighbor within zone span");
}

uint64_t map_overflow_byte(uint64_t x, uint64_t b, const ShadowMap& shadow) {
  if (!shadow.is_redzone(x))
    throw std::runtime_error("map_overflow_byte: overflow byte is not in a redzone");
  if (shadow.is_redzone(b))
    throw std::runtime_error("map_overflow_byte: base byte must be addressable");
  if (b >= x) throw std::runtime_error("map_overflow_byte: base byte must lie below overflow byte");
  uint64_t d = x - b;
  uint64_t a = b;
  // d-th addressable byte strictly above b
  uint64_t total_zone = 0;
  for (const auto& [lo, hi] : shadow.zones) total_zone += hi - lo;
  uint64_t walk_limit = d + total_zone + 1;
  for (uint64_t walked = 0, found = 0; walked < walk_limit; walked++) {
    if (a == UINT64_MAX)
      throw std::runtime_error("map_overflow_byte: ran off high end of address space");
    a++;
    if (!shadow.is_redzone(a) && ++found == d) return a;
  }
  throw std::runtime_error("map_overflow_byte: walk exhausted before reaching target byte");
}

ShadowMap load_shadow(const std::string& json_text) {
  ShadowMap s;
  nlohmann::json j = nlohmann::json::parse(json_text);
  for (const auto& z : j.at("zones")) {
    if (!z.is_array() || z.size() != 2) throw std::runtime_error("shadow: zone must be [lo,hi)");
    s.add_zone(z[0].get<uint64_t>(), z[1].get<uint64_t>());
  }
  return s;
}

}  // namespace bofspot
