#include "dufo/voidregion.hpp"

#include <algorithm>

namespace dufo {

namespace {

bool fully_observed(const ScanScratch& s, const VoxelKey& k, std::int64_t r) {
  for (std::int64_t dz = -r; dz <= r; ++dz)
    for (std::int64_t dy = -r; dy <= r; ++dy)
      for (std::int64_t dx = -r; dx <= r; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        if (s.state({k.ix + dx, k.iy + dy, k.iz + dz}) == VoxelState::Unknown)
          return false;
      }
  return true;
}

}  // namespace

std::vector<VoxelKey> classify_voids(const ScanScratch& s, int d_p) {
  if (d_p < 0) throw InvalidInputError("classify_voids: d_p must be >= 0");
  std::vector<VoxelKey> out;
  s.for_each([&](const VoxelKey& k, VoxelState st) {
    if (st != VoxelState::Intersected) return;
    if (fully_observed(s, k, d_p)) out.push_back(k);
  });
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dufo
