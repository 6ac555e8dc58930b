#pragma once

#include <vector>

#include "dufo/grid.hpp"

namespace dufo {

/// Keys that were Intersected in this scan and whose entire Chebyshev-d_p
/// neighborhood was observed (Intersected or Hit) in the same scan. Neighbor
/// states come from this scratch only, never from earlier scans. Sorted by
/// (ix, iy, iz).
std::vector<VoxelKey> classify_voids(const ScanScratch& s, int d_p);

}  // namespace dufo
