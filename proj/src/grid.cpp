#include "dufo/grid.hpp"

#include <algorithm>
#include <cmath>

namespace dufo {

namespace {

std::int64_t floor_index(double c, double v) {
  const double q = std::floor(c / v);
  // int64 holds +-9.2e18; beyond that the cast is undefined.
  if (q < -9.0e18 || q > 9.0e18)
    throw InvalidInputError("voxel index overflows 64-bit range");
  return static_cast<std::int64_t>(q);
}

}  // namespace

VoxelKey voxel_key(const Eigen::Vector3d& p, double voxel_size) {
  if (!p.allFinite()) throw InvalidInputError("voxel_key: non-finite point");
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size))
    throw InvalidInputError("voxel_key: voxel size must be positive");
  return {floor_index(p.x(), voxel_size), floor_index(p.y(), voxel_size),
          floor_index(p.z(), voxel_size)};
}

std::vector<VoxelKey> neighborhood(const VoxelKey& k, int radius) {
  if (radius < 0) throw InvalidInputError("neighborhood: radius must be >= 0");
  std::vector<VoxelKey> out;
  if (radius == 0) return out;
  const std::int64_t r = radius;
  out.reserve(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1) * (2 * r + 1) - 1));
  for (std::int64_t dz = -r; dz <= r; ++dz)
    for (std::int64_t dy = -r; dy <= r; ++dy)
      for (std::int64_t dx = -r; dx <= r; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        out.push_back({k.ix + dx, k.iy + dy, k.iz + dz});
      }
  return out;
}

void Params::validate() const {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size))
    throw InvalidInputError("params: voxel_size must be positive and finite");
  if (!(d_s >= 0.0) || !std::isfinite(d_s))
    throw InvalidInputError("params: d_s must be >= 0 and finite");
  if (d_p < 0) throw InvalidInputError("params: d_p must be >= 0");
  if (max_range && (!(*max_range > 0.0) || !std::isfinite(*max_range)))
    throw InvalidInputError("params: max_range must be positive and finite");
  if (hit_extension && *hit_extension < 0)
    throw InvalidInputError("params: hit_extension must be >= 0");
}

void IndexBounds::extend(const VoxelKey& k) {
  if (!valid) {
    lo = hi = k;
    valid = true;
    return;
  }
  lo.ix = std::min(lo.ix, k.ix);
  lo.iy = std::min(lo.iy, k.iy);
  lo.iz = std::min(lo.iz, k.iz);
  hi.ix = std::max(hi.ix, k.ix);
  hi.iy = std::max(hi.iy, k.iy);
  hi.iz = std::max(hi.iz, k.iz);
}

bool IndexBounds::contains(const VoxelKey& k) const {
  return valid && k.ix >= lo.ix && k.ix <= hi.ix && k.iy >= lo.iy &&
         k.iy <= hi.iy && k.iz >= lo.iz && k.iz <= hi.iz;
}

std::uint64_t IndexBounds::voxel_count() const {
  if (!valid) return 0;
  std::uint64_t n = 1;
  for (auto [l, h] : {std::pair{lo.ix, hi.ix}, {lo.iy, hi.iy}, {lo.iz, hi.iz}}) {
    const std::uint64_t d = static_cast<std::uint64_t>(h - l) + 1;
    if (d != 0 && n > UINT64_MAX / d) return UINT64_MAX;
    n *= d;
  }
  return n;
}

std::vector<VoxelKey> VoidMap::keys_sorted() const {
  std::vector<VoxelKey> keys;
  keys.reserve(size());
  for_each([&keys](const VoxelKey& k) { keys.push_back(k); });
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace dufo
