#pragma once

#include <Eigen/Core>
#include <vector>

#include "dufo/grid.hpp"
#include "dufo/scan.hpp"

namespace dufo {

/// World-frame segment from the sensor position to a measured point.
struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d endpoint;
};

/// Every voxel the segment passes through, in order: first element is the
/// origin's voxel, last is the endpoint's, consecutive keys differ by one
/// step along one axis.
std::vector<VoxelKey> traverse(const Ray& r, double voxel_size);

/// Mark one ray into the scratch: Intersected from the origin until d_s
/// before the endpoint, Hit from there through the endpoint voxel, then Hit
/// for the configured number of extension voxels past the endpoint. All
/// writes are lattice joins. Rays that start and end in one voxel mark only
/// that voxel Hit.
void integrate_ray(ScanScratch& s, const Ray& r, const Params& p);

/// Integrate a whole scan: transform points to world frame, drop non-finite
/// points and (when max_range is set) points beyond it, ray-cast everything
/// into a fresh scratch, classify that scratch's voids and mark them in the
/// map. Uses the params the map was created with.
void integrate_scan(VoidMap& map, const PosedScan& scan);

}  // namespace dufo
