#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dufo/grid.hpp"
#include "dufo/scan.hpp"

namespace dufo {

struct Box {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();

  bool degenerate() const {
    return !(min.x() < max.x() && min.y() < max.y() && min.z() < max.z());
  }
  Eigen::Vector3d center() const { return 0.5 * (min + max); }
};

/// A box of fixed size whose center follows piecewise-linear waypoints over
/// the scan index; clamped before the first and after the last waypoint.
struct MovingBox {
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  std::vector<std::pair<double, Eigen::Vector3d>> waypoints;  ///< (scan index, center)

  Box at(double scan_index) const;
};

/// Sensor trajectory: translation interpolated linearly, rotation slerped.
struct SensorPath {
  std::vector<std::pair<double, Pose>> waypoints;  ///< (scan index, pose)

  Pose at(double scan_index) const;
};

/// Everything needed to synthesize a posed sequence with exact ground truth.
struct SceneSpec {
  std::size_t scan_count = 0;
  int azimuth_count = 0;
  int elevation_count = 0;
  double azimuth_min_deg = 0.0;
  double azimuth_max_deg = 360.0;
  double elevation_min_deg = -30.0;
  double elevation_max_deg = 30.0;
  double pose_noise_sigma = 0.0;   ///< translation noise on the true pose, meters
  double range_noise_sigma = 0.0;  ///< meters
  std::uint64_t seed = 0;
  std::optional<double> max_range;
  std::vector<Box> static_boxes;
  std::vector<MovingBox> dynamic_boxes;
  SensorPath sensor;

  std::size_t rays_per_scan() const {
    return static_cast<std::size_t>(azimuth_count) * elevation_count;
  }

  /// Throws InvalidInputError naming the offending field.
  void validate() const;
};

/// Text form: top-level key=value lines plus repeated [static_box],
/// [dynamic_box] and [sensor] sections.
SceneSpec read_scene_spec(const std::string& path);

/// Casts the spec's ray grid from each scan's (noise-perturbed) pose against
/// the boxes present at that scan, producing sensor-frame points relative to
/// the clean reported pose. A point is ground-truth dynamic iff its true
/// first intersection was a moving box. Deterministic for a fixed seed.
std::vector<PosedScan> generate(const SceneSpec& spec);

/// Naive dense-grid reimplementation of the per-scan void semantics for
/// testing; shares no traversal code with the production modules. Every voxel
/// any ray marks must fall inside bounds, else this throws.
std::vector<VoxelKey> oracle_voids(const std::vector<PosedScan>& scans,
                                   const Params& p, const IndexBounds& bounds);

}  // namespace dufo
