#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dufo/errors.hpp"
#include "dufo/scan.hpp"

namespace dufo {

/// In-memory PCD payload: float32 coordinates, optional {0,1} label channel,
/// optional embedded viewpoint pose.
struct CloudFile {
  std::vector<Eigen::Vector3f> points;
  std::vector<std::uint8_t> labels;  ///< empty, or one entry per point
  std::optional<Pose> viewpoint;
};

enum class PcdMode { Ascii, Binary };

/// PCD v0.7 reader. Requires x/y/z as 4-byte floats; accepts an integer
/// `label` field (values 0/1) and skips any other fields. DATA ascii and
/// binary (little-endian) are supported; binary_compressed is not.
CloudFile read_pcd(const std::string& path);

/// Writes PCD v0.7 with FIELDS x y z [label]. Binary mode round-trips
/// coordinates bit-exactly; ascii prints enough digits to reparse the same
/// float32 values.
void write_pcd(const std::string& path, const CloudFile& cloud, PcdMode mode);

struct PoseTable {
  std::map<std::uint64_t, Pose> poses;
};

/// Text file of lines "scan_id tx ty tz qx qy qz qw" (quaternion w-last).
/// '#' starts a comment. Quaternions must be unit within 1e-3 and are
/// renormalized.
PoseTable read_poses(const std::string& path);
void write_poses(const std::string& path, const PoseTable& table);

enum class PoseSource { File, Viewpoint };

struct LoadOptions {
  PoseSource pose_source = PoseSource::File;
  /// Pose file path for PoseSource::File; defaults to <dir>/poses.txt.
  std::optional<std::string> pose_file;
  /// Set when the PCD points are stored in world frame; they are converted
  /// back to sensor frame with the inverse pose on load.
  bool world_frame = false;
};

/// Loads every <digits>.pcd in dir, ordered by numeric stem, attaching poses
/// from the chosen source and ground-truth labels when a label field exists.
std::vector<PosedScan> load_sequence(const std::string& dir, const LoadOptions& opts);

/// Flat key=value run configuration. Every field is optional so command-line
/// flags can override file values.
struct Config {
  std::optional<double> voxel_size;
  std::optional<double> d_s;
  std::optional<int> d_p;
  std::optional<double> max_range;
  std::optional<std::string> mode;          ///< "offline" | "online"
  std::optional<int> hit_extension;
  std::optional<std::string> online_order;  ///< "classify_first" | "integrate_first"
};

Config read_config(const std::string& path);

}  // namespace dufo
