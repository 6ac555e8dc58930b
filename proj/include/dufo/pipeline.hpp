#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "dufo/grid.hpp"
#include "dufo/scan.hpp"

namespace dufo {

enum class PointLabel : std::uint8_t { Static = 0, Dynamic = 1 };

/// Whether the current scan is labeled before or after it is integrated in
/// online mode. ClassifyFirst is strictly causal.
enum class OnlineOrder { ClassifyFirst, IntegrateFirst };

/// Labels for one scan's retained points. labels[i] belongs to the raw point
/// at index retained_indices[i]; points dropped as non-finite carry no label.
struct ScanLabels {
  std::uint64_t scan_id = 0;
  std::vector<std::size_t> retained_indices;
  std::vector<PointLabel> labels;
};

using LabeledSequence = std::vector<ScanLabels>;

struct PipelineResult {
  VoidMap void_map;
  LabeledSequence labels;
  std::vector<double> integrate_seconds;  ///< wall clock around integrate_scan, per scan
};

/// Dynamic iff the point's voxel is void. Pure lookup.
PointLabel classify_point(const VoidMap& m, const Eigen::Vector3d& world_point);

/// Integrate every scan into one map, then label every retained point of
/// every scan against that final map.
PipelineResult run_offline(const std::vector<PosedScan>& scans, const Params& p);

/// Causal variant: scan k is labeled against the map accumulated from scans
/// 0..k-1 (or 0..k with OnlineOrder::IntegrateFirst).
PipelineResult run_online(const std::vector<PosedScan>& scans, const Params& p,
                          OnlineOrder order = OnlineOrder::ClassifyFirst);

struct CleanedCloud {
  std::vector<Eigen::Vector3d> static_points;   // world frame
  std::vector<Eigen::Vector3d> dynamic_points;  // world frame
};

/// Partition all retained points by label; sizes sum to the retained total.
CleanedCloud export_cleaned(const std::vector<PosedScan>& scans,
                            const LabeledSequence& labels);

}  // namespace dufo
